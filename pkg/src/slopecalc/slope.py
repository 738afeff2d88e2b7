"""Slope operators: maps y -> Phi(x, y) with f(y) - f(x) = Phi(x, y)(y - x).

Constructions provided here:

* ``canonical_slope``   derivative plus a rank-one correction along l(x, y)
* ``basis_slope``       secant values on an orthonormal frame adapted to y - x
* ``basis_slope_wform`` the same operator rebuilt from secants anchored at y
* ``one_dim_slope``     the (unique) difference quotient of a scalar function
* ``symmetric_part``    (Phi(x, y) + Phi(y, x)) / 2 of a two-point slope family
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .duality import coincident, dual_functional
from .errors import CoincidentPointsError, DimensionError, DomainError, NonFiniteError
from .vecspace import EUCLIDEAN, NormSpec, as_linop, as_vector

SLOPE_RTOL = 1e-10
FD_REL_STEP = 1e-5

SlopeFamily = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi]; infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be 1-D arrays of equal length")
        if np.any(lo >= hi):
            raise ValueError("box must satisfy lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n: int, r: float, center: float = 0.0) -> "Box":
        return cls(np.full(n, center - r), np.full(n, center + r))

    @classmethod
    def everywhere(cls, n: int) -> "Box":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return np.where(np.isfinite(self.lo + self.hi), 0.5 * (self.lo + self.hi), 0.0)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo + margin) and np.all(x <= self.hi - margin))

    def contains_ball(self, x, r: float) -> bool:
        # Euclidean ball of radius r fits iff every coordinate has room r
        return self.contains(x, margin=r)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))


@dataclass(frozen=True)
class DiffFunction:
    """A map R^n_in -> R^n_out on a box, optionally with an analytic Jacobian."""

    f: Callable[[np.ndarray], np.ndarray]
    n_in: int
    n_out: int
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[Box] = None
    name: str = "f"

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", Box.everywhere(self.n_in))
        elif self.domain.dim != self.n_in:
            raise DimensionError("domain dimension does not match n_in")

    def __call__(self, x) -> np.ndarray:
        x = as_vector(x, self.n_in)
        if not self.domain.contains(x):
            raise DomainError(f"{self.name}: point {x.tolist()} lies outside the domain")
        out = np.atleast_1d(np.asarray(self.f(x), dtype=float))
        if out.shape != (self.n_out,):
            raise DimensionError(f"{self.name} returned shape {out.shape}, expected ({self.n_out},)")
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{self.name} returned non-finite values at {x.tolist()}")
        return out



def _central_difference(f: DiffFunction, x: np.ndarray, h: float) -> np.ndarray:
    J = np.empty((f.n_out, f.n_in))
    for k in range(f.n_in):
        e = np.zeros(f.n_in)
        e[k] = h
        J[:, k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return J


def derivative_with_source(f: DiffFunction, x, h: Optional[float] = None) -> tuple[np.ndarray, str]:
    """Like ``derivative_oracle`` but also reports 'analytic' or 'richardson'."""
    x = as_vector(x, f.n_in)
    if f.jacobian is not None:
        if not f.domain.contains(x):
            raise DomainError(f"{f.name}: point {x.tolist()} lies outside the domain")
        return as_linop(f.jacobian(x), (f.n_out, f.n_in), name="jacobian"), "analytic"
    if h is None:
        h = FD_REL_STEP * max(1.0, float(np.linalg.norm(x)))
    if not f.domain.contains(x, margin=h):
        raise DomainError(f"{f.name}: {x.tolist()} is within {h:g} of the domain boundary")
    D_h = _central_difference(f, x, h)
    D_h2 = _central_difference(f, x, h / 2.0)
    return (4.0 * D_h2 - D_h) / 3.0, "richardson"


def derivative_oracle(f: DiffFunction, x, h: Optional[float] = None) -> np.ndarray:
    """Df(x): the analytic Jacobian if present, else Richardson-extrapolated
    central differences at steps h and h/2."""
    return derivative_with_source(f, x, h)[0]


@dataclass(frozen=True)
class SlopeOp:
    """A slope function Phi_x: y -> Phi(x, y) based at ``base``."""

    base: np.ndarray
    eval_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str
    function: Optional[DiffFunction] = field(default=None, repr=False)
    derivative_source: str = "n/a"

    @property
    def n_in(self) -> int:
        return self.base.size

    def __call__(self, y) -> np.ndarray:
        return as_linop(self.eval_fn(as_vector(y, self.base.size, name="y")), name=f"{self.kind} slope")

    @property
    def derivative(self) -> np.ndarray:
        return self(self.base)


def canonical_slope(f: DiffFunction, x, spec: NormSpec = EUCLIDEAN, *, h: Optional[float] = None) -> SlopeOp:
    """Canonical slope: Phi(y)z = r(y) <l(x,y), z> / ||y-x|| + Df(x)z,
    with r(y) = f(y) - f(x) - Df(x)(y - x), and Phi(x) = Df(x)."""
    x = as_vector(x, f.n_in)
    spec.check_dim(x.size)
    Df, source = derivative_with_source(f, x, h)
    fx = f(x)

    def eval_fn(y):
        if coincident(x, y, spec):
            return Df.copy()
        d = y - x
        ell = dual_functional(x, y, spec)
        r = f(y) - fx - Df @ d
        return Df + np.outer(r / spec.norm(d), ell.coeffs)

    return SlopeOp(x, eval_fn, "canonical", f, source)


def one_dim_slope(g: DiffFunction, s) -> SlopeOp:
    """Difference quotient (g(t) - g(s)) / (t - s), with g'(s) on the diagonal."""
    if g.n_in != 1 or g.n_out != 1:
        raise DimensionError("one_dim_slope needs a scalar function of one variable")
    s = as_vector(s, 1, name="s")
    gs = g(s)
    gp, source = derivative_with_source(g, s)

    def eval_fn(t):
        if t[0] == s[0]:
            return gp.copy()
        return ((g(t) - gs) / (t[0] - s[0])).reshape(1, 1)

    return SlopeOp(s, eval_fn, "one_dim", g, source)


def orthonormal_completion(v1: np.ndarray) -> np.ndarray:
    """Orthonormal matrix whose first column is the unit vector ``v1``.

    n = 2 uses the quarter-turn rotation; n > 2 uses the Householder
    reflection built from v1 + sign(v1[0]) e1, whose columns 2..n are
    orthogonal to v1.
    """
    v1 = np.asarray(v1, dtype=float)
    n = v1.size
    V = np.empty((n, n))
    V[:, 0] = v1
    if n == 1:
        return V
    if n == 2:
        V[:, 1] = (-v1[1], v1[0])
        return V
    sigma = 1.0 if v1[0] >= 0 else -1.0
    u = v1.copy()
    u[0] += sigma
    H = np.eye(n) - (2.0 / (u @ u)) * np.outer(u, u)
    V[:, 1:] = H[:, 1:]
    return V


def _frame(x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    if coincident(x, y):
        raise CoincidentPointsError("basis slope is undefined for coincident points")
    d = y - x
    rho = float(np.linalg.norm(d))
    return rho, orthonormal_completion(d / rho)


def basis_slope(f: DiffFunction, x, y) -> np.ndarray:
    """Phi(x, y) fixed by Phi v_k = (f(x + rho v_k) - f(x)) / rho, rho = ||y - x||,
    on the frame v_1 = (y - x)/rho, v_2..v_n from ``orthonormal_completion``."""
    x = as_vector(x, f.n_in)
    y = as_vector(y, f.n_in, name="y")
    rho, V = _frame(x, y)
    fx = f(x)
    P = np.empty((f.n_out, f.n_in))
    P[:, 0] = (f(y) - fx) / rho
    for k in range(1, f.n_in):
        P[:, k] = (f(x + rho * V[:, k]) - fx) / rho
    return P @ V.T


def basis_slope_wform(f: DiffFunction, x, y) -> np.ndarray:
    """The basis slope rebuilt from secants anchored at y.

    With w_1 = -v_1 and w_k = v_k - v_1, Phi w_k = (f(y + rho w_k) - f(y)) / rho;
    the operator is recovered by solving against the w-frame.
    """
    x = as_vector(x, f.n_in)
    y = as_vector(y, f.n_in, name="y")
    rho, V = _frame(x, y)
    W = V - V[:, [0]]
    W[:, 0] = -V[:, 0]
    fy = f(y)
    Q = np.empty((f.n_out, f.n_in))
    Q[:, 0] = (f(x) - fy) / rho
    for k in range(1, f.n_in):
        Q[:, k] = (f(y + rho * W[:, k]) - fy) / rho
    # Phi W = Q  <=>  W^T Phi^T = Q^T
    return np.linalg.solve(W.T, Q.T).T


def basis_slope_op(f: DiffFunction, x) -> SlopeOp:
    """``basis_slope`` at a fixed base, with Df(x) on the diagonal."""
    x = as_vector(x, f.n_in)
    Df, source = derivative_with_source(f, x)

    def eval_fn(y):
        if coincident(x, y):
            return Df.copy()
        return basis_slope(f, x, y)

    return SlopeOp(x, eval_fn, "basis", f, source)


def slope_family(f: DiffFunction, kind: str = "canonical", spec: NormSpec = EUCLIDEAN) -> SlopeFamily:
    """Two-point form (x, y) -> Phi(x, y) of a slope construction."""
    if kind == "canonical":
        return lambda x, y: canonical_slope(f, x, spec)(y)
    if kind == "basis":
        return lambda x, y: basis_slope_op(f, x)(y)
    if kind == "one_dim":
        return lambda x, y: one_dim_slope(f, x)(y)
    raise ValueError(f"unknown slope kind {kind!r}")


def symmetric_part(family: SlopeFamily, x, y) -> np.ndarray:
    x = as_vector(x)
    y = as_vector(y, x.size, name="y")
    return 0.5 * (as_linop(family(x, y)) + as_linop(family(y, x)))


def custom_slope(f: DiffFunction, x, family: SlopeFamily) -> SlopeOp:
    """Wrap a user-supplied two-point slope family at a fixed base."""
    x = as_vector(x, f.n_in)
    return SlopeOp(x, lambda y: family(x, y), "custom", f, "custom")


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def slope_residual(f: DiffFunction, x, y, phi) -> tuple[float, float]:
    """Return (||f(y) - f(x) - Phi (y - x)||, ||f(y) - f(x)||)."""
    x = as_vector(x, f.n_in)
    y = as_vector(y, f.n_in, name="y")
    df = f(y) - f(x)
    res = df - as_linop(phi) @ (y - x)
    return float(np.linalg.norm(res)), float(np.linalg.norm(df))


def satisfies_slope_identity(f: DiffFunction, x, y, phi, rtol: float = SLOPE_RTOL) -> bool:
    res, scale = slope_residual(f, x, y, phi)
    return res <= rtol * (1.0 + scale)


def dyadic_tail_converges(values: Sequence[float], threshold: float, tail: int = 5, floor: float = 1e-8) -> bool:
    """Finite stand-in for a limit: the last ``tail`` values are below
    ``threshold`` and non-increasing once clamped at the roundoff ``floor``."""
    v = np.maximum(np.asarray(values, dtype=float)[-tail:], floor)
    return bool(np.all(np.diff(v) <= 0) and np.all(v < threshold))


def continuity_profile(phi_of: Callable[[float], np.ndarray], target: np.ndarray, ks: Iterable[int] = range(1, 21)) -> np.ndarray:
    """||phi_of(2^-k) - target|| (Frobenius) for each k."""
    return np.array([np.linalg.norm(as_linop(phi_of(2.0 ** -k)) - target) for k in ks])
