"""Executable diagnostics for the analytic results on slope functions.

None of these prove anything: they search sampled points for witnesses or
refutations and report what they found, together with the sampling that
was used.  Operator norms are Euclidean-induced throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm as _gauss
from scipy.stats import qmc

from .errors import DimensionError, DomainError
from .slope import (
    SLOPE_RTOL,
    DiffFunction,
    SlopeFamily,
    SlopeOp,
    canonical_slope,
    derivative_oracle,
)
from .vecspace import EUCLIDEAN, NormSpec, as_linop, as_vector, op_norm

logger = logging.getLogger(__name__)

MVI_ATOL = 1e-9
BOUND_ATOL = 1e-8
ZERO_MODULUS = 1e-10


@dataclass(frozen=True)
class SegmentSampling:
    """Interior parameters 0 < t_1 < ... < t_N < 1 on the segment [x, y]."""

    t_values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("t_values must be a non-empty 1-D sequence")
        if not (np.all(t > 0) and np.all(t < 1) and np.all(np.diff(t) > 0)):
            raise ValueError("t_values must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "t_values", t)

    @classmethod
    def uniform(cls, count: int = 1001) -> "SegmentSampling":
        return cls(np.arange(1, count + 1) / (count + 1))


def _check_segment(f: DiffFunction, x: np.ndarray, y: np.ndarray) -> None:
    # boxes are convex, so both endpoints inside means the segment is inside
    for p, label in ((x, "x"), (y, "y")):
        if not f.domain.contains(p):
            raise DomainError(f"segment endpoint {label} = {p.tolist()} lies outside the domain of {f.name}")


# ---------------------------------------------------------------------------
# Mean value inequality
# ---------------------------------------------------------------------------

@dataclass
class MVIResult:
    found: bool
    lhs: float
    t: Optional[float]
    c: Optional[np.ndarray]
    rhs: Optional[float]
    max_rhs: float
    t_at_max: float
    n_samples: int


def mvi_witness(f: DiffFunction, x, y, A, sampling: Optional[SegmentSampling] = None,
                atol: float = MVI_ATOL) -> MVIResult:
    """First sampled c = x + t(y-x) with ||Df(c)(y-x) - A(y-x)|| >= ||f(y)-f(x)-A(y-x)|| - atol.

    When no sample qualifies the result has ``found=False`` and carries the
    largest right-hand side seen; that means the sampling is too coarse or a
    hypothesis (differentiability on the segment) fails.
    """
    x = as_vector(x, f.n_in)
    y = as_vector(y, f.n_in, name="y")
    A = as_linop(A, (f.n_out, f.n_in))
    if np.array_equal(x, y):
        raise ValueError("mvi_witness needs distinct points")
    _check_segment(f, x, y)
    sampling = sampling or SegmentSampling.uniform()
    d = y - x
    Ad = A @ d
    lhs = float(np.linalg.norm(f(y) - f(x) - Ad))
    best, t_best = -np.inf, float("nan")
    for t in sampling.t_values:
        c = x + t * d
        rhs = float(np.linalg.norm(derivative_oracle(f, c) @ d - Ad))
        if rhs > best:
            best, t_best = rhs, float(t)
        if rhs >= lhs - atol:
            return MVIResult(True, lhs, float(t), c, rhs, best, t_best, sampling.t_values.size)
    logger.warning("no mean value witness among %d samples (lhs=%.3e, max rhs=%.3e)",
                   sampling.t_values.size, lhs, best)
    return MVIResult(False, lhs, None, None, None, best, t_best, sampling.t_values.size)


@dataclass
class BoundCheckResult:
    holds: bool
    lhs: float
    t: Optional[float]
    c: Optional[np.ndarray]
    rhs: Optional[float]
    min_rhs: float


def canonical_slope_bound_check(f: DiffFunction, x, y, A, spec: NormSpec = EUCLIDEAN,
                                sampling: Optional[SegmentSampling] = None,
                                atol: float = BOUND_ATOL) -> BoundCheckResult:
    """Look for c on [x, y] with ||Phi(x,y) - A|| <= ||Df(c) - Df(x)|| + ||Df(x) - A||.

    Phi is the canonical slope for ``spec``.  Among the qualifying samples the
    one with the smallest right-hand side is reported.
    """
    x = as_vector(x, f.n_in)
    y = as_vector(y, f.n_in, name="y")
    A = as_linop(A, (f.n_out, f.n_in))
    _check_segment(f, x, y)
    sampling = sampling or SegmentSampling.uniform()
    slope = canonical_slope(f, x, spec)
    Dfx = slope.derivative
    lhs = float(op_norm(slope(y) - A))
    base_gap = float(op_norm(Dfx - A))
    rhs_all = np.array([
        float(op_norm(derivative_oracle(f, x + t * (y - x)) - Dfx)) + base_gap
        for t in sampling.t_values
    ])
    ok = rhs_all >= lhs - atol
    if not np.any(ok):
        return BoundCheckResult(False, lhs, None, None, None, float(rhs_all.min()))
    i = int(np.flatnonzero(ok)[np.argmin(rhs_all[ok])])
    t = float(sampling.t_values[i])
    return BoundCheckResult(True, lhs, t, x + t * (y - x), float(rhs_all[i]), float(rhs_all.min()))


# ---------------------------------------------------------------------------
# Joint continuity at the diagonal
# ---------------------------------------------------------------------------

@dataclass
class ContinuityProbeResult:
    radii: np.ndarray
    moduli: np.ndarray
    verdict: str
    side: str
    grid_per_radius: int
    seed: int


def ball_grid(n: int, count: int, n_balls: int = 1, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the unit ball of R^n, shape (count, n_balls, n).

    Each point gets a Gaussian-quantile direction and a u^(1/n) radius, so the
    points are spread uniformly in volume.
    """
    d = n_balls * (n + 1)
    u = qmc.Halton(d, scramble=True, seed=seed).random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12).reshape(count, n_balls, n + 1)
    g = _gauss.ppf(u[..., :n])
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return g * u[..., n:] ** (1.0 / n)


def classify_moduli(radii: Sequence[float], moduli: Sequence[float]) -> str:
    """Verdict for a continuity probe.

    converging:      the final modulus is below ZERO_MODULUS, or the last three
                     moduli are non-increasing and the final one is < 0.1 * first
    non_converging:  final >= 0.5 * first while the radii span a factor >= 16
    inconclusive:    anything else
    """
    r = np.asarray(radii, dtype=float)
    m = np.asarray(moduli, dtype=float)
    first, final = m[0], m[-1]
    if final <= ZERO_MODULUS:
        return "converging"
    tail = m[-3:]
    if np.all(np.diff(tail) <= 0) and final < 0.1 * first:
        return "converging"
    if final >= 0.5 * first and r[0] / r[-1] >= 16:
        return "non_converging"
    return "inconclusive"


def c1_probe(f: DiffFunction, x0, spec: NormSpec = EUCLIDEAN, radii: Optional[Sequence[float]] = None,
             grid_per_radius: int = 128, *, side: str = "joint", family: Optional[SlopeFamily] = None,
             seed: int = 0) -> ContinuityProbeResult:
    """Estimate sup ||Phi(x, y) - Df(x0)|| over x, y in B(x0, r) for shrinking r.

    ``side`` selects which arguments move: "joint" samples both, "x" fixes
    y = x0, "y" fixes x = x0.  ``family`` replaces the canonical slope by any
    two-point slope (x, y) -> Phi(x, y).
    """
    x0 = as_vector(x0, f.n_in, name="x0")
    if side not in ("joint", "x", "y"):
        raise ValueError("side must be 'joint', 'x' or 'y'")
    radii = np.asarray(radii if radii is not None else 0.5 ** np.arange(1, 9), dtype=float)
    if radii.ndim != 1 or radii.size < 3 or np.any(np.diff(radii) >= 0) or np.any(radii <= 0):
        raise ValueError("radii must be at least three strictly decreasing positive numbers")
    if not f.domain.contains_ball(x0, radii[0]):
        raise DomainError(f"ball of radius {radii[0]} around {x0.tolist()} leaves the domain of {f.name}")

    if family is None:
        family = lambda x, y: canonical_slope(f, x, spec)(y)
        target = derivative_oracle(f, x0)
    else:
        target = as_linop(family(x0, x0))

    n = x0.size
    grid = ball_grid(n, grid_per_radius, 2 if side == "joint" else 1, seed)
    moduli = np.empty(radii.size)
    for i, r in enumerate(radii):
        worst = 0.0
        for pt in grid:
            if side == "joint":
                x, y = x0 + r * pt[0], x0 + r * pt[1]
            elif side == "x":
                x, y = x0 + r * pt[0], x0
            else:
                x, y = x0, x0 + r * pt[0]
            worst = max(worst, float(op_norm(as_linop(family(x, y)) - target)))
        moduli[i] = worst
    return ContinuityProbeResult(radii, moduli, classify_moduli(radii, moduli), side, grid_per_radius, seed)


def separate_continuity(family: SlopeFamily, x0, z, target, ks: Sequence[int] = range(1, 21)) -> tuple[np.ndarray, np.ndarray]:
    """Profiles along t = 2^-k of ||Phi(x0, x0 + t z) - target|| (y side) and
    ||Phi(x0 - t z, x0) - target|| (x side)."""
    x0 = as_vector(x0, name="x0")
    z = as_vector(z, x0.size, name="z")
    target = as_linop(target)
    y_side, x_side = [], []
    for k in ks:
        t = 2.0 ** -k
        y_side.append(float(op_norm(as_linop(family(x0, x0 + t * z)) - target)))
        x_side.append(float(op_norm(as_linop(family(x0 - t * z, x0)) - target)))
    return np.array(y_side), np.array(x_side)


# ---------------------------------------------------------------------------
# Symmetry of second derivatives
# ---------------------------------------------------------------------------

@dataclass
class SchwarzResult:
    s_values: np.ndarray
    e_uv: np.ndarray
    e_vu: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return np.linalg.norm(self.e_uv - self.e_vu, axis=1)


def schwarz_limit(f: DiffFunction, x, u, v, s_values: Sequence[float]) -> SchwarzResult:
    """(g(s) - g(0)) / s^2 with g(t) = f(x + s u + t v), for both orders of (u, v).

    Probe points are formed as x + (a*p + b*q) so that both orderings visit
    bit-identical points.
    """
    x = as_vector(x, f.n_in)
    u = as_vector(u, f.n_in, name="u")
    v = as_vector(v, f.n_in, name="v")
    s_values = np.asarray(s_values, dtype=float)
    if s_values.ndim != 1 or np.any(s_values <= 0) or np.any(np.diff(s_values) >= 0):
        raise ValueError("s_values must be strictly decreasing positive numbers")

    def quotient(p, q, s):
        g_s = f(x + (s * p + s * q)) - f(x + s * q)
        g_0 = f(x + s * p) - f(x)
        return (g_s - g_0) / (s * s)

    e_uv = np.array([quotient(u, v, s) for s in s_values])
    e_vu = np.array([quotient(v, u, s) for s in s_values])
    return SchwarzResult(s_values, e_uv, e_vu)


def mixed_second_derivative(f: DiffFunction, x, u, v, h: float = 1e-3) -> np.ndarray:
    """d/dt [Df(x + t u) v] at t = 0, by Richardson-extrapolated central differences.

    An oracle for D^2 f(x)[u, v] that is independent of ``schwarz_limit``:
    it differentiates the Jacobian instead of taking second differences of f.
    """
    x = as_vector(x, f.n_in)
    u = as_vector(u, f.n_in, name="u")
    v = as_vector(v, f.n_in, name="v")

    def central(step):
        return (derivative_oracle(f, x + step * u) @ v - derivative_oracle(f, x - step * u) @ v) / (2 * step)

    return (4.0 * central(h / 2) - central(h)) / 3.0


# ---------------------------------------------------------------------------
# Lipschitz bounds
# ---------------------------------------------------------------------------

@dataclass
class LipschitzReport:
    L: float
    op_norms: np.ndarray
    sup_op_norm: float
    forward_violations: list = field(default_factory=list)
    converse_violations: list = field(default_factory=list)
    n_pairs: int = 0

    @property
    def forward_ok(self) -> bool:
        return not self.forward_violations

    @property
    def converse_ok(self) -> bool:
        return not self.converse_violations

    @property
    def passed(self) -> bool:
        return self.forward_ok and self.converse_ok


def lipschitz_check(f: DiffFunction, L: float, xs, pairs=None, atol: float = 1e-9, rtol: float = 1e-9,
                    sampling: Optional[SegmentSampling] = None) -> LipschitzReport:
    """Forward: ||Df(x)|| <= L at every sample.

    Converse, on sampled pairs: ||f(y) - f(x)|| <= L ||y - x||.  The constant
    is L itself, not the sampled sup of ||Df||, which undershoots whenever the
    grid misses the maximiser.  A failing pair is reported with its mean value
    witness c (A = 0), where ||Df(c)|| must then exceed L.

    ``pairs`` is a sequence of index pairs into ``xs``; by default each sample
    is paired with the next one (cyclically).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != f.n_in:
        raise DimensionError(f"samples must have {f.n_in} columns")
    sampling = sampling or SegmentSampling.uniform(101)
    norms = np.array([float(op_norm(derivative_oracle(f, x))) for x in xs])
    report = LipschitzReport(float(L), norms, float(norms.max()))
    for i, (x, nx) in enumerate(zip(xs, norms)):
        if nx > L + atol:
            report.forward_violations.append({"index": i, "x": x.tolist(), "op_norm": nx, "L": float(L)})
    if pairs is None:
        pairs = [(i, (i + 1) % len(xs)) for i in range(len(xs))]
    zero = np.zeros((f.n_out, f.n_in))
    for i, j in pairs:
        if i == j or np.array_equal(xs[i], xs[j]):
            continue
        report.n_pairs += 1
        lhs = float(np.linalg.norm(f(xs[j]) - f(xs[i])))
        dist = float(np.linalg.norm(xs[j] - xs[i]))
        if lhs <= L * dist * (1 + rtol):
            continue
        w = mvi_witness(f, xs[i], xs[j], zero, sampling)
        c_norm = float(op_norm(derivative_oracle(f, w.c))) if w.found else float("nan")
        report.converse_violations.append({"pair": [int(i), int(j)], "lhs": lhs, "rhs": L * dist,
                                           "witness_found": w.found, "witness_op_norm": c_norm})
    return report


# ---------------------------------------------------------------------------
# Directional limits
# ---------------------------------------------------------------------------

@dataclass
class DirectionalLimit:
    t_values: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    identity_ok: bool
    limit: np.ndarray

    @property
    def tail_error(self) -> float:
        return float(np.linalg.norm(self.values[-1] - self.limit))


def directional_limit(f: DiffFunction, Phi: SlopeOp, z, t_values: Sequence[float],
                      rtol: float = SLOPE_RTOL) -> DirectionalLimit:
    """Phi(x + t z) z along t, checked against f(x + t z) - f(x) at every t.

    The check multiplies through by t (the slope identity along the ray) so it
    does not lose digits to the division in the difference quotient.
    """
    x = Phi.base
    z = as_vector(z, x.size, name="z")
    t_values = np.asarray(t_values, dtype=float)
    fx = f(x)
    vals, res = [], []
    for t in t_values:
        y = x + t * z
        if not f.domain.contains(y):
            raise DomainError(f"x + t z leaves the domain at t = {t:g}")
        Pz = Phi(y) @ z
        df = f(y) - fx
        vals.append(Pz)
        res.append(float(np.linalg.norm(df - t * Pz)) / (1.0 + float(np.linalg.norm(df))))
    res = np.array(res)
    return DirectionalLimit(t_values, np.array(vals), res, bool(np.all(res <= rtol)), Phi.derivative @ z)
