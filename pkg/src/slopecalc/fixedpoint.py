"""Fixed points of uniform contractions x = f(x, lam) and how they move with lam."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import partial_slope
from .errors import ContractionError, ConvergenceError, DimensionError, DomainError
from .slope import Box, DiffFunction, canonical_slope, derivative_oracle
from .vecspace import as_linop, as_vector, op_norm

NEUMANN_TOL = 1e-14


@dataclass(frozen=True)
class ContractionProblem:
    """x -> f(x, lam) with ||f(x, lam) - f(y, lam)|| <= L ||x - y|| for every lam.

    ``dx`` and ``dlam`` are optional analytic partial derivatives (x, lam) -> matrix.
    """

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_dim: int
    lam_dim: int
    L: float
    x_box: Box
    lam_box: Box
    tol: float = 1e-12
    dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    dlam: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = "problem"

    def __post_init__(self):
        if not (0.0 < self.L < 1.0):
            raise ValueError(f"contraction constant must lie in (0, 1), got {self.L}")
        if self.x_box.dim != self.x_dim or self.lam_box.dim != self.lam_dim:
            raise DimensionError("box dimensions do not match x_dim / lam_dim")

    def __call__(self, x, lam) -> np.ndarray:
        out = np.atleast_1d(np.asarray(self.f(np.asarray(x, float), np.asarray(lam, float)), dtype=float))
        if out.shape != (self.x_dim,):
            raise DimensionError(f"{self.name} returned shape {out.shape}, expected ({self.x_dim},)")
        return out

    def joint(self) -> DiffFunction:
        """f as a single function of w = (x, lam) on x_box x lam_box."""
        n = self.x_dim
        jac = None
        if self.dx is not None and self.dlam is not None:
            jac = lambda w: np.hstack([as_linop(self.dx(w[:n], w[n:])), as_linop(self.dlam(w[:n], w[n:]))])
        box = Box(np.concatenate([self.x_box.lo, self.lam_box.lo]), np.concatenate([self.x_box.hi, self.lam_box.hi]))
        return DiffFunction(lambda w: self(w[:n], w[n:]), n + self.lam_dim, n, jac, box, name=self.name)

    def partials(self, x, lam) -> tuple[np.ndarray, np.ndarray]:
        """(D_x f, D_lam f) at (x, lam); finite differences on the joint map when not analytic."""
        x = as_vector(x, self.x_dim)
        lam = as_vector(lam, self.lam_dim, name="lam")
        if self.dx is not None and self.dlam is not None:
            return (as_linop(self.dx(x, lam), (self.x_dim, self.x_dim)),
                    as_linop(self.dlam(x, lam), (self.x_dim, self.lam_dim)))
        J = derivative_oracle(self.joint(), np.concatenate([x, lam]))
        return J[:, : self.x_dim], J[:, self.x_dim:]


@dataclass
class FixedPointResult:
    x: np.ndarray
    iterations: int
    residual: float
    sensitivity: Optional[np.ndarray] = None
    neumann_terms: int = 0


def iteration_cap(p: ContractionProblem) -> int:
    # a-priori count for the tolerance plus enough steps to cross the box
    span = max(1.0, float(np.linalg.norm(p.x_box.width)))
    return math.ceil(math.log(p.tol) / math.log(p.L)) + math.ceil(math.log(span) / -math.log(p.L)) + 20


def solve(p: ContractionProblem, lam, x0=None) -> FixedPointResult:
    """Picard iteration from the centre of x_box (or ``x0``).

    Stops once ||x_{k+1} - x_k|| <= tol (1 - L) / L, which bounds the distance
    to the fixed point by tol.
    """
    lam = as_vector(lam, p.lam_dim, name="lam")
    if not p.lam_box.contains(lam):
        raise DomainError(f"lambda {lam.tolist()} lies outside the parameter box")
    x = p.x_box.center.copy() if x0 is None else as_vector(x0, p.x_dim, name="x0")
    step_tol = p.tol * (1.0 - p.L) / p.L
    cap = iteration_cap(p)
    for k in range(1, cap + 1):
        x_new = p(x, lam)
        if not np.all(np.isfinite(x_new)):
            raise ContractionError(f"{p.name}: iterate became non-finite at step {k}")
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= step_tol:
            residual = float(np.linalg.norm(p(x, lam) - x))
            return FixedPointResult(x, k, residual)
    raise ContractionError(f"{p.name}: no convergence within {cap} Picard steps; is f really a contraction?")


def continuity_bound(p: ContractionProblem, lam, mu) -> dict:
    """Compare ||x_mu - x_lam|| with ||f(x_lam, mu) - f(x_lam, lam)|| / (1 - L)."""
    x_lam = solve(p, lam).x
    x_mu = solve(p, mu).x
    lhs = float(np.linalg.norm(x_mu - x_lam))
    rhs = float(np.linalg.norm(p(x_lam, mu) - p(x_lam, lam))) / (1.0 - p.L)
    slack = 1e-9 * (1.0 + max(np.linalg.norm(x_lam), np.linalg.norm(x_mu)))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + slack), "x_lam": x_lam, "x_mu": x_mu}


def neumann_solve(K, B, L: float, tol: float = NEUMANN_TOL) -> tuple[np.ndarray, int]:
    """sum_k K^k B until a term's norm drops below tol * max(1, ||B||)."""
    K = as_linop(K)
    B = as_linop(B)
    k_max = math.ceil(math.log(tol) / math.log(L)) + 8
    thresh = tol * max(1.0, float(op_norm(B)))
    term = B.copy()
    total = B.copy()
    for k in range(1, k_max + 1):
        if float(op_norm(term)) < thresh:
            return total, k
        term = K @ term
        total = total + term
    raise ConvergenceError(f"Neumann series did not converge in {k_max} terms; ||D_x f|| >= 1?")


def sensitivity(p: ContractionProblem, lam, method: str = "neumann", x_lam=None) -> np.ndarray:
    """d x_lam / d lam = [I - D_x f]^-1 D_lam f at the fixed point."""
    return _sensitivity(p, lam, method, x_lam)[0]


def _sensitivity(p, lam, method, x_lam=None):
    lam = as_vector(lam, p.lam_dim, name="lam")
    if x_lam is None:
        x_lam = solve(p, lam).x
    Dx, Dlam = p.partials(x_lam, lam)
    if method == "neumann":
        return neumann_solve(Dx, Dlam, p.L)
    if method == "direct":
        return np.linalg.solve(np.eye(p.x_dim) - Dx, Dlam), 0
    raise ValueError("method must be 'neumann' or 'direct'")


def solve_with_sensitivity(p: ContractionProblem, lam, method: str = "neumann") -> FixedPointResult:
    res = solve(p, lam)
    S, terms = _sensitivity(p, lam, method, res.x)
    res.sensitivity = S
    res.neumann_terms = terms
    return res


def slope_parts(p: ContractionProblem, lam, mu, x_lam=None, x_mu=None) -> tuple[np.ndarray, np.ndarray]:
    """Partial slopes (Phi_1, Phi_2) of the canonical slope of f on the product space.

    Phi_1 is based at (x_lam, mu) and evaluated at x_mu on the x block;
    Phi_2 is based at (x_lam, lam) and evaluated at mu on the lam block.
    """
    lam = as_vector(lam, p.lam_dim, name="lam")
    mu = as_vector(mu, p.lam_dim, name="mu")
    x_lam = solve(p, lam).x if x_lam is None else x_lam
    x_mu = solve(p, mu).x if x_mu is None else x_mu
    F = p.joint()
    n = p.x_dim
    phi_1 = partial_slope(canonical_slope(F, np.concatenate([x_lam, mu])), 1, n)(x_mu)
    phi_2 = partial_slope(canonical_slope(F, np.concatenate([x_lam, lam])), 2, n)(mu)
    return phi_1, phi_2


def fixed_point_slope(p: ContractionProblem, lam, mu) -> np.ndarray:
    """Psi(lam, mu) = [I - Phi_1]^-1 Phi_2 with x_mu = x_lam + Psi (mu - lam).

    Raises ContractionError when ||Phi_1|| >= 1, i.e. mu is too far from lam
    for the Neumann argument.
    """
    lam = as_vector(lam, p.lam_dim, name="lam")
    mu = as_vector(mu, p.lam_dim, name="mu")
    phi_1, phi_2 = slope_parts(p, lam, mu)
    nrm = float(op_norm(phi_1))
    if nrm >= 1.0:
        raise ContractionError(f"||Phi_1|| = {nrm:.4f} >= 1: shrink |mu - lam|")
    return np.linalg.solve(np.eye(p.x_dim) - phi_1, phi_2)


def find_delta(p: ContractionProblem, lam, n_dirs: int = 8, max_halvings: int = 40, seed: int = 0) -> float:
    """Largest radius (halving from 0.1 * box width) where ||Phi_1|| < 1 on probe directions.

    The probes are the coordinate directions (both signs) and ``n_dirs``
    seeded random unit vectors; a radius is accepted when every probe that
    stays inside the parameter box passes.
    """
    lam = as_vector(lam, p.lam_dim, name="lam")
    rng = np.random.default_rng(seed)
    eye = np.eye(p.lam_dim)
    rand = rng.standard_normal((n_dirs, p.lam_dim))
    dirs = np.vstack([eye, -eye, rand / np.linalg.norm(rand, axis=1, keepdims=True)])
    x_lam = solve(p, lam).x
    delta = 0.1 * float(np.min(p.lam_box.width))
    for _ in range(max_halvings):
        ok = True
        for d in dirs:
            mu = lam + delta * d
            if not p.lam_box.contains(mu):
                continue
            phi_1, _ = slope_parts(p, lam, mu, x_lam=x_lam)
            if float(op_norm(phi_1)) >= 1.0:
                ok = False
                break
        if ok:
            return delta
        delta *= 0.5
    raise ContractionError("no radius found with ||Phi_1|| < 1")


def sweep(p: ContractionProblem, lams: Sequence, method: str = "neumann") -> list[FixedPointResult]:
    return [solve_with_sensitivity(p, lam, method) for lam in lams]
