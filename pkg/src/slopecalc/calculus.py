"""Differentiation rules at the level of slope functions.

Each combinator returns a new ``SlopeOp`` whose ``function`` is the composite
it slopes, so the usual identity and diagonal checks apply to the result.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, SingularOperatorError
from .slope import Box, DiffFunction, SlopeOp
from .vecspace import BilinearMap, as_linop, op_norm

COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Composite functions (what the combinators slope)
# ---------------------------------------------------------------------------

def linear_combination(lam: float, f: DiffFunction, mu: float, g: DiffFunction) -> DiffFunction:
    if (f.n_in, f.n_out) != (g.n_in, g.n_out):
        raise DimensionError("linear combination needs functions with matching dimensions")
    jac = None
    if f.jacobian is not None and g.jacobian is not None:
        jac = lambda x: lam * np.asarray(f.jacobian(x)) + mu * np.asarray(g.jacobian(x))
    lo = np.maximum(f.domain.lo, g.domain.lo)
    hi = np.minimum(f.domain.hi, g.domain.hi)
    return DiffFunction(lambda x: lam * f(x) + mu * g(x), f.n_in, f.n_out, jac, Box(lo, hi),
                        name=f"{lam:g}*{f.name}+{mu:g}*{g.name}")


def compose(f: DiffFunction, g: DiffFunction) -> DiffFunction:
    """x -> f(g(x))."""
    if g.n_out != f.n_in:
        raise DimensionError("compose: g's output dimension must equal f's input dimension")
    jac = None
    if f.jacobian is not None and g.jacobian is not None:
        jac = lambda x: np.asarray(f.jacobian(g(x))) @ np.asarray(g.jacobian(x))
    return DiffFunction(lambda x: f(g(x)), g.n_in, f.n_out, jac, g.domain, name=f"{f.name}o{g.name}")


def bilinear_compose(b: BilinearMap, f1: DiffFunction, f2: DiffFunction) -> DiffFunction:
    """x -> b(f1(x), f2(x))."""
    n1, n2, m = b.dims
    if f1.n_in != f2.n_in or f1.n_out != n1 or f2.n_out != n2:
        raise DimensionError("bilinear_compose: dimensions do not fit the bilinear map")
    lo = np.maximum(f1.domain.lo, f2.domain.lo)
    hi = np.minimum(f1.domain.hi, f2.domain.hi)
    return DiffFunction(lambda x: b(f1(x), f2(x)), f1.n_in, m, None, Box(lo, hi),
                        name=f"{b.name}({f1.name},{f2.name})")


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------

def _same_base(a: SlopeOp, b: SlopeOp) -> None:
    if a.base.shape != b.base.shape or not np.array_equal(a.base, b.base):
        raise DimensionError("slopes must share the same base point")


def combine_linear(lam: float, Phi: SlopeOp, mu: float, Psi: SlopeOp) -> SlopeOp:
    """Slope of lam*f + mu*g: y -> lam*Phi(y) + mu*Psi(y)."""
    _same_base(Phi, Psi)
    fn = None
    if Phi.function is not None and Psi.function is not None:
        fn = linear_combination(lam, Phi.function, mu, Psi.function)

    def eval_fn(y):
        A, B = Phi(y), Psi(y)
        if A.shape != B.shape:
            raise DimensionError("slopes have different operator shapes")
        return lam * A + mu * B

    return SlopeOp(Phi.base, eval_fn, "combinator", fn, "combinator")


def chain(Phi_f: SlopeOp, Psi_g: SlopeOp, g: DiffFunction, *, atol: float = 1e-12) -> SlopeOp:
    """Slope of f o g at x: y -> Phi_f(g(y)) Psi_g(y).

    ``Phi_f`` must be based at g(x) and ``Psi_g`` at x.
    """
    x = Psi_g.base
    gx = g(x)
    if Phi_f.base.shape != gx.shape or np.max(np.abs(Phi_f.base - gx)) > atol * max(1.0, np.max(np.abs(gx))):
        raise DimensionError("outer slope must be based at g(x)")
    f = Phi_f.function
    fn = compose(f, g) if f is not None else None

    def eval_fn(y):
        gy = g(y)
        if f is not None and not f.domain.contains(gy):
            raise DomainError(f"composition range violation: g(y) = {gy.tolist()} leaves the outer domain")
        return Phi_f(gy) @ Psi_g(y)

    return SlopeOp(x, eval_fn, "combinator", fn, "combinator")


def product(b: BilinearMap, Phi1: SlopeOp, Phi2: SlopeOp, f1: DiffFunction, f2: DiffFunction) -> SlopeOp:
    """Slope of y -> b(f1(y), f2(y)):  z -> b(Phi1(y)z, f2(y)) + b(f1(x), Phi2(y)z)."""
    _same_base(Phi1, Phi2)
    n1, n2, m = b.dims
    if f1.n_out != n1 or f2.n_out != n2 or f1.n_in != f2.n_in:
        raise DimensionError("product: dimensions do not fit the bilinear map")
    x = Phi1.base
    f1x = f1(x)
    n = x.size

    def eval_fn(y):
        P1, P2 = Phi1(y), Phi2(y)
        f2y = f2(y)
        out = np.empty((m, n))
        for k in range(n):
            out[:, k] = b(P1[:, k], f2y) + b(f1x, P2[:, k])
        return out

    return SlopeOp(x, eval_fn, "combinator", bilinear_compose(b, f1, f2), "combinator")


# ---------------------------------------------------------------------------
# Inversion on the operator space
# ---------------------------------------------------------------------------

def flatten_op(Z) -> np.ndarray:
    return np.asarray(Z, dtype=float).reshape(-1)


def unflatten_op(z, n: int) -> np.ndarray:
    return np.asarray(z, dtype=float).reshape(n, n)


def _lu_inverse(A: np.ndarray) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise DimensionError("only square operators can be inverted")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(A)
    if np.any(np.diag(lu[0]) == 0):
        raise SingularOperatorError("operator is singular")
    return scipy.linalg.lu_solve(lu, np.eye(A.shape[0]))


def condition_estimate(A) -> float:
    """||A|| * ||A^-1|| from power-iteration singular-value estimates."""
    A = as_linop(A)
    try:
        Ainv = _lu_inverse(A)
    except SingularOperatorError:
        return np.inf
    return float(op_norm(A)) * float(op_norm(Ainv))


def checked_inverse(A, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Inverse by LU with partial pivoting; refuses ill-conditioned input."""
    A = as_linop(A)
    Ainv = _lu_inverse(A)
    cond = float(op_norm(A)) * float(op_norm(Ainv))
    if not np.isfinite(cond) or cond >= cond_limit:
        raise SingularOperatorError(f"condition estimate {cond:.3e} exceeds {cond_limit:.0e}")
    return Ainv


def inversion_slope(A, B) -> np.ndarray:
    """The operator Z -> -A^-1 Z B^-1 on flattened n x n matrices.

    Row-major flattening turns M Z N into kron(M, N^T) vec(Z).
    """
    A = as_linop(A, name="A")
    B = as_linop(B, A.shape, name="B")
    Ainv = checked_inverse(A)
    Binv = checked_inverse(B)
    return -np.kron(Ainv, Binv.T)


def inversion_slope_op(A) -> SlopeOp:
    """``inversion_slope`` as a slope of vec(B) -> vec(B^-1) based at vec(A)."""
    A = as_linop(A, name="A")
    n = A.shape[0]
    checked_inverse(A)
    fn = DiffFunction(lambda b: flatten_op(checked_inverse(unflatten_op(b, n))), n * n, n * n, name="inverse")
    return SlopeOp(flatten_op(A), lambda b: inversion_slope(A, unflatten_op(b, n)), "combinator", fn, "analytic")


# ---------------------------------------------------------------------------
# Partial slopes
# ---------------------------------------------------------------------------

def partial_slope(Phi: SlopeOp, block: int, split: int) -> SlopeOp:
    """Restrict a slope on R^split x R^(n-split) to one block.

    ``block`` is 1 or 2; the other block is frozen at the base point.  The
    result slopes y_b -> f(..., y_b, ...) and its diagonal is Df(x) on the block.
    """
    x = Phi.base
    n = x.size
    if not (0 < split < n):
        raise DimensionError(f"split {split} must lie strictly between 0 and {n}")
    if block == 1:
        sl = slice(0, split)
    elif block == 2:
        sl = slice(split, n)
    else:
        raise ValueError("block must be 1 or 2")
    xb = x[sl].copy()

    def embed(yb):
        y = x.copy()
        y[sl] = yb
        return y

    fn = None
    if Phi.function is not None:
        f = Phi.function
        jac = None
        if f.jacobian is not None:
            jac = lambda yb: np.asarray(f.jacobian(embed(yb)))[:, sl]
        fn = DiffFunction(lambda yb: f(embed(yb)), xb.size, f.n_out, jac,
                          Box(f.domain.lo[sl], f.domain.hi[sl]), name=f"{f.name}|block{block}")

    def eval_fn(yb):
        if yb.size != xb.size:
            raise DimensionError(f"block {block} has dimension {xb.size}, got {yb.size}")
        return Phi(embed(yb))[:, sl]

    return SlopeOp(xb, eval_fn, "combinator", fn, Phi.derivative_source)
