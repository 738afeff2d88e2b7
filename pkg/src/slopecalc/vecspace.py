"""Vectors, norms, dense operators and bounded bilinear maps on R^n.

Vectors are plain 1-D float arrays and linear operators are 2-D float arrays
(rows = output dimension).  The helpers here validate shapes and finiteness;
everything else in the package goes through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConvergenceError, DimensionError, NonFiniteError

ArrayLike = Union[Sequence[float], np.ndarray, float]

DEFAULT_N_DIRS = 256


def as_vector(x: ArrayLike, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise DimensionError(f"{name} has dimension {v.size}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return v


def as_linop(A: ArrayLike, shape: Optional[tuple[int, int]] = None, name: str = "A") -> np.ndarray:
    M = np.asarray(A, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array, got shape {M.shape}")
    if shape is not None and M.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {M.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return M


# ---------------------------------------------------------------------------
# Norm specifications
# ---------------------------------------------------------------------------

class NormSpec:
    """Base class for the supported vector norms."""

    dim: Optional[int] = None
    kind: str = "abstract"

    def norm(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def check_dim(self, n: int) -> None:
        if self.dim is not None and self.dim != n:
            raise DimensionError(f"{self.kind} norm is defined on R^{self.dim}, got R^{n}")

    def describe(self) -> dict:
        return {"kind": self.kind}


def _scaled_norm2(a: np.ndarray) -> float:
    # plain sum of squares underflows below ~1e-154
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.linalg.norm(a / scale))


@dataclass(frozen=True)
class Euclidean(NormSpec):
    kind = "euclidean"

    def norm(self, x):
        return _scaled_norm2(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PNorm(NormSpec):
    """Weighted p-norm (sum w_i |x_i|^p)^(1/p) with 1 < p < inf.

    ``weights=None`` means unit weights in any dimension.
    """

    p: float
    weights: Optional[tuple[float, ...]] = None
    kind = "pnorm"

    def __post_init__(self):
        if not (1.0 < self.p < np.inf):
            raise ValueError(f"p must satisfy 1 < p < inf, got {self.p}")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) == 0 or not all(np.isfinite(v) and v > 0 for v in w):
                raise ValueError("weights must be finite and strictly positive")
            object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return None if self.weights is None else len(self.weights)

    def w(self, n: int) -> np.ndarray:
        return np.ones(n) if self.weights is None else np.asarray(self.weights)

    def norm(self, x):
        a = np.abs(x)
        scale = a.max() if a.size else 0.0
        if scale == 0.0:
            return 0.0
        # scaling keeps |x|^p away from overflow/underflow
        return float(scale * np.sum(self.w(a.size) * (a / scale) ** self.p) ** (1.0 / self.p))

    def describe(self):
        return {"kind": self.kind, "p": self.p, "weights": None if self.weights is None else list(self.weights)}


@dataclass(frozen=True, eq=False)
class InnerProduct(NormSpec):
    """Norm sqrt(x^T G x) for a symmetric positive definite Gram matrix G."""

    G: np.ndarray
    kind = "inner_product"

    def __post_init__(self):
        G = as_linop(self.G, name="G")
        if G.shape[0] != G.shape[1]:
            raise DimensionError("Gram matrix must be square")
        if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
            raise ValueError("Gram matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(G)) <= 0:
            raise ValueError("Gram matrix must be positive definite")
        G = G.copy()
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def dim(self):
        return self.G.shape[0]

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ self.G @ b)

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        scale = float(np.max(np.abs(x))) if x.size else 0.0
        if scale == 0.0:
            return 0.0
        u = x / scale
        return scale * float(np.sqrt(max(u @ self.G @ u, 0.0)))

    def describe(self):
        return {"kind": self.kind, "G": self.G.tolist()}


EUCLIDEAN = Euclidean()


def norm(x: ArrayLike, spec: NormSpec = EUCLIDEAN) -> float:
    v = as_vector(x)
    spec.check_dim(v.size)
    return spec.norm(v)


def norm_from_config(cfg: Optional[dict]) -> NormSpec:
    """Build a NormSpec from its ``describe()`` dictionary."""
    if cfg is None:
        return EUCLIDEAN
    kind = cfg.get("kind", "euclidean")
    if kind == "euclidean":
        return EUCLIDEAN
    if kind == "pnorm":
        w = cfg.get("weights")
        return PNorm(float(cfg["p"]), None if w is None else tuple(w))
    if kind == "inner_product":
        return InnerProduct(np.asarray(cfg["G"], dtype=float))
    raise ValueError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------------------
# Operator norms
# ---------------------------------------------------------------------------

SQUARE_EVERY = 25


class OperatorNorm(float):
    """A float carrying how it was obtained.

    ``estimate`` is True when the value is a sampled lower bound rather than
    the exact induced norm.
    """

    estimate: bool
    iterations: int

    def __new__(cls, value: float, estimate: bool = False, iterations: int = 0):
        obj = super().__new__(cls, value)
        obj.estimate = estimate
        obj.iterations = iterations
        return obj


def _spectral_norm(A: np.ndarray, rtol: float, max_iter: int, seed: int) -> OperatorNorm:
    """Power iteration on A^T A with a certified stop.

    For symmetric A^T A the Rayleigh quotient rho satisfies
    rho <= lambda_max <= rho + ||A^T A v - rho v||, so the residual test bounds
    the relative error.  Every ``SQUARE_EVERY`` steps the iteration matrix is
    squared, which separates nearly tied top singular values much faster.
    """
    m, n = A.shape
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        return OperatorNorm(0.0, iterations=0)
    A = A / scale  # keeps A^T A clear of underflow and overflow
    if m == 1 or n == 1:
        # rank <= 1: the Frobenius norm is the largest singular value
        return OperatorNorm(scale * float(np.linalg.norm(A)), iterations=0)
    AtA = A.T @ A
    M = AtA
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    res = np.inf
    for it in range(1, max_iter + 1):
        w = AtA @ v
        rho = float(v @ w)
        res = float(np.linalg.norm(w - rho * v))
        if res <= rtol * rho:
            return OperatorNorm(scale * float(np.sqrt(rho)), iterations=it)
        if it % SQUARE_EVERY == 0:
            M = M @ M
            M /= np.max(np.abs(M))
        u = M @ v
        un = np.linalg.norm(u)
        if un == 0.0 or not np.isfinite(un):
            # start vector landed in the kernel
            u = rng.standard_normal(n)
            un = np.linalg.norm(u)
        v = u / un
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations (residual {res:.3e})")


def op_norm(
    A: ArrayLike,
    in_spec: NormSpec = EUCLIDEAN,
    out_spec: NormSpec = EUCLIDEAN,
    *,
    n_dirs: int = DEFAULT_N_DIRS,
    seed: int = 0,
    rtol: float = 1e-10,
    max_iter: int = 10_000,
) -> OperatorNorm:
    """Induced norm of ``A`` from ``in_spec`` to ``out_spec``.

    The Euclidean pair is computed by power iteration on A^T A.  Any other
    pair returns max ||Ax||_out / ||x||_in over the coordinate directions and
    ``n_dirs`` seeded random directions, flagged as an estimate.
    """
    M = as_linop(A)
    m, n = M.shape
    in_spec.check_dim(n)
    out_spec.check_dim(m)
    if isinstance(in_spec, Euclidean) and isinstance(out_spec, Euclidean):
        return _spectral_norm(M, rtol, max_iter, seed)
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(n), rng.standard_normal((n_dirs, n))])
    best = 0.0
    for d in dirs:
        d_norm = in_spec.norm(d)
        if d_norm > 0:
            best = max(best, out_spec.norm(M @ d) / d_norm)
    return OperatorNorm(best, estimate=True, iterations=len(dirs))


# ---------------------------------------------------------------------------
# Bilinear maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BilinearMap:
    """Bounded bilinear map b: R^n1 x R^n2 -> R^m with ||b(y1,y2)|| <= M ||y1|| ||y2||.

    The bound is checked on sampled unit vectors when the map is built.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float
    dims: tuple[int, int, int]
    name: str = "bilinear"
    check_samples: int = field(default=64, repr=False)

    def __post_init__(self):
        if not (self.bound > 0 and np.isfinite(self.bound)):
            raise ValueError("bound must be a positive finite number")
        n1, n2, m = self.dims
        rng = np.random.default_rng(12345)
        for _ in range(self.check_samples):
            a = rng.standard_normal(n1)
            b = rng.standard_normal(n2)
            a /= np.linalg.norm(a)
            b /= np.linalg.norm(b)
            val = as_vector(self.evaluator(a, b), m, name="b(y1, y2)")
            if np.linalg.norm(val) > self.bound * (1 + 1e-9):
                raise ValueError(f"{self.name}: declared bound {self.bound} violated on unit vectors")

    def __call__(self, y1, y2) -> np.ndarray:
        return apply_bilinear(self, y1, y2)

    @classmethod
    def scalar(cls) -> "BilinearMap":
        return cls(lambda a, c: a * c, 1.0, (1, 1, 1), name="scalar")

    @classmethod
    def dot(cls, n: int) -> "BilinearMap":
        return cls(lambda a, c: np.array([a @ c]), 1.0, (n, n, 1), name="dot")

    @classmethod
    def zero(cls, n1: int, n2: int, m: int) -> "BilinearMap":
        return cls(lambda a, c: np.zeros(m), 1.0, (n1, n2, m), name="zero")

    @classmethod
    def from_tensor(cls, T: ArrayLike) -> "BilinearMap":
        """b(y1, y2)_k = sum_ij T[k, i, j] y1_i y2_j, bounded by the Frobenius norm of T."""
        T = np.asarray(T, dtype=float)
        if T.ndim != 3:
            raise DimensionError("tensor must have shape (m, n1, n2)")
        m, n1, n2 = T.shape
        bound = max(float(np.linalg.norm(T)), np.finfo(float).tiny)
        return cls(lambda a, c: np.einsum("kij,i,j->k", T, a, c), bound, (n1, n2, m), name="tensor")


def apply_bilinear(b: BilinearMap, y1: ArrayLike, y2: ArrayLike) -> np.ndarray:
    n1, n2, m = b.dims
    a = as_vector(y1, n1, name="y1")
    c = as_vector(y2, n2, name="y2")
    return as_vector(b.evaluator(a, c), m, name="b(y1, y2)")
