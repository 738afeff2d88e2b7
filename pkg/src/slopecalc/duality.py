"""Duality functionals l(x, y) with <l, y - x> = ||y - x||.

The kernel of l(x, y) is the complement of span(y - x) on which the
canonical slope agrees with the derivative, so this module decides the
geometry of that slope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CoincidentPointsError, DimensionError
from .vecspace import EUCLIDEAN, Euclidean, InnerProduct, NormSpec, PNorm, as_vector

COINCIDENT_RTOL = 1e-14
N_PROBES = 256
PROBE_SEED = 20240601


@dataclass(frozen=True)
class DualityFunctional:
    """The functional z -> sum(coeffs * z)."""

    coeffs: np.ndarray
    norm_bound: float
    pairing_value: float

    def __call__(self, z) -> float:
        return float(self.coeffs @ np.asarray(z, dtype=float))


def coincident(x: np.ndarray, y: np.ndarray, spec: NormSpec = EUCLIDEAN) -> bool:
    """True when y is too close to x for l(x, y) to be formed."""
    return spec.norm(y - x) <= COINCIDENT_RTOL * max(1.0, spec.norm(x))


def _equivalence_constant(num: NormSpec, den: NormSpec, n: int) -> float:
    # max ||w||_num / ||w||_den over a fixed probe set, independent of (x, y)
    rng = np.random.default_rng(PROBE_SEED)
    probes = np.vstack([np.eye(n), rng.standard_normal((N_PROBES, n))])
    return max(num.norm(w) / den.norm(w) for w in probes)


def dual_functional(x, y, spec: NormSpec = EUCLIDEAN, *, inner: Optional[InnerProduct] = None) -> DualityFunctional:
    """Duality functional of y - x for the norm ``spec``.

    Euclidean and p-norms use their exact duality maps (dual norm 1).  An
    ``InnerProduct`` spec, or any spec paired with an auxiliary ``inner``
    product, uses the rescaled Riesz representer of y - x; its dual norm is
    bounded by a constant that only depends on the two norms.
    """
    x = as_vector(x, name="x")
    y = as_vector(y, x.size, name="y")
    spec.check_dim(x.size)
    if coincident(x, y, spec):
        raise CoincidentPointsError("dual functional is undefined for coincident points")
    d = y - x
    dist = spec.norm(d)

    if inner is None and isinstance(spec, InnerProduct):
        inner = spec
    if inner is not None:
        if inner.dim != x.size:
            raise DimensionError(f"inner product lives on R^{inner.dim}, got R^{x.size}")
        h = inner.norm(d)
        coeffs = (dist / h**2) * (inner.G @ d)
        bound = _equivalence_constant(spec, inner, x.size) * _equivalence_constant(inner, spec, x.size)
    elif isinstance(spec, PNorm):
        w = spec.w(x.size)
        a = np.abs(d) / dist
        # w |d|^(p-2) d / ||d||^(p-1), written in scaled form to avoid 0^(negative)
        coeffs = w * a ** (spec.p - 1.0) * np.sign(d)
        bound = 1.0
    elif isinstance(spec, Euclidean):
        coeffs = d / dist
        bound = 1.0
    else:
        raise TypeError(f"no duality map for norm {spec!r}")

    return DualityFunctional(coeffs=coeffs, norm_bound=bound, pairing_value=float(coeffs @ d))
