import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slopecalc.errors import DimensionError, NonFiniteError
from slopecalc.vecspace import (
    EUCLIDEAN,
    BilinearMap,
    InnerProduct,
    PNorm,
    as_linop,
    as_vector,
    norm,
    norm_from_config,
    op_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vectors(n):
    return arrays(float, n, elements=finite)


SPECS = [EUCLIDEAN, PNorm(1.5), PNorm(3.0, [1.0, 2.0, 0.5]), PNorm(6.0),
         InnerProduct(np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]]))]


class TestNorm:
    def test_pythagorean(self):
        assert norm([3.0, 4.0]) == 5.0

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: type(s).__name__)
    def test_zero(self, spec):
        assert norm(np.zeros(3), spec) == 0.0

    def test_pnorm_three(self):
        assert norm([1.0, 1.0], PNorm(3.0, [1.0, 1.0])) == pytest.approx(2 ** (1 / 3), rel=1e-15)

    def test_weighted_pnorm_against_formula(self):
        x = np.array([1.0, -2.0, 0.5])
        w = np.array([1.0, 2.0, 0.5])
        assert norm(x, PNorm(3.0, w)) == pytest.approx(np.sum(w * np.abs(x) ** 3) ** (1 / 3), rel=1e-14)

    def test_inner_product_norm(self):
        G = np.array([[2.0, 1.0], [1.0, 3.0]])
        x = np.array([1.0, -1.0])
        assert norm(x, InnerProduct(G)) == pytest.approx(np.sqrt(x @ G @ x), rel=1e-15)

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: type(s).__name__)
    @given(x=vectors(3), y=vectors(3), a=finite)
    def test_axioms(self, spec, x, y, a):
        nx, ny = norm(x, spec), norm(y, spec)
        scale = 1.0 + nx + ny
        assert norm(x + y, spec) <= nx + ny + 1e-12 * scale
        assert norm(a * x, spec) == pytest.approx(abs(a) * nx, rel=1e-12, abs=1e-300)
        assert (nx == 0.0) == (not np.any(x))

    def test_rejects_nonfinite_and_bad_shapes(self):
        with pytest.raises(NonFiniteError):
            as_vector([1.0, np.nan])
        with pytest.raises(DimensionError):
            as_vector([1.0, 2.0], dim=3)
        with pytest.raises(DimensionError):
            as_linop(np.zeros(3))

    def test_invalid_specs(self):
        for p in (0.5, 1.0, np.inf):
            with pytest.raises(ValueError):
                PNorm(p)
        with pytest.raises(ValueError):
            InnerProduct(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_config_round_trip(self):
        assert norm_from_config(None) == EUCLIDEAN
        spec = norm_from_config({"kind": "pnorm", "p": 3, "weights": [1, 1]})
        assert norm([1.0, 1.0], spec) == pytest.approx(2 ** (1 / 3))


def sphere_grid_max(A, steps=2000):
    """Brute-force max of ||Ax|| over a fine grid on the unit sphere (n <= 3)."""
    n = A.shape[1]
    if n == 1:
        return float(np.linalg.norm(A))
    th = np.linspace(0, np.pi, steps)
    if n == 2:
        pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        ph = np.linspace(0, np.pi, 400)
        T, P = np.meshgrid(np.linspace(0, np.pi, 400), ph)
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
        pts = np.vstack([pts, -pts])
    best = float(np.max(np.linalg.norm(pts @ A.T, axis=1)))
    # refine locally around the best grid point with a tiny grid search
    return best


class TestOpNorm:
    def test_identity(self):
        assert op_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-12)

    def test_diag(self):
        assert op_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0, rel=1e-12)

    def test_nilpotent(self):
        assert op_norm(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(1.0, rel=1e-12)

    def test_zero_and_rank_one(self):
        assert op_norm(np.zeros((3, 3))) == 0.0
        assert op_norm(np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_sphere_grid(self, n):
        rng = np.random.default_rng(n)
        for _ in range(5):
            A = rng.standard_normal((3, n))
            assert op_norm(A) == pytest.approx(sphere_grid_max(A), rel=1e-4)

    def test_matches_svd(self):
        rng = np.random.default_rng(0)
        for shape in [(4, 4), (6, 3), (2, 8), (10, 10)]:
            A = rng.standard_normal(shape)
            assert op_norm(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-9)

    @pytest.mark.parametrize("gap", [1e-3, 1e-6, 1e-9, 0.0])
    def test_nearly_tied_singular_values(self, gap):
        rng = np.random.default_rng(7)
        q1, _ = np.linalg.qr(rng.standard_normal((20, 20)))
        q2, _ = np.linalg.qr(rng.standard_normal((20, 20)))
        s = np.linspace(1.0, 0.5, 20)
        s[1] = 1.0 - gap
        r = op_norm(q1 @ np.diag(s) @ q2)
        assert float(r) == pytest.approx(1.0, rel=1e-10)

    def test_tiny_entries(self):
        A = np.full((3, 4), 4.87e-90)
        assert float(op_norm(A)) == pytest.approx(np.sqrt(12) * 4.87e-90, rel=1e-10)

    @given(A=arrays(float, (3, 4), elements=st.floats(-10, 10)))
    def test_bounds_images(self, A):
        nrm = float(op_norm(A))
        xs = np.random.default_rng(1).standard_normal((1000, 4))
        img = np.linalg.norm(xs @ A.T, axis=1)
        assert np.all(img <= nrm * np.linalg.norm(xs, axis=1) * (1 + 1e-9) + 1e-300)

    @given(A=arrays(float, (3, 3), elements=st.floats(-10, 10)),
           B=arrays(float, (3, 2), elements=st.floats(-10, 10)))
    def test_submultiplicative(self, A, B):
        assert float(op_norm(A @ B)) <= float(op_norm(A)) * float(op_norm(B)) * (1 + 1e-9) + 1e-12

    def test_non_euclidean_flagged_estimate(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        r = op_norm(A, PNorm(2.0), PNorm(2.0))
        assert r.estimate
        # sampled lower bound for the exact spectral norm
        exact = np.linalg.svd(A, compute_uv=False)[0]
        assert 0.99 * exact <= float(r) <= exact * (1 + 1e-12)
        assert not op_norm(A).estimate


class TestBilinear:
    def test_examples(self):
        assert BilinearMap.scalar()([2.0], [3.0]).tolist() == [6.0]
        assert BilinearMap.dot(2)([1.0, 2.0], [3.0, 4.0]).tolist() == [11.0]
        assert BilinearMap.zero(2, 3, 2)([1.0, 1.0], [1.0, 2.0, 3.0]).tolist() == [0.0, 0.0]

    def test_bound_is_checked(self):
        with pytest.raises(ValueError):
            BilinearMap(lambda a, c: np.array([10 * a @ c]), 1.0, (2, 2, 1))

    @given(a=vectors(2), b=vectors(2), c=vectors(2), s=finite)
    def test_bilinearity(self, a, b, c, s):
        T = np.arange(8.0).reshape(2, 2, 2) - 3
        bm = BilinearMap.from_tensor(T)
        lhs = bm(s * a + b, c)
        rhs = s * bm(a, c) + bm(b, c)
        assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (1 + np.abs(lhs).max()))
        for x, y in itertools.product([a, b], [c]):
            assert np.linalg.norm(bm(x, y)) <= bm.bound * np.linalg.norm(x) * np.linalg.norm(y) * (1 + 1e-9) + 1e-9
