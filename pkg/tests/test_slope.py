import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slopecalc import registry
from slopecalc.errors import CoincidentPointsError, DimensionError, DomainError, NonFiniteError
from slopecalc.slope import (
    Box,
    DiffFunction,
    basis_slope,
    basis_slope_op,
    basis_slope_wform,
    canonical_slope,
    continuity_profile,
    custom_slope,
    derivative_oracle,
    derivative_with_source,
    dyadic_tail_converges,
    one_dim_slope,
    orthonormal_completion,
    satisfies_slope_identity,
    slope_family,
    slope_residual,
    symmetric_part,
)
from slopecalc.vecspace import InnerProduct, PNorm

A = np.array([[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]])
linear = DiffFunction(lambda x: A @ x, 3, 2, lambda x: A, name="lin")
linear_fd = DiffFunction(lambda x: A @ x, 3, 2, name="lin_fd")
sqnorm2 = DiffFunction(lambda x: np.array([x @ x]), 2, 1, lambda x: 2 * x.reshape(1, -1))
const = DiffFunction(lambda x: np.array([4.0, -1.0]), 3, 2)
square = DiffFunction(lambda x: x**2, 1, 1, lambda x: np.array([[2 * x[0]]]))
cube = DiffFunction(lambda x: x**3, 1, 1)
rng0 = np.random.default_rng(11)
C3 = rng0.uniform(-1, 1, (2, 3, 3, 3))
C2 = rng0.uniform(-1, 1, (2, 3, 3))
cubic = DiffFunction(lambda x: np.einsum("kijl,i,j,l->k", C3, x, x, x) + np.einsum("kij,i,j->k", C2, x, x), 3, 2)

SMOOTH = registry.with_flag("smooth")
pair3 = st.tuples(arrays(float, 3, elements=st.floats(-2, 2)), arrays(float, 3, elements=st.floats(-2, 2)))


class TestDerivativeOracle:
    def test_linear_exact(self):
        D, src = derivative_with_source(linear_fd, np.zeros(3))
        assert src == "richardson"
        assert np.max(np.abs(D - A)) <= 1e-12

    def test_symbolic_jacobian(self):
        f = DiffFunction(lambda x: np.array([x[0] ** 2, x[0] * x[1]]), 2, 2)
        assert np.allclose(derivative_oracle(f, [1.0, 2.0]), [[2, 0], [2, 1]], atol=1e-9)

    def test_constant(self):
        assert np.max(np.abs(derivative_oracle(const, np.ones(3)))) <= 1e-12

    def test_analytic_takes_precedence(self):
        assert derivative_with_source(sqnorm2, [1.0, 1.0])[1] == "analytic"

    @pytest.mark.parametrize("entry", [e for e in SMOOTH if e.function.jacobian is not None], ids=lambda e: e.name)
    def test_analytic_jacobians_match_fd(self, entry):
        f = entry.function
        fd = DiffFunction(f.f, f.n_in, f.n_out, None, f.domain)
        for x in entry.sample_box.sample(np.random.default_rng(3), 5):
            assert np.allclose(derivative_oracle(f, x), derivative_oracle(fd, x), rtol=1e-6, atol=1e-6)


class TestDiffFunction:
    def test_domain_enforced(self):
        f = DiffFunction(lambda x: x, 1, 1, domain=Box.cube(1, 1.0))
        with pytest.raises(DomainError):
            f([2.0])

    def test_shape_and_finiteness(self):
        with pytest.raises(DimensionError):
            DiffFunction(lambda x: np.zeros(3), 2, 2)([0.0, 0.0])
        with pytest.raises(NonFiniteError):
            DiffFunction(lambda x: np.array([np.inf]), 1, 1)([0.0])


class TestCanonical:
    def test_square_example(self):
        assert np.allclose(canonical_slope(square, [1.0])([3.0]), [[4.0]], rtol=1e-15)

    def test_sqnorm_example(self):
        assert np.allclose(canonical_slope(sqnorm2, [0.0, 0.0])([1.0, 0.0]), [[1.0, 0.0]], atol=1e-15)

    def test_diagonal_is_derivative(self):
        x = np.array([0.3, -0.7])
        assert np.array_equal(canonical_slope(sqnorm2, x)(x), 2 * x.reshape(1, -1))

    def test_linear_exact(self):
        phi = canonical_slope(linear, [1.0, 2.0, 3.0])
        assert np.max(np.abs(phi([-1.0, 0.5, 2.0]) - A)) <= 1e-12

    @pytest.mark.parametrize("spec", [PNorm(1.5), PNorm(4.0, [1.0, 2.0, 3.0]),
                                      InnerProduct(np.diag([1.0, 2.0, 3.0]))], ids=str)
    @given(xy=pair3)
    def test_identity_in_other_norms(self, spec, xy):
        x, y = xy
        assert satisfies_slope_identity(cubic, x, y, canonical_slope(cubic, x, spec)(y))

    @pytest.mark.parametrize("entry", SMOOTH, ids=lambda e: e.name)
    def test_jacobian_columns_are_partials(self, entry):
        f = entry.function
        x = entry.probe_point
        D = canonical_slope(f, x)(x)
        for k in range(f.n_in):
            e = np.zeros(f.n_in)
            e[k] = 1.0
            g = DiffFunction(lambda t: f(x + t[0] * e), 1, f.n_out)
            assert np.allclose(D[:, k], derivative_oracle(g, [0.0])[:, 0], rtol=1e-8, atol=1e-8)


class TestOneDim:
    def test_examples(self):
        assert np.allclose(one_dim_slope(cube, [1.0])([2.0]), [[7.0]], rtol=1e-15)
        five = DiffFunction(lambda t: 5 * t, 1, 1)
        assert np.allclose(one_dim_slope(five, [0.3])([-4.0]), [[5.0]], rtol=1e-14)
        osc = registry.get("osc_square")
        g = DiffFunction(lambda t: np.array([registry.osc_g(t[0])]), 1, 1)
        val = one_dim_slope(g, [0.0])([2 / np.pi])
        assert abs(val[0, 0]) <= 1e-15
        assert osc.function([2 / np.pi, 0.5])[0] == pytest.approx(0.0, abs=1e-15)

    @given(s=st.floats(-3, 3), t=st.floats(-3, 3))
    def test_symmetric(self, s, t):
        assume(s != t)
        fam = slope_family(cube, "one_dim")
        assert np.array_equal(fam([s], [t]), fam([t], [s]))


class TestBasis:
    def test_completion_orthonormal(self):
        rng = np.random.default_rng(5)
        for n in [1, 2, 3, 5, 8]:
            for _ in range(20):
                v = rng.standard_normal(n)
                v /= np.linalg.norm(v)
                V = orthonormal_completion(v)
                assert np.allclose(V.T @ V, np.eye(n), atol=1e-14)
                assert np.array_equal(V[:, 0], v)

    def test_completion_near_axes(self):
        for v in (np.array([1.0, 0.0, 0.0]), np.array([-1.0, 0.0, 0.0]), np.array([1.0, 1e-12, 0.0])):
            v = v / np.linalg.norm(v)
            V = orthonormal_completion(v)
            assert np.allclose(V.T @ V, np.eye(3), atol=1e-14)

    def test_linear_exact(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            x, y = rng.standard_normal((2, 3))
            assert np.max(np.abs(basis_slope(linear, x, y) - A)) <= 1e-12
            assert np.max(np.abs(basis_slope_wform(linear, x, y) - A)) <= 1e-12

    @pytest.mark.parametrize("form", [basis_slope, basis_slope_wform])
    def test_sqnorm_example(self, form):
        h = 0.25
        assert np.allclose(form(sqnorm2, [0.0, 0.0], [h, 0.0]), [[h, h]], atol=1e-15)

    def test_constant(self):
        assert not np.any(basis_slope(const, np.zeros(3), np.ones(3)))

    @given(xy=pair3)
    def test_wform_matches_basis_on_cubic(self, xy):
        x, y = xy
        assume(np.linalg.norm(y - x) > 1e-3)
        assert np.allclose(basis_slope(cubic, x, y), basis_slope_wform(cubic, x, y), rtol=1e-9, atol=1e-9)

    def test_coincident(self):
        with pytest.raises(CoincidentPointsError):
            basis_slope(cubic, np.ones(3), np.ones(3))
        assert np.array_equal(basis_slope_op(sqnorm2, [1.0, 2.0])([1.0, 2.0]), [[2.0, 4.0]])

    @pytest.mark.parametrize("entry", [e for e in SMOOTH if e.function.n_in > 1], ids=lambda e: e.name)
    def test_separately_continuous(self, entry):
        f = entry.function
        x = entry.probe_point
        D = derivative_oracle(f, x)
        z = np.random.default_rng(9).standard_normal(f.n_in)
        z /= np.linalg.norm(z)
        y_side = continuity_profile(lambda t: basis_slope(f, x, x + t * z), D)
        x_side = continuity_profile(lambda t: basis_slope(f, x - t * z, x), D)
        assert dyadic_tail_converges(y_side, 1e-4)
        assert dyadic_tail_converges(x_side, 1e-4)


class TestSymmetricPart:
    def test_sqnorm_basis_symmetric(self):
        fam = slope_family(sqnorm2, "basis")
        rng = np.random.default_rng(8)
        for _ in range(20):
            x, y = rng.standard_normal((2, 2))
            S = symmetric_part(fam, x, y)
            assert np.array_equal(S, symmetric_part(fam, y, x))
            assert satisfies_slope_identity(sqnorm2, x, y, S)

    def test_one_dim_unchanged_and_linear(self):
        fam = slope_family(cube, "one_dim")
        assert np.array_equal(symmetric_part(fam, [0.2], [1.3]), fam([0.2], [1.3]))
        lin = slope_family(linear, "basis")
        assert np.allclose(symmetric_part(lin, np.zeros(3), np.ones(3)), A, atol=1e-12)


class TestTwistedZero:
    entry = registry.get("zero_twisted")

    def test_annihilates_difference(self):
        rng = np.random.default_rng(12)
        pts = np.vstack([rng.standard_normal((50, 2)), np.zeros((1, 2))])
        for x in pts:
            for y in pts:
                phi = registry.twisted_zero_slope(x, y)
                assert np.linalg.norm(phi @ (y - x)) <= 1e-15
                assert satisfies_slope_identity(self.entry.function, x, y, phi)

    def test_is_a_slope_at_each_base(self):
        s = custom_slope(self.entry.function, [0.5, 0.5], registry.twisted_zero_slope)
        assert np.array_equal(s([0.5, 0.5]), np.zeros((1, 2)))
        # ||Phi(x, 0)|| = 1 for every x != 0: not continuous in x at 0
        assert np.linalg.norm(registry.twisted_zero_slope([1e-9, 0.0], [0.0, 0.0])) == pytest.approx(1.0)
        assert not np.any(registry.twisted_zero_slope([0.0, 0.0], [1e-9, 0.0]))


@pytest.mark.parametrize("entry", SMOOTH, ids=lambda e: e.name)
def test_identity_all_smooth(entry):
    f = entry.function
    rng = np.random.default_rng(21)
    for x, y in entry.sample_box.sample(rng, 40).reshape(20, 2, -1):
        for phi in (canonical_slope(f, x)(y), basis_slope(f, x, y)):
            res, scale = slope_residual(f, x, y, phi)
            assert res <= 1e-10 * (1 + scale)


def test_dyadic_tail():
    assert dyadic_tail_converges(2.0 ** -np.arange(20), 1e-4)
    assert not dyadic_tail_converges(np.ones(20), 1e-4)
    assert not dyadic_tail_converges([1e-6, 1e-5, 1e-7, 1e-8, 1e-9], 1e-4)
    # roundoff jitter below the floor counts as converged
    assert dyadic_tail_converges([3e-12, 1e-11, 2e-12, 8e-11, 5e-11], 1e-4)
