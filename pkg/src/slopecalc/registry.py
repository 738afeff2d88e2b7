"""Named test functions and fixed-point problems used by the diagnostics.

Flags describe what the entry is supposed to satisfy ("smooth", "c1", "c2",
"poly3" for polynomials of degree <= 3, "pathological" for counterexamples).
The flags are claims to be enforced by the test suite, not trusted facts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fixedpoint import ContractionProblem
from .slope import Box, DiffFunction, SlopeFamily


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    function: DiffFunction
    flags: frozenset
    note: str
    sample_box: Box
    probe_point: np.ndarray
    lipschitz: Optional[float] = None
    slope_family: Optional[SlopeFamily] = field(default=None, repr=False)
    expected: dict = field(default_factory=dict)

    def has(self, flag: str) -> bool:
        return flag in self.flags

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n_in": self.function.n_in,
            "n_out": self.function.n_out,
            "flags": sorted(self.flags),
            "lipschitz": self.lipschitz,
            "analytic_jacobian": self.function.jacobian is not None,
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# Oscillating square: g(s) = s^2 cos(1/s), g(0) = 0
# ---------------------------------------------------------------------------

def osc_g(s: float) -> float:
    return 0.0 if s == 0.0 else s * s * np.cos(1.0 / s)


def osc_g_prime(s: float) -> float:
    return 0.0 if s == 0.0 else 2.0 * s * np.cos(1.0 / s) + np.sin(1.0 / s)


# ---------------------------------------------------------------------------
# Twisted slope for the zero function on R^2 (separately discontinuous at 0)
# ---------------------------------------------------------------------------

def twisted_zero_slope(x, y) -> np.ndarray:
    """g(x, y) [-(y2 - x2), y1 - x1] / ||y - x|| with g = 1 iff y = 0 != x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        return np.zeros((1, 2))
    g = 1.0 if (not np.any(y)) and np.any(x) else 0.0
    return g * np.array([[-d[1] / dist, d[0] / dist]])


# ---------------------------------------------------------------------------
# Fixed coefficient data
# ---------------------------------------------------------------------------

_LIN_A = np.array([[1.0, -2.0, 0.5, 0.0], [0.25, 0.0, -1.0, 3.0]])
_LIN_B = np.array([0.5, -1.0])

_rng = np.random.default_rng(7)
# cubic R^3 -> R^2: c0 + C1 x + quadratic + cubic parts with fixed coefficients
_CUB_C0 = _rng.uniform(-1, 1, 2)
_CUB_C1 = _rng.uniform(-1, 1, (2, 3))
_CUB_C2 = _rng.uniform(-1, 1, (2, 3, 3))
_CUB_C3 = _rng.uniform(-1, 1, (2, 3, 3, 3))

_TANH_W = _rng.uniform(-1, 1, (3, 4))
_TANH_W = 0.8 * _TANH_W / np.linalg.norm(_TANH_W, 2)
_TANH_B = _rng.uniform(-0.5, 0.5, 3)
del _rng


def _cubic(x):
    return (_CUB_C0 + _CUB_C1 @ x + np.einsum("kij,i,j->k", _CUB_C2, x, x)
            + np.einsum("kijl,i,j,l->k", _CUB_C3, x, x, x))


def _cubic_jac(x):
    C2s = _CUB_C2 + _CUB_C2.transpose(0, 2, 1)
    C3s = (np.einsum("kijl,j,l->ki", _CUB_C3, x, x) + np.einsum("kijl,i,l->kj", _CUB_C3, x, x)
           + np.einsum("kijl,i,j->kl", _CUB_C3, x, x))
    return _CUB_C1 + np.einsum("kij,j->ki", C2s, x) + C3s


def _logsumexp(x):
    m = x.max()
    return np.array([m + np.log(np.sum(np.exp(x - m)))])


def _softmax_row(x):
    e = np.exp(x - x.max())
    return (e / e.sum()).reshape(1, -1)


def _trig(x):
    return np.array([np.sin(x[0]) * np.cos(x[1]) + x[2] ** 2, np.exp(0.5 * x[0]) - x[1] * x[2]])


def _trig_jac(x):
    return np.array([
        [np.cos(x[0]) * np.cos(x[1]), -np.sin(x[0]) * np.sin(x[1]), 2 * x[2]],
        [0.5 * np.exp(0.5 * x[0]), -x[2], -x[1]],
    ])


def _tanh_jac(x):
    s = 1.0 - np.tanh(_TANH_W @ x + _TANH_B) ** 2
    return s[:, None] * _TANH_W


def _entry(name, f, n_in, n_out, jac, flags, note, dom=10.0, sample=1.0, probe=None, **kw):
    fn = DiffFunction(f, n_in, n_out, jac, Box.cube(n_in, dom), name=name)
    probe = np.zeros(n_in) if probe is None else np.asarray(probe, dtype=float)
    return RegistryEntry(name, fn, frozenset(flags), note, Box.cube(n_in, sample), probe, **kw)


SMOOTH = {"smooth", "c1", "c2"}

_ENTRIES = [
    _entry("square_1d", lambda x: x**2, 1, 1, lambda x: np.array([[2 * x[0]]]),
           SMOOTH | {"poly3"}, "t^2", probe=[0.7]),
    _entry("cube_1d", lambda x: x**3, 1, 1, lambda x: np.array([[3 * x[0] ** 2]]),
           SMOOTH | {"poly3"}, "t^3", probe=[-0.4]),
    _entry("sine_1d", lambda x: np.sin(x), 1, 1, lambda x: np.array([[np.cos(x[0])]]),
           SMOOTH | {"lipschitz"}, "sin t, Lipschitz with L = 1", sample=3.0, probe=[0.3], lipschitz=1.0),
    _entry("quadratic_norm", lambda x: np.array([x @ x]), 3, 1, lambda x: 2 * x.reshape(1, -1),
           SMOOTH | {"poly3"}, "||x||^2 on R^3"),
    _entry("bilinear_x1x2", lambda x: np.array([x[0] * x[1]]), 2, 1, lambda x: np.array([[x[1], x[0]]]),
           SMOOTH | {"poly3"}, "x1 x2"),
    _entry("cubic_x1sq_x2", lambda x: np.array([x[0] ** 2 * x[1]]), 2, 1,
           lambda x: np.array([[2 * x[0] * x[1], x[0] ** 2]]),
           SMOOTH | {"poly3"}, "x1^2 x2", probe=[1.0, 1.0]),
    _entry("linear_map", lambda x: _LIN_A @ x + _LIN_B, 4, 2, lambda x: _LIN_A.copy(),
           SMOOTH | {"poly3", "lipschitz"}, "affine R^4 -> R^2",
           lipschitz=float(np.linalg.norm(_LIN_A, 2))),
    _entry("half_linear", lambda x: 0.5 * x, 2, 2, lambda x: 0.5 * np.eye(2),
           SMOOTH | {"poly3", "lipschitz"}, "x / 2, Lipschitz with L = 1/2", lipschitz=0.5),
    _entry("cubic_poly_r3", _cubic, 3, 2, _cubic_jac, SMOOTH | {"poly3"},
           "dense cubic R^3 -> R^2 with fixed coefficients", sample=0.8, probe=[0.1, -0.2, 0.3]),
    _entry("trig_map", _trig, 3, 2, _trig_jac, SMOOTH, "(sin x1 cos x2 + x3^2, exp(x1/2) - x2 x3)",
           probe=[0.3, -0.5, 0.2]),
    _entry("rosenbrock", lambda x: 0.01 * np.array([(1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2]), 2, 1,
           lambda x: 0.01 * np.array([[-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)]]),
           SMOOTH, "Rosenbrock valley scaled by 1/100", sample=0.5, probe=[0.5, 0.25]),
    _entry("logsumexp_8", _logsumexp, 8, 1, _softmax_row, SMOOTH | {"lipschitz"},
           "log-sum-exp on R^8, gradient is a probability vector", lipschitz=1.0),
    _entry("tanh_layer", lambda x: np.tanh(_TANH_W @ x + _TANH_B), 4, 3, _tanh_jac, SMOOTH | {"lipschitz"},
           "tanh(W x + b) with ||W|| = 0.8", lipschitz=0.8),
    _entry("osc_square", lambda x: np.array([osc_g(x[0])]), 2, 1,
           lambda x: np.array([[osc_g_prime(x[0]), 0.0]]),
           {"pathological", "differentiable"},
           "f(x) = g(x1), g(s) = s^2 cos(1/s): differentiable, Df discontinuous on x1 = 0",
           dom=4.0, sample=1.0,
           expected={"c1_probe": {"x0": [0.0, 0.0], "side": "x", "verdict": "non_converging"}}),
    RegistryEntry(
        "zero_twisted",
        DiffFunction(lambda x: np.zeros(1), 2, 1, lambda x: np.zeros((1, 2)), Box.cube(2, 10.0), name="zero_twisted"),
        frozenset({"pathological", "custom_slope"}),
        "zero function with a slope that is continuous in y but not in x at the origin",
        Box.cube(2, 1.0),
        np.zeros(2),
        slope_family=twisted_zero_slope,
        expected={"c1_probe": {"x0": [0.0, 0.0], "side": "x", "verdict": "non_converging"},
                  "separate_continuity": {"y_side": "converging", "x_side": "non_converging"}},
    ),
]

REGISTRY: dict[str, RegistryEntry] = {e.name: e for e in _ENTRIES}
assert len(REGISTRY) == len(_ENTRIES), "registry names must be unique"


def get(name: str) -> RegistryEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown registry function {name!r}") from None


def with_flag(flag: str) -> list[RegistryEntry]:
    return [e for e in REGISTRY.values() if flag in e.flags]


# ---------------------------------------------------------------------------
# Fixed-point problems
# ---------------------------------------------------------------------------

_ROT = 0.9 * np.array([[0.6, -0.8], [0.8, 0.6]])
_MIX = np.array([[1.0, 0.5], [-0.25, 0.75]])

PROBLEMS: dict[str, ContractionProblem] = {
    p.name: p
    for p in [
        ContractionProblem(
            lambda x, lam: 0.5 * (x + lam), 1, 1, 0.5, Box.cube(1, 10.0), Box.cube(1, 5.0),
            dx=lambda x, lam: np.array([[0.5]]), dlam=lambda x, lam: np.array([[0.5]]),
            name="affine_half",
        ),
        ContractionProblem(
            lambda x, lam: lam.copy(), 1, 1, 0.5, Box.cube(1, 10.0), Box.cube(1, 5.0),
            dx=lambda x, lam: np.zeros((1, 1)), dlam=lambda x, lam: np.eye(1),
            name="constant_lambda",
        ),
        ContractionProblem(
            lambda x, lam: 0.5 * np.cos(x) + lam, 1, 1, 0.5, Box.cube(1, 5.0), Box.cube(1, 2.0),
            dx=lambda x, lam: np.array([[-0.5 * np.sin(x[0])]]), dlam=lambda x, lam: np.eye(1),
            name="half_cos",
        ),
        ContractionProblem(
            lambda x, lam: 0.4 * np.tanh(_ROT @ x) + _MIX @ lam, 2, 2, 0.4, Box.cube(2, 5.0), Box.cube(2, 2.0),
            name="coupled_tanh",
        ),
    ]
}


def get_problem(name: str) -> ContractionProblem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown fixed-point problem {name!r}") from None
