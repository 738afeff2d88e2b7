"""Acceptance criteria 1-9.

Each test prints one line ``[criterion N] PASS|FAIL: ...`` with the measured
quantity next to its tolerance.  ``python tests/test_acceptance.py`` prints the
same lines without pytest.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from slopecalc import analysis, calculus, fixedpoint, registry
from slopecalc.checks import _rule_cases, _strip_jacobian, well_conditioned
from slopecalc.slope import basis_slope, basis_slope_op, canonical_slope, derivative_oracle, slope_residual

ROOT = Path(__file__).resolve().parents[1]
SEED = 20261016
SMOOTH = [e for e in registry.with_flag("smooth") if e.function.n_in <= 8]


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}"
    try:
        capman = pytest_capture[0]
    except IndexError:
        capman = None
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
    else:
        print(line, flush=True)
    assert ok, line


pytest_capture: list = []


@pytest.fixture(autouse=True)
def _capture(request):
    pytest_capture.clear()
    pytest_capture.append(request.config.pluginmanager.getplugin("capturemanager"))
    yield
    pytest_capture.clear()


def _unit(rng, n):
    z = rng.standard_normal(n)
    return z / np.linalg.norm(z)


def test_criterion_1_slope_identity():
    rng = np.random.default_rng([SEED, 1])
    per = -(-1000 // len(SMOOTH))
    worst, count = 0.0, 0
    for e in SMOOTH:
        f = e.function
        for _ in range(per):
            x, y = e.sample_box.sample(rng, 2)
            for phi in (canonical_slope(f, x)(y), basis_slope(f, x, y)):
                res, scale = slope_residual(f, x, y, phi)
                worst = max(worst, res / (1 + scale))
            count += 1
    report(1, count >= 1000 and worst <= 1e-10,
           f"{count} triples over {len(SMOOTH)} smooth entries, canonical and basis; "
           f"max residual/(1+|df|) = {worst:.2e} <= 1e-10")


def test_criterion_2_uniqueness():
    rng = np.random.default_rng([SEED, 2])
    worst = 0.0
    for e in SMOOTH:
        f, x = e.function, e.probe_point
        canon, basis = canonical_slope(f, x), basis_slope_op(f, x)
        for _ in range(100):
            z = _unit(rng, f.n_in)
            y = x + 1e-6 * z
            worst = max(worst, float(np.linalg.norm(canon(y) @ z - basis(y) @ z)))
    report(2, worst <= 1e-6, f"100 directions x {len(SMOOTH)} functions at t = 1e-6; "
                             f"max |Phi_c z - Phi_b z| = {worst:.2e} <= 1e-6")


def test_criterion_3_rules():
    rng = np.random.default_rng([SEED, 3])
    worst_diag = 0.0
    for rule, (composite, make, r, n) in _rule_cases().items():
        fd = _strip_jacobian(composite)
        for _ in range(20):
            x = rng.uniform(-r, r, n)
            worst_diag = max(worst_diag, float(np.max(np.abs(make(x).derivative - derivative_oracle(fd, x)))))
    worst_inv = 0.0
    for _ in range(100):
        A, B = well_conditioned(rng, 5), well_conditioned(rng, 5)
        lhs = np.linalg.inv(B) - np.linalg.inv(A)
        rhs = calculus.unflatten_op(calculus.inversion_slope(A, B) @ calculus.flatten_op(B - A), 5)
        worst_inv = max(worst_inv, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs)))
    report(3, worst_diag <= 1e-6 and worst_inv <= 1e-10,
           f"linear/chain/product diagonal vs FD Jacobian max {worst_diag:.2e} <= 1e-6; "
           f"inversion on 100 5x5 pairs max rel {worst_inv:.2e} <= 1e-10")


def test_criterion_4_mvi():
    rng = np.random.default_rng([SEED, 4])
    entries = SMOOTH + [registry.get("osc_square")]
    sampling = analysis.SegmentSampling.uniform(1001)
    per = -(-500 // len(entries))
    refutations, total = 0, 0
    for e in entries:
        f = e.function
        for _ in range(per):
            x, y = e.sample_box.sample(rng, 2)
            A = rng.standard_normal((f.n_out, f.n_in))
            refutations += not analysis.mvi_witness(f, x, y, A, sampling).found
            total += 1
    report(4, total >= 500 and refutations == 0,
           f"{total} instances (count 1001) over {len(entries)} differentiable entries; refutations = {refutations}")


def test_criterion_5_c1_probe():
    bad = []
    for e in registry.with_flag("c1"):
        r = analysis.c1_probe(e.function, e.probe_point, seed=SEED)
        if r.verdict != "converging":
            bad.append((e.name, r.verdict))
    osc = analysis.c1_probe(registry.get("osc_square").function, [0.0, 0.0], side="x", seed=SEED)
    tw = registry.get("zero_twisted")
    twr = analysis.c1_probe(tw.function, [0.0, 0.0], side="x", family=tw.slope_family, seed=SEED)
    ok = not bad and osc.verdict == "non_converging" and osc.moduli[-1] >= 0.9 and twr.verdict == "non_converging"
    report(5, ok, f"C1 entries converging ({len(registry.with_flag('c1'))}, failures {bad}); "
                  f"oscillating x-side {osc.verdict} final {osc.moduli[-1]:.3f} >= 0.9; twisted x-side {twr.verdict}")


def test_criterion_6_schwarz():
    rng = np.random.default_rng([SEED, 6])
    s = np.array([1e-1, 1e-2, 1e-3])
    worst_c2, worst_poly, worst_oracle = 0.0, 0.0, 0.0
    for e in registry.with_flag("c2"):
        f = e.function
        u, v = rng.standard_normal((2, f.n_in))
        r = analysis.schwarz_limit(f, e.probe_point, u, v, s)
        gap = float(r.gap[-1])
        worst_c2 = max(worst_c2, gap)
        if e.has("poly3"):
            worst_poly = max(worst_poly, gap)
        d_uv = analysis.mixed_second_derivative(f, e.probe_point, u, v)
        d_vu = analysis.mixed_second_derivative(f, e.probe_point, v, u)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(d_uv - d_vu))))
    report(6, worst_c2 <= 1e-6 and worst_poly <= 1e-12,
           f"|E_uv - E_vu| at s = 1e-3: C2 max {worst_c2:.2e} <= 1e-6, degree <= 3 max {worst_poly:.2e} <= 1e-12 "
           f"(nested-derivative oracle asymmetry {worst_oracle:.1e})")


def test_criterion_7_lipschitz():
    rng = np.random.default_rng([SEED, 7])
    fwd, conv, pairs = 0, 0, 0
    worst_excess = -np.inf
    for e in registry.with_flag("lipschitz"):
        xs = e.sample_box.sample(rng, 200)
        rep = analysis.lipschitz_check(e.function, e.lipschitz, xs)
        fwd += len(rep.forward_violations)
        conv += len(rep.converse_violations)
        pairs += rep.n_pairs
        worst_excess = max(worst_excess, rep.sup_op_norm - e.lipschitz)
    report(7, fwd == 0 and conv == 0,
           f"{len(registry.with_flag('lipschitz'))} entries x 200 points: max(||Df|| - L) = {worst_excess:.2e} "
           f"<= 1e-9, forward violations {fwd}; converse on {pairs} pairs, violations {conv}")


def test_criterion_8_fixed_points():
    msgs, ok = [], True
    aff = registry.get_problem("affine_half")
    lams = np.linspace(-4, 4, 9)
    err_x = max(abs(fixedpoint.solve(aff, [l]).x[0] - l) for l in lams)
    err_s = max(abs(fixedpoint.sensitivity(aff, [l])[0, 0] - 1.0) for l in lams)
    ok &= err_x <= 1e-12 and err_s <= 1e-12
    msgs.append(f"affine |x-lam| {err_x:.1e}, |S-1| {err_s:.1e} <= 1e-12")

    hc = registry.get_problem("half_cos")
    fd_err = 0.0
    for l in np.linspace(-1, 1, 9):
        fd = (fixedpoint.solve(hc, [l + 1e-4]).x[0] - fixedpoint.solve(hc, [l - 1e-4]).x[0]) / 2e-4
        fd_err = max(fd_err, abs(fixedpoint.sensitivity(hc, [l])[0, 0] - fd))
    ok &= fd_err <= 1e-6
    msgs.append(f"half-cos vs central FD {fd_err:.1e} <= 1e-6")

    nd, cb_fail, id_err = 0.0, 0, 0.0
    rng = np.random.default_rng([SEED, 8])
    for p in registry.PROBLEMS.values():
        grid = np.linspace(p.lam_box.lo * 0.5, p.lam_box.hi * 0.5, 20)
        for a, b in zip(grid[:-1], grid[1:]):
            cb_fail += not fixedpoint.continuity_bound(p, a, b)["holds"]
        for lam in grid[::4]:
            res = fixedpoint.solve_with_sensitivity(p, lam)
            nd = max(nd, float(np.max(np.abs(res.sensitivity - fixedpoint.sensitivity(p, lam, "direct", res.x)))))
            delta = fixedpoint.find_delta(p, lam)
            for _ in range(3):
                mu = lam + delta * rng.uniform(0, 1) * _unit(rng, p.lam_dim)
                if not p.lam_box.contains(mu):
                    continue
                psi = fixedpoint.fixed_point_slope(p, lam, mu)
                dx = fixedpoint.solve(p, mu).x - res.x
                id_err = max(id_err, float(np.linalg.norm(dx - psi @ (mu - lam)) / (1 + np.linalg.norm(dx))))
    ok &= nd <= 1e-10 and cb_fail == 0 and id_err <= 1e-9
    msgs.append(f"Neumann vs direct {nd:.1e} <= 1e-10; continuity-bound failures on 20-point grids {cb_fail}; "
                f"fixed-point slope identity {id_err:.1e} <= 1e-9")
    report(8, bool(ok), "; ".join(msgs))


def _cli_run(out: Path) -> bytes:
    cmd = [sys.executable, "-m", "slopecalc.cli", "check", "--config", str(ROOT / "configs" / "full_suite.json"),
           "--seed", str(SEED), "--no-timestamp", "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode in (0, 1), proc.stderr
    return out.read_bytes(), proc.returncode


def test_criterion_9_determinism(tmp_path):
    a, code_a = _cli_run(tmp_path / "a.json")
    b, code_b = _cli_run(tmp_path / "b.json")
    n = len(json.loads(a)["records"])
    report(9, a == b, f"two CLI runs of the full suite ({n} checks, seed {SEED}) byte-identical "
                      f"without timestamp: {a == b}; exit codes {code_a}, {code_b}")


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
