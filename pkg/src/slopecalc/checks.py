"""Declarative diagnostic runs: config in, versioned JSON report out.

A config is a mapping with an optional ``seed`` and a list ``checks``; each
check has a ``type`` plus named parameters (see README for the schema).
Every check gets its own generator seeded from (seed, check name), so the
records do not depend on the order in which checks run.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import analysis, calculus, fixedpoint, registry
from .errors import SlopeCalcError
from .slope import (
    DiffFunction,
    basis_slope,
    basis_slope_op,
    canonical_slope,
    derivative_oracle,
    dyadic_tail_converges,
    slope_residual,
)
from .vecspace import BilinearMap, norm_from_config

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

SLOPE_RTOL = 1e-10
UNIQUENESS_TOL = 1e-6
RULES_TOL = 1e-6
INVERSION_RTOL = 1e-10
SCHWARZ_TOL = 1e-6
NEUMANN_DIRECT_TOL = 1e-10
FP_SLOPE_RTOL = 1e-9
TAIL_THRESHOLD = 1e-4


class ConfigError(SlopeCalcError, ValueError):
    """The configuration is malformed or names something that does not exist."""


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


@dataclass
class Report:
    command: str
    seed: int
    config: dict
    records: list = field(default_factory=list)
    timestamp: str = ""

    @property
    def passed(self) -> bool:
        return all(r["verdict"] == "pass" for r in self.records)

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self, include_timestamp: bool = True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "records": self.records,
            "summary": {
                "checks": len(self.records),
                "passed": sum(r["verdict"] == "pass" for r in self.records),
                "failed": sum(r["verdict"] != "pass" for r in self.records),
            },
            "exit_status": self.exit_status,
        }
        if include_timestamp:
            d["timestamp"] = self.timestamp
        return to_jsonable(d)

    def to_json(self, include_timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(include_timestamp), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def _unit(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal(n)
    return z / np.linalg.norm(z)


def _strip_jacobian(f: DiffFunction) -> DiffFunction:
    return DiffFunction(f.f, f.n_in, f.n_out, None, f.domain, name=f.name + "[fd]")


def _entry(cfg: dict) -> registry.RegistryEntry:
    return registry.get(cfg["function"])


def _grid(columns: list[str], rows) -> dict:
    return {"columns": columns, "rows": [[float(v) for v in row] for row in rows]}


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# Check implementations: each returns (values, passed, extra record fields)
# ---------------------------------------------------------------------------

def _check_slope_identity(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    spec = norm_from_config(cfg.get("norm"))
    kinds = cfg.get("kinds", ["canonical", "basis"])
    samples = int(cfg.get("samples", 100))
    worst = {k: 0.0 for k in kinds}
    for _ in range(samples):
        x, y = entry.sample_box.sample(rng, 2)
        for k in kinds:
            if k == "canonical":
                phi = canonical_slope(f, x, spec)(y)
            elif k == "basis":
                phi = basis_slope(f, x, y)
            elif k == "custom" and entry.slope_family is not None:
                phi = entry.slope_family(x, y)
            else:
                raise ConfigError(f"unsupported slope kind {k!r} for {entry.name}")
            res, scale = slope_residual(f, x, y, phi)
            worst[k] = max(worst[k], res / (1.0 + scale))
    ok = all(v <= SLOPE_RTOL for v in worst.values())
    return {"max_relative_residual": worst, "samples": samples}, ok, {"tolerances": {"rtol": SLOPE_RTOL}}


def _check_directional(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    x = np.asarray(cfg.get("x", entry.probe_point), dtype=float)
    t = float(cfg.get("t", 1e-6))
    n_dirs = int(cfg.get("directions", 100))
    canon = canonical_slope(f, x)
    basis = basis_slope_op(f, x)
    worst_gap, worst_identity, worst_limit = 0.0, 0.0, 0.0
    t_seq = 2.0 ** -np.arange(1, 21)
    for i in range(n_dirs):
        z = _unit(rng, f.n_in)
        y = x + t * z
        gap = float(np.linalg.norm(canon(y) @ z - basis(y) @ z))
        worst_gap = max(worst_gap, gap)
        if i < 5:
            dl = analysis.directional_limit(f, canon, z, t_seq)
            worst_identity = max(worst_identity, float(dl.residuals.max()))
            worst_limit = max(worst_limit, dl.tail_error)
    ok = worst_gap <= UNIQUENESS_TOL and worst_identity <= SLOPE_RTOL
    values = {"max_gap": worst_gap, "max_identity_residual": worst_identity,
              "tail_error_at_2^-20": worst_limit, "t": t, "directions": n_dirs}
    return values, ok, {"tolerances": {"gap": UNIQUENESS_TOL, "identity_rtol": SLOPE_RTOL}}


def _check_c1(cfg, rng, seed):
    entry = _entry(cfg)
    f = entry.function
    x0 = np.asarray(cfg.get("x0", entry.probe_point), dtype=float)
    side = cfg.get("side", "joint")
    radii = cfg.get("radii", (0.5 ** np.arange(1, 9)).tolist())
    grid = int(cfg.get("grid", 128))
    slope = cfg.get("slope", "custom" if entry.slope_family is not None else "canonical")
    family = None
    if slope == "custom":
        family = entry.slope_family
    elif slope == "basis":
        family = lambda a, b: basis_slope_op(f, a)(b)
    spec = norm_from_config(cfg.get("norm"))
    default_expect = "converging"
    exp = entry.expected.get("c1_probe")
    if exp and exp.get("side") == side and np.allclose(exp.get("x0"), x0):
        default_expect = exp["verdict"]
    expect = cfg.get("expect", default_expect)
    res = analysis.c1_probe(f, x0, spec, radii, grid, side=side, family=family, seed=seed)
    values = {"radii": res.radii, "moduli": res.moduli, "verdict": res.verdict, "side": side,
              "slope": slope, "grid_per_radius": grid, "final_modulus": float(res.moduli[-1])}
    extra = {"expected": expect, "observed": res.verdict,
             "grid": _grid(["radius", "modulus"], zip(res.radii, res.moduli))}
    return values, res.verdict == expect, extra


def _random_A(kind, f, x, rng):
    if kind == "zero":
        return np.zeros((f.n_out, f.n_in))
    if kind == "derivative":
        return derivative_oracle(f, x)
    return rng.standard_normal((f.n_out, f.n_in))


def _check_mvi(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    samples = int(cfg.get("samples", 50))
    count = int(cfg.get("count", 1001))
    a_kind = cfg.get("A", "random")
    sampling = analysis.SegmentSampling.uniform(count)
    refutations = []
    for i in range(samples):
        x, y = entry.sample_box.sample(rng, 2)
        A = _random_A(a_kind, f, x, rng)
        w = analysis.mvi_witness(f, x, y, A, sampling)
        if not w.found:
            refutations.append({"index": i, "x": x, "y": y, "lhs": w.lhs, "max_rhs": w.max_rhs})
    values = {"instances": samples, "witnessed": samples - len(refutations), "refutations": refutations,
              "count": count, "A": a_kind}
    return values, not refutations, {"tolerances": {"atol": analysis.MVI_ATOL}}


def _check_bound(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    samples = int(cfg.get("samples", 20))
    sampling = analysis.SegmentSampling.uniform(int(cfg.get("count", 201)))
    a_kind = cfg.get("A", "random")
    failures = []
    for i in range(samples):
        x, y = entry.sample_box.sample(rng, 2)
        A = _random_A(a_kind, f, x, rng)
        r = analysis.canonical_slope_bound_check(f, x, y, A, sampling=sampling)
        if not r.holds:
            failures.append({"index": i, "x": x, "y": y, "lhs": r.lhs, "min_rhs": r.min_rhs})
    return ({"instances": samples, "failures": failures, "A": a_kind}, not failures,
            {"tolerances": {"atol": analysis.BOUND_ATOL}})


def _check_schwarz(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    x = np.asarray(cfg.get("x", entry.probe_point), dtype=float)
    u = np.asarray(cfg["u"], dtype=float) if "u" in cfg else _unit(rng, f.n_in)
    v = np.asarray(cfg["v"], dtype=float) if "v" in cfg else _unit(rng, f.n_in)
    s_values = cfg.get("s_values", [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    tol = float(cfg.get("tol", SCHWARZ_TOL))
    res = analysis.schwarz_limit(f, x, u, v, s_values)
    gap = float(res.gap[-1])
    # nested-derivative oracle, reported alongside the second differences
    d_uv = analysis.mixed_second_derivative(f, x, u, v)
    d_vu = analysis.mixed_second_derivative(f, x, v, u)
    if f.n_out == 1:
        cols = ["s", "E_uv", "E_vu"]
    else:
        cols = ["s"] + [f"E_uv_{k}" for k in range(f.n_out)] + [f"E_vu_{k}" for k in range(f.n_out)]
    rows = [[s, *a, *b] for s, a, b in zip(res.s_values, res.e_uv, res.e_vu)]
    values = {"x": x, "u": u, "v": v, "s_values": res.s_values, "e_uv": res.e_uv, "e_vu": res.e_vu,
              "final_gap": gap, "oracle_uv": d_uv, "oracle_vu": d_vu,
              "final_vs_oracle": float(np.linalg.norm(res.e_uv[-1] - d_uv))}
    return values, gap <= tol, {"tolerances": {"gap": tol}, "grid": _grid(cols, rows)}


def _check_lipschitz(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    L = float(cfg.get("L", entry.lipschitz if entry.lipschitz is not None else np.nan))
    if not np.isfinite(L):
        raise ConfigError(f"{entry.name} has no declared Lipschitz constant; pass L")
    samples = int(cfg.get("samples", 200))
    xs = entry.sample_box.sample(rng, samples)
    rep = analysis.lipschitz_check(f, L, xs)
    expect = cfg.get("expect", "pass")
    observed = "pass" if rep.passed else "fail"
    values = {"L": L, "samples": samples, "pairs": rep.n_pairs, "sup_op_norm": rep.sup_op_norm,
              "forward_violations": len(rep.forward_violations), "converse_violations": len(rep.converse_violations)}
    return values, observed == expect, {"expected": expect, "observed": observed}


def _check_separate(cfg, rng):
    entry = _entry(cfg)
    f = entry.function
    x0 = np.asarray(cfg.get("x0", entry.probe_point), dtype=float)
    z = np.asarray(cfg["z"], dtype=float) if "z" in cfg else _unit(rng, f.n_in)
    family = entry.slope_family or (lambda a, b: basis_slope_op(f, a)(b))
    target = family(x0, x0)
    ks = list(range(1, int(cfg.get("k_max", 20)) + 1))
    y_side, x_side = analysis.separate_continuity(family, x0, z, target, ks)
    observed = {
        "y_side": "converging" if dyadic_tail_converges(y_side, TAIL_THRESHOLD) else "non_converging",
        "x_side": "converging" if dyadic_tail_converges(x_side, TAIL_THRESHOLD) else "non_converging",
    }
    expect = cfg.get("expect", entry.expected.get("separate_continuity",
                                                  {"y_side": "converging", "x_side": "converging"}))
    values = {"x0": x0, "z": z, "k": ks, "y_side": y_side, "x_side": x_side}
    extra = {"expected": expect, "observed": observed, "tolerances": {"tail_threshold": TAIL_THRESHOLD},
             "grid": _grid(["t", "y_side", "x_side"], zip([2.0 ** -k for k in ks], y_side, x_side))}
    return values, observed == expect, extra


def _lambda_grid(cfg, p) -> np.ndarray:
    lams = cfg.get("lambdas")
    if lams is None:
        lams = {"start": float(p.lam_box.lo[0]) * 0.5, "stop": float(p.lam_box.hi[0]) * 0.5, "num": 20}
    if isinstance(lams, dict):
        pts = np.linspace(lams["start"], lams["stop"], int(lams["num"]))
        return np.repeat(pts[:, None], p.lam_dim, axis=1)
    arr = np.asarray(lams, dtype=float)
    return arr.reshape(-1, p.lam_dim)


def _check_fixedpoint(cfg, rng):
    p = registry.get_problem(cfg["problem"])
    lams = _lambda_grid(cfg, p)
    rows, failures = [], []
    worst = {"residual": 0.0, "neumann_vs_direct": 0.0, "slope_identity": 0.0, "continuity_excess": -np.inf}
    deltas = []
    prev = None
    for lam in lams:
        res = fixedpoint.solve_with_sensitivity(p, lam, "neumann")
        direct = fixedpoint.sensitivity(p, lam, "direct", x_lam=res.x)
        diff = float(np.max(np.abs(res.sensitivity - direct)))
        worst["residual"] = max(worst["residual"], res.residual)
        worst["neumann_vs_direct"] = max(worst["neumann_vs_direct"], diff)
        if res.residual > p.tol:
            failures.append({"lambda": lam, "reason": "residual", "value": res.residual})
        if diff > NEUMANN_DIRECT_TOL:
            failures.append({"lambda": lam, "reason": "neumann_vs_direct", "value": diff})
        if prev is not None:
            cb = fixedpoint.continuity_bound(p, prev, lam)
            worst["continuity_excess"] = max(worst["continuity_excess"], cb["lhs"] - cb["rhs"])
            if not cb["holds"]:
                failures.append({"lambda": lam, "reason": "continuity_bound", "lhs": cb["lhs"], "rhs": cb["rhs"]})
        prev = lam
        if cfg.get("slope_check", True):
            delta = fixedpoint.find_delta(p, lam)
            deltas.append(delta)
            d = _unit(rng, p.lam_dim)
            mu = lam + 0.5 * delta * d
            if p.lam_box.contains(mu):
                psi = fixedpoint.fixed_point_slope(p, lam, mu)
                x_mu = fixedpoint.solve(p, mu).x
                err = float(np.linalg.norm(x_mu - res.x - psi @ (mu - lam)))
                rel = err / (1.0 + float(np.linalg.norm(x_mu - res.x)))
                worst["slope_identity"] = max(worst["slope_identity"], rel)
                if rel > FP_SLOPE_RTOL:
                    failures.append({"lambda": lam, "reason": "fixed_point_slope", "value": rel})
        rows.append([*lam, *res.x, *res.sensitivity.ravel()])
    cols = (["lambda"] if p.lam_dim == 1 else [f"lambda_{i}" for i in range(p.lam_dim)])
    cols += ["x_lambda"] if p.x_dim == 1 else [f"x_lambda_{i}" for i in range(p.x_dim)]
    if p.x_dim == 1 and p.lam_dim == 1:
        cols += ["sensitivity"]
    else:
        cols += [f"sensitivity_{i}_{j}" for i in range(p.x_dim) for j in range(p.lam_dim)]
    values = {"problem": p.name, "points": len(lams), "worst": worst, "deltas": deltas, "failures": failures}
    extra = {"tolerances": {"residual": p.tol, "neumann_vs_direct": NEUMANN_DIRECT_TOL,
                            "slope_identity_rtol": FP_SLOPE_RTOL},
             "grid": _grid(cols, rows)}
    return values, not failures, extra


def well_conditioned(rng: np.random.Generator, n: int, lo: float = 1.0, hi: float = 10.0) -> np.ndarray:
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q1 @ np.diag(rng.uniform(lo, hi, n)) @ q2


def _check_inversion(cfg, rng):
    n = int(cfg.get("n", 5))
    samples = int(cfg.get("samples", 100))
    worst = 0.0
    for _ in range(samples):
        A, B = well_conditioned(rng, n), well_conditioned(rng, n)
        Phi = calculus.inversion_slope(A, B)
        lhs = np.linalg.inv(B) - np.linalg.inv(A)
        rhs = calculus.unflatten_op(Phi @ calculus.flatten_op(B - A), n)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs)))
    return {"n": n, "samples": samples, "max_relative_error": worst}, worst <= INVERSION_RTOL, \
        {"tolerances": {"rtol": INVERSION_RTOL}}


def _rule_cases():
    trig = registry.get("trig_map").function
    cub = registry.get("cubic_poly_r3").function
    tanh = registry.get("tanh_layer").function
    dot2 = BilinearMap.dot(2)
    return {
        "linear": (calculus.linear_combination(2.0, trig, -3.0, cub),
                   lambda x: calculus.combine_linear(2.0, canonical_slope(trig, x), -3.0, basis_slope_op(cub, x)),
                   0.8, 3),
        "chain": (calculus.compose(trig, tanh),
                  lambda x: calculus.chain(canonical_slope(trig, tanh(x)), canonical_slope(tanh, x), tanh),
                  1.0, 4),
        "product": (calculus.bilinear_compose(dot2, trig, cub),
                    lambda x: calculus.product(dot2, canonical_slope(trig, x), basis_slope_op(cub, x), trig, cub),
                    0.8, 3),
    }


def _check_rules(cfg, rng):
    samples = int(cfg.get("samples", 20))
    worst_diag, worst_id = {}, {}
    for rule, (composite, make, r, n) in _rule_cases().items():
        fd = _strip_jacobian(composite)
        wd = wi = 0.0
        for _ in range(samples):
            x, y = rng.uniform(-r, r, (2, n))
            slope = make(x)
            wd = max(wd, float(np.max(np.abs(slope.derivative - derivative_oracle(fd, x)))))
            res, scale = slope_residual(composite, x, y, slope(y))
            wi = max(wi, res / (1.0 + scale))
        worst_diag[rule], worst_id[rule] = wd, wi
    ok = all(v <= RULES_TOL for v in worst_diag.values()) and all(v <= SLOPE_RTOL for v in worst_id.values())
    return ({"samples": samples, "max_diagonal_error": worst_diag, "max_identity_residual": worst_id}, ok,
            {"tolerances": {"diagonal": RULES_TOL, "identity_rtol": SLOPE_RTOL}})


CHECKS: dict[str, Callable] = {
    "slope_identity": _check_slope_identity,
    "directional_limit": _check_directional,
    "c1_probe": _check_c1,
    "mvi": _check_mvi,
    "bound": _check_bound,
    "schwarz": _check_schwarz,
    "lipschitz": _check_lipschitz,
    "separate_continuity": _check_separate,
    "fixedpoint": _check_fixedpoint,
    "inversion": _check_inversion,
    "rules": _check_rules,
}

_NEEDS_FUNCTION = {"slope_identity", "directional_limit", "c1_probe", "mvi", "bound", "schwarz",
                   "lipschitz", "separate_continuity"}


# ---------------------------------------------------------------------------
# Config handling and dispatch
# ---------------------------------------------------------------------------

def validate_config(config: Any) -> list[dict]:
    """Return the checks with resolved names; raise ConfigError on any problem."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a mapping")
    checks = config.get("checks", [])
    if not isinstance(checks, list):
        raise ConfigError("'checks' must be a list")
    out, seen = [], set()
    for i, chk in enumerate(checks):
        if not isinstance(chk, dict):
            raise ConfigError(f"check #{i} must be a mapping")
        ctype = chk.get("type")
        if ctype not in CHECKS:
            raise ConfigError(f"check #{i}: unknown type {ctype!r}")
        if ctype in _NEEDS_FUNCTION:
            if "function" not in chk:
                raise ConfigError(f"check #{i} ({ctype}) needs a 'function'")
            if chk["function"] not in registry.REGISTRY:
                raise ConfigError(f"check #{i}: unknown registry function {chk['function']!r}")
        if ctype == "fixedpoint":
            if chk.get("problem") not in registry.PROBLEMS:
                raise ConfigError(f"check #{i}: unknown fixed-point problem {chk.get('problem')!r}")
        target = chk.get("function", chk.get("problem", ""))
        name = chk.get("name") or f"{i:03d}-{ctype}" + (f"-{target}" if target else "")
        if name in seen:
            raise ConfigError(f"duplicate check name {name!r}")
        seen.add(name)
        out.append({**chk, "name": name})
    return out


def run_one(chk: dict, seed: int) -> dict:
    name = chk["name"]
    rng = _rng(seed, name)
    record = {"name": name, "type": chk["type"], "inputs": {k: v for k, v in chk.items() if k != "name"}}
    try:
        fn = CHECKS[chk["type"]]
        if chk["type"] == "c1_probe":
            values, ok, extra = fn(chk, rng, int(rng.integers(2**31)))
        else:
            values, ok, extra = fn(chk, rng)
        record["values"] = values
        record.update(extra)
        record["verdict"] = _verdict(ok)
    except ConfigError:
        raise
    except Exception as exc:  # any module error becomes a failed record
        logger.exception("check %s raised", name)
        record["values"] = {}
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["verdict"] = "fail"
    return to_jsonable(record)


def run_check(config: dict, seed: Optional[int] = None, command: str = "check") -> Report:
    """Run every check in ``config``; records are ordered by check name."""
    checks = validate_config(config)
    if seed is None:
        seed = int(config.get("seed", 0))
    records = [run_one(chk, seed) for chk in sorted(checks, key=lambda c: c["name"])]
    echo = to_jsonable(copy.deepcopy(config))
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return Report(command, seed, echo, records, stamp)


def write_csv(path: Path, columns: list[str], rows: list[list[float]]) -> None:
    """Floats are written with repr so they round-trip to the JSON values exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def emit_grid(config: dict, out_dir, seed: Optional[int] = None, command: str = "grid") -> tuple[Report, list[Path]]:
    """Run the config and write one CSV per record that carries grid data."""
    report = run_check(config, seed, command)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in report.records:
        if "grid" in rec:
            path = out / f"{rec['name']}.csv"
            write_csv(path, rec["grid"]["columns"], rec["grid"]["rows"])
            paths.append(path)
    return report, paths


def _cell(v) -> str:
    return v if isinstance(v, str) else json.dumps(v, sort_keys=True)


def summary_rows(report: Report) -> tuple[list[str], list[list[str]]]:
    cols = ["name", "type", "target", "verdict", "expected", "observed", "error"]
    rows = []
    for r in report.records:
        inp = r["inputs"]
        rows.append([
            r["name"], r["type"], inp.get("function", inp.get("problem", "")), r["verdict"],
            _cell(r.get("expected", "")), _cell(r.get("observed", "")),
            r.get("error", ""),
        ])
    return cols, rows
