"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for
configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import registry
from .checks import ConfigError, Report, emit_grid, run_check, summary_rows, write_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _render(report: Report, fmt: str, timestamp: bool) -> str:
    if fmt == "json":
        return report.to_json(include_timestamp=timestamp)
    return _csv_text(*summary_rows(report))


def cmd_check(args) -> int:
    report = run_check(_load_config(args.config), args.seed, "check")
    _emit(_render(report, args.format, not args.no_timestamp), args.out)
    return report.exit_status


def cmd_grid(args) -> int:
    if args.out is None:
        raise ConfigError("grid needs --out DIR for the CSV files")
    report, paths = emit_grid(_load_config(args.config), args.out, args.seed, "grid")
    Path(args.out, "report.json").write_text(report.to_json(include_timestamp=not args.no_timestamp))
    for p in paths:
        print(p)
    return report.exit_status


def _parse_lambdas(spec: str) -> dict | list:
    # "start:stop:num" or a comma-separated list
    if ":" in spec:
        a, b, n = spec.split(":")
        return {"start": float(a), "stop": float(b), "num": int(n)}
    return [float(v) for v in spec.split(",")]


def cmd_fixedpoint(args) -> int:
    if args.config is not None:
        config = _load_config(args.config)
    else:
        if args.problem is None:
            raise ConfigError("fixedpoint needs --problem or --config")
        chk = {"type": "fixedpoint", "problem": args.problem, "name": f"fixedpoint-{args.problem}"}
        if args.lambdas:
            try:
                chk["lambdas"] = _parse_lambdas(args.lambdas)
            except ValueError:
                raise ConfigError(f"cannot parse --lambdas {args.lambdas!r}") from None
        config = {"checks": [chk]}
    for chk in config.get("checks", []):
        if isinstance(chk, dict) and chk.get("type") != "fixedpoint":
            raise ConfigError("the fixedpoint command only runs fixedpoint checks")
    report = run_check(config, args.seed, "fixedpoint")
    if args.format == "csv":
        grids = [r for r in report.records if "grid" in r]
        if args.out not in (None, "-") and len(grids) == 1:
            write_csv(Path(args.out), grids[0]["grid"]["columns"], grids[0]["grid"]["rows"])
        else:
            text = ""
            for r in grids:
                rows = [[repr(v) for v in row] for row in r["grid"]["rows"]]
                text += _csv_text(r["grid"]["columns"], rows)
            _emit(text, args.out)
    else:
        _emit(report.to_json(include_timestamp=not args.no_timestamp), args.out)
    return report.exit_status


def cmd_list(args) -> int:
    entries = [e.describe() for e in registry.REGISTRY.values()]
    problems = [{"name": p.name, "x_dim": p.x_dim, "lam_dim": p.lam_dim, "L": p.L} for p in registry.PROBLEMS.values()]
    if args.format == "json":
        text = json.dumps({"functions": entries, "problems": problems}, indent=2, sort_keys=True) + "\n"
    else:
        rows = [["function", e["name"], e["n_in"], e["n_out"], " ".join(e["flags"]), e["lipschitz"]] for e in entries]
        rows += [["problem", p["name"], p["x_dim"] + p["lam_dim"], p["x_dim"], "contraction", p["L"]] for p in problems]
        text = _csv_text(["kind", "name", "n_in", "n_out", "flags", "lipschitz"], rows)
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slopecalc", description="Slope-function diagnostics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="json"):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output file (or directory for grid)")
        p.add_argument("--format", choices=["json", "csv"], default=fmt_default)
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable output")

    common(sub.add_parser("check", help="run the checks in a config and print a report"))
    common(sub.add_parser("grid", help="write per-check CSV grids to a directory"), "csv")
    fp = sub.add_parser("fixedpoint", help="solve a registered parametric fixed-point problem")
    common(fp, "csv")
    fp.add_argument("--problem", help="registered problem name")
    fp.add_argument("--lambdas", help="start:stop:num or comma-separated values")
    lst = sub.add_parser("list", help="list registered functions and problems")
    lst.add_argument("--format", choices=["json", "csv"], default="csv")
    lst.add_argument("--out", default=None)
    return parser


COMMANDS = {"check": cmd_check, "grid": cmd_grid, "fixedpoint": cmd_fixedpoint, "list": cmd_list}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
