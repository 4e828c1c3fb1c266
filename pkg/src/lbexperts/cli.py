"""Command-line front end: ``run``, ``estimate``, ``verify`` and ``sweep``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 invalid input.
Every file is written under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import InstanceError
from .environments import generate_instance
from .harness import ExperimentConfig, bound_check, estimate_pseudo_regret, json_default, run_episode, sweep
from .verify import CHECKS, format_report, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class ConfigError(Exception):
    def __init__(self, path: str, line: Optional[int], message: str):
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: {message}")


def _line_of(text: str, message: str, fallback_keys: Sequence[str]) -> Optional[int]:
    """Best line to point at: a quoted key named in the message, else the enclosing block."""
    lines = text.splitlines()
    names = re.findall(r"'([A-Za-z_][A-Za-z0-9_]*)'", message)
    for key in list(names) + list(fallback_keys):
        pat = f'"{key}"'
        for i, line in enumerate(lines, 1):
            if pat in line:
                return i
    return None


def load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(path, None, f"cannot read config: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, exc.lineno, f"malformed JSON: {exc.msg} (column {exc.colno})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(path, 1, "config must be a JSON object")
    try:
        return ExperimentConfig.from_dict(doc, base_dir=str(Path(path).resolve().parent))
    except (ValueError, TypeError, KeyError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        raise ConfigError(path, _line_of(text, msg, ("learner", "scenario")), msg) from exc


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicates is not None:
        if args.replicates < 1:
            raise ValueError("--replicates must be at least 1")
        cfg.replicates = args.replicates
    return cfg


def _out_dir(args, cfg: Optional[ExperimentConfig] = None) -> Path:
    out = args.out or (cfg.out if cfg is not None and cfg.out else "out")
    path = Path(out)
    if cfg is not None and cfg.out and not args.out and cfg.base_dir and not path.is_absolute():
        path = Path(cfg.base_dir) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    inst = generate_instance(cfg.scenario, cfg.base_dir)
    trace = run_episode(inst, cfg.learner, cfg.seed, cfg.delta)
    out = _out_dir(args, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = inst.num_experts
    w.writerow(["t", "action", "realized_loss", *[f"p_{i + 1}" for i in range(n)], "regret"])
    for t in range(trace.horizon):
        w.writerow([
            t + 1,
            int(trace.actions[t]) + 1,
            _fmt(trace.realized_losses[t]),
            *[_fmt(v) for v in trace.distributions[t]],
            _fmt(trace.regret[t]),
        ])
    (out / "trace.csv").write_text(buf.getvalue())
    _say(args, f"final regret {trace.final_regret:.6g} over {trace.horizon} rounds; trace written to {out / 'trace.csv'}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = estimate_pseudo_regret(cfg)
    chk = bound_check(report)
    out = _out_dir(args, cfg)
    doc = report.to_dict()
    doc["bound_check"] = {"passed": chk.passed, "margin": chk.margin, "statistic": chk.statistic, "threshold": chk.threshold}
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=json_default) + "\n")
    (out / "regret_curve.csv").write_text(report.curve_csv())
    se = "undefined" if report.std_error is None else f"{report.std_error:.4g}"
    _say(
        args,
        f"mean pseudo-regret {report.mean_pseudo_regret:.4g} (stderr {se}) vs {report.bound_kind} bound "
        f"{report.theoretical_bound:.4g}: {'PASS' if chk.passed else 'FAIL'} (margin {chk.margin:.4g})",
    )
    return EXIT_OK if chk.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    only = set(args.only.split(",")) if args.only else None
    if only:
        unknown = only - {k for k, _ in CHECKS}
        if unknown:
            raise ValueError(f"unknown check(s): {sorted(unknown)}")
    results = run_suite(seed, only, progress=lambda r: _say(args, r.line()))
    ok = all(r.passed for r in results)
    if args.out:
        (_out_dir(args) / "verify.json").write_text(format_report(seed, results))
    _say(args, f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    block = dict(cfg.sweep or {})
    parameter = args.parameter or block.get("parameter", "horizon")
    values = [json.loads(v) for v in args.values.split(",")] if args.values else block.get("values")
    if not values:
        raise ValueError("sweep needs values (config 'sweep.values' or --values)")
    rows = sweep(cfg, parameter, values)
    out = _out_dir(args, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "value", "mean_regret", "stderr", "bound", "passed"])
    for r in rows:
        w.writerow([r["parameter"], r["value"], _fmt(r["mean_regret"]), _fmt(r["stderr"]), _fmt(r["bound"]), r["passed"]])
    (out / "sweep.csv").write_text(buf.getvalue())
    for r in rows:
        _say(args, f"{parameter}={r['value']}: mean {r['mean_regret']:.4g} vs bound {r['bound']:.4g} {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--replicates", type=int, help="Monte Carlo replicates (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(prog="lbexperts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="play one episode and write trace.csv")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("estimate", parents=[common], help="Monte Carlo pseudo-regret vs bound")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("verify", parents=[common], help="run the property and bound suite")
    p.add_argument("--config", help="accepted for symmetry; the suite is self-contained")
    p.add_argument("--only", help="comma-separated subset of: " + ",".join(k for k, _ in CHECKS))
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("sweep", parents=[common], help="mean regret vs bound over a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--parameter", help="horizon, num_experts or a scenario params key")
    p.add_argument("--values", help="comma-separated JSON values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, InstanceError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
