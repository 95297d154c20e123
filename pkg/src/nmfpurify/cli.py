"""Command-line harness: ``nmfpurify <subcommand> [--config PATH] [--seed S] ...``.

Exit codes: 0 ok, 2 configuration error, 3 rank deficiency, 4 equilibration
pass cap, 5 verify failures.  No environment variables are read.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import config as C
from .analysis import RECORD_FIELDS, col_error, exact_update_expectation
from .audits import SUITES, run_suite
from .equilibrate import LOG_FIELDS, equilibration, scaled_spec
from .errors import ConfigError, MaxOuterExceeded, RankDeficient, SupportTooLarge
from .genmodel import moments
from .l1pinv import min_inf_pinv
from .matcore import format_matrix_csv, load_matrix_csv, save_matrix_csv
from .purify import default_params, run_purification
from .rng import Streams

EXIT_OK, EXIT_CONFIG, EXIT_RANK, EXIT_EQUIL, EXIT_VERIFY = 0, 2, 3, 4, 5

TRAJECTORY_FILE = "trajectory.csv"
RESOLVED_FILE = "resolved_config.cfg"


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


class TrajectoryWriter:
    """Streams IterRecords to CSV, flushing every row so partial runs survive."""

    def __init__(self, path: Path):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(RECORD_FIELDS)
        self.fh.flush()

    def __call__(self, rec):
        self.writer.writerow([_fmt(v) for v in rec.as_row()])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _prepare(cfg, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / RESOLVED_FILE).write_text(C.format_config(cfg), encoding="utf-8")
    streams = Streams(cfg["seed"])
    spec = C.build_spec(cfg, streams)
    a0 = C.build_a0(cfg, spec, streams)
    return streams, spec, a0


def _purify(cfg, spec, a0, out: Path, threads: int, ground_truth=None, params=None) -> dict:
    params = params or C.build_algo(cfg, spec.weights)
    writer = TrajectoryWriter(out / TRAJECTORY_FILE)
    start = time.perf_counter()
    try:
        res = run_purification(spec, params, with_diagnostics=cfg["run.diagnostics"], a0=a0,
                               threads=threads, on_record=writer, ground_truth=ground_truth)
    finally:
        writer.close()
    wall = time.perf_counter() - start
    save_matrix_csv(out / "a_final.csv", res.a_final)
    save_matrix_csv(out / "a_normalized.csv", res.a_normalized)
    reference = spec.ground_truth if ground_truth is None else ground_truth
    err = col_error(res.a_final, reference / np.abs(reference).sum(axis=0))
    summary = C.RunSummary(final_col_err=err, iterations=params.T, wall_time_s=wall,
                           params_echo=C.format_config(cfg), git_describe=git_describe())
    (out / "summary.json").write_text(json.dumps(summary.as_dict(), indent=2) + "\n", encoding="utf-8")
    return summary.as_dict()


# -- subcommands -----------------------------------------------------------------


def cmd_gen(cfg, args) -> int:
    out = Path(args.out)
    _, spec, a0 = _prepare(cfg, out)
    save_matrix_csv(out / "a_star.csv", spec.ground_truth)
    save_matrix_csv(out / "a0.csv", a0)
    return EXIT_OK


def cmd_run(cfg, args) -> int:
    out = Path(args.out)
    _, spec, a0 = _prepare(cfg, out)
    summary = _purify(cfg, spec, a0, out, args.threads)
    print(f"final_col_err = {summary['final_col_err']:.6g}")
    return EXIT_OK


def cmd_equilibrate(cfg, args) -> int:
    out = Path(args.out)
    _, spec, a0 = _prepare(cfg, out)
    params = C.build_equil(cfg, spec.weights)
    log_path = out / "equil_log.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_FIELDS)

        def on_pass(row):
            writer.writerow([_fmt(v) for v in row])
            fh.flush()

        res = equilibration(a0, params, spec, threads=args.threads, on_pass=on_pass)
    save_matrix_csv(out / "a_balanced.csv", res.A)
    (out / "d.json").write_text(json.dumps([float(d) for d in res.D]) + "\n", encoding="utf-8")
    print(f"balance_ratio = {res.log[-1][3]:.6g} after {res.passes} passes")
    if args.then_purify:
        balanced = scaled_spec(spec, res.D)
        algo = C.build_algo(cfg, balanced.weights)
        summary = _purify(cfg, balanced, res.A, out, args.threads,
                          ground_truth=balanced.ground_truth, params=algo)
        print(f"final_col_err = {summary['final_col_err']:.6g}")
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError("sweep.values", f"bad list {text!r}") from exc


def cmd_sweep(cfg, args) -> int:
    axis = args.axis or cfg["sweep.axis"]
    if axis not in C.SWEEP_AXES:
        raise ConfigError("sweep.axis", f"unknown axis {axis!r}; choose from {', '.join(C.SWEEP_AXES)}")
    values = _parse_values(args.values if args.values is not None else cfg["sweep.values"])
    if not values:
        raise ConfigError("sweep.values", "no values given")
    key = C.SWEEP_AXES[axis]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / RESOLVED_FILE).write_text(C.format_config(cfg), encoding="utf-8")
    master = Streams(cfg["seed"])
    rows = []
    for rep in range(cfg["sweep.replicates"]):
        # replicate 0 keeps the master seed; seeds are shared across values (paired runs)
        seed = cfg["seed"] if rep == 0 else master.child("sweep", rep).seed
        for k, value in enumerate(values):
            point = dict(cfg)
            point["seed"] = seed
            point[key] = int(value) if key == "algo.N" else value
            point_dir = out / f"rep{rep}_v{k}"
            start = time.perf_counter()
            try:
                point = C.resolve(point)
                _, spec, a0 = _prepare(point, point_dir)
                summary = _purify(point, spec, a0, point_dir, args.threads)
                rows.append([_fmt(value), rep, seed, "ok", _fmt(summary["final_col_err"]),
                             _fmt(summary["wall_time_s"])])
            except Exception as exc:  # recorded as data, the sweep continues
                rows.append([_fmt(value), rep, seed, f"error:{type(exc).__name__}", "nan",
                             _fmt(time.perf_counter() - start)])
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "replicate", "seed", "status", "final_col_err", "wall_time_s"])
        writer.writerows(rows)
    return EXIT_OK if any(r[3] == "ok" for r in rows) else 1


def cmd_verify(cfg, args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    draws = args.draws if args.draws is not None else cfg["verify.draws"]
    report = []
    if draws > 0:
        for suite in suites:
            report.extend(run_suite(suite, cfg["seed"], draws))
    text = json.dumps(report, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    failing = [r["name"] for r in report if r["failures"]]
    if failing:
        print("failing audits: " + ", ".join(failing), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_pinv(cfg, args) -> int:
    if not args.input:
        raise ConfigError("--input", "pinv needs --input CSV")
    try:
        A = load_matrix_csv(args.input)
    except (OSError, ValueError) as exc:
        raise ConfigError("--input", str(exc)) from exc
    res = min_inf_pinv(A, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out / "pinv.csv", res.pinv)
    sidecar = {"shape": list(res.pinv.shape), "inf_norm": res.inf_norm,
               "per_row_l1": [float(v) for v in res.per_row_l1]}
    (out / "pinv.json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_oracle(cfg, args) -> int:
    """Exact E[(y - y')(x - x')^T] for the configured model, decoding with A0 (or --input)."""
    out = Path(args.out)
    streams, spec, a0 = _prepare(cfg, out)
    A = a0
    if args.input:
        try:
            A = load_matrix_csv(args.input)
        except (OSError, ValueError) as exc:
            raise ConfigError("--input", str(exc)) from exc
    alpha = cfg["algo.alpha"]
    if alpha == C.AUTO:
        alpha = default_params(moments(spec.weights), cfg["init.ell"], spec.n).alpha
    try:
        M = exact_update_expectation(spec, A, alpha)
    except SupportTooLarge as exc:
        raise ConfigError("model.n", str(exc)) from exc
    save_matrix_csv(out / "expected_update.csv", M)
    sys.stdout.write(format_matrix_csv(M))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "equilibrate": cmd_equilibrate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "pinv": cmd_pinv,
    "oracle": cmd_oracle,
}


def _override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--set", dest="overrides", action="append", type=_override, default=[],
                        metavar="KEY=VALUE", help="override one config key")

    parser = argparse.ArgumentParser(prog="nmfpurify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write a_star.csv and a0.csv")
    sub.add_parser("run", parents=[common], help="run purification")
    p = sub.add_parser("equilibrate", parents=[common], help="balance feature moments")
    p.add_argument("--then-purify", action="store_true", help="purify the balanced matrix afterwards")
    p = sub.add_parser("sweep", parents=[common], help="one run per value of an axis")
    p.add_argument("--axis", choices=sorted(C.SWEEP_AXES))
    p.add_argument("--values", help="comma-separated values")
    p = sub.add_parser("verify", parents=[common], help="randomized audits")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--draws", type=int)
    p.set_defaults(out=None)
    p = sub.add_parser("pinv", parents=[common], help="min-infinity-norm left inverse of a CSV matrix")
    p.add_argument("--input")
    p = sub.add_parser("oracle", parents=[common], help="exact expected update by enumeration")
    p.add_argument("--input", help="decode with this matrix instead of A0")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        overrides: dict[str, object] = dict(args.overrides)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.command in ("verify", "pinv") and args.config is None and "seed" not in overrides:
            overrides["seed"] = 0
        cfg = C.load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RankDeficient as exc:
        print(f"rank deficient: {exc}", file=sys.stderr)
        return EXIT_RANK
    except MaxOuterExceeded as exc:
        print(f"equilibration cap: {exc}", file=sys.stderr)
        return EXIT_EQUIL


if __name__ == "__main__":
    sys.exit(main())
