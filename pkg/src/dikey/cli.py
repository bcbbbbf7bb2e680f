"""Command-line entry point: ``dikey {certify,sweep,distance,local-bound,selftest-check}``.

Exit codes: 0 success, 1 invalid input, 2 a certification threshold failed,
3 the vertex cap of the local polytope was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .construction import (
    ParameterError,
    PovmError,
    dilate,
    ideal_realization,
    overlap_direct,
    with_key_noise,
)
from .keyrate import CorrelationError, born_correlation, devetak_winter, load_correlation
from .locality import (
    VERTEX_CAP,
    VertexCapError,
    best_local_strategy,
    l1_between,
    l1_distance_to_local,
    load_functional,
)
from .selftest import NearZeroOverlapError, SelfTestError, check_relations, run_selftest

EXIT_OK, EXIT_INPUT, EXIT_THRESHOLD, EXIT_CAP = 0, 1, 2, 3
DEFAULT_TOL = 1e-8
RATE_SLACK = 1e-6

SWEEP_COLUMNS = [
    "d", "epsilon", "min_overlap", "relation_residual", "h_a_e_bits", "h_a_b_bits",
    "dw_rate_bits", "l1_to_eps0", "lp_distance", "runtime_ms", "error",
]


class InputError(ValueError):
    pass


def default_seed() -> int:
    raw = os.environ.get("DIKEY_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"DIKEY_SEED must be an integer, got {raw!r}") from None


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(format(float(obj), ".12g"))
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit(payload: dict, out, fmt_name: str = "json") -> None:
    if fmt_name == "csv":
        flat = _flatten(payload)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(flat))
        writer.writerow([fmt(v) for v in flat.values()])
        text = buf.getvalue()
    else:
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(_jsonable(v))
        else:
            out[key] = v
    return out


def _realization(d, eps, junk_a=1, junk_b=1, seed=0, noise=0.0):
    real = ideal_realization(d, eps)
    if junk_a > 1 or junk_b > 1:
        real = dilate(real, junk_a, junk_b, seed)
    if noise:
        real = with_key_noise(real, noise)
    return real


def certify(d: int, eps: float, tolerance: float = DEFAULT_TOL, anchor: int = 0,
            junk_a: int = 1, junk_b: int = 1, seed: int = 0, noise: float = 0.0) -> dict:
    """Headline pipeline: build, self-test, then evaluate the key rate.

    Raises on invalid input (including a singular anchor column); threshold
    failures are reported in the returned ``failed_checks`` list.
    """
    real = _realization(d, eps, junk_a, junk_b, seed, noise)
    overlap = overlap_direct(d, eps)
    st = run_selftest(real, anchor=anchor, overlap=overlap)
    rate = devetak_winter(real)
    target = math.log2(d)
    failed = [name for name, value in st.to_dict().items()
              if name != "anchor" and value > tolerance]
    if rate.product_form_residual > tolerance:
        failed.append("product_form")
    if rate.dw_rate < target - RATE_SLACK:
        failed.append("dw_rate")
    return {
        "d": d,
        "epsilon": eps,
        "junk_a": junk_a,
        "junk_b": junk_b,
        "seed": seed,
        "noise": noise,
        "tolerance": tolerance,
        "log2_d": target,
        "min_overlap": overlap.min_entry(),
        "selftest": st.to_dict(),
        "keyrate": rate.to_dict(),
        "dw_rate": rate.dw_rate,
        "passed": not failed,
        "failed_checks": failed,
    }


@dataclass
class SweepConfig:
    d: list[int] = field(default_factory=lambda: [2])
    epsilon: list[float] = field(default_factory=list)
    junk_a: int = 1
    junk_b: int = 1
    seed: int = 0
    noise: float = 0.0
    lp: bool = True
    tolerance: float = DEFAULT_TOL
    timing: bool = True
    out: str | None = None
    plot: str | None = None
    jobs: int = 1

    def validate(self) -> "SweepConfig":
        if not self.d or not self.epsilon:
            raise InputError("sweep needs at least one d and one epsilon")
        if any(int(d) != d or d < 2 for d in self.d):
            raise InputError(f"dimensions must be integers >= 2, got {self.d}")
        if any(not 0.0 <= e <= 1.0 for e in self.epsilon):
            raise InputError(f"epsilon values must lie in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.noise <= 0.5:
            raise InputError(f"noise must lie in [0, 0.5], got {self.noise}")
        if self.junk_a < 1 or self.junk_b < 1 or self.jobs < 1:
            raise InputError("junk dimensions and jobs must be >= 1")
        self.d = [int(d) for d in self.d]
        self.epsilon = sorted((float(e) for e in self.epsilon), reverse=True)
        return self


def sweep_row(cfg: SweepConfig, d: int, eps: float) -> dict:
    start = time.perf_counter()
    row = {c: None for c in SWEEP_COLUMNS}
    row.update(d=d, epsilon=eps)
    errors = []
    try:
        real = _realization(d, eps, cfg.junk_a, cfg.junk_b, cfg.seed, cfg.noise)
        overlap = overlap_direct(d, eps)
        row["min_overlap"] = overlap.min_entry()
        p, q = real.alice[0], real.alice[1]
        row["relation_residual"] = check_relations(p, q, overlap).max_residual
        rate = devetak_winter(real)
        row.update(h_a_e_bits=rate.h_a_given_e, h_a_b_bits=rate.h_a_given_b,
                   dw_rate_bits=rate.dw_rate)
        corr = born_correlation(real)
        ref = born_correlation(_realization(d, 0.0, cfg.junk_a, cfg.junk_b, cfg.seed, cfg.noise))
        row["l1_to_eps0"] = l1_between(corr, ref)
        if cfg.lp:
            try:
                row["lp_distance"] = l1_distance_to_local(corr).distance
            except VertexCapError as exc:
                errors.append(f"lp: {exc}")
        try:
            st = run_selftest(real, overlap=overlap)
            if st.max_residual > cfg.tolerance:
                errors.append(f"selftest residual {st.max_residual:.3e}")
        except NearZeroOverlapError as exc:
            errors.append(f"selftest: {exc}")
    except (ParameterError, SelfTestError, CorrelationError, ValueError) as exc:
        errors.append(str(exc))
    if cfg.timing:
        row["runtime_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    row["error"] = "; ".join(errors) if errors else None
    return row


def _row_job(args):
    cfg, d, eps = args
    return sweep_row(cfg, d, eps)


def run_sweep(cfg: SweepConfig) -> list[dict]:
    cfg.validate()
    grid = [(cfg, d, e) for d in cfg.d for e in cfg.epsilon]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_row_job, grid))
    return [_row_job(g) for g in grid]


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def plot_script(csv_path: str) -> str:
    """gnuplot script drawing dw_rate and l1_to_eps0 against epsilon on log-log axes."""
    col = {c: i + 1 for i, c in enumerate(SWEEP_COLUMNS)}
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        "set xlabel 'epsilon'",
        "set ylabel 'bits / l1 distance'",
        "set terminal pngcairo size 800,600",
        f"set output '{Path(csv_path).with_suffix('.png').name}'",
        f"plot '{Path(csv_path).name}' using {col['epsilon']}:{col['dw_rate_bits']} with linespoints title 'dw_rate', \\",
        f"     '' using {col['epsilon']}:{col['l1_to_eps0']} with linespoints title 'l1_to_eps0'",
        "",
    ])


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOL,
                   help="residual threshold for self-test checks")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=None)


def _dilation_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--junk-a", type=int, default=1)
    p.add_argument("--junk-b", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="dilation seed (default $DIKEY_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dikey", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="self-test and certify the key rate for one (d, eps)")
    _common(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--anchor", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="Bob key-outcome flip probability")
    _dilation_args(p)

    p = sub.add_parser("sweep", help="grid over d and epsilon, one CSV row per point")
    _common(p)
    p.add_argument("--config", default=None, help="JSON config; flags override it")
    p.add_argument("--d", type=int, nargs="+", default=None)
    p.add_argument("--epsilon", type=float, nargs="*", default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--lp", dest="lp", action="store_true", default=None)
    p.add_argument("--no-lp", dest="lp", action="store_false")
    p.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                   help="leave runtime_ms empty so output is byte-reproducible")
    p.add_argument("--plot", default=None, help="gnuplot script path (default: next to --out)")
    _dilation_args(p)

    p = sub.add_parser("distance", help="l1 distance of a correlation file to the local polytope")
    _common(p)
    p.add_argument("file")
    p.add_argument("--vertex-cap", type=int, default=VERTEX_CAP)

    p = sub.add_parser("local-bound", help="local bound of a Bell functional file")
    _common(p)
    p.add_argument("file")
    p.add_argument("--vertex-cap", type=int, default=VERTEX_CAP)

    p = sub.add_parser("selftest-check", help="self-test residuals on a dilated instance")
    _common(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--anchor", type=int, default=0)
    _dilation_args(p)
    return parser


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def cmd_certify(args) -> int:
    report = certify(args.d, args.epsilon, args.tolerance, args.anchor,
                     args.junk_a, args.junk_b, _seed(args), args.noise)
    emit(report, args.out, args.format or "json")
    if not report["passed"]:
        print(f"certification failed: {', '.join(report['failed_checks'])}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _sweep_config(args) -> SweepConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from None
        unknown = set(data) - set(SweepConfig.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
    cfg = SweepConfig(**data)
    if "seed" not in data:
        cfg.seed = default_seed()
    overrides = {
        "d": args.d, "epsilon": args.epsilon, "noise": args.noise, "lp": args.lp,
        "timing": args.timing, "out": args.out, "plot": args.plot, "seed": args.seed,
        "junk_a": args.junk_a if args.junk_a != 1 else None,
        "junk_b": args.junk_b if args.junk_b != 1 else None,
        "jobs": args.jobs if args.jobs != 1 else None,
        "tolerance": args.tolerance if args.tolerance != DEFAULT_TOL else None,
    }
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    rows = run_sweep(cfg)
    fmt_name = args.format or "csv"
    if fmt_name == "json":
        text = json.dumps(_jsonable(rows), indent=2) + "\n"
    else:
        text = rows_to_csv(rows)
    if cfg.out:
        Path(cfg.out).write_text(text)
        plot = cfg.plot or str(Path(cfg.out).with_suffix(".gp"))
        Path(plot).write_text(plot_script(cfg.out))
    else:
        sys.stdout.write(text)
        if cfg.plot:
            Path(cfg.plot).write_text(plot_script("sweep.csv"))
    ok = any(r["error"] is None for r in rows)
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_distance(args) -> int:
    corr = load_correlation(args.file)
    report = l1_distance_to_local(corr, cap=args.vertex_cap)
    emit(report.to_dict(), args.out, args.format or "json")
    return EXIT_OK


def cmd_local_bound(args) -> int:
    f = load_functional(args.file)
    value, strategy = best_local_strategy(f, cap=args.vertex_cap)
    payload = {"local_bound": value,
               "strategy": {"alice": list(strategy.alice), "bob": list(strategy.bob)}}
    emit(payload, args.out, args.format or "json")
    return EXIT_OK


def cmd_selftest_check(args) -> int:
    seed = _seed(args)
    real = _realization(args.d, args.epsilon, args.junk_a, args.junk_b, seed)
    st = run_selftest(real, anchor=args.anchor, overlap=overlap_direct(args.d, args.epsilon))
    payload = {"d": args.d, "epsilon": args.epsilon, "junk_a": args.junk_a,
               "junk_b": args.junk_b, "seed": seed, "residuals": st.to_dict(),
               "max_residual": st.max_residual, "passed": st.max_residual <= args.tolerance}
    emit(payload, args.out, args.format or "json")
    return EXIT_OK if payload["passed"] else EXIT_THRESHOLD


COMMANDS = {
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "distance": cmd_distance,
    "local-bound": cmd_local_bound,
    "selftest-check": cmd_selftest_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except VertexCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputError, ParameterError, PovmError, CorrelationError, SelfTestError,
            OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
