"""Command-line front end: scenario inspection, single runs, and sweep pipelines.

Subcommands
-----------
scenario          build (and cache) the channel terms, print a summary
optimize          one optimization run; writes a trace CSV and a result JSON
sweep-convergence gain-versus-iteration traces per (spacing, architecture)
sweep-gain        converged gain per (M, spacing, architecture, coupling mode)

Exit codes: 0 converged, 2 iteration limit, 3 singular surface matrix,
64 usage or configuration error.  The pipeline is fully deterministic:
identical configuration and flags produce byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .architecture import make_architecture
from .errors import ConfigError, RisError
from .network import ChannelTerms, channel_gain
from .optimizer import OptimizationResult, OptimizerConfig, optimize
from .scenario import ScenarioConfig, config_hash, decouple, load_or_build

EXIT_OK = 0
EXIT_MAX_ITER = 2
EXIT_SINGULAR = 3
EXIT_USAGE = 64

DEFAULT_D_FRACTIONS = (0.5, 0.25, 0.125)
DEFAULT_M_SWEEP = (4, 9, 16, 25, 36)
ARCH_ORDER = ("SC", "GC", "FC")


@dataclass(frozen=True)
class SweepPoint:
    """One independent grid point of a sweep."""

    m: int
    d_fraction: float
    arch_label: str
    groups: int
    mode: str  # "with_mc" | "without_mc"


@dataclass
class RunRecord:
    """Summary of one optimization run."""

    scenario_hash: str
    m: int
    d_over_lambda: float
    arch: str
    mode: str
    gain: float
    iterations: int
    termination: str
    wall_time_s: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def _fmt(value: float) -> str:
    return repr(float(value))


def _arch_groups(label: str, m: int, group_size: int) -> int | None:
    """Group count for an architecture label, or None when M is incompatible."""
    if label == "SC":
        return m
    if label == "FC":
        return 1
    if m % group_size != 0 or group_size == 1 or group_size == m:
        return None
    return m // group_size


def _load_config(args) -> ScenarioConfig:
    """Read the configuration file and fold in the element-count/quadrature flags.

    Sweep commands treat a repeated ``--m`` as the sweep axis, so only a single
    value is folded into the base config here (by the optimize command).
    """
    if not args.config:
        raise ConfigError("--config PATH is required")
    config = ScenarioConfig.from_file(args.config)
    m_flag = getattr(args, "m", None)
    if m_flag and len(m_flag) == 1 and args.command in ("scenario", "optimize"):
        config = replace(config, m=m_flag[0], grid=None, group_size=1)
    if getattr(args, "quadrature_order", None):
        config = replace(config, quadrature_order=args.quadrature_order)
    return config


def _derive(config: ScenarioConfig, m: int, d_fraction: float) -> ScenarioConfig:
    lam = config.constants.wavelength
    return replace(config, m=m, spacing=d_fraction * lam, grid=None, group_size=1)


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        delta=args.delta,
        max_iterations=args.max_iter,
        relative_tolerance=args.tol,
        neumann_guard=args.guard,
    )


def _terms_for(config: ScenarioConfig, args) -> ChannelTerms:
    return load_or_build(config, cache_dir=args.cache_dir, use_cache=not args.no_cache)


def write_trace_csv(path: Path, result: OptimizationResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,c_linearized,gain_exact\n")
        for it, (c_lin, exact) in enumerate(zip(result.gain_trace, result.exact_trace)):
            fh.write(f"{it},{_fmt(c_lin)},{_fmt(exact)}\n")


def cmd_scenario(args) -> int:
    config = _load_config(args)
    t0 = time.perf_counter()
    terms = _terms_for(config, args)
    elapsed = time.perf_counter() - t0
    lam = config.constants.wavelength
    off = terms.z_ii - np.diag(np.diag(terms.z_ii))
    diag = np.diag(terms.z_ii)
    summary = {
        "wavelength_m": lam,
        "grid": f"{config.grid[0]}x{config.grid[1]}",
        "m": config.m,
        "spacing_over_lambda": config.spacing_over_lambda,
        "scenario_hash": config_hash(config),
        "max_offdiag_abs_ohm": float(np.max(np.abs(off))) if config.m > 1 else 0.0,
        "diag_real_ohm": [float(diag.real.min()), float(diag.real.max())],
        "diag_imag_ohm": [float(diag.imag.min()), float(diag.imag.max())],
        "build_seconds": elapsed,
    }
    if args.format == "json":
        print(json.dumps(summary, indent=2))
        return EXIT_OK
    print(f"wavelength_m {lam:.6e}")
    print(f"grid {config.grid[0]}x{config.grid[1]}  m {config.m}  "
          f"spacing_over_lambda {config.spacing_over_lambda:.6g}")
    print(f"scenario_hash {summary['scenario_hash']}")
    print(f"max_offdiag_abs_ohm {summary['max_offdiag_abs_ohm']:.6e}")
    print(f"diag_real_ohm [{diag.real.min():.6e}, {diag.real.max():.6e}]")
    print(f"diag_imag_ohm [{diag.imag.min():.6e}, {diag.imag.max():.6e}]")
    print(f"build_seconds {elapsed:.3f}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = _load_config(args)
    if args.d:
        config = replace(config, spacing=args.d[0] * config.constants.wavelength)
    groups = args.g if args.g else config.m // config.group_size
    arch = make_architecture(config.m, groups)
    terms = _terms_for(config, args)
    opt = _optimizer_config(args)

    t0 = time.perf_counter()
    result = optimize(terms, arch, opt)
    wall = time.perf_counter() - t0
    record = RunRecord(config_hash(config), config.m, config.spacing_over_lambda,
                       arch.label, "with_mc", result.gain, result.iterations,
                       result.termination, wall)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"optimize_m{config.m}_g{groups}_d{config.spacing_over_lambda:.6g}"
    write_trace_csv(out_dir / f"{stem}.trace.csv", result)
    payload = {"record": record.to_dict(), "result": json.loads(result.to_json())}
    (out_dir / f"{stem}.result.json").write_text(json.dumps(payload, indent=2))
    if args.format == "json":
        print(json.dumps(record.to_dict(), indent=2))
    else:
        print(f"gain {_fmt(result.gain)}  iterations {result.iterations}  "
              f"termination {result.termination}  wall_s {wall:.2f}")
        print(f"wrote {out_dir / (stem + '.trace.csv')}")
    if result.termination == "max_iter":
        return EXIT_MAX_ITER
    if result.termination == "singular":
        return EXIT_SINGULAR
    return EXIT_OK


def _convergence_point(payload) -> list[str]:
    config, d_frac, label, groups, opt, cache_dir, no_cache = payload
    derived = _derive(config, config.m, d_frac)
    terms = load_or_build(derived, cache_dir=cache_dir, use_cache=not no_cache)
    arch = make_architecture(derived.m, groups)
    result = optimize(terms, arch, opt)
    rows = []
    for it, (c_lin, exact) in enumerate(zip(result.gain_trace, result.exact_trace)):
        rows.append(f"{_fmt(d_frac)},{label},{it},{_fmt(c_lin)},{_fmt(exact)}")
    return rows


def cmd_sweep_convergence(args) -> int:
    config = _load_config(args)
    d_fractions = args.d or list(DEFAULT_D_FRACTIONS)
    opt = _optimizer_config(args)
    points = []
    for d_frac in d_fractions:
        for label in ARCH_ORDER:
            groups = _arch_groups(label, config.m, config.group_size)
            if groups is None:
                continue
            points.append((config, d_frac, label, groups, opt, args.cache_dir, args.no_cache))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "fig2_convergence.csv"
    rows: list[str] = []
    for chunk in _pool_map(_convergence_point, points, args.workers):
        rows.extend(chunk)
    rows.sort(key=_convergence_sort_key)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("d_over_lambda,arch,iteration,c_linearized,gain_exact\n")
        fh.write("\n".join(rows))
        if rows:
            fh.write("\n")
    _write_meta(out_dir / "fig2_convergence.meta.json", config, opt, args)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return EXIT_OK


def _convergence_sort_key(row: str):
    d, arch, it, _, _ = row.split(",", 4)
    return (-float(d), ARCH_ORDER.index(arch), int(it))


def _gain_point(payload) -> tuple[SweepPoint, RunRecord]:
    config, point, opt, cache_dir, no_cache = payload
    derived = _derive(config, point.m, point.d_fraction)
    terms = load_or_build(derived, cache_dir=cache_dir, use_cache=not no_cache)
    arch = make_architecture(point.m, point.groups)
    design_terms = terms if point.mode == "with_mc" else decouple(terms)
    t0 = time.perf_counter()
    result = optimize(design_terms, arch, opt)
    # The design is always scored against the physical, fully coupled surface:
    # the decoupled ("without_mc") branch only ignores coupling while choosing
    # the tuning, not while evaluating it.
    gain = channel_gain(terms, result.z_i)
    wall = time.perf_counter() - t0
    record = RunRecord(config_hash(derived), point.m, point.d_fraction, point.arch_label,
                       point.mode, gain, result.iterations, result.termination, wall)
    return point, record


def cmd_sweep_gain(args) -> int:
    config = _load_config(args)
    d_fractions = args.d or list(DEFAULT_D_FRACTIONS)
    m_values = args.m or list(DEFAULT_M_SWEEP)
    opt = _optimizer_config(args)

    points = []
    for m in m_values:
        for d_frac in d_fractions:
            for label in ARCH_ORDER:
                groups = _arch_groups(label, m, config.group_size)
                if groups is None:
                    continue  # GC is skipped when the group size does not divide M
                for mode in ("with_mc", "without_mc"):
                    points.append(SweepPoint(m, d_frac, label, groups, mode))

    payloads = [(config, p, opt, args.cache_dir, args.no_cache) for p in points]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "fig3_gain.csv"
    records: list[tuple[SweepPoint, RunRecord]] = []
    partial: list[str] = []
    try:
        for point, record in _pool_map(_gain_point, payloads, args.workers):
            records.append((point, record))
            partial.append(f"{point.m},{_fmt(point.d_fraction)},{point.arch_label},"
                           f"{point.mode},{_fmt(record.gain)}")
    finally:
        records.sort(key=lambda pr: (pr[0].m, -pr[0].d_fraction,
                                     ARCH_ORDER.index(pr[0].arch_label), pr[0].mode))
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("M,d_over_lambda,arch,mode,gain\n")
            for point, record in records:
                fh.write(f"{point.m},{_fmt(point.d_fraction)},{point.arch_label},"
                         f"{point.mode},{_fmt(record.gain)}\n")
        # CSV is the canonical artifact; the JSON mirror carries the run records.
        (out_dir / "fig3_gain.json").write_text(json.dumps(
            [record.to_dict() for _, record in records], indent=2))
        _write_meta(out_dir / "fig3_gain.meta.json", config, opt, args)
    print(f"wrote {out_path} ({len(records)} rows)")
    return EXIT_OK


def _write_meta(path: Path, config: ScenarioConfig, opt: OptimizerConfig, args) -> None:
    path.write_text(json.dumps({
        "frequency_hz": config.frequency_hz,
        "delta": opt.delta,
        "relative_tolerance": opt.relative_tolerance,
        "max_iterations": opt.max_iterations,
        "quadrature_order": config.quadrature_order,
        "group_size": config.group_size,
        "tx_xyz": list(config.tx_position),
        "rx_xyz": list(config.rx_position),
    }, indent=2))


def _pool_map(fn, payloads, workers: int):
    """Map over independent sweep points, optionally in a process pool.

    Results are yielded in submission order either way; the callers still
    sort rows before writing so output never depends on scheduling.
    """
    if workers <= 1:
        for payload in payloads:
            yield fn(payload)
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, payloads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdris",
                                     description="BD-RIS coupling-aware link modeling and optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="scenario configuration JSON")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="stdout summary format; files always carry CSV plus a JSON mirror")
        p.add_argument("--quadrature-order", type=int, dest="quadrature_order")
        p.add_argument("--no-cache", action="store_true", help="recompute the channel terms")
        p.add_argument("--cache-dir", default=None,
                       help="terms cache directory (default: $BDRIS_CACHE_DIR or ~/.cache/bdris)")

    def add_optimizer(p):
        p.add_argument("--delta", type=float, default=OptimizerConfig().delta,
                       help="increment magnitude in ohms")
        p.add_argument("--tol", type=float, default=OptimizerConfig().relative_tolerance,
                       help="relative objective-change stopping tolerance")
        p.add_argument("--max-iter", type=int, default=OptimizerConfig().max_iterations)
        p.add_argument("--guard", action="store_true",
                       help="enable the linearization validity guard (warn + abort on drops)")
        p.add_argument("--workers", type=int, default=1,
                       help="process pool size for sweep points")

    p = sub.add_parser("scenario", help="build and summarize the channel terms")
    add_common(p)
    p.add_argument("--m", type=int, action="append")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("optimize", help="run one optimization")
    add_common(p)
    add_optimizer(p)
    p.add_argument("--m", type=int, action="append")
    p.add_argument("--g", type=int, help="number of groups (G); default from config group size")
    p.add_argument("--d", type=float, action="append",
                   help="element spacing as a fraction of the wavelength")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep-convergence", help="gain-versus-iteration traces (fig2 data)")
    add_common(p)
    add_optimizer(p)
    p.add_argument("--m", type=int, action="append")
    p.add_argument("--d", type=float, action="append",
                   help="spacing fraction of the wavelength; repeatable")
    p.set_defaults(func=cmd_sweep_convergence)

    p = sub.add_parser("sweep-gain", help="gain versus element count (fig3 data)")
    add_common(p)
    add_optimizer(p)
    p.add_argument("--m", type=int, action="append",
                   help="element count; repeatable (default 4 9 16 25 36)")
    p.add_argument("--d", type=float, action="append")
    p.set_defaults(func=cmd_sweep_gain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    if args.cache_dir is None:
        env = os.environ.get("BDRIS_CACHE_DIR")
        args.cache_dir = env if env else None
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
