"""Command-line front end.

Three subcommands:

* ``run``       — integrate a benchmark preset single-rate or multirate and
                  write trajectory/trace/space-time/Courant CSVs plus a JSON
                  summary,
* ``stability`` — sweep amplification-matrix norms for a model system (or a
                  matrix read from CSV) and write amplification.csv,
* ``compare``   — run both modes over a list of tolerances and write
                  compare.csv.

All numeric CSV output is written with 17 significant digits so re-running an
identical invocation reproduces every artifact bitwise (wall-clock fields in
summary.json are measurements and exempt from that guarantee).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import benchmarks
from .benchmarks import BenchmarkPreset, courant_numbers
from .controller import ToleranceSpec
from .errors import ToolkitError
from .integrator import IntegrationTrace, Trajectory, integrate, integrate_single_rate
from .ode_problem import ActivePartition
from .stability import MODEL_SYSTEMS, default_rescaled_grid, model_system, norm_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3

PRESETS = ("inverter_chain", "reaction_diffusion", "advection", "burgers",
           "burgers_shock", "burgers_rarefaction")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _build_preset(args) -> BenchmarkPreset:
    name = args.preset
    kw = {}
    if args.t_end is not None:
        kw["t_end"] = args.t_end
    if name == "inverter_chain":
        if args.m is not None:
            kw["m"] = args.m
        if args.tol_abs is not None:
            kw["tol_abs"] = args.tol_abs
        preset = benchmarks.inverter_chain(**kw)
    elif name == "reaction_diffusion":
        if args.cells is not None:
            kw["n_cells"] = args.cells
        if args.tol_abs is not None:
            kw["tol_abs"] = args.tol_abs
        if args.tol_rel is not None:
            kw["tol_rel"] = args.tol_rel
        preset = benchmarks.reaction_diffusion(**kw)
    elif name == "advection":
        if args.cells is not None:
            kw["n_cells"] = args.cells
        if args.tol_abs is not None:
            kw["tol_abs"] = args.tol_abs
        if args.tol_rel is not None:
            kw["tol_rel"] = args.tol_rel
        preset = benchmarks.linear_advection(**kw)
    elif name in ("burgers", "burgers_shock", "burgers_rarefaction"):
        if args.cells is not None:
            kw["n_cells"] = args.cells
        if args.tol_abs is not None:
            kw["tol_abs"] = args.tol_abs
        if args.tol_rel is not None:
            kw["tol_rel"] = args.tol_rel
        if name == "burgers_rarefaction":
            kw.setdefault("u_left", 0.0)
            kw.setdefault("u_right", 1.0)
        if args.ul is not None:
            kw["u_left"] = args.ul
        if args.ur is not None:
            kw["u_right"] = args.ur
        preset = benchmarks.burgers_riemann(**kw)
    else:
        raise ValueError(f"unknown preset {name!r}")

    cfg = preset.config
    ctrl = cfg.controller
    ctrl_updates = {}
    if args.delta is not None:
        ctrl_updates["delta"] = args.delta
    if args.nu is not None:
        ctrl_updates["nu"] = args.nu
    if ctrl_updates:
        ctrl = replace(ctrl, **ctrl_updates)
    cfg_updates = {"controller": ctrl}
    if args.h0 is not None:
        cfg_updates["h0"] = args.h0
    if args.interp is not None:
        cfg_updates["interpolant"] = args.interp
    preset.config = replace(cfg, **cfg_updates)
    return preset


def _config_snapshot(preset: BenchmarkPreset, mode: str) -> dict:
    cfg = preset.config
    return {
        "preset": preset.name,
        "mode": mode,
        "tol_rel": cfg.tolerances.tau_r,
        "tol_abs": cfg.tolerances.tau_a,
        "delta": cfg.controller.delta,
        "nu": cfg.controller.nu,
        "h0": cfg.h0,
        "h_min": cfg.controller.h_min,
        "h_max": cfg.controller.h_max if np.isfinite(cfg.controller.h_max) else "inf",
        "interpolant": cfg.interpolant,
        "newton_tolerance": cfg.newton.tolerance,
        "t0": preset.t0,
        "t_end": preset.t_end,
        "preset_params": preset.params,
    }


def _write_run_artifacts(
    out_dir: Path,
    preset: BenchmarkPreset,
    mode: str,
    traj: Trajectory,
    trace: IntegrationTrace,
    wall_time: float,
    argv: Sequence[str],
) -> List[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: List[str] = []

    m = trace.m
    _write_csv(out_dir / "trajectory.csv",
               ["t"] + [f"y{i}" for i in range(m)],
               ([t] + list(row) for t, row in zip(traj.times, traj.states)))
    outputs.append("trajectory.csv")

    def trace_rows():
        idx = 0
        for rec in trace.records:
            yield ["macro", idx, rec.t_start, rec.h, rec.eta_max, rec.rejections,
                   rec.newton_iterations[0], rec.newton_iterations[1], m]
            idx += 1
            for mic in rec.micro:
                yield ["micro", idx, mic.t_start, mic.h, mic.eta_max, mic.rejections,
                       mic.newton_iterations[0], mic.newton_iterations[1], len(mic.active)]
                idx += 1

    _write_csv(out_dir / "trace.csv",
               ["kind", "step", "t_start", "h", "eta_max", "rejections",
                "newton_stage1", "newton_stage2", "n_active"],
               trace_rows())
    outputs.append("trace.csv")

    all_components = " ".join(str(i) for i in range(m))

    def spacetime_rows():
        idx = 0
        for rec in trace.records:
            yield [idx, rec.t_start, rec.t_end, all_components]
            idx += 1
            for mic in rec.micro:
                yield [idx, mic.t_start, mic.t_start + mic.h,
                       " ".join(str(i) for i in mic.active)]
                idx += 1

    _write_csv(out_dir / "spacetime.csv",
               ["step", "t_start", "t_end", "active"],
               spacetime_rows())
    outputs.append("spacetime.csv")

    if preset.dx is not None and preset.flux_derivative is not None:
        samples = courant_numbers(trace, preset)
        _write_csv(out_dir / "courant.csv",
                   ["kind", "t_start", "h", "courant"],
                   ([s.kind, s.t_start, s.h, s.value] for s in samples))
        outputs.append("courant.csv")

    summary = {
        "command_line": list(argv),
        "config": _config_snapshot(preset, mode),
        "determinism": "identical invocations reproduce all CSV artifacts bitwise; "
                       "wall_time_s is a measurement and may vary",
        "outputs": outputs + ["summary.json"],
        "metrics": {**trace.summary(), "wall_time_s": wall_time,
                    "t_final": traj.t_final},
    }
    with (out_dir / "summary.json").open("w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("summary.json")
    return outputs


def cmd_run(args, argv: Sequence[str]) -> int:
    try:
        preset = _build_preset(args)
    except (ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    driver = integrate if args.mode == "multi" else integrate_single_rate
    t_start = time.perf_counter()
    try:
        traj, trace = driver(preset.problem, preset.t0, preset.t_end, preset.y0,
                             preset.config, keep_dense=False)
    except ToolkitError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    wall = time.perf_counter() - t_start
    _write_run_artifacts(Path(args.out_dir), preset, args.mode, traj, trace, wall, argv)
    print(f"wrote artifacts to {args.out_dir} "
          f"(workload {trace.workload()}, {trace.accepted_macro} macro / "
          f"{trace.accepted_micro} micro steps)")
    return EXIT_OK


def cmd_stability(args, argv: Sequence[str]) -> int:
    try:
        if args.matrix_file:
            a = np.loadtxt(args.matrix_file, delimiter=",", ndmin=2)
            if args.active is None:
                raise ValueError("--active is required with --matrix-file")
            idx = [int(s) for s in args.active.split(",") if s.strip()]
            partition = ActivePartition(a.shape[0], idx)
            name = Path(args.matrix_file).stem
        else:
            if args.system is None:
                raise ValueError("either --system or --matrix-file is required")
            a, partition = model_system(args.system)
            if args.active is not None:
                idx = [int(s) for s in args.active.split(",") if s.strip()]
                partition = ActivePartition(a.shape[0], idx)
            name = args.system
        kinds = ("linear", "hermite") if args.kind == "both" else (args.kind,)
        grid = default_rescaled_grid(args.points, args.smin, args.smax)
    except (ValueError, OSError, ToolkitError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report = norm_sweep(a, partition, kinds=kinds, rescaled_grid=grid, system_name=name)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "amplification.csv",
               report.COLUMNS,
               ([row[c] for c in report.COLUMNS] for row in report.rows))
    meta = {
        "system": name,
        "dimension": int(a.shape[0]),
        "active_components": [int(i) for i in partition.indices],
        "max_abs_eigenvalue": report.max_abs_eigenvalue,
        "kinds": list(kinds),
        "grid_points": len(grid),
        "rescaled_range": [float(grid[0]), float(grid[-1])],
    }
    with (out_dir / "amplification_meta.json").open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_dir / 'amplification.csv'} "
          f"({len(report.rows)} rows, system {name}, active {partition.indices.tolist()})")
    return EXIT_OK


def cmd_compare(args, argv: Sequence[str]) -> int:
    try:
        tols = [float(s) for s in args.tols.split(",") if s.strip()]
        if not tols:
            raise ValueError("tolerance list is empty")
        preset0 = _build_preset(args)
    except (ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    ref = preset0.reference_states([preset0.t_end])[preset0.t_end]
    rows = []
    for tol in tols:
        for mode in ("single", "multi"):
            cfg = preset0.config
            scale = tol / cfg.tolerances.tau_a
            tolerances = ToleranceSpec(cfg.tolerances.tau_r * scale, tol)
            run_cfg = replace(cfg, tolerances=tolerances)
            driver = integrate if mode == "multi" else integrate_single_rate
            t_start = time.perf_counter()
            try:
                traj, trace = driver(preset0.problem, preset0.t0, preset0.t_end,
                                     preset0.y0, run_cfg, keep_dense=False)
            except ToolkitError as exc:
                print(f"integration failed at tol {tol} mode {mode}: {exc}", file=sys.stderr)
                return EXIT_INTEGRATION
            wall = time.perf_counter() - t_start
            err = float(np.max(np.abs(traj.states[-1] - ref)))
            rows.append([tol, mode, err, trace.workload(), trace.scalar_evals,
                         trace.accepted_macro, trace.accepted_micro,
                         trace.accepted_macro + trace.accepted_micro, wall])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "compare.csv",
               ["tolerance", "mode", "error_vs_reference", "workload", "scalar_evals",
                "macro_steps", "micro_steps", "total_steps", "wall_time_s"],
               rows)
    print(f"wrote {out_dir / 'compare.csv'} ({len(rows)} rows)")
    return EXIT_OK


def _apply_config_file(argv: List[str]) -> List[str]:
    """Expand ``--config FILE`` into flat key=value flags (command line wins)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    try:
        path = argv[i + 1]
    except IndexError:
        return argv  # argparse will report the missing value
    extra: List[str] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        extra.extend([f"--{key.strip().replace('_', '-')}", value.strip()])
    return argv[:i] + extra + argv[i + 2:]


def _add_preset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", required=True, choices=PRESETS)
    p.add_argument("--tol-rel", type=float, default=None)
    p.add_argument("--tol-abs", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--h0", type=float, default=None)
    p.add_argument("--interp", choices=("linear", "hermite"), default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--cells", type=int, default=None, help="spatial cells for PDE presets")
    p.add_argument("--m", type=int, default=None, help="chain length for the inverter preset")
    p.add_argument("--ul", type=float, default=None, help="left state (burgers)")
    p.add_argument("--ur", type=float, default=None, help="right state (burgers)")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--config", default=None, help="flat key=value file of flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrtrbdf2",
        description="Multirate TR-BDF2 integration: benchmark runs, stability sweeps, comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one benchmark preset")
    _add_preset_flags(p_run)
    p_run.add_argument("--mode", choices=("single", "multi"), default="multi")

    p_st = sub.add_parser("stability", help="amplification-matrix norm sweep")
    p_st.add_argument("--system", choices=MODEL_SYSTEMS, default=None)
    p_st.add_argument("--matrix-file", default=None, help="CSV file with a square matrix")
    p_st.add_argument("--active", default=None, help="comma-separated active indices")
    p_st.add_argument("--kind", choices=("linear", "hermite", "both"), default="both")
    p_st.add_argument("--points", type=int, default=60)
    p_st.add_argument("--smin", type=float, default=1e-3)
    p_st.add_argument("--smax", type=float, default=100.0)
    p_st.add_argument("--out-dir", default="out")
    p_st.add_argument("--config", default=None)

    p_cmp = sub.add_parser("compare", help="single vs multirate over a tolerance list")
    _add_preset_flags(p_cmp)
    p_cmp.add_argument("--tols", required=True, help="comma-separated absolute tolerances")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    raw = list(sys.argv[1:] if argv is None else argv)
    try:
        expanded = _apply_config_file(raw)
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser = build_parser()
    try:
        args = parser.parse_args(expanded)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.command == "run":
        return cmd_run(args, raw)
    if args.command == "stability":
        return cmd_stability(args, raw)
    return cmd_compare(args, raw)


if __name__ == "__main__":
    sys.exit(main())
