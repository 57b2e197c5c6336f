"""Command-line surface: run scenarios, certify stability, plot logs.

Subcommands: run, stability, plot, validate, print-phi.  Exit codes:
0 success, 2 configuration error, 3 runtime failure.  The output directory
defaults to the working directory and can be overridden with --out or the
FORMSCALE_OUT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, RuntimeFailure
from .plots import plot_error_norms, plot_trajectories
from .scenario import load_scenario
from .sim import TrajectoryLog, min_pair_distance, run_scenario, settling_times
from .stability import GrowthConstants, analyze_stability

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("FORMSCALE_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stamp() -> str:
    return time.strftime("%Y%m%d-%H%M%S")


def _apply_overrides(scenario, args):
    fields = {}
    if args.dt is not None:
        fields["dt"] = args.dt
    if args.horizon is not None:
        fields["horizon"] = args.horizon
    if args.potential is not None:
        fields["potential_enabled"] = args.potential == "on"
    return scenario.with_overrides(**fields) if fields else scenario


def _write_run_report(path, log, scenario):
    lines = [f"scenario: {log.name}", f"samples: {log.n_samples}"]
    if log.n_samples:
        report = settling_times(log, scenario.sim.settling_tolerance)
        lines.append(f"settling tolerance: {report.tolerance:g} of initial error")
        for name, t in report.times.items():
            shown = "not settled" if t is None else f"{t:.4g} s"
            lines.append(f"  {name}: {shown} (threshold {report.thresholds[name]:.4g})")
        if report.ratio_inter_intra is not None:
            lines.append(f"ratio inter/intra: {report.ratio_inter_intra:.3g}")
        if report.ratio_centroid_inter is not None:
            lines.append(f"ratio centroid/inter: {report.ratio_centroid_inter:.3g}")
        md = min_pair_distance(log)
        lines.append(
            f"min pairwise distance: {md.distance:.4g} m (robots {md.pair[0]} and "
            f"{md.pair[1]} at t = {md.time:.4g} s)"
        )
        lines.append(f"safety distance: {scenario.potential.safe_distance:g} m")
        lines.append(f"potential enabled: {log.potential_enabled}")
        lines.append(f"peak wheel torque: {log.peak_torque:.6g} N m")
        if log.n_clipped:
            lines.append(f"saturated torque samples: {log.n_clipped}")
        final = {
            name: float(np.linalg.norm(log.z_err[-1, sl]))
            for name, sl in zip(
                log.layout.level_names(), log.layout.level_slices()
            )
        }
        lines.append(
            "final error norms: "
            + ", ".join(f"{k}={v:.4g}" for k, v in final.items())
        )
    else:
        lines.append("empty log (zero horizon); headers written, nothing to analyze")
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    return text


def cmd_run(args) -> int:
    scenario = _apply_overrides(load_scenario(args.config), args)
    out = _out_dir(args)
    log = run_scenario(scenario)
    stem = f"{scenario.name}_{_stamp()}"
    csv_path = out / f"{stem}.csv"
    log.to_csv(csv_path)
    report_path = out / f"{stem}_report.txt"
    text = _write_run_report(report_path, log, scenario)
    plot_trajectories(log, out / f"{stem}_trajectory.svg")
    plot_error_norms(log, out / f"{stem}_errors.svg")
    sys.stdout.write(text)
    sys.stdout.write(f"log: {csv_path}\n")
    return EXIT_OK


def cmd_stability(args) -> int:
    scenario = load_scenario(args.config)
    growth = None
    if args.growth:
        parts = [float(v) for v in args.growth.split(",")]
        if len(parts) != 5:
            raise ConfigError(
                "--growth takes five comma-separated values: alpha1,alpha2,beta1,beta2,gamma"
            )
        growth = GrowthConstants(*parts)
    report = analyze_stability(
        scenario.controller,
        scenario.layout,
        d1=args.d1,
        d2=args.d2,
        growth_constants=growth,
    )
    out = _out_dir(args)
    lines = [f"scenario: {scenario.name}"]
    for name, verdict in report.hurwitz.items():
        lines.append(
            f"boundary layer {name}: Hurwitz={verdict.is_hurwitz} "
            f"(spectral abscissa {verdict.spectral_abscissa:.6g})"
        )
    for name, cert in report.certificates.items():
        lines.append(f"Lyapunov {name}: residual {cert.residual:.3e}")
    grid_rows = []
    for label, rep in (("eps1", report.eps1), ("eps2", report.eps2)):
        if rep is None:
            continue
        capped = " (capped: decoupled)" if rep.capped else ""
        lines.append(f"{label} bound: {rep.bound:.6g}{capped} at d={rep.d_weight:g}")
        lines.append(
            f"  verified positive definite at {rep.verification_eps:.6g} "
            f"(min eigenvalue {rep.min_eigenvalue:.3e})"
        )
        for eps, min_eig, ok in rep.grid:
            grid_rows.append((label, eps, min_eig, ok))
    if report.eps2_evaluated_at_eps1 is not None:
        lines.append(f"eps2 bound evaluated at eps1 = {report.eps2_evaluated_at_eps1:.6g}")
    e1, e2 = report.configured_epsilons[0], report.configured_epsilons[1]
    lines.append(
        f"configured eps1 = {e1:g}: "
        + ("within bound" if report.eps1_within_bound else "outside analytic bound")
    )
    if report.eps2_within_bound is not None:
        lines.append(
            f"configured eps2 = {e2:g}: "
            + ("within bound" if report.eps2_within_bound else "outside analytic bound")
        )
    if report.growth is not None:
        g = report.growth
        lines.append(
            f"growth constants: eps* = {g.eps_star:.6g} at d* = {g.d_star:.6g} "
            f"(grid check: {g.grid_eps:.6g} at d = {g.grid_d:.6g})"
        )
    text = "\n".join(lines) + "\n"
    stem = f"{scenario.name}_stability_{_stamp()}"
    (out / f"{stem}.txt").write_text(text)
    with open(out / f"{stem}_grid.csv", "w") as fh:
        fh.write("parameter,eps,min_eigenvalue,positive_definite\n")
        for label, eps, min_eig, ok in grid_rows:
            fh.write(f"{label},{eps:.10g},{min_eig:.10g},{int(ok)}\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    log = TrajectoryLog.from_csv(args.log)
    out = _out_dir(args)
    stem = Path(args.log).stem
    plot_trajectories(log, out / f"{stem}_trajectory.svg")
    plot_error_norms(log, out / f"{stem}_errors.svg")
    sys.stdout.write(f"wrote {stem}_trajectory.svg and {stem}_errors.svg in {out}\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.config)
    sys.stdout.write(
        f"OK: {scenario.name}: {scenario.layout.n_robots} robots in "
        f"{scenario.layout.m} group(s) {list(scenario.layout.sizes)}, "
        f"mode {scenario.controller.mode}, dt {scenario.sim.dt:g}, "
        f"horizon {scenario.sim.horizon:g} s\n"
    )
    return EXIT_OK


def cmd_print_phi(args) -> int:
    scenario = load_scenario(args.config)
    cbt = scenario.cbt
    names = []
    for name, sl in cbt.row_blocks.items():
        for k in range(sl.start, sl.stop):
            names.append(f"{name}[{k - sl.start}]")
    sys.stdout.write("row," + ",".join(f"c{j}" for j in range(cbt.matrix.shape[1])) + "\n")
    for label, row in zip(names, cbt.matrix):
        sys.stdout.write(label + "," + ",".join(f"{v:.10g}" for v in row) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formscale",
        description="multi-time-scale formation control simulator and analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write logs and plots")
    run_p.add_argument("config", help="scenario JSON path or bundled scenario name")
    run_p.add_argument("--potential", choices=("on", "off"), default=None)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--dt", type=float, default=None)
    run_p.add_argument("--horizon", type=float, default=None)
    run_p.set_defaults(func=cmd_run)

    st_p = sub.add_parser("stability", help="emit stability certificates and bounds")
    st_p.add_argument("config")
    st_p.add_argument("--growth", default=None,
                      help="alpha1,alpha2,beta1,beta2,gamma growth constants")
    st_p.add_argument("--d1", type=float, default=0.5)
    st_p.add_argument("--d2", type=float, default=0.5)
    st_p.add_argument("--out", default=None)
    st_p.set_defaults(func=cmd_stability)

    plot_p = sub.add_parser("plot", help="render plots from a CSV log")
    plot_p.add_argument("log")
    plot_p.add_argument("--out", default=None)
    plot_p.set_defaults(func=cmd_plot)

    val_p = sub.add_parser("validate", help="validate a scenario file")
    val_p.add_argument("config")
    val_p.set_defaults(func=cmd_validate)

    phi_p = sub.add_parser("print-phi", help="print the transformation rows as CSV")
    phi_p.add_argument("config")
    phi_p.set_defaults(func=cmd_print_phi)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except RuntimeFailure as exc:
        sys.stderr.write(f"runtime failure: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
