"""Command-line entry point: ``asym-sim <subcommand> [options]``.

Exit status: 0 success, 1 invalid input, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import backend_name, set_threads
from .config import ConfigError, apply_overrides, load_config
from .model import ContractError

log = logging.getLogger("asym_sim")

FPA_RHOS = (0.0, 0.001, 0.01, 0.1, 0.3, 0.4, 0.5, 0.8, 1.0)


class UsageError(ContractError):
    pass


def _common(p: argparse.ArgumentParser, config_default: str = "default") -> None:
    p.add_argument("--config", default=config_default, help="JSON config path or bundled name")
    p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--runs", type=int, help="realizations (overrides run.runs)")
    p.add_argument("--iters", type=int, help="steps per run (overrides run.n_iter)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                   help="dotted-path override, repeatable (e.g. kernels.rho=0.3)")
    p.add_argument("--threads", type=int, help="worker cap (default: $ASYM_SIM_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asym-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one realization: trajectory and final histogram")
    _common(p)
    p.add_argument("--bins", type=int, default=20, help="histogram bins per axis")

    p = sub.add_parser("ensemble", help="independent realizations with tail averages and 95%% CI")
    _common(p)

    p = sub.add_parser("fluid", help="joint fluid fixed point (opinions and popularities)")
    _common(p, "appendixD")
    p.add_argument("--axis", type=int, default=0)

    p = sub.add_parser("fpa-scan", help="fluid fixed points and map stability over rho")
    _common(p, "appendixD")
    p.add_argument("--rhos", help="comma-separated rho values (default: reference table)")
    p.add_argument("--printed-form", action="store_true", help="use pi1 in both visibility exponents")
    p.add_argument("--grid", type=int, default=1000)

    p = sub.add_parser("fp-density", help="stationary Fokker-Planck density at the fluid popularities")
    _common(p, "appendixD")
    p.add_argument("--nodes", type=int, default=2001)
    p.add_argument("--lambda", dest="lam", type=float, help="post rate (default run.lambda)")
    p.add_argument("--scaling", choices=("jump-moment", "printed"), default="jump-moment")

    p = sub.add_parser("sweep", help="ensemble per value of one parameter")
    _common(p)
    p.add_argument("--param", required=True, help="e.g. influencers.0.post_freq, weights.stubbornness")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--tail", type=int, help="tail samples per run")

    p = sub.add_parser("case-study", help="weekly popularity series through the crisis window")
    _common(p, "case_study")

    p = sub.add_parser("sensitivity", help="case study for each of the 24 sensitivity scenarios")
    _common(p, "case_study")

    p = sub.add_parser("analyze", help="post-stream statistics from CSV files")
    p.add_argument("--posts", required=True)
    p.add_argument("--followers")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--out", default="out")

    p = sub.add_parser("plot-data", help="reshape result CSVs into long-form tables")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--id-column", help="column kept as the x variable (default: first column)")
    p.add_argument("--out", default="out")
    return parser


def resolve_config(args):
    cfg = load_config(args.config)
    ov = list(args.overrides)
    if args.seed is not None:
        ov.append(f"run.seed={args.seed}")
    if args.runs is not None:
        ov.append(f"run.runs={args.runs}")
    if args.iters is not None:
        ov.append(f"run.n_iter={args.iters}")
    return apply_overrides(cfg, ov) if ov else cfg


def _manifest(args, out: Path, cfg=None, outputs=(), extra=None) -> None:
    from .engine import write_manifest

    payload = {
        "command": args.command,
        "argv": sys.argv[1:],
        "version": __version__,
        "backend": backend_name(),
        "outputs": sorted(outputs),
    }
    if cfg is not None:
        payload["seed"] = cfg.run.seed
        payload["config"] = cfg.to_dict()
    if extra:
        payload.update(extra)
    write_manifest(out / "manifest.json", payload)


def cmd_simulate(args, cfg, out):
    from .engine import opinion_histogram, run, write_histogram_csv

    traj = run(cfg)
    traj.write_csv(out / "trajectory.csv")
    counts, _ = opinion_histogram(traj.final, args.bins, cfg.space.lower, cfg.space.upper)
    write_histogram_csv(out / "histogram.csv", counts)
    print(f"final pi: {np.array2string(traj.pi[-1], precision=4)}")
    return ["trajectory.csv", "histogram.csv"], None


def cmd_ensemble(args, cfg, out):
    from .engine import ensemble

    res = ensemble(cfg, threads=args.threads)
    with open(out / "ensemble.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "index", "mean", "ci_half_width"])
        for i, (m, c) in enumerate(zip(res.pi_mean, res.pi_ci)):
            w.writerow(["pi", i, repr(float(m)), repr(float(c))])
        for j, (m, c) in enumerate(zip(res.opinion_mean, res.opinion_ci)):
            w.writerow(["meanx", j, repr(float(m)), repr(float(c))])
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "seed", "realization"] + [f"pi_{i}" for i in range(res.pi_mean.size)]
                   + [f"meanx_{j}" for j in range(res.opinion_mean.size)])
        for k, ((seed, real), pi, mx) in enumerate(zip(res.streams, res.per_run_pi, res.per_run_opinion)):
            w.writerow([k, seed, real] + [repr(float(v)) for v in pi] + [repr(float(v)) for v in mx])
    print(f"pi: {np.array2string(res.pi_mean, precision=4)} +/- {np.array2string(res.pi_ci, precision=4)}")
    return ["ensemble.csv", "runs.csv"], None


def cmd_fluid(args, cfg, out):
    from .fluid import ConvergenceError, FluidScenario, joint_fixed_point

    scen = FluidScenario.from_config(cfg, axis=args.axis)
    sol = joint_fixed_point(scen)
    with open(out / "fluid.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "weight", "xbar"])
        for z, h, x in zip(scen.z_nodes, scen.z_weights, sol.xbar):
            w.writerow([repr(float(z)), repr(float(h)), repr(float(x))])
    with open(out / "fluid_pi.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["influencer", "pi"])
        for i, p in enumerate(sol.pi):
            w.writerow([i, repr(float(p))])
    extra = {"converged": sol.converged, "residual": sol.residual, "iterations": sol.iterations}
    if not sol.converged:
        _manifest(args, out, cfg, ["fluid.csv", "fluid_pi.csv"], extra)
        raise ConvergenceError(f"joint fixed point did not converge (residual {sol.residual:.3g})")
    print(f"pi: {np.array2string(sol.pi, precision=4)}")
    return ["fluid.csv", "fluid_pi.csv"], extra


def cmd_fpa_scan(args, cfg, out):
    from .fluid import FluidScenario, fpa_scan, write_fpa_csv

    rhos = [float(v) for v in args.rhos.split(",")] if args.rhos else (
        [cfg.kernels.rho] if any(o.split("=")[0].strip() in ("kernels.rho", "kernels.visibility.rho")
                                 for o in args.overrides) else list(FPA_RHOS))
    scen = FluidScenario.from_config(cfg)
    rows = fpa_scan(scen, rhos, grid_size=args.grid, printed_form=args.printed_form)
    write_fpa_csv(out / "fpa.csv", rows)
    for r in rows:
        print(f"rho={r.rho:g}  pi1={r.pi1:.4f}  stable={[round(p, 4) for p in r.scan.stable_points]}")
    bad = [r.rho for r in rows if not r.converged]
    return ["fpa.csv"], {"nonconverged_rhos": bad}


def cmd_fp_density(args, cfg, out):
    from .fluid import ConvergenceError, FluidScenario, joint_fixed_point
    from .fokker_planck import default_grid, stationary_density, write_density_csv

    scen = FluidScenario.from_config(cfg)
    sol = joint_fixed_point(scen)
    if not sol.converged:
        raise ConvergenceError("fluid popularities did not converge; density not computed")
    lam = args.lam if args.lam is not None else cfg.run.lam
    dens = stationary_density(scen.z_nodes, sol.pi, scen, default_grid(scen, args.nodes), lam, args.scaling)
    write_density_csv(out / "density.csv", dens)
    return ["density.csv"], {"pi": sol.pi.tolist(), "lambda": lam, "scaling": args.scaling}


def cmd_sweep(args, cfg, out):
    from .scenarios import SweepSpec, run_sweep

    values = tuple(float(v) for v in args.values.split(","))
    spec = SweepSpec(args.param, values, runs=cfg.run.runs, tail_samples=args.tail)
    res = run_sweep(cfg, spec, threads=args.threads)
    res.write_csv(out / "sweep.csv")
    for v, pm, pc, _ in res.summary():
        print(f"{args.param}={v:g}  pi={np.array2string(pm, precision=4)} +/- {np.array2string(pc, precision=4)}")
    return ["sweep.csv"], None


def cmd_case_study(args, cfg, out):
    from .scenarios import run_case_study

    res = run_case_study(cfg, threads=args.threads)
    res.write_csv(out / "case_study.csv")
    print("week  pi   " + " ".join(f"{m:.4f}" for m in res.mean))
    return ["case_study.csv"], {"rise_flag_runs": int(res.rise_flag.sum())}


def cmd_sensitivity(args, cfg, out):
    from .scenarios import SENSITIVITY_TABLE, run_sensitivity, write_sensitivity_csv

    results = run_sensitivity(cfg, threads=args.threads)
    write_sensitivity_csv(out / "sensitivity.csv", results)
    flags = [bool(r.mean[r.end_week] > r.mean[r.start_week]) for r in results]
    print(f"rise-during-window flag in {sum(flags)}/{len(SENSITIVITY_TABLE)} scenarios")
    return ["sensitivity.csv"], {"rise_flags": flags}


def cmd_analyze(args, out):
    from .analysis import analyze_files

    res = analyze_files(args.posts, args.followers, args.max_lag, out)
    for inf, ref, c, tie, n in res["consistency"]:
        print(f"{inf}: reference={ref} consistency={c:.4f}{' (tie)' if tie else ''} posts={n}")
    files = ["consistency.csv", "acov.csv"] + (["pearson.csv"] if args.followers else [])
    return files


def cmd_plot_data(args, out):
    rows = []
    for path in args.inputs:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            cols = reader.fieldnames or []
            if not cols:
                continue
            idc = args.id_column or cols[0]
            if idc not in cols:
                raise UsageError(f"{path}: no column {idc!r}")
            for rec in reader:
                for c in cols:
                    if c != idc:
                        rows.append([Path(path).stem, idc, rec[idc], c, rec[c]])
    with open(out / "plot_data.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "x_name", "x", "series", "value"])
        w.writerows(rows)
    return ["plot_data.csv"]


SIM_COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "fluid": cmd_fluid,
    "fpa-scan": cmd_fpa_scan,
    "fp-density": cmd_fp_density,
    "sweep": cmd_sweep,
    "case-study": cmd_case_study,
    "sensitivity": cmd_sensitivity,
}


def main(argv=None) -> int:
    from .fluid import ConvergenceError
    from .fokker_planck import DegenerateDiffusion

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for non-convergence here
        return 1 if exc.code == 2 else int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command in SIM_COMMANDS:
            threads = args.threads
            if threads is None and os.environ.get("ASYM_SIM_THREADS"):
                threads = int(os.environ["ASYM_SIM_THREADS"])
            args.threads = threads
            set_threads(threads)
            cfg = resolve_config(args)
            files, extra = SIM_COMMANDS[args.command](args, cfg, out)
            _manifest(args, out, cfg, files, extra)
        elif args.command == "analyze":
            _manifest(args, out, None, cmd_analyze(args, out), {"posts": args.posts, "followers": args.followers})
        else:
            _manifest(args, out, None, cmd_plot_data(args, out), {"inputs": args.inputs})
    except (ConvergenceError, DegenerateDiffusion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ContractError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
