"""Command-line entry point.

    hr <command> --config <path> [--out <dir>] [--seed <u64>]
                 [--override section.key=value ...] [--no-plots]

Commands: simulate, constants, verify, steady, convergence, sweep. Every
command archives the resolved config next to its outputs. Exit status is 0
only when every check the command performs has passed; config and usage
problems exit with status 2.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import analysis, convergence as conv, plots
from .config import ConfigError, RunSpec, initial_state, parse_config, read_sweep_grid
from .grid import Field, write_field
from .integrate import SolverError, run


def _build_parser():
    ap = argparse.ArgumentParser(prog="hr", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "integrate and emit monitor/probe CSVs and snapshots"),
        ("constants", "evaluate the explicit dissipativity constants"),
        ("verify", "simulate, then check the envelope and absorbing ball"),
        ("steady", "homogeneous steady states with stability"),
        ("convergence", "temporal and spatial order-of-accuracy ladders"),
        ("sweep", "run the [sweep] override grid, one subdirectory per cell"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="path to the run config")
        sp.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
        sp.add_argument("--seed", type=int, default=None, help="override the recorded RNG seed")
        sp.add_argument("--override", action="append", default=[], metavar="SECT.KEY=VAL")
        sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        if name == "verify":
            sp.add_argument("--slack", type=float, default=0.05,
                            help="relative slack on the envelope bound")
    return ap


def _load_spec(args) -> tuple[RunSpec, str]:
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    spec = parse_config(text, overrides)
    return spec, text


def _prepare_out(spec: RunSpec, args) -> str:
    out = args.out if args.out is not None else spec.out_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "run.cfg"), "w", encoding="utf-8") as fh:
        fh.write(spec.to_text())
    return out


def _simulate_into(spec: RunSpec, out: str, make_plots: bool) -> int:
    g0 = initial_state(spec)
    traj = run(spec.domain, spec.params, spec.solver, g0)
    traj.write_monitor_csv(os.path.join(out, "monitor.csv"))
    if traj.probe is not None:
        traj.write_probe_csv(os.path.join(out, "probe.csv"))
    if traj.snapshot_values is not None:
        snapdir = os.path.join(out, "snapshots")
        os.makedirs(snapdir, exist_ok=True)
        for i, t in enumerate(traj.snapshot_times):
            for k, comp in enumerate("uvw"):
                f = Field(spec.domain, traj.snapshot_values[i, k].copy())
                write_field(os.path.join(snapdir, f"snap{i:06d}_{comp}.hrfield"), f, comp, t)
    if make_plots:
        plots.render_monitor(traj, os.path.join(out, "monitor.png"))
        if traj.probe is not None:
            plots.render_probe(traj, os.path.join(out, "probe.png"))
    if traj.blowup is not None:
        comp, t = traj.blowup
        print(f"FAIL: component {comp} blew up at t={t:g}; partial outputs in {out}",
              file=sys.stderr)
        return 1
    return 0


def _cmd_simulate(args) -> int:
    spec, _ = _load_spec(args)
    out = _prepare_out(spec, args)
    status = _simulate_into(spec, out, not args.no_plots)
    if status == 0:
        print(f"simulate: wrote {out}/monitor.csv")
    return status


def _cmd_constants(args) -> int:
    spec, _ = _load_spec(args)
    out = _prepare_out(spec, args)
    rep = analysis.compute_constants(spec.params, spec.domain.volume)
    text = rep.to_text()
    with open(os.path.join(out, "constants.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def _cmd_verify(args) -> int:
    spec, _ = _load_spec(args)
    out = _prepare_out(spec, args)
    rep = analysis.compute_constants(spec.params, spec.domain.volume)
    g0 = initial_state(spec)
    traj = run(spec.domain, spec.params, spec.solver, g0)
    traj.write_monitor_csv(os.path.join(out, "monitor.csv"))
    if traj.blowup is not None:
        comp, t = traj.blowup
        print(f"FAIL: component {comp} blew up at t={t:g}", file=sys.stderr)
        return 1
    report = analysis.verify_dissipativity(rep, traj, slack=args.slack)
    report.to_csv(os.path.join(out, "verification.csv"))
    if not args.no_plots:
        plots.render_verification(report, os.path.join(out, "verification.png"))
    if report.passed:
        print(f"PASS: weighted norm within (1+{args.slack:g}) envelope at all "
              f"{len(report.times)} samples; ball entry by t={report.absorbing_t:g}")
        return 0
    where = report.first_violation
    print(f"FAIL: envelope exceeded at t={where}" if where is not None
          else "FAIL: absorbing-ball bound violated", file=sys.stderr)
    return 1


def _cmd_steady(args) -> int:
    spec, _ = _load_spec(args)
    out = _prepare_out(spec, args)
    eqs = analysis.homogeneous_equilibria(spec.params)
    path = os.path.join(out, "equilibria.csv")
    with open(path, "w") as fh:
        fh.write("u,v,w,re1,im1,re2,im2,re3,im3,stability,residual\n")
        for e in eqs:
            ev = e.eigenvalues
            fh.write(",".join(repr(float(x)) for x in (
                e.u, e.v, e.w, ev[0].real, ev[0].imag, ev[1].real, ev[1].imag,
                ev[2].real, ev[2].imag)) + f",{e.stability},{e.residual!r}\n")
    for e in eqs:
        print(f"u*={e.u:.6f} v*={e.v:.6f} w*={e.w:.6f} [{e.stability}] "
              f"residual={e.residual:.2e}")
    print(f"steady: wrote {path}")
    return 0


def _cmd_convergence(args) -> int:
    spec, _ = _load_spec(args)
    out = _prepare_out(spec, args)
    results = conv.order_study()
    rows = []
    ok = True
    with open(os.path.join(out, "convergence.csv"), "w") as fh:
        fh.write("ladder,step,error\n")
        for name, (slope, errors, in_band) in results.items():
            ok = ok and in_band
            for h, e in errors:
                fh.write(f"{name},{h!r},{e!r}\n")
            lo, hi = conv.ORDER_BANDS[name]
            verdict = "PASS" if in_band else "FAIL"
            print(f"{verdict}: {name} slope {slope:.3f} (band [{lo}, {hi}])")
            rows.append((name, [h for h, _ in errors], [e for _, e in errors], slope))
    if not args.no_plots:
        plots.render_convergence(rows, os.path.join(out, "convergence.png"))
    return 0 if ok else 1


def _sweep_cell(payload) -> tuple[str, int]:
    text, overrides, cell_dir, make_plots = payload
    spec = parse_config(text, overrides)
    os.makedirs(cell_dir, exist_ok=True)
    with open(os.path.join(cell_dir, "run.cfg"), "w", encoding="utf-8") as fh:
        fh.write(spec.to_text())
    status = _simulate_into(spec, cell_dir, make_plots)
    return cell_dir, status


def _cmd_sweep(args) -> int:
    spec, text = _load_spec(args)
    out = _prepare_out(spec, args)
    grid = read_sweep_grid(text)
    if not grid:
        print("sweep: config has no [sweep] section", file=sys.stderr)
        return 2
    keys = [k for k, _ in grid]
    cells = list(itertools.product(*(vals for _, vals in grid)))
    payloads = []
    base_overrides = list(args.override)
    if args.seed is not None:
        base_overrides.append(f"run.seed={args.seed}")
    for values in cells:
        overrides = base_overrides + [f"{k}={v}" for k, v in zip(keys, values)]
        name = "__".join(f"{k.replace('.', '_')}={v}" for k, v in zip(keys, values))
        payloads.append((text, overrides, os.path.join(out, name), not args.no_plots))
    status = 0
    workers = min(len(payloads), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for cell_dir, cell_status in pool.map(_sweep_cell, payloads):
            print(f"sweep cell {os.path.basename(cell_dir)}: "
                  f"{'ok' if cell_status == 0 else 'FAILED'}")
            status = max(status, cell_status)
    return status


_COMMANDS = {
    "simulate": _cmd_simulate,
    "constants": _cmd_constants,
    "verify": _cmd_verify,
    "steady": _cmd_steady,
    "convergence": _cmd_convergence,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"hr {args.command}: {e}", file=sys.stderr)
        return 2
    except (SolverError, ValueError) as e:
        print(f"hr {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
