"""Command-line entry points.

Subcommands: simulate, meanfield, lln, clt, qv-check, noise-check,
spde-compare.  Every command writes CSV artifacts plus a manifest with
checksums and verdicts into --out-dir.  Exit codes: 0 success, 2 built-in
acceptance verdict failed, 1 error, 64 usage.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config_io import ConfigError, config_hash, config_to_dict, canonical_json, parse_config
from .experiments import (clt_driver, lln_driver, noise_driver, qv_driver,
                          spde_compare_driver)
from .fluctuations import STATE_NAMES
from .io_utils import ExperimentManifest, write_csv
from .pde import Grid1D, default_domain, solve_pde
from .rng import derive_stream
from .simulate import SimScheme, run
from .testfunctions import default_bank

COMMANDS = ("simulate", "meanfield", "lln", "clt", "qv-check", "noise-check",
            "spde-compare")


def _common(p):
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--T", type=float, default=2.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--mode", choices=("split_step", "thinning"), default="split_step")


def build_parser():
    top = argparse.ArgumentParser(prog="mfsir", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="run replications, export trajectories")
    _common(p)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--snapshots", type=int, default=5)

    p = sub.add_parser("meanfield", help="solve the d=1 limit PDE")
    _common(p)
    p.add_argument("--dt-pde", type=float, default=None)

    p = sub.add_parser("lln", help="law-of-large-numbers rate sweep")
    _common(p)
    p.add_argument("--Ns", default="100,400,1600,6400")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--nref", type=int, default=100_000)
    p.add_argument("--nproj", type=int, default=128)

    p = sub.add_parser("clt", help="fluctuation projections and martingales")
    _common(p)
    p.add_argument("--N", type=int, default=4000)
    p.add_argument("--reps", type=int, default=500)

    p = sub.add_parser("qv-check", help="Ito isometry / QV identity check")
    _common(p)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--reps", type=int, default=1000)

    p = sub.add_parser("noise-check", help="limit-noise covariance check")
    _common(p)
    p.add_argument("--paths", type=int, default=10_000)

    p = sub.add_parser("spde-compare", help="particle vs SPDE fluctuations")
    _common(p)
    p.add_argument("--N", type=int, default=4000)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--refine", type=int, default=8)
    p.add_argument("--nphi", type=int, default=5)
    return top


def _manifest(args, config) -> ExperimentManifest:
    man = ExperimentManifest(sys.argv[1:] if sys.argv[1:] else [args.command],
                             config_hash(config), args.seed, __version__)
    return man


def _write_fluct_csv(path, samples, bank, source=None, spde_rows=None,
                     checkpoints=None):
    header = ["rep", "state", "phi_id", "t", "eta", "martingale", "qv_formula"]
    if source is not None:
        header.append("source")
    rows = []
    for s in samples:
        for ti, t in enumerate(s.times):
            for e in range(3):
                for b, phi in enumerate(bank):
                    row = [s.rep, STATE_NAMES[e], phi.name, float(t),
                           float(s.eta[ti, e, b]), float(s.martingale[ti, e, b]),
                           float(s.qv[ti, e, b])]
                    if source is not None:
                        row.append("particle")
                    rows.append(row)
    if spde_rows is not None:
        reps, n_t, _, n_b = spde_rows.shape
        for rep in range(reps):
            for ti in range(n_t):
                for e in range(3):
                    for b in range(n_b):
                        rows.append([rep, STATE_NAMES[e], bank[b].name,
                                     float(checkpoints[ti]),
                                     float(spde_rows[rep, ti, e, b]), "", "",
                                     "spde"])
    return write_csv(path, header, rows)


def cmd_simulate(args, config, out: Path, man: ExperimentManifest) -> int:
    times = tuple(np.linspace(0.0, args.T, args.snapshots + 1))
    scheme = SimScheme(args.dt, times, mode=args.mode)
    traj_rows = []
    event_rows = []
    for rep in range(args.reps):
        rng = derive_stream(args.seed, "simulate", rep)
        traj = run(config, scheme, args.N, rng, log_brownian=False)
        for snap in traj.snapshots:
            for i in range(snap.n):
                traj_rows.append([rep, snap.time, i,
                                  *snap.positions[i].tolist(), int(snap.states[i])])
        log = traj.log
        for t, i, ef, et in zip(log.jump_times, log.jump_individuals,
                                log.jump_from, log.jump_to):
            event_rows.append([rep, float(t), int(i), ef, et])
    xcols = [f"x_{k+1}" for k in range(config.d)]
    man.add_output(write_csv(out / "trajectory.csv",
                             ["rep", "t", "individual", *xcols, "state"], traj_rows))
    man.add_output(write_csv(out / "events.csv",
                             ["rep", "t", "individual", "from", "to"], event_rows))
    return 0


def cmd_meanfield(args, config, out: Path, man: ExperimentManifest) -> int:
    lo, hi = default_domain(config, args.T)
    grid = Grid1D(lo, hi, args.grid)
    smax = config.diffusion.bound
    vmax = config.drift.bound
    dt_pde = args.dt_pde
    if dt_pde is None:
        dt_pde = min(0.35 * grid.h**2 / smax**2 if smax > 0 else np.inf,
                     0.35 * grid.h / vmax if vmax > 0 else np.inf, args.T / 64)
    store = np.linspace(0.0, args.T, 101)
    traj = solve_pde(config, grid, args.T, dt_pde, store_times=store)
    rows = []
    for ti, t in enumerate(traj.times):
        dens = traj.masses[ti] / grid.h
        for c, x in enumerate(grid.centers):
            rows.append([float(t), float(x), float(dens[0, c]), float(dens[1, c]),
                         float(dens[2, c])])
    man.add_output(write_csv(out / "density.csv",
                             ["t", "cell_center", "rho_S", "rho_I", "rho_R"], rows))
    cache = out / f"density_{config_hash(config)[:16]}.npz"
    traj.save(cache)
    man.add_output(cache)
    man.add_parameters(grid=args.grid, dt_pde=dt_pde, T=args.T,
                       domain=[lo, hi], clipped_per_step=traj.clipped_per_step)
    return 0


def cmd_lln(args, config, out: Path, man: ExperimentManifest) -> int:
    ns = [int(v) for v in str(args.Ns).split(",") if v]
    table, fit, window, _ = lln_driver(config, ns, args.reps, args.T, args.dt,
                                       args.seed, workers=args.workers,
                                       grid_cells=args.grid, n_ref=args.nref,
                                       n_proj=args.nproj, mode=args.mode)
    man.add_output(write_csv(out / "rate.csv", ["N", "reps", "mean_w1", "se"],
                             [[r["N"], r["reps"], r["mean_w1"], r["se"]]
                              for r in table.rows()]))
    ok = window[0] <= fit.slope <= window[1]
    man.add_verdict("fit", fit.to_dict())
    man.add_verdict("slope_window", list(window))
    man.add_verdict("slope_ok", bool(ok))
    man.add_parameters(d=config.d, Ns=ns, reps=args.reps, T=args.T, dt=args.dt)
    print(f"lln: slope {fit.slope:+.4f} (se {fit.slope_se:.4f}) "
          f"window [{window[0]}, {window[1]}] -> {'ok' if ok else 'FAIL'}")
    return 0 if ok else 2


def cmd_clt(args, config, out: Path, man: ExperimentManifest) -> int:
    bank = default_bank()
    samples, screens, _ = clt_driver(config, args.N, args.reps, args.T, args.dt,
                                     args.seed, workers=args.workers,
                                     grid_cells=args.grid, bank=bank)
    man.add_output(_write_fluct_csv(out / "fluctuations.csv", samples, bank))
    for k, v in screens.items():
        man.add_verdict(k, v)
    man.add_parameters(N=args.N, reps=args.reps, T=args.T, dt=args.dt)
    return 0


def cmd_qv_check(args, config, out: Path, man: ExperimentManifest) -> int:
    rows, all_ok, _ = qv_driver(config, args.N, args.reps, args.T, args.dt,
                                args.seed, workers=args.workers,
                                grid_cells=args.grid)
    man.add_output(write_csv(
        out / "qv_check.csv",
        ["state", "phi_id", "mean_m2", "mean_realized_qv", "mean_formula_qv",
         "ratio", "ratio_plain", "checked", "ok"],
        [[r["state"], r["phi_id"], r["mean_m2"], r["mean_realized_qv"],
          r["mean_formula_qv"], r["ratio"], r["ratio_plain"], r["checked"],
          r["ok"]] for r in rows]))
    man.add_verdict("qv_identity_ok", bool(all_ok))
    man.add_parameters(N=args.N, reps=args.reps, T=args.T, dt=args.dt)
    print(f"qv-check: {'ok' if all_ok else 'FAIL'}")
    return 0 if all_ok else 2


def cmd_noise_check(args, config, out: Path, man: ExperimentManifest) -> int:
    rows, all_ok, _ = noise_driver(config, args.T, args.dt, args.seed,
                                   n_paths=args.paths, grid_cells=args.grid)
    man.add_output(write_csv(
        out / "noise_check.csv",
        ["kind", "phi1", "phi2", "t", "s", "mc_cov", "quad_cov", "error", "ok"],
        [[r["kind"], r["phi1"], r["phi2"], r["t"], r["s"], r["mc_cov"],
          r["quad_cov"], r["error"], r["ok"]] for r in rows]))
    man.add_verdict("noise_covariance_ok", bool(all_ok))
    man.add_parameters(paths=args.paths, T=args.T, dt=args.dt, grid=args.grid)
    print(f"noise-check: {'ok' if all_ok else 'FAIL'}")
    return 0 if all_ok else 2


def cmd_spde_compare(args, config, out: Path, man: ExperimentManifest) -> int:
    bank = default_bank()[: args.nphi]
    samples, spde_rows, checkpoints, bank, verdicts, all_ok = spde_compare_driver(
        config, args.N, args.reps, args.T, args.dt, args.seed,
        workers=args.workers, grid_cells=args.grid, refine=args.refine, bank=bank)
    man.add_output(_write_fluct_csv(out / "spde_compare.csv", samples, bank,
                                    source=True, spde_rows=spde_rows,
                                    checkpoints=checkpoints))
    man.add_output(write_csv(
        out / "spde_verdicts.csv",
        ["state", "phi_id", "ks_stat", "ks_p", "var_ratio", "ok"],
        [[v["state"], v["phi_id"], v["ks_stat"], v["ks_p"], v["var_ratio"], v["ok"]]
         for v in verdicts]))
    man.add_verdict("spde_compare_ok", bool(all_ok))
    man.add_verdict("per_projection", verdicts)
    man.add_parameters(N=args.N, reps=args.reps, T=args.T, dt=args.dt,
                       grid=args.grid, refine=args.refine)
    print(f"spde-compare: {'ok' if all_ok else 'FAIL'}")
    return 0 if all_ok else 2


_DISPATCH = {
    "simulate": cmd_simulate,
    "meanfield": cmd_meanfield,
    "lln": cmd_lln,
    "clt": cmd_clt,
    "qv-check": cmd_qv_check,
    "noise-check": cmd_noise_check,
    "spde-compare": cmd_spde_compare,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        sys.stderr.write(f"unknown subcommand {argv[0]!r}; choose from "
                         f"{', '.join(COMMANDS)}\n")
        return 64
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 64
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"cannot read config: {exc}\n")
        return 1
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = _manifest(args, config)
    man.data["resolved_config"] = config_to_dict(config)
    try:
        code = _DISPATCH[args.command](args, config, out, man)
    except (ValueError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    man.write(out / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
