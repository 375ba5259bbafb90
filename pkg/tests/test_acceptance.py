"""Acceptance suite: one test per criterion, at the stated parameters and
tolerances, printing one pass/fail line each.

Artifacts (rate tables, fluctuation samples, QV tables) are written to
``acceptance_out/`` at the repo root; the figure-rendering criterion and
the determinism criterion consume them.

``MFSIR_ACC_SCALE`` (a float in (0, 1]) scales replication counts for
development smoke runs only; unset means the full specified load.
"""
import json
import math
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mfsir.config_io import parse_config
from mfsir.experiments import (build_limit, lln_driver, noise_driver, qv_driver,
                               spde_compare_driver)
from mfsir.fluctuations import STATE_NAMES
from mfsir.io_utils import write_csv
from mfsir.model import DiffusionSpec, DriftSpec, GaussianMixture, InitialLawSpec, KernelSpec, ModelConfig
from mfsir.pde import Grid1D, default_domain, solve_pde
from mfsir.rng import derive_stream
from mfsir.simulate import SimScheme, run
from mfsir.stats import ks_two_sample
from mfsir.testfunctions import default_bank

from oracles import gillespie_sir

ROOT = Path(__file__).parent.parent
CONFIGS = ROOT / "configs"
OUT = ROOT / "acceptance_out"
OUT.mkdir(exist_ok=True)

SCALE = float(os.environ.get("MFSIR_ACC_SCALE", "1.0"))


def scaled(n, minimum=4):
    return max(minimum, int(round(n * SCALE)))


def report(criterion, ok, detail):
    line = f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    return ok


@pytest.fixture(scope="module")
def d1_config():
    return parse_config(CONFIGS / "rate_d1.json")


def test_criterion_1_lln_rate_d1(d1_config):
    """d=1 rate: slope of E[W1] vs N in [-0.62, -0.38]."""
    reps = scaled(200)
    table, fit, window, limit = lln_driver(
        d1_config, [100, 400, 1600, 6400], reps, 2.0, 0.01, base_seed=1001,
        workers=1, grid_cells=512)
    write_csv(OUT / "rate_d1.csv", ["N", "reps", "mean_w1", "se"],
              [[r["N"], r["reps"], r["mean_w1"], r["se"]] for r in table.rows()])
    (OUT / "rate_d1_fit.json").write_text(json.dumps(
        {"fit": fit.to_dict(), "window": list(window), "d": 1}))
    drift = np.abs(limit.masses.sum(axis=(1, 2)) - 1.0).max()
    ok = window[0] <= fit.slope <= window[1] and drift <= 1e-6
    assert report("1 (LLN rate d=1)", ok,
                  f"slope {fit.slope:+.4f} se {fit.slope_se:.4f}, mass drift {drift:.2e}")


def _exact_assignment_rate(cfg, limit, ns, reps, scheme, base_seed):
    """Supplementary d=3 rate: exact-assignment W1 per channel against
    equal-size reference subsamples (sizes within the assignment cap).

    Unlike slicing, the exact matching feels the full three-dimensional
    geometry, so it exposes the N^(-1/3) empirical-measure rate."""
    from mfsir.fluctuations import STATE_NAMES  # noqa: F401 (symmetry w/ driver)
    from mfsir.measures import w1_exact_assignment
    from mfsir.model import StateMeasure
    from mfsir.simulate import run as sim_run

    means = []
    for n in ns:
        vals = np.empty(reps)
        for r in range(reps):
            rng = derive_stream(base_seed, f"exact-N{n}", r)
            traj = sim_run(cfg, scheme, n, rng, keep_log=False)
            measure = StateMeasure.from_ensemble(traj.snapshots[-1])
            total = 0.0
            for e in range(3):
                pts, w = measure.clouds[e]
                m = pts.shape[0]
                rpts, _ = limit.clouds[e]
                if m == 0 or rpts.shape[0] < m:
                    continue
                pick = rng.choice(rpts.shape[0], size=m, replace=False)
                total += (m / n) * w1_exact_assignment(
                    (pts, np.full(m, 1.0 / m)), (rpts[pick], np.full(m, 1.0 / m)))
            vals[r] = total
        means.append(vals.mean())
    from mfsir.stats import fit_power_law

    return fit_power_law(ns, means)


def test_criterion_2_lln_rate_d3():
    """d=3 rate against a reference-ensemble surrogate: slope in [-0.45, -0.22].

    Known-red as stated: averaging one-dimensional projections (sliced W1)
    measures each projection's empirical rate N^(-1/2), so the fitted slope
    concentrates near -0.5 for any light-tailed spatial law and cannot land
    in a window built around the full-W1 rate N^(-1/d).  The supplementary
    exact-assignment rate below does land in the window; both are reported.
    """
    cfg = parse_config(CONFIGS / "rate_d3.json")
    reps = scaled(100)
    scheme = SimScheme(0.02, (2.0,))
    table, fit, window, limit = lln_driver(
        cfg, [250, 1000, 4000], reps, 2.0, 0.02, base_seed=1002, workers=1,
        n_ref=100_000, n_proj=128)
    write_csv(OUT / "rate_d3.csv", ["N", "reps", "mean_w1", "se"],
              [[r["N"], r["reps"], r["mean_w1"], r["se"]] for r in table.rows()])
    sup = _exact_assignment_rate(cfg, limit, [250, 1000, 2000],
                                 max(10, reps // 2), scheme, base_seed=2002)
    sup_ok = window[0] <= sup.slope <= window[1]
    ok = window[0] <= fit.slope <= window[1]
    report("2 (LLN rate d=3)", ok,
           f"sliced slope {fit.slope:+.4f} se {fit.slope_se:.4f} vs window "
           f"[{window[0]}, {window[1]}]; supplementary exact-assignment slope "
           f"{sup.slope:+.4f} ({'inside' if sup_ok else 'outside'})")
    assert ok, (
        f"sliced-W1 slope {fit.slope:+.4f} outside [{window[0]}, {window[1]}]: "
        "1-D projections of a d-dimensional empirical measure converge at the "
        "one-dimensional rate N^(-1/2), so the sliced estimator cannot exhibit "
        f"the dimension-limited rate; the exact-assignment estimator gives "
        f"{sup.slope:+.4f}, which {'does' if sup_ok else 'does not'} land in "
        "the window.")


def test_criterion_3_homogeneous_gillespie_oracle():
    """Jump-only reduction vs an independent Gillespie CTMC oracle."""
    cfg = parse_config(CONFIGS / "homogeneous.json")
    n, reps = 50, scaled(500)
    checks = (0.5, 1.0, 2.0, 4.0)
    scheme = SimScheme(0.004, (0.0, *checks))
    sim_i = np.empty((reps, len(checks)))
    traj_rows = []
    for r in range(reps):
        traj = run(cfg, scheme, n, derive_stream(1003, "homog", r), keep_log=False)
        for k, t in enumerate(checks):
            sim_i[r, k] = traj.snapshot_at(t).state_counts()[1]
        if r < 25:  # trajectory artifact for the masses figure
            for snap in traj.snapshots:
                for i in range(snap.n):
                    traj_rows.append([r, snap.time, i,
                                      float(snap.positions[i, 0]),
                                      int(snap.states[i])])
    write_csv(OUT / "homogeneous_trajectory.csv",
              ["rep", "t", "individual", "x_1", "state"], traj_rows)
    rng = derive_stream(1003, "gillespie-oracle", 0)
    orc_i = np.empty((reps, len(checks)))
    for r in range(reps):
        i0 = int(np.sum(rng.random(n) < cfg.initial.state_probs[1]))
        orc_i[r] = gillespie_sir(n, cfg.kernel.beta, cfg.gamma, i0, checks, rng)
    ok = True
    details = []
    for k, t in enumerate(checks):
        gap = sim_i[:, k].mean() - orc_i[:, k].mean()
        se = math.hypot(sim_i[:, k].std(ddof=1) / math.sqrt(reps),
                        orc_i[:, k].std(ddof=1) / math.sqrt(reps))
        details.append(f"t={t}: gap {gap:+.3f} vs 3se {3 * se:.3f}")
        ok &= abs(gap) <= 3 * se
    assert report("3 (Gillespie oracle)", ok, "; ".join(details))


def test_criterion_4_ito_isometry(d1_config):
    """E[M~_T^2] / E[formula QV_T] in [0.9, 1.1] for the full bank."""
    reps = scaled(1000)
    rows, all_ok, _ = qv_driver(d1_config, 1000, reps, 1.0, 0.005,
                                base_seed=1004, workers=1, grid_cells=512)
    write_csv(OUT / "qv_check.csv",
              ["state", "phi_id", "mean_m2", "mean_realized_qv",
               "mean_formula_qv", "ratio", "ratio_plain", "checked", "ok"],
              [[r["state"], r["phi_id"], r["mean_m2"], r["mean_realized_qv"],
                r["mean_formula_qv"], r["ratio"], r["ratio_plain"],
                r["checked"], r["ok"]] for r in rows])
    checked = [r for r in rows if r["checked"]]
    worst = max(abs(r["ratio"] - 1.0) for r in checked)
    assert report("4 (Ito isometry / QV)", all_ok,
                  f"{len(checked)} nondegenerate cells, worst |ratio-1| = {worst:.3f}")


def test_criterion_5_limit_noise_covariance(d1_config):
    """White-noise MC covariance vs quadrature: 5 tuples within 5 percent
    relative, 2 disjoint-support tuples within 1e-3 absolute."""
    paths = scaled(10_000, minimum=500)
    rows, all_ok, _ = noise_driver(d1_config, 2.0, 0.01, base_seed=1005,
                                   n_paths=paths, grid_cells=256)
    write_csv(OUT / "noise_check.csv",
              ["kind", "phi1", "phi2", "t", "s", "mc_cov", "quad_cov", "error", "ok"],
              [[r["kind"], r["phi1"], r["phi2"], r["t"], r["s"], r["mc_cov"],
                r["quad_cov"], r["error"], r["ok"]] for r in rows])
    worst_rel = max(r["error"] for r in rows if r["kind"] == "nondegenerate")
    worst_abs = max(r["error"] for r in rows if r["kind"] == "degenerate")
    assert report("5 (limit-noise covariance)", all_ok,
                  f"worst rel {worst_rel:.3%}, worst degenerate abs {worst_abs:.2e}")


def test_criterion_6_clt_two_sample(d1_config):
    """Particle vs SPDE fluctuations at T=2: KS at alpha=0.01 plus variance
    ratio in [0.8, 1.25] for 5 bank functions, states S and I."""
    reps = scaled(500)
    samples, spde_rows, checkpoints, bank, verdicts, all_ok = spde_compare_driver(
        d1_config, 4000, reps, 2.0, 0.0025, base_seed=1006, workers=1,
        grid_cells=256, refine=8)
    header = ["rep", "state", "phi_id", "t", "eta", "martingale", "qv_formula",
              "source"]
    rows = []
    for s in samples:
        for ti, t in enumerate(s.times):
            for e in range(3):
                for b, phi in enumerate(bank):
                    rows.append([s.rep, STATE_NAMES[e], phi.name, float(t),
                                 float(s.eta[ti, e, b]),
                                 float(s.martingale[ti, e, b]),
                                 float(s.qv[ti, e, b]), "particle"])
    for rep in range(spde_rows.shape[0]):
        for ti in range(spde_rows.shape[1]):
            for e in range(3):
                for b in range(len(bank)):
                    rows.append([rep, STATE_NAMES[e], bank[b].name,
                                 float(checkpoints[ti]),
                                 float(spde_rows[rep, ti, e, b]), "", "", "spde"])
    write_csv(OUT / "spde_compare.csv", header, rows)
    write_csv(OUT / "spde_verdicts.csv",
              ["state", "phi_id", "ks_stat", "ks_p", "var_ratio", "ok"],
              [[v["state"], v["phi_id"], v["ks_stat"], v["ks_p"],
                v["var_ratio"], v["ok"]] for v in verdicts])
    worst_p = min(v["ks_p"] for v in verdicts)
    ratios = [v["var_ratio"] for v in verdicts]
    assert report("6 (CLT two-sample)", all_ok,
                  f"min KS p {worst_p:.4f}, var ratios [{min(ratios):.3f}, {max(ratios):.3f}]")


def test_criterion_7_pde_exactness():
    """Heat-kernel max-norm <= 1e-3 at G=512, T=1; exact mass books."""
    mix = GaussianMixture((1.0,), ((0.0,),), ((1.0,),))
    cfg = ModelConfig(1, 0.0, KernelSpec("constant", 0.0), DriftSpec("zero"),
                      DiffusionSpec("constant", (0.5, 0.5, 0.5)),
                      InitialLawSpec((1.0, 0.0, 0.0), (mix, mix, mix)))
    lo, hi = default_domain(cfg, 1.0)
    grid = Grid1D(lo, hi, 512)
    dt = 0.35 * grid.h**2 / 0.25
    traj = solve_pde(cfg, grid, 1.0, dt, store_times=np.linspace(0, 1, 21))
    var = 1.0 + 0.25
    exact = np.exp(-grid.centers**2 / (2 * var)) / math.sqrt(2 * math.pi * var)
    err = np.abs(traj.interp(1.0)[0] / grid.h - exact).max()
    drift = np.abs(traj.masses.sum(axis=(1, 2)) - 1.0).max()
    ok = err <= 1e-3 and drift <= 1e-6
    assert report("7 (PDE exactness)", ok,
                  f"heat max-norm {err:.2e}, mass drift {drift:.2e}")


def test_criterion_8_cli_determinism(tmp_path):
    """Re-running each subcommand with the same seed yields byte-identical
    CSVs at any worker count (checked on reduced instances; full-scale
    reruns would double the suite runtime, and determinism is scale-free)."""
    cases = [
        ("simulate", ["--N", "40", "--reps", "2", "--T", "0.2", "--dt", "0.02"],
         ["trajectory.csv", "events.csv"]),
        ("meanfield", ["--T", "0.2", "--grid", "64"], ["density.csv"]),
        ("lln", ["--Ns", "30,60,120", "--reps", "4", "--T", "0.2", "--dt", "0.02",
                 "--grid", "64"], ["rate.csv"]),
        ("clt", ["--N", "60", "--reps", "4", "--T", "0.2", "--dt", "0.01",
                 "--grid", "64"], ["fluctuations.csv"]),
        ("qv-check", ["--N", "50", "--reps", "6", "--T", "0.2", "--dt", "0.01",
                      "--grid", "64"], ["qv_check.csv"]),
        ("noise-check", ["--T", "0.5", "--dt", "0.01", "--grid", "64",
                         "--paths", "400"], ["noise_check.csv"]),
        ("spde-compare", ["--N", "60", "--reps", "35", "--T", "0.2",
                          "--dt", "0.0025", "--grid", "64", "--refine", "4"],
         ["spde_compare.csv", "spde_verdicts.csv"]),
    ]
    from mfsir.cli import main as cli_main

    ok = True
    details = []
    for cmd, args, artifacts in cases:
        digests = []
        for tag, workers in (("w1", "1"), ("w2", "2")):
            out = tmp_path / f"{cmd}-{tag}"
            code = cli_main([cmd, "--config", str(CONFIGS / "rate_d1.json"),
                             "--seed", "77", "--workers", workers,
                             "--out-dir", str(out), *args])
            assert code in (0, 2), f"{cmd} errored"
            digests.append(tuple((out / a).read_bytes() for a in artifacts))
        same = digests[0] == digests[1]
        ok &= same
        details.append(f"{cmd}:{'=' if same else '!='}")
    assert report("8 (determinism)", ok, " ".join(details))


FRONTEND = ROOT / "frontend"


@pytest.mark.skipif(not (FRONTEND / "node_modules").exists(),
                    reason="secondary component not built")
def test_criterion_9_plots_render():
    """Secondary: all four figure kinds render from criteria 1/3/4/6 CSVs."""
    needed = ["rate_d1.csv", "homogeneous_trajectory.csv", "qv_check.csv",
              "spde_compare.csv"]
    missing = [n for n in needed if not (OUT / n).exists()]
    if missing:
        pytest.skip(f"artifacts not generated yet: {missing}")
    figs = OUT / "figures"
    figs.mkdir(exist_ok=True)
    jobs = [
        ("rate", OUT / "rate_d1.csv", figs / "rate_d1.svg",
         ["--fit-json", str(OUT / "rate_d1_fit.json")]),
        ("masses", OUT / "homogeneous_trajectory.csv", figs / "masses.svg", []),
        ("qv", OUT / "qv_check.csv", figs / "qv.svg", []),
        ("hist", OUT / "spde_compare.csv", figs / "hist.svg",
         ["--phi", "gh0_wide", "--state", "S", "--t", "2"]),
    ]
    ok = True
    details = []
    for kind, src, dst, extra in jobs:
        proc = subprocess.run(
            ["node", str(FRONTEND / "dist" / "cli.js"), kind,
             "--in", str(src), "--out", str(dst), *extra],
            capture_output=True, text=True)
        good = proc.returncode == 0 and dst.exists() and dst.stat().st_size > 500
        if kind == "rate" and good:
            svg = dst.read_text()
            good = "-1/2" in svg and "slope" in svg
        ok &= good
        details.append(f"{kind}:{'ok' if good else 'FAIL'}"
                       + ("" if good else f" [{proc.stderr[:200]}]"))
    assert report("9 (figure rendering)", ok, " ".join(details))
