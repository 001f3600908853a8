"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances, sizes and seeds are fixed here and are not tuned per run.  The
statistical criteria use declared seeds; their parameters are recorded in
the printed lines and in the written reports.
"""
import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from brownliq.configuration import Configuration, ModelSpec, is_valid
from brownliq.dynamics import DynamicsParams, simulate
from brownliq.experiments import (ChainPlan, archimedes_experiment, archimedes_precondition, archimedes_threshold,
                                  centrifuge_experiment, check_vessel, surface_experiment)
from brownliq.geometry import Box, GraphDomain, HalfCylinder
from brownliq.packing import HONEYCOMB_DENSITY, HoneycombSpec, c1_estimate, covered_fraction, honeycomb_in_region
from brownliq.paths import connectivity_path
from brownliq.sampler import initial_configuration, integrated_autocorr, log_target_ratio, make_rng, run_chain

from oracles import c1_multistart, c1_two_discs_grid, two_disc_cell_probabilities, two_disc_gap_probability

pytestmark = pytest.mark.slow

ARCH = dict(rho=0.06, n=200, lam=50.0, delta=0.05)
ARCH_PLAN = ChainPlan(sweeps=400_000, thin=100, burn_in=2000, approach_stages=30, approach_sweeps=3000,
                      start_scale=0.3, replicas=4)
CENTRIFUGE_PLAN = ChainPlan(sweeps=200_000, thin=50, burn_in=2000, approach_stages=20, approach_sweeps=5000,
                            start_scale=0.3)
CENTRIFUGE_SPEC = ModelSpec(np.full(20, 0.1), [1.0, 2.0] * 10, HalfCylinder(1.0))
CENTRIFUGE_SEED = 5
CENTRIFUGE_LAMS = [1.0, 10.0, 50.0, 200.0]


@pytest.fixture(scope="module")
def archimedes_float():
    t0 = time.perf_counter()
    rep = archimedes_experiment(ARCH["rho"], ARCH["n"], 0.5, ARCH["lam"], ARCH["delta"], "float", plan=ARCH_PLAN,
                                seed=1, start="random")
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def centrifuge_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("centrifuge_api")
    rep = centrifuge_experiment(CENTRIFUGE_SPEC, 0.2, CENTRIFUGE_LAMS, max_violation=0.05, plan=CENTRIFUGE_PLAN,
                                seed=CENTRIFUGE_SEED)
    rep.write(out)
    return rep, out


def test_c01_single_disc_marginal(criterion):
    t0 = time.perf_counter()
    spec = ModelSpec([0.1], [1.0], HalfCylinder(1.0))
    run = run_chain(spec, Configuration([[0.6, 0.0]]), 4_002_000, 4, 2000, seed=1)
    x = run.series("wcm") - 0.1
    ess = integrated_autocorr(x)["ess"]
    ks = stats.kstest(x, "expon", args=(0, 0.5)).statistic
    elapsed = time.perf_counter() - t0
    ok = ks < 0.02 and ess >= 1e5 and elapsed < 30
    criterion(1, ok, f"KS={ks:.4f} (<0.02) ESS={ess:.0f} (>=1e5) time={elapsed:.1f}s (<30)")
    assert ok


def test_c02_detailed_balance(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    n = 1_000_000
    spec = ModelSpec(np.full(10, 0.1), rng.uniform(0.1, 10, 10), HalfCylinder(1.0), drift_scale=3.0)
    k = rng.integers(0, 10, n)
    x = np.column_stack([rng.uniform(0.1, 20, n), rng.uniform(-0.9, 0.9, n)])
    y = np.column_stack([rng.uniform(0.1, 20, n), rng.uniform(-0.9, 0.9, n)])
    fwd = log_target_ratio(spec, k, x, y)
    back = log_target_ratio(spec, k, y, x)
    err = float(np.max(np.abs(np.expm1(fwd + back))))
    lin = float(np.max(np.abs(fwd + back)))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-12 and lin <= 1e-12 and elapsed < 1.0
    criterion(2, ok, f"max|ratio product - 1|={err:.1e} max|log sum|={lin:.1e} (<=1e-12) time={elapsed:.2f}s (<1)")
    assert ok


def test_c03_two_disc_histogram(criterion):
    r, w, a = 0.2, 0.5, (1.0, 1.5)
    spec = ModelSpec([r, r], list(a), HalfCylinder(w))
    e1 = r + np.linspace(0, 4 / a[0], 21)
    e2 = r + np.linspace(0, 4 / a[1], 21)
    oracle = two_disc_cell_probabilities(a, r, w, e1, e2)
    run = run_chain(spec, Configuration([[0.5, -0.25], [1.0, 0.25]]), 2_000_000, 5, 2000, seed=3)
    x = np.array([s.centers[:, 0] for s in run])
    hist, _, _ = np.histogram2d(x[:, 0], x[:, 1], [e1, e2])
    hist /= len(x)
    tv = 0.5 * np.abs(hist - oracle).sum() + 0.5 * abs(hist.sum() - oracle.sum())
    ok = tv < 0.03
    criterion(3, ok, f"TV={tv:.4f} (<0.03) on 20x20 bins, {len(x)} snapshots")
    assert ok


def test_c04_dynamics_vs_sampler(criterion):
    t0 = time.perf_counter()
    spec = ModelSpec(np.full(10, 0.15), np.ones(10), HalfCylinder(1.0))
    init = initial_configuration(spec, make_rng(0))
    dyn = simulate(spec, init, DynamicsParams(), 500.0, 0.05, seed=1)
    s_dyn = dyn.series("surface")[100:]  # drop t < 5
    d_dyn = integrated_autocorr(s_dyn)
    ch = run_chain(spec, init, 1_000_000, 10, 2000, seed=1)
    s_mh = ch.series("surface")
    d_mh = integrated_autocorr(s_mh)
    se = math.hypot(s_dyn.std() / math.sqrt(d_dyn["ess"]), s_mh.std() / math.sqrt(d_mh["ess"]))
    gap = abs(s_dyn.mean() - s_mh.mean())
    elapsed = time.perf_counter() - t0
    ok = gap <= 3 * se and elapsed < 300
    criterion(4, ok, f"surface dynamics={s_dyn.mean():.4f} sampler={s_mh.mean():.4f} |diff|={gap:.4f} "
                     f"<= 3*SE={3 * se:.4f}; dt={dyn.dt:.2e} time={elapsed:.0f}s (<300)")
    assert ok


def test_c05_honeycomb_density(criterion):
    rho, side = 0.25, 50.0
    anchor = (rho * (1 + 1e-9), rho * (1 + 1e-9))
    # lattice discs meeting the box (clipped to it) and discs contained in it
    meeting = honeycomb_in_region(HoneycombSpec(rho, anchor), Box((-2 * rho, -2 * rho), (side + 2 * rho,) * 2))
    inside = honeycomb_in_region(HoneycombSpec(rho, anchor), Box((0.0, 0.0), (side, side)))
    clipped = covered_fraction(meeting, rho, (0, 0), (side, side))
    contained = covered_fraction(inside, rho, (0, 0), (side, side))
    diff = meeting[:, None, :] - meeting[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    dmin = float(dist.min())
    rel = abs(clipped / HONEYCOMB_DENSITY - 1)
    ok = rel < 0.01 and dmin >= 2 * rho - 1e-12
    criterion(5, ok, f"covered fraction {clipped:.5f} vs pi/sqrt(12)={HONEYCOMB_DENSITY:.5f} (rel {rel:.1e} < 1e-2); "
                     f"contained discs only: {contained:.5f}; min distance {dmin:.15f} >= 2rho-1e-12")
    assert ok


def test_c06_c1_oracles(criterion):
    details = []
    ok = True
    for n in (2, 5, 7):
        spec = ModelSpec(np.full(n, 0.3), np.ones(n), HalfCylinder(1.0))
        est = c1_estimate(spec, seed=6)
        annealed = min(est.restart_values)
        oracle = c1_two_discs_grid(0.3, 1.0) if n == 2 else c1_multistart(n, 0.3, 1.0, starts=40, seed=6)
        rel = abs(annealed / oracle - 1)
        ok &= rel < 0.02 and is_valid(spec, est.argmin)
        details.append(f"N={n} anneal={annealed:.4f} oracle={oracle:.4f} rel={rel:.1e}")
    criterion(6, ok, "; ".join(details) + " (rel < 2e-2)")
    assert ok


def test_c07_surface(criterion, tmp_path):
    spec = ModelSpec(np.full(50, 0.08), np.ones(50), HalfCylinder(1.0))
    plan = ChainPlan(sweeps=300_000, thin=100, burn_in=2000, approach_stages=0)
    rep = surface_experiment(spec, 0.3, [1.0, 10.0, 50.0, 200.0], plan=plan, seed=3, hole_samples=200,
                             start="optimum")
    rep.write(tmp_path)
    near = rep.row("near_infimum", 200.0)
    room = rep.row("no_room", 200.0)
    lo, hi = near.interval
    ok = rep.passed
    criterion(7, ok, f"c1={rep.params['c1']:.4f}; P(wcm<c1+0.3) by lambda="
                     f"{[round(p, 3) for p in rep.probabilities('near_infimum')]} at 200: {near.probability:.3f} "
                     f"(95% [{lo:.3f},{hi:.3f}], ESS {near.ess:.0f}, need >0.9); no-room at 200: "
                     f"{room.probability:.3f} (need >0.9); checks {rep.checks}")
    assert ok


def test_c08_centrifuge(criterion, centrifuge_outputs):
    rep, _ = centrifuge_outputs
    viol = 1 - rep.row("ordered", 200.0).probability
    # two discs, heavy and light, against quadrature
    spec2 = ModelSpec([0.1, 0.1], [2.0, 1.0], HalfCylinder(1.0))
    rep2 = centrifuge_experiment(spec2, 0.2, [1.0], plan=ChainPlan(sweeps=100_000, thin=5, burn_in=2000), seed=8)
    exact = 1 - two_disc_gap_probability((2.0, 1.0), 0.1, 1.0, 0.2)
    lo, hi = rep2.rows[0].interval
    ok = rep.passed and lo <= exact <= hi
    criterion(8, ok, f"N=20 violation frequency at lambda=200: {viol:.4f} (<0.05), monotone={rep.checks['monotone']}, "
                     f"ESS {rep.row('ordered', 200.0).ess:.0f}; N=2 P(ordered)={rep2.rows[0].probability:.4f} "
                     f"95% [{lo:.4f},{hi:.4f}] contains quadrature {exact:.4f}")
    assert ok


def test_c09_archimedes(criterion, archimedes_float):
    fl, t_float = archimedes_float
    t0 = time.perf_counter()
    sk = archimedes_experiment(ARCH["rho"], ARCH["n"], 2.0, ARCH["lam"], ARCH["delta"], "sink", plan=ARCH_PLAN,
                               seed=1, start="random")
    total = t_float + time.perf_counter() - t0
    pre = archimedes_precondition(ARCH["rho"], ARCH["n"])
    f_row, s_row = fl.row("float"), sk.row("sink")
    ok = fl.passed and sk.passed and total < 1800 and pre > 2 - math.pi / 4
    criterion(9, ok, f"precondition {pre:.3f} > 1.2146; float at 0.5x critical: {f_row.probability:.3f} "
                     f"(ESS {f_row.ess:.0f}); sink at 2x critical: {s_row.probability:.3f} (ESS {s_row.ess:.0f}); "
                     f"need >=0.9 and ESS>=100; time {total:.0f}s (<1800)")
    assert ok


def test_c10_inertia(criterion, archimedes_float):
    fl, _ = archimedes_float
    ratio = fl.params["drift_ratio"]
    plan = ChainPlan(sweeps=100_000, thin=50, burn_in=2000, approach_stages=30, approach_sweeps=3000,
                     start_scale=0.3)
    sk = archimedes_experiment(ARCH["rho"], ARCH["n"], 0.5, ARCH["lam"], ARCH["delta"], "sink", m1=4.0, plan=plan,
                               seed=2, start="random")
    lo_thr, hi_thr = archimedes_threshold(ARCH["rho"], 4.0), archimedes_threshold(ARCH["rho"], 1.0)
    between = lo_thr < ratio < hi_thr and sk.params["drift_ratio"] == ratio
    ok = between and fl.passed and sk.passed
    criterion(10, ok, f"a1/a2={ratio:.2f} between m1=4 threshold {lo_thr:.2f} and m1=1 threshold {hi_thr:.2f}; "
                      f"m1=1 float {fl.row('float').probability:.3f}; m1=4 sink {sk.row('sink').probability:.3f} "
                      f"(ESS {sk.row('sink').ess:.0f}); need >=0.9 each")
    assert ok


def test_c11_connectivity(criterion):
    rng = make_rng(11)
    spec = ModelSpec(rng.uniform(0.1, 0.3, 8), np.ones(8), HalfCylinder(1.0))
    passed, checked = 0, 0
    for _ in range(10):
        a, b = initial_configuration(spec, rng), initial_configuration(spec, rng)
        path = connectivity_path(spec, a, b, 1000)
        passed += path.certificate
        checked += path.samples_checked
    ok = passed == 10
    criterion(11, ok, f"{passed}/10 certified paths, N=8, {checked} sampled configurations at 1000 per segment")
    assert ok


def test_c12_vessel_checker(criterion):
    results = []
    for a in (0.01, 1.0, 100.0):
        t0 = time.perf_counter()
        res = check_vessel(HalfCylinder(1.0), a)
        results.append((f"cylinder a={a:g}", res.condition_holds, True, time.perf_counter() - t0))
    half = math.exp(4 * 2.0) / 2
    flaring = GraphDomain(lambda y: math.log(max(2 * abs(y), 1e-300)) / 4.0, ((-half, half),))
    t0 = time.perf_counter()
    res = check_vessel(flaring, 1.0, b_max=2.0)
    results.append(("flaring |D_b|=e^{4ab}", res.condition_holds, False, time.perf_counter() - t0))
    again = check_vessel(flaring, 1.0, b_max=2.0)
    deterministic = again.table == res.table
    ok = deterministic and all(got == want and t < 1.0 for _, got, want, t in results)
    criterion(12, ok, "; ".join(f"{name}: condition_holds={got} ({t * 1e3:.0f} ms)" for name, got, _, t in results)
              + f"; deterministic={deterministic}")
    assert ok


def test_c13_reproducibility(criterion, centrifuge_outputs, tmp_path):
    from brownliq.cli import main

    _, api_dir = centrifuge_outputs
    cfg = {
        "seed": CENTRIFUGE_SEED,
        "model": {"N": 20, "radii": 0.1, "weights": [1.0, 2.0] * 10},
        "plan": {"sweeps": CENTRIFUGE_PLAN.sweeps, "thin": CENTRIFUGE_PLAN.thin, "burn_in": CENTRIFUGE_PLAN.burn_in,
                 "approach_stages": CENTRIFUGE_PLAN.approach_stages,
                 "approach_sweeps": CENTRIFUGE_PLAN.approach_sweeps, "start_scale": CENTRIFUGE_PLAN.start_scale},
        "experiment": {"centrifuge": {"lam_list": CENTRIFUGE_LAMS, "delta": 0.2, "max_violation": 0.05}},
    }
    cfg_path = tmp_path / "centrifuge.json"
    cfg_path.write_text(json.dumps(cfg))
    code = main(["experiment", "centrifuge", "-c", str(cfg_path), "--output-dir", str(tmp_path), "--run-name", "cli"])
    same = []
    for name in ("centrifuge_report.json", "centrifuge_samples.csv"):
        same.append((api_dir / name).read_bytes() == (tmp_path / "cli" / name).read_bytes())
    sample = ["sample", "--seed", "13", "--set", "model.N=10", "--set", "model.radii=0.15",
              "--set", "sampler.sweeps=20000", "--set", "sampler.thin=20", "--set", "sampler.burn_in=2000",
              "--output-dir", str(tmp_path)]
    codes = [main([*sample, "--run-name", "s1"]), main([*sample, "--run-name", "s2"])]
    for name in ("snapshots_r0.jsonl", "summary.csv"):
        same.append((tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes())
    ok = code == 0 and codes == [0, 0] and all(same)
    criterion(13, ok, f"centrifuge report/CSV from the CLI match the direct run byte for byte: {same[:2]}; "
                      f"repeated sample JSONL/CSV identical: {same[2:]}")
    assert ok
