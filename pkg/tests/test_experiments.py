import json
import math

import numpy as np
import pytest

from brownliq.configuration import ModelSpec
from brownliq.experiments import (ARCHIMEDES_CRITICAL, ChainPlan, EventRow, archimedes_experiment,
                                  archimedes_precondition, archimedes_spec, archimedes_threshold, centrifuge_experiment,
                                  check_vessel, concentration_experiment, monotone_with_overlap, surface_experiment,
                                  wilson_interval)
from brownliq.geometry import GraphDomain, HalfCylinder

from oracles import two_disc_gap_probability

CYL = HalfCylinder(1.0)
QUICK = ChainPlan(sweeps=20_000, thin=5, burn_in=1000, approach_stages=2, approach_sweeps=200)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-3) and hi == pytest.approx(0.5962, abs=1e-3)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    narrow = wilson_interval(500, 1000)
    wide = wilson_interval(500, 1000, ess=100)
    assert wide[1] - wide[0] > narrow[1] - narrow[0]
    assert wilson_interval(1000, 1000)[1] == 1.0


def test_monotone_with_overlap():
    rows = [EventRow(1, "e", 50, 100, 100), EventRow(2, "e", 48, 100, 100), EventRow(3, "e", 90, 100, 100)]
    assert monotone_with_overlap(rows, 1)
    assert not monotone_with_overlap(rows, 0)
    assert not monotone_with_overlap([EventRow(1, "e", 99, 100, 100), EventRow(2, "e", 10, 100, 100)], 1)


@pytest.mark.parametrize("a", [0.01, 1.0, 100.0])
def test_check_vessel_cylinder(a):
    res = check_vessel(CYL, a)
    assert res.condition_holds and res.b0_found
    assert all(t[1] == pytest.approx(2.0, rel=1e-12) for t in res.table)


def _graph(k, a, b_max):
    half = math.exp(k * a * b_max) / 2
    return GraphDomain(lambda y: math.log(max(2 * abs(y), 1e-300)) / (k * a), ((-half, half),))


def test_check_vessel_flaring_graph_fails():
    res = check_vessel(_graph(4, 1.0, 2.0), 1.0, b_max=2.0)
    assert not res.condition_holds
    b, section, _ = res.table[-1]
    assert section == pytest.approx(math.exp(4 * b), rel=1e-9)


def test_check_vessel_slowly_widening_graph_passes():
    res = check_vessel(_graph(1, 1.0, 25.0), 1.0)
    assert res.condition_holds
    b, section, prod = res.table[-1]
    assert prod == pytest.approx(math.exp(-b), rel=1e-9)


def test_check_vessel_short_range_is_reported():
    res = check_vessel(CYL, 1.0, b_max=1.0)
    assert not res.condition_holds and any("b_max" in n for n in res.notes)
    with pytest.raises(ValueError):
        check_vessel(CYL, 0.0)


def test_single_disc_concentration_closed_form():
    spec = ModelSpec([0.1], [1.0], CYL)
    rep = concentration_experiment(spec, [1.0, 3.0], eps=0.5, plan=QUICK, seed=2)
    assert rep.params["c1_source"] == "exact"
    for row in rep.rows:
        exact = 1 - math.exp(-row.setting * 0.5)
        lo, hi = row.interval
        assert lo <= exact <= hi
    assert rep.checks["monotone"]


def test_single_disc_concentration_large_drift():
    spec = ModelSpec([0.1], [1.0], CYL)
    rep = concentration_experiment(spec, [1000.0], eps=0.1, plan=QUICK, seed=1)
    assert rep.rows[0].probability >= 0.99 and rep.passed


def test_concentration_huge_eps_is_certain():
    spec = ModelSpec([0.1], [1.0], CYL)
    rep = concentration_experiment(spec, [1.0], eps=1e3, plan=QUICK, seed=1)
    assert rep.rows[0].probability == 1.0


def test_single_disc_surface_closed_form():
    spec = ModelSpec([0.1], [1.0], CYL)
    rep = surface_experiment(spec, 0.2, [2.0, 8.0], plan=QUICK, seed=3, hole_samples=400)
    for lam in (2.0, 8.0):
        row = rep.row("near_infimum", lam)
        lo, hi = row.interval
        assert lo <= 1 - math.exp(-2 * lam * 0.2) <= hi
        # a single disc can move down by more than delta exactly when it is higher than that above the floor
        assert abs(rep.row("no_room", lam).probability - row.probability) < 0.1


def test_surface_huge_delta_no_room_certain():
    spec = ModelSpec([0.1, 0.1], [1.0, 1.0], CYL)
    rep = surface_experiment(spec, 100.0, [1.0], c1=0.2, plan=QUICK, seed=3, hole_samples=50)
    assert rep.row("no_room").probability == 1.0


def test_centrifuge_equal_weights_always_ordered():
    spec = ModelSpec(np.full(5, 0.1), np.ones(5), CYL)
    rep = centrifuge_experiment(spec, 0.2, [1.0, 5.0], plan=QUICK, seed=0)
    assert all(r.probability == 1.0 for r in rep.rows)


def test_centrifuge_rejects_mixed_radii():
    with pytest.raises(ValueError):
        centrifuge_experiment(ModelSpec([0.1, 0.2], [1, 2], CYL), 0.2, [1.0])


def test_centrifuge_two_discs_matches_quadrature():
    spec = ModelSpec([0.1, 0.1], [2.0, 1.0], CYL)
    lam, delta = 1.0, 0.2
    rep = centrifuge_experiment(spec, delta, [lam], plan=ChainPlan(sweeps=100_000, thin=5, burn_in=2000), seed=4)
    exact = 1 - two_disc_gap_probability((2.0 * lam, 1.0 * lam), 0.1, 1.0, delta)
    lo, hi = rep.rows[0].interval
    assert lo <= exact <= hi


def test_archimedes_constants_and_precondition():
    assert ARCHIMEDES_CRITICAL == pytest.approx(0.22672, abs=1e-5)
    assert archimedes_precondition(0.06, 200) == pytest.approx(2.494, abs=1e-3)
    assert archimedes_threshold(0.06, 4.0) == pytest.approx(archimedes_threshold(0.06) / 4)
    with pytest.raises(ValueError, match="1.2146"):
        archimedes_spec(0.06, 20, 0.5)
    with pytest.raises(ValueError):
        archimedes_spec(0.5, 200, 0.5)


def test_archimedes_events_mutually_exclusive():
    plan = ChainPlan(sweeps=2000, thin=10, burn_in=200, approach_stages=2, approach_sweeps=100, start_scale=0.3)
    rep = archimedes_experiment(0.1, 60, 2.0, 5.0, 0.05, "sink", plan=plan, seed=1, start="random")
    s = rep.samples
    for fl, sk, top in zip(s["float"], s["sink"], s["top_small"]):
        if top > 1 + 2 * 0.05:
            assert not (fl and sk)
    assert "ess" in rep.checks


def test_report_reproducible(tmp_path):
    spec = ModelSpec(np.full(3, 0.2), np.ones(3), CYL)
    outs = []
    for sub in ("a", "b"):
        rep = concentration_experiment(spec, [1.0, 4.0], 0.2, c1=0.6, plan=QUICK, seed=9)
        j, c = rep.write(tmp_path / sub)
        outs.append((j.read_bytes(), c.read_bytes()))
        assert json.loads(j.read_text())["name"] == "concentration"
    assert outs[0] == outs[1]


def test_replicas_independent_of_jobs():
    spec = ModelSpec([0.1], [1.0], CYL)
    plan = ChainPlan(sweeps=2000, thin=10, burn_in=100, replicas=2)
    a = concentration_experiment(spec, [1.0], 0.3, plan=plan, seed=5)
    b = concentration_experiment(spec, [1.0], 0.3, plan=ChainPlan(sweeps=2000, thin=10, burn_in=100, replicas=2,
                                                                  jobs=2), seed=5)
    assert a.samples == b.samples
