import math

import numpy as np
import pytest

from brownliq.configuration import Configuration, ModelSpec, is_valid, weighted_cm
from brownliq.geometry import Box, HalfCylinder
from brownliq.packing import (HONEYCOMB_DENSITY, HoneycombSpec, c1_estimate, compact, covered_fraction,
                              disc_box_area, honeycomb_in_region, lowest_n, staggered_rows)

from oracles import c1_two_discs_grid


def test_thin_region_is_empty():
    assert len(honeycomb_in_region(HoneycombSpec(0.25), Box((0.0, 0.0), (10.0, 0.4)))) == 0


def test_honeycomb_distances_and_order():
    pts = honeycomb_in_region(HoneycombSpec(0.25, (0.25 + 1e-9, 0.25 + 1e-9)), Box((0.0, 0.0), (8.0, 8.0)))
    diff = pts[:, None] - pts[None]
    d = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 0.5 - 1e-12
    assert d.min() == pytest.approx(0.5, abs=1e-12)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    np.testing.assert_array_equal(order, np.arange(len(pts)))


def test_honeycomb_anchor_and_count_limit():
    pts = honeycomb_in_region(HoneycombSpec(0.5), Box((-3.0, -3.0), (3.0, 3.0)))
    assert np.any(np.all(pts == 0.0, axis=1))
    assert len(honeycomb_in_region(HoneycombSpec(0.5), Box((-3.0, -3.0), (3.0, 3.0)), count_limit=5)) == 5


def test_honeycomb_in_cylinder_needs_a_limit():
    with pytest.raises(ValueError):
        honeycomb_in_region(HoneycombSpec(0.1), HalfCylinder(1.0))
    pts = honeycomb_in_region(HoneycombSpec(0.1, (0.1 + 1e-9, -0.9 + 1e-9)), HalfCylinder(1.0), count_limit=30)
    assert len(pts) == 30


def test_honeycomb_translation_invariance_on_a_strip():
    rho = 0.2
    pts = honeycomb_in_region(HoneycombSpec(rho), Box((-50.0, 0.0), (50.0, 4.0)))
    win = lambda p, lo: p[(p[:, 0] >= lo) & (p[:, 0] < lo + 10.0)]  # noqa: E731
    a = win(pts, 0.037)  # window edges off the lattice
    b = win(pts, 0.037 + 2 * rho) - [2 * rho, 0.0]
    key = lambda p: sorted(map(tuple, np.round(p, 9)))  # noqa: E731
    assert key(a) == key(b)


def test_disc_box_area():
    assert disc_box_area((0.0, 0.0), 1.0, (-2, -2), (2, 2)) == pytest.approx(math.pi)
    assert disc_box_area((0.0, 0.0), 1.0, (0, -2), (2, 2)) == pytest.approx(math.pi / 2)
    assert disc_box_area((0.0, 0.0), 1.0, (0, 0), (2, 2)) == pytest.approx(math.pi / 4)


def test_covered_fraction_close_to_density():
    r = 0.25
    pts = honeycomb_in_region(HoneycombSpec(r, (r, r)), Box((-2 * r, -2 * r), (10 + 2 * r, 10 + 2 * r)))
    assert covered_fraction(pts, r, (0, 0), (10, 10)) == pytest.approx(HONEYCOMB_DENSITY, rel=0.01)


def test_lowest_n():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (50, 2))
    full = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    np.testing.assert_array_equal(lowest_n(pts, 50), full)
    np.testing.assert_array_equal(lowest_n(pts, 7), full[:7])
    ties = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(lowest_n(ties, 1), [[0.0, -1.0]])
    with pytest.raises(ValueError):
        lowest_n(pts, 51)


def test_c1_single_disc_is_its_radius():
    spec = ModelSpec([0.2], [1.0], HalfCylinder(1.0))
    assert c1_estimate(spec, restarts=1).value == pytest.approx(0.2, abs=1e-6)


def test_c1_two_discs_matches_grid():
    spec = ModelSpec([0.3, 0.3], [1.0, 1.0], HalfCylinder(1.0))
    est = c1_estimate(spec, restarts=2)
    assert est.value == pytest.approx(c1_two_discs_grid(0.3, 1.0), abs=1e-2)
    assert min(est.restart_values) == pytest.approx(c1_two_discs_grid(0.3, 1.0), abs=1e-2)
    assert is_valid(spec, est.argmin)


def test_c1_monotone_in_restarts_and_argmin_valid():
    spec = ModelSpec(np.full(5, 0.3), np.ones(5), HalfCylinder(1.0))
    vals = []
    for k in (1, 2, 3):
        est = c1_estimate(spec, restarts=k, sweeps_per_stage=300, seed=4)
        assert is_valid(spec, est.argmin)
        assert weighted_cm(spec, est.argmin) == pytest.approx(est.value)
        vals.append(est.value)
    assert vals[0] >= vals[1] >= vals[2]


def test_compact_drops_a_floating_disc():
    spec = ModelSpec([0.1, 0.1], [1.0, 1.0], HalfCylinder(1.0))
    out = compact(spec, Configuration([[0.5, 0.0], [2.0, 0.05]]))
    assert out.centers[0, 0] == pytest.approx(0.1, abs=1e-9)
    assert np.linalg.norm(out.centers[1] - out.centers[0]) == pytest.approx(0.2, abs=1e-9)


def test_staggered_rows_are_valid():
    for n, rho in ((50, 0.08), (7, 0.3), (20, 0.1)):
        spec = ModelSpec(np.full(n, rho), np.ones(n), HalfCylinder(1.0))
        assert is_valid(spec, Configuration(staggered_rows(n, rho, 1.0)))
    assert staggered_rows(3, 1.2, 1.0) is None
