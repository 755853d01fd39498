import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavbeam.geometry import SystemParams, taylor_terms
from uavbeam.uncertainty import (AoDUncertainty, LocationUncertainty, Scenario, TrueRealization,
                                 location_grid, realized_sinr, sample_disk, sample_realization,
                                 worst_case_distance_sq, worst_case_offset, worst_case_sinr_oracle)


def test_bounds_validated():
    with pytest.raises(ValueError):
        AoDUncertainty(1.0, -0.1)
    with pytest.raises(ValueError):
        AoDUncertainty(1.0, 0.6)
    with pytest.raises(ValueError):
        LocationUncertainty((0, 0), -1.0)
    with pytest.raises(ValueError):
        Scenario((0, 0), (AoDUncertainty(1.0, 0.1),), ())


def test_disk_second_moment():
    pts = sample_disk(np.random.default_rng(0), 20.0, 200_000)
    assert np.all(np.hypot(*pts.T) <= 20.0)
    # E|x|^2 = D^2 / 2 for a uniform disk
    assert np.mean(np.sum(pts ** 2, axis=1)) == pytest.approx(200.0, rel=0.02)


def test_sampled_realization_in_sets():
    aod = [AoDUncertainty(1.0, 0.05), AoDUncertainty(2.0, 0.1)]
    loc = [LocationUncertainty((0, 0), 10.0), LocationUncertainty((50, 5), 20.0)]
    for seed in range(50):
        tr = sample_realization(seed, aod, loc)
        assert np.all(np.abs(tr.delta_theta) <= [0.05, 0.1])
        assert np.all(np.hypot(*tr.delta_r.T) <= [10.0, 20.0])
    a, b = sample_realization(3, aod, loc), sample_realization(3, aod, loc)
    assert np.array_equal(a.delta_theta, b.delta_theta) and np.array_equal(a.delta_r, b.delta_r)


def test_worst_case_distance_example():
    loc = LocationUncertainty((30.0, 40.0), 20.0)
    assert worst_case_distance_sq((0.0, 0.0), loc, 100.0) == pytest.approx(14900.0)


@pytest.mark.parametrize("seed", range(5))
def test_worst_case_distance_matches_boundary_sampling(seed):
    rng = np.random.default_rng(seed)
    loc = LocationUncertainty(tuple(rng.uniform(-200, 200, 2)), rng.uniform(1, 40))
    r0 = rng.uniform(-200, 200, 2)
    phi = rng.uniform(0, 2 * math.pi, 10_000)
    pts = np.array(loc.r_bar) + loc.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    d2 = np.sum((pts - r0) ** 2, axis=1) + 100.0 ** 2
    closed = worst_case_distance_sq(r0, loc, 100.0)
    assert d2.max() <= closed * (1 + 1e-12)
    assert d2.max() == pytest.approx(closed, rel=1e-6)
    # argmax points away from the UAV
    best = pts[np.argmax(d2)] - np.array(loc.r_bar)
    assert np.allclose(best, worst_case_offset(r0, loc), atol=loc.radius * 2e-3)


def test_location_grid_shape():
    g = location_grid(10.0, 64)
    assert g.shape == (65, 2)
    assert np.allclose(g[0], 0) and np.allclose(np.hypot(*g[1:].T), 10.0)


def _toy(alpha=0.05, radius=20.0, n=4):
    p = SystemParams(n_antennas=n, n_users=2)
    aod = (AoDUncertainty(1.2, alpha), AoDUncertainty(2.0, alpha))
    loc = (LocationUncertainty((40.0, 0.0), radius), LocationUncertainty((-60.0, 30.0), radius))
    rng = np.random.default_rng(1)
    w = 1e-3 * (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
    w[0] += 3e-3 * taylor_terms(1.2, p)[0]
    w[1] += 3e-3 * taylor_terms(2.0, p)[0]
    return p, aod, loc, w


def test_oracle_grid_convergence():
    p, aod, loc, w = _toy()
    coarse = worst_case_sinr_oracle(w, (0, 0), aod, loc, p, "nonlinear", n_theta=101)
    fine = worst_case_sinr_oracle(w, (0, 0), aod, loc, p, "nonlinear", n_theta=1001)
    assert np.all(np.abs(coarse - fine) <= 1e-3 * fine)
    assert np.all(fine <= coarse * (1 + 1e-12))


def test_oracle_monotone_in_set_size():
    p, aod, loc, w = _toy()
    base = worst_case_sinr_oracle(w, (0, 0), aod, loc, p)
    p2, aod2, loc2, _ = _toy(alpha=0.1)
    assert np.all(worst_case_sinr_oracle(w, (0, 0), aod2, loc, p) <= base * (1 + 1e-12))
    _, _, loc3, _ = _toy(radius=40.0)
    assert np.all(worst_case_sinr_oracle(w, (0, 0), aod, loc3, p) <= base * (1 + 1e-12))


def test_oracle_bounded_by_realizations():
    p, aod, loc, w = _toy()
    oracle = worst_case_sinr_oracle(w, (5, -5), aod, loc, p, "nonlinear", n_theta=1001, n_dirs=256)
    sc = Scenario((5.0, -5.0), aod, loc)
    for seed in range(30):
        tr = sample_realization(seed, aod, loc)
        s = realized_sinr(w, (5, -5), sc.theta_bar, tr, sc.r_bar, p)
        assert np.all(s >= oracle * (1 - 1e-3))


def test_oracle_rejects_missing_solution():
    p, aod, loc, _ = _toy()
    with pytest.raises(ValueError):
        worst_case_sinr_oracle(None, (0, 0), aod, loc, p)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_nominal_scenario_drops_bounds(a1, a2):
    sc = Scenario((0.0, 0.0), (AoDUncertainty(1.0, a1), AoDUncertainty(2.0, a2)),
                  (LocationUncertainty((1, 1), 3.0), LocationUncertainty((2, 2), 4.0)),
                  TrueRealization(np.zeros(2), np.zeros((2, 2))))
    nom = sc.nominal()
    assert np.all(nom.alpha == 0) and np.all(nom.radius == 0)
    assert np.array_equal(nom.theta_bar, sc.theta_bar) and nom.truth is sc.truth
