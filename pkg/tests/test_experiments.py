import io
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from uavbeam.conic import INFEASIBLE
from uavbeam.experiments import (CSV_FIELDS, ConfigError, ExperimentConfig, ExperimentRecord, SweepPoint,
                                 aggregate, config_from_dict, generate_scenario, load_config, read_csv,
                                 records_to_csv, run_point, sweep_points)
from uavbeam.geometry import watts_to_dbm

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _small(**kw):
    base = dict(realizations=3, schemes=["proposed", "zf"], oracle_theta=21, oracle_dirs=16)
    base.update(kw)
    return ExperimentConfig(**base)


def test_scenario_is_deterministic():
    cfg = ExperimentConfig(seed=3)
    pt = cfg.base_point()
    a, b = generate_scenario(cfg, pt, 5), generate_scenario(cfg, pt, 5)
    assert a.uav_xy == b.uav_xy and a.aod == b.aod and a.loc == b.loc
    assert np.array_equal(a.truth.delta_r, b.truth.delta_r)
    assert generate_scenario(cfg, pt, 6).loc != a.loc


def test_radial_distribution_is_uniform_disk():
    cfg = ExperimentConfig(n_users=10_000, radius=0.0, rho=[0.0])
    sc = generate_scenario(cfg, cfg.base_point(), 0)
    r = np.hypot(*(sc.r_bar + sc.truth.delta_r).T)
    ks = stats.kstest(r, lambda x: np.clip(x / 500.0, 0, 1) ** 2).statistic
    assert ks < 0.02


def test_truth_inside_uncertainty_sets():
    cfg = ExperimentConfig(rho=[0.1], radius=20.0)
    for i in range(20):
        sc = generate_scenario(cfg, cfg.base_point(), i)
        assert np.all(np.hypot(*sc.truth.delta_r.T) <= 20.0)
        assert np.all(np.abs(sc.truth.delta_theta) <= sc.alpha)
        assert np.allclose(sc.uav_xy, sc.r_bar.mean(axis=0))
        assert np.allclose(sc.alpha, 0.1 * np.abs(sc.theta_bar))


def test_mismatch_puts_truth_outside():
    cfg = ExperimentConfig(radius=20.0, mismatch=True)
    sc = generate_scenario(cfg, cfg.base_point(), 0)
    assert np.all(np.hypot(*sc.truth.delta_r.T) >= 20.0)


def test_zero_uncertainty_estimates_are_truth():
    cfg = ExperimentConfig(rho=[0.0], radius=0.0)
    sc = generate_scenario(cfg, cfg.base_point(), 2)
    assert np.all(sc.truth.delta_r == 0) and np.all(sc.truth.delta_theta == 0)


def test_radius_sweep_uses_same_estimates():
    cfg = ExperimentConfig()
    pts = sweep_points(cfg, "radius")
    scs = [generate_scenario(cfg, p, 4) for p in pts]
    assert all(np.array_equal(s.r_bar, scs[0].r_bar) for s in scs)


def test_single_user_closed_form_every_realization():
    cfg = _small(n_users=1, n_antennas=4, rho=[0.0], radius=0.0, gamma_margin_db=0.0,
                 schemes=["proposed"], realizations=5)
    params = cfg.params(cfg.base_point())
    for rec in run_point(cfg, cfg.base_point()):
        assert rec.success
        # the UAV starts above the estimate and the optimum keeps it there
        expected = params.gamma_req[0] * params.sigma2[0] * params.altitude ** 2 / (params.rho_const * 4)
        assert rec.total_power_w == pytest.approx(expected, rel=1e-3)
        assert rec.lin_margin_db >= -1e-6


def test_records_are_consistent():
    recs = run_point(_small(), SweepPoint(0.05, 10.0, 20.0, 6))
    assert len(recs) == 6
    assert [r.scheme for r in recs[:2]] == ["proposed", "zf"]
    for r in recs:
        if r.success:
            assert abs(r.total_power_dbm - watts_to_dbm(r.total_power_w)) <= 1e-9


def test_identical_runs_give_identical_csv():
    cfg = _small(schemes=["proposed", "nonrobust"], realizations=2)
    pts = sweep_points(cfg, "rho")[:2]
    a = records_to_csv(run_point(cfg, pts[0]) + run_point(cfg, pts[1]))
    b = records_to_csv(run_point(cfg, pts[0]) + run_point(cfg, pts[1]))
    assert a == b
    assert a.splitlines()[0].split(",") == [c for c in CSV_FIELDS if c != "solve_time"]


def test_csv_round_trip():
    recs = run_point(_small(realizations=2), SweepPoint(0.01, 8.0, 10.0, 6))
    text = records_to_csv(recs, timing=True)
    back = read_csv(io.StringIO(text))
    assert records_to_csv(back, timing=True) == text
    assert len(text.splitlines()) == len(recs) + 1


def _rec(power, status="optimal", scheme="proposed", i=0, ok=True):
    return ExperimentRecord(scheme, 0.05, 10.0, 20.0, 6, i, status, total_power_w=power,
                            total_power_dbm=watts_to_dbm(power) if power > 0 else math.nan,
                            rank_ratio_max=0.0, nl_pass=ok)


def test_aggregate_averages_watts():
    (row,) = aggregate([_rec(1e-3, i=0), _rec(3e-3, i=1)])
    assert row.mean_power_w == pytest.approx(2e-3)
    assert row.mean_power_dbm == pytest.approx(3.0103, abs=1e-4)
    assert row.nl_pass_rate == 1.0 and row.count == 2


def test_aggregate_all_infeasible():
    (row,) = aggregate([_rec(math.nan, INFEASIBLE, i=i) for i in range(3)])
    assert row.nl_pass_rate == 0 and math.isnan(row.mean_power_dbm)
    assert row.n_infeasible == 3 and row.n_success == 0


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(0)
    recs = [_rec(float(p), scheme=s, i=i, ok=bool(i % 2))
            for i, p in enumerate(rng.uniform(1e-4, 1e-2, 12)) for s in ("zf", "proposed")]
    ref = aggregate(recs)
    for _ in range(5):
        perm = [recs[j] for j in rng.permutation(len(recs))]
        assert aggregate(perm) == ref


def test_aggregate_empty_raises():
    with pytest.raises(ValueError):
        aggregate([])


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown field 'bogus'"):
        config_from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="seed"):
        config_from_dict({"seed": "seven"})
    with pytest.raises(ConfigError):
        config_from_dict({"realizations": 0})
    with pytest.raises(ConfigError):
        config_from_dict({"schemes": ["proposed", "slnr"]})
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = 1\nrho = = 3\nradius = 2\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_config_overrides(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("seed = 1\nrealizations = 4\n")
    cfg = load_config(f, seed=9, realizations=None)
    assert cfg.seed == 9 and cfg.realizations == 4


def test_shipped_configs_load():
    cfg = load_config(CONFIGS / "default.toml")
    assert cfg.seed == 7 and cfg.rho == [0.01, 0.05, 0.10]
    assert load_config(CONFIGS / "single_user.toml").n_users == 1


@pytest.mark.xfail(strict=True, reason="the back-off is tuned to the sampled truth, so it is often cheaper; see ledger")
def test_nonrobust_usually_needs_more_power():
    cfg = load_config(CONFIGS / "default.toml", realizations=30, schemes=["proposed", "nonrobust"],
                      oracle_theta=11, oracle_dirs=8)
    recs = run_point(cfg, SweepPoint(0.05, 10.0, 20.0, 6))
    by = {}
    for r in recs:
        by.setdefault(r.realization, {})[r.scheme] = r
    pairs = [(g["proposed"], g["nonrobust"]) for g in by.values() if g["proposed"].success]
    higher = sum(n.status == "outage" or (n.success and n.total_power_w >= p.total_power_w) for p, n in pairs)
    assert higher >= 0.95 * len(pairs)
