"""Monte-Carlo evaluation: scenario generation, per-point runs, aggregation and CSV I/O."""
from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import groupby

import numpy as np

from .baselines import RankDeficiencyError, solve_fixed_direction, solve_nonrobust
from .conic import INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, ProblemOptions, assemble, solve
from .geometry import (SystemParams, aod_from_geometry, db_to_linear, dbm_to_watts, uav_position,
                       user_position, watts_to_dbm)
from .uncertainty import (AoDUncertainty, LocationUncertainty, Scenario, TrueRealization,
                          realized_sinr, worst_case_sinr_oracle)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMES = ("proposed", "zf", "mrt", "nonrobust")
OUTAGE = "outage"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    realizations: int = 100
    cell_radius: float = 500.0
    n_users: int = 3
    n_antennas: int = 6
    rho: list = field(default_factory=lambda: [0.01, 0.05, 0.10])
    radius: float = 20.0
    radius_list: list = field(default_factory=lambda: [10.0, 20.0, 40.0])
    sinr_db: float = 10.0
    sinr_list_db: list = field(default_factory=lambda: [6.0, 8.0, 10.0, 12.0])
    gamma_margin_db: float = 0.3
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    drop_c1_everywhere: bool = False
    oracle_theta: int = 101
    oracle_dirs: int = 64
    mismatch: bool = False
    c2a_form: str = "real"
    jobs: int = 1
    # physical parameters
    carrier_freq: float = 2.4e9
    bandwidth: float = 200e3
    antenna_sep: float = 6.25e-2
    altitude: float = 100.0
    noise_dbm: float = -110.0
    cap_dbm: float = 20.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if any(r < 0 for r in self.rho):
            raise ConfigError("rho values must be nonnegative")
        if self.radius < 0 or any(d < 0 for d in self.radius_list):
            raise ConfigError("location uncertainty radii must be nonnegative")
        for name in ("sinr_db", "gamma_margin_db", "noise_dbm", "cap_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not all(math.isfinite(x) for x in self.sinr_list_db):
            raise ConfigError("sinr_list_db values must be finite")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"schemes must be a nonempty subset of {SCHEMES}, got {self.schemes}")
        if self.c2a_form not in ("real", "hermitian"):
            raise ConfigError("c2a_form must be 'real' or 'hermitian'")
        if self.n_users < 1 or self.n_antennas < 1:
            raise ConfigError("need at least one user and one antenna")

    def params(self, point: "SweepPoint") -> SystemParams:
        return SystemParams(
            n_antennas=point.n_antennas, n_users=self.n_users, carrier_freq=self.carrier_freq,
            bandwidth=self.bandwidth, antenna_sep=self.antenna_sep, altitude=self.altitude,
            noise_power=dbm_to_watts(self.noise_dbm), per_antenna_cap=dbm_to_watts(self.cap_dbm),
            sinr_req=db_to_linear(point.sinr_db), gamma_margin_db=self.gamma_margin_db,
        )

    def base_point(self) -> "SweepPoint":
        return SweepPoint(self.rho[0] if self.rho else 0.0, self.sinr_db, self.radius, self.n_antennas)


@dataclass(frozen=True, order=True)
class SweepPoint:
    rho: float
    sinr_db: float
    radius: float
    n_antennas: int


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a TOML config; unknown keys and bad types raise :class:`ConfigError`."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return config_from_dict(raw, source=str(path), **overrides)


def config_from_dict(raw: dict, source: str = "<config>", **overrides) -> ExperimentConfig:
    raw = dict(raw)
    raw.pop("scenario", None)
    known = {f.name: f for f in fields(ExperimentConfig)}
    kw = {}
    for key, val in raw.items():
        if key not in known:
            raise ConfigError(f"{source}: unknown field {key!r}")
        default = getattr(ExperimentConfig(), key)
        if isinstance(default, bool):
            ok = isinstance(val, bool)
        elif isinstance(default, int):
            ok = isinstance(val, int) and not isinstance(val, bool)
        elif isinstance(default, float):
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
            val = float(val) if ok else val
        elif isinstance(default, list):
            ok = isinstance(val, list)
        else:
            ok = isinstance(val, type(default))
        if not ok:
            raise ConfigError(f"{source}: field {key!r} expects {type(default).__name__}, got {val!r}")
        kw[key] = val
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


# --- scenarios --------------------------------------------------------------

def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def generate_scenario(config: ExperimentConfig, point: SweepPoint, index: int) -> Scenario:
    """Random users in the cell plus estimates, AoD bounds and hidden truth.

    The random draws depend only on ``(seed, index)``; the sweep point only
    scales them, so every sweep point sees the same underlying realization.
    Estimated positions are uniform on the cell disk and do not depend on the
    location radius, so sweeps over ``D`` compare nested uncertainty sets;
    the true position is the estimate plus a uniform offset inside the disk.
    """
    rng = realization_rng(config.seed, index)
    K = config.n_users
    r = config.cell_radius * np.sqrt(rng.random(K))
    phi = 2.0 * math.pi * rng.random(K)
    est_xy = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    u_off = rng.random(K)
    phi_off = 2.0 * math.pi * rng.random(K)
    u_theta = 2.0 * rng.random(K) - 1.0
    off_r = point.radius * np.sqrt(u_off)
    if config.mismatch:
        # on or beyond the boundary, up to twice the radius
        off_r = point.radius * (1.0 + u_off)
    offset = np.stack([off_r * np.cos(phi_off), off_r * np.sin(phi_off)], axis=-1)
    true_xy = est_xy + offset
    uav_xy = est_xy.mean(axis=0)
    uav = uav_position(uav_xy, config.altitude)
    theta_bar = np.array([aod_from_geometry(uav, user_position(q)) for q in est_xy])
    alpha = point.rho * np.abs(theta_bar)
    truth = TrueRealization(u_theta * alpha, true_xy - est_xy)
    return Scenario(
        (float(uav_xy[0]), float(uav_xy[1])),
        tuple(AoDUncertainty(float(t), float(a)) for t, a in zip(theta_bar, alpha)),
        tuple(LocationUncertainty((float(q[0]), float(q[1])), point.radius) for q in est_xy),
        truth,
    )


# --- records ----------------------------------------------------------------

@dataclass
class ExperimentRecord:
    scheme: str
    rho: float
    sinr_db: float
    radius: float
    n_antennas: int
    realization: int
    status: str
    total_power_w: float = math.nan
    total_power_dbm: float = math.nan
    rank_ratio_max: float = math.nan
    lin_margin_db: float = math.nan
    nl_worst_margin_db: float = math.nan
    nl_pass: bool = False
    tau: float = math.nan
    solve_time: float = math.nan

    def sort_key(self):
        return (self.rho, self.sinr_db, self.radius, self.n_antennas, self.realization,
                SCHEMES.index(self.scheme))

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL and math.isfinite(self.total_power_w)


CSV_FIELDS = [f.name for f in fields(ExperimentRecord)]


def _margin_db(sinr: np.ndarray, target: np.ndarray) -> float:
    ratio = float(np.min(sinr / target))
    return 10.0 * math.log10(ratio) if ratio > 0 else -math.inf


def evaluate(config: ExperimentConfig, scenario: Scenario, params: SystemParams, w, position,
             record: ExperimentRecord):
    """Fill the robustness fields of ``record`` for beamformers ``w`` at ``position``."""
    grid = dict(n_theta=config.oracle_theta, n_dirs=config.oracle_dirs)
    lin = worst_case_sinr_oracle(w, position, scenario.aod, scenario.loc, params, "linearized", **grid)
    nl = worst_case_sinr_oracle(w, position, scenario.aod, scenario.loc, params, "nonlinear", **grid)
    actual = realized_sinr(w, position, scenario.theta_bar, scenario.truth, scenario.r_bar, params)
    record.lin_margin_db = _margin_db(lin, params.gamma_req)
    record.nl_worst_margin_db = _margin_db(nl, params.gamma_req)
    record.nl_pass = bool(np.all(actual >= params.gamma_req))


def _run_scheme(scheme: str, config: ExperimentConfig, scenario: Scenario, params: SystemParams,
                point: SweepPoint, index: int) -> ExperimentRecord:
    rec = ExperimentRecord(scheme, point.rho, point.sinr_db, point.radius, point.n_antennas, index,
                           NUMERICAL_FAILURE)
    include_c1 = not config.drop_c1_everywhere
    try:
        if scheme == "proposed":
            prob = assemble(scenario, params, ProblemOptions(include_c1=include_c1, c2a_form=config.c2a_form))
            sol, rep = solve(prob, warn_rank=False)
        elif scheme in ("zf", "mrt"):
            sol, rep = solve_fixed_direction(scheme, scenario, params, include_c1=False)
        else:
            res = solve_nonrobust(scenario, params, include_c1=include_c1, warn_rank=False)
            sol, rep = res.solution, res.report
    except RankDeficiencyError:
        rec.status = INFEASIBLE
        return rec
    rec.status = sol.status
    rec.solve_time = rep.solve_time
    if not sol.optimal:
        return rec
    rec.rank_ratio_max = float(np.max(sol.rank_ratio))
    if scheme == "nonrobust":
        rec.tau = res.tau
        if res.outage:
            rec.status = OUTAGE
            return rec
        rec.total_power_w = res.final_power
        actual = realized_sinr(math.sqrt(res.tau) * sol.w, sol.position, scenario.theta_bar,
                               scenario.truth, scenario.r_bar, params)
        rec.nl_pass = bool(np.all(actual >= params.gamma_req))
    else:
        rec.total_power_w = sol.objective
        evaluate(config, scenario, params, sol.w, sol.position, rec)
    rec.total_power_dbm = watts_to_dbm(rec.total_power_w)
    return rec


def run_realization(config: ExperimentConfig, point: SweepPoint, index: int) -> list[ExperimentRecord]:
    scenario = generate_scenario(config, point, index)
    params = config.params(point)
    return [_run_scheme(s, config, scenario, params, point, index) for s in SCHEMES if s in config.schemes]


def _work(args):
    return run_realization(*args)


def run_points(config: ExperimentConfig, points: list[SweepPoint]) -> list[ExperimentRecord]:
    """All schemes on all realizations of every point, in canonical order."""
    items = [(config, p, i) for p in points for i in range(config.realizations)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_work, items, chunksize=4))
    else:
        chunks = [_work(it) for it in items]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=ExperimentRecord.sort_key)


def run_point(config: ExperimentConfig, point: SweepPoint) -> list[ExperimentRecord]:
    return run_points(config, [point])


def sweep_points(config: ExperimentConfig, kind: str) -> list[SweepPoint]:
    base = config.base_point()
    if kind == "rho":
        return [replace(base, rho=float(r)) for r in config.rho]
    if kind == "sinr":
        return [replace(base, sinr_db=float(g)) for g in config.sinr_list_db]
    if kind == "radius":
        return [replace(base, radius=float(d)) for d in config.radius_list]
    raise ValueError(f"unknown sweep {kind!r}")


# --- aggregation and CSV ----------------------------------------------------

@dataclass
class SummaryRow:
    scheme: str
    rho: float
    sinr_db: float
    radius: float
    n_antennas: int
    count: int
    n_success: int
    n_infeasible: int
    n_outage: int
    n_failed: int
    mean_power_w: float
    mean_power_dbm: float
    mean_rank_ratio: float
    nl_pass_rate: float


def aggregate(records: list[ExperimentRecord]) -> list[SummaryRow]:
    """Per (scheme, sweep point): power averaged in watts over successful runs."""
    if not records:
        raise ValueError("cannot aggregate an empty record set")

    def key(r):
        return (r.scheme, r.rho, r.sinr_db, r.radius, r.n_antennas)

    rows = []
    for k, grp in groupby(sorted(records, key=lambda r: (key(r), r.realization)), key=key):
        grp = list(grp)
        ok = [r for r in grp if r.success]
        mean_w = float(np.mean([r.total_power_w for r in ok])) if ok else math.nan
        rows.append(SummaryRow(
            *k, count=len(grp), n_success=len(ok),
            n_infeasible=sum(r.status == INFEASIBLE for r in grp),
            n_outage=sum(r.status == OUTAGE for r in grp),
            n_failed=sum(r.status == NUMERICAL_FAILURE for r in grp),
            mean_power_w=mean_w,
            mean_power_dbm=watts_to_dbm(mean_w) if ok else math.nan,
            mean_rank_ratio=float(np.mean([r.rank_ratio_max for r in ok])) if ok else math.nan,
            nl_pass_rate=(sum(r.nl_pass for r in ok) / len(grp)),
        ))
    return rows


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(records, fh, timing: bool = False):
    """Write records with a fixed header; ``solve_time`` only when ``timing``."""
    cols = CSV_FIELDS if timing else [c for c in CSV_FIELDS if c != "solve_time"]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in cols])


def records_to_csv(records, timing: bool = False) -> str:
    buf = io.StringIO()
    write_csv(records, buf, timing)
    return buf.getvalue()


def read_csv(fh) -> list[ExperimentRecord]:
    out = []
    types = {f.name: f.type for f in fields(ExperimentRecord)}
    for row in csv.DictReader(fh):
        kw = {}
        for k, v in row.items():
            t = types[k]
            if t == "bool":
                kw[k] = v == "1"
            elif t == "int":
                kw[k] = int(v)
            elif t == "float":
                kw[k] = float(v)
            else:
                kw[k] = v
        out.append(ExperimentRecord(**kw))
    return out
