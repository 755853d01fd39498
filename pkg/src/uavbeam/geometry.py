"""Line-of-sight channel model for a ULA-equipped UAV at fixed altitude.

Angles are in radians, distances in meters, powers in watts (linear).
The array axis is the global x-axis; AoDs are measured from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate geometry (coincident UAV and user)."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts / 1e-3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemParams:
    """Physical constants and limits of the downlink.

    Per-user quantities (``noise_power``, ``sinr_req``) and the per-antenna
    cap accept either a scalar or a sequence; they are broadcast to arrays of
    length ``n_users`` / ``n_antennas``.
    """

    n_antennas: int = 6
    n_users: int = 3
    carrier_freq: float = 2.4e9
    bandwidth: float = 200e3
    antenna_sep: float = 6.25e-2
    altitude: float = 100.0
    noise_power: float | tuple = dbm_to_watts(-110.0)
    per_antenna_cap: float | tuple = dbm_to_watts(20.0)
    sinr_req: float | tuple = db_to_linear(10.0)
    gamma_margin_db: float = 0.3

    wavelength: float = field(init=False)
    rho_const: float = field(init=False)

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_users < 1:
            raise ValueError("need at least one antenna and one user")
        if self.carrier_freq <= 0 or self.antenna_sep <= 0 or self.altitude <= 0:
            raise ValueError("carrier frequency, antenna spacing and altitude must be positive")
        lam = SPEED_OF_LIGHT / self.carrier_freq
        object.__setattr__(self, "wavelength", lam)
        object.__setattr__(self, "rho_const", (lam / (4.0 * math.pi)) ** 2)
        for name, n in (("noise_power", self.n_users), ("sinr_req", self.n_users),
                        ("per_antenna_cap", self.n_antennas)):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,))
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} must be finite and positive")
            object.__setattr__(self, name, tuple(float(v) for v in arr))
        if not math.isfinite(self.gamma_margin_db):
            raise ValueError("gamma_margin_db must be finite")

    @property
    def spacing_ratio(self) -> float:
        """Antenna separation in wavelengths, b / lambda_c."""
        return self.antenna_sep / self.wavelength

    @property
    def sigma2(self) -> np.ndarray:
        return np.asarray(self.noise_power)

    @property
    def gamma_req(self) -> np.ndarray:
        return np.asarray(self.sinr_req)

    @property
    def caps(self) -> np.ndarray:
        return np.asarray(self.per_antenna_cap)

    def design_sinr(self) -> np.ndarray:
        """SINR targets inflated by the design margin (dB added in the log domain)."""
        return self.gamma_req * db_to_linear(self.gamma_margin_db)

    def replace(self, **changes) -> "SystemParams":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__
              if self.__dataclass_fields__[f].init}
        kw.update(changes)
        return SystemParams(**kw)


def _phase_index(params: SystemParams) -> np.ndarray:
    return 2.0 * math.pi * params.spacing_ratio * np.arange(params.n_antennas)


def steering_vector(theta: float, params: SystemParams) -> np.ndarray:
    """Array response a(theta): entries exp(-j 2 pi (b/lambda) n cos theta)."""
    return np.exp(-1j * _phase_index(params) * math.cos(theta))


def taylor_terms(theta_bar: float, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Zeroth and first order terms of a(theta) around ``theta_bar``."""
    a0 = steering_vector(theta_bar, params)
    a1 = 1j * _phase_index(params) * math.sin(theta_bar) * a0
    return a0, a1


def nonlinear_aar(theta_bar: float, delta_theta: float, params: SystemParams) -> np.ndarray:
    return steering_vector(theta_bar + delta_theta, params)


def linearized_aar(theta_bar: float, delta_theta: float, params: SystemParams) -> np.ndarray:
    a0, a1 = taylor_terms(theta_bar, params)
    return a0 + a1 * delta_theta


def curvature_bound(theta_bar: float, params: SystemParams) -> float:
    """Upper bound on sup_theta ||d^2 a / d theta^2||_2 near any angle.

    Per entry, |d^2/dtheta^2 exp(-j c_n cos theta)| <= c_n^2 + c_n with
    c_n = 2 pi (b/lambda) n. ``theta_bar`` is accepted for signature symmetry.
    """
    c = _phase_index(params)
    return float(np.sqrt(np.sum((c ** 2 + c) ** 2)))


def distance(r0, rk) -> float:
    d = float(np.linalg.norm(np.asarray(r0, dtype=float) - np.asarray(rk, dtype=float)))
    if d < MIN_DISTANCE:
        raise GeometryError("UAV and user positions coincide")
    return d


def channel_vector(r0, rk, theta: float, params: SystemParams) -> np.ndarray:
    """h = sqrt(rho) / ||r0 - rk|| * a(theta)."""
    return math.sqrt(params.rho_const) / distance(r0, rk) * steering_vector(theta, params)


def path_gain(d2: float, params: SystemParams) -> float:
    """Power gain rho / d^2 for squared distance ``d2``."""
    return params.rho_const / d2


def sinr(k: int, beamformers, h_k, sigma2: float) -> float:
    """SINR of user k: |h^H w_k|^2 / (sum_{r != k} |h^H w_r|^2 + sigma2)."""
    w = np.atleast_2d(np.asarray(beamformers))
    g = np.abs(np.conj(h_k) @ w.T) ** 2
    return float(g[k] / (g.sum() - g[k] + sigma2))


def aod_from_geometry(r0, rk) -> float:
    """AoD measured from the array (x) axis, in [0, pi]."""
    r0 = np.asarray(r0, dtype=float)
    rk = np.asarray(rk, dtype=float)
    d = distance(r0, rk)
    return math.acos(max(-1.0, min(1.0, (rk[0] - r0[0]) / d)))


def uav_position(xy, altitude: float) -> np.ndarray:
    return np.array([xy[0], xy[1], altitude], dtype=float)


def user_position(xy) -> np.ndarray:
    return np.array([xy[0], xy[1], 0.0], dtype=float)
