"""Bounded AoD and user-location uncertainty sets, samplers and worst-case oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SystemParams, linearized_aar, nonlinear_aar, path_gain

MAX_ALPHA = 0.5


@dataclass(frozen=True)
class AoDUncertainty:
    theta_bar: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= MAX_ALPHA):
            raise ValueError(f"AoD bound must lie in [0, {MAX_ALPHA}], got {self.alpha}")


@dataclass(frozen=True)
class LocationUncertainty:
    r_bar: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("location uncertainty radius must be nonnegative")
        object.__setattr__(self, "r_bar", (float(self.r_bar[0]), float(self.r_bar[1])))


@dataclass(frozen=True)
class TrueRealization:
    """Per-user AoD offsets and 2-D location offsets (shape (K,) and (K, 2))."""

    delta_theta: np.ndarray
    delta_r: np.ndarray


def sample_disk(rng: np.random.Generator, radius, size: int) -> np.ndarray:
    """Uniform points on disks of the given radii (scalar or length ``size``)."""
    rad = np.broadcast_to(np.asarray(radius, dtype=float), (size,))
    u = rng.random(size)
    phi = rng.random(size) * 2.0 * math.pi
    rr = rad * np.sqrt(u)
    return np.stack([rr * np.cos(phi), rr * np.sin(phi)], axis=-1)


def sample_realization(seed, aod: list[AoDUncertainty], loc: list[LocationUncertainty]) -> TrueRealization:
    """Draw one true realization uniformly from the uncertainty sets."""
    rng = np.random.default_rng(seed)
    alphas = np.array([a.alpha for a in aod])
    dtheta = (2.0 * rng.random(len(aod)) - 1.0) * alphas
    dr = sample_disk(rng, [l.radius for l in loc], len(loc))
    return TrueRealization(dtheta, dr)


def worst_case_distance_sq(r0_xy, loc: LocationUncertainty, altitude: float) -> float:
    """max over the disk of the squared UAV-user distance; attained on the far boundary."""
    off = math.hypot(r0_xy[0] - loc.r_bar[0], r0_xy[1] - loc.r_bar[1])
    return (off + loc.radius) ** 2 + altitude ** 2


def worst_case_offset(r0_xy, loc: LocationUncertainty) -> np.ndarray:
    """Location offset achieving :func:`worst_case_distance_sq` (away from the UAV)."""
    v = np.asarray(loc.r_bar) - np.asarray(r0_xy, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        return np.array([loc.radius, 0.0])
    return loc.radius * v / n


def location_grid(radius: float, n_dirs: int = 64) -> np.ndarray:
    """Center plus ``n_dirs`` equally spaced boundary points of a disk."""
    phi = 2.0 * math.pi * np.arange(n_dirs) / n_dirs
    ring = radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return np.vstack([np.zeros((1, 2)), ring])


def worst_case_sinr_oracle(w, position, aod: list[AoDUncertainty], loc: list[LocationUncertainty],
                           params: SystemParams, model: str = "linearized",
                           n_theta: int = 101, n_dirs: int = 64) -> np.ndarray:
    """Per-user minimum SINR over a grid of the uncertainty sets.

    ``w`` holds the beamformers as rows (K, N_T); ``position`` is the UAV x-y.
    AoD offsets span [-alpha_k, alpha_k] with endpoints; locations span the
    disk center and ``n_dirs`` boundary directions.
    """
    if w is None or position is None:
        raise ValueError("oracle needs solved beamformers and a UAV position")
    if model not in ("linearized", "nonlinear"):
        raise ValueError(f"unknown AAR model {model!r}")
    aar = linearized_aar if model == "linearized" else nonlinear_aar
    w = np.atleast_2d(np.asarray(w))
    r0 = np.asarray(position, dtype=float)
    sigma2 = params.sigma2
    out = np.empty(len(aod))
    for k, (a_unc, l_unc) in enumerate(zip(aod, loc)):
        dth = np.linspace(-a_unc.alpha, a_unc.alpha, n_theta) if a_unc.alpha > 0 else np.zeros(1)
        A = np.stack([aar(a_unc.theta_bar, t, params) for t in dth])
        g = np.abs(A.conj() @ w.T) ** 2
        sig = g[:, k]
        intf = g.sum(axis=1) - sig
        pts = np.asarray(l_unc.r_bar) + location_grid(l_unc.radius, n_dirs if l_unc.radius > 0 else 0)
        d2 = np.sum((pts - r0) ** 2, axis=1) + params.altitude ** 2
        gain = path_gain(d2, params)
        s = (gain[None, :] * sig[:, None]) / (gain[None, :] * intf[:, None] + sigma2[k])
        out[k] = s.min()
    return out


def realized_sinr(w, position, theta_bar, realization: TrueRealization, r_bar,
                  params: SystemParams, model: str = "nonlinear") -> np.ndarray:
    """SINR of every user at one concrete realization of the uncertainties."""
    aar = linearized_aar if model == "linearized" else nonlinear_aar
    w = np.atleast_2d(np.asarray(w))
    r0 = np.asarray(position, dtype=float)
    out = np.empty(len(theta_bar))
    for k in range(len(theta_bar)):
        a = aar(theta_bar[k], realization.delta_theta[k], params)
        g = np.abs(a.conj() @ w.T) ** 2
        xy = np.asarray(r_bar[k]) + realization.delta_r[k]
        gain = path_gain(float(np.sum((xy - r0) ** 2)) + params.altitude ** 2, params)
        out[k] = gain * g[k] / (gain * (g.sum() - g[k]) + params.sigma2[k])
    return out


@dataclass(frozen=True)
class Scenario:
    """Estimates known to the UAV plus the hidden truth used for evaluation."""

    uav_xy: tuple[float, float]
    aod: tuple[AoDUncertainty, ...]
    loc: tuple[LocationUncertainty, ...]
    truth: TrueRealization | None = None

    def __post_init__(self):
        if len(self.aod) != len(self.loc):
            raise ValueError("AoD and location sets must cover the same users")
        object.__setattr__(self, "aod", tuple(self.aod))
        object.__setattr__(self, "loc", tuple(self.loc))

    @property
    def n_users(self) -> int:
        return len(self.aod)

    @property
    def theta_bar(self) -> np.ndarray:
        return np.array([a.theta_bar for a in self.aod])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([a.alpha for a in self.aod])

    @property
    def r_bar(self) -> np.ndarray:
        return np.array([l.r_bar for l in self.loc])

    @property
    def radius(self) -> np.ndarray:
        return np.array([l.radius for l in self.loc])

    def nominal(self) -> "Scenario":
        """Same estimates with both uncertainty bounds set to zero."""
        return Scenario(self.uav_xy,
                        tuple(AoDUncertainty(a.theta_bar, 0.0) for a in self.aod),
                        tuple(LocationUncertainty(l.r_bar, 0.0) for l in self.loc),
                        self.truth)
