"""Comparison schemes: fixed-direction beamforming (ZF, MRT) and the non-robust design."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import AllocationSolution, ConicSolveReport, ProblemOptions, assemble, solve
from .geometry import SystemParams, steering_vector
from .uncertainty import Scenario, TrueRealization, realized_sinr

TAU_MAX = 1e6


class RankDeficiencyError(ValueError):
    """Estimated user directions are linearly dependent; ZF is undefined."""


def estimated_responses(scenario: Scenario, params: SystemParams) -> np.ndarray:
    """Rows are the estimated array responses a(theta_bar_k)."""
    return np.array([steering_vector(a.theta_bar, params) for a in scenario.aod])


def zf_directions(a_bar: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Unit directions orthogonal to every other user's estimated response.

    Each direction is the normalized projection of the user's own response onto
    the orthogonal complement of the others' span.
    """
    a_bar = np.atleast_2d(np.asarray(a_bar, dtype=complex))
    K, N = a_bar.shape
    if K > N:
        raise RankDeficiencyError(f"{K} users cannot be nulled with {N} antennas")
    out = np.empty_like(a_bar)
    for k in range(K):
        others = np.delete(a_bar, k, axis=0).T
        v = a_bar[k]
        if others.shape[1]:
            Q, R = np.linalg.qr(others)
            if np.abs(np.diag(R)).min() <= tol * np.linalg.norm(others):
                raise RankDeficiencyError("other users' responses are linearly dependent")
            v = v - Q @ (Q.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv <= tol * np.linalg.norm(a_bar[k]):
            raise RankDeficiencyError(f"user {k} shares an estimated direction with other users")
        out[k] = v / nv
    return out


def mrt_directions(a_bar: np.ndarray) -> np.ndarray:
    a_bar = np.atleast_2d(np.asarray(a_bar, dtype=complex))
    return a_bar / np.linalg.norm(a_bar, axis=1, keepdims=True)


def solve_fixed_direction(scheme: str, scenario: Scenario, params: SystemParams,
                          include_c1: bool = False, **solve_kw) -> tuple[AllocationSolution, ConicSolveReport]:
    """Optimize per-user powers and UAV position for fixed ZF or MRT directions."""
    a_bar = estimated_responses(scenario, params)
    if scheme == "zf":
        dirs = zf_directions(a_bar)
    elif scheme == "mrt":
        dirs = mrt_directions(a_bar)
    else:
        raise ValueError(f"unknown fixed-direction scheme {scheme!r}")
    problem = assemble(scenario, params, ProblemOptions(include_c1=include_c1), directions=dirs)
    sol, report = solve(problem, **solve_kw)
    if sol.optimal:
        sol.w = np.sqrt(np.maximum(sol.powers, 0.0))[:, None] * dirs
    return sol, report


def min_common_scaling(w, position, theta_bar, truth: TrueRealization, r_bar, params: SystemParams,
                       tau_max: float = TAU_MAX, rtol: float = 1e-10) -> float:
    """Smallest tau in [1, tau_max] such that sqrt(tau) * w meets every SINR target.

    Bisection on the actual (nonlinear, true-location) SINRs; returns ``inf``
    when even ``tau_max`` does not suffice.
    """
    target = params.gamma_req

    def ok(tau):
        return bool(np.all(realized_sinr(math.sqrt(tau) * np.asarray(w), position, theta_bar, truth,
                                          r_bar, params) >= target))

    if ok(1.0):
        return 1.0
    if not ok(tau_max):
        return math.inf
    lo, hi = 1.0, tau_max
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class NonRobustResult:
    solution: AllocationSolution
    report: ConicSolveReport
    tau: float
    final_power: float
    scaling_mode: str = "common"

    @property
    def outage(self) -> bool:
        return math.isinf(self.tau)


def solve_nonrobust(scenario: Scenario, params: SystemParams, truth: TrueRealization | None = None,
                    include_c1: bool = True, **solve_kw) -> NonRobustResult:
    """Design for the estimates as if exact, then scale up against the truth."""
    truth = truth if truth is not None else scenario.truth
    if truth is None:
        raise ValueError("non-robust evaluation needs the true realization")
    problem = assemble(scenario.nominal(), params, ProblemOptions(include_c1=include_c1, apply_margin=False))
    sol, report = solve(problem, **solve_kw)
    if not sol.optimal:
        return NonRobustResult(sol, report, math.nan, math.nan)
    tau = min_common_scaling(sol.w, sol.position, scenario.theta_bar, truth, scenario.r_bar, params)
    return NonRobustResult(sol, report, tau, tau * float(np.sum(np.abs(sol.w) ** 2)))
