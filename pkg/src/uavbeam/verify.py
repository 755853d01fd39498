"""Self-contained invariant checks, shared by ``uavbeam verify`` and the test suite."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import min_common_scaling, solve_fixed_direction, zf_directions, estimated_responses
from .conic import (ProblemOptions, assemble, derealify_matrix, realify_matrix, solve)
from .geometry import (SystemParams, curvature_bound, linearized_aar, nonlinear_aar, steering_vector,
                       taylor_terms)
from .lmi import SlackIndex, build_c2a_lmi, c2a_quadratic, hermitian_basis, verify_s_procedure
from .uncertainty import (AoDUncertainty, LocationUncertainty, Scenario, realized_sinr,
                          worst_case_distance_sq)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


# --- building blocks reused by the tests -------------------------------------

def hermitian_coords(W: np.ndarray) -> np.ndarray:
    """Coordinates of ``W`` in :func:`lmi.hermitian_basis` order."""
    n = W.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.real(np.diag(W)), W.real[iu], W.imag[iu]])


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return G @ G.conj().T / rank


def closed_form_instance(n_antennas: int = 4, distance: float = 100.0):
    """One user straight below the UAV with no uncertainty and no margin."""
    params = SystemParams(n_antennas=n_antennas, n_users=1, altitude=distance, gamma_margin_db=0.0)
    scenario = Scenario((0.0, 0.0), (AoDUncertainty(math.pi / 2, 0.0),),
                        (LocationUncertainty((0.0, 0.0), 0.0),))
    expected = params.gamma_req[0] * params.sigma2[0] * distance ** 2 / (params.rho_const * n_antennas)
    return scenario, params, expected


def random_c2a_instance(rng: np.random.Generator, params: SystemParams, n_users: int = 2,
                        backoff: float = 1e-3):
    """A C2a block with a random assignment on (or just inside) its feasibility boundary.

    Returns ``(block, x, quadratic, alpha)``; ``quadratic(dtheta)`` is the
    robust inequality in the same units.
    """
    N = params.n_antennas
    basis = hermitian_basis(N)
    nb = len(basis)
    beams = [[(r * nb + i, B) for i, B in enumerate(basis)] for r in range(n_users)]
    base = n_users * nb
    slack = SlackIndex(eta=base, delta=base + 1, mu=base + 2, t=base + 3)
    theta_bar = rng.uniform(0.3, math.pi - 0.3)
    alpha = rng.uniform(0.01, 0.2)
    gamma = rng.uniform(0.5, 3.0)
    a_bar, a_first = taylor_terms(theta_bar, params)
    W = [random_psd(rng, N, 1) * (10.0 if r == 0 else 0.1) for r in range(n_users)]
    W[0] = W[0] + np.outer(a_bar, a_bar.conj())
    M = W[0] - gamma * sum(W[1:])
    p = float(np.real(a_first.conj() @ M @ a_first))
    q = float(np.real(a_first.conj() @ M @ a_bar))
    s = float(np.real(a_bar.conj() @ M @ a_bar))
    delta = max(0.0, -p) + rng.uniform(0.1, 10.0) * (abs(p) + 1.0)
    eta = s - delta * alpha ** 2 - q ** 2 / (delta + p) - backoff * abs(s)
    block = build_c2a_lmi(0, beams, slack, a_bar, a_first, alpha, gamma, 1.0)
    x = np.zeros(base + 4)
    for r in range(n_users):
        x[r * nb:(r + 1) * nb] = hermitian_coords(W[r])
    x[slack.eta], x[slack.delta] = eta, delta

    def quadratic(dtheta):
        return c2a_quadratic(W, 0, gamma, eta, a_bar, a_first, dtheta)

    return block, x, quadratic, alpha


def random_scenario(rng: np.random.Generator, n_users: int, rho: float, radius: float,
                    cell: float = 150.0, altitude: float = 100.0) -> Scenario:
    from .geometry import aod_from_geometry, uav_position, user_position
    r = cell * np.sqrt(rng.random(n_users))
    phi = 2 * math.pi * rng.random(n_users)
    est = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    uav_xy = est.mean(axis=0)
    theta = [aod_from_geometry(uav_position(uav_xy, altitude), user_position(q)) for q in est]
    return Scenario((float(uav_xy[0]), float(uav_xy[1])),
                    tuple(AoDUncertainty(t, rho * abs(t)) for t in theta),
                    tuple(LocationUncertainty(q, radius) for q in est))


# --- checks ---------------------------------------------------------------

def check_steering(rng) -> CheckResult:
    params = SystemParams(n_antennas=8)
    err = max(float(np.abs(np.abs(steering_vector(t, params)) - 1).max())
              for t in rng.uniform(-2 * math.pi, 2 * math.pi, 200))
    return CheckResult("steering unit modulus", err <= 1e-12, f"max deviation {err:.1e}")


def check_taylor(rng) -> CheckResult:
    params = SystemParams(n_antennas=6)
    theta = 1.1
    _, a1 = taylor_terms(theta, params)
    errs = [float(np.linalg.norm((steering_vector(theta + h, params) - steering_vector(theta, params)) / h - a1))
            for h in (1e-3, 1e-4, 1e-5)]
    ratios = [errs[i + 1] / errs[i] for i in range(2)]
    ok = all(0.05 <= r <= 0.2 for r in ratios)
    return CheckResult("first-order term vs finite differences", ok,
                       "error ratios " + ", ".join(f"{r:.3f}" for r in ratios))


def check_linearization(rng) -> CheckResult:
    params = SystemParams(n_antennas=6)
    worst = 0.0
    for theta in rng.uniform(0.2, math.pi - 0.2, 20):
        alpha = 0.1 * theta
        grid = np.linspace(-alpha, alpha, 101)
        gap = max(float(np.linalg.norm(nonlinear_aar(theta, d, params) - linearized_aar(theta, d, params)))
                  for d in grid)
        worst = max(worst, gap / (0.5 * curvature_bound(theta, params) * alpha ** 2))
    return CheckResult("linearization remainder bound", worst <= 1.0, f"worst ratio to bound {worst:.3f}")


def check_worst_distance(rng) -> CheckResult:
    loc = LocationUncertainty((30.0, -40.0), 20.0)
    r0 = (0.0, 0.0)
    phi = rng.uniform(0, 2 * math.pi, 10_000)
    pts = np.array(loc.r_bar) + loc.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    sampled = float(np.max(np.sum((pts - r0) ** 2, axis=1))) + 100.0 ** 2
    closed = worst_case_distance_sq(r0, loc, 100.0)
    ok = sampled <= closed * (1 + 1e-12) and sampled >= closed * (1 - 1e-6)
    return CheckResult("worst-case distance on the disk boundary", ok, f"closed {closed:.6f} sampled {sampled:.6f}")


def check_realify(rng) -> CheckResult:
    err = 0.0
    for n in (2, 4, 6):
        W = random_psd(rng, n)
        err = max(err, float(np.abs(derealify_matrix(realify_matrix(W)) - W).max()))
    return CheckResult("real embedding round trip", err <= 1e-10, f"max error {err:.1e}")


def check_s_procedure(rng, n: int = 100) -> CheckResult:
    params = SystemParams(n_antennas=4)
    bad = 0
    for _ in range(n):
        block, x, quad, alpha = random_c2a_instance(rng, params)
        rep = verify_s_procedure(block, x, quad, np.linspace(-alpha, alpha, 201))
        bad += (not rep.lmi_feasible) + len(rep.violations)
    return CheckResult("S-procedure soundness", bad == 0, f"{n} instances, {bad} violations")


def check_closed_form(rng) -> CheckResult:
    scenario, params, expected = closed_form_instance()
    sol, _ = solve(assemble(scenario, params))
    rel = abs(sol.objective - expected) / expected if sol.optimal else math.inf
    return CheckResult("single-user closed form", rel <= 1e-3, f"objective {sol.objective:.6e} W, rel err {rel:.1e}")


def check_rank_one(rng, n: int = 6) -> CheckResult:
    worst_rank, worst_gap, solved = 0.0, 0.0, 0
    for i in range(n):
        K, N = (2, 3)[i % 2], (4, 6)[(i // 2) % 2]
        sc = random_scenario(rng, K, (0.01, 0.05)[i % 2], (10.0, 20.0)[i % 2])
        sol, _ = solve(assemble(sc, SystemParams(n_antennas=N, n_users=K)), warn_rank=False)
        if sol.optimal:
            solved += 1
            worst_rank = max(worst_rank, float(np.max(sol.rank_ratio)))
            worst_gap = max(worst_gap, sol.duality_gap)
    ok = solved > 0 and worst_rank <= 1e-5 and worst_gap <= 1e-7
    return CheckResult("rank-one optimum", ok, f"{solved} solved, max ratio {worst_rank:.1e}, max gap {worst_gap:.1e}")


def check_zf(rng) -> CheckResult:
    params = SystemParams(n_antennas=6)
    sc = random_scenario(rng, 3, 0.05, 20.0)
    a = estimated_responses(sc, params)
    d = zf_directions(a)
    leak = max(abs(a[j].conj() @ d[k]) for k in range(3) for j in range(3) if j != k)
    return CheckResult("ZF nulls other users", leak <= 1e-10, f"max leakage {leak:.1e}")


def check_dominance(rng, n: int = 3) -> CheckResult:
    params = SystemParams(n_antennas=6, n_users=3)
    worst, count = -math.inf, 0
    for _ in range(n):
        sc = random_scenario(rng, 3, 0.01, 20.0)
        prop, _ = solve(assemble(sc, params, ProblemOptions(include_c1=False)), warn_rank=False)
        for scheme in ("zf", "mrt"):
            base, _ = solve_fixed_direction(scheme, sc, params)
            if prop.optimal and base.optimal:
                count += 1
                worst = max(worst, (prop.objective - base.objective) / base.objective)
    return CheckResult("proposed <= fixed-direction power", count > 0 and worst <= 1e-6,
                       f"{count} comparisons, worst relative excess {worst:.1e}")


def check_bisection(rng) -> CheckResult:
    params = SystemParams(n_antennas=4, n_users=2, gamma_margin_db=0.0)
    from .uncertainty import TrueRealization
    sc = random_scenario(rng, 2, 0.05, 20.0)
    truth = TrueRealization(np.array([0.01, -0.02]), np.array([[5.0, 0.0], [0.0, -5.0]]))
    a = estimated_responses(sc, params)
    w = zf_directions(a) * 1e-4
    tau = min_common_scaling(w, sc.uav_xy, sc.theta_bar, truth, sc.r_bar, params)
    if not math.isfinite(tau):
        return CheckResult("minimal common scaling", True, "outage (SINR ceiling below target)")
    at = realized_sinr(math.sqrt(tau) * w, sc.uav_xy, sc.theta_bar, truth, sc.r_bar, params)
    below = realized_sinr(math.sqrt(tau * (1 - 1e-6)) * w, sc.uav_xy, sc.theta_bar, truth, sc.r_bar, params)
    ok = bool(np.all(at >= params.gamma_req)) and (tau == 1.0 or not np.all(below >= params.gamma_req))
    return CheckResult("minimal common scaling", ok, f"tau {tau:.6g}")


def run_checks(quick: bool = False, seed: int = 2024) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = [check_steering, check_taylor, check_linearization, check_worst_distance, check_realify,
              lambda g: check_s_procedure(g, 20 if quick else 100), check_closed_form,
              lambda g: check_rank_one(g, 2 if quick else 6), check_zf,
              lambda g: check_dominance(g, 1 if quick else 3), check_bisection]
    return [c(rng) for c in checks]
