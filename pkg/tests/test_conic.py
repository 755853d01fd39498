import json
import math

import numpy as np
import pytest

from uavbeam.conic import (AllocationSolution, INFEASIBLE, ProblemOptions, RankWarning, assemble,
                           derealify_matrix, dump_problem, extract_beamformers, kkt_diagnostics,
                           realify, realify_matrix, smat, solve, svec, to_standard_form)
from uavbeam.geometry import SystemParams, steering_vector
from uavbeam.uncertainty import AoDUncertainty, LocationUncertainty, Scenario, worst_case_sinr_oracle
from uavbeam.verify import closed_form_instance, random_psd, random_scenario

HALF_WAVE_SEP = 0.5 * 299_792_458.0 / 2.4e9


def _instances(n, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        K, N = (2, 3)[i % 2], (4, 6)[(i // 2) % 2]
        rho, D = (0.01, 0.05)[(i // 4) % 2], (10.0, 20.0)[i % 2]
        out.append((random_scenario(rng, K, rho, D), SystemParams(n_antennas=N, n_users=K)))
    return out


@pytest.fixture(scope="module")
def solved():
    res = []
    for sc, p in _instances(8):
        prob = assemble(sc, p)
        sol, rep = solve(prob, warn_rank=False)
        res.append((sc, p, prob, sol, rep))
    return res


def test_variable_and_block_counts():
    sc = Scenario((0, 0), (AoDUncertainty(1.0, 0.05),), (LocationUncertainty((10, 0), 5.0),))
    prob = assemble(sc, SystemParams(n_antennas=2, n_users=1))
    assert prob.n_variables == 10
    rng = np.random.default_rng(0)
    prob = assemble(random_scenario(rng, 3, 0.05, 20.0), SystemParams(n_antennas=6, n_users=3))
    assert prob.n_variables == 122
    assert len(prob.blocks) == 6 + 3 + 2 * 3 + 3 + 2 * 3
    assert all(0 <= i < prob.n_variables for b in prob.blocks for i, _ in b.variable_maps)


def test_realify_examples():
    W = np.array([[1, 1j], [-1j, 1]])
    R = realify_matrix(W)
    assert np.allclose(np.sort(np.linalg.eigvalsh(R)), [0, 0, 2, 2], atol=1e-12)
    X = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(realify_matrix(X), np.block([[X, 0 * X], [0 * X, X]]))


def test_realify_round_trip_and_trace():
    rng = np.random.default_rng(1)
    for n in (2, 3, 6):
        W = random_psd(rng, n) + 1j * 0
        W = W - 0.3 * np.trace(W).real * np.eye(n) / n
        back = derealify_matrix(realify_matrix(W))
        assert np.abs(back - W).max() <= 1e-10
        assert np.abs(back - back.conj().T).max() <= 1e-10
        assert np.trace(realify_matrix(W)) == pytest.approx(2 * np.trace(W).real)


def test_svec_preserves_inner_product():
    rng = np.random.default_rng(2)
    A, B = rng.standard_normal((2, 5, 5))
    A, B = A + A.T, B + B.T
    assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B))
    assert np.allclose(smat(svec(A), 5), A)


def test_realified_problem_has_only_real_blocks():
    sc, p = _instances(1)[0]
    prob = realify(assemble(sc, p, ProblemOptions(c2a_form="hermitian")))
    assert all(b.field == "real" for b in prob.blocks)
    sf = to_standard_form(prob)
    assert sf.A.shape[1] == prob.n_variables


def test_closed_form_single_user():
    scenario, params, expected = closed_form_instance()
    sol, rep = solve(assemble(scenario, params))
    assert sol.optimal
    assert sol.objective == pytest.approx(expected, rel=1e-3)
    assert expected == pytest.approx(2.53e-6, rel=1e-3)
    assert np.linalg.norm(sol.position) < 1e-3
    assert np.sum(np.abs(sol.w) ** 2) == pytest.approx(np.trace(sol.W[0]).real, rel=1e-6)


def _two_orthogonal_users(xy1, xy2):
    params = SystemParams(n_antennas=2, n_users=2, antenna_sep=HALF_WAVE_SEP, gamma_margin_db=0.0)
    sc = Scenario((0.0, 0.0), (AoDUncertainty(math.pi / 2, 0.0), AoDUncertainty(0.0, 0.0)),
                  (LocationUncertainty(xy1, 0.0), LocationUncertainty(xy2, 0.0)))
    return sc, params


@pytest.mark.parametrize("xy1, xy2", [((0.0, 0.0), (0.0, 0.0)), ((-50.0, 0.0), (50.0, 0.0))])
def test_orthogonal_users_decouple(xy1, xy2):
    sc, p = _two_orthogonal_users(xy1, xy2)
    a1, a2 = steering_vector(math.pi / 2, p), steering_vector(0.0, p)
    assert np.allclose(a1, [1, 1]) and np.allclose(a2, [1, -1])
    sol, _ = solve(assemble(sc, p))
    assert sol.optimal
    unit = p.gamma_req[0] * p.sigma2[0] / (p.rho_const * 2)
    # the midpoint minimizes the sum of squared distances
    mid = 0.5 * (np.array(xy1) + np.array(xy2))
    d2 = [np.sum((np.array(q) - mid) ** 2) + 100.0 ** 2 for q in (xy1, xy2)]
    assert sol.objective == pytest.approx(unit * sum(d2), rel=1e-6)
    # brute force over the position on a fine grid confirms the optimum
    xs = np.linspace(-60, 60, 241)
    brute = min(unit * sum(np.sum((np.array(q) - (x, 0)) ** 2) + 1e4 for q in (xy1, xy2)) for x in xs)
    assert sol.objective <= brute * (1 + 1e-6)


def test_cap_makes_problem_infeasible():
    scenario, params, expected = closed_form_instance()
    # with C1 the largest deliverable power is N * P_i = 0.4 W
    limit = 0.4 / expected * params.gamma_req[0]
    ok, _ = solve(assemble(scenario, params.replace(sinr_req=0.9 * limit)))
    assert ok.optimal and ok.objective == pytest.approx(0.36, rel=1e-4)
    bad, _ = solve(assemble(scenario, params.replace(sinr_req=1.1 * limit)))
    assert bad.status == INFEASIBLE
    free, _ = solve(assemble(scenario, params.replace(sinr_req=1.1 * limit), ProblemOptions(include_c1=False)))
    assert free.optimal and free.objective == pytest.approx(0.44, rel=1e-4)


def test_extract_examples():
    sol = AllocationSolution("optimal", W=[np.array([[1, 1j], [-1j, 1]])])
    w, ratio = extract_beamformers(sol)
    assert np.allclose(w[0], [1, -1j]) and ratio[0] < 1e-12
    p = SystemParams(n_antennas=4)
    a = steering_vector(1.0, p)
    sol = AllocationSolution("optimal", W=[2.0 * np.outer(a, a.conj()) / 4])
    w, _ = extract_beamformers(sol)
    assert np.allclose(np.outer(w[0], w[0].conj()), 2.0 * np.outer(a, a.conj()) / 4)
    assert abs(w[0][0].imag) < 1e-12 and w[0][0].real >= 0


def test_rank_warning():
    sol = AllocationSolution("optimal", W=[np.diag([1.0, 0.5])])
    with pytest.warns(RankWarning):
        extract_beamformers(sol)


def test_rank_one_gap_and_residuals(solved):
    n_opt = 0
    for sc, p, prob, sol, rep in solved:
        if not sol.optimal:
            continue
        n_opt += 1
        assert np.all(sol.rank_ratio <= 1e-5)
        assert sol.duality_gap <= 1e-7
        assert sol.max_residual <= 1e-7
        assert rep.primal_objective >= rep.dual_objective - 1e-7 * abs(rep.primal_objective)
        for W, w in zip(sol.W, sol.w):
            assert np.trace(W).real == pytest.approx(np.sum(np.abs(w) ** 2), rel=1e-6)
        total = sum(sol.W)
        assert np.all(np.diag(total).real <= p.caps * (1 + 1e-8))
    assert n_opt >= 5


def test_solutions_pass_linearized_oracle(solved):
    for sc, p, prob, sol, rep in solved:
        if not sol.optimal:
            continue
        s = worst_case_sinr_oracle(sol.w, sol.position, sc.aod, sc.loc, p, "linearized")
        assert np.all(s >= p.design_sinr() * (1 - 1e-6))


def test_kkt_conditions(solved):
    for sc, p, prob, sol, rep in solved:
        if not sol.optimal:
            continue
        kkt = kkt_diagnostics(prob, sol, rep)
        assert kkt.available
        assert kkt.passes(), kkt
        assert np.all(np.abs(kkt.nu_max - 1) <= 1e-4)


def test_kkt_unavailable_for_infeasible():
    scenario, params, expected = closed_form_instance()
    prob = assemble(scenario, params.replace(sinr_req=1e12))
    sol, rep = solve(prob)
    assert not kkt_diagnostics(prob, sol, rep).available


def test_adding_caps_never_lowers_power(solved):
    for sc, p, prob, sol, rep in solved[:4]:
        free, _ = solve(assemble(sc, p, ProblemOptions(include_c1=False)), warn_rank=False)
        if sol.optimal:
            assert free.optimal
            assert free.objective <= sol.objective * (1 + 1e-6)


def test_dump_is_deterministic_and_parses():
    sc, p = _instances(1)[0]
    a, b = dump_problem(assemble(sc, p)), dump_problem(assemble(sc, p))
    assert a == b
    doc = json.loads(a)
    assert doc["format"] == "uavbeam-conic/1"
    assert len(doc["variables"]) == len(doc["objective"])
    names = {blk["name"] for blk in doc["blocks"]}
    assert {"C1[0]", "C2a[0]", "C2b[0]", "epi[0]", "C3[0]", "delta[0]", "mu[0]"} <= names


def test_clarabel_backend_agrees_on_closed_form():
    scenario, params, expected = closed_form_instance()
    sol, _ = solve(assemble(scenario, params), backend="clarabel")
    assert sol.optimal
    assert sol.objective == pytest.approx(expected, rel=1e-3)


def test_mismatched_users_rejected():
    scenario, params, _ = closed_form_instance()
    with pytest.raises(ValueError):
        assemble(scenario, params.replace(n_users=2))
