"""Assembly and solution of the relaxed robust beamforming SDP.

The program is kept in a solver-neutral form (a list of :class:`LmiBlock`
constraints over real scalar variables) and converted to the standard conic
form ``min c^T x  s.t.  b - A x in K`` right before solving. ``K`` is a
product of zero, nonnegative and PSD cones, with PSD blocks vectorized as the
column-wise upper triangle and off-diagonals scaled by sqrt(2).
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import SystemParams, taylor_terms
from .lmi import (BeamMap, LmiBlock, Scaling, SlackIndex, build_c2a_lmi, build_c2b_lmi,
                  hermitian_basis)
from .uncertainty import Scenario

RANK_TOL = 1e-5
ACCEPT_TOL = 1e-7

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


class RankWarning(UserWarning):
    """Relaxed solution is not rank one within tolerance."""


class InvalidProblemError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemOptions:
    include_c1: bool = True
    c2a_form: str = "real"
    apply_margin: bool = True


@dataclass
class RobustProblem:
    """Relaxed robust program over real scalar variables.

    ``beams[k]`` expresses W_k (in ``scaling.power`` units) as
    ``sum x[i] * B_i``; ``u_mats[k]`` is the matrix the AoD block of user k
    projects onto (``[a1, a_bar]``, or ``[a_bar]`` when the AoD bound is 0).
    """

    variables: list[str]
    objective: np.ndarray
    blocks: list[LmiBlock]
    beams: list[BeamMap]
    position: tuple[int, int]
    slacks: list[SlackIndex]
    scaling: Scaling
    gamma: np.ndarray
    u_mats: list[np.ndarray]
    n_antennas: int
    fixed_directions: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return len(self.beams)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def block(self, name: str) -> LmiBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def beam_matrices(self, x) -> list[np.ndarray]:
        """W_k in physical watts for a variable assignment ``x``."""
        out = []
        for beam in self.beams:
            W = sum(x[i] * B for i, B in beam)
            out.append(self.scaling.power * W)
        return out


def _validate(scenario: Scenario, params: SystemParams):
    if scenario.n_users != params.n_users:
        raise InvalidProblemError(f"scenario has {scenario.n_users} users, params expect {params.n_users}")
    if np.any(params.gamma_req <= 0):
        raise InvalidProblemError("required SINR must be positive")


def assemble(scenario: Scenario, params: SystemParams, options: ProblemOptions = ProblemOptions(),
             directions: np.ndarray | None = None) -> RobustProblem:
    """Build the relaxed program for one scenario.

    With ``directions`` (rows are unit beam directions) each W_k is restricted
    to ``p_k * d_k d_k^H`` and the PSD constraint reduces to ``p_k >= 0``.
    """
    _validate(scenario, params)
    K, N = params.n_users, params.n_antennas
    gamma = params.design_sinr() if options.apply_margin else params.gamma_req
    scaling = Scaling.for_params(params, gamma)
    names: list[str] = []
    beams: list[BeamMap] = []
    if directions is None:
        basis = hermitian_basis(N)
        labels = [f"{i}{i}" for i in range(N)]
        labels += [f"re{i}{j}" for i in range(N) for j in range(i + 1, N)]
        labels += [f"im{i}{j}" for i in range(N) for j in range(i + 1, N)]
        for k in range(K):
            beams.append([(len(names) + i, B) for i, B in enumerate(basis)])
            names += [f"W{k}[{lab}]" for lab in labels]
    else:
        directions = np.asarray(directions, dtype=complex)
        if directions.shape != (K, N):
            raise InvalidProblemError(f"directions must have shape {(K, N)}")
        for k in range(K):
            d = directions[k]
            beams.append([(len(names), np.outer(d, d.conj()))])
            names.append(f"p{k}")
    pos = (len(names), len(names) + 1)
    names += ["ux", "uy"]
    slacks = []
    for k in range(K):
        base = len(names)
        slacks.append(SlackIndex(base, base + 1, base + 2, base + 3))
        names += [f"eta{k}", f"delta{k}", f"mu{k}", f"t{k}"]

    c = np.zeros(len(names))
    for beam in beams:
        for i, B in beam:
            c[i] = float(np.trace(B).real)

    blocks: list[LmiBlock] = []
    if options.include_c1:
        caps = params.caps / scaling.power
        for i in range(N):
            maps = []
            for beam in beams:
                for idx, B in beam:
                    if abs(B[i, i]) > 0:
                        maps.append((idx, -np.array([[B[i, i].real]])))
            blocks.append(LmiBlock(f"C1[{i}]", np.array([[caps[i]]]), tuple(maps)))

    u_mats = []
    for k in range(K):
        a0, a1 = taylor_terms(scenario.aod[k].theta_bar, params)
        alpha = scenario.aod[k].alpha
        u_mats.append(a0[:, None] if alpha == 0 else np.column_stack([a1, a0]))
        blocks.append(build_c2a_lmi(k, beams, slacks[k], a0, a1, alpha, gamma[k],
                                    scaling.eta_unit[k] / scaling.power, options.c2a_form))
    for k in range(K):
        main, epi = build_c2b_lmi(k, pos, slacks[k], scenario.loc[k].r_bar,
                                  scenario.loc[k].radius, scaling)
        blocks += [main, epi]
    for k, beam in enumerate(beams):
        if directions is None:
            blocks.append(LmiBlock(f"C3[{k}]", np.zeros((N, N), dtype=complex), tuple(beam),
                                   field="complex"))
        else:
            blocks.append(LmiBlock(f"C3[{k}]", np.zeros((1, 1)), ((beam[0][0], np.ones((1, 1))),)))
    one = np.ones((1, 1))
    for k in range(K):
        dkind = "zero" if scenario.aod[k].alpha == 0 else "psd"
        mkind = "zero" if scenario.loc[k].radius == 0 else "psd"
        blocks.append(LmiBlock(f"delta[{k}]", np.zeros((1, 1)), ((slacks[k].delta, one),), kind=dkind))
        blocks.append(LmiBlock(f"mu[{k}]", np.zeros((1, 1)), ((slacks[k].mu, one),), kind=mkind))

    return RobustProblem(names, c, blocks, beams, pos, slacks, scaling, np.asarray(gamma), u_mats, N,
                         None if directions is None else directions)


# --- real embedding -------------------------------------------------------

def realify_matrix(W: np.ndarray) -> np.ndarray:
    """Hermitian ``X + jY`` to the real symmetric ``[[X, -Y], [Y, X]]``."""
    X, Y = W.real, W.imag
    return np.block([[X, -Y], [Y, X]])


def derealify_matrix(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`realify_matrix` (averages the redundant copies)."""
    n = R.shape[0] // 2
    X = 0.5 * (R[:n, :n] + R[n:, n:])
    Y = 0.5 * (R[n:, :n] - R[:n, n:])
    return X + 1j * Y


def embedding_adjoint(Z: np.ndarray) -> np.ndarray:
    """Hermitian T with ``<Z, realify(S)> = Re tr(T S)`` for all Hermitian S."""
    n = Z.shape[0] // 2
    return (Z[:n, :n] + Z[n:, n:]) + 1j * (Z[n:, :n] - Z[:n, n:])


def realify_block(block: LmiBlock) -> LmiBlock:
    if block.field == "real":
        return block
    maps = tuple((i, realify_matrix(m)) for i, m in block.variable_maps)
    return LmiBlock(block.name, realify_matrix(block.constant), maps, field="real", kind=block.kind)


def realify(problem: RobustProblem) -> RobustProblem:
    """Copy of ``problem`` with every complex Hermitian block embedded as a real one.

    Variables are already real coordinates of the Hermitian matrices, so the
    objective ``sum tr(W_k)`` (half the trace of the embeddings) is unchanged.
    """
    out = RobustProblem(**problem.__dict__)
    out.blocks = [realify_block(b) for b in problem.blocks]
    return out


# --- standard form ----------------------------------------------------------

def svec_indices(n: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(n) for i in range(j + 1)]


def svec(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    r2 = math.sqrt(2.0)
    return np.array([M[i, j] if i == j else r2 * M[i, j] for i, j in svec_indices(n)])


def smat(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    r2 = math.sqrt(2.0)
    for val, (i, j) in zip(v, svec_indices(n)):
        if i == j:
            M[i, i] = val
        else:
            M[i, j] = M[j, i] = val / r2
    return M


@dataclass
class StandardForm:
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list[tuple[str, int]]
    rows: list[slice]


def to_standard_form(problem: RobustProblem) -> StandardForm:
    real = realify(problem)
    n = real.n_variables
    rows, cols, vals, b = [], [], [], []
    cones, slices = [], []
    r = 0
    for blk in real.blocks:
        d = blk.dimension
        vec = (lambda M: M.ravel()) if blk.kind == "zero" else svec
        bv = vec(blk.constant)
        m = len(bv)
        for idx, C in blk.variable_maps:
            col = -vec(C)
            nz = np.flatnonzero(col)
            rows.extend(r + nz)
            cols.extend([idx] * len(nz))
            vals.extend(col[nz])
        b.extend(bv)
        if blk.kind == "zero":
            cones.append(("zero", m))
        elif d == 1:
            cones.append(("nonneg", 1))
        else:
            cones.append(("psd", d))
        slices.append(slice(r, r + m))
        r += m
    A = sp.csc_matrix((vals, (rows, cols)), shape=(r, n))
    return StandardForm(real.objective.copy(), A, np.array(b, dtype=float), cones, slices)


# --- solving ----------------------------------------------------------------

@dataclass
class ConicSolveReport:
    iterations: int
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    solve_time: float
    raw_status: str
    duals: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def duality_gap(self) -> float:
        p, d = self.primal_objective, self.dual_objective
        return abs(p - d) / max(abs(p), abs(d), 1e-300)


@dataclass
class AllocationSolution:
    status: str
    W: list[np.ndarray] | None = None
    w: np.ndarray | None = None
    position: np.ndarray | None = None
    eta: np.ndarray | None = None
    delta: np.ndarray | None = None
    mu: np.ndarray | None = None
    t: np.ndarray | None = None
    objective: float = math.nan
    rank_ratio: np.ndarray | None = None
    duality_gap: float = math.nan
    max_residual: float = math.nan
    x: np.ndarray | None = None
    powers: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def constraint_residual(problem: RobustProblem, x) -> float:
    """Largest violation over all blocks, relative to each block's scale."""
    worst = 0.0
    for blk in problem.blocks:
        M = blk.evaluate(x)
        scale = max(1.0, float(np.abs(M).max()))
        if blk.kind == "zero":
            v = float(np.abs(M).max())
        else:
            v = max(0.0, -float(np.linalg.eigvalsh(M).min()))
        worst = max(worst, v / scale)
    return worst


def _solve_clarabel(problem: RobustProblem, tolerance: float, max_iter: int):
    import clarabel

    sf = to_standard_form(problem)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = tolerance
    cones = []
    for kind, size in sf.cones:
        if kind == "zero":
            cones.append(clarabel.ZeroConeT(size))
        elif kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(size))
        else:
            cones.append(clarabel.PSDTriangleConeT(size))
    P = sp.csc_matrix((problem.n_variables, problem.n_variables))
    res = clarabel.DefaultSolver(P, sf.c, sf.A, sf.b, cones, settings).solve()
    raw = str(res.status)
    z = np.asarray(res.z)
    duals = {}
    for blk, (kind, size), sl in zip(realify(problem).blocks, sf.cones, sf.rows):
        duals[blk.name] = smat(z[sl], size) if kind == "psd" else z[sl].reshape(blk.dimension, blk.dimension)
    if raw in ("Solved", "AlmostSolved"):
        status = OPTIMAL
    elif raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = INFEASIBLE
    else:
        status = NUMERICAL_FAILURE
    return (status, raw, np.asarray(res.x), duals, int(res.iterations), float(res.obj_val),
            float(res.obj_val_dual), float(res.r_prim), float(res.r_dual))


def _cvxopt_once(problem: RobustProblem, real_blocks, tolerance: float, max_iter: int):
    from cvxopt import matrix, solvers

    n = problem.n_variables
    lin, psd, eq = [], [], []
    for blk in real_blocks:
        d = blk.dimension
        G = np.zeros((d * d, n))
        for i, m in blk.variable_maps:
            G[:, i] -= m.ravel(order="F")
        h = blk.constant.ravel(order="F")
        if blk.kind == "zero":
            eq.append((blk, -G, h))
        elif d == 1:
            lin.append((blk, G, h))
        else:
            psd.append((blk, G, h))
    G = np.vstack([g for _, g, _ in lin + psd])
    h = np.concatenate([v for _, _, v in lin + psd])
    dims = {"l": len(lin), "q": [], "s": [b.dimension for b, _, _ in psd]}
    kw = {}
    if eq:
        kw = {"A": matrix(np.vstack([g for _, g, _ in eq])), "b": matrix(np.concatenate([v for _, _, v in eq]))}
    opts = {"show_progress": False, "abstol": tolerance, "reltol": tolerance,
            "feastol": tolerance, "maxiters": max_iter}
    res = solvers.conelp(matrix(problem.objective), matrix(G), matrix(h), dims, options=opts, **kw)
    duals = {}
    if res["z"] is not None:
        z = np.asarray(res["z"]).ravel()
        r = 0
        for blk, g, _ in lin + psd:
            m = g.shape[0]
            d = blk.dimension
            # only the lower triangle of an 's' block is meaningful
            Z = np.tril(z[r:r + m].reshape(d, d, order="F"))
            duals[blk.name] = Z + np.tril(Z, -1).T
            r += m
    if res["y"] is not None and eq:
        y = np.asarray(res["y"]).ravel()
        r = 0
        for blk, g, _ in eq:
            m = g.shape[0]
            duals[blk.name] = y[r:r + m].reshape(blk.dimension, blk.dimension)
            r += m
    return res, duals


def _solve_cvxopt(problem: RobustProblem, tolerance: float, max_iter: int):
    real_blocks = realify(problem).blocks
    fallback = None
    # conelp can stall or break down when pushed past attainable accuracy;
    # relax the tolerance and retry, keeping a stalled iterate only if it
    # passes an independent residual and gap check
    for tol in (tolerance, 10 * tolerance, 100 * tolerance):
        try:
            res, duals = _cvxopt_once(problem, real_blocks, tol, max_iter)
        except (ArithmeticError, ValueError):
            continue
        raw = res["status"]
        x = None if res["x"] is None else np.asarray(res["x"]).ravel()
        pobj, dobj = res.get("primal objective"), res.get("dual objective")
        out = [raw, x, duals, int(res["iterations"]),
               math.nan if pobj is None else float(pobj), math.nan if dobj is None else float(dobj),
               float(res.get("primal infeasibility") or 0.0), float(res.get("dual infeasibility") or 0.0)]
        if raw == "optimal" and x is not None:
            gap = abs(out[4] - out[5]) / max(abs(out[4]), abs(out[5]), 1e-300)
            if gap <= ACCEPT_TOL:
                return (OPTIMAL, *out)
        if raw == "primal infeasible":
            return (INFEASIBLE, *out)
        if fallback is None and x is not None and pobj is not None and dobj is not None:
            gap = abs(pobj - dobj) / max(abs(pobj), abs(dobj), 1e-300)
            if gap <= ACCEPT_TOL and constraint_residual(problem, x) <= ACCEPT_TOL:
                fallback = out
    if fallback is not None:
        return (OPTIMAL, *fallback)
    return NUMERICAL_FAILURE, "breakdown", None, {}, 0, math.nan, math.nan, math.nan, math.nan


BACKENDS = {"cvxopt": _solve_cvxopt, "clarabel": _solve_clarabel}


def solve(problem: RobustProblem, tolerance: float = 1e-8, max_iter: int = 60,
          backend: str = "cvxopt", warn_rank: bool = True) -> tuple[AllocationSolution, ConicSolveReport]:
    """Solve the relaxed program; infeasibility is a status, not an exception."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    t0 = time.perf_counter()
    status, raw, x, duals, its, pobj, dobj, pres, dres = BACKENDS[backend](problem, tolerance, max_iter)
    report = ConicSolveReport(its, pobj, dobj, pres, dres, time.perf_counter() - t0, raw, duals)
    if status != OPTIMAL:
        return AllocationSolution(status), report
    sol = _unpack(problem, x, report)
    if sol.max_residual > ACCEPT_TOL:
        sol.status = NUMERICAL_FAILURE
        return sol, report
    sol.w, sol.rank_ratio = extract_beamformers(sol, warn=warn_rank)
    return sol, report


def _unpack(problem: RobustProblem, x: np.ndarray, report: ConicSolveReport) -> AllocationSolution:
    sc = problem.scaling
    W = problem.beam_matrices(x)
    W = [0.5 * (M + M.conj().T) for M in W]
    sl = problem.slacks
    sol = AllocationSolution(
        OPTIMAL, W=W,
        position=sc.length * x[list(problem.position)],
        eta=np.array([x[s.eta] for s in sl]) * sc.eta_unit,
        delta=np.array([x[s.delta] for s in sl]),
        mu=np.array([x[s.mu] for s in sl]),
        t=np.array([x[s.t] for s in sl]) * sc.length ** 2,
        objective=float(problem.objective @ x) * sc.power,
        duality_gap=report.duality_gap,
        max_residual=constraint_residual(problem, x),
        x=x,
    )
    if problem.fixed_directions is not None:
        sol.powers = np.array([x[beam[0][0]] for beam in problem.beams]) * sc.power
    return sol


def extract_beamformers(solution: AllocationSolution, warn: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Principal-eigenvector beamformers and eigenvalue ratios lambda_2 / lambda_1.

    Each beamformer is phase-normalized so its first nonzero entry is real and
    nonnegative.
    """
    if solution.W is None:
        raise ValueError("solution carries no beamforming matrices")
    ws, ratios = [], []
    for k, W in enumerate(solution.W):
        lam, V = np.linalg.eigh(0.5 * (W + W.conj().T))
        l1 = max(lam[-1], 0.0)
        v = V[:, -1]
        nz = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
        if len(nz):
            ph = v[nz[0]] / abs(v[nz[0]])
            v = v / ph
        ws.append(math.sqrt(l1) * v)
        ratio = max(lam[-2], 0.0) / l1 if len(lam) > 1 and l1 > 0 else 0.0
        ratios.append(ratio)
        if warn and ratio > RANK_TOL:
            warnings.warn(f"user {k}: relaxed beamformer has rank ratio {ratio:.2e}", RankWarning,
                          stacklevel=2)
    return np.array(ws), np.array(ratios)


# --- KKT diagnostics --------------------------------------------------------

@dataclass
class KktDiagnostics:
    available: bool
    notice: str = ""
    min_c1_dual: float = math.nan
    min_eig_Y: np.ndarray | None = None
    min_eig_T: np.ndarray | None = None
    slackness: np.ndarray | None = None
    slackness_product: np.ndarray | None = None
    stationarity: np.ndarray | None = None
    nu_max: np.ndarray | None = None

    def passes(self, tol: float = 1e-6, nu_tol: float = 1e-4) -> bool:
        """All checks within tolerance; slackness uses the trace form."""
        if not self.available:
            return False
        return bool(
            (math.isnan(self.min_c1_dual) or self.min_c1_dual >= -tol)
            and np.all(self.min_eig_Y >= -tol) and np.all(self.min_eig_T >= -tol)
            and np.all(self.slackness <= tol) and np.all(self.stationarity <= tol)
            and np.all(np.abs(self.nu_max - 1.0) <= nu_tol)
        )


def kkt_diagnostics(problem: RobustProblem, solution: AllocationSolution,
                    report: ConicSolveReport) -> KktDiagnostics:
    """Dual-side checks of the relaxed program at an optimum.

    For each user k the stationarity condition reads ``Y_k = I - Delta_k`` with

        Delta_k = U_k T_k U_k^H - sum_{r != k} gamma_r U_r T_r U_r^H - Xi

    where ``T_k`` is the multiplier of the AoD block, ``Y_k`` that of
    ``W_k >= 0`` and ``Xi`` the diagonal of per-antenna multipliers. At a
    nonzero optimum the largest eigenvalue of ``Delta_k`` equals one.

    Complementary slackness is reported twice: ``slackness`` is
    ``tr(Y_k W_k) / (||Y_k|| ||W_k||)``, which an interior-point method drives
    to the duality gap; ``slackness_product`` is ``||Y_k W_k|| / ||W_k||``,
    which only decays like the square root of the gap.
    All quantities are in solver units (objective sum tr(W_k) in microwatts).
    """
    if problem.fixed_directions is not None:
        return KktDiagnostics(False, "fixed-direction problems carry no matrix multipliers")
    if not solution.optimal or not report.duals:
        return KktDiagnostics(False, "no dual multipliers available")
    K, N = problem.n_users, problem.n_antennas
    d = report.duals
    c1 = [float(d[f"C1[{i}]"][0, 0]) for i in range(N) if f"C1[{i}]" in d]
    Xi = np.diag(c1) if c1 else np.zeros((N, N))
    T = []
    for k in range(K):
        Z = d[f"C2a[{k}]"]
        blk = problem.block(f"C2a[{k}]")
        T.append(embedding_adjoint(Z) if blk.field == "complex" else Z.astype(complex))
    Y = [embedding_adjoint(d[f"C3[{k}]"]) for k in range(K)]
    Wsol = [W / problem.scaling.power for W in solution.W]
    slack, prod, stat, nu, ey = [], [], [], [], []
    for k in range(K):
        Dk = problem.u_mats[k] @ T[k] @ problem.u_mats[k].conj().T - Xi
        for r in range(K):
            if r != k:
                Dk = Dk - problem.gamma[r] * problem.u_mats[r] @ T[r] @ problem.u_mats[r].conj().T
        Dk = 0.5 * (Dk + Dk.conj().T)
        Yk = 0.5 * (Y[k] + Y[k].conj().T)
        stat.append(float(np.linalg.norm(Yk - (np.eye(N) - Dk), 2)))
        nu.append(float(np.linalg.eigvalsh(Dk).max()))
        ey.append(float(np.linalg.eigvalsh(Yk).min()))
        nW = max(np.linalg.norm(Wsol[k], 2), 1e-300)
        prod.append(float(np.linalg.norm(Yk @ Wsol[k], 2) / nW))
        slack.append(abs(float(np.trace(Yk @ Wsol[k]).real)) / (nW * max(np.linalg.norm(Yk, 2), 1e-300)))
    eT = np.array([float(np.linalg.eigvalsh(0.5 * (t + t.conj().T)).min()) for t in T])
    return KktDiagnostics(True, "", min(c1) if c1 else math.nan, np.array(ey), eT,
                          np.array(slack), np.array(prod), np.array(stat), np.array(nu))


# --- serialization ----------------------------------------------------------

def _mat_json(M: np.ndarray):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return {"re": M.real.tolist(), "im": M.imag.tolist()}
    return {"re": M.tolist()}


def dump_problem(problem: RobustProblem) -> str:
    """JSON serialization of the program in physical-to-solver scaled units."""
    doc = {
        "format": "uavbeam-conic/1",
        "sense": "minimize",
        "variables": problem.variables,
        "objective": problem.objective.tolist(),
        "scaling": {
            "power_watts_per_unit": problem.scaling.power,
            "length_meters_per_unit": problem.scaling.length,
            "eta_watts_per_unit": list(map(float, problem.scaling.eta_unit)),
        },
        "blocks": [
            {
                "name": b.name,
                "kind": b.kind,
                "field": b.field,
                "dimension": b.dimension,
                "constant": _mat_json(b.constant),
                "terms": [{"variable": i, "coefficient": _mat_json(m)} for i, m in b.variable_maps],
            }
            for b in problem.blocks
        ],
    }
    return json.dumps(doc, indent=1)
