"""Finite LMI forms of the semi-infinite worst-case SINR constraint.

A worst-case SINR constraint is split with a slack ``eta_k`` into an
AoD part (quadratic in the scalar AoD error) and a location part
(quadratic in the 2-D location error). Each part becomes one LMI through the
S-procedure with a nonnegative multiplier.

Units used inside the blocks: beamforming matrices in a problem-dependent
power unit (about a microwatt for typical parameters), positions
in multiples of the UAV altitude, and ``eta_k`` expressed as an equivalent
squared distance (also in altitude units). See :class:`Scaling`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SystemParams

MICROWATT = 1e-6


def _hermitian(m: np.ndarray) -> bool:
    return float(np.abs(m - m.conj().T).max()) <= 1e-12 * (1.0 + float(np.abs(m).max()))


@dataclass(frozen=True)
class LmiBlock:
    """Affine matrix constraint ``constant + sum_i x[var_i] * coeff_i``.

    ``kind`` is ``"psd"`` (the matrix is PSD; a 1x1 block is a scalar
    inequality ``>= 0``) or ``"zero"`` (the matrix vanishes).
    """

    name: str
    constant: np.ndarray
    variable_maps: tuple[tuple[int, np.ndarray], ...]
    field: str = "real"
    kind: str = "psd"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.constant))
        n = c.shape[0]
        if c.shape != (n, n):
            raise ValueError(f"{self.name}: constant must be square")
        cplx = self.field == "complex"
        dtype = complex if cplx else float
        if not cplx and np.iscomplexobj(c):
            if np.abs(c.imag).max() > 0:
                raise ValueError(f"{self.name}: complex constant in a real block")
            c = c.real
        c = c.astype(dtype)
        if not _hermitian(c):
            raise ValueError(f"{self.name}: constant is not Hermitian")
        maps = []
        for idx, m in self.variable_maps:
            m = np.atleast_2d(np.asarray(m))
            if m.shape != (n, n):
                raise ValueError(f"{self.name}: coefficient of variable {idx} has shape {m.shape}, expected {(n, n)}")
            if not cplx:
                m = m.real
            m = m.astype(dtype)
            if not _hermitian(m):
                raise ValueError(f"{self.name}: coefficient of variable {idx} is not Hermitian")
            maps.append((int(idx), m))
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "variable_maps", tuple(maps))

    @property
    def dimension(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, x) -> np.ndarray:
        out = self.constant.copy()
        for idx, m in self.variable_maps:
            out = out + x[idx] * m
        return out

    def min_eig(self, x) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(x)).min())


@dataclass(frozen=True)
class Scaling:
    """Conversion between solver units and physical units for one problem."""

    length: float                 # meters per position unit
    power: float = MICROWATT      # watts per beamforming-matrix unit
    eta_unit: np.ndarray = field(default=None)  # watts per eta unit, per user

    @classmethod
    def for_params(cls, params: SystemParams, gamma: np.ndarray) -> "Scaling":
        """Altitude as the length unit; the power unit is the noise-limited
        single-user power at that distance (about a microwatt for the
        default parameters), so matrix entries stay near one."""
        L = params.altitude
        eta_unit = np.asarray(gamma) * params.sigma2 * L ** 2 / params.rho_const
        return cls(length=L, power=float(eta_unit.max()) / params.n_antennas, eta_unit=eta_unit)


@dataclass(frozen=True)
class SlackIndex:
    """Variable indices of one user's slacks."""

    eta: int
    delta: int
    mu: int
    t: int


# Hermitian beam variable: list of (variable index, Hermitian basis matrix),
# so that W_k = sum x[idx] * basis.
BeamMap = list[tuple[int, np.ndarray]]


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Real-coordinate basis of n x n Hermitian matrices (diagonal, Re, Im parts)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1j
            e[j, i] = -1j
            basis.append(e)
    return basis


def _c2a_matrix(U: np.ndarray, B: np.ndarray, form: str) -> np.ndarray:
    M = U.conj().T @ B @ U
    return M.real if form == "real" else M


def build_c2a_lmi(k: int, beams: list[BeamMap], slack: SlackIndex, a_bar: np.ndarray,
                  a_first: np.ndarray, alpha: float, gamma: float, eta_unit: float,
                  form: str = "real") -> LmiBlock:
    """AoD-robust part for user k.

    Encodes ``a^H (W_k - gamma sum_{r != k} W_r) a >= eta_k`` for every
    linearized response ``a = a_bar + a_first * dtheta`` with ``|dtheta| <= alpha``.
    ``eta_unit`` converts one eta unit to beamforming-matrix units.

    With ``alpha == 0`` the S-procedure has no strictly feasible point, so the
    nominal scalar inequality is emitted instead. ``form`` selects the real
    2x2 block (exact for a real perturbation) or the Hermitian 2x2 block.
    """
    if form not in ("real", "hermitian"):
        raise ValueError(f"unknown C2a form {form!r}")
    n = len(a_bar)
    if len(a_first) != n or any(b.shape != (n, n) for beam in beams for _, b in beam):
        raise ValueError("dimension mismatch between array response and beamforming variables")
    if alpha == 0:
        U = a_bar[:, None]
        cform = "real"
        const = np.zeros((1, 1))
        maps = [(slack.eta, -eta_unit * np.ones((1, 1)))]
    else:
        U = np.column_stack([a_first, a_bar])
        cform = form
        const = np.zeros((2, 2))
        maps = [(slack.delta, np.diag([1.0, -alpha ** 2])),
                (slack.eta, np.diag([0.0, -eta_unit]))]
    for r, beam in enumerate(beams):
        scale = 1.0 if r == k else -gamma
        for idx, B in beam:
            maps.append((idx, scale * _c2a_matrix(U, B, cform)))
    field_ = "complex" if cform == "hermitian" else "real"
    return LmiBlock(f"C2a[{k}]", const, tuple(maps), field=field_)


def build_c2b_lmi(k: int, pos: tuple[int, int], slack: SlackIndex, r_bar, radius: float,
                  scaling: Scaling) -> tuple[LmiBlock, LmiBlock]:
    """Location-robust part for user k plus the epigraph block for ``t_k``.

    Main block (altitude units, ``u`` the UAV position, ``s`` = eta):

        [[(mu - 1) I,  u - u_bar], [(u - u_bar)^T, -mu D^2 - t - 1 + s]] >= 0

    Companion block ``[[I, u - u_bar], [(u - u_bar)^T, t]] >= 0`` enforces
    ``t >= ||u - u_bar||^2``. With ``D == 0`` the main block collapses to the
    scalar ``s >= t + 1``.
    """
    L = scaling.length
    ub = np.asarray(r_bar, dtype=float) / L
    Dn = radius / L
    ux, uy = pos

    def off(i):
        m = np.zeros((3, 3))
        m[i, 2] = m[2, i] = 1.0
        return m

    e22 = np.zeros((3, 3))
    e22[2, 2] = 1.0
    epi_const = np.eye(3)
    epi_const[2, 2] = 0.0
    epi_const[0, 2] = epi_const[2, 0] = -ub[0]
    epi_const[1, 2] = epi_const[2, 1] = -ub[1]
    epigraph = LmiBlock(f"epi[{k}]", epi_const,
                        ((ux, off(0)), (uy, off(1)), (slack.t, e22)))
    if radius == 0:
        main = LmiBlock(f"C2b[{k}]", -np.ones((1, 1)),
                        ((slack.t, -np.ones((1, 1))), (slack.eta, np.ones((1, 1)))))
        return main, epigraph
    const = np.diag([-1.0, -1.0, -1.0])
    const[0, 2] = const[2, 0] = -ub[0]
    const[1, 2] = const[2, 1] = -ub[1]
    main = LmiBlock(f"C2b[{k}]", const,
                    ((ux, off(0)), (uy, off(1)),
                     (slack.mu, np.diag([1.0, 1.0, -Dn ** 2])),
                     (slack.t, -e22), (slack.eta, e22)))
    return main, epigraph


def c2a_quadratic(W: list[np.ndarray], k: int, gamma: float, eta: float, a_bar, a_first,
                  dtheta) -> np.ndarray:
    """Left side minus right side of the AoD constraint at offsets ``dtheta``.

    Nonnegative values mean the linearized constraint holds.
    """
    M = W[k] - gamma * sum(W[r] for r in range(len(W)) if r != k)
    dtheta = np.atleast_1d(dtheta)
    A = a_bar[None, :] + dtheta[:, None] * a_first[None, :]
    return np.real(np.einsum("ti,ij,tj->t", A.conj(), M, A)) - eta


def c2b_quadratic(u, s: float, u_bar, offsets) -> np.ndarray:
    """``s - (||u - u_bar - offset||^2 + 1)`` for each offset (altitude units)."""
    pts = np.asarray(u_bar)[None, :] + np.atleast_2d(offsets)
    return s - (np.sum((np.asarray(u)[None, :] - pts) ** 2, axis=1) + 1.0)


@dataclass
class SProcedureReport:
    min_eig: float
    lmi_feasible: bool
    violations: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.lmi_feasible or not self.violations


def verify_s_procedure(block: LmiBlock, x, quadratic, samples, eig_tol: float = 1e-9,
                       value_tol: float = 1e-9) -> SProcedureReport:
    """Check that an LMI-feasible assignment satisfies its quadratic on samples.

    ``quadratic(samples)`` returns one value per sample, nonnegative where the
    robust inequality holds. Samples where the LMI holds but the quadratic is
    below ``-value_tol`` (relative to the largest magnitude) are reported.
    """
    lam = block.min_eig(x)
    feasible = lam >= -eig_tol
    report = SProcedureReport(lam, feasible)
    if feasible:
        vals = np.asarray(quadratic(samples))
        tol = value_tol * max(1.0, float(np.abs(vals).max()))
        bad = np.flatnonzero(vals < -tol)
        report.violations = [(samples[i], float(vals[i])) for i in bad]
    return report


def quadratic_coefficients(W: list[np.ndarray], k: int, gamma: float, a_bar, a_first) -> tuple[float, float, float]:
    """(a1^H M a1, Re a1^H M a_bar, a_bar^H M a_bar) for M = W_k - gamma sum W_r."""
    M = W[k] - gamma * sum(W[r] for r in range(len(W)) if r != k)
    return (float(np.real(a_first.conj() @ M @ a_first)),
            float(np.real(a_first.conj() @ M @ a_bar)),
            float(np.real(a_bar.conj() @ M @ a_bar)))


def c2b_worst_case_eta(r0_xy, r_bar, radius: float, params: SystemParams, gamma: float, k: int) -> float:
    """Smallest eta (watts) satisfying the location part, via the closed-form worst case."""
    off = math.hypot(r0_xy[0] - r_bar[0], r0_xy[1] - r_bar[1])
    d2 = (off + radius) ** 2 + params.altitude ** 2
    return gamma * params.sigma2[k] * d2 / params.rho_const
