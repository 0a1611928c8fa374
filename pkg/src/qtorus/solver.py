"""Alternating frequency update and dimension-enlarged Newton iteration.

Each iteration first solves the resonant equations exactly for the drifted
frequency, then takes one Newton step on the non-resonant coefficients over a
box ``M`` times wider than the previous one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .hamiltonian import PolynomialHamiltonian, resonant_field, vector_field
from .lattice import (
    CapacityError,
    FourierVector,
    LatticeBox,
    ModeOrder,
    initial_state,
    is_resonant,
    project,
)
from .operator import (
    DEFAULT_MAX_ROWS,
    DEFAULT_RCOND_FLOOR,
    BScale,
    NearResonance,
    TangentOperator,
    assemble_T,
    solve_linear,
)

log = logging.getLogger(__name__)

E_INV = math.exp(-1)


class ConditionViolation(NearResonance):
    """A strict-mode run whose operator failed the inversion or localization check."""


@dataclass
class SolverConfig:
    M: int = 2
    N0: int = 1
    max_iter: int = 8
    tol_residual: float = 1e-12
    use_B: bool = True
    b_scale_mode: BScale = BScale.CHAIN_RULE
    amplitude: float = E_INV
    tau: float = 2.0
    strict_conditions: bool = False
    seed: int = 0
    N_cap: int = 64
    max_rows: int = DEFAULT_MAX_ROWS
    rcond_floor: float = DEFAULT_RCOND_FLOOR
    s: float = 0.5
    M_box: int = 4
    diagnostics: bool = True
    localization_max_rows: int = diag.DEFAULT_LOCALIZATION_MAX_ROWS

    def __post_init__(self):
        if isinstance(self.b_scale_mode, str):
            self.b_scale_mode = BScale(self.b_scale_mode)
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if self.N0 < 1:
            raise ValueError("N0 must be at least 1")
        if self.N_cap < self.N0:
            raise ValueError("N_cap must be at least N0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")


@dataclass
class IterationRecord:
    r: int
    N: int
    omega: np.ndarray
    residual_l2: float
    step_l2: float
    support_size: int
    log_inverse_norm: float = math.nan
    gevrey_sup: float = math.nan
    omega_updated: np.ndarray | None = None
    report: diag.DiagnosticsReport | None = None


@dataclass
class SolverState:
    r: int
    omega_r: np.ndarray
    zhat_r: FourierVector
    N_r: int
    history: list[IterationRecord] = field(default_factory=list)
    iterates: list[tuple[np.ndarray, FourierVector]] = field(default_factory=list)
    termination: str = "running"
    omega_final: np.ndarray | None = None

    @property
    def residual(self) -> float:
        return self.history[-1].residual_l2 if self.history else math.nan


def full_state(zhat_p: FourierVector, amplitude: float) -> FourierVector:
    """Non-resonant part plus the pinned amplitude on each ``(j, e_j)``."""
    return initial_state(zhat_p.n, amplitude) + zhat_p.without_resonant()


def q_update(H: PolynomialHamiltonian, zhat_p: FourierVector, a: float = E_INV,
             epsilon: float | None = None, X: FourierVector | None = None) -> np.ndarray:
    """Exact solution of the resonant equations: ``omega + eps * X_q / a``."""
    eps = H.epsilon if epsilon is None else epsilon
    if X is None:
        X = vector_field(H, full_state(zhat_p, a))
    return np.asarray(H.omega0) + eps * resonant_field(X) / a


def residual_F(H: PolynomialHamiltonian, zhat_p: FourierVector, omega_drift,
               a: float = E_INV, box: LatticeBox | None = None,
               X: FourierVector | None = None) -> FourierVector:
    """Non-resonant residual ``(-<k, omega'> + omega_j) zp + eps * X_p``.

    Covers every mode reached by ``zp`` or by the vector field, so the result
    lives on the degree-enlarged box; pass ``box`` to project it.
    """
    if X is None:
        X = vector_field(H, full_state(zhat_p, a))
    omega_drift = np.asarray(omega_drift, dtype=float)
    omega0 = H.omega0
    zp = zhat_p.without_resonant()
    out = {}
    for (j, k), v in X.items():
        if not is_resonant(j, k):
            out[(j, k)] = H.epsilon * v
    for (j, k), v in zp.items():
        d = omega0[j] - float(np.dot(k, omega_drift))
        out[(j, k)] = out.get((j, k), 0.0) + d * v
    F = FourierVector(H.n, out)
    return F if box is None else project(F, box.N)


def newton_cap(n: int, N_cap: int, max_rows: int) -> int:
    """Largest half-width up to ``N_cap`` whose Newton system fits ``max_rows``."""
    N = N_cap
    while N > 1 and n * (2 * N + 1) ** n - n > max_rows:
        N -= 1
    return N


def theoretical_growth_factor(epsilon: float) -> float:
    """``exp((log 1/eps)^(1/20))``, about 1 for any practical epsilon."""
    if not 0 < epsilon < 1:
        return 1.0
    return math.exp(math.log(1.0 / epsilon) ** (1 / 20))


def p_update(H: PolynomialHamiltonian, zhat_p: FourierVector, omega_next, N_next: int,
             config: SolverConfig, F: FourierVector | None = None):
    """One dimension-enlarged Newton step on ``Lambda_{N_next}``.

    Returns ``(new zhat_p, step vector, operator)``.
    """
    box = LatticeBox(N_next, H.n)
    order = ModeOrder(box)
    a = config.amplitude
    zfull = full_state(zhat_p, a)
    if F is None:
        F = residual_F(H, zhat_p, omega_next, a)
    T = assemble_T(H, zfull, omega_next, box, config.use_B, config.b_scale_mode, a,
                   config.max_rows, order)
    rhs = project(F, N_next).to_vector(order)
    delta = solve_linear(T, rhs, config.rcond_floor)
    updated = zhat_p.without_resonant().to_vector(order) - delta
    new = FourierVector.from_vector(updated, order).pruned()
    return new, delta, T


def _report(T: TangentOperator, N: int, r: int, omega, config: SolverConfig) -> diag.DiagnosticsReport | None:
    if not config.diagnostics or T.rows > config.max_rows:
        return None
    rep = diag.condition_report(T, config.s, N, r, config.localization_max_rows)
    ok, k, margin = diag.diophantine_check(omega, config.M_box, config.tau)
    rep.diophantine_ok, rep.diophantine_worst_k, rep.diophantine_margin = ok, k, margin
    if config.strict_conditions and not (rep.inversion_ok and rep.localization_ok):
        raise ConditionViolation(
            f"iteration {r}: inversion_ok={rep.inversion_ok}, "
            f"localization ratio={rep.localization_worst_ratio:.3g}"
        )
    return rep


def run(H: PolynomialHamiltonian, config: SolverConfig | None = None) -> SolverState:
    """Alternate frequency and Newton updates until the residual reaches
    ``tol_residual`` or ``max_iter`` Newton steps have been taken.

    Row ``r`` of the history describes iterate ``(omega^(r), zhat^(r))``; its
    residual is evaluated with the frequency consistent with ``zhat^(r)``,
    which is exactly ``omega^(r+1)``.
    """
    config = config or SolverConfig()
    n = H.n
    a = config.amplitude
    cap = newton_cap(n, config.N_cap, config.max_rows)
    if cap < config.N_cap:
        log.info("Newton box capped at N=%d (dense limit %d rows)", cap, config.max_rows)
    log.info("theoretical growth factor M=%.6g (using M=%d)",
             theoretical_growth_factor(H.epsilon), config.M)

    omega = np.asarray(H.omega0, dtype=float)
    zp = FourierVector(n)
    state = SolverState(0, omega, full_state(zp, a), config.N0)
    N = config.N0
    step_l2 = 0.0
    pending: diag.DiagnosticsReport | None = None
    for r in range(config.max_iter + 1):
        zfull = full_state(zp, a)
        X = vector_field(H, zfull)
        omega_next = q_update(H, zp, a, X=X)
        F = residual_F(H, zp, omega_next, a, X=X)
        res = F.l2()
        gsup, _ = diag.gevrey_profile(zfull, config.s) if 0 < config.s < 1 else (math.nan, None)
        if pending is not None:
            pending.gevrey_sup = gsup
        rec = IterationRecord(
            r, N, omega.copy(), res, step_l2, len(zfull.pruned()),
            pending.log_inverse_norm if pending else math.nan, gsup, omega_next, pending,
        )
        state.history.append(rec)
        state.iterates.append((omega.copy(), zfull))
        state.r, state.omega_r, state.zhat_r, state.N_r = r, omega.copy(), zfull, N
        state.omega_final = omega_next
        log.info("r=%d N=%d residual=%.3e", r, N, res)
        if res <= config.tol_residual:
            state.termination = "converged"
            break
        if r == config.max_iter:
            state.termination = "max_iter"
            break
        N_next = min(config.M * N, cap)
        if N_next == N:
            log.info("box cap reached at N=%d; continuing at fixed truncation", N)
        try:
            zp_new, delta, T = p_update(H, zp, omega_next, N_next, config, F)
            pending = _report(T, N_next, r + 1, omega_next, config)
        except (NearResonance, CapacityError) as err:
            state.termination = type(err).__name__
            err.state = state
            raise
        step_l2 = float(np.linalg.norm(delta))
        zp = zp_new
        omega = omega_next
        N = N_next
    return state


def evaluate_solution(zhat: FourierVector, omega_drift, t, derivative: bool = False):
    """``z_j(t) = sum_k zhat_j(k) exp(i <k, omega'> t)`` and the real pair
    ``x = -sqrt2 Im z``, ``y = sqrt2 Re z``.

    With ``derivative=True`` the time derivatives are returned instead.
    Scalar ``t`` gives shape ``(n,)``; array ``t`` gives ``(n, len(t))``.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    omega_drift = np.asarray(omega_drift, dtype=float)
    n = zhat.n
    z = np.zeros((n, t_arr.size), dtype=complex)
    for j in range(n):
        comp = zhat.component(j)
        if not comp:
            continue
        ks = np.array(list(comp.keys()), dtype=float).reshape(len(comp), n)
        vals = np.array(list(comp.values()))
        freq = ks @ omega_drift
        coef = vals * (1j * freq) if derivative else vals
        z[j] = coef @ np.exp(1j * np.outer(freq, t_arr))
    x = -math.sqrt(2.0) * z.imag
    y = math.sqrt(2.0) * z.real
    if np.ndim(t) == 0:
        return z[:, 0], (x[:, 0], y[:, 0])
    return z, (x, y)
