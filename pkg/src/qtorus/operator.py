"""Restricted tangent operator ``D + eps*S + eps*B`` on the non-resonant
modes of a lattice box, with dense solves and inverse-norm estimates."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .hamiltonian import (
    HessianKernels,
    PolynomialHamiltonian,
    hessian_kernels,
    q_gradient,
)
from .lattice import CapacityError, FourierVector, LatticeBox, ModeOrder

DEFAULT_RCOND_FLOOR = 1e-14
DEFAULT_MAX_ROWS = 6000


class NearResonance(ArithmeticError):
    """The restricted operator is numerically singular: a small divisor at
    the current frequency. ``k`` and ``j`` name the worst diagonal mode when
    known."""

    def __init__(self, message, rcond=None, mode=None):
        super().__init__(message)
        self.rcond = rcond
        self.mode = mode


class BScale(enum.Enum):
    CHAIN_RULE = "chain_rule"
    PAPER_LITERAL = "paper_literal"


def assemble_D(order: ModeOrder, omega0, omega_drift) -> np.ndarray:
    """Diagonal entries ``-<k, omega'> + omega_j`` in row order."""
    omega0 = np.asarray(omega0, dtype=float)
    omega_drift = np.asarray(omega_drift, dtype=float)
    return -(order.points @ omega_drift) + omega0[order.components]


def assemble_S(kernels: HessianKernels, order: ModeOrder, max_rows: int = DEFAULT_MAX_ROWS) -> np.ndarray:
    """``S[(j,k), (i,k')] = toeplitz[j][i](k - k') + hankel[j][i](k + k')``."""
    rows = len(order)
    if rows > max_rows:
        raise CapacityError(f"dense operator of {rows} rows exceeds the limit of {max_rows}")
    S = np.zeros((rows, rows))
    comp = order.components
    pts = order.points
    for j in range(kernels.n):
        rj = np.flatnonzero(comp == j)
        kj = pts[rj]
        for i in range(kernels.n):
            ci = np.flatnonzero(comp == i)
            ki = pts[ci]
            diff = kj[:, None, :] - ki[None, :, :]
            summ = kj[:, None, :] + ki[None, :, :]
            S[np.ix_(rj, ci)] = kernels.toeplitz[j][i].at(diff) + kernels.hankel[j][i].at(summ)
    return S


def assemble_B(qgrad: np.ndarray, zp: np.ndarray, order: ModeOrder,
               scale_mode: BScale = BScale.CHAIN_RULE, amplitude: float = math.exp(-1)):
    """Low-rank coupling through the frequency update.

    Returns ``(U, W)`` with ``B = U @ W``, ``U`` of shape ``(rows, n)`` and
    ``W = qgrad``. Row ``(j, k)`` of ``U`` is ``-c * zp(j, k) * k``; this is
    rank one when ``n == 1`` and rank at most ``n`` otherwise.
    """
    c = 1.0 / amplitude if scale_mode is BScale.CHAIN_RULE else math.exp(-1)
    U = -c * zp[:, None] * order.points.astype(float)
    return U, np.asarray(qgrad, dtype=float)


@dataclass
class TangentOperator:
    order: ModeOrder
    D: np.ndarray
    S: np.ndarray
    epsilon: float
    omega_drift: np.ndarray
    U: np.ndarray | None = None
    W: np.ndarray | None = None
    _lu: tuple | None = field(default=None, repr=False)

    @property
    def box(self) -> LatticeBox:
        return self.order.box

    @property
    def rows(self) -> int:
        return len(self.D)

    @property
    def B(self) -> np.ndarray:
        if self.U is None:
            return np.zeros((self.rows, self.rows))
        return self.U @ self.W

    @property
    def matrix(self) -> np.ndarray:
        T = self.epsilon * self.S
        T[np.diag_indices_from(T)] += self.D
        if self.U is not None:
            T += self.epsilon * (self.U @ self.W)
        return T


def assemble_T(H: PolynomialHamiltonian, zhat: FourierVector, omega_drift, box: LatticeBox,
               use_B: bool = True, scale_mode: BScale = BScale.CHAIN_RULE,
               amplitude: float = math.exp(-1), max_rows: int = DEFAULT_MAX_ROWS,
               order: ModeOrder | None = None) -> TangentOperator:
    """Tangent operator at the full state ``zhat`` (resonant modes included)."""
    if order is None:
        order = ModeOrder(box)
    if len(order) > max_rows:
        raise CapacityError(f"dense operator of {len(order)} rows exceeds the limit of {max_rows}")
    omega_drift = np.asarray(omega_drift, dtype=float)
    D = assemble_D(order, H.omega0, omega_drift)
    if H.epsilon == 0.0 or not H.terms:
        return TangentOperator(order, D, np.zeros((len(order), len(order))), H.epsilon, omega_drift)
    kernels = hessian_kernels(H, zhat)
    S = assemble_S(kernels, order, max_rows)
    U = W = None
    if use_B:
        qg = q_gradient(H, zhat, box, kernels, order)
        zp = zhat.without_resonant().to_vector(order)
        U, W = assemble_B(qg, zp, order, scale_mode, amplitude)
    return TangentOperator(order, D, S, H.epsilon, omega_drift, U, W)


def _factor(T: TangentOperator, rcond_floor: float):
    if T._lu is not None:
        return T._lu
    A = T.matrix
    anorm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() == 0.0:
        raise NearResonance("tangent operator is exactly singular", 0.0, _worst_mode(T))
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if rcond < rcond_floor:
        raise NearResonance(
            f"reciprocal condition {rcond:.3e} below floor {rcond_floor:.1e}", rcond, _worst_mode(T)
        )
    T._lu = (lu, piv)
    return T._lu


def _worst_mode(T: TangentOperator):
    r = int(np.argmin(np.abs(T.D)))
    return T.order.mode(r)


def solve_linear(T: TangentOperator, rhs: np.ndarray, rcond_floor: float = DEFAULT_RCOND_FLOOR) -> np.ndarray:
    """Solve ``T x = rhs`` by row-pivoted LU; small divisors raise :class:`NearResonance`."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (T.rows,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({T.rows},)")
    if T.rows == 0:
        return rhs.copy()
    lu_piv = _factor(T, rcond_floor)
    return sla.lu_solve(lu_piv, rhs)


def inverse_norm(T: TangentOperator) -> float:
    """``||T^{-1}||_2 = 1 / sigma_min``."""
    if T.rows == 0:
        return 0.0
    sigma = sla.svdvals(T.matrix)
    smin = sigma[-1]
    return math.inf if smin == 0.0 else 1.0 / smin


def log_epsilon_threshold(N: float) -> float:
    """``log eps_N = -(log N)^15``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return -math.log(N) ** 15
