"""Runtime checks of the inversion and localization conditions, Gevrey
profiles of iterates, and Diophantine scans of frequencies."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .lattice import FourierVector, l1
from .operator import TangentOperator, inverse_norm, log_epsilon_threshold

log = logging.getLogger(__name__)

DEFAULT_LOCALIZATION_MAX_ROWS = 2500


@dataclass
class DiagnosticsReport:
    iteration: int
    log_inverse_norm: float = math.nan
    log_epsilon_N: float = math.nan
    inversion_ok: bool = True
    localization_worst_ratio: float = math.nan
    localization_ok: bool = True
    gevrey_sup: float = math.nan
    diophantine_ok: bool = True
    diophantine_worst_k: tuple[int, ...] | None = None
    diophantine_margin: float = math.nan


@dataclass(frozen=True)
class FrequencyDomain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("bounds differ in length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("lower bound must be below upper bound")

    @property
    def n(self) -> int:
        return len(self.lower)


def _scan_points(n: int, half_width: int) -> np.ndarray:
    pts = np.array(list(itertools.product(range(-half_width, half_width + 1), repeat=n)))
    return pts[np.any(pts != 0, axis=1)]


def diophantine_check(omega, M_box: int, tau: float):
    """Scan ``0 < max|k_i| <= 2(M_box + 1)`` for ``|<k, omega>| < |k|^-tau``.

    Returns ``(ok, worst_k, margin)`` where ``margin`` is the minimum of
    ``|<k, omega>| * |k|^tau`` (``|k|`` the l1 length) and ``worst_k`` attains
    it (first in scan order on ties).
    """
    omega = np.asarray(omega, dtype=float)
    pts = _scan_points(len(omega), 2 * (M_box + 1))
    dots = np.abs(pts @ omega)
    lengths = np.abs(pts).sum(axis=1).astype(float)
    products = dots * lengths**tau
    i = int(np.argmin(products))
    ok = not bool(np.any(dots < lengths ** (-tau)))
    return ok, tuple(int(c) for c in pts[i]), float(products[i])


def resonant_measure_mc(domain: FrequencyDomain, M_box: int, tau: float, samples: int, seed: int) -> float:
    """Fraction of uniform samples from ``domain`` failing the Diophantine scan."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    lo = np.asarray(domain.lower, dtype=float)
    hi = np.asarray(domain.upper, dtype=float)
    omegas = lo + (hi - lo) * rng.random((samples, domain.n))
    return float(np.mean(_failures(omegas, M_box, tau)))


def _failures(omegas: np.ndarray, M_box: int, tau: float) -> np.ndarray:
    pts = _scan_points(omegas.shape[1], 2 * (M_box + 1))
    bound = np.abs(pts).sum(axis=1).astype(float) ** (-tau)
    out = np.zeros(len(omegas), dtype=bool)
    chunk = max(1, 2_000_000 // len(pts))
    for start in range(0, len(omegas), chunk):
        dots = np.abs(omegas[start : start + chunk] @ pts.T)
        out[start : start + chunk] = np.any(dots < bound, axis=1)
    return out


def gevrey_profile(zhat: FourierVector, s: float):
    """``sup_k ||zhat(k)||_2 exp(|k|^s)`` and the per-shell maxima of
    ``||zhat(k)||_2`` keyed by l1 length."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    sq: dict = {}
    for (j, k), v in zhat.items():
        sq[k] = sq.get(k, 0.0) + v * v
    sup = 0.0
    shells: dict[int, float] = {}
    for k, v in sq.items():
        norm = math.sqrt(v)
        length = l1(k)
        sup = max(sup, norm * math.exp(length**s))
        shells[length] = max(shells.get(length, 0.0), norm)
    return sup, dict(sorted(shells.items()))


def localization_ratio(T: TangentOperator, s: float, N: int, inverse: np.ndarray | None = None) -> float:
    """Worst ``|T^-1(row, col)|`` over the decay envelope for pairs with
    ``|k - k'| >= sqrt N`` and ``|k + k'| >= sqrt N``; 0 when no pair qualifies."""
    if inverse is None:
        inverse = np.linalg.inv(T.matrix)
    pts = T.order.points
    dist_minus = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=-1)
    dist_plus = np.abs(pts[:, None, :] + pts[None, :, :]).sum(axis=-1)
    far = (dist_minus >= math.sqrt(N)) & (dist_plus >= math.sqrt(N))
    if not far.any():
        return 0.0
    envelope = np.exp(-(dist_minus[far] ** s) / 2) + np.exp(-(dist_plus[far] ** s) / 2)
    return float(np.max(np.abs(inverse[far]) / envelope))


def condition_report(T: TangentOperator, s: float, N: int, iteration: int = 0,
                     max_rows: int = DEFAULT_LOCALIZATION_MAX_ROWS) -> DiagnosticsReport:
    """Inversion and localization checks for one assembled operator."""
    norm = inverse_norm(T)
    log_inv = math.log(norm) if norm > 0 else -math.inf
    log_eps = log_epsilon_threshold(max(N, 1))
    report = DiagnosticsReport(iteration, log_inv, log_eps, inversion_ok=log_inv <= -log_eps)
    if T.rows <= max_rows and math.isfinite(norm):
        report.localization_worst_ratio = localization_ratio(T, s, N)
        report.localization_ok = report.localization_worst_ratio <= 1.0
    else:
        log.info("localization check skipped: %d rows exceed %d", T.rows, max_rows)
    return report
