"""Time-stepping baselines: symplectic Euler with its per-step phase error,
and a fixed-step RK4 reference certified by step halving.

Real coordinates follow ``dx/dt = -dH/dy``, ``dy/dt = dH/dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import PolynomialHamiltonian, real_gradient

HARMONIC = None


class StepSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseState:
    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape:
            raise ValueError("x and y must have the same shape")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("phase state must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def _gradient(H: PolynomialHamiltonian | None, x, y):
    if H is HARMONIC:
        return x, y
    return real_gradient(H, x, y)


def symplectic_euler_step(H: PolynomialHamiltonian | None, state: PhaseState, h: float,
                          tol: float = 1e-15, max_sweeps: int = 100) -> PhaseState:
    """One forward-backward step: ``x+ = x - h dH/dy(x+, y)``, then
    ``y+ = y + h dH/dx(x+, y)``.

    ``H=None`` is the unit harmonic oscillator. When ``dH/dy`` does not depend
    on ``x`` (Duffing, Henon-Heiles) the first stage is explicit; otherwise it is
    resolved by fixed-point sweeps, which keeps the map symplectic.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    x, y = state.x, state.y
    xn = x - h * _gradient(H, x, y)[1]
    if H is not HARMONIC:
        for _ in range(max_sweeps):
            x_next = x - h * _gradient(H, xn, y)[1]
            done = np.max(np.abs(x_next - xn)) <= tol * (1.0 + np.max(np.abs(x_next)))
            xn = x_next
            if done:
                break
    yn = y + h * _gradient(H, xn, y)[0]
    return PhaseState(xn, yn, state.t + h)


def step_matrix(h: float) -> np.ndarray:
    """One symplectic-Euler step of the harmonic oscillator as a matrix."""
    return np.array([[1.0, -h], [h, 1.0 - h * h]])


def step_eigenvalues(h: float) -> tuple[complex, complex]:
    re = 1.0 - h * h / 2.0
    im = h * math.sqrt(1.0 - h * h / 4.0)
    return complex(re, im), complex(re, -im)


def phase_per_step(h: float) -> float:
    """Numerical rotation angle per step, ``arccos(1 - h^2/2)``.

    Evaluated as ``2 arcsin(h/2)``, the same angle without the cancellation
    in ``1 - h^2/2`` for small ``h``.
    """
    if not 0 <= h < 2:
        raise ValueError(f"phase per step needs 0 <= h < 2, got {h}")
    return 2.0 * math.asin(h / 2.0)


@dataclass
class DriftRecord:
    h: float
    theta_h: float
    delta_theta: float
    n_steps: int
    accumulated: float
    measured: float = math.nan
    measured_raw: float = math.nan


def _rotation_frame(h: float) -> np.ndarray:
    """``S`` with ``S M_h S^-1`` a rotation by ``theta_h``."""
    vals, vecs = np.linalg.eig(step_matrix(h))
    i = int(np.argmax(vals.imag))
    v = vecs[:, i]
    P = np.column_stack([v.real, -v.imag])
    return np.linalg.inv(P)


def measure_drift(h: float, n_steps: int) -> tuple[float, float]:
    """Integrate ``n_steps`` from ``(1, 0)`` and return the unwrapped angle
    minus ``n h``, measured in the rotation frame and in raw coordinates."""
    S = _rotation_frame(h)
    state = PhaseState([1.0], [0.0])
    pts = [(1.0, 0.0)]
    for _ in range(n_steps):
        state = symplectic_euler_step(HARMONIC, state, h)
        pts.append((state.x[0], state.y[0]))
    pts = np.array(pts)
    raw = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
    u = pts @ S.T
    framed = np.unwrap(np.arctan2(u[:, 1], u[:, 0]))
    return float(framed[-1] - framed[0] - n_steps * h), float(raw[-1] - raw[0] - n_steps * h)


def phase_drift(h: float, n_steps: int, measure: bool = True) -> DriftRecord:
    theta = phase_per_step(h)
    rec = DriftRecord(h, theta, theta - h, n_steps, n_steps * (theta - h))
    if measure:
        rec.measured, rec.measured_raw = measure_drift(h, n_steps)
    return rec


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dt: float

    def state(self, i: int = -1) -> PhaseState:
        return PhaseState(self.x[:, i], self.y[:, i], float(self.t[i]))


def _rk4_path(H, x0, y0, times, dt):
    def rhs(x, y):
        gx, gy = _gradient(H, x, y)
        return -gy, gx

    x, y = x0.copy(), y0.copy()
    xs, ys = [x.copy()], [y.copy()]
    for t0, t1 in zip(times[:-1], times[1:]):
        steps = max(1, math.ceil((t1 - t0) / dt - 1e-12))
        hh = (t1 - t0) / steps
        for _ in range(steps):
            k1 = rhs(x, y)
            k2 = rhs(x + 0.5 * hh * k1[0], y + 0.5 * hh * k1[1])
            k3 = rhs(x + 0.5 * hh * k2[0], y + 0.5 * hh * k2[1])
            k4 = rhs(x + hh * k3[0], y + hh * k3[1])
            x = x + hh / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y = y + hh / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        xs.append(x.copy())
        ys.append(y.copy())
    return np.array(xs).T, np.array(ys).T


def reference_integrate(H: PolynomialHamiltonian | None, initial: PhaseState, t_end: float,
                        dt: float, times=None, tol: float = 1e-10,
                        min_dt: float = 1e-6) -> Trajectory:
    """Classical RK4 at fixed ``dt``, halved until two successive runs agree
    to ``tol`` at every sample time."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if times is None:
        times = [t_end]
    times = np.unique(np.concatenate([[initial.t], np.asarray(times, dtype=float), [t_end]]))
    times = times[(times >= initial.t) & (times <= t_end)]
    prev = _rk4_path(H, initial.x, initial.y, times, dt)
    while True:
        half = dt / 2.0
        if half < min_dt:
            raise StepSizeError(f"no convergence to {tol:g} before dt fell below {min_dt:g}")
        cur = _rk4_path(H, initial.x, initial.y, times, half)
        change = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
        if change < tol:
            return Trajectory(times, cur[0], cur[1], half)
        dt, prev = half, cur
