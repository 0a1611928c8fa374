import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtorus.baselines import (
    HARMONIC,
    PhaseState,
    StepSizeError,
    measure_drift,
    phase_drift,
    phase_per_step,
    reference_integrate,
    step_eigenvalues,
    step_matrix,
    symplectic_euler_step,
)
from qtorus.hamiltonian import real_gradient


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.99))
def test_eigenvalues_on_unit_circle(h):
    lam, lam_bar = step_eigenvalues(h)
    assert abs(lam) == pytest.approx(1.0, abs=1e-12)
    assert lam_bar == lam.conjugate()
    assert np.linalg.det(step_matrix(h)) == pytest.approx(1.0, abs=1e-12)
    eig = np.sort_complex(np.linalg.eigvals(step_matrix(h)))
    assert eig == pytest.approx(np.sort_complex(np.array([lam, lam_bar])), abs=1e-7)


@pytest.mark.parametrize("h", [0.05, 0.1, 0.5, 1.0])
def test_phase_identities(h):
    theta = phase_per_step(h)
    assert math.sin(theta) == pytest.approx(h * math.sqrt(1 - h * h / 4), abs=1e-12)
    assert math.cos(theta) == pytest.approx(1 - h * h / 2, abs=1e-15)
    assert theta - h >= h**3 / 24


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1.99))
def test_drift_lower_bound(h):
    assert phase_per_step(h) - h >= h**3 / 24 * (1 - 1e-9)


def test_phase_per_step_domain():
    with pytest.raises(ValueError):
        phase_per_step(2.0)
    with pytest.raises(ValueError):
        phase_per_step(-0.1)


def test_harmonic_step_is_the_matrix():
    s = PhaseState([0.3], [-0.4])
    out = symplectic_euler_step(HARMONIC, s, 0.2)
    assert np.concatenate([out.x, out.y]) == pytest.approx(step_matrix(0.2) @ np.array([0.3, -0.4]))
    assert out.t == pytest.approx(0.2)


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        symplectic_euler_step(HARMONIC, PhaseState([1.0], [0.0]), 0.0)
    with pytest.raises(ValueError):
        PhaseState([1.0], [float("inf")])


def _fd_step_jacobian(H, x, y, h, d=1e-6):
    def f(v):
        s = symplectic_euler_step(H, PhaseState(v[:2], v[2:]), h)
        return np.concatenate([s.x, s.y])

    v0 = np.concatenate([x, y])
    return np.column_stack([(f(v0 + d * e) - f(v0 - d * e)) / (2 * d) for e in np.eye(4)])


def test_step_is_symplectic(henon_heiles):
    J = _fd_step_jacobian(henon_heiles, np.array([0.1, -0.2]), np.array([0.3, 0.05]), 0.1)
    Om = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    assert J.T @ Om @ J == pytest.approx(Om, abs=1e-8)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-8)


def test_drift_measurement_matches_formula():
    rec = phase_drift(0.1, 101)
    assert abs(rec.measured - rec.accumulated) <= 2e-3
    framed, raw = measure_drift(0.1, 101)
    assert framed == rec.measured and raw == rec.measured_raw


def test_energy_bounded_for_duffing(duffing):
    s = PhaseState([0.0], [0.5])

    def energy(st):
        return 0.5 * (st.x**2 + st.y**2)[0] + st.y[0] ** 4 / 4

    e0 = energy(s)
    worst = 0.0
    for _ in range(2000):
        s = symplectic_euler_step(duffing, s, 0.05)
        worst = max(worst, abs(energy(s) - e0))
    assert worst < 0.05 * e0


def test_rk4_harmonic_period():
    tr = reference_integrate(HARMONIC, PhaseState([1.0], [0.0]), 2 * math.pi, 0.05)
    assert tr.x[0, -1] == pytest.approx(1.0, abs=1e-9)
    assert tr.y[0, -1] == pytest.approx(0.0, abs=1e-9)


def test_rk4_sample_times(duffing):
    times = np.linspace(0, 2, 5)
    tr = reference_integrate(duffing, PhaseState([0.0], [0.5]), 2.0, 0.1, times)
    assert tr.t == pytest.approx(times)
    assert tr.x.shape == (1, 5)
    assert tr.state(0).x == pytest.approx([0.0])


def test_rk4_conserves_energy(henon_heiles):
    x0, y0 = np.array([0.1, 0.0]), np.array([0.0, 0.2])
    tr = reference_integrate(henon_heiles, PhaseState(x0, y0), 10.0, 0.05)

    def energy(x, y):
        w = np.array(henon_heiles.omega0)
        return 0.5 * np.sum(w * (x**2 + y**2)) + 0.1 * (y[0] ** 2 * y[1] - y[1] ** 3 / 3)

    assert energy(tr.x[:, -1], tr.y[:, -1]) == pytest.approx(energy(x0, y0), abs=1e-10)
    gx, gy = real_gradient(henon_heiles, x0, y0)
    assert gx.shape == gy.shape == (2,)


def test_rk4_step_size_error():
    with pytest.raises(StepSizeError):
        reference_integrate(HARMONIC, PhaseState([1.0], [0.0]), 1.0, 0.1, tol=1e-30, min_dt=0.01)
