"""Acceptance criteria 1-8, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line, also under output capture.
"""

import contextlib
import itertools
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_hamiltonian, random_state
from qtorus.baselines import PhaseState, phase_drift, phase_per_step, reference_integrate
from qtorus.config import preset
from qtorus.diagnostics import FrequencyDomain, condition_report, diophantine_check, resonant_measure_mc
from qtorus.hamiltonian import PolynomialHamiltonian, hessian_kernels, real_gradient, vector_field
from qtorus.lattice import FourierVector, LatticeBox, ModeOrder, flip, initial_state, is_resonant, project, sup_norm
from qtorus.operator import assemble_S, assemble_T
from qtorus.solver import SolverConfig, evaluate_solution, q_update, residual_F, run

A = math.exp(-1)
FLOOR = 1e-13


@contextlib.contextmanager
def criterion(capsys, number, title):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException:
        with capsys.disabled():
            print(f"\ncriterion {number}: FAIL  {title}  {_fmt(detail)}")
        raise
    with capsys.disabled():
        elapsed = time.perf_counter() - start
        print(f"\ncriterion {number}: PASS  {title}  ({elapsed:.2f} s) {_fmt(detail)}")


def _fmt(detail):
    return " ".join(f"{k}={v}" for k, v in detail.items())


def _super_exponential(residuals, theta=1.2):
    """log F(r+1) / log F(r) >= theta for r >= 1 until the floor."""
    for r in range(1, len(residuals) - 1):
        if residuals[r] <= FLOOR:
            break
        nxt = residuals[r + 1]
        if nxt <= FLOOR:
            continue
        if math.log(nxt) / math.log(residuals[r]) < theta:
            return False
    return True


def _endpoint_errors(state, H, t_end=10.0):
    """Error at t_end of each iterate against a certified integration of the final one."""
    _, (x0, y0) = evaluate_solution(state.zhat_r, state.omega_final, 0.0)
    ref = reference_integrate(H, PhaseState(x0, y0), t_end, 0.01, tol=1e-10)
    errors = []
    for rec, (_, z) in zip(state.history, state.iterates):
        _, (x, y) = evaluate_solution(z, rec.omega_updated, t_end)
        errors.append(float(np.hypot(np.linalg.norm(x - ref.x[:, -1]), np.linalg.norm(y - ref.y[:, -1]))))
    return errors


def _strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def test_criterion_1_phase_drift(capsys):
    with criterion(capsys, 1, "symplectic Euler phase drift") as info:
        start = time.perf_counter()
        for h in (0.05, 0.1, 0.5, 1.0):
            theta = phase_per_step(h)
            assert abs(theta - math.acos(1 - h * h / 2)) <= 1e-12
            assert abs(math.sin(theta) - h * math.sqrt(1 - h * h / 4)) <= 1e-12
            assert theta - h >= h**3 / 24
        rec = phase_drift(0.1, 101)
        info["drift_gap"] = f"{abs(rec.measured - rec.accumulated):.2e}"
        assert abs(rec.measured - rec.accumulated) <= 2e-3
        assert time.perf_counter() - start < 1.0


def test_criterion_2_duffing(capsys):
    with criterion(capsys, 2, "Duffing epsilon=1 convergence") as info:
        start = time.perf_counter()
        cfg = preset("duffing")
        H = cfg.hamiltonian()
        state = run(H, cfg.solver_config())
        res = [h.residual_l2 for h in state.history]
        info["residuals"] = [f"{r:.2e}" for r in res]
        assert abs(state.history[1].omega[0] - (1 + 3 / (4 * math.e**2))) <= 1e-12
        assert len(res) <= 6 and _strictly_decreasing(res)
        assert _super_exponential(res)
        errors = _endpoint_errors(state, H)
        info["t10_errors"] = [f"{e:.1e}" for e in errors]
        assert _strictly_decreasing(errors)
        assert time.perf_counter() - start < 30.0


def test_criterion_3_henon_heiles(capsys):
    with criterion(capsys, 3, "Henon-Heiles epsilon=0.1 convergence") as info:
        start = time.perf_counter()
        cfg = preset("henon-heiles")
        H = cfg.hamiltonian()
        X = vector_field(H, initial_state(2, A))
        assert {k for j, k in X if j == 0} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        assert {k for j, k in X if j == 1} == {(0, 0), (2, 0), (-2, 0), (0, 2), (0, -2)}
        state = run(H, cfg.solver_config())
        assert np.array_equal(state.history[1].omega, state.history[0].omega)
        res = [h.residual_l2 for h in state.history]
        info["residuals"] = [f"{r:.2e}" for r in res]
        assert _strictly_decreasing(res) and _super_exponential(res)
        errors = _endpoint_errors(state, H)
        info["t10_errors"] = [f"{e:.1e}" for e in errors]
        assert _strictly_decreasing(errors)
        assert time.perf_counter() - start < 120.0


def _residual_map(H, zp, order, N):
    omega = q_update(H, zp, A)
    return project(residual_F(H, zp, omega, A), N).to_vector(order)


def test_criterion_4_jacobian(capsys):
    with criterion(capsys, 4, "tangent operator against finite differences") as info:
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = 1 + seed % 2
            H = random_hamiltonian(rng, n, max_degree=4)
            zfull = random_state(rng, n, N=1, extra=3)
            zp = zfull.without_resonant()
            box = LatticeBox(2, n)
            order = ModeOrder(box)
            T = assemble_T(H, zfull, q_update(H, zp, A), box)
            fd = np.zeros((T.rows, T.rows))
            for c, mode in enumerate(order.modes):
                d = FourierVector(n, {mode: 1e-6})
                fd[:, c] = (_residual_map(H, zp + d, order, 2) - _residual_map(H, zp - d, order, 2)) / 2e-6
            rel = np.linalg.norm(T.matrix - fd) / np.linalg.norm(fd)
            worst = max(worst, rel)
            ker = hessian_kernels(H, zfull)
            S = assemble_S(ker, order)
            for r, (j, k) in enumerate(order.modes):
                for c, (i, kp) in enumerate(order.modes):
                    km = tuple(a - b for a, b in zip(k, kp))
                    ks = tuple(a + b for a, b in zip(k, kp))
                    assert S[r, c] == ker.toeplitz[j][i].at([km])[0] + ker.hankel[j][i].at([ks])[0]
        info["worst_rel"] = f"{worst:.1e}"
        assert worst <= 1e-5


def _ode_residual(z, omega, H, t):
    _, (x, y) = evaluate_solution(z, omega, t)
    _, (dx, dy) = evaluate_solution(z, omega, t, derivative=True)
    hx, hy = real_gradient(H, x, y)
    return float(max(np.abs(dx + hy).max(), np.abs(dy - hx).max()))


def test_criterion_5_ode_substitution(capsys):
    with criterion(capsys, 5, "Duffing equations of motion along the evaluated solution") as info:
        cfg = preset("duffing")
        H = cfg.hamiltonian()
        state = run(H, cfg.solver_config())
        assert state.termination == "converged"
        t = np.linspace(0.0, 10.0, 1000)
        res = [_ode_residual(z, rec.omega_updated, H, t) for rec, (_, z) in zip(state.history, state.iterates)]
        info["residuals"] = [f"{r:.1e}" for r in res]
        assert res[-1] < 1e-6
        assert _strictly_decreasing(res)


def _brute(omega, M_box, tau):
    R = 2 * (M_box + 1)
    ok, best, arg = True, math.inf, None
    for k in itertools.product(range(-R, R + 1), repeat=len(omega)):
        if any(k):
            dot = abs(sum(a * w for a, w in zip(k, omega)))
            length = sum(map(abs, k))
            ok = ok and not dot < length ** (-tau)
            if dot * length**tau < best:
                best, arg = dot * length**tau, k
    return ok, arg, best


def test_criterion_6_resonance(capsys):
    with criterion(capsys, 6, "Diophantine scans and nearly-resonant measure") as info:
        rng = np.random.default_rng(0)
        cases = 0
        for n in (1, 2):
            for M_box in range(11):
                for omega in [tuple(rng.uniform(0.5, 2.0, n)) for _ in range(3)] + [(1.0,) * n]:
                    for tau in (1.5, 3.0):
                        ok, k, margin = diophantine_check(omega, M_box, tau)
                        bok, bk, bmargin = _brute(omega, M_box, tau)
                        assert ok == bok and k == bk and margin == pytest.approx(bmargin, rel=1e-12, abs=0)
                        cases += 1
                assert not diophantine_check((1.0, 1.0), M_box, 2.0)[0]
        dom = FrequencyDomain((1.0, 1.0), (2.0, 2.0))
        fr = [resonant_measure_mc(dom, 2, tau, 5000, 11) for tau in (1.5, 2.0, 3.0, 4.0)]
        assert fr == [resonant_measure_mc(dom, 2, tau, 5000, 11) for tau in (1.5, 2.0, 3.0, 4.0)]
        assert all(b <= a for a, b in zip(fr, fr[1:]))
        info["cases"] = cases
        info["fractions"] = fr


@st.composite
def _vectors(draw):
    n = draw(st.integers(1, 3))
    data = draw(st.dictionaries(
        st.tuples(st.integers(0, n - 1), st.tuples(*[st.integers(-5, 5)] * n)),
        st.floats(-5, 5, allow_nan=False), max_size=10))
    return FourierVector(n, data), draw(st.integers(0, 6))


def test_criterion_7_trivial_limits(capsys):
    with criterion(capsys, 7, "epsilon=0 limit and lattice invariants") as info:
        for n in (1, 2):
            H = PolynomialHamiltonian(n, (1.0, math.sqrt(2))[:n], random_hamiltonian(np.random.default_rng(n), n).terms, 0.0)
            state = run(H, SolverConfig())
            assert state.r == 0 and state.residual == 0.0
            assert np.array_equal(state.omega_final, np.array(H.omega0))

        count = {"project": 0, "flip": 0, "mode_order": 0}

        @settings(max_examples=1000, deadline=None, database=None)
        @given(_vectors())
        def project_flip(case):
            v, N = case
            p = project(v, N)
            assert project(p, N) == p and all(sup_norm(k) <= N for _, k in p)
            count["project"] += 1
            assert flip(flip(v)) == v and flip(project(v, N)) == project(flip(v), N)
            count["flip"] += 1

        @settings(max_examples=1000, deadline=None, database=None)
        @given(_vectors())
        def orders(case):
            v, N = case
            N = min(N, 3)
            order = ModeOrder(LatticeBox(N, v.n))
            for r, (j, k) in enumerate(order.modes):
                assert order.row(j, k) == r and not is_resonant(j, k)
            keys = [(k, j) for j, k in order.modes]
            assert keys == sorted(keys) and len(set(keys)) == len(keys)
            back = FourierVector.from_vector(v.to_vector(order), order)
            assert back.pruned() == project(v, N).without_resonant().pruned()
            count["mode_order"] += 1

        project_flip()
        orders()
        info.update(count)
        assert min(count.values()) >= 1000


def test_criterion_8_condition_diagnostics(capsys):
    with criterion(capsys, 8, "Condition-1 runtime diagnostics") as info:
        checked = 0
        for name in ("duffing", "henon-heiles"):
            cfg = preset(name)
            H = cfg.hamiltonian()
            state = run(H, cfg.solver_config())
            for rec, (_, z) in zip(state.history, state.iterates):
                if rec.N > 8:
                    continue
                T = assemble_T(H, z, rec.omega_updated, LatticeBox(rec.N, H.n))
                rep = condition_report(T, 0.5, rec.N, rec.r)
                assert math.isfinite(rep.log_inverse_norm)
                checked += 1
        omega = (1.0, 1.0 + 1e-9)
        hh = preset("henon-heiles").hamiltonian()
        H = PolynomialHamiltonian(2, omega, hh.terms, 0.1)
        T = assemble_T(H, initial_state(2, A), omega, LatticeBox(3, 2))
        rep = condition_report(T, 0.5, 3)
        info["checked"] = checked
        info["near_resonant_log_inv"] = f"{rep.log_inverse_norm:.2f}"
        assert not rep.inversion_ok
