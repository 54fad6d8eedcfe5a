import math

import numpy as np
import pytest
import scipy.integrate as si
from hypothesis import given
from hypothesis import strategies as st

from lvcgp.closed import PropagationPlan
from lvcgp.model import BathParameters, SystemBathModel
from lvcgp.open_dynamics import (DressedCache, OhmicSpec, bath_correlation, discretize_ohmic, dissipator,
                                 dressed_integral, propagate_tcl2, select_window, tcl2_rhs)

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([1.0, -1.0])


def test_ohmic_spec_validation():
    for kw in ({"xi": -0.1}, {"xi": 0.1, "Omega_c": 0.0}, {"xi": 0.1, "n_modes": 0},
               {"xi": 0.1, "couple_to": "Z"}, {"xi": 0.1, "temperature": -1.0}):
        with pytest.raises(ValueError):
            OhmicSpec(**kw)
    assert OhmicSpec(0.1).cutoff_max == pytest.approx(10.5)


def test_logarithmic_discretization():
    b = discretize_ohmic(OhmicSpec(0.1, Omega_c=3.5, n_modes=100, Omega_max=10.5))
    w0 = 3.5 * (1 - math.exp(-3.0)) / 100
    assert w0 == pytest.approx(0.0332575, abs=1e-7)
    assert b.Omega[0] == pytest.approx(0.0334164690464, abs=1e-12)
    assert b.Omega[-1] == pytest.approx(10.5, abs=1e-12)
    assert np.all(np.diff(b.Omega) > 0)
    assert not np.any(b.lambda_X)
    np.testing.assert_allclose(b.lambda_Y, b.Omega * math.sqrt(0.1 * w0), rtol=1e-14)


@given(st.floats(0.0, 1.0), st.floats(0.5, 5.0), st.integers(1, 300), st.floats(1.0, 5.0))
def test_discretized_reorganization_sum(xi, wc, n, ratio):
    # sum lambda^2 / Omega^2 = xi * Omega_c * (1 - exp(-Omega_max / Omega_c)) for any mode count
    b = discretize_ohmic(OhmicSpec(xi, wc, n, ratio * wc, couple_to="X"))
    total = float(np.sum(b.lambda_X**2 / b.Omega**2))
    assert total == pytest.approx(xi * wc * (1 - math.exp(-ratio)), rel=1e-10, abs=1e-14)
    assert b.Omega[-1] == pytest.approx(ratio * wc, rel=1e-10)


def test_zero_coupling_bath():
    b = discretize_ohmic(OhmicSpec(0.0))
    assert not np.any(b.lambda_X) and not np.any(b.lambda_Y)


def test_bath_correlation_values():
    assert bath_correlation(2.0, 0.0, 0.0) == pytest.approx(0.25)
    assert bath_correlation(2.0, 0.0, math.pi) == pytest.approx(0.25, abs=1e-15)
    assert bath_correlation(2.0, 0.0, math.pi / 4) == pytest.approx(-0.25j, abs=1e-15)
    with pytest.raises(ValueError):
        bath_correlation(1.0, -0.5, 0.0)


def test_bath_correlation_classical_limit():
    # coth(W/2T)/(2W) at t=0 approaches T/W^2 + 1/12T for large T
    for T in (50.0, 500.0):
        W = 1.3
        c = bath_correlation(W, T, 0.0).real
        assert c == pytest.approx(T / W**2 + 1 / (12 * T), rel=1e-6)


@pytest.mark.parametrize("omega,Omega,T,t", [(1.0, 2.0, 0.0, 1.0), (-0.7, 1.3, 0.0, 5.0),
                                             (0.4, 0.9, 0.8, 3.0), (-1.1, 1.1, 2.0, 2.5)])
def test_dressed_integral_quadrature(omega, Omega, T, t):
    f = lambda s: np.exp(-1j * omega * s) * bath_correlation(Omega, T, s)
    re = si.quad(lambda s: f(s).real, 0, t, epsabs=1e-13, epsrel=1e-13)[0]
    im = si.quad(lambda s: f(s).imag, 0, t, epsabs=1e-13, epsrel=1e-13)[0]
    assert dressed_integral(omega, Omega, T, t) == pytest.approx(re + 1j * im, abs=1e-12)


def test_dressed_integral_frozen_and_limits():
    assert dressed_integral(1.0, 2.0, 0.0, 1.0) == pytest.approx(0.0117600 - 0.1658327j, abs=1e-7)
    assert dressed_integral(0.3, 1.0, 0.0, 0.0) == 0
    assert dressed_integral(-2.0, 2.0, 0.0, 3.0) == pytest.approx(0.75)
    # both sides of the series threshold follow the Taylor expansion in the detuning
    for x in (5e-9, 2e-8, 1e-6):
        taylor = (3.0 - 0.5j * x * 9.0 - x**2 * 27.0 / 6.0) / 4.0
        assert dressed_integral(-2.0 + x, 2.0, 0.0, 3.0) == pytest.approx(taylor, abs=1e-8)


def _toy_bath():
    return BathParameters([1.0, 1.7], [0.05, 0.04], [0.03, 0.0])


def _toy_ops():
    # coupling operators in the eigenbasis of H_S = diag(0, 1.2)
    return np.array([0.0, 1.2]), {"X": SX, "Y": SZ}


def test_kernel_matches_mode_sum():
    E, ops = _toy_ops()
    bath = _toy_bath()
    cache = DressedCache(E, ops, bath)
    t = 2.3
    S = cache.kernel(t)
    w = E[:, None] - E[None, :]
    lam = {"X": bath.lambda_X, "Y": bath.lambda_Y}
    for (a, b), val in S.items():
        ref = sum(lam[a][j] * lam[b][j] * dressed_integral(w, bath.Omega[j], 0.0, t) for j in range(2))
        np.testing.assert_allclose(val, ref, atol=1e-15)
    assert all(np.all(v == 0) for v in cache.kernel(0.0).values())


def test_kernel_resonant_pairs():
    # Bohr frequency -1.2 meets the mode at 1.2
    E = np.array([0.0, 1.2])
    bath = BathParameters([1.2], [0.1], [0.0], 0.7)
    S = DressedCache(E, {"X": SX}, bath).kernel(4.0)[("X", "X")]
    w = E[:, None] - E[None, :]
    np.testing.assert_allclose(S, 0.01 * dressed_integral(w, 1.2, 0.7, 4.0), atol=1e-15)


def _brute_generator(rho, t, E, ops, bath):
    """TCL2 right-hand side from the memory integral over the correlation function."""
    H = np.diag(E)
    lam = {"X": bath.lambda_X, "Y": bath.lambda_Y}
    out = -1j * (H @ rho - rho @ H)

    def integrand(s):
        U = np.diag(np.exp(-1j * E * s))
        acc = np.zeros((2, 2), complex)
        for a in ops:
            for b in ops:
                C = sum(lam[a][j] * lam[b][j] * bath_correlation(bath.Omega[j], bath.temperature, s)
                        for j in range(bath.n_modes))
                Ab = U @ ops[b] @ U.conj().T
                A = ops[a]
                acc -= C * (A @ Ab @ rho - Ab @ rho @ A) - np.conj(C) * (A @ rho @ Ab - rho @ Ab @ A)
        return acc

    for i in range(2):
        for k in range(2):
            for part in (np.real, np.imag):
                val = si.quad(lambda s: part(integrand(s)[i, k]), 0, t, epsabs=1e-14, epsrel=1e-12)[0]
                out[i, k] += val if part is np.real else 1j * val
    return out


@pytest.mark.parametrize("T", [0.0, 0.9])
def test_generator_matches_memory_integral(T):
    E, ops = _toy_ops()
    b = _toy_bath()
    bath = BathParameters(b.Omega, b.lambda_X, b.lambda_Y, T)
    rho = np.array([[0.36, 0.3 - 0.2j], [0.3 + 0.2j, 0.64]])
    t = 3.1
    got = tcl2_rhs(rho, t, E, DressedCache(E, ops, bath))
    np.testing.assert_allclose(got, _brute_generator(rho, t, E, ops, bath), atol=1e-12)


def test_generator_limits():
    E, ops = _toy_ops()
    rho = np.array([[0.5, 0.1j], [-0.1j, 0.5]])
    free = -1j * (E[:, None] - E[None, :]) * rho
    np.testing.assert_allclose(tcl2_rhs(rho, 0.0, E, DressedCache(E, ops, _toy_bath())), free, atol=1e-16)
    silent = BathParameters([1.0], [0.0], [0.0])
    np.testing.assert_array_equal(tcl2_rhs(rho, 2.0, E, DressedCache(E, ops, silent)), free)


@given(st.integers(0, 2**31 - 1))
def test_dissipator_is_traceless_and_hermitian(seed):
    r = np.random.default_rng(seed)
    n = 5
    M = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    rho = M @ M.conj().T
    rho /= np.trace(rho)
    A = r.normal(size=(n, n))
    A = A + A.T
    B = {"X": r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))}
    D = dissipator(rho, B, {"X": A})
    assert abs(np.trace(D)) <= 1e-12
    np.testing.assert_allclose(D, D.conj().T, atol=1e-12)


def _exact_reduced(E, ops, bath, psi, times, nfock=7):
    """Reduced density from unitary evolution of system plus truncated bath oscillators."""
    a = np.diag(np.sqrt(np.arange(1, nfock)), 1)
    eye_f = np.eye(nfock)
    m = bath.n_modes
    dim = 2 * nfock**m

    def embed(op, slot):
        mats = [np.eye(2)] + [eye_f] * m
        mats[slot] = op
        out = mats[0]
        for x in mats[1:]:
            out = np.kron(out, x)
        return out

    H = embed(np.diag(E), 0)
    lam = {"X": bath.lambda_X, "Y": bath.lambda_Y}
    for j, W in enumerate(bath.Omega):
        H = H + embed(W * (a.T @ a), j + 1)
        q = embed((a + a.T) / math.sqrt(2 * W), j + 1)
        for ax, A in ops.items():
            H = H + lam[ax][j] * embed(A, 0) @ q
    vac = np.zeros(nfock**m)
    vac[0] = 1.0
    state = np.kron(psi, vac).astype(complex)
    w, V = np.linalg.eigh(H)
    c = V.conj().T @ state
    out = []
    for t in times:
        phi = (V @ (c * np.exp(-1j * w * t))).reshape(2, -1)
        out.append(phi @ phi.conj().T)
    assert dim == H.shape[0]
    return np.array(out)


def _tcl2_vs_exact(scale):
    E, ops = _toy_ops()
    b = _toy_bath()
    bath = BathParameters(b.Omega, scale * b.lambda_X, scale * b.lambda_Y)
    psi = np.array([0.6, 0.8])
    times = np.linspace(0.0, 12.0, 25)
    exact = _exact_reduced(E, ops, bath, psi, times)
    cache = DressedCache(E, ops, bath)

    def f(t, y):
        return tcl2_rhs(y.reshape(2, 2), t, E, cache).ravel()

    sol = si.solve_ivp(f, (0, times[-1]), np.outer(psi, psi).astype(complex).ravel(), t_eval=times,
                       rtol=1e-11, atol=1e-13, method="DOP853")
    tcl = sol.y.T.reshape(-1, 2, 2)
    phases = np.exp(-1j * np.outer(times, E)) * psi
    free = np.einsum("ti,tj->tij", phases, phases.conj())
    return np.max(np.abs(exact - free)), np.max(np.abs(tcl - exact))


def test_weak_coupling_matches_exact_dynamics():
    effect, err = _tcl2_vs_exact(1.0)
    effect_h, err_h = _tcl2_vs_exact(0.5)
    assert effect > 0.05
    assert err < 0.03 * effect
    # bath effect is second order in the coupling, the TCL2 residual fourth order
    assert effect / effect_h == pytest.approx(4.0, rel=0.1)
    assert err / err_h == pytest.approx(16.0, rel=0.1)


def test_select_window():
    E = np.array([1.0, 2.0, 15.9, 16.1, 30.0])
    assert select_window(E, 15.0) == 3
    assert select_window(np.array([0.0, 20.0, 40.0]), 15.0) == 2


def test_propagate_tcl2_rejects_bad_input(diabatic_setup):
    m = SystemBathModel(diabatic_setup.params, discretize_ohmic(OhmicSpec(0.1)))
    with pytest.raises(ValueError, match="RK4"):
        propagate_tcl2(m, diabatic_setup.H, diabatic_setup.state, PropagationPlan(t_final=1), dt=0.02)
    with pytest.raises(ValueError, match="multiples"):
        propagate_tcl2(m, diabatic_setup.H, diabatic_setup.state, PropagationPlan(t_final=1, dt_output=0.333),
                       dt=0.01)


@pytest.mark.parametrize("rep", ["diabatic", "adiabatic"])
def test_decoupled_bath_reproduces_closed(cache, symmetric, rep):
    plan = PropagationPlan(t_final=20.0)
    closed = cache.closed(symmetric, rep, plan).series
    opened = cache.open(symmetric, rep, OhmicSpec(0.0), plan).series
    assert np.max(np.abs(closed.P_D - opened.P_D)) <= 1e-6
    assert np.max(np.abs(opened.trace - 1.0)) <= 1e-8


def test_open_run_diagnostics(cache, symmetric):
    r = cache.open(symmetric, "diabatic", OhmicSpec(0.3), PropagationPlan(t_final=20.0))
    d = r.diagnostics
    assert d.n_states == 100
    # the out-of-window tail is carried unitarily, so the trace stays exact
    assert 0.999 < d.captured_weight < 1.0
    assert d.trace_drift <= 1e-8
    assert d.hermiticity_residual <= 1e-9
    s = r.series
    np.testing.assert_allclose(s.pop_adi_1 + s.pop_adi_2, s.trace, atol=1e-8)
    assert np.all(np.linalg.eigvalsh(r.final_rho) > -1e-4)


@pytest.mark.slow
def test_window_plus_fifty_states(cache, symmetric):
    plan = PropagationPlan(t_final=40.0)
    spec = OhmicSpec(0.3)
    base = cache.open(symmetric, "diabatic", spec, plan)
    wide = cache.open(symmetric, "diabatic", spec, plan, n_states=base.diagnostics.n_states + 50)
    assert np.max(np.abs(base.series.P_D - wide.series.P_D)) <= 1e-4
