"""Acceptance criteria 1-11. Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s``; the lines are also collected
in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from lvcgp.closed import PropagationPlan, evolve
from lvcgp.effective_modes import full_hessian, lvc_to_system_bath
from lvcgp.model import LvcParameters, SubsystemParameters, derive_geometry
from lvcgp.observables import node_diagnostic
from lvcgp.open_dynamics import OhmicSpec
from lvcgp.representation import ADIABATIC, DIABATIC, GridSpec, HoBasisSpec, build_diabatic
from lvcgp.tdpt import channel_1a, vibronic_level

FULL = PropagationPlan(t_final=100.0)
C_TILT = SubsystemParameters(2.0, 2.0, 1.5, C_Y=4.0)


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _gap(a, b, t_max=None):
    mask = slice(None) if t_max is None else a.times <= t_max + 1e-9
    return float(np.max(np.abs(a.P_D[mask] - b.P_D[mask])))


def _early_rate(series, window=10.0):
    # mean slope of P_D over [0, window], from the time-averaged depletion
    m = series.times <= window + 1e-9
    return 2.0 * (series.P_D[0] - float(np.mean(series.P_D[m]))) / window


def _node(result, p):
    return node_diagnostic(result.snapshots[0], derive_geometry(p))


def test_criterion_1_gp_blocking(cache, symmetric, report):
    gp, t_gp = _timed(cache.closed, symmetric, DIABATIC, FULL)
    nogp, t_nogp = _timed(cache.closed, symmetric, ADIABATIC, FULL)
    lo_gp, lo_nogp = float(np.min(gp.series.P_D)), float(np.min(nogp.series.P_D))
    ok = lo_gp >= 0.9 and lo_nogp < 0.5 and max(t_gp, t_nogp) <= 300
    report(1, ok, f"min P_D with GP {lo_gp:.4f} (>= 0.9), without GP {lo_nogp:.4f} (< 0.5); "
                  f"runtime {t_gp:.1f}s / {t_nogp:.1f}s")


def test_criterion_2_nodal_line(cache, symmetric, report):
    plan = PropagationPlan(t_final=100.0, snapshot_times=(100.0,))
    t0 = time.perf_counter()
    gp = _node(cache.closed(symmetric, DIABATIC, plan), symmetric)
    nogp = _node(cache.closed(symmetric, ADIABATIC, plan), symmetric)
    elapsed = time.perf_counter() - t0
    ok = gp.strip_fraction < 0.1 * nogp.strip_fraction and elapsed <= 300
    report(2, ok, f"strip fraction at t=100 with GP {gp.strip_fraction:.4f} vs 0.1 x no-GP "
                  f"{0.1 * nogp.strip_fraction:.4f}; runtime {elapsed:.1f}s")


def test_criterion_3_constant_coupling_sweep(cache, report):
    t0 = time.perf_counter()
    gaps = []
    for d12 in (0.0, 0.4, 0.8):
        p = SubsystemParameters(2.0, 2.0, 1.5, C_Y=4.0, Delta12=d12)
        gaps.append(_gap(cache.closed(p, DIABATIC, FULL).series, cache.closed(p, ADIABATIC, FULL).series))
    elapsed = time.perf_counter() - t0
    ok = gaps[0] > gaps[1] > gaps[2] and elapsed <= 900
    report(3, ok, "max GP/no-GP gap for Delta12 = 0, 0.4, 0.8: "
                  + ", ".join(f"{g:.4f}" for g in gaps) + f" (strictly decreasing); runtime {elapsed:.1f}s")


def test_criterion_4_coupling_tilt(cache, report):
    t0 = time.perf_counter()
    runs = {}
    for cx in (0.0, 2.0):
        p = SubsystemParameters(2.0, 2.0, 1.5, C_X=cx, C_Y=4.0)
        runs[cx] = (cache.closed(p, DIABATIC, FULL).series, cache.closed(p, ADIABATIC, FULL).series)
    elapsed = time.perf_counter() - t0
    early0, early2 = _gap(*runs[0.0], 20.0), _gap(*runs[2.0], 20.0)
    late2 = _gap(*runs[2.0])
    ok = early2 < early0 and late2 > 0.05 and elapsed <= 900
    report(4, ok, f"early gap (t <= 20) C_X=0 {early0:.4f} -> C_X=2 {early2:.4f}; "
                  f"gap over t <= 100 at C_X=2 {late2:.4f} (> 0.05); runtime {elapsed:.1f}s")


def test_criterion_5_node_dissolution(cache, report):
    p = SubsystemParameters(2.0, 2.0, 1.5, C_X=2.0, C_Y=6.0)
    plan = PropagationPlan(t_final=100.0, snapshot_times=(15.0,))
    gp_run, nogp_run = cache.closed(p, DIABATIC, plan), cache.closed(p, ADIABATIC, plan)
    gp, nogp = _node(gp_run, p), _node(nogp_run, p)
    within = [abs(d.strip_fraction - d.baseline) <= 0.5 * d.baseline for d in (gp, nogp)]
    one_sided = all(d.strip_fraction >= 0.5 * d.baseline for d in (gp, nogp))
    gap = _gap(gp_run.series, nogp_run.series)
    ok = all(within) and gap > 0.05
    report(5, ok, f"t=15 strip fraction GP {gp.strip_fraction:.4f}, no-GP {nogp.strip_fraction:.4f}, "
                  f"baseline {gp.baseline:.4f} (within 50%: GP {within[0]}, no-GP {within[1]}; "
                  f"node-absent reading sf >= 0.5 baseline: {one_sided}); population gap {gap:.4f} (> 0.05)")


@pytest.fixture(scope="module")
def coupling_bath_runs(cache, symmetric):
    rates, times = {}, {}
    for rep in (DIABATIC, ADIABATIC):
        for xi in (0.0, 0.1, 0.3):
            r, dt = _timed(cache.open, symmetric, rep, OhmicSpec(xi, couple_to="Y"), PropagationPlan(t_final=10.0))
            rates[rep, xi] = _early_rate(r.series)
            times[rep, xi] = dt
    return rates, times


DENSITY_PLAN = PropagationPlan(t_final=100.0, snapshot_times=(79.5,))


def test_criterion_6_bath_on_coupling_mode(cache, symmetric, coupling_bath_runs, report):
    rates, times = coupling_bath_runs
    mono = all(rates[rep, 0.0] < rates[rep, 0.1] < rates[rep, 0.3] for rep in (DIABATIC, ADIABATIC))
    dens, t_dens = _timed(cache.open, symmetric, DIABATIC, OhmicSpec(0.3, couple_to="Y"), DENSITY_PLAN)
    node = _node(dens, symmetric)
    absent = node.strip_fraction >= 0.5 * node.baseline
    slowest = max(max(times.values()), t_dens)
    ok = mono and absent and slowest <= 1800
    fmt = lambda rep: ", ".join(f"{rates[rep, xi]:.5f}" for xi in (0.0, 0.1, 0.3))
    report(6, ok, f"early rates xi = 0, 0.1, 0.3: GP [{fmt(DIABATIC)}], no-GP [{fmt(ADIABATIC)}] "
                  f"(increasing: {mono}); xi=0.3 GP strip fraction at t=79.5 {node.strip_fraction:.4f} "
                  f"vs baseline {node.baseline:.4f} (node absent: {absent}); slowest run {slowest:.1f}s")


def test_criterion_7_bath_on_tuning_mode(cache, symmetric, report):
    r, elapsed = _timed(cache.open, symmetric, DIABATIC, OhmicSpec(0.015, couple_to="X"), DENSITY_PLAN)
    lo = float(np.min(r.series.P_D))
    node = _node(r, symmetric)
    ok = lo >= 0.95 and node.strip_fraction < 0.1 * node.baseline and elapsed <= 1800
    report(7, ok, f"xi=0.015 on X: min P_D {lo:.4f} (>= 0.95); GP strip fraction at t=79.5 "
                  f"{node.strip_fraction:.4f} = {node.ratio:.3f} x baseline (< 0.1 x); runtime {elapsed:.1f}s")


def test_criterion_8_oracle_equivalence(cache, symmetric, report):
    grid = cache.closed(symmetric, DIABATIC, FULL).series
    ho = cache.closed(symmetric, DIABATIC, FULL, scheme=HoBasisSpec()).series
    d_basis = float(np.max(np.abs(grid.P_D - ho.P_D)))
    d_tcl = 0.0
    for rep in (DIABATIC, ADIABATIC):
        closed = cache.closed(symmetric, rep, FULL).series
        opened = cache.open(symmetric, rep, OhmicSpec(0.0), FULL).series
        d_tcl = max(d_tcl, float(np.max(np.abs(closed.P_D - opened.P_D))))
    ok = d_basis <= 1e-3 and d_tcl <= 1e-6
    report(8, ok, f"grid vs oscillator basis max |dP_D| {d_basis:.2e} (<= 1e-3); "
                  f"TCL2 at xi=0 vs closed {d_tcl:.2e} (<= 1e-6)")


def _random_lvc(rng, n):
    omega = rng.uniform(0.3, 3.0, n)
    kappa, kappa_t, c = rng.uniform(-2, 2, (3, n))
    return LvcParameters(omega, kappa, kappa_t, c, rng.uniform(-1, 1))


def test_criterion_9_transformation_suite(report):
    rng = np.random.default_rng(9)
    orth = spec = conf = 0.0
    for n in [2, 3, 5, 8, 20, 102] * 4:
        lvc = _random_lvc(rng, n)
        res = lvc_to_system_bath(lvc)
        O = res.transform.full
        orth = max(orth, float(np.max(np.abs(O @ O.T - np.eye(n)))))
        ev = np.linalg.eigvalsh(full_hessian(res.model))
        spec = max(spec, float(np.max(np.abs(ev - np.sort(lvc.omega**2)))))
        for g in (res.translated.d, res.translated.c):
            conf = max(conf, float(np.max(np.abs((O @ g)[2:]), initial=0.0)))
    trip = 0.0
    for lvc in (LvcParameters([2.0, 2.0], [-6.0, 0.0], [6.0, 0.0], [0.0, 3.0]),
                LvcParameters([1.0, 2.0], [-5.0, 1.0], [7.0, 1.0], [0.5, 2.0], delta=0.4),
                _random_lvc(rng, 2), _random_lvc(rng, 2)):
        res = lvc_to_system_bath(lvc)
        for q in rng.uniform(-3, 3, (200, 2)):
            trip = max(trip, float(np.max(np.abs(res.potential_matrix(q) - lvc.potential_matrix(q)))))
    ok = orth <= 1e-12 and spec <= 1e-10 and conf <= 1e-12 and trip <= 1e-12
    report(9, ok, f"orthogonality {orth:.1e} (<= 1e-12), Hessian spectrum {spec:.1e} (<= 1e-10), "
                  f"confinement {conf:.1e} (<= 1e-12), 2-mode round trip {trip:.1e} (<= 1e-12)")


def _acceptor_01(p, times):
    g = GridSpec()
    H = build_diabatic(p, g)
    d0 = vibronic_level(p, g, "D", 0, 0)
    a01 = vibronic_level(p, g, "A", 0, 1)
    return np.abs(a01 @ evolve(H, d0.astype(complex), times)) ** 2


def test_criterion_10_tdpt_agreement(report):
    times = np.linspace(0.05, math.pi, 63)
    errs = {}
    for cy, delta in ((0.1, 0.0), (0.25, 0.0), (0.5, 0.0), (0.5, 2.0)):
        p = SubsystemParameters(2.0, 2.0, 1.5, Delta=delta, C_Y=cy)
        est = channel_1a(p)(times)
        errs[cy, delta] = float(np.max(np.abs(_acceptor_01(p, times) - est)) / np.max(est))
    on = _acceptor_01(SubsystemParameters(2.0, 2.0, 1.5, Delta=2.0, C_Y=0.5), [5.0])[0]
    off = _acceptor_01(SubsystemParameters(2.0, 2.0, 1.5, C_Y=0.5), [5.0])[0]
    ok = max(errs.values()) <= 0.1 and on >= 10 * off
    report(10, ok, "channel 1a vs full |01>_A population, peak-relative error "
                   + ", ".join(f"C_Y={cy} Delta={d:g}: {e:.4f}" for (cy, d), e in errs.items())
                   + f" (<= 0.1); resonance gain at t=5 {on / off:.1f}x (>= 10x)")


def test_criterion_11_numerical_hygiene(cache, symmetric, report):
    closed = cache.closed(symmetric, DIABATIC, FULL).series
    norm = float(np.max(np.abs(closed.trace - 1.0)))
    energy = float(np.max(np.abs(closed.energy - closed.energy[0])))
    spec = OhmicSpec(0.3, couple_to="Y")
    base = cache.open(symmetric, DIABATIC, spec, DENSITY_PLAN)
    half = cache.open(symmetric, DIABATIC, spec, DENSITY_PLAN, dt=0.005)
    trace = max(base.diagnostics.trace_drift, half.diagnostics.trace_drift)
    halving_tcl = float(np.max(np.abs(base.series.P_D - half.series.P_D)))
    split = [cache.closed(symmetric, DIABATIC, PropagationPlan(t_final=10.0, propagator="split", split_dt=dt))
             for dt in (0.002, 0.001)]
    halving_split = float(np.max(np.abs(split[0].series.P_D - split[1].series.P_D)))
    ok = max(norm, energy, trace) <= 1e-8 and max(halving_tcl, halving_split) <= 1e-6
    report(11, ok, f"closed norm drift {norm:.1e}, energy drift {energy:.1e}; TCL2 trace drift over 100 a.u. "
                   f"{trace:.1e} (<= 1e-8); step halving TCL2 {halving_tcl:.1e}, split {halving_split:.1e} "
                   f"(<= 1e-6)")
