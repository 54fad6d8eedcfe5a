#!/usr/bin/env python3
"""Discretization checks for the symmetric model: grid vs oscillator basis,
TCL2 window (K + 50), TCL2 and split-step step halving.

Usage: python3 scripts/convergence_checks.py [--xi 0.3] [--t-final 100]
"""

import argparse
import time

import numpy as np

from lvcgp.closed import PropagationPlan, propagate_closed
from lvcgp.model import SubsystemParameters, SystemBathModel
from lvcgp.observables import ObservableSet
from lvcgp.open_dynamics import OhmicSpec, discretize_ohmic, propagate_tcl2
from lvcgp.representation import DIABATIC, GridSpec, HoBasisSpec, build_hamiltonian, prepare_initial_state


def setup(p, scheme):
    H = build_hamiltonian(p, scheme, DIABATIC)
    s0 = prepare_initial_state(p, scheme, DIABATIC)
    return H, s0, ObservableSet.build(p, s0.scheme, DIABATIC)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--xi", type=float, default=0.3)
    ap.add_argument("--t-final", type=float, default=100.0)
    args = ap.parse_args()
    p = SubsystemParameters(2.0, 2.0, 1.5, C_Y=3.0)
    plan = PropagationPlan(t_final=args.t_final)

    grid = setup(p, GridSpec())
    ho = setup(p, HoBasisSpec())
    a = propagate_closed(*grid[:2], plan, grid[2]).series
    b = propagate_closed(*ho[:2], plan, ho[2]).series
    print(f"grid 32x32 vs oscillator basis ({ho[0].dim} functions): max |dP_D| = "
          f"{np.max(np.abs(a.P_D - b.P_D)):.2e}")

    split = [propagate_closed(*grid[:2], PropagationPlan(t_final=10.0, propagator="split", split_dt=dt),
                              grid[2]).series for dt in (0.002, 0.001)]
    print(f"split-step halving (t <= 10): {np.max(np.abs(split[0].P_D - split[1].P_D)):.2e}")

    model = SystemBathModel(p, discretize_ohmic(OhmicSpec(args.xi)))
    runs = {}
    for label, kw in (("base", {}), ("half step", {"dt": 0.005})):
        t0 = time.perf_counter()
        runs[label] = propagate_tcl2(model, *grid[:2], plan, observables=grid[2], **kw)
        print(f"TCL2 {label}: K = {runs[label].diagnostics.n_states}, "
              f"trace drift {runs[label].diagnostics.trace_drift:.1e}, {time.perf_counter() - t0:.0f}s")
    k = runs["base"].diagnostics.n_states + 50
    runs["K+50"] = propagate_tcl2(model, *grid[:2], plan, observables=grid[2], n_states=k)
    for label in ("half step", "K+50"):
        d = np.abs(runs["base"].series.P_D - runs[label].series.P_D)
        print(f"TCL2 xi={args.xi} {label}: max |dP_D| = {d.max():.2e} at t = {plan.times[d.argmax()]:g}")


if __name__ == "__main__":
    main()
