import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lvcgp.closed import PropagationPlan, propagate_closed
from lvcgp.model import SubsystemParameters, SystemBathModel
from lvcgp.observables import ObservableSet
from lvcgp.open_dynamics import OhmicSpec, discretize_ohmic, propagate_tcl2
from lvcgp.representation import ADIABATIC, DIABATIC, GridSpec, build_hamiltonian, prepare_initial_state

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SYMMETRIC = SubsystemParameters(Omega_X=2.0, Omega_Y=2.0, X0=1.5, C_Y=3.0)


class Setup:
    """Hamiltonian, initial state and observables for one model and representation."""

    def __init__(self, p, representation, scheme=None):
        scheme = scheme or GridSpec()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.H = build_hamiltonian(p, scheme, representation)
            self.state = prepare_initial_state(p, scheme, representation)
        self.obs = ObservableSet.build(p, self.state.scheme, representation)
        self.params = p

    def closed(self, plan=PropagationPlan()):
        return propagate_closed(self.H, self.state, plan, self.obs)

    def open(self, bath, plan=PropagationPlan(), **kw):
        return propagate_tcl2(SystemBathModel(self.params, bath), self.H, self.state, plan,
                              observables=self.obs, **kw)


class SetupCache:
    def __init__(self):
        self._setups = {}
        self._runs = {}

    def setup(self, p, representation, scheme=None):
        key = (p, representation, scheme)
        if key not in self._setups:
            self._setups[key] = Setup(p, representation, scheme)
        return self._setups[key]

    def closed(self, p, representation, plan=PropagationPlan(), scheme=None):
        key = ("closed", p, representation, plan, scheme)
        if key not in self._runs:
            self._runs[key] = self.setup(p, representation, scheme).closed(plan)
        return self._runs[key]

    def open(self, p, representation, spec: OhmicSpec, plan=PropagationPlan(), **kw):
        key = ("open", p, representation, spec, plan, tuple(sorted(kw.items())))
        if key not in self._runs:
            self._runs[key] = self.setup(p, representation).open(discretize_ohmic(spec), plan, **kw)
        return self._runs[key]


@pytest.fixture(scope="session")
def cache():
    return SetupCache()


@pytest.fixture(scope="session")
def symmetric():
    return SYMMETRIC


@pytest.fixture(scope="session")
def diabatic_setup(cache):
    return cache.setup(SYMMETRIC, DIABATIC)


@pytest.fixture(scope="session")
def adiabatic_setup(cache):
    return cache.setup(SYMMETRIC, ADIABATIC)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Print and record one PASS/FAIL line per acceptance criterion, then assert it."""

    def _report(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
