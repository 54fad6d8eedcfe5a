"""Unitary propagation of the isolated subsystem."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .observables import DensityGrid, ObservableSet, TimeSeries
from .representation import DIABATIC, DensityState, DiscretizedHamiltonian, GridSpec
from .model import potential_fields

EIGEN = "eigen"
SPLIT = "split"


class NumericalError(RuntimeError):
    """Raised when a run violates a conservation check."""


@dataclass(frozen=True)
class PropagationPlan:
    t_final: float = 100.0
    dt_output: float = 0.5
    propagator: str = EIGEN
    snapshot_times: tuple[float, ...] = ()
    split_dt: float = 0.002

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if not (0 < self.dt_output <= self.t_final):
            raise ValueError("need 0 < dt_output <= t_final")
        if any(t < 0 or t > self.t_final + 1e-12 for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_final]")
        if self.propagator not in (EIGEN, SPLIT):
            raise ValueError(f"unknown propagator {self.propagator!r}")
        if not (0 < self.split_dt <= 0.002):
            raise ValueError("split_dt must be in (0, 0.002]")

    @property
    def times(self) -> np.ndarray:
        n = int(math.floor(self.t_final / self.dt_output + 1e-9))
        t = np.arange(n + 1) * self.dt_output
        if self.t_final - t[-1] > 1e-9:
            t = np.append(t, self.t_final)
        return t


@dataclass
class ClosedResult:
    series: TimeSeries
    snapshots: list[DensityGrid] = field(default_factory=list)
    final_state: np.ndarray | None = None


def energy_audit(H: DiscretizedHamiltonian, state) -> float:
    """<H> for a vector, a density matrix or a DensityState."""
    if isinstance(state, DensityState):
        state = state.vector if state.is_pure else state.matrix
    state = np.asarray(state)
    if state.ndim == 1:
        return float(np.real(np.vdot(state, H.apply(state))) / np.real(np.vdot(state, state)))
    return float(np.real(np.trace(H.matrix @ state)) / np.real(np.trace(state)))


def evolve(H: DiscretizedHamiltonian, psi: np.ndarray, times) -> np.ndarray:
    """Exact evolution in the eigenbasis; returns shape (dim, len(times))."""
    if H.energies is None:
        H.diagonalize()
    c0 = H.vectors.T @ psi
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phases = np.exp(-1j * np.outer(H.energies, times))
    return H.vectors @ (c0[:, None] * phases)


class SplitStep:
    """Strang splitting exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2) for the diabatic grid."""

    def __init__(self, H: DiscretizedHamiltonian, dt: float):
        if H.representation != DIABATIC or not isinstance(H.scheme, GridSpec):
            raise ValueError("split-step propagation is implemented for the diabatic grid only")
        g = H.scheme
        self.shape = (g.nx, g.ny)
        self.dt = dt
        kx = 2 * np.pi * np.fft.fftfreq(g.nx, d=g.dx)
        ky = 2 * np.pi * np.fft.fftfreq(g.ny, d=g.dy)
        self.kin = np.exp(-0.5j * dt * (kx[:, None] ** 2 + ky[None, :] ** 2))
        X, Y = g.mesh()
        f = potential_fields(H.params, X, Y)
        m = 0.5 * (f.V_A + f.V_D)
        half = 0.5 * (f.V_D - f.V_A)
        gap = np.hypot(half, f.V_c)
        tau = 0.5 * dt
        ph = np.exp(-1j * m * tau)
        cs = np.cos(gap * tau)
        sn = np.where(gap > 0, np.sin(gap * tau) / np.where(gap > 0, gap, 1.0), tau)
        # exp(-i tau [[-h, c], [c, h]]) with h = half, c = V_c
        self.u00 = ph * (cs + 1j * sn * half)
        self.u11 = ph * (cs - 1j * sn * half)
        self.u01 = ph * (-1j * sn * f.V_c)

    def _pot(self, a, d):
        return self.u00 * a + self.u01 * d, self.u01 * a + self.u11 * d

    def step(self, psi: np.ndarray, n: int) -> np.ndarray:
        a, d = (c.reshape(self.shape) for c in psi.reshape(2, -1))
        a, d = a.astype(complex), d.astype(complex)
        for _ in range(n):
            a, d = self._pot(a, d)
            a = np.fft.ifft2(self.kin * np.fft.fft2(a))
            d = np.fft.ifft2(self.kin * np.fft.fft2(d))
            a, d = self._pot(a, d)
        return np.concatenate([a.ravel(), d.ravel()])


def _check_norm(norms, label="norm"):
    drift = float(np.max(np.abs(np.asarray(norms) - 1.0)))
    if drift > 1e-6:
        raise NumericalError(f"{label} drift {drift:.3e} exceeds 1e-6")
    return drift


def propagate_closed(H: DiscretizedHamiltonian, s0: DensityState, plan: PropagationPlan,
                     observables: ObservableSet | None = None) -> ClosedResult:
    if not s0.is_pure:
        raise ValueError("closed propagation needs a pure state")
    if s0.representation != H.representation or s0.scheme != H.scheme:
        raise ValueError("state and Hamiltonian use different bases")
    psi0 = np.asarray(s0.vector, dtype=complex)
    norm0 = float(np.real(np.vdot(psi0, psi0)))
    if abs(norm0 - 1.0) > 1e-9:
        raise ValueError(f"initial state not normalized (norm {norm0})")
    obs = observables or ObservableSet.build(H.params, H.scheme, H.representation)
    times = plan.times
    snap_times = sorted(set(plan.snapshot_times))

    if plan.propagator == EIGEN:
        if H.energies is None:
            H.diagonalize()
        psis = evolve(H, psi0, times)
        snaps = evolve(H, psi0, snap_times) if snap_times else None
        c0 = H.vectors.T @ psi0
        energy = np.full(times.size, float(np.sum(np.abs(c0) ** 2 * H.energies)) / norm0)
    else:
        stepper = SplitStep(H, plan.split_dt)
        wanted = sorted(set(np.round(times, 12)) | set(np.round(snap_times, 12)))
        states = {}
        psi = psi0
        t_now = 0.0
        for t in wanted:
            n = int(round((t - t_now) / plan.split_dt))
            if n > 0:
                psi = stepper.step(psi, n)
                t_now += n * plan.split_dt
            states[t] = psi
        psis = np.column_stack([states[t] for t in np.round(times, 12)])
        snaps = np.column_stack([states[t] for t in np.round(snap_times, 12)]) if snap_times else None
        energy = np.array([np.real(np.vdot(p, H.apply(p))) for p in psis.T])

    norms = np.real(np.sum(np.abs(psis) ** 2, axis=0))
    _check_norm(norms)
    pd = _expect(obs.donor, psis)
    p1 = _expect(obs.adi1, psis)
    p2 = _expect(obs.adi2, psis)
    series = TimeSeries(times.copy(), pd, p1, p2, norms, energy)
    snapshots = [obs.density(snaps[:, k], t) for k, t in enumerate(snap_times)] if snap_times else []
    return ClosedResult(series, snapshots, psis[:, -1])


def _expect(op: np.ndarray, psis: np.ndarray) -> np.ndarray:
    return np.real(np.sum(psis.conj() * (op @ psis), axis=0))
