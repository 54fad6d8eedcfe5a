"""Second-order time-convolutionless (TCL2) master equation for the subsystem.

The reduced density obeys, in the eigenbasis of the subsystem Hamiltonian,

    d rho/dt = -i [H_S, rho] - sum_a [A_a, B_a(t) rho - rho B_a(t)^+]

with ``A_a`` the coupling coordinates (X and/or Y) and
``B_a(t)_mn = sum_b S_ab(omega_mn, t) (A_b)_mn``, where
``S_ab(omega, t) = sum_j lambda_ja lambda_jb eta_j(omega, t)`` and ``eta_j`` is
the half-sided Fourier transform of the bath correlation function up to ``t``.

Only the eigenstates inside an energy window take part in the dissipative
dynamics. Components of the initial state outside the window are carried
along unitarily, so trace and the bath-free limit are exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .closed import NumericalError, PropagationPlan, evolve
from .model import BathParameters, SystemBathModel
from .observables import DensityGrid, ObservableSet, TimeSeries
from .representation import DensityState, DiscretizedHamiltonian, GridSpec, operator_matrix

_RESONANCE = 1e-8


@dataclass(frozen=True)
class OhmicSpec:
    xi: float
    Omega_c: float = 3.5
    n_modes: int = 100
    Omega_max: float | None = None
    couple_to: str = "Y"
    temperature: float = 0.0

    def __post_init__(self):
        if not self.xi >= 0:
            raise ValueError("xi must be >= 0")
        if not self.Omega_c > 0:
            raise ValueError("Omega_c must be > 0")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.couple_to not in ("X", "Y"):
            raise ValueError("couple_to must be 'X' or 'Y'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def cutoff_max(self) -> float:
        return 3.0 * self.Omega_c if self.Omega_max is None else float(self.Omega_max)


def discretize_ohmic(spec: OhmicSpec) -> BathParameters:
    """Logarithmic discretization of J(w) = (pi/2) xi w exp(-w / Omega_c)."""
    wc, n = spec.Omega_c, spec.n_modes
    w0 = wc * (1.0 - math.exp(-spec.cutoff_max / wc)) / n
    arg = 1.0 - np.arange(1, n + 1) * w0 / wc
    if np.any(arg <= 0):
        raise ValueError("logarithm argument is not positive; check Omega_max")
    Omega = -wc * np.log(arg)
    lam = Omega * math.sqrt(spec.xi * w0)
    zero = np.zeros(n)
    if spec.couple_to == "X":
        return BathParameters(Omega, lam, zero, spec.temperature)
    return BathParameters(Omega, zero, lam, spec.temperature)


def _occupation(Omega, T):
    Omega = np.asarray(Omega, dtype=float)
    if T < 0:
        raise ValueError("temperature must be >= 0")
    if T == 0:
        return np.zeros_like(Omega)
    return 1.0 / np.expm1(Omega / T)


def bath_correlation(Omega, T, t):
    """<q_j(t) q_j(0)> of one bath oscillator at temperature T."""
    n = _occupation(Omega, T)
    Omega = np.asarray(Omega, dtype=float)
    t = np.asarray(t, dtype=float)
    return (np.exp(-1j * Omega * t) + 2.0 * np.cos(Omega * t) * n) / (2.0 * Omega)


def _g(x, t):
    """(1 - exp(-i x t)) / (i x), with its small-x series."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    small = np.abs(x) < _RESONANCE
    xs = np.where(small, 1.0, x)
    full = (1.0 - np.exp(-1j * xs * t)) / (1j * xs)
    series = t - 0.5j * x * t**2 - x**2 * t**3 / 6.0
    return np.where(small, series, full)


def dressed_integral(omega, Omega, T, t):
    """eta(omega, t) = int_0^t exp(-i omega s) C(s) ds in closed form."""
    n = _occupation(Omega, T)
    Omega = np.asarray(Omega, dtype=float)
    return ((1.0 + n) * _g(omega + Omega, t) + n * _g(omega - Omega, t)) / (2.0 * Omega)


class DressedCache:
    """Precomputed pieces of S_ab(omega_mn, t) for fixed eigenenergies and couplings."""

    def __init__(self, energies: np.ndarray, couplings: dict[str, np.ndarray], bath: BathParameters):
        self.energies = np.asarray(energies, dtype=float)
        self.omega = self.energies[:, None] - self.energies[None, :]
        lam = {"X": bath.lambda_X, "Y": bath.lambda_Y}
        self.axes = [a for a in ("X", "Y") if bath.n_modes and np.any(lam[a]) and a in couplings]
        self.ops = {a: np.asarray(couplings[a]) for a in couplings}
        self.pairs = [(a, b) for a in self.axes for b in self.axes]

        nocc = _occupation(bath.Omega, bath.temperature)
        if bath.temperature > 0:
            nu = np.concatenate([bath.Omega, -bath.Omega])
            occ = np.concatenate([1.0 + nocc, nocc])
            idx = np.concatenate([np.arange(bath.n_modes)] * 2)
        else:
            nu, occ, idx = bath.Omega.copy(), np.ones(bath.n_modes), np.arange(bath.n_modes)
        self.nu = nu
        # weights c_k for each (a, b) pair, columns in pair order
        if self.pairs:
            self.weights = np.column_stack(
                [lam[a][idx] * lam[b][idx] * occ / (2.0 * bath.Omega[idx]) for a, b in self.pairs])
        else:
            self.weights = np.zeros((nu.size, 0))
        x = self.omega.reshape(-1)[:, None] + nu[None, :]
        resonant = np.abs(x) < _RESONANCE
        self.inv = np.where(resonant, 0.0, 1.0 / (1j * np.where(resonant, 1.0, x)))
        self.resonant = np.argwhere(resonant)
        self.static = self.inv @ self.weights

    def kernel(self, t: float) -> dict[tuple[str, str], np.ndarray]:
        """S_ab(omega_mn, t) as K x K arrays."""
        if not self.pairs:
            return {}
        k = self.energies.size
        osc = np.exp(-1j * self.nu * t)
        dyn = self.inv @ (self.weights * osc[:, None])
        phase = np.exp(-1j * self.omega.reshape(-1) * t)
        S = self.static - phase[:, None] * dyn
        if self.resonant.size:
            p, j = self.resonant[:, 0], self.resonant[:, 1]
            x = self.omega.reshape(-1)[p] + self.nu[j]
            for col in range(S.shape[1]):
                np.add.at(S[:, col], p, self.weights[j, col] * _g(x, t))
        return {pair: S[:, col].reshape(k, k) for col, pair in enumerate(self.pairs)}

    def dressed(self, t: float) -> dict[str, np.ndarray]:
        """B_a(t) for every coupled axis."""
        S = self.kernel(t)
        return {a: sum(S[(a, b)] * self.ops[b] for b in self.axes) for a in self.axes}


def dissipator(rho: np.ndarray, B: dict[str, np.ndarray], ops: dict[str, np.ndarray]) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for a, Ba in B.items():
        Z = Ba @ rho
        Y = Z - Z.conj().T
        A = ops[a]
        out -= A @ Y - Y @ A
    return out


def tcl2_rhs(rho: np.ndarray, t: float, energies: np.ndarray, cache: DressedCache) -> np.ndarray:
    """Schrodinger-picture TCL2 generator in the subsystem eigenbasis."""
    omega = energies[:, None] - energies[None, :]
    return -1j * omega * rho + dissipator(rho, cache.dressed(t), cache.ops)


@dataclass
class OpenDiagnostics:
    n_states: int
    captured_weight: float
    hermiticity_residual: float = 0.0
    min_eigenvalue: float = 0.0
    trace_drift: float = 0.0
    warnings: list[str] = field(default_factory=list)


@dataclass
class OpenResult:
    series: TimeSeries
    snapshots: list[DensityGrid]
    diagnostics: OpenDiagnostics
    final_rho: np.ndarray | None = None


def _coupling_matrices(H: DiscretizedHamiltonian, V: np.ndarray, axes) -> dict[str, np.ndarray]:
    out = {}
    for a in axes:
        if isinstance(H.scheme, GridSpec):
            X, Y = H.scheme.mesh()
            c = np.tile((X if a == "X" else Y).ravel(), 2)
            out[a] = V.T @ (c[:, None] * V)
        else:
            op = operator_matrix(a, H.params, H.scheme, H.representation)
            out[a] = V.T @ op @ V
        out[a] = 0.5 * (out[a] + out[a].T)
    return out


def select_window(energies: np.ndarray, window: float, min_states: int = 2) -> int:
    return max(int(np.sum(energies < energies[0] + window)), min_states)


def propagate_tcl2(model: SystemBathModel, H: DiscretizedHamiltonian, s0: DensityState, plan: PropagationPlan,
                   dt: float = 0.01, energy_window: float = 17.2, n_states: int | None = None,
                   observables: ObservableSet | None = None) -> OpenResult:
    """RK4 integration of TCL2 in the interaction picture of the windowed eigenbasis.

    ``n_states`` overrides the window rule. Output times must be multiples of ``dt``.
    """
    if not (0 < dt <= 0.01):
        raise ValueError("RK4 step must be in (0, 0.01]")
    if not s0.is_pure:
        raise ValueError("initial state must be the pure state from prepare_initial_state")
    if s0.representation != H.representation or s0.scheme != H.scheme:
        raise ValueError("state and Hamiltonian use different bases")
    if H.energies is None:
        H.diagonalize()
    E, V = H.energies, H.vectors
    K = n_states if n_states is not None else select_window(E, energy_window)
    K = min(K, E.size)
    EK, VK = E[:K], V[:, :K]
    psi0 = np.asarray(s0.vector, dtype=complex)
    c = V.T @ psi0
    cK = c[:K]
    captured = float(np.real(np.vdot(cK, cK)))
    diag = OpenDiagnostics(K, captured)

    obs = observables or ObservableSet.build(H.params, H.scheme, H.representation)
    ops_K = {name: VK.T @ getattr(obs, name) @ VK for name in ("donor", "adi1", "adi2")}
    cache = DressedCache(EK, _coupling_matrices(H, VK, ("X", "Y")), model.bath)
    omega = cache.omega

    times = plan.times
    snap_times = sorted(set(plan.snapshot_times))
    steps_out = _steps(times, dt)
    steps_snap = _steps(np.asarray(snap_times), dt) if snap_times else np.zeros(0, dtype=int)
    wanted = sorted(set(steps_out.tolist()) | set(steps_snap.tolist()))

    rho = np.outer(cK, cK.conj())
    states: dict[int, np.ndarray] = {}
    herm = 0.0
    min_eig = 0.0
    n_now = 0
    B_next = cache.dressed(0.0) if cache.axes else {}
    active = bool(cache.axes)

    def rhs(r, t, B):
        ph = np.exp(-1j * omega * t)
        return dissipator(r * ph, B, cache.ops) * ph.conj()

    for target in wanted:
        while n_now < target:
            t = n_now * dt
            if active:
                B0 = B_next
                Bh = cache.dressed(t + 0.5 * dt)
                B_next = cache.dressed(t + dt)
                k1 = rhs(rho, t, B0)
                k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt, Bh)
                k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt, Bh)
                k4 = rhs(rho + dt * k3, t + dt, B_next)
                rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                herm = max(herm, float(np.max(np.abs(rho - rho.conj().T))))
                rho = 0.5 * (rho + rho.conj().T)
            n_now += 1
        states[target] = rho.copy()
        if active:
            lo = float(np.linalg.eigvalsh(rho)[0])
            min_eig = min(min_eig, lo)
            if lo < -1e-2:
                raise NumericalError(f"density matrix eigenvalue {lo:.3e} below -1e-2 at t={target * dt:g}")
            if lo < -1e-4 and not diag.warnings:
                msg = f"negative density eigenvalue {lo:.3e} at t={target * dt:g}"
                diag.warnings.append(msg)
                warnings.warn(msg, stacklevel=2)
    diag.hermiticity_residual = herm
    diag.min_eigenvalue = min_eig

    # spectator: full closed evolution minus its in-window part
    spect_full = evolve(H, psi0, times)
    spect_K = VK @ (cK[:, None] * np.exp(-1j * np.outer(EK, times)))
    rest = {name: _expect(getattr(obs, name), spect_full) - _expect(getattr(obs, name), spect_K)
            for name in ("donor", "adi1", "adi2")}
    e_rest = float(np.sum(np.abs(c[K:]) ** 2 * E[K:]))

    cols = {name: np.zeros(times.size) for name in ("donor", "adi1", "adi2")}
    trace = np.zeros(times.size)
    energy = np.zeros(times.size)
    for i, (t, n) in enumerate(zip(times, steps_out)):
        r = states[int(n)] * np.exp(-1j * omega * t)
        for name in cols:
            cols[name][i] = float(np.real(np.sum(ops_K[name].T * r))) + rest[name][i]
        trace[i] = float(np.real(np.trace(r))) + (1.0 - captured)
        energy[i] = float(np.real(np.sum(EK * np.diag(r)))) + e_rest
    diag.trace_drift = float(np.max(np.abs(trace - 1.0)))
    if diag.trace_drift > 1e-6:
        raise NumericalError(f"trace drift {diag.trace_drift:.3e} exceeds 1e-6")
    series = TimeSeries(times.copy(), np.clip(cols["donor"], 0.0, 1.0), cols["adi1"], cols["adi2"], trace, energy)

    snapshots = []
    for t, n in zip(snap_times, steps_snap):
        r = states[int(n)] * np.exp(-1j * omega * t)
        g = obs.density_from_matrix(r, VK, t)
        full = obs.density(evolve(H, psi0, [t])[:, 0], t)
        part = obs.density(VK @ (cK * np.exp(-1j * EK * t)), t)
        g.values = g.values + full.values - part.values
        snapshots.append(g)
    final = states[int(steps_out[-1])] * np.exp(-1j * omega * times[-1])
    return OpenResult(series, snapshots, diag, final)


def _steps(times: np.ndarray, dt: float) -> np.ndarray:
    n = np.rint(np.asarray(times) / dt).astype(int)
    if np.any(np.abs(n * dt - times) > 1e-9):
        raise ValueError("output and snapshot times must be multiples of the RK4 step")
    return n


def _expect(op, psis):
    return np.real(np.sum(psis.conj() * (op @ psis), axis=0))
