"""Perturbative donor-to-acceptor transfer channels for the isotropic model.

The unperturbed problem is two displaced isotropic oscillators (donor minimum
at -X0, acceptor at +X0, donor levels Delta above acceptor levels); the
interstate coupling ``V_c`` and the bath coupling are the perturbations.
Each channel returns the population of its target vibronic level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .model import BathParameters, SubsystemParameters

_RES = 1e-10


def fc_overlap(n: int, m: int, d: float, Omega: float) -> float:
    """<n|m_d>: overlap of oscillator level n with level m displaced by d."""
    if n < 0 or m < 0:
        raise ValueError("quantum numbers must be >= 0")
    a = d * math.sqrt(Omega / 2.0)
    lo, hi = min(n, m), max(n, m)
    sign = 1.0 if n >= m else (-1.0) ** (m - n)
    k = hi - lo
    log_norm = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1))
    lag = eval_genlaguerre(lo, k, a * a)
    if a == 0:
        return float(lag * math.exp(log_norm)) if k == 0 else 0.0
    mag = math.exp(log_norm + k * math.log(abs(a)) - 0.5 * a * a)
    s = sign * (math.copysign(1.0, a) ** k)
    return float(s * mag * lag)


def _envelope(w, t):
    """sin^2(w t / 2) / (w / 2)^2 with the t^2 limit at w = 0."""
    t = np.asarray(t, dtype=float)
    if abs(w) < _RES:
        return t**2
    return np.sin(0.5 * w * t) ** 2 / (0.5 * w) ** 2


@dataclass
class ChannelEstimate:
    channel: str
    prefactor: float
    detuning: float | None
    resonant: bool
    function: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t):
        out = np.asarray(self.function(np.asarray(t, dtype=float)), dtype=float)
        return np.maximum(out, 0.0)

    def evaluate(self, times) -> np.ndarray:
        return self(times)


def _require_isotropic(p: SubsystemParameters) -> float:
    if abs(p.Omega_X - p.Omega_Y) > 1e-12 * max(p.Omega_X, p.Omega_Y):
        raise ValueError("perturbative channels assume Omega_X == Omega_Y")
    if p.Y0 != 0:
        raise ValueError("perturbative channels assume minima on the X axis (Y0 = 0)")
    return float(p.Omega_X)


def franck_condon(p: SubsystemParameters, n: int) -> float:
    """<n_X (acceptor) | 0_X (donor)>."""
    return fc_overlap(n, 0, -2.0 * p.X0, p.Omega_X)


def channel_1a(p: SubsystemParameters, t=None) -> ChannelEstimate:
    """|00>_D -> |01>_A through C_Y Y."""
    w = _require_isotropic(p)
    pref = (p.C_Y * franck_condon(p, 0) / math.sqrt(2.0 * w)) ** 2
    det = w - p.Delta
    return ChannelEstimate("1a", pref, det, abs(det) < _RES, lambda tt: pref * _envelope(det, tt))


def channel_1b(p: SubsystemParameters, t=None, n_max: int = 30) -> ChannelEstimate:
    """|00>_D -> |n_X 0>_A through the constant coupling Delta12."""
    w = _require_isotropic(p)
    fc2 = np.array([franck_condon(p, n) ** 2 for n in range(n_max + 1)])
    dets = np.arange(n_max + 1) * w - p.Delta
    pref = p.Delta12**2

    def f(tt):
        return pref * sum(fc2[n] * _envelope(dets[n], tt) for n in range(n_max + 1))

    res = bool(np.any(np.abs(dets) < _RES))
    return ChannelEstimate("1b", pref * float(fc2[0]), float(dets[0]), res, f)


def tuning_element(p: SubsystemParameters, n: int) -> float:
    """<n_X (acceptor)| X |0_X (donor)> via the donor ladder: X|0_D> = -X0|0_D> + |1_D>/sqrt(2 Omega)."""
    w = p.Omega_X
    d = -2.0 * p.X0
    return -p.X0 * fc_overlap(n, 0, d, w) + fc_overlap(n, 1, d, w) / math.sqrt(2.0 * w)


def channel_1c(p: SubsystemParameters, t=None, n_max: int = 30) -> ChannelEstimate:
    """|00>_D -> |n_X 0>_A through C_X X (the n_X = 0 element vanishes for symmetric minima)."""
    w = _require_isotropic(p)
    el2 = np.array([(p.C_X * tuning_element(p, n)) ** 2 for n in range(n_max + 1)])
    dets = np.arange(n_max + 1) * w - p.Delta

    def f(tt):
        return sum(el2[n] * _envelope(dets[n], tt) for n in range(1, n_max + 1))

    return ChannelEstimate("1c", float(el2[1]) if n_max >= 1 else 0.0, float(dets[1]), False, f)


def _h(w, t):
    """int_0^t exp(i w s) ds."""
    t = np.asarray(t, dtype=float)
    if abs(w) < _RES:
        return t.astype(complex)
    return (np.exp(1j * w * t) - 1.0) / (1j * w)


def second_order_integral(w1: float, w2: float, t):
    """int_0^t dtau int_0^tau dtau' exp(i w2 tau) exp(i w1 tau')."""
    t = np.asarray(t, dtype=float)
    if abs(w1) < _RES:
        if abs(w2) < _RES:
            return (0.5 * t**2).astype(complex)
        return np.exp(1j * w2 * t) * (t / (1j * w2) + 1.0 / w2**2) - 1.0 / w2**2
    return (_h(w1 + w2, t) - _h(w2, t)) / (1j * w1)


def bath_mode_amplitude(p: SubsystemParameters, Omega_j: float, lam: float, t):
    """Second-order amplitude |00, 0_j>_D -> |00, 1_j>_A for one bath mode (T = 0)."""
    w = _require_isotropic(p)
    m = lam * p.C_Y * franck_condon(p, 0) / (2.0 * w * math.sqrt(2.0 * Omega_j))
    # via |01, 1_j>_D: bath acts first, then the interstate coupling
    via_donor = second_order_integral(w + Omega_j, -w - p.Delta, t)
    # via |01, 0_j>_A: interstate coupling first, then the bath
    via_acceptor = second_order_integral(w - p.Delta, Omega_j - w, t)
    return -m * (via_donor + via_acceptor)


def channel_bath_2nd(p: SubsystemParameters, bath: BathParameters, t=None) -> ChannelEstimate:
    """Bath-assisted transfer into |00>_A, summed over modes (comparative diagnostic).

    Only the coupling to Y enters: an X coupling cannot connect |00>_D to
    |00>_A through C_Y Y at this order in the symmetric setup.
    """
    w = _require_isotropic(p)
    lam = bath.lambda_Y
    modes = [(float(O), float(l)) for O, l in zip(bath.Omega, lam) if l != 0]

    def f(tt):
        tt = np.asarray(tt, dtype=float)
        out = np.zeros(tt.shape)
        for O, l in modes:
            out += np.abs(bath_mode_amplitude(p, O, l, tt)) ** 2
        return out

    near = min((abs(O - w) for O, _ in modes), default=float("inf"))
    return ChannelEstimate("bath-2nd", float(sum(l * l for _, l in modes)), near, near < _RES, f)


def vibronic_level(p: SubsystemParameters, scheme, well: str, nx: int, ny: int,
                   refine: int = 8) -> np.ndarray:
    """Diabatic level |nx ny> of the donor ("D") or acceptor ("A") well as a basis vector.

    Used to resolve full diabatic dynamics into the levels the channels predict.
    """
    from .representation import ho_functions, make_sampler

    if well not in ("A", "D"):
        raise ValueError("well must be 'A' or 'D'")
    s = make_sampler(p, scheme, refine)
    sign = 1.0 if well == "A" else -1.0
    fx = ho_functions(nx, p.Omega_X, sign * p.X0, s.xf)[:, nx]
    fy = ho_functions(ny, p.Omega_Y, sign * p.Y0, s.yf)[:, ny]
    c = s.project(np.outer(fx, fy))
    zero = np.zeros_like(c)
    v = np.concatenate([c, zero] if well == "A" else [zero, c])
    return v / np.linalg.norm(v)
