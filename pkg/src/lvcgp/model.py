"""Parameter records and pointwise potential evaluation for the two-state model.

The subsystem potential matrix is ordered as ``[[V_A, V_c], [V_c, V_D]]`` with

    V_D = 1/2 [Omega_X^2 (X + X0)^2 + Omega_Y^2 (Y + Y0)^2 + Delta]
    V_A = 1/2 [Omega_X^2 (X - X0)^2 + Omega_Y^2 (Y - Y0)^2 - Delta]
    V_c = C_X X + C_Y Y + Delta12

so that ``V_D - V_A = 2 G.R + Delta`` with ``G = (Omega_X^2 X0, Omega_Y^2 Y0)``.
The mixing angle is ``theta = atan2(2 V_c, V_D - V_A)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# (u^2 + v^2) below this counts as sitting on the intersection
CI_TOLERANCE = 1e-24


def _as_array(values) -> np.ndarray:
    return np.atleast_1d(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class LvcParameters:
    """Raw N-mode two-state linear vibronic coupling model.

    ``kappa`` and ``kappa_tilde`` are the intrastate gradients of the first and
    second diabatic state, ``c`` the interstate gradient and ``delta`` the
    diabatic energy offset (state 2 sits ``delta`` above state 1).
    """

    omega: np.ndarray
    kappa: np.ndarray
    kappa_tilde: np.ndarray
    c: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        for name in ("omega", "kappa", "kappa_tilde", "c"):
            object.__setattr__(self, name, _as_array(getattr(self, name)))
        object.__setattr__(self, "delta", float(self.delta))
        n = self.omega.size
        for name in ("kappa", "kappa_tilde", "c"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} has length {getattr(self, name).size}, expected {n}")
        if np.any(~np.isfinite(self.omega)) or np.any(self.omega <= 0):
            raise ValueError("omega: all frequencies must be strictly positive")

    @property
    def n_modes(self) -> int:
        return int(self.omega.size)

    def potential_matrix(self, q) -> np.ndarray:
        """Diabatic 2x2 potential matrix at mode coordinates ``q``."""
        q = np.asarray(q, dtype=float)
        h = 0.5 * np.sum(self.omega**2 * q**2)
        v11 = h + self.kappa @ q - 0.5 * self.delta
        v22 = h + self.kappa_tilde @ q + 0.5 * self.delta
        v12 = self.c @ q
        return np.array([[v11, v12], [v12, v22]])


@dataclass(frozen=True)
class SubsystemParameters:
    """Two-dimensional branching-space subsystem. Not validated on construction; see `validate`."""

    Omega_X: float
    Omega_Y: float
    X0: float = 0.0
    Y0: float = 0.0
    Delta: float = 0.0
    C_X: float = 0.0
    C_Y: float = 0.0
    Delta12: float = 0.0

    @property
    def G(self) -> np.ndarray:
        return np.array([self.Omega_X**2 * self.X0, self.Omega_Y**2 * self.Y0])

    @property
    def C(self) -> np.ndarray:
        return np.array([self.C_X, self.C_Y])

    @property
    def is_symmetric(self) -> bool:
        return self.Y0 == 0 and self.Delta == 0 and self.Delta12 == 0 and self.C_X == 0

    @property
    def donor_minimum(self) -> np.ndarray:
        return np.array([-self.X0, -self.Y0])

    @property
    def acceptor_minimum(self) -> np.ndarray:
        return np.array([self.X0, self.Y0])


@dataclass(frozen=True)
class BathParameters:
    """Harmonic bath with bilinear couplings to the subsystem coordinates."""

    Omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda_X: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda_Y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    temperature: float = 0.0

    def __post_init__(self):
        for name in ("Omega", "lambda_X", "lambda_Y"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def n_modes(self) -> int:
        return int(self.Omega.size)

    @property
    def is_empty(self) -> bool:
        return self.n_modes == 0 or not (np.any(self.lambda_X) or np.any(self.lambda_Y))


@dataclass(frozen=True)
class SystemBathModel:
    subsystem: SubsystemParameters
    bath: BathParameters = field(default_factory=BathParameters)


@dataclass(frozen=True)
class Geometry:
    """Lines and directions of the subsystem potential (all in the X, Y plane)."""

    G: np.ndarray
    tuning_direction: np.ndarray
    degeneracy_line: tuple[float, float, float]
    zero_coupling_line: tuple[float, float, float]
    ci_point: np.ndarray | None

    def signed_degeneracy(self, X, Y):
        """``2 G.R + Delta``: negative on the donor side."""
        a, b, c0 = self.degeneracy_line
        return a * np.asarray(X) + b * np.asarray(Y) + c0

    def tuning_distance(self, X, Y):
        """Unsigned distance to the line through both minima."""
        tx, ty = self.tuning_direction
        return np.abs(np.asarray(X) * ty - np.asarray(Y) * tx)


class PotentialFields(NamedTuple):
    V_D: np.ndarray
    V_A: np.ndarray
    V_c: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    theta: np.ndarray
    F: np.ndarray  # shape (2, ...)
    div_F: np.ndarray
    at_ci: np.ndarray


@dataclass(frozen=True)
class PotentialPoint:
    V_D: float
    V_A: float
    V_c: float
    W1: float
    W2: float
    theta: float
    F: np.ndarray | None
    at_ci: bool


def potential_fields(p: SubsystemParameters, X, Y) -> PotentialFields:
    """Vectorized potentials, adiabatic energies, mixing angle and F = grad(theta)/2.

    At the intersection itself F and its divergence are returned as NaN and
    ``at_ci`` is set.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    v_d = 0.5 * (p.Omega_X**2 * (X + p.X0) ** 2 + p.Omega_Y**2 * (Y + p.Y0) ** 2 + p.Delta)
    v_a = 0.5 * (p.Omega_X**2 * (X - p.X0) ** 2 + p.Omega_Y**2 * (Y - p.Y0) ** 2 - p.Delta)
    v_c = p.C_X * X + p.C_Y * Y + p.Delta12

    u = v_d - v_a
    v = 2.0 * v_c
    den = u**2 + v**2
    mean = 0.5 * (v_d + v_a)
    half_gap = 0.5 * np.sqrt(den)
    theta = np.arctan2(v, u)

    at_ci = den <= CI_TOLERANCE
    safe = np.where(at_ci, 1.0, den)
    gu = 2.0 * p.G
    gv = 2.0 * p.C
    # grad(theta) = (u grad v - v grad u) / (u^2 + v^2)
    fx = 0.5 * (u * gv[0] - v * gu[0]) / safe
    fy = 0.5 * (u * gv[1] - v * gu[1]) / safe
    dot = gu @ gv
    # div F = div(grad theta) / 2 = -[(u^2 - v^2) gu.gv + u v (|gv|^2 - |gu|^2)] / (u^2 + v^2)^2
    div = -((u**2 - v**2) * dot + u * v * (gv @ gv - gu @ gu)) / safe**2
    nan = np.nan
    F = np.stack([np.where(at_ci, nan, fx), np.where(at_ci, nan, fy)])
    div_F = np.where(at_ci, nan, div)
    return PotentialFields(v_d, v_a, v_c, mean - half_gap, mean + half_gap, theta, F, div_F, at_ci)


def evaluate_potentials(p: SubsystemParameters, point) -> PotentialPoint:
    x, y = (float(v) for v in point)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("point must be finite")
    f = potential_fields(p, x, y)
    at_ci = bool(f.at_ci)
    return PotentialPoint(
        V_D=float(f.V_D),
        V_A=float(f.V_A),
        V_c=float(f.V_c),
        W1=float(f.W1),
        W2=float(f.W2),
        theta=float(f.theta),
        F=None if at_ci else np.array(f.F, dtype=float),
        at_ci=at_ci,
    )


def lower_adiabatic_vector(p: SubsystemParameters, X, Y) -> tuple[np.ndarray, np.ndarray]:
    """Components (on A, on D) of the lower adiabatic state.

    Uses the half angle of ``beta = atan2(2 V_c, V_A - V_D)`` so the sign
    discontinuity lies on the acceptor side, away from the donor well.
    """
    f = potential_fields(p, X, Y)
    beta = np.arctan2(2.0 * f.V_c, f.V_A - f.V_D)
    return -np.sin(0.5 * beta), np.cos(0.5 * beta)


def derive_geometry(p: SubsystemParameters) -> Geometry:
    if p.X0 == 0 and p.Y0 == 0:
        raise ValueError("X0 and Y0 cannot both be zero")
    G = p.G
    r0 = np.array([p.X0, p.Y0])
    tuning = r0 / np.linalg.norm(r0)
    deg = (2.0 * G[0], 2.0 * G[1], float(p.Delta))
    zc = (float(p.C_X), float(p.C_Y), float(p.Delta12))
    A = np.array([deg[:2], zc[:2]])
    det = np.linalg.det(A)
    if abs(det) <= 1e-12 * np.linalg.norm(A[0]) * max(np.linalg.norm(A[1]), 1e-300):
        warnings.warn("degeneracy and zero-coupling lines are parallel; no intersection point", stacklevel=2)
        ci = None
    else:
        ci = np.linalg.solve(A, -np.array([deg[2], zc[2]]))
    return Geometry(G=G, tuning_direction=tuning, degeneracy_line=deg, zero_coupling_line=zc, ci_point=ci)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str


def validate(model: SystemBathModel) -> list[Diagnostic]:
    """Check every invariant of a system-bath model; an empty list means valid."""
    out: list[Diagnostic] = []
    s = model.subsystem
    for name in ("Omega_X", "Omega_Y", "X0", "Y0", "Delta", "C_X", "C_Y", "Delta12"):
        value = getattr(s, name)
        if not math.isfinite(float(value)):
            out.append(Diagnostic("error", f"subsystem.{name}", "must be finite"))
    for name in ("Omega_X", "Omega_Y"):
        if getattr(s, name) <= 0:
            out.append(Diagnostic("error", f"subsystem.{name}", "must be > 0"))
    if s.X0 == 0 and s.Y0 == 0:
        out.append(Diagnostic("warning", "subsystem.X0", "minima coincide; no tuning direction"))

    b = model.bath
    n = b.Omega.size
    if np.any(b.Omega <= 0) or np.any(~np.isfinite(b.Omega)):
        out.append(Diagnostic("error", "bath.Omega", "all bath frequencies must be > 0"))
    for name in ("lambda_X", "lambda_Y"):
        arr = getattr(b, name)
        if arr.size != n:
            out.append(Diagnostic("error", f"bath.{name}", f"length {arr.size} != {n} bath modes"))
        elif np.any(~np.isfinite(arr)):
            out.append(Diagnostic("error", f"bath.{name}", "must be finite"))
    if not b.temperature >= 0:
        out.append(Diagnostic("error", "bath.temperature", "must be >= 0"))
    return out


def check(model: SystemBathModel | SubsystemParameters) -> None:
    """Raise ValueError on any error-level diagnostic."""
    if isinstance(model, SubsystemParameters):
        model = SystemBathModel(model)
    errors = [d for d in validate(model) if d.level == "error"]
    if errors:
        raise ValueError("; ".join(f"{d.field}: {d.message}" for d in errors))
