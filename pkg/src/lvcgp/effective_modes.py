"""Map an N-mode LVC model onto a 2D subsystem linearly coupled to a harmonic bath.

Three steps: translate the origin so both diabats share a symmetric linear
term, rotate so that all interstate and tuning gradients live in the first two
coordinates, then diagonalize the subsystem and bath blocks of the Hessian
separately. The remaining off-diagonal Hessian block becomes the bilinear
system-bath coupling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import BathParameters, LvcParameters, SubsystemParameters, SystemBathModel, potential_fields

_PARALLEL_TOL = 1e-10
_GS_SKIP = 1e-8


@dataclass(frozen=True)
class TranslatedModel:
    omega: np.ndarray
    d: np.ndarray
    c: np.ndarray
    Delta: float
    Delta12: float
    shift: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.omega.size)


@dataclass(frozen=True)
class OrthogonalTransform:
    """Rows of ``O1`` are the intermediate coordinates; block rotations act on them."""

    O1: np.ndarray
    subsystem_rotation: np.ndarray
    bath_rotation: np.ndarray

    @property
    def full(self) -> np.ndarray:
        """Matrix taking translated mode coordinates to (X, Y, Q_1, ...)."""
        top = self.subsystem_rotation @ self.O1[:2]
        bottom = self.bath_rotation @ self.O1[2:]
        return np.vstack([top, bottom])


def translate_origin(lvc: LvcParameters) -> TranslatedModel:
    w2 = lvc.omega**2
    shift = (lvc.kappa + lvc.kappa_tilde) / (2.0 * w2)
    d = 0.5 * (lvc.kappa_tilde - lvc.kappa)
    Delta = float(np.sum((lvc.kappa**2 - lvc.kappa_tilde**2) / (2.0 * w2)) + lvc.delta)
    # interstate coupling c.q = c.x - c.s after q = x - s
    Delta12 = float(-np.sum(lvc.c * shift)) + 0.0
    return TranslatedModel(lvc.omega.copy(), d, lvc.c.copy(), Delta, Delta12, shift)


def _complete_basis(rows: list[np.ndarray], n: int) -> np.ndarray:
    """Gram-Schmidt completion with canonical axes, largest residual first."""
    basis = np.array(rows)
    eye = np.eye(n)
    residual = eye - (eye @ basis.T) @ basis
    order = np.argsort(-np.linalg.norm(residual, axis=1), kind="stable")
    out = list(rows)
    for k in order:
        if len(out) == n:
            break
        v = eye[k].copy()
        for _ in range(2):
            B = np.array(out)
            v -= B.T @ (B @ v)
        norm = np.linalg.norm(v)
        if norm < _GS_SKIP:
            continue
        out.append(v / norm)
    if len(out) != n:
        raise RuntimeError("basis completion failed")
    return np.array(out)


def separate_subsystem(t: TranslatedModel) -> OrthogonalTransform:
    n = t.n_modes
    if n < 2:
        raise ValueError("at least two modes are required for a 2D subsystem")
    nd = np.linalg.norm(t.d)
    nc = np.linalg.norm(t.c)
    if nd == 0 and nc == 0:
        raise ValueError("d and c both vanish: the states are not coupled")
    e_d = t.d / nd if nd > 0 else t.c / nc
    c1 = float(t.c @ e_d)
    c_perp = t.c - c1 * e_d
    c2 = float(np.linalg.norm(c_perp))
    if nc == 0 or c2 < _PARALLEL_TOL * nc:
        warnings.warn("coupling gradient is parallel to the tuning gradient; branching space is one-dimensional",
                      stacklevel=2)
        residual = np.eye(n) - np.outer(np.eye(n) @ e_d, e_d)
        k = int(np.argmax(np.linalg.norm(residual, axis=1)))
        row2 = residual[k] - e_d * (residual[k] @ e_d)
        row2 /= np.linalg.norm(row2)
    else:
        row2 = c_perp / c2
    O1 = _complete_basis([e_d, row2], n)
    return OrthogonalTransform(O1, np.eye(2), np.eye(n - 2))


def _block_eigh(M: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs with identity for an already-diagonal block (keeps input order)."""
    if M.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    off = M - np.diag(np.diag(M))
    if np.max(np.abs(off)) <= 1e-14 * max(np.max(np.abs(M)), 1.0):
        vals, vecs = np.diag(M).copy(), np.eye(M.shape[0])
    else:
        vals, vecs = np.linalg.eigh(M)
    if np.any(vals <= 0):
        raise ValueError(f"{label} Hessian block has a non-positive eigenvalue; not a bound model")
    return vals, vecs


def diagonalize_hessian_blocks(t: TranslatedModel, o: OrthogonalTransform
                               ) -> tuple[SystemBathModel, OrthogonalTransform]:
    O1 = o.O1
    Lam = O1 @ np.diag(t.omega**2) @ O1.T
    lam_s, vs = _block_eigh(Lam[:2, :2], "subsystem")
    lam_b, vb = _block_eigh(Lam[2:, 2:], "bath")

    # rows of U are the new subsystem axes expressed in the intermediate frame
    U = vs.T.copy()
    d1 = float(t.d @ O1[0])
    c_sub = O1[:2] @ t.c
    G = U @ np.array([d1, 0.0])
    if G[0] < 0:
        U[0] *= -1
    C = U @ c_sub
    if C[1] < 0 or (C[1] == 0 and (U @ np.array([d1, 0.0]))[1] < 0):
        U[1] *= -1
    G = U @ np.array([d1, 0.0])
    C = U @ c_sub

    Vb = vb.copy()
    for j in range(Vb.shape[1]):
        k = int(np.argmax(np.abs(Vb[:, j])))
        if Vb[k, j] < 0:
            Vb[:, j] *= -1
    coupling = U @ Lam[:2, 2:] @ Vb

    Omega_X, Omega_Y = np.sqrt(lam_s)
    sub = SubsystemParameters(
        Omega_X=float(Omega_X),
        Omega_Y=float(Omega_Y),
        X0=float(G[0] / lam_s[0]),
        Y0=float(G[1] / lam_s[1]),
        Delta=t.Delta,
        C_X=float(C[0]),
        C_Y=float(C[1]),
        Delta12=t.Delta12,
    )
    bath = BathParameters(Omega=np.sqrt(lam_b), lambda_X=coupling[0], lambda_Y=coupling[1])
    return SystemBathModel(sub, bath), OrthogonalTransform(O1, U, Vb.T)


@dataclass(frozen=True)
class EffectiveModeResult:
    model: SystemBathModel
    transform: OrthogonalTransform
    translated: TranslatedModel

    @property
    def shifts(self) -> np.ndarray:
        return self.translated.shift

    @property
    def constant(self) -> float:
        """Global energy dropped by the transformation (add back to recover raw values)."""
        s = self.model.subsystem
        t = self.translated
        return float(-0.5 * np.sum(t.omega**2 * t.shift**2) - 0.5 * (s.G @ np.array([s.X0, s.Y0])))

    def to_new_coordinates(self, q) -> np.ndarray:
        """(X, Y, Q_1, ..., Q_{N-2}) for original mode coordinates ``q``."""
        return self.transform.full @ (np.asarray(q, dtype=float) + self.translated.shift)

    def potential_matrix(self, q) -> np.ndarray:
        """Raw-model potential matrix rebuilt from the transformed model."""
        z = self.to_new_coordinates(q)
        return system_bath_potential_matrix(self.model, z[:2], z[2:]) + self.constant * np.eye(2)


def system_bath_potential_matrix(model: SystemBathModel, R, Q) -> np.ndarray:
    """Full 2x2 potential of the subsystem-bath form at subsystem point R and bath point Q."""
    s = model.subsystem
    b = model.bath
    f = potential_fields(s, R[0], R[1])
    Q = np.asarray(Q, dtype=float)
    scalar = 0.5 * np.sum(b.Omega**2 * Q**2) + np.sum((b.lambda_X * R[0] + b.lambda_Y * R[1]) * Q)
    V = np.array([[f.V_A, f.V_c], [f.V_c, f.V_D]], dtype=float)
    return V + scalar * np.eye(2)


def full_hessian(model: SystemBathModel) -> np.ndarray:
    """Quadratic form in (X, Y, Q) including the bilinear coupling block."""
    s, b = model.subsystem, model.bath
    n = 2 + b.n_modes
    H = np.zeros((n, n))
    H[0, 0] = s.Omega_X**2
    H[1, 1] = s.Omega_Y**2
    H[2:, 2:] = np.diag(b.Omega**2)
    H[0, 2:] = H[2:, 0] = b.lambda_X
    H[1, 2:] = H[2:, 1] = b.lambda_Y
    return H


def lvc_to_system_bath(lvc: LvcParameters) -> EffectiveModeResult:
    t = translate_origin(lvc)
    o = separate_subsystem(t)
    model, transform = diagonalize_hessian_blocks(t, o)
    return EffectiveModeResult(model, transform, t)


def system_bath_to_lvc(model: SystemBathModel) -> LvcParameters:
    """Raw LVC form of a subsystem-bath model, expressed in its normal modes.

    Inverse construction used to build test models. A constant interstate
    coupling is produced by a common gradient that shifts the origin.
    """
    s = model.subsystem
    H = full_hessian(model)
    w2, W = np.linalg.eigh(H)
    if np.any(w2 <= 0):
        raise ValueError("full Hessian is not positive definite")
    n = H.shape[0]
    g = np.zeros(n)
    g[:2] = s.G
    cvec = np.zeros(n)
    cvec[:2] = s.C
    g, c = W.T @ g, W.T @ cvec
    shift = np.zeros(n)
    if s.Delta12 != 0:
        if not np.any(c):
            raise ValueError("Delta12 != 0 needs a nonzero coupling gradient")
        shift = -s.Delta12 * c / (c @ c)
    common = w2 * shift
    delta = s.Delta + 2.0 * float(shift @ g)
    return LvcParameters(np.sqrt(w2), common - g, common + g, c, delta=delta)
