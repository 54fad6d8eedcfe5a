"""Discretized subsystem Hamiltonians.

Two nuclear bases are supported: a cell-centred uniform Fourier grid and a
truncated product basis of harmonic-oscillator functions. Electronic states
are stacked as two blocks, ``[A; D]`` in the diabatic representation and
``[surface 1; surface 2]`` in the adiabatic one.

Observables that are not polynomial in the coordinates (half-plane
indicators, adiabatic projections) are assembled by quadrature on a refined
sampling grid through `BasisSampler`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import erfc

from .model import SubsystemParameters, check, derive_geometry, lower_adiabatic_vector, potential_fields

DIABATIC = "diabatic"
ADIABATIC = "adiabatic"
REPRESENTATIONS = (DIABATIC, ADIABATIC)


def _power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with samples at cell centres ``xmin + (k + 1/2) dx``."""

    nx: int = 32
    ny: int = 32
    bounds: tuple[float, float, float, float] = (-6.0, 6.0, -6.0, 6.0)

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not (_power_of_two(n) and n >= 16):
                raise ValueError(f"{name} must be a power of two >= 16, got {n}")
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("bounds must be increasing")

    @property
    def dx(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / self.ny

    @property
    def x(self) -> np.ndarray:
        return self.bounds[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return self.bounds[2] + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def shifted(self, sx: float, sy: float) -> "GridSpec":
        b = self.bounds
        return replace(self, bounds=(b[0] + sx, b[1] + sx, b[2] + sy, b[3] + sy))


@dataclass(frozen=True)
class HoBasisSpec:
    """Product oscillator basis with ``n_x <= n_max_x``, ``n_y <= n_max_y``, ``n_x + n_y <= max_total``.

    ``frequencies=None`` takes the subsystem frequencies. ``sample_bounds`` and
    ``sample_points`` set the quadrature grid used for non-polynomial operators.
    """

    n_max_x: int = 40
    n_max_y: int = 40
    max_total: int | None = 60
    center: tuple[float, float] = (0.0, 0.0)
    frequencies: tuple[float, float] | None = None
    sample_bounds: tuple[float, float, float, float] = (-9.0, 9.0, -9.0, 9.0)
    sample_points: int = 256

    def __post_init__(self):
        if self.n_max_x < 1 or self.n_max_y < 1:
            raise ValueError("oscillator cutoffs must be >= 1")
        if self.frequencies is not None and min(self.frequencies) <= 0:
            raise ValueError("reference frequencies must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def resolved_frequencies(self, p: SubsystemParameters) -> tuple[float, float]:
        if self.frequencies is None:
            return float(p.Omega_X), float(p.Omega_Y)
        return tuple(float(f) for f in self.frequencies)

    @cached_property
    def index(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = np.meshgrid(np.arange(self.n_max_x + 1), np.arange(self.n_max_y + 1), indexing="ij")
        nx, ny = nx.ravel(), ny.ravel()
        if self.max_total is not None:
            keep = nx + ny <= self.max_total
            nx, ny = nx[keep], ny[keep]
        return nx, ny

    @property
    def size(self) -> int:
        return int(self.index[0].size)


Scheme = GridSpec | HoBasisSpec


# ---------------------------------------------------------------- 1D building blocks

def fourier_derivatives(n: int, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectral first and second derivative matrices on a periodic grid.

    The Nyquist component is dropped from the first derivative so that the
    matrix stays real and antisymmetric.
    """
    dx = length / n
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    k1 = k.copy()
    if n % 2 == 0:
        k1[n // 2] = 0.0
    F = np.fft.fft(np.eye(n), axis=0)
    D1 = np.real(np.fft.ifft(1j * k1[:, None] * F, axis=0))
    D2 = np.real(np.fft.ifft(-(k**2)[:, None] * F, axis=0))
    return D1, D2


def fourier_interpolation(x: np.ndarray, length: float, xf: np.ndarray) -> np.ndarray:
    """Matrix S mapping grid samples at ``x`` to values at ``xf`` of the band-limited interpolant.

    Columns are orthonormal under a midpoint rule on any finer uniform grid
    (after dividing by sqrt(dx)).
    """
    n = x.size
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        k[n // 2] = abs(k[n // 2])
    E = np.exp(1j * np.outer(xf - x[0], k)) / n
    S = E @ np.fft.fft(np.eye(n), axis=0)
    if n % 2 == 0:
        # real orthonormal Nyquist function sqrt(2) cos(k_n x): keeps S real and
        # the interpolants orthonormal, at the cost of exact nodal interpolation
        # in that single component
        kn = np.pi * n / length
        nyq = np.fft.fft(np.eye(n), axis=0)[n // 2] / n
        S -= np.outer(np.exp(1j * kn * (xf - x[0])), nyq)
        S += math.sqrt(2.0) * np.outer(np.cos(kn * (xf - x[0])), nyq)
    return np.real(S)


def ho_ladder(n_max: int) -> np.ndarray:
    """Annihilation operator in the truncated number basis."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def ho_position_matrices(n_max: int, omega: float, center: float = 0.0):
    """Exact (untruncated-product) matrices of x, x^2 and p^2 for one oscillator."""
    a = ho_ladder(n_max)
    ad = a.T
    nn = np.diag(2.0 * np.arange(n_max + 1) + 1.0)
    a2 = a @ a
    ad2 = ad @ ad
    xr = (a + ad) / math.sqrt(2.0 * omega)
    xr2 = (nn + a2 + ad2) / (2.0 * omega)
    eye = np.eye(n_max + 1)
    x = center * eye + xr
    x2 = center**2 * eye + 2.0 * center * xr + xr2
    p2 = 0.5 * omega * (nn - a2 - ad2)
    return x, x2, p2


def ho_functions(n_max: int, omega: float, center: float, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions phi_n(x), shape (len(x), n_max + 1), by stable recurrence."""
    xi = math.sqrt(omega) * (np.asarray(x, dtype=float) - center)
    out = np.zeros((xi.size, n_max + 1))
    out[:, 0] = (omega / math.pi) ** 0.25 * np.exp(-0.5 * xi**2)
    if n_max >= 1:
        out[:, 1] = math.sqrt(2.0) * xi * out[:, 0]
    for n in range(2, n_max + 1):
        out[:, n] = math.sqrt(2.0 / n) * xi * out[:, n - 1] - math.sqrt((n - 1) / n) * out[:, n - 2]
    return out


# ---------------------------------------------------------------- sampling / quadrature

@dataclass
class BasisSampler:
    """Nuclear basis functions tabulated on a fine midpoint grid.

    ``phi_x[a, i]`` and ``phi_y[b, j]`` are one-dimensional factors; ``ix``,
    ``iy`` list the product functions that make up the basis.
    """

    xf: np.ndarray
    yf: np.ndarray
    phi_x: np.ndarray
    phi_y: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    bounds: tuple[float, float, float, float]
    full_product: bool = False

    @property
    def weight(self) -> float:
        return float((self.xf[1] - self.xf[0]) * (self.yf[1] - self.yf[0]))

    @property
    def size(self) -> int:
        return int(self.ix.size)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xf, self.yf, indexing="ij")

    def _scatter(self, c: np.ndarray) -> np.ndarray:
        shape = (self.phi_x.shape[1], self.phi_y.shape[1]) + c.shape[1:]
        C = np.zeros(shape, dtype=c.dtype)
        C[self.ix, self.iy] = c
        return C

    def values(self, c: np.ndarray) -> np.ndarray:
        """Function values on the fine grid; trailing axes of ``c`` are carried along."""
        C = self._scatter(np.asarray(c))
        return np.einsum("ai,ij...->aj...", self.phi_x, np.einsum("ij...,bj->ib...", C, self.phi_y))

    def project(self, f: np.ndarray) -> np.ndarray:
        """L2 projection coefficients of a function tabulated on the fine grid."""
        g = self.phi_x.T @ f @ self.phi_y * self.weight
        return g[self.ix, self.iy]

    def quadrature(self, f: np.ndarray) -> np.ndarray:
        """Matrix of a multiplicative operator ``f`` in the basis."""
        nbx = self.phi_x.shape[1]
        nby = self.phi_y.shape[1]
        nfx = self.xf.size
        t1 = np.einsum("ab,bj,bl->ajl", f, self.phi_y, self.phi_y, optimize=True)
        px = (self.phi_x[:, :, None] * self.phi_x[:, None, :]).reshape(nfx, nbx * nbx)
        full = (px.T @ t1.reshape(nfx, nby * nby)).reshape(nbx, nbx, nby, nby) * self.weight
        sub = full[self.ix[:, None], self.ix[None, :], self.iy[:, None], self.iy[None, :]]
        return 0.5 * (sub + sub.T)


def make_sampler(p: SubsystemParameters, scheme: Scheme, refine: int = 8) -> BasisSampler:
    if isinstance(scheme, GridSpec):
        x0, x1, y0, y1 = scheme.bounds
        nfx, nfy = refine * scheme.nx, refine * scheme.ny
        xf = x0 + (np.arange(nfx) + 0.5) * (x1 - x0) / nfx
        yf = y0 + (np.arange(nfy) + 0.5) * (y1 - y0) / nfy
        phx = fourier_interpolation(scheme.x, x1 - x0, xf) / math.sqrt(scheme.dx)
        phy = fourier_interpolation(scheme.y, y1 - y0, yf) / math.sqrt(scheme.dy)
        ix, iy = np.meshgrid(np.arange(scheme.nx), np.arange(scheme.ny), indexing="ij")
        return BasisSampler(xf, yf, phx, phy, ix.ravel(), iy.ravel(), scheme.bounds, True)
    wx, wy = scheme.resolved_frequencies(p)
    x0, x1, y0, y1 = scheme.sample_bounds
    n = scheme.sample_points
    xf = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    yf = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    phx = ho_functions(scheme.n_max_x, wx, scheme.center[0], xf)
    phy = ho_functions(scheme.n_max_y, wy, scheme.center[1], yf)
    ix, iy = scheme.index
    return BasisSampler(xf, yf, phx, phy, ix, iy, scheme.sample_bounds, scheme.max_total is None)


# ---------------------------------------------------------------- Hamiltonians

@dataclass
class DiscretizedHamiltonian:
    representation: str
    scheme: Scheme
    params: SubsystemParameters
    matrix: np.ndarray | None = None
    operator: "GridOperator | None" = None
    energies: np.ndarray | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        if self.matrix is not None:
            return self.matrix.shape[0]
        return 2 * self.scheme.size

    @property
    def nuclear_size(self) -> int:
        return self.dim // 2

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ v
        return self.operator.apply(v)

    def diagonalize(self) -> "DiscretizedHamiltonian":
        if self.matrix is None:
            raise ValueError("dense diagonalization needs the assembled matrix")
        self.energies, self.vectors = scipy.linalg.eigh(self.matrix, driver="evd")
        return self

    @property
    def norm(self) -> float:
        if self.energies is not None:
            return float(np.max(np.abs(self.energies)))
        return float(np.linalg.norm(self.matrix, 2))

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.apply(psi))))


class GridOperator:
    """Matrix-free action of a grid Hamiltonian using FFTs."""

    def __init__(self, p: SubsystemParameters, grid: GridSpec, representation: str):
        self.grid = grid
        self.representation = representation
        lx = grid.bounds[1] - grid.bounds[0]
        ly = grid.bounds[3] - grid.bounds[2]
        kx = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
        ky = 2 * np.pi * np.fft.fftfreq(grid.ny, d=grid.dy)
        self.k2 = kx[:, None] ** 2 + ky[None, :] ** 2
        kx1, ky1 = kx.copy(), ky.copy()
        kx1[grid.nx // 2] = 0.0
        ky1[grid.ny // 2] = 0.0
        self.kx1, self.ky1 = kx1[:, None], ky1[None, :]
        X, Y = grid.mesh()
        f = potential_fields(p, X, Y)
        if representation == DIABATIC:
            self.v = np.array([[f.V_A, f.V_c], [f.V_c, f.V_D]])
        else:
            fsq = 0.5 * (f.F[0] ** 2 + f.F[1] ** 2)
            zero = np.zeros_like(X)
            self.v = np.array([[f.W1 + fsq, zero], [zero, f.W2 + fsq]])
            self.F = f.F
        del lx, ly

    def _dx(self, g):
        return np.real(np.fft.ifft(1j * self.kx1 * np.fft.fft(g, axis=0), axis=0))

    def _dy(self, g):
        return np.real(np.fft.ifft(1j * self.ky1 * np.fft.fft(g, axis=1), axis=1))

    def kinetic(self, g):
        return 0.5 * np.fft.ifft2(self.k2 * np.fft.fft2(g))

    def nac(self, g):
        """-1/2 (F.grad + grad.F) acting on a real or complex field."""
        if np.iscomplexobj(g):
            return self.nac(g.real) + 1j * self.nac(g.imag)
        Fx, Fy = self.F
        return -0.5 * (Fx * self._dx(g) + self._dx(Fx * g) + Fy * self._dy(g) + self._dy(Fy * g))

    def apply(self, v: np.ndarray) -> np.ndarray:
        nx, ny = self.grid.nx, self.grid.ny
        psi = np.asarray(v).reshape(2, nx, ny)
        out = np.empty(psi.shape, dtype=np.result_type(psi, complex))
        for e in range(2):
            out[e] = self.kinetic(psi[e]) + self.v[e, 0] * psi[0] + self.v[e, 1] * psi[1]
        if self.representation == ADIABATIC:
            out[0] += self.nac(psi[1])
            out[1] -= self.nac(psi[0])
        if not np.iscomplexobj(v):
            out = out.real
        return out.reshape(v.shape)


def _check_bounds(p: SubsystemParameters, grid: GridSpec) -> None:
    """Reject grids that clip the initial Gaussian or crowd the minima."""
    widths = (1.0 / math.sqrt(2.0 * p.Omega_X), 1.0 / math.sqrt(2.0 * p.Omega_Y))
    x0, x1, y0, y1 = grid.bounds
    inside = 1.0
    for lo, hi, mu, s in ((x0, x1, -p.X0, widths[0]), (y0, y1, -p.Y0, widths[1])):
        inside *= 1.0 - 0.5 * erfc((hi - mu) / (s * math.sqrt(2))) - 0.5 * erfc((mu - lo) / (s * math.sqrt(2)))
    if 1.0 - inside > 1e-6:
        raise ValueError(f"grid bounds clip {1.0 - inside:.2e} of the initial Gaussian (limit 1e-6)")
    # the intersection may lie outside the box (far-detuned models); only the wells need room
    for pt in (np.array([-p.X0, -p.Y0]), np.array([p.X0, p.Y0])):
        if (pt[0] - 3 * widths[0] < x0 or pt[0] + 3 * widths[0] > x1
                or pt[1] - 3 * widths[1] < y0 or pt[1] + 3 * widths[1] > y1):
            raise ValueError(f"grid bounds leave less than 3 widths of margin around {tuple(pt)}")


def _avoid_ci_node(p: SubsystemParameters, grid: GridSpec) -> GridSpec:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ci = derive_geometry(p).ci_point
    except ValueError:
        return grid
    if ci is None:
        return grid
    on_x = np.min(np.abs(grid.x - ci[0])) < 1e-9 * grid.dx
    on_y = np.min(np.abs(grid.y - ci[1])) < 1e-9 * grid.dy
    if on_x and on_y:
        warnings.warn("intersection point lies on a grid node; shifting the grid by half a spacing", stacklevel=3)
        return grid.shifted(0.5 * grid.dx, 0.5 * grid.dy)
    return grid


def _grid_blocks(grid: GridSpec):
    lx = grid.bounds[1] - grid.bounds[0]
    ly = grid.bounds[3] - grid.bounds[2]
    d1x, d2x = fourier_derivatives(grid.nx, lx)
    d1y, d2y = fourier_derivatives(grid.ny, ly)
    ix, iy = np.eye(grid.nx), np.eye(grid.ny)
    T = -0.5 * (np.kron(d2x, iy) + np.kron(ix, d2y))
    return T, np.kron(d1x, iy), np.kron(ix, d1y)


def _ho_blocks(p: SubsystemParameters, basis: HoBasisSpec):
    wx, wy = basis.resolved_frequencies(p)
    x, x2, px2 = ho_position_matrices(basis.n_max_x, wx, basis.center[0])
    y, y2, py2 = ho_position_matrices(basis.n_max_y, wy, basis.center[1])
    ix, iy = basis.index
    ex = np.eye(basis.n_max_x + 1)[np.ix_(ix, ix)]
    ey = np.eye(basis.n_max_y + 1)[np.ix_(iy, iy)]

    def lift(ax, ay):
        return ax[np.ix_(ix, ix)] * ay[np.ix_(iy, iy)]

    one_x = np.eye(basis.n_max_x + 1)
    one_y = np.eye(basis.n_max_y + 1)
    return {
        "T": 0.5 * (lift(px2, one_y) + lift(one_x, py2)),
        "X": lift(x, one_y),
        "Y": lift(one_x, y),
        "X2": lift(x2, one_y),
        "Y2": lift(one_x, y2),
        "I": ex * ey,
    }


def build_diabatic(p: SubsystemParameters, scheme: Scheme, diagonalize: bool = True,
                   dense: bool = True) -> DiscretizedHamiltonian:
    """Diabatic Hamiltonian ``[[T + V_A, V_c], [V_c, T + V_D]]``."""
    check(p)
    if isinstance(scheme, GridSpec):
        _check_bounds(p, scheme)
        scheme = _avoid_ci_node(p, scheme)
        if not dense:
            return DiscretizedHamiltonian(DIABATIC, scheme, p, operator=GridOperator(p, scheme, DIABATIC))
        T, _, _ = _grid_blocks(scheme)
        X, Y = scheme.mesh()
        f = potential_fields(p, X.ravel(), Y.ravel())
        H = np.block([[T + np.diag(f.V_A), np.diag(f.V_c)], [np.diag(f.V_c), T + np.diag(f.V_D)]])
    else:
        b = _ho_blocks(p, scheme)
        wx2, wy2 = p.Omega_X**2, p.Omega_Y**2
        base = 0.5 * (wx2 * (b["X2"] + p.X0**2 * b["I"]) + wy2 * (b["Y2"] + p.Y0**2 * b["I"]))
        lin = wx2 * p.X0 * b["X"] + wy2 * p.Y0 * b["Y"]
        VA = base - lin - 0.5 * p.Delta * b["I"]
        VD = base + lin + 0.5 * p.Delta * b["I"]
        Vc = p.C_X * b["X"] + p.C_Y * b["Y"] + p.Delta12 * b["I"]
        H = np.block([[b["T"] + VA, Vc], [Vc, b["T"] + VD]])
    H = 0.5 * (H + H.T)
    out = DiscretizedHamiltonian(DIABATIC, scheme, p, matrix=H)
    return out.diagonalize() if diagonalize else out


def build_adiabatic_no_gp(p: SubsystemParameters, scheme: GridSpec, diagonalize: bool = True,
                          dense: bool = True) -> DiscretizedHamiltonian:
    """Single-valued adiabatic Hamiltonian on a grid (no geometric phase).

    The derivative coupling uses the symmetric ordering
    ``-1/2 (F.grad + grad.F)``, which keeps the matrix exactly symmetric.
    """
    if not isinstance(scheme, GridSpec):
        raise ValueError("the adiabatic representation is available on grids only")
    check(p)
    _check_bounds(p, scheme)
    scheme = _avoid_ci_node(p, scheme)
    if not dense:
        return DiscretizedHamiltonian(ADIABATIC, scheme, p, operator=GridOperator(p, scheme, ADIABATIC))
    T, Dx, Dy = _grid_blocks(scheme)
    X, Y = scheme.mesh()
    f = potential_fields(p, X.ravel(), Y.ravel())
    Fx, Fy = f.F
    if np.any(f.at_ci):
        raise ValueError("a grid node sits on the intersection")
    A = -0.5 * (Fx[:, None] * Dx + Dx * Fx[None, :] + Fy[:, None] * Dy + Dy * Fy[None, :])
    dbh = 0.5 * (Fx**2 + Fy**2)
    H = np.block([[T + np.diag(f.W1 + dbh), A], [A.T, T + np.diag(f.W2 + dbh)]])
    H = 0.5 * (H + H.T)
    out = DiscretizedHamiltonian(ADIABATIC, scheme, p, matrix=H)
    return out.diagonalize() if diagonalize else out


def build_hamiltonian(p: SubsystemParameters, scheme: Scheme, representation: str, **kw) -> DiscretizedHamiltonian:
    if representation == DIABATIC:
        return build_diabatic(p, scheme, **kw)
    if representation == ADIABATIC:
        return build_adiabatic_no_gp(p, scheme, **kw)
    raise ValueError(f"unknown representation {representation!r}")


# ---------------------------------------------------------------- operators and states

OPERATORS = ("X", "Y", "donor_projector", "adiabatic_projection_1", "adiabatic_projection_2")


def electronic_weights(p: SubsystemParameters, X, Y, op: str, representation: str):
    """Pointwise 2x2 electronic weight blocks ``w[e, e']`` of a multiplicative operator."""
    X = np.asarray(X)
    one = np.ones_like(X, dtype=float)
    zero = np.zeros_like(X, dtype=float)
    if op == "donor_projector":
        g = derive_geometry(p)
        ind = (g.signed_degeneracy(X, Y) < 0).astype(float)
        return np.array([[ind, zero], [zero, ind]])
    if op in ("X", "Y"):
        c = X if op == "X" else np.asarray(Y)
        return np.array([[c * one, zero], [zero, c * one]])
    if op not in ("adiabatic_projection_1", "adiabatic_projection_2"):
        raise ValueError(f"unknown operator {op!r}")
    if representation == ADIABATIC:
        first = op.endswith("1")
        return np.array([[one if first else zero, zero], [zero, zero if first else one]])
    a, d = lower_adiabatic_vector(p, X, Y)
    if op.endswith("1"):
        return np.array([[a * a, a * d], [a * d, d * d]])
    return np.array([[d * d, -a * d], [-a * d, a * a]])


def operator_matrix(op: str, p: SubsystemParameters, scheme: Scheme, representation: str = DIABATIC,
                    refine: int = 8, sampler: BasisSampler | None = None) -> np.ndarray:
    """Matrix of a multiplicative observable in the electronic x nuclear basis.

    Coordinates are exact (diagonal on grids, ladder algebra for oscillators).
    Projectors are integrated on a grid ``refine`` times finer than the basis;
    ``refine=1`` on a grid gives the pointwise (idempotent) indicator.
    """
    if op in ("X", "Y"):
        if isinstance(scheme, GridSpec):
            X, Y = scheme.mesh()
            diag = (X if op == "X" else Y).ravel()
            nuc = np.diag(diag)
        else:
            nuc = _ho_blocks(p, scheme)[op]
        z = np.zeros_like(nuc)
        return np.block([[nuc, z], [z, nuc]])
    if isinstance(scheme, GridSpec) and refine == 1:
        X, Y = scheme.mesh()
        w = electronic_weights(p, X.ravel(), Y.ravel(), op, representation)
        return np.block([[np.diag(w[0, 0]), np.diag(w[0, 1])], [np.diag(w[1, 0]), np.diag(w[1, 1])]])
    s = sampler if sampler is not None else make_sampler(p, scheme, refine)
    Xf, Yf = s.mesh()
    w = electronic_weights(p, Xf, Yf, op, representation)
    def block(f):
        return s.quadrature(f) if np.any(f) else np.zeros((s.size, s.size))

    b00, b01, b11 = block(w[0, 0]), block(w[0, 1]), block(w[1, 1])
    return np.block([[b00, b01], [b01.T, b11]])


@dataclass
class DensityState:
    """Subsystem state: a pure vector or a density matrix over the same basis."""

    representation: str
    scheme: Scheme
    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def density_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.outer(self.vector, self.vector.conj())

    def norm(self) -> float:
        if self.vector is not None:
            return float(np.vdot(self.vector, self.vector).real)
        return float(np.trace(self.matrix).real)


def initial_wavefunction(p: SubsystemParameters, X, Y, representation: str):
    """Donor-well Gaussian times the lower adiabatic state, as (component 0, component 1)."""
    chi = ((p.Omega_X * p.Omega_Y) ** 0.25 / math.sqrt(math.pi)
           * np.exp(-0.5 * p.Omega_X * (X + p.X0) ** 2 - 0.5 * p.Omega_Y * (Y + p.Y0) ** 2))
    if representation == ADIABATIC:
        return chi, np.zeros_like(chi)
    a, d = lower_adiabatic_vector(p, X, Y)
    return a * chi, d * chi


def prepare_initial_state(p: SubsystemParameters, scheme: Scheme, representation: str = DIABATIC,
                          refine: int = 8, sampler: BasisSampler | None = None) -> DensityState:
    """Donor ground vibrational state placed on the lower adiabatic surface.

    The state is the L2 projection of the continuum function onto the basis,
    computed on the refined sampling grid, then normalized.
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    if isinstance(scheme, GridSpec):
        _check_bounds(p, scheme)
        scheme = _avoid_ci_node(p, scheme)
    s = sampler if sampler is not None else make_sampler(p, scheme, refine)
    Xf, Yf = s.mesh()
    c0, c1 = initial_wavefunction(p, Xf, Yf, representation)
    v = np.concatenate([s.project(c0), s.project(c1)])
    v /= np.linalg.norm(v)
    return DensityState(representation, scheme, vector=v)
