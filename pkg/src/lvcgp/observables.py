"""Donor population, adiabatic populations and densities, and the nodal-line diagnostic."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import Geometry, SubsystemParameters, derive_geometry, lower_adiabatic_vector
from .representation import (ADIABATIC, BasisSampler, Scheme, make_sampler, operator_matrix)

SERIES_COLUMNS = ("t", "P_D", "pop_adi_1", "pop_adi_2", "trace", "energy")


@dataclass
class TimeSeries:
    times: np.ndarray
    P_D: np.ndarray
    pop_adi_1: np.ndarray
    pop_adi_2: np.ndarray
    trace: np.ndarray
    energy: np.ndarray

    def rows(self):
        cols = [self.times, self.P_D, self.pop_adi_1, self.pop_adi_2, self.trace, self.energy]
        return np.column_stack(cols)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(SERIES_COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != SERIES_COLUMNS:
                raise ValueError(f"unexpected header {header}")
            data = np.array([[float(v) for v in row] for row in reader])
        return cls(*(data[:, k] for k in range(data.shape[1])))

    def value_at(self, t: float, column: str = "P_D") -> float:
        k = int(np.argmin(np.abs(self.times - t)))
        return float(getattr(self, column)[k])


@dataclass
class DensityGrid:
    """Lower-adiabatic nuclear density on a cell-centred grid spanning ``bounds``."""

    time: float
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # shape (len(x), len(y))
    bounds: tuple[float, float, float, float]

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.y[1] - self.y[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def write(self, path) -> None:
        """Header ``nx ny Xmin Xmax Ymin Ymax`` then one row per y value."""
        nx, ny = self.values.shape
        with open(path, "w") as fh:
            fh.write(f"{nx} {ny} " + " ".join(f"{b:.12g}" for b in self.bounds) + "\n")
            for j in range(ny):
                fh.write(" ".join(f"{v:.12g}" for v in self.values[:, j]) + "\n")

    @classmethod
    def read(cls, path, time: float = float("nan")) -> "DensityGrid":
        with open(path) as fh:
            head = fh.readline().split()
            nx, ny = int(head[0]), int(head[1])
            b = tuple(float(v) for v in head[2:6])
            rows = np.loadtxt(fh, ndmin=2)
        values = rows.T.reshape(nx, ny)
        x = b[0] + (np.arange(nx) + 0.5) * (b[1] - b[0]) / nx
        y = b[2] + (np.arange(ny) + 0.5) * (b[3] - b[2]) / ny
        return cls(time, x, y, values, b)


@dataclass(frozen=True)
class NodeDiagnostic:
    strip_fraction: float
    epsilon: float
    baseline: float
    acceptor_mass: float
    defined: bool = True

    @property
    def ratio(self) -> float:
        """Strip fraction relative to that of a uniform density."""
        return self.strip_fraction / self.baseline if self.defined else float("nan")


def _overlap_fraction(center, half, lo, hi):
    """Fraction of each interval [center - half, center + half] inside [lo, hi]."""
    a = np.maximum(center - half, lo)
    b = np.minimum(center + half, hi)
    return np.clip(b - a, 0.0, None) / (2.0 * half)


def node_weights(x: np.ndarray, y: np.ndarray, geometry: Geometry, epsilon: float):
    """Cell weights for (acceptor side) and (acceptor side within epsilon of the tuning line)."""
    X, Y = np.meshgrid(x, y, indexing="ij")
    dx, dy = x[1] - x[0], y[1] - y[0]
    tx, ty = geometry.tuning_direction
    # signed distance to the tuning line and its cell half-extent along the normal
    d = X * ty - Y * tx
    hd = 0.5 * (abs(ty) * dx + abs(tx) * dy)
    a, b, c0 = geometry.degeneracy_line
    norm = np.hypot(a, b)
    s = (a * X + b * Y + c0) / norm
    hs = 0.5 * (abs(a) * dx + abs(b) * dy) / norm
    acc = _overlap_fraction(s, hs, 0.0, np.inf)
    strip = _overlap_fraction(d, hd, -epsilon, epsilon)
    return acc, acc * strip


def node_diagnostic(g: DensityGrid, geometry: Geometry, epsilon: float = 0.15) -> NodeDiagnostic:
    """Share of acceptor-side density lying within ``epsilon`` of the line through both minima."""
    acc, strip = node_weights(g.x, g.y, geometry, epsilon)
    base = float(strip.sum() / acc.sum())
    mass = float(np.sum(acc * g.values) * g.cell_area)
    if mass < 1e-12:
        return NodeDiagnostic(float("nan"), epsilon, base, mass, defined=False)
    frac = float(np.sum(strip * g.values) / np.sum(acc * g.values))
    return NodeDiagnostic(min(max(frac, 0.0), 1.0), epsilon, base, mass)


def donor_population(state, projector: np.ndarray) -> float:
    """tr(rho P_D) for a state vector or density matrix, clamped to [0, 1]."""
    state = np.asarray(state)
    if state.ndim == 1:
        value = float(np.real(np.vdot(state, projector @ state)))
    else:
        value = float(np.real(np.sum(projector.T * state)))
    if value < -1e-8 or value > 1 + 1e-8:
        raise ValueError(f"donor population {value} outside [0, 1] beyond tolerance")
    return min(max(value, 0.0), 1.0)


@dataclass
class ObservableSet:
    """Projector matrices and density sampling for one basis and representation."""

    params: SubsystemParameters
    scheme: Scheme
    representation: str
    sampler: BasisSampler
    donor: np.ndarray
    adi1: np.ndarray
    adi2: np.ndarray
    geometry: Geometry = field(init=False)

    def __post_init__(self):
        self.geometry = derive_geometry(self.params)

    @classmethod
    def build(cls, p: SubsystemParameters, scheme: Scheme, representation: str, refine: int = 8) -> "ObservableSet":
        s = make_sampler(p, scheme, refine)
        mats = [operator_matrix(op, p, scheme, representation, sampler=s)
                for op in ("donor_projector", "adiabatic_projection_1", "adiabatic_projection_2")]
        return cls(p, scheme, representation, s, *mats)

    def lower_amplitude(self, vectors: np.ndarray) -> np.ndarray:
        """<phi_1(r)|psi(r)> on the sampling grid; extra trailing axes of ``vectors`` are kept."""
        n = self.sampler.size
        v = np.asarray(vectors)
        c0 = self.sampler.values(v[:n])
        c1 = self.sampler.values(v[n:])
        if self.representation == ADIABATIC:
            return c0
        Xf, Yf = self.sampler.mesh()
        a, d = lower_adiabatic_vector(self.params, Xf, Yf)
        extra = (slice(None), slice(None)) + (None,) * (v.ndim - 1)
        return a[extra] * c0 + d[extra] * c1

    def density(self, psi: np.ndarray, time: float) -> DensityGrid:
        amp = self.lower_amplitude(psi)
        return self._grid(np.abs(amp) ** 2, time)

    def density_from_matrix(self, rho: np.ndarray, basis: np.ndarray, time: float) -> DensityGrid:
        """Density of ``basis @ rho @ basis^H`` without forming the full matrix."""
        amp = self.lower_amplitude(basis)  # (nfx, nfy, K)
        nfx, nfy, k = amp.shape
        a = amp.reshape(nfx * nfy, k)
        vals = np.real(np.sum((a @ rho) * a.conj(), axis=1)).reshape(nfx, nfy)
        return self._grid(vals, time)

    def _grid(self, values, time) -> DensityGrid:
        return DensityGrid(float(time), self.sampler.xf.copy(), self.sampler.yf.copy(),
                           np.asarray(values, dtype=float), tuple(self.sampler.bounds))

    def node(self, g: DensityGrid, epsilon: float = 0.15) -> NodeDiagnostic:
        return node_diagnostic(g, self.geometry, epsilon)
