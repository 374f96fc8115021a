"""Uniform periodic grids on the centered cube, field storage, and spectral
differential calculus.

The computational domain is the cube of edge length ``k`` (an integer number
of lattice cells) with periodic boundary conditions.  Each axis carries
``n*k`` nodes at spacing ``h = 1/n``; node ``j`` sits at the coordinate
``j*h - k/2``, so the cube is logically centered at the origin.  Derivatives
are exact on the trigonometric interpolant (Fourier multipliers), and the
uniform-weight quadrature ``h^N * sum`` is the exact spectral quadrature on
this basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import FieldFormatError, GridMismatch, InvalidGrid, NonIntegerShift


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the centered cube of edge ``k``.

    dim : spatial dimension, 1 or 2
    k   : cube edge in lattice units (positive integer)
    n   : nodes per unit cell per axis (positive even integer, >= 4)
    """

    dim: int
    k: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidGrid(f"dimension must be 1 or 2, got {self.dim}")
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise InvalidGrid(f"cell edge k must be a positive integer, got {self.k!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 4 or self.n % 2:
            raise InvalidGrid(f"resolution n must be an even integer >= 4, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def points_per_axis(self) -> int:
        return self.n * self.k

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_measure(self) -> float:
        return float(self.k ** self.dim)

    @property
    def node_weight(self) -> float:
        """Quadrature weight per node; integrating 1 gives exactly k^N."""
        return self.h ** self.dim

    def axis_coords(self) -> np.ndarray:
        """Node coordinates along one axis, centered: j*h - k/2."""
        m = self.points_per_axis
        return np.arange(m) * self.h - self.k / 2.0

    def coords(self) -> list[np.ndarray]:
        """Meshgrid coordinate arrays (indexing='ij'), one per axis."""
        axes = [self.axis_coords()] * self.dim
        return list(np.meshgrid(*axes, indexing="ij"))

    def radius(self) -> np.ndarray:
        """Euclidean distance of each node from the cube center."""
        cs = self.coords()
        return np.sqrt(sum(c * c for c in cs))


def make_grid(dim: int, k: int, n: int) -> GridSpec:
    """Validated grid constructor; raises InvalidGrid on bad input."""
    return GridSpec(dim, k, n)


class PeriodicField:
    """Real-valued samples of a k-periodic function on a GridSpec.

    Values are stored in the grid's natural (row-major) axis order with no
    boundary duplication.  Instances are immutable: the value array is
    read-only and all operations return new fields.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        values = np.asarray(values, dtype=float)
        if values.shape == (grid.num_nodes,):
            values = values.reshape(grid.shape)
        if values.shape != grid.shape:
            raise GridMismatch(
                f"value shape {values.shape} does not match grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidGrid("field values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("PeriodicField is immutable")

    # small arithmetic sugar; everything returns a fresh field
    def __add__(self, other):
        if isinstance(other, PeriodicField):
            self._check(other)
            return PeriodicField(self.grid, self.values + other.values)
        return PeriodicField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, PeriodicField):
            self._check(other)
            return PeriodicField(self.grid, self.values - other.values)
        return PeriodicField(self.grid, self.values - other)

    def __mul__(self, c):
        if isinstance(c, PeriodicField):
            self._check(c)
            return PeriodicField(self.grid, self.values * c.values)
        return PeriodicField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicField(self.grid, -self.values)

    def _check(self, other: "PeriodicField"):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def constant_field(grid: GridSpec, c: float) -> PeriodicField:
    return PeriodicField(grid, np.full(grid.shape, float(c)))


def zero_field(grid: GridSpec) -> PeriodicField:
    return constant_field(grid, 0.0)


# -- spectral machinery -------------------------------------------------------

@lru_cache(maxsize=64)
def _sq_wavenumbers_rfft(grid: GridSpec) -> np.ndarray:
    """|omega|^2 on the rfftn mode layout; omega_m = 2*pi*m/k per axis."""
    m = grid.points_per_axis
    full = 2.0 * np.pi * np.fft.fftfreq(m, d=grid.h)
    half = 2.0 * np.pi * np.fft.rfftfreq(m, d=grid.h)
    if grid.dim == 1:
        return half ** 2
    return full[:, None] ** 2 + half[None, :] ** 2


def _rfft(values: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(values)


def _irfft(spec: np.ndarray, shape) -> np.ndarray:
    return np.fft.irfftn(spec, s=shape, axes=tuple(range(len(shape))))


def laplacian_apply(u: PeriodicField) -> PeriodicField:
    """Return -Laplacian(u), exact on the trigonometric interpolant."""
    w2 = _sq_wavenumbers_rfft(u.grid)
    out = _irfft(w2 * _rfft(u.values), u.grid.shape)
    return PeriodicField(u.grid, out)


def laplacian_values(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Array-level -Laplacian for hot paths that avoid field wrapping."""
    return _irfft(_sq_wavenumbers_rfft(grid) * _rfft(values), grid.shape)


def integrate(g: PeriodicField) -> float:
    """Integral over the cube: uniform weights h^N (exact spectral quadrature)."""
    return float(g.values.sum() * g.grid.node_weight)


def integrate_values(grid: GridSpec, values: np.ndarray) -> float:
    return float(values.sum() * grid.node_weight)


def grad_sq_integral(u: PeriodicField) -> float:
    """Integral of |grad u|^2 via Parseval on the interpolant."""
    return _grad_sq(u.grid, u.values)


def _grad_sq(grid: GridSpec, values: np.ndarray) -> float:
    m = grid.points_per_axis
    w2 = _sq_wavenumbers_rfft(grid)
    spec = _rfft(values)
    # rfft stores only half the modes along the last axis: double all columns
    # except the self-conjugate ones (0 and, for even m, the Nyquist column).
    mag = w2 * np.abs(spec) ** 2
    weights = np.full(spec.shape[-1], 2.0)
    weights[0] = 1.0
    if m % 2 == 0:
        weights[-1] = 1.0
    total = float((mag * weights).sum())
    return total * grid.node_weight / grid.num_nodes


def h1_norm(u: PeriodicField) -> float:
    """Standard H^1 norm: (int |grad u|^2 + |u|^2)^(1/2)."""
    val = grad_sq_integral(u) + integrate_values(u.grid, u.values ** 2)
    return float(np.sqrt(max(val, 0.0)))


def translate_field(u: PeriodicField, b) -> PeriodicField:
    """Translate by an integer lattice vector: returns u(. + b).

    The shift is b*n grid nodes per axis (modulo n*k), a pure permutation, so
    all integrals and norms are preserved exactly.
    """
    b = np.atleast_1d(b)
    if b.shape != (u.grid.dim,):
        raise NonIntegerShift(f"shift must have {u.grid.dim} components, got {b!r}")
    if not np.all(np.equal(np.mod(b, 1), 0)):
        raise NonIntegerShift(f"shift must be integral in lattice units, got {b!r}")
    b = b.astype(int)
    out = u.values
    for axis, bi in enumerate(b):
        out = np.roll(out, -int(bi) * u.grid.n, axis=axis)
    return PeriodicField(u.grid, out)


# -- 1-periodic coefficient functions -----------------------------------------

@dataclass(frozen=True)
class PeriodicCoefficient:
    """A bounded 1-periodic scalar function of x, given in closed form
    (constant, cosine series) or as unit-cell samples.

    Used for potentials, nonlinearity weights, and dielectric profiles.
    Cosine series: value + sum_i amp_i * cos(2*pi * m_i . x) with integer
    mode vectors m_i.
    """

    dim: int
    kind: str                      # "constant" | "cosine" | "sampled"
    value: float = 0.0             # constant part
    terms: tuple = ()              # ((amp, (m1[, m2])), ...)
    samples: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidGrid(f"dimension must be 1 or 2, got {self.dim}")
        if self.kind not in ("constant", "cosine", "sampled"):
            raise InvalidGrid(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "sampled":
            s = self.samples
            if s is None or s.ndim != self.dim or len(set(s.shape)) != 1:
                raise InvalidGrid("sampled coefficient needs a square unit-cell array")
            if not np.all(np.isfinite(s)):
                raise InvalidGrid("coefficient samples must be finite")

    # constructors ------------------------------------------------------------
    @staticmethod
    def constant(c: float, dim: int = 1) -> "PeriodicCoefficient":
        return PeriodicCoefficient(dim=dim, kind="constant", value=float(c))

    @staticmethod
    def cosine(terms, dim: int = 1, offset: float = 0.0) -> "PeriodicCoefficient":
        """terms: iterable of (amplitude, mode) with integer mode vectors."""
        norm = []
        for amp, m in terms:
            mv = tuple(int(mi) for mi in np.atleast_1d(m))
            if len(mv) != dim:
                raise InvalidGrid(f"mode {m!r} does not match dimension {dim}")
            norm.append((float(amp), mv))
        return PeriodicCoefficient(dim=dim, kind="cosine", value=float(offset),
                                   terms=tuple(norm))

    @staticmethod
    def from_samples(samples) -> "PeriodicCoefficient":
        s = np.asarray(samples, dtype=float).copy()
        s.setflags(write=False)
        return PeriodicCoefficient(dim=s.ndim, kind="sampled", samples=s)

    # evaluation ---------------------------------------------------------------
    def _eval_at(self, axes: list[np.ndarray]) -> np.ndarray:
        grids = np.meshgrid(*axes, indexing="ij") if self.dim > 1 else [axes[0]]
        out = np.full(grids[0].shape, self.value, dtype=float)
        for amp, m in self.terms:
            phase = sum(2.0 * np.pi * mi * g for mi, g in zip(m, grids))
            out += amp * np.cos(phase)
        return out

    def sample_unit(self, n: int) -> np.ndarray:
        """Samples on the unit-cell grid j/n (uncentered), shape (n,)*dim."""
        if self.kind == "sampled":
            return _resample_unit(self.samples, n)
        axes = [np.arange(n) / n] * self.dim
        return self._eval_at(axes)

    def sample(self, grid: GridSpec) -> np.ndarray:
        """Samples at the grid's centered coordinates j*h - k/2."""
        if grid.dim != self.dim:
            raise GridMismatch(f"coefficient is {self.dim}D, grid is {grid.dim}D")
        if self.kind != "sampled":
            axes = [grid.axis_coords()] * self.dim
            return self._eval_at(axes)
        unit = _resample_unit(self.samples, grid.n)
        tiled = np.tile(unit, (grid.k,) * self.dim)
        if grid.k % 2:
            # odd k: the centered origin sits half a cell into a lattice cell
            tiled = np.roll(tiled, (-grid.n // 2,) * self.dim,
                            axis=tuple(range(self.dim)))
        return tiled

    def fourier_coefficients(self, n: int) -> np.ndarray:
        """DFT coefficients of the unit-cell samples (aliased beyond Nyquist)."""
        return np.fft.fftn(self.sample_unit(n)) / n ** self.dim

    def sup_bound(self, n: int = 128) -> float:
        return float(np.max(np.abs(self.sample_unit(n))))

    def min_value(self, n: int = 128) -> float:
        return float(np.min(self.sample_unit(n)))

    def max_value(self, n: int = 128) -> float:
        return float(np.max(self.sample_unit(n)))

    def affine(self, scale: float = 1.0, offset: float = 0.0) -> "PeriodicCoefficient":
        """Return scale*this + offset, preserving the representation kind."""
        if self.kind == "sampled":
            return PeriodicCoefficient.from_samples(scale * self.samples + offset)
        terms = tuple((scale * a, m) for a, m in self.terms)
        return PeriodicCoefficient(dim=self.dim, kind=self.kind,
                                   value=scale * self.value + offset, terms=terms)


def _resample_unit(samples: np.ndarray, n: int) -> np.ndarray:
    """Trigonometric resampling of unit-cell data to resolution n per axis."""
    n0 = samples.shape[0]
    if n0 == n:
        return np.asarray(samples, dtype=float)
    spec = np.fft.fftn(samples) / samples.size
    dim = samples.ndim
    out = np.zeros((n,) * dim, dtype=complex)
    # copy the retained (aliased down or padded up) mode box
    keep = min(n0, n)
    lo, hi = keep // 2, keep - keep // 2
    idx_src = np.r_[0:hi, n0 - lo:n0]
    idx_dst = np.r_[0:hi, n - lo:n]
    if dim == 1:
        out[idx_dst] = spec[idx_src]
    else:
        out[np.ix_(idx_dst, idx_dst)] = spec[np.ix_(idx_src, idx_src)]
    return np.real(np.fft.ifftn(out) * n ** dim)


# -- binary field dumps --------------------------------------------------------

def dump_field(u: PeriodicField, path) -> None:
    """Write a field as flat little-endian float64 (row-major) plus a JSON
    sidecar ``<path>.json`` holding {dim, k, n}.  Round trips bit-exactly."""
    path = Path(path)
    path.write_bytes(u.values.reshape(-1).astype("<f8").tobytes())
    sidecar = {"dim": u.grid.dim, "k": u.grid.k, "n": u.grid.n}
    Path(str(path) + ".json").write_text(json.dumps(sidecar))


def load_field(path) -> PeriodicField:
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise FieldFormatError(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
        grid = GridSpec(int(meta["dim"]), int(meta["k"]), int(meta["n"]))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"bad sidecar {sidecar}: {exc}") from exc
    try:
        raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    except ValueError as exc:
        raise FieldFormatError(f"corrupt dump {path}: {exc}") from exc
    if raw.size != grid.num_nodes:
        raise FieldFormatError(
            f"dump holds {raw.size} values, grid needs {grid.num_nodes}")
    return PeriodicField(grid, raw.astype(float))
