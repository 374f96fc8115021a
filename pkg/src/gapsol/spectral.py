"""The periodic Schrodinger operator -Laplacian + V on the torus: full and
partial eigendecomposition, Bloch band structure on the whole space, spectral
gap location around zero, and the positive/negative splitting with its
projections and split norms.

Gap edges are always taken from Bloch sampling of the whole-space operator,
never from the torus operator alone: the latter has discrete spectrum and can
spuriously "open" gaps between its eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import (
    GapContainsZero,
    GridMismatch,
    IncompleteDecomposition,
    InvalidGrid,
    NegativeSquare,
    NoSpectrumAbove,
    ZeroInSpectrum,
)
from .grid import (
    GridSpec,
    PeriodicCoefficient,
    PeriodicField,
    grad_sq_integral,
    integrate_values,
    laplacian_apply,
    laplacian_values,
)

#: potentials and other 1-periodic coefficients share one representation
PotentialSpec = PeriodicCoefficient

#: absolute tolerance for "an eigenvalue sits at zero"; below it the run
#: aborts rather than silently regularizing.
TAU_SPEC = 1e-8

#: largest degree-of-freedom count solved by a dense symmetric eigensolver;
#: above it a shift-invert Lanczos iteration retains only the bottom pairs.
DENSE_CUTOFF = 5000


# -- operator application ------------------------------------------------------

def apply_operator(V: PotentialSpec, u: PeriodicField) -> PeriodicField:
    """Return (-Laplacian + V) u with V sampled on u's grid."""
    if V.dim != u.grid.dim:
        raise GridMismatch(f"potential is {V.dim}D, field is {u.grid.dim}D")
    vals = laplacian_values(u.grid, u.values) + V.sample(u.grid) * u.values
    return PeriodicField(u.grid, vals)


def apply_operator_values(grid: GridSpec, v_values: np.ndarray,
                          u_values: np.ndarray) -> np.ndarray:
    return laplacian_values(grid, u_values) + v_values * u_values


def quadratic_form(grid: GridSpec, v_values: np.ndarray, u: PeriodicField,
                   w: PeriodicField | None = None) -> float:
    """int(grad u . grad w + V u w); w defaults to u."""
    if w is None:
        return grad_sq_integral(u) + integrate_values(grid, v_values * u.values ** 2)
    lw = laplacian_values(grid, w.values) + v_values * w.values
    return integrate_values(grid, u.values * lw)


# -- eigendecomposition of the torus operator ----------------------------------

@dataclass
class SpectralDecomposition:
    """Sorted eigenpairs of the torus operator with the zero splitting.

    eigenvectors columns are orthonormal for the L2 inner product
    ``h^N * sum(u*v)``; split_index counts the (fully retained) negative
    eigenvalues.
    """

    grid: GridSpec
    eigenvalues: np.ndarray          # (m,), ascending
    eigenvectors: np.ndarray         # (num_nodes, m)
    split_index: int
    complete: bool
    potential_values: np.ndarray = field(repr=False)

    @property
    def n_retained(self) -> int:
        return self.eigenvalues.size

    def coefficients(self, u_values: np.ndarray) -> np.ndarray:
        """L2 coefficients of u on the retained eigenvectors."""
        return (self.eigenvectors.T @ u_values.reshape(-1)) * self.grid.node_weight

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        return (self.eigenvectors @ coeffs).reshape(self.grid.shape)

    def eigenfield(self, i: int) -> PeriodicField:
        return PeriodicField(self.grid, self.eigenvectors[:, i].reshape(self.grid.shape))

    def negative_coefficients(self, u_values: np.ndarray) -> np.ndarray:
        d = self.split_index
        if d == 0:
            return np.zeros(0)
        return (self.eigenvectors[:, :d].T @ u_values.reshape(-1)) * self.grid.node_weight


def _dense_laplacian_1d(grid: GridSpec) -> np.ndarray:
    m = grid.points_per_axis
    w = 2.0 * np.pi * np.fft.fftfreq(m, d=grid.h)
    col = np.fft.ifft(w ** 2).real
    idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
    return col[idx]


def _dense_operator(V: PotentialSpec, grid: GridSpec) -> np.ndarray:
    t1 = _dense_laplacian_1d(grid)
    if grid.dim == 1:
        lap = t1
    else:
        eye = np.eye(grid.points_per_axis)
        lap = np.kron(t1, eye) + np.kron(eye, t1)
    a = lap + np.diag(V.sample(grid).reshape(-1))
    return 0.5 * (a + a.T)


def _fiber_modes(n: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def _fiber_matrix(vhat: np.ndarray, theta, n: int, dim: int) -> np.ndarray:
    """Dense Hermitian Bloch fiber -(grad + i*theta)^2 + V in the Fourier
    basis of the unit cell, truncated at the grid's Nyquist mode."""
    m = _fiber_modes(n)
    if dim == 1:
        kin = (2.0 * np.pi * m + float(theta)) ** 2
        diff = (m[:, None] - m[None, :]) % n
        h = np.diag(kin.astype(complex)) + vhat[diff]
    else:
        t0, t1 = float(theta[0]), float(theta[1])
        m0 = np.repeat(m, n)
        m1 = np.tile(m, n)
        kin = (2.0 * np.pi * m0 + t0) ** 2 + (2.0 * np.pi * m1 + t1) ** 2
        d0 = (m0[:, None] - m0[None, :]) % n
        d1 = (m1[:, None] - m1[None, :]) % n
        h = np.diag(kin.astype(complex)) + vhat[d0, d1]
    return 0.5 * (h + h.conj().T)


def fiber_eigenvalues(V: PotentialSpec, theta, n_modes: int,
                      n_bands: int | None = None) -> np.ndarray:
    vhat = V.fourier_coefficients(n_modes)
    vals = scipy.linalg.eigvalsh(_fiber_matrix(vhat, theta, n_modes, V.dim))
    return vals if n_bands is None else vals[:n_bands]


def count_negative_eigenvalues(V: PotentialSpec, grid: GridSpec) -> int:
    """Exact count of negative torus-operator eigenvalues via the fiber
    decomposition at quasimomenta 2*pi*l/k (the torus operator block
    diagonalizes over them)."""
    vhat = V.fourier_coefficients(grid.n)
    thetas = 2.0 * np.pi * np.arange(grid.k) / grid.k
    count = 0
    if grid.dim == 1:
        for t in thetas:
            vals = scipy.linalg.eigvalsh(_fiber_matrix(vhat, t, grid.n, 1))
            count += int(np.sum(vals < 0.0))
    else:
        for t0 in thetas:
            for t1 in thetas:
                vals = scipy.linalg.eigvalsh(_fiber_matrix(vhat, (t0, t1), grid.n, 2))
                count += int(np.sum(vals < 0.0))
    return count


def _validate_decomposition(dec: SpectralDecomposition, V: PotentialSpec,
                            tau: float) -> None:
    lam, E = dec.eigenvalues, dec.eigenvectors
    if np.any(np.abs(lam) < tau):
        bad = lam[np.abs(lam) < tau]
        raise ZeroInSpectrum(
            f"eigenvalue {bad[0]:.3e} lies within {tau:.0e} of zero: the "
            "spectral gap condition (assumption (vi)) fails at this "
            "discretization")
    w = dec.grid.node_weight
    gram = (E.T @ E) * w
    if np.max(np.abs(gram - np.eye(lam.size))) > 1e-10:
        raise IncompleteDecomposition("eigenvector Gram matrix deviates from identity")
    if dec.complete:
        a = _dense_operator(V, dec.grid)
        resid = a @ E - E * lam[None, :]
    else:
        v_vals = dec.potential_values
        cols = [apply_operator_values(dec.grid, v_vals,
                                      E[:, i].reshape(dec.grid.shape)).reshape(-1)
                - lam[i] * E[:, i] for i in range(lam.size)]
        resid = np.stack(cols, axis=1)
    norms = np.sqrt((resid ** 2).sum(axis=0) * w)
    bounds = 1e-9 * np.maximum(1.0, np.abs(lam))
    if np.any(norms > bounds):
        i = int(np.argmax(norms / bounds))
        raise IncompleteDecomposition(
            f"eigenpair {i} residual {norms[i]:.3e} exceeds {bounds[i]:.3e}")


def eigendecompose(V: PotentialSpec, grid: GridSpec, n_pairs="all", *,
                   dense_cutoff: int = DENSE_CUTOFF,
                   tau: float = TAU_SPEC) -> SpectralDecomposition:
    """Eigendecompose the torus operator.

    Dense symmetric solve up to ``dense_cutoff`` degrees of freedom; above
    that, shift-invert Lanczos retains all negative pairs plus a buffer of
    positive ones.  Raises ZeroInSpectrum when an eigenvalue sits within
    ``tau`` of zero.
    """
    if V.dim != grid.dim:
        raise GridMismatch(f"potential is {V.dim}D, grid is {grid.dim}D")
    dof = grid.num_nodes
    v_values = V.sample(grid)

    if dof <= dense_cutoff:
        a = _dense_operator(V, grid)
        lam, vecs = scipy.linalg.eigh(a)
        if isinstance(n_pairs, (int, np.integer)):
            lam, vecs = lam[:n_pairs], vecs[:, :n_pairs]
        E = vecs / np.sqrt(grid.node_weight)
        dec = SpectralDecomposition(grid, lam, E, int(np.sum(lam < 0.0)),
                                    lam.size == dof, v_values)
        n_neg = count_negative_eigenvalues(V, grid)
        if dec.split_index != n_neg:
            raise IncompleteDecomposition(
                f"retained {dec.split_index} negative pairs, operator has {n_neg}")
        _validate_decomposition(dec, V, tau)
        return dec

    n_neg = count_negative_eigenvalues(V, grid)
    if n_pairs == "all":
        m = n_neg + 25
    else:
        m = int(n_pairs)
        if m < n_neg + 10:
            raise IncompleteDecomposition(
                f"n_pairs={m} cannot hold {n_neg} negative pairs plus a 10-pair buffer")
    sup = V.sup_bound()
    sigma = -(sup + 1.0)

    shape = grid.shape

    def matvec(x):
        return apply_operator_values(grid, v_values, x.reshape(shape)).reshape(-1)

    a_op = spla.LinearOperator((dof, dof), matvec=matvec, dtype=float)

    # (A - sigma) is positive definite; precondition CG with the constant-
    # coefficient inverse, which is diagonal in Fourier space.
    from .grid import _irfft, _rfft, _sq_wavenumbers_rfft  # noqa: PLC0415

    w2 = _sq_wavenumbers_rfft(grid)
    pre_mult = 1.0 / (w2 + 1.0 + sup)

    def precond(x):
        return _irfft(pre_mult * _rfft(x.reshape(shape)), shape).reshape(-1)

    m_op = spla.LinearOperator((dof, dof), matvec=precond, dtype=float)

    def shifted(x):
        return matvec(x) - sigma * x

    shifted_op = spla.LinearOperator((dof, dof), matvec=shifted, dtype=float)

    def opinv(b):
        x, info = spla.cg(shifted_op, b, M=m_op, rtol=1e-13, atol=0.0, maxiter=1000)
        if info != 0:
            raise IncompleteDecomposition(f"inner CG solve failed (info={info})")
        return x

    opinv_op = spla.LinearOperator((dof, dof), matvec=opinv, dtype=float)
    lam, vecs = spla.eigsh(a_op, k=m, sigma=sigma, which="LM", OPinv=opinv_op)
    order = np.argsort(lam)
    lam, vecs = lam[order], vecs[:, order]
    E = vecs / np.sqrt(grid.node_weight)
    dec = SpectralDecomposition(grid, lam, E, int(np.sum(lam < 0.0)), False, v_values)
    if dec.split_index != n_neg:
        raise IncompleteDecomposition(
            f"iterative solve found {dec.split_index} negative pairs, expected {n_neg}")
    _validate_decomposition(dec, V, tau)
    return dec


# -- Bloch band structure ------------------------------------------------------

@dataclass
class BlochBands:
    """Sampled Bloch eigenvalues and refined per-band intervals.

    lambdas[i, j] is the j-th eigenvalue of the fiber at thetas[i]; the
    whole-space spectrum is the union of the band intervals.
    """

    dim: int
    n_modes: int
    thetas: np.ndarray              # (n_samples,) or (n_samples, 2)
    lambdas: np.ndarray             # (n_samples, n_bands)
    intervals: np.ndarray           # (n_bands, 2) refined [min, max]

    @property
    def n_bands(self) -> int:
        return self.lambdas.shape[1]

    def contains(self, value: float, tol: float = 0.0) -> bool:
        lo, hi = self.intervals[:, 0], self.intervals[:, 1]
        return bool(np.any((value >= lo - tol) & (value <= hi + tol)))


def _golden_extremum(f, a: float, b: float, iters: int = 40):
    """Golden-section minimum of f on [a, b]; returns (x, f(x))."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _refine_band_1d(band_fn, thetas, values, j, rounds):
    n = thetas.size
    step = 2.0 * np.pi / n
    out = []
    for sign in (1.0, -1.0):
        vv = sign * values[:, j]
        i = int(np.argmin(vv))
        x, fx = thetas[i], vv[i]
        width = step
        for _ in range(rounds):
            xr, fr = _golden_extremum(lambda t: sign * band_fn(t)[j],
                                      x - width, x + width, iters=24)
            if fr < fx:
                x, fx = xr, fr
            width /= 4.0
        out.append(sign * fx)       # undo the sign flip: this is the extremum
    return out[0], out[1]           # (refined min, refined max)


def _refine_band_2d(band_fn, thetas, values, j, rounds):
    n_axis = int(round(np.sqrt(thetas.shape[0])))
    step = 2.0 * np.pi / n_axis
    out = []
    for sign in (1.0, -1.0):
        vv = sign * values[:, j]
        i = int(np.argmin(vv))
        x = np.array(thetas[i], dtype=float)
        fx = vv[i]
        width = step
        for _ in range(rounds):
            for axis in (0, 1):
                def section(t, axis=axis):
                    p = x.copy()
                    p[axis] = t
                    return sign * band_fn(p)[j]

                xr, fr = _golden_extremum(section, x[axis] - width,
                                          x[axis] + width, iters=16)
                if fr < fx:
                    x[axis], fx = xr, fr
            width /= 4.0
        out.append(sign * fx)
    return out[0], out[1]


def bloch_bands(V: PotentialSpec, n_theta: int = 32, n_bands: int = 6, *,
                n_modes: int | None = None, refine_rounds: int = 3) -> BlochBands:
    """Sample the lowest ``n_bands`` Bloch eigenvalues on a uniform
    quasimomentum grid over [0, 2*pi)^N and refine each band's extrema by
    golden-section search."""
    if n_theta < 16:
        raise InvalidGrid(f"need n_theta >= 16 per axis, got {n_theta}")
    if n_bands < 4:
        raise InvalidGrid(f"need n_bands >= 4, got {n_bands}")
    if n_modes is None:
        if V.kind == "sampled":
            n_modes = V.samples.shape[0]
        else:
            max_mode = max((max(abs(c) for c in m) for _, m in V.terms), default=1)
            n_modes = max(16, 4 * max_mode, 2 * n_bands + 4)
    if V.dim == 2:
        n_modes = max(n_modes, int(np.ceil(np.sqrt(n_bands))) + 3)
    vhat = V.fourier_coefficients(n_modes)

    def band_fn(theta):
        return scipy.linalg.eigvalsh(
            _fiber_matrix(vhat, theta, n_modes, V.dim))[:n_bands]

    axis = 2.0 * np.pi * np.arange(n_theta) / n_theta
    if V.dim == 1:
        thetas = axis
        lambdas = np.stack([band_fn(t) for t in thetas])
    else:
        thetas = np.array([(t0, t1) for t0 in axis for t1 in axis])
        lambdas = np.stack([band_fn(t) for t in thetas])

    intervals = np.empty((n_bands, 2))
    refine = _refine_band_1d if V.dim == 1 else _refine_band_2d
    for j in range(n_bands):
        lo, hi = refine(band_fn, thetas, lambdas, j, refine_rounds)
        # refinement can only widen what sampling saw
        intervals[j] = (min(lo, lambdas[:, j].min()),
                        max(hi, lambdas[:, j].max()))
    return BlochBands(V.dim, n_modes, thetas, lambdas, intervals)


# -- spectral gap around zero ---------------------------------------------------

@dataclass(frozen=True)
class SpectralGap:
    """The maximal interval (-alpha_minus, alpha_plus) around zero free of
    spectrum; alpha_minus may be inf when no spectrum lies below zero."""

    alpha_minus: float
    alpha_plus: float

    def __post_init__(self):
        if not (self.alpha_plus > 0.0 and self.alpha_minus > 0.0):
            raise GapContainsZero(
                f"degenerate gap ({-self.alpha_minus:.3e}, {self.alpha_plus:.3e})")

    @property
    def alpha(self) -> float:
        return min(self.alpha_minus, self.alpha_plus)


def find_gap_at_zero(bands: BlochBands) -> SpectralGap:
    """Locate the spectral gap around zero from band intervals.

    Raises GapContainsZero when zero sits inside a band and NoSpectrumAbove
    when no computed band lies fully above zero (not enough bands).
    """
    lo, hi = bands.intervals[:, 0], bands.intervals[:, 1]
    inside = (lo <= 0.0) & (hi >= 0.0)
    if np.any(inside):
        j = int(np.nonzero(inside)[0][0])
        raise GapContainsZero(
            f"zero lies inside spectral band {j} [{lo[j]:.6g}, {hi[j]:.6g}]: "
            "no gap around zero (assumption (vi))")
    above = lo[lo > 0.0]
    if above.size == 0:
        raise NoSpectrumAbove(
            "no computed band lies above zero; increase n_bands")
    below = hi[hi < 0.0]
    alpha_minus = float(-below.max()) if below.size else np.inf
    return SpectralGap(alpha_minus=alpha_minus, alpha_plus=float(above.min()))


# -- splitting -----------------------------------------------------------------

def project_split(dec: SpectralDecomposition,
                  u: PeriodicField) -> tuple[PeriodicField, PeriodicField]:
    """Split u = u_plus + u_minus along the zero splitting; u_minus is the
    L2 projection onto the retained negative eigenvectors."""
    if u.grid != dec.grid:
        raise GridMismatch("field grid does not match decomposition grid")
    d = dec.split_index
    if d == 0:
        return u, PeriodicField(u.grid, np.zeros(u.grid.shape))
    c = dec.negative_coefficients(u.values)
    minus = (dec.eigenvectors[:, :d] @ c).reshape(u.grid.shape)
    return PeriodicField(u.grid, u.values - minus), PeriodicField(u.grid, minus)


def split_norm(dec: SpectralDecomposition, u: PeriodicField) -> tuple[float, float]:
    """Split norms (|P+ u|_k, |P- u|_k): the operator quadratic form on the
    positive part and minus the form on the negative part."""
    if u.grid != dec.grid:
        raise GridMismatch("field grid does not match decomposition grid")
    form_full = quadratic_form(dec.grid, dec.potential_values, u)
    c = dec.negative_coefficients(u.values)
    form_minus = float(np.sum(dec.eigenvalues[:dec.split_index] * c ** 2))
    sq_minus = -form_minus
    sq_plus = form_full - form_minus
    tol = -1e-9 * max(1.0, abs(form_full))
    if sq_plus < tol or sq_minus < tol:
        raise NegativeSquare(
            f"split norm squares ({sq_plus:.3e}, {sq_minus:.3e}) came out negative")
    return float(np.sqrt(max(sq_plus, 0.0))), float(np.sqrt(max(sq_minus, 0.0)))
