"""Kerr photonic-crystal front end: reduce the E-mode ansatz to the
stationary NLS, map prohibited-frequency windows, compute gap solitons, and
trace their bifurcation toward the gap edges.

For a nonmagnetic medium with dielectric profile eps(x) >= eps0 > 0 and Kerr
coefficient chi(x) of one strict sign, an E-mode wave of frequency omega and
propagation constant beta with amplitude u satisfies

    -Lap u + (beta^2 - omega^2 eps(x)) u = omega^2 chi(x) u^3,

self-focusing (chi > 0) mapping to the '+' sign and defocusing (chi < 0) to
the '-' sign, which additionally demands a finite gap (spectrum below the
shift).  The frequency is a parameter, not an eigenvalue: legality is a gap
membership test at fixed (omega, beta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action import ActionContext, build_context
from .continuation import EdgeSample, ScalingProbe, edge_scaling_probe, \
    fit_decay_rate, recenter
from .errors import (
    DomainRefusal,
    EdgeTooClose,
    GapContainsZero,
    GapsolError,
    InsufficientSpan,
    InvalidGrid,
    MixedSignChi,
    NoSpectrumAbove,
    OnlyTrivialSolution,
    WindowTooSmall,
)
from .grid import GridSpec, PeriodicCoefficient
from .nonlinear import NonlinearitySpec
from .solver import SolveConfig, SolveResult, minimize_ground_state
from .spectral import TAU_SPEC, bloch_bands, find_gap_at_zero

PotentialSpec = PeriodicCoefficient


@dataclass(frozen=True)
class PhotonicMedium:
    """Dielectric profile, Kerr coefficient, frequency, and propagation
    constant of an E-mode problem in 1 or 2 transverse dimensions."""

    epsilon: PeriodicCoefficient
    chi: PeriodicCoefficient
    omega: float
    beta: float = 0.0

    def __post_init__(self):
        if self.epsilon.dim != self.chi.dim:
            raise InvalidGrid("epsilon and chi must share a dimension")
        if self.epsilon.min_value() <= 0.0:
            raise InvalidGrid(
                f"dielectric profile must be bounded below by a positive "
                f"constant, min sampled value {self.epsilon.min_value():.3g}")
        if not self.omega > 0.0:
            raise InvalidGrid(f"frequency must be positive, got {self.omega}")
        if self.beta < 0.0:
            raise InvalidGrid(f"propagation constant must be >= 0, got {self.beta}")

    @property
    def dim(self) -> int:
        return self.epsilon.dim


def reduce_to_nls(m: PhotonicMedium) -> tuple[PotentialSpec, NonlinearitySpec, str]:
    """E-mode reduction: potential beta^2 - omega^2 eps(x), cubic coupling
    omega^2 |chi(x)|, and the equation sign from the sign of chi."""
    w2 = m.omega ** 2
    potential = m.epsilon.affine(scale=-w2, offset=m.beta ** 2)
    chi_min, chi_max = m.chi.min_value(), m.chi.max_value()
    if chi_min > 0.0:
        sign = "plus"
        coupling = m.chi.affine(scale=w2)
    elif chi_max < 0.0:
        sign = "minus"
        coupling = m.chi.affine(scale=-w2)
    else:
        raise MixedSignChi(
            "the Kerr coefficient changes sign: mixed self-focusing/"
            "defocusing media are an open problem and out of scope")
    return potential, NonlinearitySpec.kerr(coupling, dim=m.dim), sign


# -- frequency gap maps ------------------------------------------------------------

@dataclass
class GapMapRow:
    omega: float
    status: str                      # "gap" | "in_band" | "no_bracket"
    alpha_minus: float
    alpha_plus: float


@dataclass
class GapMap:
    beta: float
    rows: list[GapMapRow]
    windows: list[tuple]             # (omega_lo, omega_hi), edges bisected


def _gap_status(epsilon, beta, omega, n_theta, n_bands, n_modes):
    potential = epsilon.affine(scale=-omega ** 2, offset=beta ** 2)
    bands_count = n_bands
    while True:
        bands = bloch_bands(potential, n_theta=n_theta, n_bands=bands_count,
                            n_modes=n_modes)
        try:
            gap = find_gap_at_zero(bands)
            return "gap", gap.alpha_minus, gap.alpha_plus
        except GapContainsZero:
            return "in_band", np.nan, np.nan
        except NoSpectrumAbove:
            bands_count *= 2
            if bands_count > 64:
                return "no_bracket", np.nan, np.nan


def frequency_gap_map(epsilon: PeriodicCoefficient, beta: float,
                      omega_range: tuple, n_samples: int, *,
                      n_theta: int = 32, n_bands: int = 8,
                      n_modes: int | None = None) -> GapMap:
    """Classify the gap at zero across a frequency range and bracket the
    prohibited-frequency windows by bisection to 1e-4 relative."""
    lo, hi = float(omega_range[0]), float(omega_range[1])
    if n_samples < 16:
        raise InvalidGrid(f"need n_samples >= 16, got {n_samples}")
    if not (0.0 < lo < hi):
        raise InvalidGrid(f"frequency range must satisfy 0 < lo < hi, got {omega_range}")
    omegas = np.linspace(lo, hi, n_samples)
    rows = []
    for w in omegas:
        status, am, ap = _gap_status(epsilon, beta, w, n_theta, n_bands, n_modes)
        rows.append(GapMapRow(float(w), status, am, ap))

    def in_gap(w):
        return _gap_status(epsilon, beta, w, n_theta, n_bands, n_modes)[0] == "gap"

    def bisect_edge(w_gap, w_out):
        while abs(w_gap - w_out) > 1e-4 * max(abs(w_gap), abs(w_out)):
            mid = 0.5 * (w_gap + w_out)
            if in_gap(mid):
                w_gap = mid
            else:
                w_out = mid
        return 0.5 * (w_gap + w_out)

    windows = []
    i = 0
    while i < len(rows):
        if rows[i].status == "gap":
            j = i
            while j + 1 < len(rows) and rows[j + 1].status == "gap":
                j += 1
            w_lo = rows[i].omega if i == 0 else \
                bisect_edge(rows[i].omega, rows[i - 1].omega)
            w_hi = rows[j].omega if j == len(rows) - 1 else \
                bisect_edge(rows[j].omega, rows[j + 1].omega)
            windows.append((float(w_lo), float(w_hi)))
            i = j + 1
        else:
            i += 1
    return GapMap(beta=float(beta), rows=rows, windows=windows)


# -- the full soliton pipeline --------------------------------------------------------

def _staged(stage: str, exc: GapsolError) -> GapsolError:
    exc.stage = stage
    return exc


def _solve_pipeline(m: PhotonicMedium, grid: GridSpec, cfg: SolveConfig | None,
                    seed: int, n_theta: int, n_bands: int,
                    strict_decay: bool) -> SolveResult:
    try:
        potential, nonlin, sign = reduce_to_nls(m)
    except GapsolError as exc:
        raise _staged("reduce", exc)

    try:
        bands = bloch_bands(potential, n_theta=n_theta, n_bands=n_bands,
                            n_modes=grid.n)
        gap = find_gap_at_zero(bands)
        if sign == "minus" and not np.isfinite(gap.alpha_minus):
            raise OnlyTrivialSolution(
                "defocusing medium with no spectrum below the shift: only "
                "the trivial solution exists (a finite gap is required)")
    except GapsolError as exc:
        raise _staged("gap", exc)

    try:
        ctx = build_context(potential, nonlin, sign, grid,
                            n_theta=n_theta, n_bands=n_bands)
    except GapsolError as exc:
        raise _staged("decompose", exc)

    try:
        result = minimize_ground_state(ctx, cfg, seed=seed)
    except GapsolError as exc:
        raise _staged("minimize", exc)

    u_c, b = recenter(result.u)
    result.u = u_c
    result.recenter_b = b

    try:
        decay = fit_decay_rate(u_c, ctx.gap)
        result.metadata["decay"] = {
            "lambda": decay.lam,
            "prefactor": decay.prefactor,
            "window": list(decay.window),
            "r_squared": decay.r_squared,
            "lambda_vs_sqrt_alpha": decay.lambda_vs_sqrt_alpha,
        }
    except WindowTooSmall as exc:
        if strict_decay:
            raise _staged("decay", exc)
        result.metadata["decay"] = None
    result.metadata["omega"] = m.omega
    result.metadata["beta"] = m.beta
    return result


def solve_gap_soliton(m: PhotonicMedium, grid: GridSpec,
                      cfg: SolveConfig | None = None, *, seed: int = 0,
                      n_theta: int = 32, n_bands: int = 8) -> SolveResult:
    """Full pipeline: reduce, gap legality, decompose, minimize, recenter,
    decay fit.  Errors carry the stage that raised them."""
    return _solve_pipeline(m, grid, cfg, seed, n_theta, n_bands,
                           strict_decay=True)


# -- bifurcation sweeps ----------------------------------------------------------------

@dataclass
class BifurcationRecord:
    omega: float
    alpha: float
    alpha_minus: float
    alpha_plus: float
    h1_norm: float
    sup_norm: float
    value: float
    lambda_fit: float
    converged: bool
    status: str
    result: SolveResult | None = field(repr=False, default=None)


@dataclass
class BifurcationResult:
    records: list[BifurcationRecord]
    probe: ScalingProbe | None
    probe_note: str | None


def bifurcation_sweep(epsilon: PeriodicCoefficient, chi: PeriodicCoefficient,
                      beta: float, omega_list, grid, cfg: SolveConfig | None = None,
                      *, seed: int = 0, n_theta: int = 32,
                      n_bands: int = 8) -> BifurcationResult:
    """Solve at each frequency (ordered toward the relevant edge), emit the
    gap-width/norm table, and fit the near-edge scaling exponent.  Domain
    refusals at individual frequencies annotate their record and the sweep
    continues; gaps narrower than 10x the zero tolerance are refused as
    unresolvable."""
    records: list[BifurcationRecord] = []
    for i, omega in enumerate(omega_list):
        g = grid(omega) if callable(grid) else grid
        nan = np.nan
        try:
            medium = PhotonicMedium(epsilon=epsilon, chi=chi,
                                    omega=float(omega), beta=float(beta))
            res = _solve_pipeline(medium, g, cfg, seed + i, n_theta, n_bands,
                                  strict_decay=False)
        except DomainRefusal as exc:
            records.append(BifurcationRecord(
                omega=float(omega), alpha=nan, alpha_minus=nan, alpha_plus=nan,
                h1_norm=nan, sup_norm=nan, value=nan, lambda_fit=nan,
                converged=False, status=type(exc).__name__))
            continue
        alpha = res.metadata["alpha"]
        if alpha < 10.0 * TAU_SPEC:
            records.append(BifurcationRecord(
                omega=float(omega), alpha=alpha,
                alpha_minus=res.metadata["alpha_minus"],
                alpha_plus=res.metadata["alpha_plus"],
                h1_norm=nan, sup_norm=nan, value=nan, lambda_fit=nan,
                converged=False, status=EdgeTooClose.__name__))
            continue
        decay = res.metadata.get("decay")
        records.append(BifurcationRecord(
            omega=float(omega), alpha=alpha,
            alpha_minus=res.metadata["alpha_minus"],
            alpha_plus=res.metadata["alpha_plus"],
            h1_norm=res.h1_norm, sup_norm=res.sup_norm, value=res.value,
            lambda_fit=decay["lambda"] if decay else np.nan,
            converged=res.converged, status="ok", result=res))

    good = [r for r in records if r.status == "ok" and r.converged]
    probe, note = None, None
    if len(good) >= 4:
        samples = [EdgeSample(alpha=r.alpha, alpha_minus=r.alpha_minus,
                              alpha_plus=r.alpha_plus, h1_norm=r.h1_norm,
                              sup_norm=r.sup_norm) for r in good]
        try:
            probe = edge_scaling_probe(samples)
        except InsufficientSpan as exc:
            note = str(exc)
    else:
        note = f"only {len(good)} converged records, need 4 for the probe"
    return BifurcationResult(records=records, probe=probe, probe_note=note)
