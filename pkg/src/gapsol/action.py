"""The action functional on the torus, its gradient and Hessian action, and
the constraint residual of the Nehari-Pankov set.

Conventions.  The equation is -Lap u + V u = s * f(x, u) with s = +1
("plus") or s = -1 ("minus").  The action is

    J(u) = 1/2 * int(|grad u|^2 + V u^2) - s * int F(x, u)

and the optimization target is always Jhat = s * J, whose constrained
minimum over the Nehari-Pankov set is the ground-state level.  The gradient
is exposed as the L2 representative (the PDE residual field)

    r = -Lap u + V u - s * f(x, u),

so verification by substitution stays independent of the eigendecomposition;
the inner-product-raised gradient used by the solver lives in solver.py.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OffManifold, OnlyTrivialSolution
from .grid import GridSpec, PeriodicField, integrate_values, laplacian_values
from .nonlinear import NonlinearitySpec
from .spectral import (
    PotentialSpec,
    SpectralDecomposition,
    SpectralGap,
    bloch_bands,
    eigendecompose,
    find_gap_at_zero,
    quadratic_form,
)

SIGNS = ("plus", "minus")


@dataclass(frozen=True)
class ActionContext:
    """Everything needed to evaluate the action: grid, operator data, gap,
    nonlinearity, and the equation sign.  Immutable and shareable."""

    grid: GridSpec
    potential: PotentialSpec
    decomposition: SpectralDecomposition
    gap: SpectralGap
    nonlinearity: NonlinearitySpec
    sign: str
    v_values: np.ndarray = field(init=False, repr=False)
    h_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}, got {self.sign!r}")
        if self.sign == "minus" and not np.isfinite(self.gap.alpha_minus):
            raise OnlyTrivialSolution(
                "the '-' sign equation with no spectrum below zero admits no "
                "nontrivial solution (assumption (vi) requires inf spectrum < 0 "
                "for this sign)")
        object.__setattr__(self, "v_values", self.decomposition.potential_values)
        object.__setattr__(self, "h_values",
                           self.nonlinearity.weight.sample(self.grid))

    @property
    def s(self) -> float:
        """Equation sign factor: +1 for 'plus', -1 for 'minus'."""
        return 1.0 if self.sign == "plus" else -1.0

    @property
    def p(self) -> float:
        return self.nonlinearity.p

    def constrained_indices(self) -> np.ndarray:
        """Retained eigenvector indices spanning the constrained subspace
        (negative modes for 'plus', positive modes for 'minus')."""
        d = self.decomposition.split_index
        if self.sign == "plus":
            return np.arange(d)
        if not self.decomposition.complete:
            from .errors import IncompleteDecomposition  # noqa: PLC0415

            raise IncompleteDecomposition(
                "the 'minus' sign needs the complete decomposition (the "
                "constrained subspace is the positive one)")
        return np.arange(d, self.decomposition.n_retained)


def build_context(potential: PotentialSpec, nonlinearity: NonlinearitySpec,
                  sign: str, grid: GridSpec, *, n_theta: int = 32,
                  n_bands: int = 6, n_pairs="all") -> ActionContext:
    """Assemble a context: Bloch gap check first (it is authoritative for
    assumption (vi)), then the torus eigendecomposition."""
    bands = bloch_bands(potential, n_theta=n_theta, n_bands=n_bands,
                        n_modes=grid.n)
    gap = find_gap_at_zero(bands)
    if sign == "minus" and not np.isfinite(gap.alpha_minus):
        raise OnlyTrivialSolution(
            "the '-' sign equation with no spectrum below zero admits no "
            "nontrivial solution (assumption (vi) requires inf spectrum < 0 "
            "for this sign)")
    dec = eigendecompose(potential, grid, n_pairs=n_pairs)
    return ActionContext(grid=grid, potential=potential, decomposition=dec,
                         gap=gap, nonlinearity=nonlinearity, sign=sign)


# -- functional evaluation -------------------------------------------------------

def _int_big_f(ctx: ActionContext, u_values: np.ndarray) -> float:
    big = kernels.power_big_f(u_values, ctx.h_values, ctx.p)
    return integrate_values(ctx.grid, big)


def energy(ctx: ActionContext, u: PeriodicField) -> float:
    """J(u) via the quadratic form plus quadrature of F."""
    form = quadratic_form(ctx.grid, ctx.v_values, u)
    return 0.5 * form - ctx.s * _int_big_f(ctx, u.values)


def energy_via_split(ctx: ActionContext, u: PeriodicField) -> float:
    """J(u) through the split norms; must agree with energy() to 1e-9."""
    from .spectral import split_norm  # noqa: PLC0415

    sp, sm = split_norm(ctx.decomposition, u)
    return 0.5 * (sp ** 2 - sm ** 2) - ctx.s * _int_big_f(ctx, u.values)


def opt_energy(ctx: ActionContext, u: PeriodicField) -> float:
    """Jhat(u) = s * J(u), the quantity minimized on the constraint set."""
    return ctx.s * energy(ctx, u)


def gradient_values(ctx: ActionContext, u_values: np.ndarray) -> np.ndarray:
    f = kernels.power_f(u_values, ctx.h_values, ctx.p)
    return laplacian_values(ctx.grid, u_values) + ctx.v_values * u_values - ctx.s * f


def gradient(ctx: ActionContext, u: PeriodicField) -> PeriodicField:
    """The L2-Riesz representative of J'(u): the PDE residual
    -Lap u + V u - s f(x, u).  <J'(u), v> = integrate(r * v) for all v."""
    return PeriodicField(ctx.grid, gradient_values(ctx, u.values))


def hessian_apply(ctx: ActionContext, u: PeriodicField,
                  w: PeriodicField) -> PeriodicField:
    """Second derivative action: -Lap w + V w - s f'_u(x, u) w."""
    fp = kernels.power_fprime(u.values, ctx.h_values, ctx.p)
    vals = laplacian_values(ctx.grid, w.values) + ctx.v_values * w.values \
        - ctx.s * fp * w.values
    return PeriodicField(ctx.grid, vals)


# -- Nehari-Pankov residual -------------------------------------------------------

@dataclass
class NehariResidual:
    """Residual of the constraint set: I = <J'(u), u> and the component of
    the raised gradient in the constrained subspace.  norm vanishes (to
    tolerance) exactly on the set (or at u = 0)."""

    I: float
    g_minus: PeriodicField
    norm: float


def nehari_residual(ctx: ActionContext, u: PeriodicField) -> NehariResidual:
    dec = ctx.decomposition
    r = gradient_values(ctx, u.values)
    I = integrate_values(ctx.grid, r * u.values)
    idx = ctx.constrained_indices()
    if idx.size == 0:
        g = PeriodicField(ctx.grid, np.zeros(ctx.grid.shape))
        return NehariResidual(I=I, g_minus=g, norm=abs(I))
    c = (dec.eigenvectors[:, idx].T @ r.reshape(-1)) * ctx.grid.node_weight
    lam = np.abs(dec.eigenvalues[idx])
    # raised (inner-product) gradient component in the constrained subspace
    d = c / lam
    g_vals = (dec.eigenvectors[:, idx] @ d).reshape(ctx.grid.shape)
    g_norm_sq = float(np.sum(c * c / lam))
    return NehariResidual(I=I, g_minus=PeriodicField(ctx.grid, g_vals),
                          norm=float(np.sqrt(I * I + g_norm_sq)))


def nehari_value_identity(ctx: ActionContext, u: PeriodicField,
                          tol: float = 1e-6) -> float:
    """int(1/2 f u - F), which equals s*J(u) on the constraint set and is
    strictly positive there for u != 0.  Raises OffManifold when the
    residual norm exceeds ``tol`` (scaled); returns 0 for the zero field."""
    if u.sup_norm() < 1e-14:
        return 0.0
    res = nehari_residual(ctx, u)
    from .grid import h1_norm  # noqa: PLC0415

    scale = max(1.0, h1_norm(u))
    if res.norm > tol * scale:
        raise OffManifold(
            f"constraint residual {res.norm:.3e} exceeds {tol:.1e} * {scale:.3g}")
    f, big = kernels.power_f_and_big_f(u.values, ctx.h_values, ctx.p)
    return integrate_values(ctx.grid, 0.5 * f * u.values - big)
