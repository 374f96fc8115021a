"""Superlinear nonlinearities f(x, u), their primitives and u-derivatives,
and numerical checkers for the structural assumptions the solver relies on.

Built-in kinds are sign-definite power laws f = h(x) |u|^(p-2) u with a
strictly positive 1-periodic weight; the Kerr cubic is the p = 4 case.  The
spec object carries the superlinearity exponent q, the ratio constant theta,
and the Holder exponent gamma explicitly rather than deriving them, so that
declared values can be validated by ``check_assumptions`` before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AssumptionViolated, InvalidGrid
from .grid import GridSpec, PeriodicCoefficient, PeriodicField


@dataclass(frozen=True)
class NonlinearitySpec:
    """Power-type nonlinearity f = h(x)|u|^(p-2) u.

    p     : growth exponent, 2 < p (< 2* = inf for dimensions 1 and 2)
    q     : superlinearity exponent in 0 < q F <= u f, 2 < q <= p
    theta : ratio constant in 0 < f/u <= theta f'_u, in (0, 1)
    gamma : Holder exponent of f'_u, in (0, 1]
    weight: 1-periodic weight h (must be strictly positive for a valid run;
            positivity is enforced by check_assumptions, not construction)
    """

    kind: str
    p: float
    q: float
    theta: float
    gamma: float
    weight: PeriodicCoefficient

    def __post_init__(self):
        if self.kind not in ("power", "kerr"):
            raise InvalidGrid(f"unknown nonlinearity kind {self.kind!r}")
        if not self.p > 2.0:
            raise InvalidGrid(f"growth exponent p must exceed 2, got {self.p}")
        if not self.q > 2.0:
            raise InvalidGrid(f"superlinearity exponent q must exceed 2, got {self.q}")
        if not 0.0 < self.theta < 1.0:
            raise InvalidGrid(f"theta must lie in (0,1), got {self.theta}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidGrid(f"gamma must lie in (0,1], got {self.gamma}")

    @staticmethod
    def power(weight, p: float, q: float | None = None,
              theta: float | None = None, gamma: float | None = None,
              dim: int = 1) -> "NonlinearitySpec":
        if not isinstance(weight, PeriodicCoefficient):
            weight = PeriodicCoefficient.constant(float(weight), dim=dim)
        p = float(p)
        return NonlinearitySpec(
            kind="power",
            p=p,
            q=float(q) if q is not None else p,
            theta=float(theta) if theta is not None else 1.0 / (p - 1.0),
            gamma=float(gamma) if gamma is not None else min(1.0, p - 2.0),
            weight=weight,
        )

    @staticmethod
    def kerr(coupling, dim: int = 1) -> "NonlinearitySpec":
        """Cubic f = c(x) u^3, i.e. the power kind with p = 4."""
        spec = NonlinearitySpec.power(coupling, 4.0, dim=dim)
        object.__setattr__(spec, "kind", "kerr")
        return spec

    def weight_values(self, grid: GridSpec) -> np.ndarray:
        return self.weight.sample(grid)


def eval_f(spec: NonlinearitySpec, u: PeriodicField) -> PeriodicField:
    """Pointwise f(x, u(x)); odd in u for the built-in kinds."""
    h = spec.weight_values(u.grid)
    return PeriodicField(u.grid, kernels.power_f(u.values, h, spec.p))


def eval_F(spec: NonlinearitySpec, u: PeriodicField) -> PeriodicField:
    """Pointwise primitive F(x, u(x)) = h |u|^p / p."""
    h = spec.weight_values(u.grid)
    return PeriodicField(u.grid, kernels.power_big_f(u.values, h, spec.p))


def eval_fprime(spec: NonlinearitySpec, u: PeriodicField) -> PeriodicField:
    """Pointwise f'_u(x, u(x)) = h (p-1) |u|^(p-2)."""
    h = spec.weight_values(u.grid)
    return PeriodicField(u.grid, kernels.power_fprime(u.values, h, spec.p))


# -- assumption checking --------------------------------------------------------

@dataclass
class AssumptionReport:
    """Outcome of the numerical assumption checks.

    checks maps a label to (ok, measured constant, witness or None).  The
    x sampling is finite, so measure-zero violations are undetectable.
    """

    checks: dict
    best_theta: float
    growth_constant: float
    holder_constant: float

    @property
    def passed(self) -> bool:
        return all(ok for ok, _, _ in self.checks.values())

    def failing(self) -> list[str]:
        return [k for k, (ok, _, _) in self.checks.items() if not ok]


def _scalar_f(spec, h, u):
    return h * np.abs(u) ** (spec.p - 2.0) * u


def _scalar_big_f(spec, h, u):
    return h * np.abs(u) ** spec.p / spec.p


def _scalar_fprime(spec, h, u):
    return h * (spec.p - 1.0) * np.abs(u) ** (spec.p - 2.0)


def check_assumptions(spec: NonlinearitySpec, u_range: float = 10.0,
                      samples: int = 64, *, raise_on_fail: bool = True,
                      rng_seed: int = 0) -> AssumptionReport:
    """Verify the structural assumptions on a finite sample of (x, u).

    Checks: weight positivity; growth |f| <= C(1+|u|^(p-1)); smallness
    f = o(|u|) near zero; superlinearity 0 < qF <= uf; the derivative ratio
    0 < f/u <= theta f'_u; and the Holder bound on f'_u.  Raises
    AssumptionViolated naming the failing check and a witness (x, u).
    """
    nx = samples
    h = spec.weight.sample_unit(nx) if spec.weight.dim == 1 else \
        spec.weight.sample_unit(int(np.sqrt(nx)) + 4).reshape(-1)
    xs = np.arange(h.size) / h.size
    checks: dict = {}

    h_min = float(h.min())
    pos_ok = h_min > 0.0
    pos_witness = None if pos_ok else (float(xs[int(np.argmin(h))]), 0.0)
    checks["positivity"] = (pos_ok, h_min, pos_witness)

    u_pos = np.geomspace(1e-8, u_range, samples)
    us = np.concatenate([-u_pos[::-1], u_pos])
    H, U = np.meshgrid(h, us, indexing="ij")
    FV = _scalar_f(spec, H, U)
    BFV = _scalar_big_f(spec, H, U)
    FPV = _scalar_fprime(spec, H, U)

    def witness(mask):
        i, j = np.unravel_index(int(np.argmax(mask)), mask.shape)
        return (float(xs[i % xs.size]), float(us[j]))

    # (iii) growth bound: report the best constant; finite by construction
    growth_c = float(np.max(np.abs(FV) / (1.0 + np.abs(U) ** (spec.p - 1.0))))
    checks["growth"] = (np.isfinite(growth_c), growth_c, None)

    # (iv) smallness at zero: sup_x |f|/|u| must decay toward u -> 0; compare
    # the smallest sampled decade against the largest small one
    small = np.geomspace(1e-8, 1e-2, 13)
    ratios = np.array([np.max(np.abs(_scalar_f(spec, h, u)) / u) for u in small])
    small_ok = bool(ratios[0] <= 1e-3 * ratios[-1] + 1e-300) if np.any(ratios > 0) \
        else True
    checks["smallness_at_zero"] = (small_ok, float(ratios[0]), None)

    # (v) superlinearity: 0 < q F <= u f away from u = 0
    uf = U * FV
    bad_v = (spec.q * BFV > uf * (1.0 + 1e-12) + 1e-300) | (BFV <= 0.0)
    v_ok = not bool(np.any(bad_v))
    margin = float(np.max(spec.q * BFV - uf))
    checks["superlinearity"] = (v_ok, margin, None if v_ok else witness(bad_v))

    # (v') derivative ratio: 0 < f/u <= theta f'_u; report the best theta
    fu = FV / U
    pos = FPV > 0.0
    best_theta = float(np.max(fu[pos] / FPV[pos])) if np.any(pos) else np.inf
    bad_vp = (fu <= 0.0) | (fu > spec.theta * FPV * (1.0 + 1e-12))
    vp_ok = not bool(np.any(bad_vp))
    checks["derivative_ratio"] = (vp_ok, best_theta, None if vp_ok else witness(bad_vp))

    # (vii) Holder bound on f'_u over sampled pairs: report the constant
    rng = np.random.default_rng(rng_seed)
    u1 = rng.uniform(-u_range, u_range, size=256)
    u2 = u1 + rng.uniform(-1.0, 1.0, size=256)
    hh = h[rng.integers(0, h.size, size=256)]
    num = np.abs(_scalar_fprime(spec, hh, u1) - _scalar_fprime(spec, hh, u2))
    den = (1.0 + np.abs(u1) + np.abs(u2)) ** (spec.p - 2.0 - spec.gamma) \
        * np.abs(u1 - u2) ** spec.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        holder_c = float(np.nanmax(np.where(den > 0, num / den, 0.0)))
    checks["holder"] = (np.isfinite(holder_c), holder_c, None)

    report = AssumptionReport(checks=checks, best_theta=best_theta,
                              growth_constant=growth_c, holder_constant=holder_c)
    if raise_on_fail and not report.passed:
        label = report.failing()[0]
        ok, measured, wit = report.checks[label]
        raise AssumptionViolated(
            f"nonlinearity assumption {label!r} fails"
            + (f" at (x, u) = {wit}" if wit else "")
            + f" (measured {measured:.6g})",
            label=label, witness=wit, report=report)
    return report
