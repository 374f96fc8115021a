import numpy as np
import pytest

from gapsol.action import (
    build_context,
    energy,
    energy_via_split,
    gradient,
    hessian_apply,
    nehari_residual,
    nehari_value_identity,
)
from gapsol.errors import OffManifold, OnlyTrivialSolution
from gapsol.grid import PeriodicField, constant_field, integrate, make_grid, \
    translate_field
from gapsol.nonlinear import NonlinearitySpec
from gapsol.spectral import PotentialSpec, apply_operator

from conftest import random_smooth_field
from oracles import soliton_profile, soliton_value


class TestEnergy:
    def test_zero_field(self, ctx_constant_small):
        g = ctx_constant_small.grid
        assert energy(ctx_constant_small, constant_field(g, 0.0)) == 0.0

    def test_constant_closed_form(self, ctx_constant_small):
        # J(1) = 1/2 * int V - 1/4 * int 1 = 1/2 - 1/4 on the unit cell
        g = ctx_constant_small.grid
        assert energy(ctx_constant_small, constant_field(g, 1.0)) == \
            pytest.approx(0.25, abs=1e-12)

    def test_sech_soliton_value(self, ctx_soliton):
        g = ctx_soliton.grid
        x = g.axis_coords()
        u = PeriodicField(g, soliton_profile(x, 1.0))
        assert energy(ctx_soliton, u) == pytest.approx(soliton_value(1.0),
                                                       abs=2e-3)

    def test_two_route_agreement(self, ctx_gap):
        u = random_smooth_field(ctx_gap.grid, np.random.default_rng(0))
        a = energy(ctx_gap, u)
        b = energy_via_split(ctx_gap, u)
        assert a == pytest.approx(b, abs=1e-9)

    def test_lattice_equivariance(self, ctx_gap):
        u = random_smooth_field(ctx_gap.grid, np.random.default_rng(1))
        for b in [(1,), (3,), (-2,)]:
            assert energy(ctx_gap, translate_field(u, b)) == \
                pytest.approx(energy(ctx_gap, u), abs=1e-12)


class TestGradient:
    def test_zero(self, ctx_constant_small):
        g = ctx_constant_small.grid
        out = gradient(ctx_constant_small, constant_field(g, 0.0))
        assert np.all(out.values == 0.0)

    def test_constant_solution(self, ctx_constant_small):
        g = ctx_constant_small.grid
        out = gradient(ctx_constant_small, constant_field(g, 1.0))
        assert np.max(np.abs(out.values)) < 1e-12

    def test_central_difference(self, ctx_gap):
        rng = np.random.default_rng(2)
        u = random_smooth_field(ctx_gap.grid, rng)
        v = random_smooth_field(ctx_gap.grid, rng)
        eps = 1e-5
        num = (energy(ctx_gap, u + eps * v) - energy(ctx_gap, u - eps * v)) \
            / (2 * eps)
        ana = integrate(gradient(ctx_gap, u) * v)
        assert abs(num - ana) < 1e-6 * max(1.0, abs(ana))


class TestHessian:
    def test_zero_point_reduces_to_operator(self, ctx_gap):
        g = ctx_gap.grid
        w = random_smooth_field(g, np.random.default_rng(3))
        hw = hessian_apply(ctx_gap, constant_field(g, 0.0), w)
        lw = apply_operator(ctx_gap.potential, w)
        assert np.max(np.abs(hw.values - lw.values)) < 1e-11

    def test_symmetry(self, ctx_gap):
        rng = np.random.default_rng(4)
        u = random_smooth_field(ctx_gap.grid, rng)
        v = random_smooth_field(ctx_gap.grid, rng)
        w = random_smooth_field(ctx_gap.grid, rng)
        lhs = integrate(hessian_apply(ctx_gap, u, w) * v)
        rhs = integrate(hessian_apply(ctx_gap, u, v) * w)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_gradient_derivative(self, ctx_gap):
        rng = np.random.default_rng(5)
        u = random_smooth_field(ctx_gap.grid, rng) + 1.5
        w = random_smooth_field(ctx_gap.grid, rng)
        eps = 1e-6
        num = (gradient(ctx_gap, u + eps * w).values
               - gradient(ctx_gap, u - eps * w).values) / (2 * eps)
        ana = hessian_apply(ctx_gap, u, w).values
        scale = max(1.0, np.max(np.abs(ana)))
        assert np.max(np.abs(num - ana)) / scale < 1e-5


class TestNehariResidual:
    def test_constant_solution_on_set(self, ctx_constant_small):
        g = ctx_constant_small.grid
        res = nehari_residual(ctx_constant_small, constant_field(g, 1.0))
        assert abs(res.I) < 1e-12
        assert res.norm < 1e-12

    def test_constant_two_off_set(self, ctx_constant_small):
        g = ctx_constant_small.grid
        res = nehari_residual(ctx_constant_small, constant_field(g, 2.0))
        # I = int(4 - 16) = -12 per unit cell volume
        assert res.I == pytest.approx(-12.0 * g.cell_measure, abs=1e-10)

    def test_components_match_direct_assembly(self, ctx_gap):
        u = random_smooth_field(ctx_gap.grid, np.random.default_rng(6))
        res = nehari_residual(ctx_gap, u)
        r = gradient(ctx_gap, u)
        assert res.I == pytest.approx(integrate(r * u), abs=1e-9)
        dec = ctx_gap.decomposition
        d = dec.split_index
        acc = np.zeros(ctx_gap.grid.shape)
        g_norm_sq = 0.0
        for i in range(d):
            e = dec.eigenfield(i)
            c = integrate(r * e)
            acc = acc + (c / abs(dec.eigenvalues[i])) * e.values
            g_norm_sq += c * c / abs(dec.eigenvalues[i])
        assert np.max(np.abs(res.g_minus.values - acc)) < 1e-9
        assert res.norm == pytest.approx(np.sqrt(res.I ** 2 + g_norm_sq),
                                         abs=1e-9)


class TestValueIdentity:
    def test_constant(self, ctx_constant_small):
        g = ctx_constant_small.grid
        val = nehari_value_identity(ctx_constant_small, constant_field(g, 1.0))
        assert val == pytest.approx(0.25, abs=1e-12)

    def test_zero_field_convention(self, ctx_constant_small):
        g = ctx_constant_small.grid
        assert nehari_value_identity(ctx_constant_small,
                                     constant_field(g, 0.0)) == 0.0

    def test_off_manifold_raises(self, ctx_constant_small):
        g = ctx_constant_small.grid
        with pytest.raises(OffManifold):
            nehari_value_identity(ctx_constant_small, constant_field(g, 2.0))


class TestSignLegality:
    def test_minus_requires_spectrum_below(self):
        with pytest.raises(OnlyTrivialSolution) as err:
            build_context(PotentialSpec.constant(1.0),
                          NonlinearitySpec.power(1.0, 4.0),
                          "minus", make_grid(1, 2, 8), n_theta=16, n_bands=4)
        assert "no nontrivial solution" in str(err.value)

    def test_minus_legal_mid_gap(self, mathieu_shifted):
        ctx = build_context(mathieu_shifted, NonlinearitySpec.power(1.0, 4.0),
                            "minus", make_grid(1, 4, 16), n_theta=16, n_bands=4)
        assert ctx.s == -1.0
        u = random_smooth_field(ctx.grid, np.random.default_rng(7))
        # two-route agreement holds with the flipped sign as well
        assert energy(ctx, u) == pytest.approx(energy_via_split(ctx, u),
                                               abs=1e-9)
