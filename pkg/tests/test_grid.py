import numpy as np
import pytest

from gapsol.errors import (
    FieldFormatError,
    GridMismatch,
    InvalidGrid,
    NonIntegerShift,
)
from gapsol.grid import (
    GridSpec,
    PeriodicCoefficient,
    PeriodicField,
    constant_field,
    dump_field,
    grad_sq_integral,
    h1_norm,
    integrate,
    laplacian_apply,
    load_field,
    make_grid,
    translate_field,
)

from oracles import adaptive_integral, fd_laplacian
from conftest import random_smooth_field


class TestMakeGrid:
    def test_basic_1d(self):
        g = make_grid(1, 1, 8)
        assert g.points_per_axis == 8
        assert g.h == pytest.approx(1 / 8)
        assert g.num_nodes == 8

    def test_basic_2d(self):
        g = make_grid(2, 2, 16)
        assert g.shape == (32, 32)
        assert g.num_nodes == 1024

    @pytest.mark.parametrize("dim,k,n", [
        (1, 0, 8),      # degenerate cell
        (3, 1, 8),      # unsupported dimension
        (1, 1, 7),      # odd resolution
        (1, 1, 2),      # too coarse
        (1, -2, 8),
    ])
    def test_invalid(self, dim, k, n):
        with pytest.raises(InvalidGrid):
            make_grid(dim, k, n)

    def test_centered_coords(self):
        g = make_grid(1, 4, 8)
        x = g.axis_coords()
        assert x[0] == pytest.approx(-2.0)
        assert x[g.points_per_axis // 2] == pytest.approx(0.0)


class TestField:
    def test_immutable(self):
        g = make_grid(1, 1, 8)
        u = constant_field(g, 1.0)
        with pytest.raises(ValueError):
            u.values[0] = 2.0

    def test_nonfinite_rejected(self):
        g = make_grid(1, 1, 8)
        vals = np.zeros(8)
        vals[3] = np.nan
        with pytest.raises(InvalidGrid):
            PeriodicField(g, vals)

    def test_shape_mismatch(self):
        g = make_grid(1, 1, 8)
        with pytest.raises(GridMismatch):
            PeriodicField(g, np.zeros(9))


class TestLaplacian:
    def test_constant_in_kernel(self):
        g = make_grid(1, 2, 8)
        out = laplacian_apply(constant_field(g, 3.7))
        assert np.max(np.abs(out.values)) < 1e-13

    def test_cosine_eigenfunction(self):
        g = make_grid(1, 1, 8)
        x = g.axis_coords()
        u = PeriodicField(g, np.cos(2 * np.pi * x))
        out = laplacian_apply(u)
        assert np.max(np.abs(out.values - 4 * np.pi ** 2 * u.values)) < 1e-12

    def test_2d_eigenfunction(self):
        g = make_grid(2, 1, 8)
        xx, yy = g.coords()
        u = PeriodicField(g, np.cos(2 * np.pi * xx) * np.sin(2 * np.pi * yy))
        out = laplacian_apply(u)
        assert np.max(np.abs(out.values - 8 * np.pi ** 2 * u.values)) < 1e-11

    def test_fd_oracle_spectral_convergence(self):
        # against a second-difference oracle the error is the oracle's own
        # O(h^2), so doubling n must cut the disagreement ~4x
        rng = np.random.default_rng(7)
        errs = []
        for n in (16, 32):
            g = make_grid(1, 2, n)
            u = random_smooth_field(g, np.random.default_rng(7))
            ours = laplacian_apply(u).values
            fd = fd_laplacian(u.values, g.h)
            errs.append(np.max(np.abs(ours - fd)))
        assert errs[1] < errs[0] / 3.0

    def test_self_adjoint(self):
        rng = np.random.default_rng(3)
        g = make_grid(1, 2, 16)
        u = random_smooth_field(g, rng)
        v = random_smooth_field(g, rng)
        lhs = integrate(u * laplacian_apply(v))
        rhs = integrate(v * laplacian_apply(u))
        assert abs(lhs - rhs) < 1e-12

    def test_divergence_form(self):
        g = make_grid(1, 2, 16)
        u = random_smooth_field(g, np.random.default_rng(11))
        assert abs(integrate(laplacian_apply(u))) < 1e-12


class TestIntegrate:
    def test_cell_measure(self):
        g = make_grid(1, 2, 8)
        assert integrate(constant_field(g, 1.0)) == pytest.approx(2.0, abs=1e-14)
        g2 = make_grid(2, 3, 4)
        assert integrate(constant_field(g2, 1.0)) == pytest.approx(9.0, abs=1e-12)

    def test_mean_zero_mode(self):
        g = make_grid(1, 1, 8)
        x = g.axis_coords()
        assert abs(integrate(PeriodicField(g, np.cos(2 * np.pi * x)))) < 1e-14

    def test_sech_sq_against_quadrature(self):
        g = make_grid(1, 16, 16)
        x = g.axis_coords()
        u = PeriodicField(g, 1.0 / np.cosh(x) ** 2)
        expected = adaptive_integral(lambda t: 1.0 / np.cosh(t) ** 2, -8.0, 8.0)
        assert integrate(u) == pytest.approx(expected, abs=1e-8)


class TestH1Norm:
    def test_constant(self):
        g = make_grid(1, 1, 8)
        assert h1_norm(constant_field(g, 1.0)) == pytest.approx(1.0, abs=1e-14)

    def test_cosine_parseval(self):
        g = make_grid(1, 1, 8)
        x = g.axis_coords()
        u = PeriodicField(g, np.cos(2 * np.pi * x))
        assert h1_norm(u) == pytest.approx(np.sqrt(0.5 + 2 * np.pi ** 2),
                                           abs=1e-12)

    def test_sech_closed_form(self):
        g = make_grid(1, 16, 32)
        x = g.axis_coords()
        u = PeriodicField(g, 1.0 / np.cosh(x))
        # int sech'^2 = 2/3, int sech^2 = 2 on the line
        assert h1_norm(u) == pytest.approx(np.sqrt(8.0 / 3.0), abs=1e-6)

    def test_grad_sq_matches_form(self):
        g = make_grid(1, 2, 16)
        u = random_smooth_field(g, np.random.default_rng(5))
        assert grad_sq_integral(u) == pytest.approx(
            integrate(u * laplacian_apply(u)), abs=1e-11)


class TestTranslate:
    def test_identity(self):
        g = make_grid(1, 4, 8)
        u = random_smooth_field(g, np.random.default_rng(1))
        v = translate_field(u, (0,))
        assert np.array_equal(u.values, v.values)

    def test_spike_permutation(self):
        g = make_grid(1, 8, 4)
        vals = np.zeros(g.shape)
        vals[3 * g.n] = 1.0          # spike at lattice site 3
        u = PeriodicField(g, vals)
        v = translate_field(u, (3,))
        assert v.values[0] == 1.0
        assert v.values.sum() == 1.0

    def test_cubic_integral_invariant(self):
        g = make_grid(1, 4, 8)
        u = random_smooth_field(g, np.random.default_rng(2))
        w = translate_field(u, (2,))
        assert integrate(u * u * u) == pytest.approx(
            integrate(w * w * w), abs=1e-14)

    def test_non_integer_shift(self):
        g = make_grid(1, 4, 8)
        u = constant_field(g, 1.0)
        with pytest.raises(NonIntegerShift):
            translate_field(u, (0.5,))

    def test_2d_norm_preserved(self):
        g = make_grid(2, 2, 8)
        u = random_smooth_field(g, np.random.default_rng(4))
        w = translate_field(u, (1, -1))
        assert h1_norm(u) == pytest.approx(h1_norm(w), abs=1e-12)


class TestFourierRoundTrip:
    def test_round_trip(self):
        g = make_grid(1, 2, 16)
        u = random_smooth_field(g, np.random.default_rng(9))
        back = np.fft.irfftn(np.fft.rfftn(u.values), s=g.shape, axes=(0,))
        assert np.max(np.abs(back - u.values)) < 1e-13


class TestDump:
    def test_bit_exact_round_trip(self, tmp_path):
        g = make_grid(2, 2, 8)
        u = random_smooth_field(g, np.random.default_rng(12))
        path = tmp_path / "field.f64"
        dump_field(u, path)
        v = load_field(path)
        assert v.grid == g
        assert np.array_equal(u.values, v.values)

    def test_truncated_dump(self, tmp_path):
        g = make_grid(1, 1, 8)
        u = constant_field(g, 1.0)
        path = tmp_path / "field.f64"
        dump_field(u, path)
        path.write_bytes(path.read_bytes()[:17])
        with pytest.raises(FieldFormatError):
            load_field(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "field.f64"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(FieldFormatError):
            load_field(path)


class TestPeriodicCoefficient:
    def test_constant_sample(self):
        c = PeriodicCoefficient.constant(2.5)
        g = make_grid(1, 3, 8)
        assert np.all(c.sample(g) == 2.5)

    def test_cosine_centered_sampling(self):
        c = PeriodicCoefficient.cosine([(1.0, (1,))])
        g = make_grid(1, 3, 8)       # odd k: centered origin mid-cell
        x = g.axis_coords()
        assert np.max(np.abs(c.sample(g) - np.cos(2 * np.pi * x))) < 1e-12

    def test_sampled_matches_cosine_on_odd_k(self):
        n0 = 32
        xs = np.arange(n0) / n0
        sampled = PeriodicCoefficient.from_samples(np.cos(2 * np.pi * xs))
        cosine = PeriodicCoefficient.cosine([(1.0, (1,))])
        g = make_grid(1, 3, n0)
        assert np.max(np.abs(sampled.sample(g) - cosine.sample(g))) < 1e-12

    def test_resample(self):
        n0 = 16
        xs = np.arange(n0) / n0
        c = PeriodicCoefficient.from_samples(np.cos(2 * np.pi * xs))
        fine = c.sample_unit(64)
        xf = np.arange(64) / 64
        assert np.max(np.abs(fine - np.cos(2 * np.pi * xf))) < 1e-12

    def test_affine(self):
        c = PeriodicCoefficient.cosine([(2.0, (1,))], offset=1.0)
        d = c.affine(scale=-3.0, offset=5.0)
        g = make_grid(1, 2, 16)
        assert np.max(np.abs(d.sample(g) - (5.0 - 3.0 * c.sample(g)))) < 1e-12
