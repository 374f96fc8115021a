import numpy as np
import pytest

from gapsol.errors import (
    GapContainsZero,
    GridMismatch,
    IncompleteDecomposition,
    NoSpectrumAbove,
)
from gapsol.grid import PeriodicField, constant_field, integrate, make_grid
from gapsol.spectral import (
    PotentialSpec,
    apply_operator,
    bloch_bands,
    count_negative_eigenvalues,
    eigendecompose,
    fiber_eigenvalues,
    find_gap_at_zero,
    project_split,
    quadratic_form,
    split_norm,
)

from conftest import random_smooth_field
from oracles import dense_dft_operator, fiber_eigenvalues_cosine

MATHIEU = [(2.0, (1,))]
MATHIEU10 = [(10.0, (1,))]


class TestApplyOperator:
    def test_free_cosine(self):
        g = make_grid(1, 1, 8)
        x = g.axis_coords()
        u = PeriodicField(g, np.cos(2 * np.pi * x))
        out = apply_operator(PotentialSpec.constant(0.0), u)
        assert np.max(np.abs(out.values - 4 * np.pi ** 2 * u.values)) < 1e-12

    def test_constant_potential_on_constant(self):
        g = make_grid(1, 2, 8)
        out = apply_operator(PotentialSpec.constant(1.0), constant_field(g, 1.0))
        assert np.max(np.abs(out.values - 1.0)) < 1e-13

    def test_against_dense_dft_oracle(self):
        g = make_grid(1, 2, 16)
        V = PotentialSpec.cosine(MATHIEU)
        u = random_smooth_field(g, np.random.default_rng(0))
        ours = apply_operator(V, u).values
        A = dense_dft_operator(V.sample(g), g.points_per_axis, g.k)
        assert np.max(np.abs(ours - A @ u.values)) < 1e-10

    def test_dimension_mismatch(self):
        g = make_grid(2, 1, 8)
        with pytest.raises(GridMismatch):
            apply_operator(PotentialSpec.constant(1.0, dim=1),
                           constant_field(g, 1.0))


class TestEigendecompose:
    def test_constant_fourier_modes(self):
        g = make_grid(1, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(1.0), g)
        modes = np.fft.fftfreq(8) * 8
        expected = np.sort((2 * np.pi * modes) ** 2 + 1.0)
        assert np.max(np.abs(dec.eigenvalues - expected)) < 1e-10
        assert dec.split_index == 0

    def test_negative_constant(self):
        g = make_grid(1, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(-1.0), g)
        assert dec.eigenvalues[0] == pytest.approx(-1.0, abs=1e-12)
        assert dec.split_index == 1

    def test_against_dense_oracle_mathieu(self):
        g = make_grid(1, 2, 32)
        V = PotentialSpec.cosine(MATHIEU10)
        dec = eigendecompose(V, g)
        A = dense_dft_operator(V.sample(g), g.points_per_axis, g.k)
        expected = np.linalg.eigvalsh(0.5 * (A + A.T))
        assert np.max(np.abs(dec.eigenvalues - expected)) < 1e-9

    def test_orthonormal_l2(self):
        g = make_grid(1, 2, 16)
        dec = eigendecompose(PotentialSpec.cosine(MATHIEU), g)
        gram = dec.eigenvectors.T @ dec.eigenvectors * g.node_weight
        assert np.max(np.abs(gram - np.eye(g.num_nodes))) < 1e-10

    def test_2d_constant(self):
        g = make_grid(2, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(2.0, dim=2), g)
        assert dec.eigenvalues[0] == pytest.approx(2.0, abs=1e-11)
        assert dec.eigenvalues[1] == pytest.approx(2.0 + 4 * np.pi ** 2, abs=1e-9)

    def test_negative_count_matches_fibers(self):
        g = make_grid(1, 4, 16)
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        dec = eigendecompose(V, g)
        assert dec.split_index == count_negative_eigenvalues(V, g)
        assert dec.split_index > 0


class TestPartialEigendecompose:
    def test_matches_analytic_above_cutoff(self):
        # 6400 dof forces the shift-invert path; constant V is analytic
        g = make_grid(1, 400, 16)
        dec = eigendecompose(PotentialSpec.constant(1.0), g, n_pairs=12,
                             dense_cutoff=1000)
        modes = np.sort((2 * np.pi * (np.fft.fftfreq(6400) * 6400) / 400) ** 2)
        expected = modes[:12] + 1.0
        assert np.max(np.abs(dec.eigenvalues - expected)) < 1e-9
        assert not dec.complete

    def test_partial_with_negatives(self):
        g = make_grid(1, 12, 32)     # 384 dof, forced iterative
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        dense = eigendecompose(V, g)
        part = eigendecompose(V, g, n_pairs=dense.split_index + 12,
                              dense_cutoff=64)
        assert part.split_index == dense.split_index
        m = part.n_retained
        assert np.max(np.abs(part.eigenvalues - dense.eigenvalues[:m])) < 1e-8

    def test_insufficient_pairs_refused(self):
        g = make_grid(1, 12, 32)
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        n_neg = count_negative_eigenvalues(V, g)
        with pytest.raises(IncompleteDecomposition):
            eigendecompose(V, g, n_pairs=n_neg + 2, dense_cutoff=64)


class TestBlochBands:
    def test_free_bands(self):
        bands = bloch_bands(PotentialSpec.constant(0.0), n_theta=16, n_bands=4)
        i = np.argmin(np.abs(bands.thetas - np.pi))
        assert bands.lambdas[i, 0] == pytest.approx(np.pi ** 2, abs=1e-9)
        assert bands.intervals[0] == pytest.approx([0.0, np.pi ** 2], abs=1e-7)
        assert bands.intervals[1] == pytest.approx([np.pi ** 2, 4 * np.pi ** 2],
                                                   abs=1e-7)

    def test_constant_shift(self):
        free = bloch_bands(PotentialSpec.constant(0.0), 16, 4)
        shifted = bloch_bands(PotentialSpec.constant(2.5), 16, 4)
        assert np.max(np.abs(shifted.lambdas - free.lambdas - 2.5)) < 1e-10

    @pytest.mark.parametrize("terms", [MATHIEU, MATHIEU10])
    def test_against_independent_fiber_oracle(self, terms):
        V = PotentialSpec.cosine(terms)
        bands = bloch_bands(V, n_theta=16, n_bands=4, n_modes=32)
        for i, theta in enumerate(bands.thetas):
            expected = fiber_eigenvalues_cosine(terms, 0.0, theta, 32, 4)
            assert np.max(np.abs(bands.lambdas[i] - expected)) < 1e-8

    def test_gap_opens(self):
        bands = bloch_bands(PotentialSpec.cosine(MATHIEU), 16, 4)
        width = bands.intervals[1][0] - bands.intervals[0][1]
        assert width > 1.0           # the cosine coupling opens the edge gap

    def test_even_in_theta(self):
        bands = bloch_bands(PotentialSpec.cosine(MATHIEU), 16, 4)
        lam = bands.lambdas
        n = bands.thetas.size
        for i in range(1, n):
            assert np.max(np.abs(lam[i] - lam[n - i])) < 1e-9

    def test_comparison_monotonicity(self):
        v1 = bloch_bands(PotentialSpec.cosine(MATHIEU), 16, 4)
        v2 = bloch_bands(PotentialSpec.cosine(MATHIEU, offset=0.3), 16, 4)
        assert np.all(v1.lambdas <= v2.lambdas + 1e-9)

    def test_2d_free(self):
        bands = bloch_bands(PotentialSpec.constant(0.0, dim=2), n_theta=16,
                            n_bands=4, n_modes=8)
        assert bands.intervals[0][0] == pytest.approx(0.0, abs=1e-9)
        assert bands.intervals[0][1] == pytest.approx(2 * np.pi ** 2, abs=1e-6)

    def test_torus_spectrum_inside_bands(self):
        V = PotentialSpec.cosine(MATHIEU)
        g = make_grid(1, 4, 16)
        dec = eigendecompose(V, g)
        # n bands of an n-mode fiber cover the whole torus spectrum
        bands = bloch_bands(V, n_theta=16, n_bands=g.n, n_modes=g.n)
        for lam in dec.eigenvalues:
            assert bands.contains(lam, tol=1e-7), lam


class TestFindGap:
    def test_positive_definite(self):
        bands = bloch_bands(PotentialSpec.constant(1.0), 16, 4)
        gap = find_gap_at_zero(bands)
        assert gap.alpha_plus == pytest.approx(1.0, abs=1e-10)
        assert gap.alpha_minus == np.inf
        assert gap.alpha == pytest.approx(1.0, abs=1e-10)

    def test_zero_in_band(self):
        bands = bloch_bands(PotentialSpec.constant(-1.0), 16, 4)
        with pytest.raises(GapContainsZero):
            find_gap_at_zero(bands)

    def test_no_bracket(self):
        # every computed band below zero: nothing brackets from above.
        # a large negative shift pushes the four lowest free bands deep down
        bands = bloch_bands(PotentialSpec.constant(-1000.0), 16, 4)
        with pytest.raises((NoSpectrumAbove, GapContainsZero)):
            find_gap_at_zero(bands)

    def test_midgap_shift_two_sided(self):
        base = PotentialSpec.cosine(MATHIEU)
        bands0 = bloch_bands(base, 16, 4)
        mid = 0.5 * (bands0.intervals[0][1] + bands0.intervals[1][0])
        bands = bloch_bands(base.affine(1.0, -mid), 32, 4)
        gap = find_gap_at_zero(bands)
        expected_half = 0.5 * (bands0.intervals[1][0] - bands0.intervals[0][1])
        assert gap.alpha_minus == pytest.approx(expected_half, abs=1e-6)
        assert gap.alpha_plus == pytest.approx(expected_half, abs=1e-6)


class TestSplit:
    def test_positive_definite_trivial_split(self):
        g = make_grid(1, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(1.0), g)
        u = random_smooth_field(g, np.random.default_rng(1))
        plus, minus = project_split(dec, u)
        assert np.max(np.abs(minus.values)) == 0.0
        assert np.array_equal(plus.values, u.values)

    def test_eigenvector_lands_in_minus(self):
        g = make_grid(1, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(-1.0), g)
        e0 = dec.eigenfield(0)
        plus, minus = project_split(dec, e0)
        assert np.max(np.abs(plus.values)) < 1e-10
        assert np.max(np.abs(minus.values - e0.values)) < 1e-10

    def test_reassembly_and_form_orthogonality(self):
        g = make_grid(1, 4, 16)
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        dec = eigendecompose(V, g)
        u = random_smooth_field(g, np.random.default_rng(2))
        plus, minus = project_split(dec, u)
        assert np.max(np.abs(plus.values + minus.values - u.values)) < 1e-12
        cross = integrate(plus * apply_operator(V, minus))
        assert abs(cross) < 1e-9

    def test_split_norm_constant(self):
        g = make_grid(1, 1, 8)
        dec = eigendecompose(PotentialSpec.constant(1.0), g)
        sp, sm = split_norm(dec, constant_field(g, 1.0))
        assert sp == pytest.approx(1.0, abs=1e-12)
        assert sm == 0.0

    def test_split_norm_eigenvector(self):
        g = make_grid(1, 2, 16)
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        dec = eigendecompose(V, g)
        for i in (0, dec.split_index):
            e = dec.eigenfield(i)
            sp, sm = split_norm(dec, e)
            lam = dec.eigenvalues[i]
            if lam < 0:
                assert sm == pytest.approx(np.sqrt(-lam), abs=1e-9)
                assert sp < 1e-6
            else:
                assert sp == pytest.approx(np.sqrt(lam), abs=1e-9)
                assert sm < 1e-6

    def test_split_norm_difference_is_form(self):
        g = make_grid(1, 4, 16)
        V = PotentialSpec.cosine(MATHIEU, offset=-9.8)
        dec = eigendecompose(V, g)
        u = random_smooth_field(g, np.random.default_rng(3))
        sp, sm = split_norm(dec, u)
        form = quadratic_form(g, dec.potential_values, u)
        assert sp ** 2 - sm ** 2 == pytest.approx(form, abs=1e-9)


class TestFiberEigenvalues:
    def test_oracle_agreement_with_offset(self):
        vals = fiber_eigenvalues(PotentialSpec.cosine(MATHIEU, offset=-3.0),
                                 1.1, 32, 4)
        expected = fiber_eigenvalues_cosine(MATHIEU, -3.0, 1.1, 32, 4)
        assert np.max(np.abs(vals - expected)) < 1e-9
