import numpy as np
import pytest

from gapsol.errors import AssumptionViolated, InvalidGrid
from gapsol.grid import PeriodicCoefficient, PeriodicField, constant_field, make_grid
from gapsol.nonlinear import (
    NonlinearitySpec,
    check_assumptions,
    eval_F,
    eval_f,
    eval_fprime,
)

from conftest import random_smooth_field


class TestEval:
    def test_cubic_constant(self):
        g = make_grid(1, 1, 8)
        spec = NonlinearitySpec.power(1.0, 4.0)
        out = eval_f(spec, constant_field(g, 2.0))
        assert np.all(out.values == 8.0)

    def test_zero_at_zero(self):
        g = make_grid(1, 1, 8)
        for p in (2.5, 3.0, 4.0):
            spec = NonlinearitySpec.power(1.0, p)
            assert np.all(eval_f(spec, constant_field(g, 0.0)).values == 0.0)

    def test_scalar_reference_per_node(self):
        g = make_grid(1, 2, 16)
        h = PeriodicCoefficient.cosine([(0.5, (1,))], offset=1.0)
        spec = NonlinearitySpec.power(h, 3.0)
        u = random_smooth_field(g, np.random.default_rng(0))
        hv = h.sample(g)
        expected = np.array([hv[i] * abs(u.values[i]) ** 1.0 * u.values[i]
                             for i in range(g.num_nodes)])
        assert np.max(np.abs(eval_f(spec, u).values - expected)) < 1e-14

    def test_primitive_and_derivative_constants(self):
        g = make_grid(1, 1, 8)
        spec = NonlinearitySpec.power(1.0, 4.0)
        one = constant_field(g, 1.0)
        assert np.allclose(eval_F(spec, one).values, 0.25)
        assert np.allclose(eval_fprime(spec, one).values, 3.0)
        zero = constant_field(g, 0.0)
        assert np.all(eval_F(spec, zero).values == 0.0)
        assert np.all(eval_fprime(spec, zero).values == 0.0)

    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
    def test_finite_difference_consistency(self, p):
        g = make_grid(1, 2, 16)
        spec = NonlinearitySpec.power(1.0, p)
        rng = np.random.default_rng(1)
        u = random_smooth_field(g, rng) + 2.0  # stay away from u=0
        eps = 1e-6
        dF = (eval_F(spec, u + eps).values - eval_F(spec, u).values) / eps
        f = eval_f(spec, u).values
        assert np.max(np.abs(dF - f) / np.maximum(np.abs(f), 1.0)) < 1e-5
        df = (eval_f(spec, u + eps).values - eval_f(spec, u).values) / eps
        fp = eval_fprime(spec, u).values
        assert np.max(np.abs(df - fp) / np.maximum(np.abs(fp), 1.0)) < 1e-5

    def test_oddness_exact(self):
        g = make_grid(1, 2, 16)
        for p in (2.5, 3.0, 4.0):
            spec = NonlinearitySpec.power(1.0, p)
            u = random_smooth_field(g, np.random.default_rng(2))
            assert np.array_equal(eval_f(spec, -u).values,
                                  -eval_f(spec, u).values)

    def test_kerr_is_cubic(self):
        g = make_grid(1, 1, 8)
        spec = NonlinearitySpec.kerr(2.0)
        assert spec.p == 4.0
        out = eval_f(spec, constant_field(g, 3.0))
        assert np.all(out.values == 2.0 * 27.0)


class TestSpecValidation:
    def test_bad_exponents(self):
        with pytest.raises(InvalidGrid):
            NonlinearitySpec.power(1.0, 2.0)
        with pytest.raises(InvalidGrid):
            NonlinearitySpec.power(1.0, 4.0, q=1.5)
        with pytest.raises(InvalidGrid):
            NonlinearitySpec.power(1.0, 4.0, theta=1.5)

    def test_defaults(self):
        spec = NonlinearitySpec.power(1.0, 4.0)
        assert spec.q == 4.0
        assert spec.theta == pytest.approx(1.0 / 3.0)
        assert spec.gamma == 1.0


class TestCheckAssumptions:
    def test_cubic_passes_with_best_theta(self):
        spec = NonlinearitySpec.power(1.0, 4.0)
        report = check_assumptions(spec)
        assert report.passed
        assert report.best_theta == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_overdeclared_q_fails_superlinearity(self):
        spec = NonlinearitySpec.power(1.0, 4.0, q=5.0)
        with pytest.raises(AssumptionViolated) as err:
            check_assumptions(spec)
        assert err.value.label == "superlinearity"

    def test_sign_changing_weight_fails_positivity(self):
        coupling = PeriodicCoefficient.cosine([(1.0, (1,))], offset=0.2)
        spec = NonlinearitySpec.kerr(coupling)
        with pytest.raises(AssumptionViolated) as err:
            check_assumptions(spec)
        assert err.value.label == "positivity"
        assert err.value.witness is not None

    def test_underdeclared_theta_fails_ratio(self):
        spec = NonlinearitySpec.power(1.0, 4.0, theta=0.2)  # true ratio 1/3
        with pytest.raises(AssumptionViolated) as err:
            check_assumptions(spec)
        assert err.value.label == "derivative_ratio"

    def test_report_without_raising(self):
        spec = NonlinearitySpec.power(1.0, 4.0, q=5.0)
        report = check_assumptions(spec, raise_on_fail=False)
        assert not report.passed
        assert "superlinearity" in report.failing()


class TestSuperlinearityIdentity:
    def test_half_fu_minus_F_nonnegative(self):
        # (v) gives 1/2 f u - F >= (1/2 - 1/q) u f >= 0 pointwise
        g = make_grid(1, 2, 16)
        rng = np.random.default_rng(3)
        for p in (2.5, 3.0, 4.0):
            spec = NonlinearitySpec.power(1.0, p)
            u = random_smooth_field(g, rng, amplitude=2.0)
            f = eval_f(spec, u).values
            F = eval_F(spec, u).values
            uf = u.values * f
            lhs = 0.5 * uf - F
            rhs = (0.5 - 1.0 / spec.q) * uf
            assert np.all(lhs >= rhs - 1e-12)
            assert np.all(rhs >= -1e-12)
