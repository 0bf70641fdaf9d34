import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import a_m_mp, mellin_projection, psi_quad
from ruinlab.claims import Exponential, Gamma
from ruinlab.errors import DomainError, EstimateDegenerateError, EvaluationError, GridError, NetProfitError
from ruinlab.laplace import (
    InversionConfig,
    QuadratureConfig,
    RegularizedInverse,
    TransformFn,
    a_m,
    choose_m,
    default_grid,
    grid_norm,
    ise,
    plugin_transform,
    psi_m,
    regularized_inverse,
    shift_theta,
    survival_estimate,
    survival_ladder,
    true_transform,
)
from ruinlab.process import ModelParams, discretize, simulate_path
from ruinlab.rng import replicate_seed
from ruinlab.threshold import EstimateSet, ThresholdSpec, estimate


def diffusion(sigma2=2.0, c=1.0):
    return ModelParams(x=0.0, sigma=math.sqrt(sigma2), lam=0.0, claim=Exponential(1.0), c=c)


def fn(f):
    return TransformFn(f, "test", {})


class TestTransforms:
    def test_diffusion_only_value(self):
        assert true_transform(diffusion())(1.0) == pytest.approx(0.5, rel=1e-15)

    def test_exponential_value(self):
        p = ModelParams(x=0, sigma=1.0, lam=0.5, claim=Exponential(1.0), c=1.0)
        assert true_transform(p)(1.0) == pytest.approx(0.4, rel=1e-14)

    @pytest.mark.parametrize("claim", [Exponential(1.0), Gamma(2.0, 0.5)], ids=["exp", "gamma"])
    def test_large_s_decay(self, claim):
        p = ModelParams(x=0, sigma=0.8, lam=1.0, claim=claim, c=1.5)
        s = 1e3
        assert s * s * true_transform(p)(s) == pytest.approx(2 * p.c * (1 - p.rho) / p.sigma**2, rel=0.01)

    def test_net_profit_required(self):
        with pytest.raises(NetProfitError):
            true_transform(ModelParams(x=0, sigma=1, lam=1, claim=Exponential(1), c=0.9))

    def test_plugin_equals_true_for_true_parameters(self):
        p = ModelParams(x=0, sigma=0.7, lam=1.2, claim=Gamma(2.0, 0.4), c=1.5)
        s = np.geomspace(1e-3, 1e3, 50)
        np.testing.assert_allclose(plugin_transform(EstimateSet.from_model(p), p.c)(s), true_transform(p)(s), rtol=1e-14)

    def test_plugin_without_flags(self):
        est = EstimateSet.from_model(diffusion(sigma2=0.5, c=2.0))
        s = np.array([0.1, 1.0, 7.0])
        np.testing.assert_allclose(plugin_transform(est, 2.0)(s), 1 / (s + 0.5 * s * s / 4.0), rtol=1e-14)

    def test_plugin_rejects_rho_above_one(self):
        p = ModelParams(x=0, sigma=0.7, lam=1.0, claim=Exponential(1.0), c=0.8)
        with pytest.raises(EstimateDegenerateError):
            plugin_transform(EstimateSet.from_model(p), p.c)

    def test_plugin_reports_bad_denominator(self):
        from dataclasses import replace

        p = ModelParams(x=0, sigma=0.1, lam=1.0, claim=Exponential(1.0), c=1.5)
        est = replace(EstimateSet.from_model(p), lambda_hat=50.0, lambda_lf_hat=lambda s: 0.0 * np.asarray(s), rho_hat=0.5)
        with pytest.raises(EvaluationError) as info:
            plugin_transform(est, p.c)(1.0)
        assert info.value.argument is not None

    def test_shift(self):
        g = true_transform(diffusion())
        # g(2) = 1 / (2 + 2 * 4 / 2)
        assert shift_theta(g, 1.0)(1.0) == pytest.approx(1 / 6, rel=1e-15)
        s = np.linspace(0.1, 5, 9)
        assert np.array_equal(shift_theta(g, 0.7)(s), g(s + 0.7))
        np.testing.assert_allclose(shift_theta(shift_theta(g, 0.3), 0.4)(s), shift_theta(g, 0.7)(s), rtol=1e-15)
        for bad in (0.0, -1.0):
            with pytest.raises(ValueError):
                shift_theta(g, bad)


class TestKernel:
    def test_a_m(self):
        assert a_m(1 / math.pi) == pytest.approx(0.0, abs=1e-7)
        assert a_m(1.0) == pytest.approx(float(a_m_mp(1.0)), abs=1e-15)
        assert a_m(1.0) == pytest.approx(0.5766267216059607, abs=1e-15)
        with pytest.raises(DomainError):
            a_m(0.3)

    @given(m1=st.floats(1 / math.pi + 1e-9, 1e4), m2=st.floats(1 / math.pi + 1e-9, 1e4))
    def test_a_m_monotone(self, m1, m2):
        if m2 > m1 * (1 + 1e-12):
            assert a_m(m2) > a_m(m1)

    def test_psi_at_one(self):
        assert psi_m(1.0, 1.0) == pytest.approx(math.sqrt(math.pi**2 - 1) / math.pi, abs=1e-14)
        assert psi_m(1.0, 1.0) == pytest.approx(psi_quad(1.0, 1.0), abs=1e-12)
        assert psi_m(1.0, 1.0) == pytest.approx(0.9479867, abs=1e-7)

    def test_psi_against_quadrature(self):
        rng = np.random.default_rng(2024)
        ys = np.exp(rng.uniform(-6, 6, 100))
        ms = rng.uniform(0.35, 25.0, 100)
        err = max(abs(psi_m(y, m) - psi_quad(y, m)) for y, m in zip(ys, ms))
        assert err <= 1e-10

    @settings(max_examples=200)
    @given(logy=st.floats(-30, 30), m=st.floats(0.32, 100))
    def test_psi_symmetry(self, logy, m):
        y = math.exp(logy)
        assert psi_m(y, m) == pytest.approx(psi_m(1 / y, m), abs=1e-12, rel=1e-12)


class TestInverse:
    f = staticmethod(lambda t: math.exp(-t) * (1 - math.exp(-t)))
    g = staticmethod(lambda s: 1 / (s + 1) - 1 / (s + 2))

    def test_zero(self):
        out = RegularizedInverse(fn(lambda s: np.zeros_like(s)), 5.0)(np.array([0.1, 1.0, 3.0]))
        assert np.all(out == 0.0)

    @pytest.mark.parametrize("m", [0.5, 2.0, 10.0, 40.0])
    def test_against_mellin_oracle(self, m):
        t = np.array([0.05, 0.3, 1.0, 2.5, 5.0])
        got = RegularizedInverse(fn(self.g), m)(t)
        want = [mellin_projection(self.f, ti, m) for ti in t]
        np.testing.assert_allclose(got, want, atol=1e-8)

    def test_linearity(self):
        g1, g2 = (lambda s: 1 / (s + 0.5)), (lambda s: 1 / (1 + s) ** 2)
        t = default_grid()
        inv = lambda g: RegularizedInverse(fn(g), 7.0)(t)
        lhs = inv(lambda s: 2.5 * g1(s) - 1.5 * g2(s))
        np.testing.assert_allclose(lhs, 2.5 * inv(g1) - 1.5 * inv(g2), rtol=1e-8, atol=1e-12)

    def test_deterministic(self):
        t = default_grid()
        a = RegularizedInverse(fn(self.g), 5.0)(t)
        b = RegularizedInverse(fn(self.g), 5.0)(t)
        assert a.tobytes() == b.tobytes()

    def test_step_refinement(self):
        t = np.array([0.2, 1.0, 4.0])
        coarse = RegularizedInverse(fn(self.g), 10.0, QuadratureConfig(step=0.05))(t)
        fine = RegularizedInverse(fn(self.g), 10.0, QuadratureConfig(step=0.01))(t)
        np.testing.assert_allclose(coarse, fine, atol=1e-10)

    def test_domain(self):
        inv = RegularizedInverse(fn(self.g), 5.0)
        for bad in (0.0, -1.0):
            with pytest.raises(DomainError):
                inv(bad)

    def test_non_finite_transform(self):
        def bad(s):
            out = 1 / (s + 1)
            return np.where(s > 10, np.nan, out)

        with pytest.raises(EvaluationError) as info:
            RegularizedInverse(fn(bad), 5.0)(1.0)
        assert info.value.argument > 10

    def test_config(self):
        with pytest.raises(DomainError):
            InversionConfig(m=0.3)
        with pytest.raises(ValueError):
            InversionConfig(m=2.0, theta=0.0)
        inv = regularized_inverse(fn(self.g), InversionConfig(m=4.0))
        assert inv(1.0) == pytest.approx(RegularizedInverse(fn(self.g), 4.0)(1.0))

    def test_diffusion_tilted_improves_with_m(self):
        g = shift_theta(true_transform(diffusion()), 1.0)
        t = default_grid()
        ref = np.exp(-t) * (1 - np.exp(-t))
        e5 = ise(RegularizedInverse(g, 5.0)(t), ref, t)
        e20 = ise(RegularizedInverse(g, 20.0)(t), ref, t)
        assert e20 < e5

    def test_norm_is_scale_free(self):
        g = lambda s: 1 / (1 + s) ** 2
        n1 = grid_norm(lambda t: t * np.exp(-t))
        assert n1 == pytest.approx(0.5, rel=1e-8)  # int t^2 e^{-2t} = 1/4
        assert grid_norm(g) == pytest.approx(math.sqrt(1 / 3), rel=1e-8)


class TestChooseM:
    def test_values(self):
        assert choose_m(100.0) == pytest.approx(4.659906017846561, rel=1e-14)
        assert choose_m(math.e**2) == pytest.approx(math.e / math.sqrt(2), rel=1e-14)
        assert choose_m(math.e**2) > 1 / math.pi

    def test_short_horizon(self):
        with pytest.raises(DomainError, match="horizon"):
            choose_m(2.0)


class TestIse:
    def test_identical(self):
        x = default_grid()
        assert ise(x, x, x) == 0.0

    def test_constant_difference(self):
        x = default_grid()
        assert ise(x + 0.3, x, x) == pytest.approx(0.09 * 5.0, rel=1e-12)

    def test_refinement(self):
        f = lambda x: np.sin(x) * np.exp(-x / 3)
        a = ise(f(default_grid(5, 200)), 0 * default_grid(5, 200), default_grid(5, 200))
        b = ise(f(default_grid(5, 400)), 0 * default_grid(5, 400), default_grid(5, 400))
        assert abs(a - b) / b < 0.01

    def test_mismatch(self):
        with pytest.raises(GridError):
            ise(np.zeros(3), np.zeros(4), np.zeros(3))

    def test_grid(self):
        x = default_grid(5.0, 200)
        assert x[0] > 0 and x[-1] == 5.0 and x.size == 200


class TestSurvival:
    def test_diffusion_only_curve(self):
        p = diffusion(sigma2=1.0, c=1.5)
        curve = survival_estimate(EstimateSet.from_model(p), p.c, m=20.0)
        curve = curve.with_reference(lambda x: 1 - np.exp(-2 * p.c * x / p.sigma**2))
        assert np.all(np.isfinite(curve.values)) and curve.ise >= 0
        assert curve.ise < 0.05
        at_zero = survival_estimate(EstimateSet.from_model(p), p.c, x_grid=[1e-9], m=20.0)
        assert np.isfinite(at_zero.values[0])

    def test_default_m_from_horizon(self):
        p = diffusion()
        curve = survival_estimate(EstimateSet.from_model(p, T_n=100.0), p.c)
        assert curve.m == pytest.approx(choose_m(100.0))

    def test_ladder_matches_single_runs(self):
        p = ModelParams(x=0, sigma=1.0, lam=1.0, claim=Exponential(1.0), c=1.5)
        x = default_grid()
        ladder = survival_ladder(true_transform(p), 0.1, x, [2.0, 5.0])
        single = survival_estimate(EstimateSet.from_model(p), p.c, x_grid=x, m=5.0)
        np.testing.assert_array_equal(ladder[1].values, single.values)


def _plugin_errors_at_T500():
    p = ModelParams(x=0.0, sigma=0.5, lam=1.0, claim=Exponential(1.0), c=1.5)
    truth = true_transform(p)(1.0)
    err = []
    for r in range(200):
        rec = discretize(simulate_path(p, 500.0, replicate_seed(81, r)), 1e-3)
        est = estimate(rec, ThresholdSpec.calibrate(rec), p.c)
        err.append(plugin_transform(est, p.c)(1.0) - truth)
    return np.array(err)


def _delta_method_sd(T=500.0):
    # L(1) = (1 - rho) / D with D = 1 + sigma^2 / (2c) - A / c and A = lam (1 - l_F(1));
    # rho_hat = sum(gamma) / (c T), A_hat = sum(1 - e^-gamma) / T over Exp(1) claims
    c, rho, A, D = 1.5, 2 / 3, 0.5, 0.75
    d_rho, d_A = -1 / D, (1 - rho) / (c * D * D)
    var_rho = 2.0 / (c * c * T)
    var_A = (1 - 2 / 2 + 1 / 3) / T  # E(1 - e^-g)^2 = 1 - 2 l(1) + l(2)
    cov = (1 - 1 / 4) / (c * T)  # E[g (1 - e^-g)] = 1 - 1/(1+1)^2
    return math.sqrt(d_rho**2 * var_rho + d_A**2 * var_A + 2 * d_rho * d_A * cov)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="sampling sd of the plug-in at s=1 is about 0.047 at T=500, so only ~71% of reps fall within 0.05",
)
def test_plugin_close_to_truth_at_T500():
    err = _plugin_errors_at_T500()
    assert np.sum(np.abs(err) < 0.05) >= 180


@pytest.mark.slow
def test_plugin_error_matches_delta_method():
    from scipy import stats

    err = _plugin_errors_at_T500()
    sd = _delta_method_sd()
    assert np.std(err, ddof=1) == pytest.approx(sd, rel=0.15)
    p_in = 2 * stats.norm.cdf(0.05 / sd) - 1
    frac = np.mean(np.abs(err) < 0.05)
    assert abs(frac - p_in) <= 3 * math.sqrt(p_in * (1 - p_in) / err.size)
