"""Likelihood values, analytic gradient, penalties, and prox maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowreg import (
    ConfigError,
    Dataset,
    FlowKind,
    FlowSpec,
    ModelSpec,
    ObjectiveConfig,
    PenaltyKind,
    PenaltySpec,
    nll,
    nll_gradient,
    nonident_family,
    objective_total,
    penalty_value,
    prox,
    three_flow_template,
    unpack_parameters,
)

from conftest import fd_gradient, intercept_only_model, prox_oracle, random_instance

ALL_KINDS = list(PenaltyKind)


class TestNll:
    def test_zero_model_is_log_two(self, rng):
        data, template, _ = random_instance(rng)
        model = unpack_parameters(template, np.zeros(25 * 0 + sum(f.n_params for f in template.flows)))
        assert nll(model, data, ObjectiveConfig()) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_single_observation(self):
        # composed p = 0.75 via the odds factor 3, outcome 1
        data = Dataset(np.zeros((1, 1)), np.array([1.0]))
        model = intercept_only_model(3.0, 1.0, 1.0)
        assert nll(model, data, ObjectiveConfig()) == pytest.approx(-np.log(0.75), abs=1e-12)

    def test_clamped_out_of_range(self):
        # composed p = 1 - (1 - 1.5) * 0.4 = 1.2 with outcome 0:
        # clamped to 1 - eps, so the value is -log(eps) ~ 20.72
        data = Dataset(np.zeros((1, 1)), np.array([0.0]))
        model = intercept_only_model(1.0, 3.0, 0.4)
        value = nll(model, data, ObjectiveConfig())
        assert value == pytest.approx(-np.log(1e-9), rel=1e-6)


class TestGradient:
    def test_balanced_zero_model_has_zero_odds_intercept_gradient(self):
        X = np.zeros((4, 1))
        y = np.array([1.0, 0.0, 1.0, 0.0])
        data = Dataset(X, y)
        template = three_flow_template(1)
        model = unpack_parameters(template, np.zeros(4))
        grad = nll_gradient(model, data, ObjectiveConfig())
        assert grad[0] == pytest.approx(0.0, abs=1e-15)

    def test_matches_finite_differences(self, rng):
        cfg = ObjectiveConfig()
        for _ in range(5):
            data, template, vec = random_instance(rng, n=20, p=3)
            model = unpack_parameters(template, vec)
            analytic = nll_gradient(model, data, cfg)
            numeric = fd_gradient(template, data, cfg, vec)
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
            assert rel.max() < 1e-6

    def test_risk_gradient_sign_near_one(self):
        # outcome 1 with p pushed near (but below) the clamp: raising the
        # risk predictor still increases p, so the NLL gradient is <= 0
        data = Dataset(np.ones((1, 1)), np.array([1.0]))
        template = ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[0.6]),
        ))
        grad = nll_gradient(template, data, ObjectiveConfig())
        assert grad[0] <= 0.0

    def test_clamped_rows_contribute_zero(self):
        data = Dataset(np.ones((1, 1)), np.array([0.0]))
        template = ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[2.0]),
        ))  # p = e^2 > 1, clamped
        grad = nll_gradient(template, data, ObjectiveConfig())
        np.testing.assert_array_equal(grad, np.zeros(1))


class TestPenaltyValue:
    def _model(self, b1, b0):
        return ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[b1]),
            FlowSpec(FlowKind.RISK0, covariate_indices=(0,), coefficients=[b0]),
        ))

    def test_zero_coefficients(self):
        cfg = ObjectiveConfig(penalties={
            k: PenaltySpec(PenaltyKind.L1, lam=1.0) for k in FlowKind
        })
        assert penalty_value(self._model(0.0, 0.0), cfg) == 0.0

    def test_l1_pair_on_reciprocal_factors(self):
        # log 2 and log 0.5 under unit-strength L1: 2 |log 2|
        cfg = ObjectiveConfig(penalties={
            k: PenaltySpec(PenaltyKind.L1, lam=1.0) for k in FlowKind
        })
        value = penalty_value(self._model(np.log(2.0), np.log(0.5)), cfg)
        assert value == pytest.approx(2.0 * np.log(2.0), abs=1e-12)

    def test_elastic_net_single_coefficient(self):
        cfg = ObjectiveConfig(penalties={
            FlowKind.RISK1: PenaltySpec(PenaltyKind.ELASTIC_NET, lam=1.0, alpha=0.5),
        })
        model = ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[2.0]),
        ))
        assert penalty_value(model, cfg) == pytest.approx(3.0)  # 0.5*2 + 0.5*4

    def test_adaptive_requires_weights(self):
        with pytest.raises(ConfigError):
            PenaltySpec(PenaltyKind.ADAPTIVE_L1, lam=1.0)

    def test_adaptive_weight_length_checked(self):
        cfg = ObjectiveConfig(penalties={
            FlowKind.RISK1: PenaltySpec(PenaltyKind.ADAPTIVE_L1, lam=1.0,
                                        weights=[1.0, 2.0]),
        })
        model = ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[1.0]),
        ))
        with pytest.raises(ConfigError):
            penalty_value(model, cfg)

    def test_intercepts_excluded_by_default(self):
        cfg = ObjectiveConfig(penalties={
            FlowKind.RISK1: PenaltySpec(PenaltyKind.L1, lam=1.0),
        })
        model = ModelSpec(flows=(
            FlowSpec(FlowKind.RISK1, has_intercept=True, intercept=5.0,
                     covariate_indices=(0,), coefficients=[1.0]),
        ))
        assert penalty_value(model, cfg) == pytest.approx(1.0)
        cfg_int = ObjectiveConfig(penalties=cfg.penalties, penalize_intercepts=True)
        assert penalty_value(model, cfg_int) == pytest.approx(6.0)

    @settings(max_examples=100, deadline=None)
    @given(
        u=st.floats(-3, 3), v=st.floats(-3, 3),
        kind=st.sampled_from([PenaltyKind.L1, PenaltyKind.L2,
                              PenaltyKind.ELASTIC_NET, PenaltyKind.ADAPTIVE_L1]),
    )
    def test_convexity_midpoint(self, u, v, kind):
        weights = [1.7] if kind is PenaltyKind.ADAPTIVE_L1 else None
        spec = PenaltySpec(kind, lam=1.0, weights=weights)
        cfg = ObjectiveConfig(penalties={FlowKind.RISK1: spec})

        def val(x):
            m = ModelSpec(flows=(
                FlowSpec(FlowKind.RISK1, covariate_indices=(0,), coefficients=[x]),
            ))
            return penalty_value(m, cfg)

        mid = val((u + v) / 2.0)
        assert mid <= 0.5 * val(u) + 0.5 * val(v) + 1e-12


class TestProx:
    def test_l1_soft_threshold(self):
        np.testing.assert_allclose(prox(PenaltyKind.L1, [1.2], 0.5), [0.7])

    def test_l2_shrinkage(self):
        np.testing.assert_allclose(prox(PenaltyKind.L2, [1.0], 0.5), [0.5])

    def test_elastic_net_value(self):
        # frozen from the golden-section oracle on 1/2 (x-2)^2 + 0.5|x| + 0.5 x^2
        oracle = prox_oracle(PenaltyKind.ELASTIC_NET, 2.0, 1.0, alpha=0.5)
        assert oracle == pytest.approx(0.75, abs=1e-6)
        np.testing.assert_allclose(
            prox(PenaltyKind.ELASTIC_NET, [2.0], 1.0, alpha=0.5), [0.75]
        )

    def test_adaptive_per_coordinate_threshold(self):
        out = prox(PenaltyKind.ADAPTIVE_L1, [1.0, 1.0], 0.5, weights=[0.5, 3.0])
        np.testing.assert_allclose(out, [0.75, 0.0])

    def test_negative_strength_rejected(self):
        with pytest.raises(ConfigError):
            prox(PenaltyKind.L1, [1.0], -0.1)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_zero_strength_is_identity(self, kind, rng):
        z = rng.standard_normal(6)
        w = np.abs(rng.standard_normal(6)) if kind is PenaltyKind.ADAPTIVE_L1 else None
        np.testing.assert_array_equal(prox(kind, z, 0.0, weights=w), z)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_matches_oracle(self, kind, rng):
        for _ in range(50):
            z = float(rng.uniform(-4, 4))
            gamma = float(rng.uniform(0, 2))
            alpha = float(rng.uniform(0, 1))
            w = float(rng.uniform(0.1, 3.0))
            ours = prox(kind, [z], gamma, alpha=alpha,
                        weights=[w] if kind is PenaltyKind.ADAPTIVE_L1 else None)[0]
            ref = prox_oracle(kind, z, gamma, alpha=alpha, weight=w)
            assert ours == pytest.approx(ref, abs=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(
        z1=st.floats(-5, 5), z2=st.floats(-5, 5), gamma=st.floats(0, 3),
        kind=st.sampled_from(ALL_KINDS),
    )
    def test_nonexpansive(self, z1, z2, gamma, kind):
        w = [1.3] if kind is PenaltyKind.ADAPTIVE_L1 else None
        p1 = prox(kind, [z1], gamma, weights=w)
        p2 = prox(kind, [z2], gamma, weights=w)
        assert abs(p1[0] - p2[0]) <= abs(z1 - z2) + 1e-12


class TestObjectiveTotal:
    def test_zero_coefficients(self, rng):
        data, template, _ = random_instance(rng)
        model = unpack_parameters(template, np.zeros(sum(f.n_params for f in template.flows)))
        cfg = ObjectiveConfig(penalties={
            k: PenaltySpec(PenaltyKind.L1, lam=0.7) for k in FlowKind
        })
        assert objective_total(model, data, cfg) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_none_penalties_equal_nll(self, rng):
        data, template, vec = random_instance(rng)
        model = unpack_parameters(template, vec)
        cfg = ObjectiveConfig()
        assert objective_total(model, data, cfg) == nll(model, data, cfg)

    @pytest.mark.parametrize("kind", [PenaltyKind.L1, PenaltyKind.L2])
    def test_penalty_breaks_flat_ridge(self, kind):
        # along the non-identifiable family the likelihood is flat, but any
        # risk-flow penalty makes the total strictly smallest at gamma = 1.
        # The family's log factors are covariate coefficients here (the
        # design point is x = 1) because penalties act on coefficients.
        data = Dataset(np.ones((2, 1)), np.array([1.0, 0.0]))
        cfg_plain = ObjectiveConfig()
        cfg_pen = ObjectiveConfig(penalties={
            FlowKind.RISK1: PenaltySpec(kind, lam=0.5),
            FlowKind.RISK0: PenaltySpec(kind, lam=0.5),
        })
        gammas = np.linspace(0.25, 1.75, 31)
        nlls, totals = [], []
        for gamma, delta in nonident_family(1.0, gammas, 0.5):
            model = ModelSpec(flows=(
                FlowSpec(FlowKind.ODDS, has_intercept=True, intercept=0.0),
                FlowSpec(FlowKind.RISK1, covariate_indices=(0,),
                         coefficients=[np.log(gamma)]),
                FlowSpec(FlowKind.RISK0, covariate_indices=(0,),
                         coefficients=[np.log(delta)]),
            ))
            nlls.append(nll(model, data, cfg_plain))
            totals.append(objective_total(model, data, cfg_pen))
        assert max(nlls) - min(nlls) < 1e-10
        assert max(totals) - min(totals) > 1e-3
        i_star = int(np.argmin(totals))
        assert gammas[i_star] == pytest.approx(1.0)
