"""Flow algebra, composition, and the non-identifiable family."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowreg import (
    Dataset,
    FlowKind,
    FlowSpec,
    ModelError,
    ModelSpec,
    apply_flow,
    compose_probability,
    linear_predictor,
    n_parameters,
    nonident_family,
    pack_parameters,
    unpack_parameters,
)
from flowreg.errors import DataError
from flowreg.objective import ObjectiveConfig, nll

from conftest import intercept_only_model


class TestLinearPredictor:
    def test_empty_predictor(self):
        flow = FlowSpec(FlowKind.RISK1)
        assert linear_predictor(flow, [3.2]) == 0.0

    def test_intercept_plus_coefficient(self):
        flow = FlowSpec(FlowKind.ODDS, has_intercept=True, intercept=1.0,
                        covariate_indices=(0,), coefficients=[0.5])
        assert linear_predictor(flow, [2.0]) == pytest.approx(2.0)

    def test_sparse_index(self):
        # single coefficient on column 3: 0.5 * 1.67
        flow = FlowSpec(FlowKind.RISK1, covariate_indices=(3,), coefficients=[0.5])
        assert linear_predictor(flow, [0.0, 0.0, 0.0, 1.67]) == pytest.approx(0.835)

    def test_out_of_range_index_names_flow(self):
        flow = FlowSpec(FlowKind.RISK0, covariate_indices=(5,), coefficients=[1.0])
        with pytest.raises(ModelError, match="risk0.*index 5"):
            linear_predictor(flow, [1.0, 2.0])


class TestApplyFlow:
    def test_odds_identity(self):
        assert apply_flow(0.5, FlowKind.ODDS, 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_risk_doubles(self):
        assert apply_flow(0.5, FlowKind.RISK1, np.log(2.0)) == pytest.approx(1.0)

    def test_survival_halves(self):
        assert apply_flow(0.5, FlowKind.RISK0, np.log(0.5)) == pytest.approx(0.75)

    def test_risk_flows_may_leave_unit_interval(self):
        assert apply_flow(0.9, FlowKind.RISK1, 1.0) > 1.0
        assert apply_flow(0.1, FlowKind.RISK0, 1.0) < 0.0

    def test_odds_stable_for_huge_amounts(self):
        assert apply_flow(0.5, FlowKind.ODDS, 1000.0) == pytest.approx(1.0)
        assert apply_flow(0.5, FlowKind.ODDS, -1000.0) == pytest.approx(0.0)

    def test_vectorized(self):
        p = np.array([0.1, 0.5, 0.9])
        out = apply_flow(p, FlowKind.RISK1, 0.0)
        np.testing.assert_allclose(out, p)

    @settings(max_examples=200, deadline=None)
    @given(
        p=st.floats(0.0, 1.0),
        v=st.floats(-3.0, 3.0),
        kind=st.sampled_from(list(FlowKind)),
    )
    def test_identity_axiom(self, p, v, kind):
        assert abs(apply_flow(p, kind, 0.0) - p) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(
        p=st.floats(0.0, 1.0),
        v=st.floats(-3.0, 3.0),
        w=st.floats(-3.0, 3.0),
        kind=st.sampled_from(list(FlowKind)),
    )
    def test_additivity_axiom(self, p, v, w, kind):
        two_step = apply_flow(apply_flow(p, kind, v), kind, w)
        one_step = apply_flow(p, kind, v + w)
        assert abs(two_step - one_step) <= 1e-12

    def test_odds_strictly_increasing_in_amount(self, rng):
        for p in rng.uniform(0.05, 0.95, 20):
            vals = apply_flow(float(p), FlowKind.ODDS, np.linspace(-3, 3, 41))
            assert np.all(np.diff(vals) > 0)


class TestComposeProbability:
    def test_all_factors_one(self):
        m = intercept_only_model(1.0, 1.0, 1.0)
        assert compose_probability(m, []) == pytest.approx(0.5, abs=1e-12)

    def test_risk_pair_two_half(self):
        # 1 - (1 - 2 * 0.5) * 0.5 = 1.0
        m = intercept_only_model(1.0, 2.0, 0.5)
        assert compose_probability(m, []) == pytest.approx(1.0, abs=1e-12)

    def test_odds_only(self):
        m = intercept_only_model(3.0, 1.0, 1.0)
        assert compose_probability(m, []) == pytest.approx(0.75, abs=1e-12)

    def test_closed_form_agreement(self, rng):
        checked = 0
        for _ in range(1000):
            theta, gamma, delta = np.exp(rng.uniform(-2.0, 2.0, 3))
            q = theta / (1.0 + theta)
            if gamma * q >= 1.0 or delta * (1.0 - gamma * q) > 1.0:
                continue
            composed = compose_probability(intercept_only_model(theta, gamma, delta), [])
            assert abs(composed - (1.0 - (1.0 - gamma * q) * delta)) <= 1e-12
            checked += 1
        assert checked > 200


class TestNonidentFamily:
    def test_identity_point(self):
        assert nonident_family(1.0, [1.0], 0.5) == [(1.0, 1.0)]

    def test_low_gamma(self):
        (_, delta), = nonident_family(1.0, [0.5], 0.5)
        assert delta == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_high_gamma(self):
        (_, delta), = nonident_family(1.0, [1.5], 0.5)
        assert delta == pytest.approx(2.0, abs=1e-15)

    def test_every_pair_recomposes_to_target(self):
        for gamma, delta in nonident_family(1.3, np.linspace(0.3, 1.5, 25), 0.42):
            m = intercept_only_model(1.3, gamma, delta)
            assert compose_probability(m, []) == pytest.approx(0.42, abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ModelError, match="gamma"):
            nonident_family(1.0, [2.0], 0.5)  # gamma * q = 1

    def test_flat_ridge_nll(self):
        # single design point: per-observation NLL constant along the family
        data = Dataset(np.zeros((1, 1)), np.array([1.0]))
        cfg = ObjectiveConfig()
        values = [
            nll(intercept_only_model(1.0, g, d), data, cfg)
            for g, d in nonident_family(1.0, np.linspace(0.25, 1.75, 31), 0.5)
        ]
        assert max(values) - min(values) < 1e-10


class TestSpecValidation:
    def test_coefficient_length_mismatch(self):
        with pytest.raises(ModelError):
            FlowSpec(FlowKind.ODDS, covariate_indices=(0, 1), coefficients=[1.0])

    def test_intercept_without_flag(self):
        with pytest.raises(ModelError):
            FlowSpec(FlowKind.ODDS, has_intercept=False, intercept=0.5)

    def test_duplicate_flow_kind(self):
        with pytest.raises(ModelError):
            ModelSpec(flows=(FlowSpec(FlowKind.ODDS), FlowSpec(FlowKind.ODDS)))

    @pytest.mark.parametrize("p0", [0.0, 1.0, -0.1, 1.5])
    def test_p0_strictly_interior(self, p0):
        with pytest.raises(ModelError):
            ModelSpec(p0=p0)

    def test_dataset_rejects_bad_outcome(self):
        with pytest.raises(DataError):
            Dataset(np.ones((2, 1)), np.array([0.0, 2.0]))

    def test_dataset_rejects_nonfinite(self):
        with pytest.raises(DataError):
            Dataset(np.array([[np.inf]]), np.array([1.0]))


class TestParameterPacking:
    def test_roundtrip(self, rng):
        from flowreg import three_flow_template

        template = three_flow_template(4)
        vec = rng.standard_normal(n_parameters(template))
        rebuilt = unpack_parameters(template, vec)
        np.testing.assert_array_equal(pack_parameters(rebuilt), vec)

    def test_length_check(self):
        from flowreg import three_flow_template

        with pytest.raises(ModelError):
            unpack_parameters(three_flow_template(3), np.zeros(2))
