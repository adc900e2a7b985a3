"""flowreg: penalized regression by composition for binary outcomes.

Conditional event probabilities are built by composing three scaling
flows — odds, risk, and survival — on a Bernoulli reference, each flow
driven by its own linear predictor.  Because the risk and survival flows
overlap in their effect, the plain likelihood has flat directions;
flow-specific penalties restore a unique, interpretable fit.  Estimation
is penalized maximum likelihood via proximal gradient descent with
backtracking, with cross-validated strength selection, a replication
study harness, and CSV/SVG reporting through the ``flowreg`` CLI.

Quick start::

    import numpy as np
    from flowreg import (
        Dataset, FlowKind, PenaltyKind, PenaltySpec, ObjectiveConfig,
        three_flow_template, fit,
    )

    data = Dataset(X, y)
    template = three_flow_template(X.shape[1])
    config = ObjectiveConfig(penalties={
        k: PenaltySpec(PenaltyKind.L1, lam=0.01) for k in FlowKind
    })
    result = fit(data, template, config)
    print(result.model.flow(FlowKind.RISK1).coefficients)
"""

from .errors import (
    ConfigError,
    DataError,
    DiagnosticsError,
    FlowregError,
    ModelError,
    OptimizationError,
    TuningError,
)
from .model import (
    CANONICAL_FLOW_ORDER,
    Dataset,
    FlowKind,
    FlowSpec,
    ModelSpec,
    apply_flow,
    compose_probability,
    compose_probability_matrix,
    linear_predictor,
    n_parameters,
    nonident_family,
    pack_parameters,
    unpack_parameters,
)
from .objective import (
    ObjectiveConfig,
    PenaltyKind,
    PenaltySpec,
    nll,
    nll_gradient,
    objective_total,
    penalty_value,
    prox,
)
from .optimizer import (
    ConvergenceReport,
    FitResult,
    OptimOptions,
    convergence_report,
    fit,
)
from .tuning import (
    CvConfig,
    CvResult,
    adaptive_weights,
    cv_deviance,
    kfold_split,
    tune_lambda,
)
from .simulation import (
    MetricsSummary,
    ScenarioConfig,
    ScenarioResult,
    TruthSpec,
    compute_metrics,
    gen_design,
    gen_response,
    gen_truth,
    model_from_truth,
    preset_scenarios,
    run_scenario,
    three_flow_template,
)
from .labbe import LabbeCurve, labbe_curve

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FlowregError", "ModelError", "DataError", "ConfigError",
    "OptimizationError", "TuningError", "DiagnosticsError",
    # model
    "FlowKind", "FlowSpec", "ModelSpec", "Dataset", "CANONICAL_FLOW_ORDER",
    "linear_predictor", "apply_flow", "compose_probability",
    "compose_probability_matrix", "nonident_family",
    "n_parameters", "pack_parameters", "unpack_parameters",
    # objective
    "PenaltyKind", "PenaltySpec", "ObjectiveConfig",
    "nll", "nll_gradient", "penalty_value", "prox", "objective_total",
    # optimizer
    "OptimOptions", "FitResult", "ConvergenceReport", "fit", "convergence_report",
    # tuning
    "CvConfig", "CvResult", "kfold_split", "cv_deviance", "tune_lambda",
    "adaptive_weights",
    # simulation
    "ScenarioConfig", "TruthSpec", "MetricsSummary", "ScenarioResult",
    "gen_design", "gen_truth", "gen_response", "compute_metrics",
    "run_scenario", "preset_scenarios", "three_flow_template", "model_from_truth",
    # labbe
    "LabbeCurve", "labbe_curve",
]
