"""Desk-scale replication study of the three-flow binary model.

The generator draws an AR(1) Gaussian design, a truth in which only the
odds flow and the first risk coefficient are active (the survival flow
is redundant by construction), and Bernoulli outcomes from the composed
probability.  Each method fits the full three-flow model — so the
redundant directions are present and must be dealt with by the penalty —
and is scored on estimation error, selection rates against the known
support, and cross-validated deviance.

Per-flow penalty strengths are tuned once on the first replication and
frozen for the remaining ones (configurable), and every kept fit is the
better of two starts: all zeros and a warm start at a ridge solution.
All randomness is derived from ``base_seed``, so a scenario's output is
a pure function of its configuration.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .errors import ConfigError, OptimizationError, TuningError
from .model import Dataset, FlowKind, FlowSpec, ModelSpec, pack_parameters
from .objective import ObjectiveConfig, PenaltyKind, PenaltySpec
from .optimizer import FitResult, OptimOptions, fit
from .tuning import CvConfig, adaptive_weights, cv_deviance, tune_lambda

__all__ = [
    "METHODS",
    "ScenarioConfig",
    "TruthSpec",
    "MetricsSummary",
    "RepRecord",
    "ScenarioResult",
    "ar1_covariance",
    "gen_design",
    "gen_truth",
    "gen_response",
    "three_flow_template",
    "model_from_truth",
    "compute_metrics",
    "run_scenario",
    "preset_scenarios",
    "write_scenario_csv",
    "SCENARIO_CSV_COLUMNS",
]

#: All supported method names, in reporting order.
METHODS = ("unregularized", "lasso", "ridge", "elastic_net", "adaptive_lasso")

_DEFAULT_METHODS = ("unregularized", "lasso", "ridge", "elastic_net")

#: Ridge strength used for warm starts and adaptive-lasso pilots.
_PILOT_RIDGE_LAM = 0.1

#: Iteration budget for harness fits.  Proximal gradient needs more
#: iterations than a quasi-Newton solver to satisfy the relative-change
#: stopping rule on the weakly identified unregularized problem; with
#: the optimizer default (500) every unregularized replication would be
#: excluded as non-converged.
_HARNESS_MAX_ITERS = 4000

#: Selection threshold: a coefficient counts as selected above this.
SELECTION_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """One simulation cell: size, design factors, and methods to run."""

    name: str
    n: int
    p: int
    rho: float
    snr: float
    replications: int = 30
    base_seed: int = 1234
    methods: tuple[str, ...] = _DEFAULT_METHODS

    def __post_init__(self):
        if self.n < 20:
            raise ConfigError(f"n must be >= 20, got {self.n}")
        if self.p < 2:
            raise ConfigError(f"p must be >= 2, got {self.p}")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError(f"rho must be in [0, 1), got {self.rho}")
        if self.snr <= 0.0:
            raise ConfigError(f"snr must be > 0, got {self.snr}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods: {bad}")


@dataclass(frozen=True, eq=False)
class TruthSpec:
    """Generating coefficients: odds active, one risk entry, survival zero."""

    beta_odds: np.ndarray
    beta_risk1: np.ndarray
    beta_risk0: np.ndarray

    def __post_init__(self):
        for name in ("beta_odds", "beta_risk1", "beta_risk0"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1).copy()
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        p = self.beta_odds.size
        if self.beta_risk1.size != p or self.beta_risk0.size != p:
            raise ConfigError("truth vectors must share one length")
        if np.any(self.beta_risk0 != 0.0):
            raise ConfigError("survival-flow truth must be all zeros")
        nz = np.nonzero(self.beta_risk1)[0]
        if nz.size != 1 or nz[0] != 0 or self.beta_risk1[0] != 0.5:
            raise ConfigError("risk-flow truth must be (0.5, 0, ..., 0)")

    @property
    def p(self) -> int:
        return self.beta_odds.size

    def concatenated(self) -> np.ndarray:
        return np.concatenate([self.beta_odds, self.beta_risk1, self.beta_risk0])


@dataclass
class MetricsSummary:
    """Per-method means over the converged replications."""

    method: str
    estimation_error: float
    tpr: float
    fpr: float
    deviance: float
    nonzero_count: float
    failed_reps: int


@dataclass(frozen=True)
class RepRecord:
    """One replication's metrics for one method."""

    scenario: str
    method: str
    rep: int
    estimation_error: float
    tpr: float
    fpr: float
    deviance: float
    nonzero_count: int
    converged: bool


@dataclass
class ScenarioResult:
    """Everything a scenario produces: summaries, per-rep rows, strengths."""

    config: ScenarioConfig
    summaries: list[MetricsSummary]
    records: list[RepRecord]
    lambdas: dict[str, dict[FlowKind, float]]


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Covariance matrix with entries ``rho ** |i - j|``."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_design(n: int, p: int, rho: float, seed: int) -> np.ndarray:
    """Rows iid N(0, Sigma) with AR(1) covariance, via the lag recursion.

    ``x_1 = z_1`` and ``x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j`` give
    unit marginal variances and correlation ``rho ** |i - j|`` exactly.
    """
    if not (0.0 <= rho < 1.0):
        raise ConfigError(f"rho must be in [0, 1), got {rho}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho**2)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
    return x


def gen_truth(p: int, snr: float, rho: float, seed: int) -> TruthSpec:
    """Draw odds coefficients and rescale to the target predictor variance.

    The odds vector is standard normal, then scaled so the variance of
    the odds linear predictor under the AR(1) design equals ``snr``
    (the quadratic form against the design covariance).  The design
    correlation ``rho`` is required to evaluate that form.
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(p)
    sigma = ar1_covariance(p, rho)
    current = float(raw @ sigma @ raw)
    beta_odds = raw * np.sqrt(snr / current)
    beta_risk1 = np.zeros(p)
    beta_risk1[0] = 0.5
    return TruthSpec(beta_odds=beta_odds, beta_risk1=beta_risk1, beta_risk0=np.zeros(p))


def three_flow_template(p: int, odds_intercept: bool = True) -> ModelSpec:
    """Zero-coefficient three-flow model on ``p`` shared covariates.

    The odds flow gets an intercept; the risk and survival flows do not.
    """
    idx = tuple(range(p))
    zeros = np.zeros(p)
    return ModelSpec(
        p0=0.5,
        flows=(
            FlowSpec(FlowKind.ODDS, has_intercept=odds_intercept,
                     covariate_indices=idx, coefficients=zeros),
            FlowSpec(FlowKind.RISK1, covariate_indices=idx, coefficients=zeros),
            FlowSpec(FlowKind.RISK0, covariate_indices=idx, coefficients=zeros),
        ),
    )


def model_from_truth(truth: TruthSpec) -> ModelSpec:
    """The generating model: canonical order, zero odds intercept."""
    p = truth.p
    idx = tuple(range(p))
    return ModelSpec(
        p0=0.5,
        flows=(
            FlowSpec(FlowKind.ODDS, has_intercept=True, intercept=0.0,
                     covariate_indices=idx, coefficients=truth.beta_odds),
            FlowSpec(FlowKind.RISK1, covariate_indices=idx, coefficients=truth.beta_risk1),
            FlowSpec(FlowKind.RISK0, covariate_indices=idx, coefficients=truth.beta_risk0),
        ),
    )


def gen_response(X: np.ndarray, truth: TruthSpec, seed: int,
                 clamp_epsilon: float = 1e-9) -> np.ndarray:
    """Bernoulli outcomes from the composed (clamped) probability."""
    from .model import compose_probability_matrix

    model = model_from_truth(truth)
    p = compose_probability_matrix(model, np.asarray(X, dtype=float))
    p = np.clip(p, clamp_epsilon, 1.0 - clamp_epsilon)
    rng = np.random.default_rng(seed)
    return (rng.random(p.size) < p).astype(float)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def compute_metrics(fit_result: FitResult, truth: TruthSpec,
                    threshold: float = SELECTION_THRESHOLD) -> dict:
    """Estimation error and selection rates against the known truth.

    Error is the l2 distance between the concatenated covariate
    coefficients (odds, risk, survival — intercepts excluded) and the
    truth.  TPR tracks the single active risk coefficient; FPR is the
    selected fraction of the ``2p - 1`` truly-zero risk/survival
    coefficients.
    """
    m = fit_result.model
    b_odds = m.flow(FlowKind.ODDS).coefficients
    b_r1 = m.flow(FlowKind.RISK1).coefficients
    b_r0 = m.flow(FlowKind.RISK0).coefficients
    est = np.concatenate([b_odds, b_r1, b_r0])
    error = float(np.linalg.norm(est - truth.concatenated()))
    tpr = float(abs(b_r1[0]) > threshold)
    true_zeros = np.concatenate([b_r1[1:], b_r0])
    fpr = float(np.mean(np.abs(true_zeros) > threshold))
    nonzero = int((np.abs(b_r1) > threshold).sum() + (np.abs(b_r0) > threshold).sum())
    return {
        "estimation_error": error,
        "tpr": tpr,
        "fpr": fpr,
        "nonzero_count": nonzero,
    }


# ---------------------------------------------------------------------------
# Scenario runner
# ---------------------------------------------------------------------------

_METHOD_PENALTY = {
    "unregularized": None,
    "lasso": PenaltyKind.L1,
    "ridge": PenaltyKind.L2,
    "elastic_net": PenaltyKind.ELASTIC_NET,
    "adaptive_lasso": PenaltyKind.ADAPTIVE_L1,
}

_EN_ALPHA = 0.5


def _ridge_config(lam: float) -> ObjectiveConfig:
    return ObjectiveConfig(penalties={
        k: PenaltySpec(PenaltyKind.L2, lam=lam) for k in FlowKind
    })


def _method_config(
    method: str,
    lambdas: dict[FlowKind, float] | None,
    weights: dict[FlowKind, np.ndarray] | None = None,
) -> ObjectiveConfig:
    kind = _METHOD_PENALTY[method]
    if kind is None:
        return ObjectiveConfig()
    penalties = {}
    for k in FlowKind:
        lam = 1.0 if lambdas is None else lambdas[k]
        if kind is PenaltyKind.ADAPTIVE_L1:
            penalties[k] = PenaltySpec(kind, lam=lam, weights=weights[k])
        elif kind is PenaltyKind.ELASTIC_NET:
            penalties[k] = PenaltySpec(kind, lam=lam, alpha=_EN_ALPHA)
        else:
            penalties[k] = PenaltySpec(kind, lam=lam)
    return ObjectiveConfig(penalties=penalties)


def _best_of_two_starts(data, template, cfg, options, warm_vector):
    """Zero start vs warm start; keep whichever ends lower."""
    res_zero = fit(data, template, cfg, options)
    res_warm = fit(
        data, template, cfg, dc_replace(options, init_coefficients=warm_vector)
    )
    if res_warm.objective_trace[-1] < res_zero.objective_trace[-1]:
        return res_warm
    return res_zero


def run_scenario(
    config: ScenarioConfig,
    cv: CvConfig | None = None,
    options: OptimOptions | None = None,
    freeze_lambda: bool = True,
) -> ScenarioResult:
    """Run every replication of one scenario and aggregate per method.

    Per replication: generate design, truth, and response from seeds
    derived from ``base_seed``; for each method, tune strengths on the
    first replication (frozen afterwards when ``freeze_lambda``), fit
    with two starts, and score the better fit.  Replications whose kept
    fit did not converge are excluded from the aggregates and counted.
    """
    options = options or OptimOptions(max_iters=_HARNESS_MAX_ITERS)
    cv = cv or CvConfig(seed=config.base_seed * 10000)
    template = three_flow_template(config.p)
    all_flows = set(FlowKind)

    frozen: dict[str, dict[FlowKind, float] | None] = {m: None for m in config.methods}
    records: list[RepRecord] = []
    lambdas_used: dict[str, dict[FlowKind, float]] = {}

    for rep in range(1, config.replications + 1):
        seed_r = config.base_seed * 10000 + rep
        X = gen_design(config.n, config.p, config.rho, seed_r * 10 + 1)
        truth = gen_truth(config.p, config.snr, config.rho, seed_r * 10 + 2)
        y = gen_response(X, truth, seed_r * 10 + 3)
        data = Dataset(X, y)
        rep_cv = CvConfig(folds=cv.folds, lambda_grid=cv.lambda_grid,
                          seed=seed_r, max_sweeps=cv.max_sweeps)

        ridge_pilot = fit(data, template, _ridge_config(_PILOT_RIDGE_LAM), options)
        warm_vector = pack_parameters(ridge_pilot.model)

        for method in config.methods:
            weights = None
            if method == "adaptive_lasso":
                weights = adaptive_weights(ridge_pilot)

            needs_tuning = _METHOD_PENALTY[method] is not None
            if needs_tuning and (frozen[method] is None or not freeze_lambda):
                tuned = tune_lambda(
                    data, template, _method_config(method, None, weights),
                    options, cv, all_flows,
                )
                frozen[method] = tuned.best_lambdas
                lambdas_used.setdefault(method, tuned.best_lambdas)

            cfg = _method_config(method, frozen[method], weights)
            result = _best_of_two_starts(data, template, cfg, options, warm_vector)
            metrics = compute_metrics(result, truth)
            deviance = cv_deviance(data, template, cfg, options, {}, rep_cv)
            records.append(RepRecord(
                scenario=config.name,
                method=method,
                rep=rep,
                estimation_error=metrics["estimation_error"],
                tpr=metrics["tpr"],
                fpr=metrics["fpr"],
                deviance=deviance,
                nonzero_count=metrics["nonzero_count"],
                converged=result.converged,
            ))

    summaries = []
    for method in config.methods:
        rows = [r for r in records if r.method == method]
        kept = [r for r in rows if r.converged]
        failed = len(rows) - len(kept)
        if not kept:
            raise TuningError(
                f"scenario {config.name}: no converged replication for {method}"
            )
        summaries.append(MetricsSummary(
            method=method,
            estimation_error=float(np.mean([r.estimation_error for r in kept])),
            tpr=float(np.mean([r.tpr for r in kept])),
            fpr=float(np.mean([r.fpr for r in kept])),
            deviance=float(np.mean([r.deviance for r in kept])),
            nonzero_count=float(np.mean([r.nonzero_count for r in kept])),
            failed_reps=failed,
        ))

    return ScenarioResult(
        config=config,
        summaries=summaries,
        records=records,
        lambdas=lambdas_used,
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_CANONICAL_N = (100, 500, 1000)

_PRESET_FACTORS = (
    ("reference", dict(p=10, rho=0.5, snr=1.0)),
    ("p5", dict(p=5, rho=0.5, snr=1.0)),
    ("p20", dict(p=20, rho=0.5, snr=1.0)),
    ("rho0", dict(p=10, rho=0.0, snr=1.0)),
    ("rho08", dict(p=10, rho=0.8, snr=1.0)),
    ("snr05", dict(p=10, rho=0.5, snr=0.5)),
    ("snr2", dict(p=10, rho=0.5, snr=2.0)),
    ("worst_case", dict(p=20, rho=0.8, snr=0.5)),
)


def preset_scenarios(
    n: int,
    base_seed: int = 1234,
    replications: int = 30,
    methods: tuple[str, ...] = _DEFAULT_METHODS,
) -> list[ScenarioConfig]:
    """The eight standard scenarios at one sample size.

    A reference cell plus one-factor deviations in dimension,
    correlation, and signal strength, and a worst case combining the
    hard levels of all three.
    """
    if n not in _CANONICAL_N:
        warnings.warn(f"n={n} is not one of the canonical sizes {_CANONICAL_N}")
    return [
        ScenarioConfig(name=name, n=n, base_seed=base_seed,
                       replications=replications, methods=methods, **factors)
        for name, factors in _PRESET_FACTORS
    ]


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

SCENARIO_CSV_COLUMNS = (
    "scenario", "method", "rep", "estimation_error", "tpr", "fpr",
    "deviance", "nonzero_count", "converged",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_scenario_csv(path, records: list[RepRecord]) -> None:
    """One row per (method, replication); see ``SCENARIO_CSV_COLUMNS``."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCENARIO_CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.scenario, r.method, r.rep, _fmt(r.estimation_error),
                _fmt(r.tpr), _fmt(r.fpr), _fmt(r.deviance),
                r.nonzero_count, _fmt(r.converged),
            ])
