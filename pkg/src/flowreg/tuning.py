"""Cross-validated selection of per-flow penalty strengths.

The selection criterion is the mean held-out negative log-likelihood
("deviance" below, equal to deviance / 2n).  Strengths for several flows
are tuned by coordinate descent: sweep the flows in canonical order, and
for each flow scan the whole grid while holding the other flows' values
fixed.  Ties prefer the larger strength, and every flow starts at the
top of the grid, so the search is parsimony-first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, OptimizationError, TuningError
from .model import CANONICAL_FLOW_ORDER, Dataset, FlowKind, ModelSpec
from .objective import ObjectiveConfig, nll
from .optimizer import FitResult, OptimOptions, fit

__all__ = [
    "CvConfig",
    "CvPoint",
    "CvResult",
    "kfold_split",
    "cv_deviance",
    "tune_lambda",
    "adaptive_weights",
    "config_with_lambdas",
]


def _default_grid() -> np.ndarray:
    return np.logspace(-4.0, 2.0, 20)


@dataclass(frozen=True, eq=False)
class CvConfig:
    """Fold count, strength grid, and sweep budget for tuning."""

    folds: int = 5
    lambda_grid: np.ndarray = field(default_factory=_default_grid)
    seed: int = 0
    max_sweeps: int = 3

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float).reshape(-1).copy()
        grid.flags.writeable = False
        object.__setattr__(self, "lambda_grid", grid)
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if grid.size < 1 or np.any(grid <= 0.0):
            raise ConfigError("lambda grid must be positive")
        if np.any(np.diff(grid) <= 0.0):
            raise ConfigError("lambda grid must be strictly increasing")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class CvPoint:
    """One evaluated grid point: which flow was scanned, at what strength."""

    sweep: int
    flow: FlowKind
    lam: float
    deviance: float


@dataclass
class CvResult:
    """Selected strengths plus the full scan history."""

    best_lambdas: dict[FlowKind, float]
    cv_curve: list[CvPoint]
    fold_assignments: np.ndarray


def kfold_split(n: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic shuffled fold assignment with sizes differing by <= 1."""
    if folds < 2:
        raise ConfigError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise ConfigError(f"folds={folds} exceeds n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assign = np.empty(n, dtype=int)
    assign[perm] = np.arange(n) % folds
    return assign


def config_with_lambdas(
    config: ObjectiveConfig, lambdas: dict[FlowKind, float]
) -> ObjectiveConfig:
    """Copy of ``config`` with the given flows' strengths replaced."""
    penalties = dict(config.penalties)
    for kind, lam in lambdas.items():
        base = config.penalty_for(kind)
        penalties[kind] = replace(base, lam=float(lam))
    return replace(config, penalties=penalties)


def cv_deviance(
    data: Dataset,
    template: ModelSpec,
    config: ObjectiveConfig,
    options: OptimOptions,
    lambdas: dict[FlowKind, float],
    cv: CvConfig,
) -> float:
    """Mean held-out NLL over the folds at the given strengths.

    Each fold's model is fit on the complementary data (single zero
    start) and scored on the held-out rows; the fold means are averaged
    in fold order.
    """
    assign = kfold_split(data.n, cv.folds, cv.seed)
    cfg = config_with_lambdas(config, lambdas) if lambdas else config
    scores = []
    for k in range(cv.folds):
        held = assign == k
        train = Dataset(data.X[~held], data.y[~held], data.feature_names)
        test = Dataset(data.X[held], data.y[held], data.feature_names)
        try:
            result = fit(train, template, cfg, options)
        except OptimizationError as exc:
            raise TuningError(f"fold {k}: {exc}") from exc
        scores.append(nll(result.model, test, cfg))
    return float(np.mean(scores))


def tune_lambda(
    data: Dataset,
    template: ModelSpec,
    config: ObjectiveConfig,
    options: OptimOptions,
    cv: CvConfig,
    penalized_flows: set[FlowKind],
) -> CvResult:
    """Coordinate descent over per-flow strengths on the CV deviance.

    Flows are swept in canonical order; each scan evaluates the whole
    grid for one flow with the others held fixed.  Sweeping stops when a
    full pass changes nothing or ``cv.max_sweeps`` is reached.  Repeated
    strength combinations are cached, so a confirming sweep is cheap.
    """
    if not penalized_flows:
        raise ConfigError("penalized_flows must be non-empty")
    order = [k for k in CANONICAL_FLOW_ORDER if k in penalized_flows]
    grid = cv.lambda_grid
    current = {k: float(grid[-1]) for k in order}
    cache: dict[tuple, float] = {}
    curve: list[CvPoint] = []

    def deviance_at(lams: dict[FlowKind, float]) -> float:
        key = tuple(lams[k] for k in order)
        if key not in cache:
            cache[key] = cv_deviance(data, template, config, options, lams, cv)
        return cache[key]

    for sweep in range(1, cv.max_sweeps + 1):
        changed = False
        for flow in order:
            best_lam, best_dev = None, np.inf
            for lam in grid:
                trial = dict(current)
                trial[flow] = float(lam)
                dev = deviance_at(trial)
                curve.append(CvPoint(sweep, flow, float(lam), dev))
                if dev <= best_dev:  # ties resolve to the larger strength
                    best_lam, best_dev = float(lam), dev
            if best_lam != current[flow]:
                current[flow] = best_lam
                changed = True
        if not changed:
            break

    return CvResult(
        best_lambdas=current,
        cv_curve=curve,
        fold_assignments=kfold_split(data.n, cv.folds, cv.seed),
    )


def adaptive_weights(
    initial: FitResult, exponent: float = 1.0, floor: float = 1e-4
) -> dict[FlowKind, np.ndarray]:
    """Per-flow weights ``1 / max(|coef|, floor) ** exponent``.

    ``initial`` should be a stable pilot fit (ridge works well); the
    floor keeps weights finite where the pilot says exactly zero.
    """
    if exponent <= 0.0:
        raise ConfigError(f"exponent must be > 0, got {exponent}")
    if floor <= 0.0:
        raise ConfigError(f"floor must be > 0, got {floor}")
    out = {}
    for f in initial.model.flows:
        out[f.kind] = 1.0 / np.maximum(np.abs(f.coefficients), floor) ** exponent
    return out
