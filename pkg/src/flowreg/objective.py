"""Likelihood, penalties, and proximal operators for composed models.

The smooth part is the mean negative log-likelihood of the composed
probability, with probabilities clamped into ``[eps, 1 - eps]`` before
taking logs (risk/survival flows can leave [0, 1]; the clamp keeps the
objective finite and contributes zero gradient at clamped rows).  The
non-smooth part is a sum of per-flow penalties, each with its own kind
and strength, evaluated on covariate coefficients only unless
``penalize_intercepts`` is set.

Averaging (rather than summing) the log-likelihood makes penalty
strengths comparable across sample sizes, which keeps one lambda grid
usable for every fold size during cross-validation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import ConfigError
from .model import (
    Dataset,
    FlowKind,
    FlowSpec,
    ModelSpec,
    compose_probability_matrix,
    flow_predictors,
)

__all__ = [
    "PenaltyKind",
    "PenaltySpec",
    "ObjectiveConfig",
    "nll",
    "nll_gradient",
    "penalty_value",
    "prox",
    "objective_total",
    "soft_threshold",
]


class PenaltyKind(enum.Enum):
    """Supported penalty families for a single flow."""

    NONE = "none"
    L1 = "l1"
    L2 = "l2"
    ELASTIC_NET = "elastic_net"
    ADAPTIVE_L1 = "adaptive_l1"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """Penalty kind plus strength for one flow.

    ``alpha`` is the L1 share of the elastic net (ignored otherwise);
    ``weights`` are the per-coefficient multipliers of the weighted L1
    penalty and are required exactly when ``kind`` is ``ADAPTIVE_L1``.
    """

    kind: PenaltyKind = PenaltyKind.NONE
    lam: float = 0.0
    alpha: float = 0.5
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.lam < 0.0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
            if w.size and (not np.all(np.isfinite(w)) or np.any(w < 0.0)):
                raise ConfigError("adaptive weights must be finite and >= 0")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)
        if self.kind is PenaltyKind.ADAPTIVE_L1 and self.weights is None:
            raise ConfigError("adaptive penalty requires weights")
        if self.kind is not PenaltyKind.ADAPTIVE_L1 and self.weights is not None:
            raise ConfigError(f"weights given for non-adaptive kind {self.kind.value}")


_NO_PENALTY = None  # set after class definition


@dataclass(frozen=True, eq=False)
class ObjectiveConfig:
    """Clamp width and per-flow penalties for one objective."""

    clamp_epsilon: float = 1e-9
    penalties: dict[FlowKind, PenaltySpec] = field(default_factory=dict)
    penalize_intercepts: bool = False

    def __post_init__(self):
        object.__setattr__(self, "clamp_epsilon", float(self.clamp_epsilon))
        object.__setattr__(self, "penalties", dict(self.penalties))
        if not (0.0 < self.clamp_epsilon < 1e-3):
            raise ConfigError(
                f"clamp_epsilon must be in (0, 1e-3), got {self.clamp_epsilon}"
            )
        for k, spec in self.penalties.items():
            if not isinstance(k, FlowKind) or not isinstance(spec, PenaltySpec):
                raise ConfigError("penalties must map FlowKind to PenaltySpec")

    def penalty_for(self, kind: FlowKind) -> PenaltySpec:
        global _NO_PENALTY
        if _NO_PENALTY is None:
            _NO_PENALTY = PenaltySpec()
        return self.penalties.get(kind, _NO_PENALTY)


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------


def _clamp_stats(p: np.ndarray, eps: float):
    """Clamped probabilities plus the mask of rows that were clamped.

    Non-finite composed probabilities count as clamped (NaN maps to the
    low bound) so the likelihood stays finite and their gradient
    contribution is dropped.
    """
    bad = np.isnan(p)
    lo = (p < eps) | bad
    hi = (p > 1.0 - eps) & ~bad
    p_t = np.where(lo, eps, np.where(hi, 1.0 - eps, p))
    return p_t, lo | hi


def nll(model: ModelSpec, data: Dataset, config: ObjectiveConfig) -> float:
    """Mean negative log-likelihood of the composed model.

    Composed probabilities are clamped into
    ``[clamp_epsilon, 1 - clamp_epsilon]`` before the logs.
    """
    p = compose_probability_matrix(model, data.X)
    p_t, _ = _clamp_stats(p, config.clamp_epsilon)
    y = data.y
    with np.errstate(invalid="ignore"):
        terms = y * np.log(p_t) + (1.0 - y) * np.log1p(-p_t)
    return float(-terms.mean())


def clamp_count(model: ModelSpec, data: Dataset, config: ObjectiveConfig) -> int:
    """Number of observations whose composed probability gets clamped."""
    p = compose_probability_matrix(model, data.X)
    _, mask = _clamp_stats(p, config.clamp_epsilon)
    return int(mask.sum())


def _compose_with_sensitivities(p0: float, kinds, etas, n: int, need_sens: bool = True):
    """Forward pass: composed p plus d(p)/d(predictor_k) for each flow.

    Accumulates through the composition: each newly applied flow
    contributes its own direct derivative, and rescales the
    sensitivities of the flows already applied by d(p_new)/d(p_old).
    """
    p = np.full(n, p0)
    sens: list[np.ndarray] = []
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for kind, eta in zip(kinds, etas):
            d_p = None
            if kind is FlowKind.ODDS:
                p_new = expit(logit(p) + eta)
                d_eta = p_new * (1.0 - p_new)
                if sens:
                    d_p = d_eta / (p * (1.0 - p))
            elif kind is FlowKind.RISK1:
                ev = np.exp(eta)
                p_new = p * ev
                d_eta = p_new
                d_p = ev
            else:
                ev = np.exp(eta)
                p_new = 1.0 - (1.0 - p) * ev
                d_eta = p_new - 1.0
                d_p = ev
            if need_sens:
                if sens:
                    sens = [s * d_p for s in sens]
                sens.append(d_eta)
            p = p_new
    return p, sens


def _flow_sensitivities(model: ModelSpec, X: np.ndarray):
    """Composed p and per-flow predictor sensitivities for a model."""
    etas = flow_predictors(model, X)
    kinds = [f.kind for f in model.flows]
    return _compose_with_sensitivities(model.p0, kinds, etas, X.shape[0])


def nll_gradient(model: ModelSpec, data: Dataset, config: ObjectiveConfig) -> np.ndarray:
    """Analytic gradient of :func:`nll` as one flat vector.

    Layout matches :func:`flowreg.model.pack_parameters`: flows in model
    order, intercept slot (when present) before the coefficients.
    Observations whose composed probability is clamped contribute zero,
    matching the flat clamp in the objective.
    """
    X, y = data.X, data.y
    n = data.n
    p, sens = _flow_sensitivities(model, X)
    p_t, mask = _clamp_stats(p, config.clamp_epsilon)
    dldp = -y / p_t + (1.0 - y) / (1.0 - p_t)
    dldp = np.where(mask, 0.0, dldp) / n
    parts = []
    for f, s in zip(model.flows, sens):
        w = dldp * s
        w = np.where(np.isfinite(w), w, 0.0)
        if f.has_intercept:
            parts.append([w.sum()])
        if f.covariate_indices:
            parts.append(X[:, list(f.covariate_indices)].T @ w)
    if not parts:
        return np.zeros(0)
    return np.concatenate([np.asarray(b, dtype=float) for b in parts])


# ---------------------------------------------------------------------------
# Penalties and proximal operators
# ---------------------------------------------------------------------------


def _penalized_vector(flow: FlowSpec, spec: PenaltySpec, penalize_intercepts: bool):
    """Coefficient vector the penalty applies to, with aligned weights.

    The intercept joins the penalized block only when requested, and
    carries unit weight under the adaptive penalty.
    """
    v = flow.coefficients
    w = spec.weights
    if spec.kind is PenaltyKind.ADAPTIVE_L1:
        if w is None:
            raise ConfigError(f"{flow.kind.value} flow: adaptive penalty without weights")
        if w.size != v.size:
            raise ConfigError(
                f"{flow.kind.value} flow: {w.size} adaptive weights for "
                f"{v.size} coefficients"
            )
    if penalize_intercepts and flow.has_intercept:
        v = np.concatenate([[flow.intercept], v])
        if w is not None:
            w = np.concatenate([[1.0], w])
    return v, w


def _psi(kind: PenaltyKind, v: np.ndarray, alpha: float, w: np.ndarray | None) -> float:
    if kind is PenaltyKind.NONE:
        return 0.0
    if kind is PenaltyKind.L1:
        return float(np.abs(v).sum())
    if kind is PenaltyKind.L2:
        return float((v**2).sum())
    if kind is PenaltyKind.ELASTIC_NET:
        return float(alpha * np.abs(v).sum() + (1.0 - alpha) * (v**2).sum())
    return float((w * np.abs(v)).sum())


def penalty_value(model: ModelSpec, config: ObjectiveConfig) -> float:
    """Total penalty ``sum_k lambda_k * psi_k(coefficients_k)``."""
    total = 0.0
    for f in model.flows:
        spec = config.penalty_for(f.kind)
        if spec.kind is PenaltyKind.NONE or spec.lam == 0.0:
            continue
        v, w = _penalized_vector(f, spec, config.penalize_intercepts)
        total += spec.lam * _psi(spec.kind, v, spec.alpha, w)
    return float(total)


def soft_threshold(z: np.ndarray, t) -> np.ndarray:
    """Elementwise ``sign(z) * max(|z| - t, 0)``."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox(
    kind: PenaltyKind,
    z,
    gamma: float,
    alpha: float = 0.5,
    weights=None,
) -> np.ndarray:
    """Proximal operator ``argmin_x 1/2 ||x - z||^2 + gamma * psi(x)``.

    ``gamma`` is the effective strength (step size times lambda).
    Closed forms per kind:

    - NONE:         identity
    - L1:           soft threshold at ``gamma``
    - L2:           ``z / (1 + 2 gamma)``
    - ELASTIC_NET:  ``soft_threshold(z, gamma * alpha) / (1 + 2 gamma (1 - alpha))``
    - ADAPTIVE_L1:  per-coordinate soft threshold at ``gamma * weights``
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    gamma = float(gamma)
    if gamma < 0.0:
        raise ConfigError(f"prox strength must be >= 0, got {gamma}")
    if kind is PenaltyKind.NONE:
        return z.copy()
    if kind is PenaltyKind.L1:
        return soft_threshold(z, gamma)
    if kind is PenaltyKind.L2:
        return z / (1.0 + 2.0 * gamma)
    if kind is PenaltyKind.ELASTIC_NET:
        if not (0.0 <= alpha <= 1.0):
            raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
        return soft_threshold(z, gamma * alpha) / (1.0 + 2.0 * gamma * (1.0 - alpha))
    if weights is None:
        raise ConfigError("adaptive prox requires weights")
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != z.size:
        raise ConfigError(f"{w.size} adaptive weights for {z.size} coordinates")
    return soft_threshold(z, gamma * w)


def objective_total(model: ModelSpec, data: Dataset, config: ObjectiveConfig) -> float:
    """Penalized objective: :func:`nll` plus :func:`penalty_value`."""
    return nll(model, data, config) + penalty_value(model, config)
