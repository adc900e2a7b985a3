"""Flow algebra on Bernoulli probabilities and composed binary models.

A *flow* acts on an event probability ``p`` by scaling one of three
one-dimensional summaries by ``exp(v)``:

- odds flow (``FlowKind.ODDS``):        p/(1-p)  ->  exp(v) * p/(1-p)
- risk flow (``FlowKind.RISK1``):       p        ->  exp(v) * p
- survival flow (``FlowKind.RISK0``):   1-p      ->  exp(v) * (1-p)

Each action is an additive group action of the reals: applying ``v`` and
then ``v'`` equals applying ``v + v'``, and ``v = 0`` is the identity.
The risk and survival flows can push ``p`` outside ``[0, 1]``; results
are returned unclamped so the group axioms hold exactly.  Clamping into
``(0, 1)`` is the job of the likelihood layer (:mod:`flowreg.objective`).

A :class:`ModelSpec` composes one flow per kind, each driven by a linear
predictor in the covariates, on top of a reference probability ``p0``.
For the canonical order ``[ODDS, RISK1, RISK0]`` with predictors
``a, b, c`` this gives the closed form

    p = 1 - (1 - exp(b) * sigma(a + logit(p0))) * exp(c)

where ``sigma`` is the logistic function.  Distinct risk/survival
parameters can produce identical probabilities (see
:func:`nonident_family`), which is the instability that the penalties in
:mod:`flowreg.objective` are designed to break.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from .errors import DataError, ModelError

__all__ = [
    "FlowKind",
    "FlowSpec",
    "ModelSpec",
    "Dataset",
    "CANONICAL_FLOW_ORDER",
    "linear_predictor",
    "apply_flow",
    "compose_probability",
    "compose_probability_matrix",
    "nonident_family",
    "n_parameters",
    "pack_parameters",
    "unpack_parameters",
    "parameter_slices",
]


class FlowKind(enum.Enum):
    """The three flow actions on a binary outcome probability."""

    ODDS = "odds"
    RISK1 = "risk1"
    RISK0 = "risk0"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: Order used by every built-in preset: odds first, then risk, then survival.
CANONICAL_FLOW_ORDER = (FlowKind.ODDS, FlowKind.RISK1, FlowKind.RISK0)


def _readonly(a) -> np.ndarray:
    out = np.asarray(a, dtype=float).reshape(-1).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class FlowSpec:
    """One flow: its kind, intercept, and covariate coefficients.

    ``coefficients[j]`` multiplies design column ``covariate_indices[j]``;
    the intercept and coefficients live on the log scale of the flow's
    scaling factor.  ``intercept`` must be 0 when ``has_intercept`` is
    false, so a flow is fully described by its free parameters.
    """

    kind: FlowKind
    has_intercept: bool = False
    intercept: float = 0.0
    covariate_indices: tuple[int, ...] = ()
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        idx = tuple(int(i) for i in self.covariate_indices)
        coef = _readonly(self.coefficients)
        object.__setattr__(self, "covariate_indices", idx)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))
        if len(idx) != coef.size:
            raise ModelError(
                f"{self.kind.value} flow: {len(idx)} covariate indices but "
                f"{coef.size} coefficients"
            )
        if any(i < 0 for i in idx):
            raise ModelError(f"{self.kind.value} flow: negative covariate index")
        if not self.has_intercept and self.intercept != 0.0:
            raise ModelError(
                f"{self.kind.value} flow: intercept={self.intercept} but "
                "has_intercept is false"
            )
        if not np.isfinite(self.intercept):
            raise ModelError(f"{self.kind.value} flow: non-finite intercept")
        if coef.size and not np.all(np.isfinite(coef)):
            raise ModelError(f"{self.kind.value} flow: non-finite coefficient")

    @property
    def n_params(self) -> int:
        """Free parameters: intercept (if present) plus coefficients."""
        return int(self.has_intercept) + len(self.covariate_indices)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A reference probability plus an ordered list of flows.

    At most one flow per kind; ``p0`` must lie strictly inside (0, 1).
    """

    p0: float = 0.5
    flows: tuple[FlowSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p0", float(self.p0))
        object.__setattr__(self, "flows", tuple(self.flows))
        if not (0.0 < self.p0 < 1.0):
            raise ModelError(f"p0 must be in (0, 1), got {self.p0}")
        kinds = [f.kind for f in self.flows]
        if len(kinds) != len(set(kinds)):
            raise ModelError("at most one flow per kind is allowed")

    def flow(self, kind: FlowKind) -> FlowSpec | None:
        """The flow of the given kind, or None if absent."""
        for f in self.flows:
            if f.kind is kind:
                return f
        return None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix, binary outcome, and column names.

    ``X`` is n-by-d with finite entries; ``y`` holds 0/1 values.  Names
    default to ``x1 .. xd`` when not supplied.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"X must be at least 1x1, got shape {X.shape}")
        if y.size != n:
            raise DataError(f"y has length {y.size}, expected {n}")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DataError("y entries must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(d))
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        X = X.copy()
        X.flags.writeable = False
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def linear_predictor(flow: FlowSpec, x) -> float:
    """Evaluate ``intercept + sum_j coefficients[j] * x[indices[j]]``.

    Raises
    ------
    ModelError
        If ``x`` is too short for the flow's covariate indices.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if flow.covariate_indices:
        top = max(flow.covariate_indices)
        if top >= x.size:
            raise ModelError(
                f"{flow.kind.value} flow refers to covariate index {top} "
                f"but x has length {x.size}"
            )
        val = flow.intercept + float(
            flow.coefficients @ x[list(flow.covariate_indices)]
        )
    else:
        val = flow.intercept
    return float(val)


def apply_flow(p, kind: FlowKind, v):
    """Apply one flow with log-scale amount ``v`` to probability ``p``.

    Accepts scalars or arrays (broadcast together).  The odds flow is
    computed as ``sigma(logit(p) + v)``, which is stable for any ``v``;
    the risk/survival flows are plain rescalings and may leave [0, 1].
    No clamping is applied here.
    """
    p_arr = np.asarray(p, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind is FlowKind.ODDS:
            out = expit(logit(p_arr) + v_arr)
        elif kind is FlowKind.RISK1:
            out = p_arr * np.exp(v_arr)
        else:
            out = 1.0 - (1.0 - p_arr) * np.exp(v_arr)
    if np.isscalar(p) and np.isscalar(v):
        return float(out)
    return out


def compose_probability(model: ModelSpec, x) -> float:
    """Fold the model's flows over ``p0`` at one covariate vector.

    Returns the composed event probability; risk/survival flows may
    produce values outside [0, 1], which are returned as-is.
    """
    p = model.p0
    for f in model.flows:
        p = apply_flow(p, f.kind, linear_predictor(f, x))
    return float(p)


def compose_probability_matrix(model: ModelSpec, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`compose_probability` over the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    etas = flow_predictors(model, X)
    p = np.full(X.shape[0], model.p0)
    for f, eta in zip(model.flows, etas):
        p = apply_flow(p, f.kind, eta)
    return p


def flow_predictors(model: ModelSpec, X: np.ndarray) -> list[np.ndarray]:
    """Per-flow linear predictors over all rows of ``X`` (model order)."""
    n, d = X.shape
    etas = []
    for f in model.flows:
        if f.covariate_indices:
            top = max(f.covariate_indices)
            if top >= d:
                raise ModelError(
                    f"{f.kind.value} flow refers to covariate index {top} "
                    f"but X has {d} columns"
                )
            eta = X[:, list(f.covariate_indices)] @ f.coefficients + f.intercept
        else:
            eta = np.full(n, f.intercept)
        etas.append(eta)
    return etas


def nonident_family(theta: float, gamma_grid, p_star: float) -> list[tuple[float, float]]:
    """Risk/survival factor pairs that all compose to the same probability.

    For a single design point with odds factor ``theta`` (so the
    post-odds probability is ``q = theta / (1 + theta)``), every pair
    ``(gamma, delta)`` with ``delta = (1 - p_star) / (1 - gamma * q)``
    yields the composed probability ``p_star`` exactly.  This is the
    flat direction of the single-point likelihood: the data cannot
    distinguish members of the family.

    Parameters
    ----------
    theta : float
        Odds scaling factor, > 0.
    gamma_grid : array-like
        Risk scaling factors to pair up, each > 0 with ``gamma * q < 1``.
    p_star : float
        Target composed probability, in (0, 1).

    Returns
    -------
    list of (gamma, delta) pairs.
    """
    theta = float(theta)
    p_star = float(p_star)
    if theta <= 0.0:
        raise ModelError(f"theta must be > 0, got {theta}")
    if not (0.0 < p_star < 1.0):
        raise ModelError(f"p_star must be in (0, 1), got {p_star}")
    q = theta / (1.0 + theta)
    pairs = []
    for g in np.asarray(gamma_grid, dtype=float).reshape(-1):
        if g <= 0.0:
            raise ModelError(f"gamma must be > 0, got {g}")
        if g * q >= 1.0:
            raise ModelError(
                f"gamma={g} with theta={theta} gives gamma*q={g * q} >= 1; "
                "outside the family's domain"
            )
        pairs.append((float(g), float((1.0 - p_star) / (1.0 - g * q))))
    return pairs


# ---------------------------------------------------------------------------
# Flat parameter vector layout
#
# Optimization works on one flat vector: flows in model order, and within
# each flow the intercept (if present) followed by the coefficients.
# ---------------------------------------------------------------------------


def parameter_slices(model: ModelSpec) -> list[tuple[FlowSpec, slice]]:
    """Per-flow slices into the flat parameter vector."""
    out = []
    start = 0
    for f in model.flows:
        out.append((f, slice(start, start + f.n_params)))
        start += f.n_params
    return out


def n_parameters(model: ModelSpec) -> int:
    """Length of the flat parameter vector."""
    return sum(f.n_params for f in model.flows)


def pack_parameters(model: ModelSpec) -> np.ndarray:
    """Flatten the model's intercepts and coefficients into one vector."""
    parts = []
    for f in model.flows:
        if f.has_intercept:
            parts.append([f.intercept])
        parts.append(f.coefficients)
    if not parts:
        return np.zeros(0)
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def unpack_parameters(template: ModelSpec, vector) -> ModelSpec:
    """Rebuild a model from ``template``'s structure and a flat vector."""
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if vector.size != n_parameters(template):
        raise ModelError(
            f"parameter vector has length {vector.size}, expected "
            f"{n_parameters(template)}"
        )
    flows = []
    for f, sl in parameter_slices(template):
        block = vector[sl]
        if f.has_intercept:
            flows.append(replace(f, intercept=float(block[0]), coefficients=block[1:]))
        else:
            flows.append(replace(f, coefficients=block))
    return replace(template, flows=tuple(flows))
