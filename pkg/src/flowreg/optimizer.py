"""Proximal gradient descent with backtracking for the penalized model.

Each iteration takes a gradient step on the smooth (likelihood) part and
then applies the per-flow proximal operator of the non-smooth (penalty)
part — the penalty separates across flows, so the prox is a cheap
block-wise map.  A candidate step of size ``eta`` is accepted when

    F(new) <= F(old) - (c / (2 eta)) * ||new - old||^2

and the step is halved otherwise.  Accepted objective values are
strictly non-increasing by construction, which :func:`fit` also verifies
defensively on every run.

The composed likelihood is not jointly concave in all flows, so the
solver is a descent method to a stationary point, not a certified global
optimizer; callers that worry about local minima should compare fits
from several starts (the simulation harness does).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DiagnosticsError, OptimizationError
from .model import (
    Dataset,
    ModelSpec,
    n_parameters,
    parameter_slices,
    unpack_parameters,
)
from .objective import (
    ObjectiveConfig,
    PenaltyKind,
    _clamp_stats,
    _compose_with_sensitivities,
    _psi,
    prox,
)

__all__ = ["OptimOptions", "FitResult", "ConvergenceReport", "fit", "convergence_report"]

_MIN_STEP = 1e-16


@dataclass(frozen=True)
class OptimOptions:
    """Iteration budget, tolerances, and line-search constants."""

    max_iters: int = 500
    tol: float = 1e-8
    init_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease_c: float = 0.5
    init_coefficients: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ConfigError("tol must be > 0")
        if self.init_step <= 0.0:
            raise ConfigError("init_step must be > 0")
        if not (0.0 < self.shrink < 1.0):
            raise ConfigError("shrink must be in (0, 1)")
        if not (0.0 < self.sufficient_decrease_c < 1.0):
            raise ConfigError("sufficient_decrease_c must be in (0, 1)")


@dataclass
class FitResult:
    """Fitted model plus the optimizer's trace and diagnostics.

    ``objective_trace[0]`` is the objective at initialization and each
    later entry is one accepted iterate.  ``clamp_count`` is the number
    of observations clamped at the final iterate.
    """

    model: ModelSpec
    objective_trace: np.ndarray
    converged: bool
    iterations: int
    clamp_count: int
    final_step: float
    line_search_failed: bool = False


class _FitProblem:
    """Pre-indexed objective/gradient/prox evaluations on a flat vector.

    Design blocks are sliced out of X once and the flow structure is
    flattened into plain tuples, so the per-iteration work is a handful
    of matrix-vector products with no model objects in the loop.
    """

    def __init__(self, data: Dataset, template: ModelSpec, config: ObjectiveConfig):
        self.y = data.y
        self.n = data.n
        self.p0 = template.p0
        self.eps = config.clamp_epsilon
        self.size = n_parameters(template)
        # Per flow: (kind, slice into vector, has_intercept, X block or None)
        self.flows = []
        for f, sl in parameter_slices(template):
            block = None
            if f.covariate_indices:
                top = max(f.covariate_indices)
                if top >= data.d:
                    raise ConfigError(
                        f"{f.kind.value} flow refers to covariate index {top} "
                        f"but X has {data.d} columns"
                    )
                block = np.ascontiguousarray(data.X[:, list(f.covariate_indices)])
            self.flows.append((f.kind, sl, f.has_intercept, block))
        self.kinds = [k for k, _, _, _ in self.flows]
        # Per penalized flow: (slice of penalized coords, kind, lam, alpha, weights)
        self.penalty_plan = []
        for f, sl in parameter_slices(template):
            spec = config.penalty_for(f.kind)
            if spec.kind is PenaltyKind.NONE or spec.lam == 0.0:
                continue
            start = sl.start
            if f.has_intercept and not config.penalize_intercepts:
                start += 1
            weights = spec.weights
            if config.penalize_intercepts and f.has_intercept and weights is not None:
                weights = np.concatenate([[1.0], weights])
            if weights is not None and weights.size != sl.stop - start:
                raise ConfigError(
                    f"{f.kind.value} flow: {weights.size} adaptive weights for "
                    f"{sl.stop - start} penalized coordinates"
                )
            self.penalty_plan.append(
                (slice(start, sl.stop), spec.kind, spec.lam, spec.alpha, weights)
            )
        self.template = template

    def model_at(self, vec: np.ndarray) -> ModelSpec:
        return unpack_parameters(self.template, vec)

    def _etas(self, vec: np.ndarray) -> list[np.ndarray]:
        etas = []
        for _, sl, has_int, block in self.flows:
            pos = sl.start
            if has_int:
                intercept = vec[pos]
                pos += 1
            else:
                intercept = 0.0
            if block is not None:
                etas.append(block @ vec[pos : sl.stop] + intercept)
            else:
                etas.append(np.full(self.n, intercept))
        return etas

    def objective(self, vec: np.ndarray) -> tuple[float, int]:
        """Penalized objective and clamp count at one parameter vector."""
        p, _ = _compose_with_sensitivities(
            self.p0, self.kinds, self._etas(vec), self.n, need_sens=False
        )
        p_t, mask = _clamp_stats(p, self.eps)
        y = self.y
        with np.errstate(invalid="ignore"):
            terms = y * np.log(p_t) + (1.0 - y) * np.log1p(-p_t)
        total = float(-terms.mean())
        for sl, kind, lam, alpha, weights in self.penalty_plan:
            total += lam * _psi(kind, vec[sl], alpha, weights)
        return total, int(mask.sum())

    def gradient(self, vec: np.ndarray) -> np.ndarray:
        p, sens = _compose_with_sensitivities(
            self.p0, self.kinds, self._etas(vec), self.n
        )
        p_t, mask = _clamp_stats(p, self.eps)
        y = self.y
        dldp = -y / p_t + (1.0 - y) / (1.0 - p_t)
        dldp = np.where(mask, 0.0, dldp) / self.n
        grad = np.zeros(self.size)
        for (_, sl, has_int, block), s in zip(self.flows, sens):
            w = dldp * s
            if not np.all(np.isfinite(w)):
                w = np.where(np.isfinite(w), w, 0.0)
            pos = sl.start
            if has_int:
                grad[pos] = w.sum()
                pos += 1
            if block is not None:
                grad[pos : sl.stop] = block.T @ w
        return grad

    def prox(self, vec: np.ndarray, eta: float) -> np.ndarray:
        out = vec.copy()
        for sl, kind, lam, alpha, weights in self.penalty_plan:
            out[sl] = prox(kind, vec[sl], eta * lam, alpha, weights)
        return out


def fit(
    data: Dataset,
    template: ModelSpec,
    config: ObjectiveConfig,
    options: OptimOptions = OptimOptions(),
) -> FitResult:
    """Minimize the penalized objective over the template's parameters.

    ``template`` fixes the flow structure (kinds, intercept flags,
    covariate index sets); its parameter values are ignored unless
    ``options.init_coefficients`` is None and you want a zero start.
    The trial step grows at most twofold per outer iteration and is
    halved within an iteration until sufficient decrease holds; the loop
    stops once the relative objective change drops below ``options.tol``
    or the iteration budget is exhausted.

    Raises
    ------
    OptimizationError
        If the objective is non-finite at the starting point.
    """
    problem = _FitProblem(data, template, config)
    if options.init_coefficients is None:
        x = np.zeros(problem.size)
    else:
        x = np.asarray(options.init_coefficients, dtype=float).reshape(-1).copy()
        if x.size != problem.size:
            raise ConfigError(
                f"init_coefficients has length {x.size}, expected {problem.size}"
            )

    F, clamps = problem.objective(x)
    if not np.isfinite(F):
        raise OptimizationError(f"objective is not finite at initialization ({F})")

    trace = [F]
    c = options.sufficient_decrease_c
    prev_step = options.init_step
    converged = False
    ls_failed = False

    for _ in range(options.max_iters):
        g = problem.gradient(x)
        eta = min(options.init_step, 2.0 * prev_step)
        accepted = False
        while eta >= _MIN_STEP:
            cand = problem.prox(x - eta * g, eta)
            F_cand, clamps_cand = problem.objective(cand)
            diff = cand - x
            bound = F - (c / (2.0 * eta)) * float(diff @ diff)
            if np.isfinite(F_cand) and F_cand <= bound:
                accepted = True
                break
            eta *= options.shrink
        if not accepted:
            ls_failed = True
            break
        rel_change = abs(F_cand - F) / max(1.0, abs(F))
        x, F, clamps = cand, F_cand, clamps_cand
        trace.append(F)
        prev_step = eta
        if rel_change < options.tol:
            converged = True
            break

    trace_arr = np.asarray(trace)
    if np.any(np.diff(trace_arr) > 1e-12):
        raise OptimizationError("objective trace increased beyond tolerance")

    return FitResult(
        model=problem.model_at(x),
        objective_trace=trace_arr,
        converged=converged,
        iterations=len(trace) - 1,
        clamp_count=clamps,
        final_step=prev_step,
        line_search_failed=ls_failed,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Rate diagnostics computed from an objective trace.

    ``t_gap`` is ``t * (F_t - F_final)`` for ``t = 1 .. T-1``; a bounded
    sequence is consistent with an O(1/t) objective gap.  A negative
    ``log_gap_slope`` (least-squares slope of ``log(F_t - F_final)``
    against ``t``) indicates a geometric decay, as expected when every
    flow carries a strictly convex penalty.
    """

    iterations: int
    t_gap: np.ndarray
    t_gap_max: float
    t_gap_median: float
    log_gap_slope: float


def convergence_report(result: FitResult) -> ConvergenceReport:
    """Compute rate diagnostics; needs at least 10 iterations."""
    if result.iterations < 10:
        raise DiagnosticsError(
            f"convergence diagnostics need >= 10 iterations, got {result.iterations}"
        )
    trace = result.objective_trace
    final = trace[-1]
    gaps = trace[:-1] - final
    t = np.arange(trace.size - 1)
    t_gap = (t * gaps)[1:]
    slope = float(np.polyfit(t, np.log(gaps + 1e-15), 1)[0])
    return ConvergenceReport(
        iterations=result.iterations,
        t_gap=t_gap,
        t_gap_max=float(t_gap.max()),
        t_gap_median=float(np.median(t_gap)),
        log_gap_slope=slope,
    )
