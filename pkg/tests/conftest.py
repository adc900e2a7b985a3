"""Shared oracles and instance builders.

The oracles here are deliberately independent of the library's closed
forms: the prox oracle is a golden-section search on the defining
objective, and the logistic oracle is a plain Newton solver.  Expected
values frozen in the tests were computed with these.
"""

import numpy as np
import pytest

from flowreg import (
    Dataset,
    FlowKind,
    FlowSpec,
    ModelSpec,
    PenaltyKind,
    n_parameters,
    three_flow_template,
    unpack_parameters,
)
from flowreg.objective import nll


def prox_oracle(kind, z, gamma, alpha=0.5, weight=1.0):
    """Golden-section minimization of 1/2 (x - z)^2 + gamma * psi(x).

    psi follows the penalty definition for a scalar coordinate; the
    objective is convex, so the search bracket [-(|z|+gamma+2), |z|+gamma+2]
    always contains the minimizer.
    """
    z = float(z)

    def psi(x):
        if kind is PenaltyKind.NONE:
            return 0.0
        if kind is PenaltyKind.L1:
            return abs(x)
        if kind is PenaltyKind.L2:
            return x * x
        if kind is PenaltyKind.ELASTIC_NET:
            return alpha * abs(x) + (1.0 - alpha) * x * x
        return weight * abs(x)

    def obj(x):
        return 0.5 * (x - z) ** 2 + gamma * psi(x)

    lo, hi = -(abs(z) + gamma + 2.0), abs(z) + gamma + 2.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(120):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = obj(d)
    return 0.5 * (a + b)


def newton_logistic(X, y, add_intercept=True, iters=50):
    """Plain logistic MLE by Newton-Raphson; independent of flowreg."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
    beta = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        grad = X.T @ (p - y)
        w = p * (1.0 - p)
        hess = X.T @ (X * w[:, None])
        step = np.linalg.solve(hess + 1e-12 * np.eye(X.shape[1]), grad)
        beta = beta - step
        if np.max(np.abs(step)) < 1e-13:
            break
    return beta


def fd_gradient(template, data, config, vec, h=1e-6):
    """Central finite differences of the mean NLL at a flat vector."""
    vec = np.asarray(vec, dtype=float)
    out = np.zeros_like(vec)
    for j in range(vec.size):
        e = np.zeros_like(vec)
        e[j] = h
        hi = nll(unpack_parameters(template, vec + e), data, config)
        lo = nll(unpack_parameters(template, vec - e), data, config)
        out[j] = (hi - lo) / (2.0 * h)
    return out


def random_instance(rng, n=40, p=3, coef_scale=0.3):
    """Random dataset + template + interior parameter vector (no clamps)."""
    X = rng.standard_normal((n, p))
    y = (rng.random(n) < 0.5).astype(float)
    data = Dataset(X, y)
    template = three_flow_template(p)
    vec = rng.normal(0.0, coef_scale, n_parameters(template))
    return data, template, vec


def intercept_only_model(theta, gamma, delta):
    """Three intercept-only flows with the given scaling factors."""
    return ModelSpec(p0=0.5, flows=(
        FlowSpec(FlowKind.ODDS, has_intercept=True, intercept=float(np.log(theta))),
        FlowSpec(FlowKind.RISK1, has_intercept=True, intercept=float(np.log(gamma))),
        FlowSpec(FlowKind.RISK0, has_intercept=True, intercept=float(np.log(delta))),
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
