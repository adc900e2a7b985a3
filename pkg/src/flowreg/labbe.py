"""Treated-versus-control probability curves for one exposure shift.

A curve evaluates, for a sweep of control-group probabilities, the
probability after applying the fitted flows' response to changing a
single exposure covariate by ``delta``: each flow containing the
exposure contributes the log-scale increment ``coefficient * delta``,
other flows contribute nothing.  Points above the identity line mean the
shift raises the event probability at that baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import ModelSpec, apply_flow

__all__ = ["LabbeCurve", "labbe_curve"]


def _default_grid() -> np.ndarray:
    return np.linspace(0.01, 0.99, 99)


@dataclass(frozen=True, eq=False)
class LabbeCurve:
    """Paired control/treated probabilities for one exposure shift."""

    p_control: np.ndarray
    p_treated: np.ndarray
    covariate: str
    delta: float

    def __post_init__(self):
        pc = np.asarray(self.p_control, dtype=float).reshape(-1).copy()
        pt = np.asarray(self.p_treated, dtype=float).reshape(-1).copy()
        if pc.size != pt.size:
            raise ConfigError("control and treated grids differ in length")
        if pc.size < 2 or np.any(np.diff(pc) <= 0.0):
            raise ConfigError("control grid must be strictly increasing")
        if pc[0] < 0.01 - 1e-12 or pc[-1] > 0.99 + 1e-12:
            raise ConfigError("control grid must lie within [0.01, 0.99]")
        pc.flags.writeable = False
        pt.flags.writeable = False
        object.__setattr__(self, "p_control", pc)
        object.__setattr__(self, "p_treated", pt)


def labbe_curve(
    model: ModelSpec,
    exposure_index: int,
    covariate: str,
    delta: float,
    grid: np.ndarray | None = None,
) -> LabbeCurve:
    """Curve of treated probability against control probability.

    ``exposure_index`` is the design column whose value changes by
    ``delta`` (in the covariate's own units); the fitted model supplies
    one log-scale increment per flow that includes that column.  Treated
    probabilities are clamped into [0, 1] for plotting.

    Raises
    ------
    ConfigError
        If no flow in the model includes the exposure column.
    """
    increments = []
    for f in model.flows:
        if exposure_index in f.covariate_indices:
            j = f.covariate_indices.index(exposure_index)
            increments.append((f.kind, float(f.coefficients[j]) * float(delta)))
    if not increments:
        raise ConfigError(
            f"exposure covariate {covariate!r} (column {exposure_index}) "
            "appears in no flow of the model"
        )
    p_control = _default_grid() if grid is None else np.asarray(grid, dtype=float)
    p = p_control.copy()
    for kind, v in increments:
        p = apply_flow(p, kind, v)
    p_treated = np.clip(p, 0.0, 1.0)
    return LabbeCurve(
        p_control=p_control, p_treated=p_treated, covariate=covariate, delta=delta
    )
