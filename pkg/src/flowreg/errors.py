"""Semantic exception hierarchy.

All flowreg errors derive from :class:`FlowregError` so callers can catch
the whole family with one clause.  Value-like problems (bad structure,
bad domain, bad configuration) also derive from ``ValueError``;
runtime failures (optimization, tuning) derive from ``RuntimeError``.
"""


class FlowregError(Exception):
    """Base class for all flowreg errors."""


class ModelError(FlowregError, ValueError):
    """Invalid model structure or out-of-domain model input."""


class DataError(FlowregError, ValueError):
    """Malformed dataset or unparseable input file."""


class ConfigError(FlowregError, ValueError):
    """Invalid penalty, option, or run configuration."""


class OptimizationError(FlowregError, RuntimeError):
    """Optimization could not start or produced no usable iterate."""


class TuningError(FlowregError, RuntimeError):
    """Cross-validation or grid search failed."""


class DiagnosticsError(FlowregError, RuntimeError):
    """A diagnostic was requested on a result that cannot support it."""
