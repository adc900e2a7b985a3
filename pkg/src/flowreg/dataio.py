"""CSV ingestion, coefficient tables, and the bundled synthetic sample.

Input files are plain RFC-4180-style CSV with a header row.  Numeric
cells parse as floats; the string codes in ``BINARY_TOKENS`` (sex and
yes/no style answers) map to 0/1.  Parse failures raise
:class:`~flowreg.errors.DataError` naming the file line and column.

Continuous covariates can be z-standardized at load time.  A column is
treated as binary — and left untouched — when its raw values are all 0
or 1 after token mapping; zero-variance columns are also left alone.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError
from .model import Dataset, ModelSpec

__all__ = [
    "BINARY_TOKENS",
    "load_csv",
    "write_coefficients_csv",
    "read_coefficients_csv",
    "write_trace_csv",
    "make_synthetic_asthma",
    "SYNTHETIC_SEED",
]

#: String codes accepted in covariate cells (case-insensitive).
BINARY_TOKENS = {
    "female": 1.0,
    "male": 0.0,
    "yes": 1.0,
    "no": 0.0,
}


def _parse_cell(raw: str, line: int, column: str) -> float:
    text = raw.strip()
    try:
        return float(text)
    except ValueError:
        pass
    mapped = BINARY_TOKENS.get(text.lower())
    if mapped is None:
        raise DataError(
            f"line {line}, column {column!r}: cannot parse cell {raw!r}"
        )
    return mapped


def load_csv(
    path,
    outcome: str,
    features: list[str] | None = None,
    standardize: bool = True,
) -> Dataset:
    """Read a CSV into a :class:`~flowreg.model.Dataset`.

    Parameters
    ----------
    path : str or Path
        File with a header row.
    outcome : str
        Name of the 0/1 outcome column.
    features : list of str, optional
        Covariate columns to keep, in order.  Defaults to every
        non-outcome column in header order.
    standardize : bool
        Z-standardize non-binary covariate columns (default on; turn
        off when coefficients should stay in raw covariate units).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if outcome not in header:
            raise DataError(f"{path}: missing outcome column {outcome!r}")
        if features is None:
            features = [h for h in header if h != outcome]
        missing = [c for c in features if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        col_of = {name: header.index(name) for name in header}

        rows_X: list[list[float]] = []
        rows_y: list[float] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"line {line_no}: {len(row)} cells, expected {len(header)}"
                )
            y_val = _parse_cell(row[col_of[outcome]], line_no, outcome)
            if y_val not in (0.0, 1.0):
                raise DataError(
                    f"line {line_no}, column {outcome!r}: outcome must be 0 or 1, "
                    f"got {row[col_of[outcome]]!r}"
                )
            rows_y.append(y_val)
            rows_X.append([_parse_cell(row[col_of[c]], line_no, c) for c in features])

    if not rows_y:
        raise DataError(f"{path}: no data rows")
    X = np.asarray(rows_X, dtype=float)
    y = np.asarray(rows_y, dtype=float)

    if standardize:
        for j in range(X.shape[1]):
            col = X[:, j]
            if np.all((col == 0.0) | (col == 1.0)):
                continue
            sd = col.std()
            if sd == 0.0:
                continue
            X[:, j] = (col - col.mean()) / sd

    return Dataset(X=X, y=y, feature_names=tuple(features))


# ---------------------------------------------------------------------------
# Coefficient tables
# ---------------------------------------------------------------------------

INTERCEPT_TERM = "(intercept)"


def write_coefficients_csv(path, model: ModelSpec, feature_names) -> None:
    """One row per (flow, term); every flow gets an intercept row.

    Flows without an intercept report 0.0 there, so the table always has
    a fixed shape for a given formula.  Estimates are written with
    ``repr`` so reading them back reproduces the exact floats.
    """
    names = list(feature_names)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["flow", "term", "estimate"])
        for f in model.flows:
            writer.writerow([f.kind.value, INTERCEPT_TERM, repr(float(f.intercept))])
            for j, idx in enumerate(f.covariate_indices):
                writer.writerow([f.kind.value, names[idx], repr(float(f.coefficients[j]))])


def read_coefficients_csv(path) -> dict[str, dict[str, float]]:
    """Inverse of :func:`write_coefficients_csv`: flow -> term -> value."""
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["flow", "term", "estimate"]:
            raise DataError(f"{path}: not a coefficients file")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path} line {line_no}: expected 3 cells")
            flow, term, value = row
            out.setdefault(flow, {})[term] = float(value)
    return out


def write_trace_csv(path, trace) -> None:
    """Objective value per iteration (iteration 0 is the start point)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "objective"])
        for t, val in enumerate(np.asarray(trace, dtype=float)):
            writer.writerow([t, repr(float(val))])


# ---------------------------------------------------------------------------
# Synthetic sample (asthma-style schema)
# ---------------------------------------------------------------------------

#: Seed used to generate the CSV bundled under data/.
SYNTHETIC_SEED = 20112012


def make_synthetic_asthma(path, n: int = 1200, seed: int = SYNTHETIC_SEED) -> None:
    """Write a synthetic health-survey sample with the documented schema.

    Columns: age (years), sex (male/female), smoking (yes/no), lead
    (blood lead, ug/dL), bmi, asthma (0/1).  Outcomes are drawn from a
    three-flow model in which lead acts on the risk scale, so the
    bundled file exercises the full fitting pipeline.  Deterministic for
    a given ``(n, seed)``; the repository file uses the defaults.
    """
    rng = np.random.default_rng(seed)
    age = np.round(rng.uniform(5.0, 80.0, n), 1)
    sex = rng.random(n) < 0.52  # True = female
    smoking = rng.random(n) < (0.10 + 0.25 * (age > 20))
    lead = np.round(np.exp(rng.normal(0.33, 0.6, n)), 2)  # mean near 1.67
    bmi = np.round(np.clip(rng.normal(27.0, 6.0, n), 14.0, 60.0), 1)

    def z(v):
        return (v - v.mean()) / v.std()

    odds_eta = (
        -1.9
        - 0.25 * z(age)
        + 0.30 * sex.astype(float)
        + 0.25 * smoking.astype(float)
        + 0.15 * z(bmi)
    )
    q = 1.0 / (1.0 + np.exp(-odds_eta))
    p = np.clip(q * np.exp(0.12 * lead), 1e-9, 1 - 1e-9)
    asthma = (rng.random(n) < p).astype(int)

    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["age", "sex", "smoking", "lead", "bmi", "asthma"])
        for i in range(n):
            writer.writerow([
                repr(float(age[i])),
                "female" if sex[i] else "male",
                "yes" if smoking[i] else "no",
                repr(float(lead[i])),
                repr(float(bmi[i])),
                asthma[i],
            ])
