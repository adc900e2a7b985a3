"""Command-line interface: fit, cv, simulate, labbe, demo-nonident.

Flags can also be supplied through ``--config FILE`` where the file
holds one ``key=value`` per line (``#`` comments allowed); flags given
on the command line override file entries.  ``--seed`` falls back to the
``RBC_SEED`` environment variable, then to 0.

Exit codes: 0 success, 1 usage error, 2 data error, 3 optimization
failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .dataio import (
    load_csv,
    write_coefficients_csv,
    write_trace_csv,
)
from .errors import (
    ConfigError,
    DataError,
    FlowregError,
    ModelError,
    OptimizationError,
    TuningError,
)
from .labbe import labbe_curve
from .model import Dataset, FlowKind, FlowSpec, ModelSpec, nonident_family
from .objective import ObjectiveConfig, PenaltyKind, PenaltySpec, nll
from .optimizer import OptimOptions, fit
from .simulation import (
    METHODS,
    preset_scenarios,
    run_scenario,
    write_scenario_csv,
)
from .svgplot import box_chart, line_chart, write_svg
from .tuning import (
    CvConfig,
    adaptive_weights,
    config_with_lambdas,
    tune_lambda,
)

__all__ = ["main"]

#: Default model formula applied when the input has these columns and no
#: flow flags are given: all five covariates (plus intercept) on the
#: odds flow, lead alone on the risk and survival flows.
DEFAULT_FORMULA_COLUMNS = ("age", "sex", "smoking", "lead", "bmi")
DEFAULT_EXPOSURE = "lead"

_PILOT_RIDGE_LAM = 0.1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

_BOOL_KEYS = {"standardize"}


def _read_config_file(path) -> list[str]:
    args: list[str] = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise _UsageError(f"{path} line {line_no}: expected key=value")
        key, value = (part.strip() for part in text.split("=", 1))
        if key in _BOOL_KEYS:
            truthy = value.lower() in ("1", "true", "yes", "on")
            args.append(f"--{key}" if truthy else f"--no-{key}")
        else:
            args.extend([f"--{key}", value])
    return args


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise _UsageError("--config requires a file path")
    file_args = _read_config_file(argv[i + 1])
    rest = argv[:i] + argv[i + 2 :]
    if not rest:
        raise _UsageError("--config requires a subcommand")
    return [rest[0]] + file_args + rest[1:]


def _split_names(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def _resolve_seed(ns) -> int:
    if getattr(ns, "seed", None) is not None:
        return int(ns.seed)
    env = os.environ.get("RBC_SEED")
    return int(env) if env else 0


def _outdir(ns) -> str:
    os.makedirs(ns.outdir, exist_ok=True)
    return ns.outdir


# ---------------------------------------------------------------------------
# Model construction from flags
# ---------------------------------------------------------------------------


def _resolve_formula(ns, names: tuple[str, ...]):
    """Per-flow covariate name lists and intercept flags from flags."""
    odds = _split_names(getattr(ns, "odds", None))
    risk1 = _split_names(getattr(ns, "risk1", None))
    risk0 = _split_names(getattr(ns, "risk0", None))
    if not (odds or risk1 or risk0):
        if all(col in names for col in DEFAULT_FORMULA_COLUMNS):
            odds = list(DEFAULT_FORMULA_COLUMNS)
            risk1 = [DEFAULT_EXPOSURE]
            risk0 = [DEFAULT_EXPOSURE]
        else:
            raise _UsageError(
                "no --odds/--risk1/--risk0 given and the input lacks the "
                f"default columns {DEFAULT_FORMULA_COLUMNS}"
            )
    intercept_flows = set(_split_names(getattr(ns, "intercepts", None) or "odds"))
    valid = {k.value for k in FlowKind}
    if not intercept_flows <= valid:
        raise _UsageError(f"--intercepts entries must be among {sorted(valid)}")
    return {"odds": odds, "risk1": risk1, "risk0": risk0}, intercept_flows


def _build_template(formula, intercept_flows, names: tuple[str, ...]) -> ModelSpec:
    index_of = {name: i for i, name in enumerate(names)}
    flows = []
    for kind in FlowKind:
        cols = formula[kind.value]
        has_int = kind.value in intercept_flows
        if not cols and not has_int:
            continue
        missing = [c for c in cols if c not in index_of]
        if missing:
            raise DataError(f"{kind.value} flow: columns {missing} not in input header")
        idx = tuple(index_of[c] for c in cols)
        flows.append(FlowSpec(kind, has_intercept=has_int,
                              covariate_indices=idx, coefficients=np.zeros(len(idx))))
    if not flows:
        raise _UsageError("the model needs at least one flow")
    return ModelSpec(p0=0.5, flows=tuple(flows))


_PENALTY_NAMES = {k.value: k for k in PenaltyKind}


def _penalty_kinds(ns, default: dict[str, str] | None = None) -> dict[FlowKind, PenaltyKind]:
    default = default or {}
    out = {}
    for kind in FlowKind:
        raw = getattr(ns, f"penalty_{kind.value}", None) or default.get(kind.value, "none")
        if raw not in _PENALTY_NAMES:
            raise _UsageError(
                f"--penalty-{kind.value}: unknown kind {raw!r} "
                f"(choose from {sorted(_PENALTY_NAMES)})"
            )
        out[kind] = _PENALTY_NAMES[raw]
    return out


def _build_objective_config(ns, template, kinds, lam_value, weights_by_flow):
    penalties = {}
    for f in template.flows:
        kind = kinds[f.kind]
        if kind is PenaltyKind.NONE:
            continue
        if kind is PenaltyKind.ADAPTIVE_L1:
            penalties[f.kind] = PenaltySpec(kind, lam=lam_value,
                                            weights=weights_by_flow[f.kind])
        elif kind is PenaltyKind.ELASTIC_NET:
            penalties[f.kind] = PenaltySpec(kind, lam=lam_value, alpha=ns.alpha)
        else:
            penalties[f.kind] = PenaltySpec(kind, lam=lam_value)
    return ObjectiveConfig(penalties=penalties)


def _fit_with_flags(ns, standardize_default: bool):
    """Shared fit pipeline for the fit/cv/labbe commands.

    Returns (data, template, result, info) where info records the
    strengths used and any CV artifacts for the metadata file.
    """
    standardize = ns.standardize if ns.standardize is not None else standardize_default
    data = load_csv(ns.input, ns.outcome, standardize=standardize)
    formula, intercept_flows = _resolve_formula(ns, data.feature_names)
    template = _build_template(formula, intercept_flows, data.feature_names)
    kinds = _penalty_kinds(ns, default=getattr(ns, "_default_penalties", None))
    seed = _resolve_seed(ns)
    options = OptimOptions()

    weights_by_flow = None
    if any(k is PenaltyKind.ADAPTIVE_L1 for k in kinds.values()):
        pilot_cfg = ObjectiveConfig(penalties={
            k: PenaltySpec(PenaltyKind.L2, lam=_PILOT_RIDGE_LAM) for k in FlowKind
        })
        pilot = fit(data, template, pilot_cfg, options)
        weights_by_flow = adaptive_weights(pilot)

    penalized = {f.kind for f in template.flows
                 if kinds[f.kind] is not PenaltyKind.NONE}
    lam_raw = getattr(ns, "lam", None) or "0"
    use_cv = str(lam_raw).lower() == "cv"
    if use_cv and not penalized:
        raise _UsageError("--lambda cv needs at least one penalized flow "
                          "(set --penalty-odds/--penalty-risk1/--penalty-risk0)")

    cv_result = None
    if use_cv:
        cfg = _build_objective_config(ns, template, kinds, 1.0, weights_by_flow)
        cv = CvConfig(folds=ns.folds, seed=seed)
        cv_result = tune_lambda(data, template, cfg, options, cv, penalized)
        cfg = config_with_lambdas(cfg, cv_result.best_lambdas)
        lambdas = cv_result.best_lambdas
    else:
        try:
            lam_value = float(lam_raw)
        except ValueError:
            raise _UsageError(f"--lambda must be a number or 'cv', got {lam_raw!r}")
        cfg = _build_objective_config(ns, template, kinds, lam_value, weights_by_flow)
        lambdas = {k: lam_value for k in penalized}

    result = fit(data, template, cfg, options)
    info = {
        "standardize": standardize,
        "kinds": kinds,
        "lambdas": lambdas,
        "cv_result": cv_result,
        "seed": seed,
        "config": cfg,
    }
    return data, template, result, info


def _write_metadata(path, ns, result, info) -> None:
    lines = [
        f"command={ns.command}",
        f"version={__version__}",
        f"input={ns.input}",
        f"outcome={ns.outcome}",
        f"standardize={str(info['standardize']).lower()}",
        f"seed={info['seed']}",
    ]
    for kind in FlowKind:
        lines.append(f"penalty_{kind.value}={info['kinds'][kind].value}")
        lam = info["lambdas"].get(kind)
        if lam is not None:
            lines.append(f"lambda_{kind.value}={lam!r}")
    lines += [
        f"converged={str(result.converged).lower()}",
        f"iterations={result.iterations}",
        f"clamp_count={result.clamp_count}",
        f"final_step={repr(float(result.final_step))}",
        f"final_objective={repr(float(result.objective_trace[-1]))}",
        f"line_search_failed={str(result.line_search_failed).lower()}",
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_cv_artifacts(outdir, cv_result) -> None:
    with open(os.path.join(outdir, "cv_curve.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sweep", "flow", "lambda", "deviance"])
        for point in cv_result.cv_curve:
            writer.writerow([point.sweep, point.flow.value,
                             repr(point.lam), repr(point.deviance)])
    with open(os.path.join(outdir, "cv_best.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["flow", "lambda"])
        for kind in FlowKind:
            if kind in cv_result.best_lambdas:
                writer.writerow([kind.value, repr(cv_result.best_lambdas[kind])])
    series = []
    for kind in FlowKind:
        pts = [(np.log10(pt.lam), pt.deviance) for pt in cv_result.cv_curve
               if pt.flow is kind and pt.sweep == 1]
        if pts:
            series.append((kind.value, [x for x, _ in pts], [y for _, y in pts]))
    if series:
        svg = line_chart(series, title="Cross-validated deviance (first sweep)",
                         xlabel="log10(lambda)", ylabel="mean held-out NLL")
        write_svg(os.path.join(outdir, "cv_curve.svg"), svg)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(ns) -> int:
    outdir = _outdir(ns)
    data, template, result, info = _fit_with_flags(ns, standardize_default=True)
    write_coefficients_csv(os.path.join(outdir, "coefficients.csv"),
                           result.model, data.feature_names)
    write_trace_csv(os.path.join(outdir, "objective_trace.csv"),
                    result.objective_trace)
    _write_metadata(os.path.join(outdir, "run_metadata.txt"), ns, result, info)
    if info["cv_result"] is not None:
        _write_cv_artifacts(outdir, info["cv_result"])
    if result.line_search_failed:
        print("fit: line search failed before convergence", file=sys.stderr)
        return 3
    print(f"fit: wrote {outdir}/coefficients.csv "
          f"(converged={result.converged}, iterations={result.iterations}, "
          f"clamp_count={result.clamp_count})")
    return 0


def cmd_cv(ns) -> int:
    ns.lam = "cv"
    ns._default_penalties = {"odds": "l2", "risk1": "l1", "risk0": "l1"}
    outdir = _outdir(ns)
    data, template, result, info = _fit_with_flags(ns, standardize_default=True)
    _write_cv_artifacts(outdir, info["cv_result"])
    write_coefficients_csv(os.path.join(outdir, "coefficients.csv"),
                           result.model, data.feature_names)
    write_trace_csv(os.path.join(outdir, "objective_trace.csv"),
                    result.objective_trace)
    _write_metadata(os.path.join(outdir, "run_metadata.txt"), ns, result, info)
    best = {k.value: v for k, v in info["lambdas"].items()}
    print(f"cv: best lambdas {best}; wrote {outdir}/cv_curve.csv")
    return 0


def cmd_labbe(ns) -> int:
    outdir = _outdir(ns)
    data, template, result, info = _fit_with_flags(ns, standardize_default=False)
    exposure = ns.exposure or DEFAULT_EXPOSURE
    if exposure not in data.feature_names:
        raise DataError(f"exposure column {exposure!r} not in input header")
    idx = data.feature_names.index(exposure)
    delta = ns.delta if ns.delta is not None else float(data.X[:, idx].mean())
    curve = labbe_curve(result.model, idx, exposure, delta)
    with open(os.path.join(outdir, "labbe.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p_control", "p_treated"])
        for pc, pt in zip(curve.p_control, curve.p_treated):
            writer.writerow([repr(float(pc)), repr(float(pt))])
    svg = line_chart(
        [(f"{exposure} +{delta:.4g}", curve.p_control, curve.p_treated)],
        title="Treated vs control event probability",
        xlabel="control probability", ylabel="treated probability",
        identity_line=True,
    )
    write_svg(os.path.join(outdir, "labbe.svg"), svg)
    write_coefficients_csv(os.path.join(outdir, "coefficients.csv"),
                           result.model, data.feature_names)
    _write_metadata(os.path.join(outdir, "run_metadata.txt"), ns, result, info)
    print(f"labbe: wrote {outdir}/labbe.csv and labbe.svg (delta={delta:.6g})")
    return 0


def cmd_simulate(ns) -> int:
    outdir = _outdir(ns)
    seed = _resolve_seed(ns)
    methods = tuple(_split_names(ns.methods)) if ns.methods else None
    if methods:
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise _UsageError(f"--methods: unknown {bad} (choose from {METHODS})")
    kwargs = dict(base_seed=seed, replications=ns.reps)
    if methods:
        kwargs["methods"] = methods
    scenarios = preset_scenarios(ns.n, **kwargs)
    wanted = _split_names(ns.preset) if ns.preset and ns.preset != "all" else None
    if wanted is not None:
        known = {s.name for s in scenarios}
        bad = [w for w in wanted if w not in known]
        if bad:
            raise _UsageError(f"--preset: unknown {bad} (choose from {sorted(known)})")
        scenarios = [s for s in scenarios if s.name in wanted]

    summary_rows = []
    box_rows = {metric: [] for metric in ("estimation_error", "tpr", "fpr")}
    for scenario in scenarios:
        result = run_scenario(scenario)
        write_scenario_csv(os.path.join(outdir, f"scenario_{scenario.name}.csv"),
                           result.records)
        for s in result.summaries:
            summary_rows.append([scenario.name, s.method, repr(s.estimation_error),
                                 repr(s.tpr), repr(s.fpr), repr(s.deviance),
                                 repr(s.nonzero_count), s.failed_reps])
        for metric in box_rows:
            groups = []
            for method in scenario.methods:
                vals = np.array([getattr(r, metric) for r in result.records
                                 if r.method == method and r.converged])
                stats = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0])
                box_rows[metric].append([scenario.name, method] +
                                        [repr(float(v)) for v in stats])
                groups.append((method, tuple(float(v) for v in stats)))
            svg = box_chart(groups, title=f"{scenario.name}: {metric}",
                            ylabel=metric)
            write_svg(os.path.join(outdir, f"boxplot_{scenario.name}_{metric}.svg"),
                      svg)

    with open(os.path.join(outdir, "summary.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "method", "estimation_error", "tpr", "fpr",
                         "deviance", "nonzero_count", "failed_reps"])
        writer.writerows(summary_rows)
    for metric, rows in box_rows.items():
        with open(os.path.join(outdir, f"boxplot_{metric}.csv"), "w",
                  newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["scenario", "method", "min", "q1", "median", "q3", "max"])
            writer.writerows(rows)
    print(f"simulate: wrote {len(scenarios)} scenario file(s) and summary.csv "
          f"under {outdir}")
    return 0


#: Strengths used by the flat-ridge demonstration (risk and survival L1).
_DEMO_LAMBDA = 1.0


def cmd_demo_nonident(ns) -> int:
    """Tabulate the flat likelihood ridge and its penalized resolution.

    At a single design point with a unit odds factor, risk/survival
    factor pairs from :func:`nonident_family` leave the likelihood of a
    balanced two-observation sample exactly flat; the L1 penalty on the
    two log factors is minimized only at (1, 1).
    """
    outdir = _outdir(ns)
    gammas = np.linspace(0.25, 1.75, 61)
    pairs = nonident_family(1.0, gammas, 0.5)
    X = np.zeros((2, 1))
    y = np.array([1.0, 0.0])
    data = Dataset(X, y)
    cfg = ObjectiveConfig()

    rows = []
    for gamma, delta in pairs:
        model = ModelSpec(p0=0.5, flows=(
            FlowSpec(FlowKind.ODDS, has_intercept=True, intercept=0.0),
            FlowSpec(FlowKind.RISK1, has_intercept=True, intercept=float(np.log(gamma))),
            FlowSpec(FlowKind.RISK0, has_intercept=True, intercept=float(np.log(delta))),
        ))
        value = nll(model, data, cfg)
        penalty = abs(np.log(gamma)) + abs(np.log(delta))
        rows.append((gamma, delta, value, penalty, value + _DEMO_LAMBDA * penalty))

    with open(os.path.join(outdir, "nonident_table.csv"), "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gamma", "delta", "nll", "penalty", "penalized_objective"])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])

    svg = line_chart(
        [
            ("mean NLL (flat)", [r[0] for r in rows], [r[2] for r in rows]),
            ("penalized objective", [r[0] for r in rows], [r[4] for r in rows]),
        ],
        title="Flat likelihood ridge vs penalized objective",
        xlabel="risk factor", ylabel="objective",
    )
    write_svg(os.path.join(outdir, "nonident.svg"), svg)
    spread = max(r[2] for r in rows) - min(r[2] for r in rows)
    print(f"demo-nonident: NLL spread along the ridge = {spread:.3e}; "
          f"wrote {outdir}/nonident_table.csv")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(sub) -> None:
    sub.add_argument("--input", required=True, help="input CSV path")
    sub.add_argument("--outcome", required=True, help="0/1 outcome column name")
    sub.add_argument("--odds", help="comma list of odds-flow covariates")
    sub.add_argument("--risk1", help="comma list of risk-flow covariates")
    sub.add_argument("--risk0", help="comma list of survival-flow covariates")
    sub.add_argument("--intercepts", help="flows with intercepts (default: odds)")
    for kind in FlowKind:
        sub.add_argument(f"--penalty-{kind.value}",
                         dest=f"penalty_{kind.value}",
                         help=f"penalty kind for the {kind.value} flow "
                              "(none|l1|l2|elastic_net|adaptive_l1)")
    sub.add_argument("--lambda", dest="lam",
                     help="penalty strength, or 'cv' to tune (default 0)")
    sub.add_argument("--alpha", type=float, default=0.5,
                     help="elastic-net L1 share (default 0.5)")
    sub.add_argument("--folds", type=int, default=5, help="CV folds (default 5)")
    sub.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                     default=None,
                     help="z-standardize continuous covariates "
                          "(default: on for fit/cv, off for labbe)")


def _add_common(sub) -> None:
    sub.add_argument("--outdir", default=".", help="output directory (default .)")
    sub.add_argument("--seed", type=int, default=None,
                     help="random seed (falls back to RBC_SEED, then 0)")
    sub.add_argument("--config", help="key=value config file; flags override")


def build_parser() -> _Parser:
    parser = _Parser(prog="flowreg",
                     description="Penalized regression by composition for "
                                 "binary outcomes")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True,
                                 parser_class=_Parser)

    p_fit = subs.add_parser("fit", help="fit a model to a CSV")
    _add_model_flags(p_fit)
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cv = subs.add_parser("cv", help="cross-validate strengths, then fit")
    _add_model_flags(p_cv)
    _add_common(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = subs.add_parser("simulate", help="run preset replication studies")
    p_sim.add_argument("--n", type=int, required=True, help="sample size per rep")
    p_sim.add_argument("--preset", default="all",
                       help="preset name(s), comma separated, or 'all'")
    p_sim.add_argument("--reps", type=int, default=30,
                       help="replications per scenario (default 30)")
    p_sim.add_argument("--methods",
                       help=f"comma list from {METHODS} "
                            "(default: all but adaptive_lasso)")
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_labbe = subs.add_parser("labbe",
                              help="fit, then emit a treated-vs-control curve")
    _add_model_flags(p_labbe)
    p_labbe.add_argument("--exposure", default=None,
                         help=f"exposure column (default {DEFAULT_EXPOSURE!r})")
    p_labbe.add_argument("--delta", type=float, default=None,
                         help="exposure change (default: its sample mean)")
    _add_common(p_labbe)
    p_labbe.set_defaults(func=cmd_labbe)

    p_demo = subs.add_parser("demo-nonident",
                             help="tabulate the flat likelihood ridge")
    _add_common(p_demo)
    p_demo.set_defaults(func=cmd_demo_nonident)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(_expand_config(argv))
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return ns.func(ns)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ModelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (OptimizationError, TuningError) as exc:
        print(f"optimization error: {exc}", file=sys.stderr)
        return 3
    except FlowregError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
