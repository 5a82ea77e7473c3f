"""The three-step command line workflow: diagnose, adjust, report.

``diagnose`` loads sample and target CSVs and writes the pre-adjustment
balance report. ``adjust`` fits weights with the selected estimator and
writes ``weights.csv`` plus the full report. ``report`` re-evaluates
externally supplied weights against the same inputs. Exit codes: 0 on
success, 2 for input/configuration problems, 3 for estimation failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .design import TransformConfig
from .diagnostics import asmd, outcome_report, plot_data, weights_summary
from .errors import (
    DeBoundInfeasibleError,
    DegenerateVariableError,
    EmptySampleCellError,
    EmptyTargetCellError,
    RebalanceError,
    SolverError,
    TooFewPerClassError,
)
from .estimators import CbpsConfig, IpwConfig, RakeConfig, WeightResult, cbps, ipw, poststratify, rake
from .io import load_csv, read_weights_csv, write_weights_csv
from .report import build_report, export_report
from .sample import PairedSample, WeightScale, WeightVector, pair_with_target

METHODS = ("ipw", "cbps", "rake", "poststratify")

_ESTIMATION_ERRORS = (
    DeBoundInfeasibleError,
    EmptySampleCellError,
    EmptyTargetCellError,
    SolverError,
    TooFewPerClassError,
)


@dataclass
class RunConfig:
    """Validated arguments for one CLI run."""

    command: str
    sample_path: str
    target_path: str
    id_col: str
    out_dir: str
    weight_col: str | None = None
    outcome_cols: list[str] = field(default_factory=list)
    method: str = "ipw"
    formula: str | None = None
    max_de: float | None = None
    margins: list[str] = field(default_factory=list)
    strata: list[str] = field(default_factory=list)
    trim_cap: float = 20.0
    seed: int = 0
    alpha: float = 0.05
    folds: int = 10
    plots: bool = False
    fitted_weights_path: str | None = None
    transform: TransformConfig = field(default_factory=TransformConfig)

    def __post_init__(self):
        if not self.sample_path or not self.target_path or not self.out_dir:
            raise ValueError("sample, target, and output paths must be non-empty")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")


def load_transform_config(path: str) -> TransformConfig:
    """Read transform knobs from a small JSON file.

    Recognized keys: quantile_buckets, rare_level_min_prop,
    add_missing_indicators. Unknown keys are rejected.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: transform config must be a JSON object")
    known = {"quantile_buckets", "rare_level_min_prop", "add_missing_indicators"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown transform options {sorted(unknown)}")
    return TransformConfig(**raw)


def _load_pair(cfg: RunConfig) -> PairedSample:
    import pandas as pd

    sample = load_csv(cfg.sample_path, cfg.id_col, cfg.weight_col, cfg.outcome_cols)
    # the target file often lacks the outcome (and weight) columns; only
    # request the ones its header actually carries
    try:
        header = list(pd.read_csv(cfg.target_path, nrows=0).columns)
    except (FileNotFoundError, OSError):
        raise FileNotFoundError(f"no such file: {cfg.target_path}") from None
    except pd.errors.EmptyDataError:
        header = []
    target = load_csv(
        cfg.target_path,
        cfg.id_col,
        cfg.weight_col if cfg.weight_col in header else None,
        [c for c in cfg.outcome_cols if c in header],
    )
    return pair_with_target(sample, target)


def _input_summary(cfg: RunConfig, pair: PairedSample) -> dict:
    return {
        "sample_path": cfg.sample_path,
        "target_path": cfg.target_path,
        "sample_rows": pair.n,
        "target_rows": pair.target_n,
        "population_size": pair.population_size,
        "common_covariates": list(pair.common_covariates),
        "outcome_columns": list(pair.sample.outcome_names),
    }


def _collect_plots(pair: PairedSample, weights: WeightVector | None):
    series = []
    for name in (*pair.common_covariates, *pair.sample.outcome_names):
        try:
            series.append(plot_data(pair, weights, name))
        except DegenerateVariableError:
            # a constant column has no distribution to plot; leave it out
            continue
    return series


def _run_estimator(cfg: RunConfig, pair: PairedSample) -> WeightResult:
    if cfg.method == "ipw":
        return ipw(
            pair,
            IpwConfig(
                max_de=cfg.max_de,
                formula=cfg.formula,
                cv_folds=cfg.folds,
                seed=cfg.seed,
                trim_ratio_cap=cfg.trim_cap,
                transform=cfg.transform,
            ),
        )
    if cfg.method == "cbps":
        return cbps(
            pair,
            CbpsConfig(
                formula=cfg.formula,
                cv_folds=cfg.folds,
                seed=cfg.seed,
                trim_ratio_cap=cfg.trim_cap,
                transform=cfg.transform,
            ),
        )
    from .design import apply_transforms

    tpair = apply_transforms(pair, cfg.transform)
    if cfg.method == "rake":
        margins = cfg.margins or list(tpair.common_covariates)
        return rake(tpair, margins, RakeConfig())
    strata = cfg.strata or list(tpair.common_covariates)
    return poststratify(tpair, strata)


def _adjust_summary(pre, post, fit_meta) -> dict:
    before, after = pre.mean_unadjusted, post.mean_adjusted
    reduction = 100.0 * (before - after) / before if before > 0 else 0.0
    return {
        "covar_asmd_reduction_pct": reduction,
        "covar_asmd_before": before,
        "covar_asmd_after": after,
        "model_deviance_explained": fit_meta.get("deviance_explained"),
    }


def cmd_diagnose(cfg: RunConfig) -> dict:
    """Pre-adjustment diagnostics only."""
    pair = _load_pair(cfg)
    table = asmd(pair, weights=None, aggregate_by_main_covar=True)
    doc = build_report(
        command="diagnose",
        version=__version__,
        input_summary=_input_summary(cfg, pair),
        asmd_pre=table,
        outcomes=outcome_report(pair, None, cfg.alpha),
        plots=_collect_plots(pair, None) if cfg.plots else None,
        seed=cfg.seed,
    )
    return doc


def cmd_adjust(cfg: RunConfig) -> tuple[dict, np.ndarray, np.ndarray]:
    """Fit weights; returns the report document, unit ids, and weights."""
    pair = _load_pair(cfg)
    pre = asmd(pair, weights=None, aggregate_by_main_covar=True)
    result = _run_estimator(cfg, pair)
    post = asmd(pair, result.weights, aggregate_by_main_covar=True)
    doc = build_report(
        command="adjust",
        version=__version__,
        input_summary=_input_summary(cfg, pair),
        asmd_pre=pre,
        asmd_post=post,
        weight_summary=weights_summary(result.weights),
        outcomes=outcome_report(pair, result.weights, cfg.alpha),
        fit_meta=result.fit_meta,
        summary=_adjust_summary(pre, post, result.fit_meta),
        plots=_collect_plots(pair, result.weights) if cfg.plots else None,
        seed=cfg.seed,
        method=result.method,
    )
    return doc, pair.sample.ids, result.weights.values


def cmd_report(cfg: RunConfig) -> dict:
    """Re-evaluate externally supplied weights."""
    if not cfg.fitted_weights_path:
        raise ValueError("report requires --fitted pointing at a weights CSV")
    pair = _load_pair(cfg)
    values = read_weights_csv(cfg.fitted_weights_path, pair.sample)
    weights = WeightVector(values, WeightScale.RAW)
    pre = asmd(pair, weights=None, aggregate_by_main_covar=True)
    post = asmd(pair, weights, aggregate_by_main_covar=True)
    doc = build_report(
        command="report",
        version=__version__,
        input_summary=_input_summary(cfg, pair),
        asmd_pre=pre,
        asmd_post=post,
        weight_summary=weights_summary(weights),
        outcomes=outcome_report(pair, weights, cfg.alpha),
        summary=_adjust_summary(pre, post, {}),
        plots=_collect_plots(pair, weights) if cfg.plots else None,
        seed=cfg.seed,
    )
    return doc


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rebalance",
        description="Diagnose, correct, and evaluate representation bias in a sample.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("diagnose", "report pre-adjustment covariate balance"),
        ("adjust", "fit weights and write weights.csv plus report.json"),
        ("report", "evaluate externally supplied weights"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--sample", required=True, help="sample CSV path")
        p.add_argument("--target", required=True, help="target population CSV path")
        p.add_argument("--id", required=True, dest="id_col", help="id column name")
        p.add_argument("--weights", help="design-weight column name")
        p.add_argument("--outcomes", help="comma-separated outcome column names")
        p.add_argument("--alpha", type=float, default=0.05, help="CI significance level")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--plots", action="store_true", help="include plot data in the report")
        p.add_argument("--out", required=True, help="output directory")
        if name == "adjust":
            p.add_argument("--method", choices=METHODS, default="ipw")
            p.add_argument("--formula", help="model formula, e.g. 'a + b + a:b'")
            p.add_argument("--max-de", type=float, dest="max_de",
                           help="bound on the Kish design effect (ipw)")
            p.add_argument("--margins", help="raking margin variables, comma-separated")
            p.add_argument("--strata", help="post-stratification variables, comma-separated")
            p.add_argument("--trim-cap", type=float, default=20.0, dest="trim_cap",
                           help="weight trimming cap as a multiple of the mean weight")
            p.add_argument("--folds", type=int, default=10, help="cross-validation folds")
            p.add_argument("--transform-config", dest="transform_config",
                           help="JSON file with pre-processing options "
                                "(quantile_buckets, rare_level_min_prop, "
                                "add_missing_indicators)")
        if name == "report":
            p.add_argument("--fitted", required=True, dest="fitted",
                           help="weights CSV (id,weight) to evaluate")
    return parser


def _split_csv_list(raw: str | None) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    transform_path = getattr(args, "transform_config", None)
    transform = (
        load_transform_config(transform_path) if transform_path else TransformConfig()
    )
    return RunConfig(
        command=args.command,
        sample_path=args.sample,
        target_path=args.target,
        id_col=args.id_col,
        out_dir=args.out,
        weight_col=args.weights,
        outcome_cols=_split_csv_list(args.outcomes),
        method=getattr(args, "method", "ipw"),
        formula=getattr(args, "formula", None),
        max_de=getattr(args, "max_de", None),
        margins=_split_csv_list(getattr(args, "margins", None)),
        strata=_split_csv_list(getattr(args, "strata", None)),
        trim_cap=getattr(args, "trim_cap", 20.0),
        seed=args.seed,
        alpha=args.alpha,
        folds=getattr(args, "folds", 10),
        plots=args.plots,
        fitted_weights_path=getattr(args, "fitted", None),
        transform=transform,
    )


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        return _fail(exc, 2)

    out_dir = Path(cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _fail(exc, 2)
    try:
        if cfg.command == "diagnose":
            doc = cmd_diagnose(cfg)
        elif cfg.command == "adjust":
            doc, unit_ids, weight_values = cmd_adjust(cfg)
        else:
            doc = cmd_report(cfg)
    except _ESTIMATION_ERRORS as exc:
        return _fail(exc, 3)
    except (RebalanceError, FileNotFoundError, ValueError) as exc:
        return _fail(exc, 2)

    try:
        export_report(doc, out_dir / "report.json")
        if cfg.command == "adjust":
            write_weights_csv(out_dir / "weights.csv", unit_ids, weight_values)
    except OSError as exc:
        return _fail(exc, 2)

    summary = doc.get("summary")
    if summary:
        print(f"Covar ASMD reduction: {summary['covar_asmd_reduction_pct']:.1f}")
        print(
            "Covar ASMD: "
            f"{summary['covar_asmd_before']:.3f} -> {summary['covar_asmd_after']:.3f}"
        )
        dev = summary.get("model_deviance_explained")
        if dev is not None:
            print(f"Model proportion deviance explained: {dev:.3f}")
    else:
        pre = doc["asmd_pre"]["rows"]
        for row in pre:
            print(f"asmd[{row['name']}]: {row['unadjusted']:.3f}")
    print(f"report written to {out_dir / 'report.json'}")
    if cfg.command == "adjust":
        print(f"weights written to {out_dir / 'weights.csv'}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
