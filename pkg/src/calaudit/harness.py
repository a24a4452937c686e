"""Experiment orchestration: group audits, size-matched audits, sampling-ratio sweeps.

Every entry point is a deterministic function of its inputs, the config and the
master seed: per-cell seeds are derived from (seed, stream, run, ...) keys, so
results never depend on execution order.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from . import calibration, discrimination
from ._version import __version__
from .dataset import (
    DegenerateSampleError,
    ScoreSet,
    UNKNOWN_GROUP,
    _match_group_indices,
    subsample_indices,
)
from .platt import PlattParams, apply_platt, decompose_psr, fit_platt, to_llr
from .stats import (
    BoxplotSummary,
    InsufficientPairsError,
    PairedTestResult,
    summarize,
    wilcoxon_signed_rank,
)

DEFAULT_SEED = 101
DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

DISCRIMINATION_METRICS = ("auc_roc", "auc_pr", "auc_prg", "balanced_accuracy")
CALIBRATION_METRICS = ("ece", "mce", "ada_ece", "cross_entropy", "brier")
DELTA_METRICS = ("delta_ce", "delta_brier")
ALL_METRICS = DISCRIMINATION_METRICS + CALIBRATION_METRICS + DELTA_METRICS
SWEEP_METRICS = ("ece", "mce", "ada_ece", "delta_ce", "delta_brier")

SERIES_MAJORITY = "majority"
SERIES_MINORITY = "minority"
SERIES_MATCHED = "majority_matched"

ARM_NAIVE = "naive"
ARM_SIZE_MATCHED = "size_matched"
ARM_SIZE_EFFECT = "size_effect"

# derived-seed stream tags, so no two sampling contexts share a seed key
_STREAM_MATCH = 2
_STREAM_SUBSAMPLE = 3
_STREAM_POPULATION = 4
_STREAM_SPLIT = 5


@dataclass(frozen=True)
class AuditConfig:
    """Knobs shared by all experiment families; every estimator convention is explicit."""

    metrics: tuple[str, ...] = ALL_METRICS
    n_bins: int = calibration.DEFAULT_N_BINS
    clip_epsilon: float = calibration.DEFAULT_CLIP_EPSILON
    threshold: float = 0.5
    seed: int = DEFAULT_SEED
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    majority: str | None = None
    minority: str | None = None
    population_size: int = 100_000
    validation_fraction: float = 0.2
    test_fraction: float = 0.2
    max_subsample_retries: int = 10
    quantile_rule: str = "linear"

    def __post_init__(self) -> None:
        metrics = tuple(self.metrics)
        unknown = sorted(set(metrics) - set(ALL_METRICS))
        if unknown:
            raise ValueError(f"unknown metric(s): {', '.join(unknown)}")
        if not metrics:
            raise ValueError("at least one metric is required")
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios or any(not 0.0 < r <= 1.0 for r in ratios):
            raise ValueError("ratios must lie in (0, 1]")
        if list(ratios) != sorted(ratios):
            raise ValueError("ratios must be sorted ascending")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if not 0.0 < self.clip_epsilon < 0.5:
            raise ValueError("clip_epsilon must lie in (0, 0.5)")
        if (self.majority is None) != (self.minority is None):
            raise ValueError("set both majority and minority tags, or neither")
        if not (
            0.0 < self.validation_fraction
            and 0.0 < self.test_fraction
            and self.validation_fraction + self.test_fraction <= 1.0
        ):
            raise ValueError("validation/test fractions must be positive and sum to <= 1")
        if self.max_subsample_retries < 0:
            raise ValueError("max_subsample_retries must be >= 0")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "ratios", ratios)


@dataclass(frozen=True)
class AuditRun:
    """One evaluation run: the validation set that fits the calibrator, plus its test set."""

    run_index: int
    validation: ScoreSet
    test: ScoreSet

    def __post_init__(self) -> None:
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")


@dataclass(frozen=True)
class SweepRun:
    """A test set for ratio sweeps, with optional aligned Platt-transformed scores."""

    run_index: int
    test: ScoreSet
    platt_scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")
        if self.platt_scores is not None:
            scores = np.asarray(self.platt_scores, dtype=np.float64).reshape(-1)
            if scores.size != self.test.n:
                raise ValueError("platt_scores must align with the test records")
            object.__setattr__(self, "platt_scores", scores)


@dataclass(frozen=True)
class AuditReport:
    """Per-run metric series, boxplot summaries and paired tests, plus provenance."""

    kind: str
    runs: tuple[int, ...]
    series: dict
    summaries: dict
    tests: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "runs": list(self.runs),
            "series": {
                m: {s: [_clean(v) for v in vals] for s, vals in per.items()}
                for m, per in self.series.items()
            },
            "summaries": {
                m: {s: (None if b is None else b.to_dict()) for s, b in per.items()}
                for m, per in self.summaries.items()
            },
            "tests": {
                m: {c: (None if t is None else t.to_dict()) for c, t in per.items()}
                for m, per in self.tests.items()
            },
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class SweepResult:
    """Long-form (run, ratio, metric, value) table with summaries and min-vs-max tests."""

    ratios: tuple[float, ...]
    runs: tuple[int, ...]
    rows: tuple
    summaries: dict
    tests: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "runs": list(self.runs),
            "summaries": {
                m: {f"{r:g}": (None if b is None else b.to_dict()) for r, b in per.items()}
                for m, per in self.summaries.items()
            },
            "tests": {
                m: (None if t is None else t.to_dict()) for m, t in self.tests.items()
            },
            "provenance": self.provenance,
        }


def _clean(value: float) -> float | None:
    return None if math.isnan(value) else float(value)


def _metric_values(
    names: Sequence[str],
    subset: ScoreSet,
    platt_scores: np.ndarray | None,
    cfg: AuditConfig,
) -> tuple[dict[str, float], list[str]]:
    """Compute each metric independently; undefined ones come back as NaN with a message."""
    values: dict[str, float] = {}
    errors: list[str] = []
    eq_width: calibration.Binning | None = None
    decomposition = None
    for name in names:
        try:
            if name in ("ece", "mce"):
                if eq_width is None:
                    eq_width = calibration.bin_scores(
                        subset, calibration.EQUAL_WIDTH, cfg.n_bins
                    )
                value = (
                    calibration.ece(subset, eq_width)
                    if name == "ece"
                    else calibration.mce(subset, eq_width)
                )
            elif name == "ada_ece":
                value = calibration.ada_ece(subset, cfg.n_bins)
            elif name == "cross_entropy":
                value = calibration.cross_entropy(subset, cfg.clip_epsilon)
            elif name == "brier":
                value = calibration.brier(subset)
            elif name == "auc_roc":
                value = discrimination.roc_auc(subset)
            elif name == "auc_pr":
                value = discrimination.pr_auc(subset)
            elif name == "auc_prg":
                value = discrimination.pr_auc_gain(subset)
            elif name == "balanced_accuracy":
                value = discrimination.balanced_accuracy(subset, cfg.threshold)
            elif name in DELTA_METRICS:
                if platt_scores is None:
                    raise ValueError("delta metrics require Platt-transformed scores")
                if decomposition is None:
                    decomposition = decompose_psr(subset, platt_scores, cfg.clip_epsilon)
                value = (
                    decomposition.delta_ce
                    if name == "delta_ce"
                    else decomposition.delta_brier
                )
            else:
                raise ValueError(f"unknown metric {name!r}")
            values[name] = float(value)
        except ValueError as exc:
            values[name] = math.nan
            errors.append(f"{name}: {exc}")
    return values, errors


def _fit_run_calibrator(run: AuditRun, cfg: AuditConfig) -> tuple[PlattParams, np.ndarray]:
    params = fit_platt(
        to_llr(run.validation.scores, cfg.clip_epsilon), run.validation.labels
    )
    platt_scores = apply_platt(params, to_llr(run.test.scores, cfg.clip_epsilon))
    return params, platt_scores


def _resolve_group_pair(runs: Sequence[AuditRun], cfg: AuditConfig) -> tuple[str, str]:
    if cfg.majority is not None and cfg.minority is not None:
        return cfg.majority, cfg.minority
    totals: Counter = Counter()
    for run in runs:
        for tag, count in run.test.group_counts().items():
            if tag != UNKNOWN_GROUP:
                totals[tag] += count
    if len(totals) < 2:
        raise ValueError(
            "audits need two groups in the test sets; tag the records or pass "
            "explicit majority/minority tags"
        )
    ordered = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return ordered[0][0], ordered[1][0]


def _summary_or_none(values: list[float], cfg: AuditConfig) -> BoxplotSummary | None:
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return None
    return summarize(finite, cfg.quantile_rule)


def _paired_test(
    a_values: list[float],
    b_values: list[float],
    metric: str,
    label: str,
    notes: list[str],
) -> PairedTestResult | None:
    a = np.asarray(a_values, dtype=np.float64)
    b = np.asarray(b_values, dtype=np.float64)
    ok = np.isfinite(a) & np.isfinite(b)
    try:
        return wilcoxon_signed_rank(a[ok], b[ok])
    except InsufficientPairsError as exc:
        notes.append(f"{metric} {label}: {exc}")
        return None


def _base_provenance(cfg: AuditConfig) -> dict:
    return {"config": asdict(cfg), "version": __version__}


def run_group_audit(
    runs: Sequence[AuditRun], config: AuditConfig | None = None
) -> AuditReport:
    """Per-group metric comparison over runs.

    Each run fits Platt scaling on its full validation set (all groups
    combined), evaluates every configured metric separately on the majority
    and minority test records, and the per-metric series are compared with a
    paired Wilcoxon test across runs. Runs where a group is absent or a metric
    is undefined are recorded as missing and dropped from the pairing.
    """
    cfg = config if config is not None else AuditConfig()
    runs = list(runs)
    if not runs:
        raise ValueError("no runs supplied")
    majority, minority = _resolve_group_pair(runs, cfg)
    tags = (majority, minority)
    series: dict = {m: {t: [] for t in tags} for m in cfg.metrics}
    notes: list[str] = []
    platt_diag: list[dict] = []
    for run in runs:
        params, platt_scores = _fit_run_calibrator(run, cfg)
        platt_diag.append({"run": run.run_index, **params.to_dict()})
        for tag in tags:
            mask = run.test.groups == tag
            if not mask.any():
                for m in cfg.metrics:
                    series[m][tag].append(math.nan)
                notes.append(f"run {run.run_index}: group {tag!r} absent from test set")
                continue
            subset = run.test.take(np.flatnonzero(mask))
            values, errors = _metric_values(cfg.metrics, subset, platt_scores[mask], cfg)
            for m in cfg.metrics:
                series[m][tag].append(values[m])
            notes.extend(f"run {run.run_index} group {tag!r} {e}" for e in errors)
    tests = {
        m: {
            "majority_vs_minority": _paired_test(
                series[m][majority], series[m][minority], m, "majority_vs_minority", notes
            )
        }
        for m in cfg.metrics
    }
    summaries = {
        m: {t: _summary_or_none(series[m][t], cfg) for t in tags} for m in cfg.metrics
    }
    provenance = _base_provenance(cfg)
    provenance.update(
        {"groups": {"majority": majority, "minority": minority}, "platt": platt_diag,
         "notes": notes}
    )
    return AuditReport(
        kind="group",
        runs=tuple(r.run_index for r in runs),
        series=series,
        summaries=summaries,
        tests=tests,
        provenance=provenance,
    )


def run_size_matched_audit(
    runs: Sequence[AuditRun], config: AuditConfig | None = None
) -> AuditReport:
    """Group audit with the majority additionally subsampled to the minority's size.

    Three comparison arms per metric: naive (majority vs minority),
    size_matched (size-matched majority vs minority, the fair comparison) and
    size_effect (majority vs its size-matched subsample, isolating the pure
    sample-size effect). Match seeds are recorded for exact replay.
    """
    cfg = config if config is not None else AuditConfig()
    runs = list(runs)
    if not runs:
        raise ValueError("no runs supplied")
    majority, minority = _resolve_group_pair(runs, cfg)
    labels = (SERIES_MAJORITY, SERIES_MINORITY, SERIES_MATCHED)
    series: dict = {m: {s: [] for s in labels} for m in cfg.metrics}
    notes: list[str] = []
    platt_diag: list[dict] = []
    match_seeds: list[dict] = []
    for run in runs:
        params, platt_scores = _fit_run_calibrator(run, cfg)
        platt_diag.append({"run": run.run_index, **params.to_dict()})
        match_seed = [cfg.seed, _STREAM_MATCH, int(run.run_index)]
        try:
            matched_idx = _match_group_indices(run.test, majority, minority, match_seed)
        except ValueError as exc:
            for m in cfg.metrics:
                for s in labels:
                    series[m][s].append(math.nan)
            notes.append(f"run {run.run_index}: {exc}")
            continue
        match_seeds.append({"run": run.run_index, "seed": match_seed})
        subsets = {
            SERIES_MAJORITY: np.flatnonzero(run.test.groups == majority),
            SERIES_MINORITY: np.flatnonzero(run.test.groups == minority),
            SERIES_MATCHED: matched_idx,
        }
        for s, idx in subsets.items():
            subset = run.test.take(idx)
            values, errors = _metric_values(cfg.metrics, subset, platt_scores[idx], cfg)
            for m in cfg.metrics:
                series[m][s].append(values[m])
            notes.extend(f"run {run.run_index} series {s} {e}" for e in errors)
    arms = {
        ARM_NAIVE: (SERIES_MAJORITY, SERIES_MINORITY),
        ARM_SIZE_MATCHED: (SERIES_MATCHED, SERIES_MINORITY),
        ARM_SIZE_EFFECT: (SERIES_MAJORITY, SERIES_MATCHED),
    }
    tests = {
        m: {
            arm: _paired_test(series[m][a], series[m][b], m, arm, notes)
            for arm, (a, b) in arms.items()
        }
        for m in cfg.metrics
    }
    summaries = {
        m: {s: _summary_or_none(series[m][s], cfg) for s in labels} for m in cfg.metrics
    }
    provenance = _base_provenance(cfg)
    provenance.update(
        {
            "groups": {"majority": majority, "minority": minority},
            "platt": platt_diag,
            "match_seeds": match_seeds,
            "arms": {arm: list(pair) for arm, pair in arms.items()},
            "notes": notes,
        }
    )
    return AuditReport(
        kind="size_matched",
        runs=tuple(r.run_index for r in runs),
        series=series,
        summaries=summaries,
        tests=tests,
        provenance=provenance,
    )


def run_sampling_sweep(
    runs: Iterable[SweepRun],
    config: AuditConfig | None = None,
    provenance_extra: dict | None = None,
) -> SweepResult:
    """Metric values for every run at every sampling ratio.

    Each (run, ratio) cell subsamples the run's test set without replacement
    with a seed derived from (seed, run, ratio position); degenerate draws are
    retried with fresh derived seeds up to the configured bound, then recorded
    as missing. The per-metric test compares the smallest against the largest
    ratio, paired by run.
    """
    cfg = config if config is not None else AuditConfig()
    ratios = cfg.ratios
    values: dict = {m: {r: [] for r in ratios} for m in cfg.metrics}
    rows: list[tuple] = []
    run_ids: list[int] = []
    notes: list[str] = []
    for run in runs:
        run_ids.append(run.run_index)
        for ri, ratio in enumerate(ratios):
            idx = None
            for attempt in range(cfg.max_subsample_retries + 1):
                try:
                    idx = subsample_indices(
                        run.test.labels,
                        ratio,
                        [cfg.seed, _STREAM_SUBSAMPLE, int(run.run_index), ri, attempt],
                    )
                    break
                except DegenerateSampleError:
                    continue
            if idx is None:
                notes.append(
                    f"run {run.run_index} ratio {ratio:g}: degenerate subsample after "
                    f"{cfg.max_subsample_retries + 1} attempts; recorded missing"
                )
                cell = {m: math.nan for m in cfg.metrics}
            else:
                subset = run.test.take(idx)
                platt_sub = (
                    run.platt_scores[idx] if run.platt_scores is not None else None
                )
                cell, errors = _metric_values(cfg.metrics, subset, platt_sub, cfg)
                notes.extend(
                    f"run {run.run_index} ratio {ratio:g} {e}" for e in errors
                )
            for m in cfg.metrics:
                values[m][ratio].append(cell[m])
                rows.append((run.run_index, ratio, m, cell[m]))
    if not run_ids:
        raise ValueError("no runs supplied")
    low, high = ratios[0], ratios[-1]
    tests = {
        m: _paired_test(
            values[m][low], values[m][high], m, f"ratio {low:g} vs {high:g}", notes
        )
        for m in cfg.metrics
    }
    summaries = {
        m: {r: _summary_or_none(values[m][r], cfg) for r in ratios} for m in cfg.metrics
    }
    provenance = _base_provenance(cfg)
    provenance.update(
        {
            "comparison": f"ratio {low:g} vs {high:g}, paired by run",
            "subsample_seed_scheme": f"[seed, {_STREAM_SUBSAMPLE}, run, ratio_position, attempt]",
            "notes": notes,
        }
    )
    if provenance_extra:
        provenance.update(provenance_extra)
    return SweepResult(
        ratios=ratios,
        runs=tuple(run_ids),
        rows=tuple(rows),
        summaries=summaries,
        tests=tests,
        provenance=provenance,
    )


def run_synthetic_experiment(
    scenarios: Sequence,
    n_runs: int,
    config: AuditConfig | None = None,
) -> dict[str, SweepResult]:
    """Sampling sweeps over de-calibration scenarios with known true posteriors.

    Per scenario: one population is generated, then each run draws disjoint
    validation/test splits (the train share is unused: there is no model to
    fit), fits Platt scaling on the validation scores, and sweeps the test set
    over the configured ratios. Bin metrics use the pre-calibration scores;
    the delta metrics compare pre- against post-calibration scores.
    """
    from .synthetic import apply_miscalibration, generate_population

    cfg = config if config is not None else AuditConfig()
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique")
    results: dict[str, SweepResult] = {}
    for si, scenario in enumerate(scenarios):
        population = generate_population(
            cfg.population_size, [cfg.seed, _STREAM_POPULATION, si]
        )
        scored = apply_miscalibration(population, scenario)
        n_val = int(round(cfg.validation_fraction * population.n))
        n_test = int(round(cfg.test_fraction * population.n))

        def _split_runs():
            for r in range(n_runs):
                rng = np.random.default_rng([cfg.seed, _STREAM_SPLIT, si, r])
                perm = rng.permutation(population.n)
                validation = scored.take(np.sort(perm[:n_val]))
                test = scored.take(np.sort(perm[n_val : n_val + n_test]))
                params = fit_platt(
                    to_llr(validation.scores, cfg.clip_epsilon), validation.labels
                )
                platt_scores = apply_platt(params, to_llr(test.scores, cfg.clip_epsilon))
                yield SweepRun(run_index=r, test=test, platt_scores=platt_scores)

        results[scenario.name] = run_sampling_sweep(
            _split_runs(),
            cfg,
            provenance_extra={
                "scenario": {"alpha": scenario.alpha, "beta": scenario.beta,
                             "name": scenario.name},
                "n_runs": n_runs,
            },
        )
    return results


def write_sweep_csv(
    result: SweepResult, dest: str | IO[str], scenario: str | None = None
) -> None:
    """Long-form sweep table: run, ratio, metric, value (blank for missing).

    ``scenario`` prepends a constant scenario column so rows stay
    self-describing when several sweeps are concatenated.
    """
    if hasattr(dest, "write"):
        _write_sweep_rows(result, dest, scenario)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_sweep_rows(result, fh, scenario)


def _write_sweep_rows(result: SweepResult, fh: IO[str], scenario: str | None) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    header = ["run", "ratio", "metric", "value"]
    prefix: list = []
    if scenario is not None:
        header = ["scenario"] + header
        prefix = [scenario]
    writer.writerow(header)
    for run, ratio, metric, value in result.rows:
        writer.writerow(
            prefix + [run, f"{ratio:g}", metric, "" if math.isnan(value) else str(value)]
        )


def write_audit_json(report: AuditReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_audit_metric_csvs(report: AuditReport, json_path: str) -> list[str]:
    """One long-form CSV per metric next to the report: metric, series, run, value."""
    from pathlib import Path

    base = Path(json_path)
    written = []
    for metric, per_series in report.series.items():
        out = base.with_name(f"{base.stem}_{metric}.csv")
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "series", "run", "value"])
            for series_label, vals in per_series.items():
                for run, value in zip(report.runs, vals):
                    writer.writerow(
                        [metric, series_label, run, "" if math.isnan(value) else str(value)]
                    )
        written.append(str(out))
    return written
