"""Multi-run experiment harness: permutation x prefix cells, aggregation.

A plan names permutation seeds and prefix sizes; every (seed, size) cell
gets one HDP fit (shared by all runs in the cell) and R independent
recursions seeded distinctly from its estimate. Aggregates per cell:
mean-mode final topic count, failure rate, termination-step histogram with
cumulative and marginal proportions, and wall times for the plain HDP path
versus the recursive path. Failed cells are recorded and skipped, never
fatal. Reports serialize to JSON with archived traces, plus fixed-format
CSV exports.
"""

from __future__ import annotations

import json
import statistics
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from .corpus import Corpus, permute, prefix
from .hdp import HdpConfig, HdpEstimate, fit_hdp
from .lda import LdaModel, dominant_topics, fit
from .recursion import Outcome, RecursionConfig, RecursionStep, RecursionTrace, run_recursion
from .util import ToolError, canonical_json, derive_seed, write_text


class ExperimentsError(ToolError):
    """Raised for invalid plans."""


def mean_mode(values) -> int:
    """Mode of the values, tie-broken toward the arithmetic mean.

    With several maximal-frequency values the one closest to the mean wins;
    at equal distance the smaller wins. The result is always a member of
    the input.
    """
    values = list(values)
    if not values:
        raise ExperimentsError("mean_mode of an empty list")
    counts = Counter(values)
    top = max(counts.values())
    modes = sorted(v for v, c in counts.items() if c == top)
    if len(modes) == 1:
        return modes[0]
    mean = Fraction(sum(values), len(values))
    return min(modes, key=lambda v: (abs(Fraction(v) - mean), v))


def emit_histogram_data(model: LdaModel) -> dict[int, int]:
    """Documents per dominant topic, zero-count topics included up to K."""
    table = {k: 0 for k in range(model.k)}
    for assignment in dominant_topics(model, top_m=1):
        table[assignment.dominant_topic] += 1
    return table


@dataclass(frozen=True)
class ExperimentPlan:
    """The full experimental protocol for one corpus."""

    corpus_source: str
    permutation_seeds: tuple[int, ...]
    prefix_sizes: tuple[int, ...]
    runs_per_cell: int
    recursion_config: RecursionConfig
    hdp_config: HdpConfig
    initial_k_source: str | int = "hdp2"  # "hdp1", "hdp2", or an explicit count
    base_seed: int = 0

    def __post_init__(self):
        if self.runs_per_cell < 1:
            raise ExperimentsError(f"runs_per_cell must be >= 1, got {self.runs_per_cell}")
        if not self.permutation_seeds:
            raise ExperimentsError("need at least one permutation seed")
        if not self.prefix_sizes:
            raise ExperimentsError("need at least one prefix size")
        if list(self.prefix_sizes) != sorted(self.prefix_sizes):
            raise ExperimentsError(f"prefix sizes must be ascending, got {self.prefix_sizes}")
        if any(s < 1 for s in self.prefix_sizes):
            raise ExperimentsError("prefix sizes must be positive")
        if isinstance(self.initial_k_source, str):
            if self.initial_k_source not in ("hdp1", "hdp2"):
                raise ExperimentsError(f"unknown initial_k_source {self.initial_k_source!r}")
        elif self.initial_k_source < 1:
            raise ExperimentsError(f"explicit initial k must be >= 1, got {self.initial_k_source}")

    def to_dict(self) -> dict:
        return {
            "corpus_source": self.corpus_source,
            "permutation_seeds": list(self.permutation_seeds),
            "prefix_sizes": list(self.prefix_sizes),
            "runs_per_cell": self.runs_per_cell,
            "recursion_config": self.recursion_config.to_dict(),
            "hdp_config": self.hdp_config.to_dict(),
            "initial_k_source": self.initial_k_source,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        try:
            return cls(
                corpus_source=data["corpus_source"],
                permutation_seeds=tuple(data["permutation_seeds"]),
                prefix_sizes=tuple(data["prefix_sizes"]),
                runs_per_cell=data["runs_per_cell"],
                recursion_config=RecursionConfig.from_dict(data.get("recursion_config", {})),
                hdp_config=HdpConfig.from_dict(data.get("hdp_config", {})),
                initial_k_source=data.get("initial_k_source", "hdp2"),
                base_seed=data.get("base_seed", 0),
            )
        except KeyError as exc:
            raise ExperimentsError(f"plan is missing required field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ExperimentsError(f"plan is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class CellReport:
    """Aggregates for one (permutation seed, prefix size) cell."""

    cell_id: str
    permutation_seed: int
    prefix_size: int
    hdp1: int | None = None
    hdp2: int | None = None
    initial_k: int | None = None
    final_ks: tuple[int, ...] = ()
    mean_mode_final_k: int | None = None
    failure_rate: float | None = None
    termination_histogram: dict[int, int] | None = None
    cumulative_proportion: dict[int, float] | None = None
    marginal_proportion: dict[int, float] | None = None
    wall_times: dict[str, float] | None = None
    topic_histogram: dict[int, int] | None = None
    traces: tuple[RecursionTrace, ...] = ()
    error: str | None = None


@dataclass(frozen=True)
class ExperimentReport:
    plan: ExperimentPlan
    cells: tuple[CellReport, ...]

    @property
    def failed_cells(self) -> tuple[str, ...]:
        return tuple(c.cell_id for c in self.cells if c.error is not None)


def cell_stats_from_traces(traces) -> dict:
    """Histogram, cumulative/marginal curves, failure rate, mean-mode final K.

    Shared by the online aggregation and the replay-from-archive path, so
    the two can be compared verbatim.
    """
    traces = list(traces)
    runs = len(traces)
    step_counts = [len(t.steps) for t in traces]
    histogram = Counter(step_counts)
    max_step = max(step_counts)
    full_histogram = {s: int(histogram.get(s, 0)) for s in range(1, max_step + 1)}
    cumulative: dict[int, float] = {}
    marginal: dict[int, float] = {}
    acc = 0
    for s in range(1, max_step + 1):
        acc += full_histogram[s]
        cumulative[s] = acc / runs
        marginal[s] = full_histogram[s] / runs
    failures = sum(1 for t in traces if t.outcome.is_failure)
    return {
        "final_ks": tuple(t.final_k for t in traces),
        "mean_mode_final_k": mean_mode([t.final_k for t in traces]),
        "failure_rate": failures / runs,
        "termination_histogram": full_histogram,
        "cumulative_proportion": cumulative,
        "marginal_proportion": marginal,
    }


def _cell_id(permutation_seed: int, prefix_size: int) -> str:
    return f"perm{permutation_seed}-n{prefix_size}"


def _resolve_initial_k(plan: ExperimentPlan, estimate: HdpEstimate) -> int:
    if plan.initial_k_source == "hdp1":
        return estimate.hdp1
    if plan.initial_k_source == "hdp2":
        return estimate.hdp2
    return int(plan.initial_k_source)


def _run_cell(
    corpus: Corpus, plan: ExperimentPlan, permutation_seed: int, prefix_size: int, parallelism: int
) -> CellReport:
    cell_id = _cell_id(permutation_seed, prefix_size)
    try:
        subset = prefix(permute(corpus, permutation_seed), prefix_size)

        hdp_seed = derive_seed(plan.base_seed, "cell", permutation_seed, prefix_size, "hdp")
        t0 = time.perf_counter()
        estimate = fit_hdp(subset, replace(plan.hdp_config, seed=hdp_seed))
        t_hdp = time.perf_counter() - t0
        initial_k = _resolve_initial_k(plan, estimate)

        # Timing baseline: the non-recursive path is the HDP fit plus a
        # single LDA fit at its suggested count.
        lda_seed = derive_seed(plan.base_seed, "cell", permutation_seed, prefix_size, "baseline-lda")
        t0 = time.perf_counter()
        baseline = fit(subset, replace(plan.recursion_config.lda_template, k=initial_k, seed=lda_seed))
        t_baseline_lda = time.perf_counter() - t0

        def one_run(r: int) -> tuple[RecursionTrace, float]:
            run_seed = derive_seed(plan.base_seed, "cell", permutation_seed, prefix_size, "run", r)
            cfg = replace(plan.recursion_config, base_seed=run_seed)
            start = time.perf_counter()
            trace = run_recursion(subset, cfg, initial_k)
            return trace, time.perf_counter() - start

        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                results = list(pool.map(one_run, range(plan.runs_per_cell)))
        else:
            results = [one_run(r) for r in range(plan.runs_per_cell)]
        traces = tuple(tr for tr, _ in results)
        run_seconds = [sec for _, sec in results]

        stats = cell_stats_from_traces(traces)
        wall_times = {
            "hdp_path_seconds": t_hdp + t_baseline_lda,
            "recursive_path_seconds": t_hdp + statistics.mean(run_seconds),
        }
        # Representative topic histogram for the cell: a fresh fit at the
        # aggregated count, deterministically seeded.
        hist_seed = derive_seed(plan.base_seed, "cell", permutation_seed, prefix_size, "histogram")
        hist_model = fit(
            subset, replace(plan.recursion_config.lda_template, k=stats["mean_mode_final_k"], seed=hist_seed)
        )
        topic_histogram = emit_histogram_data(hist_model)

        return CellReport(
            cell_id=cell_id,
            permutation_seed=permutation_seed,
            prefix_size=prefix_size,
            hdp1=estimate.hdp1,
            hdp2=estimate.hdp2,
            initial_k=initial_k,
            final_ks=stats["final_ks"],
            mean_mode_final_k=stats["mean_mode_final_k"],
            failure_rate=stats["failure_rate"],
            termination_histogram=stats["termination_histogram"],
            cumulative_proportion=stats["cumulative_proportion"],
            marginal_proportion=stats["marginal_proportion"],
            wall_times=wall_times,
            topic_histogram=topic_histogram,
            traces=traces,
        )
    except Exception as exc:  # a broken cell must not sink the plan
        return CellReport(
            cell_id=cell_id,
            permutation_seed=permutation_seed,
            prefix_size=prefix_size,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_plan(corpus: Corpus, plan: ExperimentPlan, parallelism: int = 1) -> ExperimentReport:
    """Execute every (permutation, prefix) cell of the plan."""
    n = corpus.n_documents
    for size in plan.prefix_sizes:
        if size > n:
            raise ExperimentsError(f"prefix size {size} exceeds corpus size {n}")
    cells = []
    for permutation_seed in plan.permutation_seeds:
        for prefix_size in plan.prefix_sizes:
            cells.append(_run_cell(corpus, plan, permutation_seed, prefix_size, parallelism))
    return ExperimentReport(plan=plan, cells=tuple(cells))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _trace_to_archive(trace: RecursionTrace) -> dict:
    return {
        "base_seed": trace.config.base_seed,
        "outcome": trace.outcome.value,
        "steps": [s.to_dict() for s in trace.steps],
    }


def _trace_from_archive(data: dict, recursion_config: RecursionConfig) -> RecursionTrace:
    return RecursionTrace(
        steps=tuple(RecursionStep.from_dict(s) for s in data["steps"]),
        outcome=Outcome(data["outcome"]),
        config=replace(recursion_config, base_seed=data["base_seed"]),
        final_model=None,
    )


def _cell_to_dict(cell: CellReport, include_timing: bool) -> dict:
    out = {
        "cell_id": cell.cell_id,
        "permutation_seed": cell.permutation_seed,
        "prefix_size": cell.prefix_size,
        "error": cell.error,
    }
    if cell.error is not None:
        return out
    out.update(
        {
            "hdp1": cell.hdp1,
            "hdp2": cell.hdp2,
            "initial_k": cell.initial_k,
            "final_ks": list(cell.final_ks),
            "mean_mode_final_k": cell.mean_mode_final_k,
            "failure_rate": cell.failure_rate,
            "termination_histogram": {str(k): v for k, v in cell.termination_histogram.items()},
            "cumulative_proportion": {str(k): v for k, v in cell.cumulative_proportion.items()},
            "marginal_proportion": {str(k): v for k, v in cell.marginal_proportion.items()},
            "topic_histogram": {str(k): v for k, v in cell.topic_histogram.items()},
            "traces": [_trace_to_archive(t) for t in cell.traces],
        }
    )
    if include_timing:
        out["wall_times"] = dict(cell.wall_times)
    return out


def report_to_json(report: ExperimentReport, include_timing: bool = True) -> str:
    """Serialize the full report. ``include_timing=False`` drops wall times
    so byte-level comparisons between reruns are meaningful."""
    payload = {
        "plan": report.plan.to_dict(),
        "cells": [_cell_to_dict(c, include_timing) for c in report.cells],
    }
    return canonical_json(payload)


def report_from_json(text: str) -> ExperimentReport:
    data = json.loads(text)
    plan = ExperimentPlan.from_dict(data["plan"])
    cells = []
    for c in data["cells"]:
        if c.get("error") is not None:
            cells.append(
                CellReport(
                    cell_id=c["cell_id"],
                    permutation_seed=c["permutation_seed"],
                    prefix_size=c["prefix_size"],
                    error=c["error"],
                )
            )
            continue
        cells.append(
            CellReport(
                cell_id=c["cell_id"],
                permutation_seed=c["permutation_seed"],
                prefix_size=c["prefix_size"],
                hdp1=c["hdp1"],
                hdp2=c["hdp2"],
                initial_k=c["initial_k"],
                final_ks=tuple(c["final_ks"]),
                mean_mode_final_k=c["mean_mode_final_k"],
                failure_rate=c["failure_rate"],
                termination_histogram={int(k): v for k, v in c["termination_histogram"].items()},
                cumulative_proportion={int(k): v for k, v in c["cumulative_proportion"].items()},
                marginal_proportion={int(k): v for k, v in c["marginal_proportion"].items()},
                wall_times=dict(c["wall_times"]) if "wall_times" in c else None,
                topic_histogram={int(k): v for k, v in c["topic_histogram"].items()},
                traces=tuple(_trace_from_archive(t, plan.recursion_config) for t in c["traces"]),
            )
        )
    return ExperimentReport(plan=plan, cells=tuple(cells))


# ---------------------------------------------------------------------------
# CSV exports (stable column order, 6-decimal floats)
# ---------------------------------------------------------------------------


def _f6(x: float) -> str:
    return f"{x:.6f}"


def write_report_csvs(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write final_k.csv, termination.csv, timing.csv, histogram_<cell>.csv."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    ok_cells = [c for c in report.cells if c.error is None]

    lines = ["cell,hdp1,hdp2,mean_mode_k"]
    for c in ok_cells:
        lines.append(f"{c.cell_id},{c.hdp1},{c.hdp2},{c.mean_mode_final_k}")
    written.append(write_text(out_dir / "final_k.csv", "\n".join(lines) + "\n"))

    lines = ["cell,step,marginal,cumulative"]
    for c in ok_cells:
        for step in sorted(c.cumulative_proportion):
            lines.append(
                f"{c.cell_id},{step},{_f6(c.marginal_proportion[step])},{_f6(c.cumulative_proportion[step])}"
            )
    written.append(write_text(out_dir / "termination.csv", "\n".join(lines) + "\n"))

    lines = ["cell,hdp_path_seconds,recursive_path_seconds"]
    for c in ok_cells:
        if c.wall_times is None:
            continue
        lines.append(
            f"{c.cell_id},{_f6(c.wall_times['hdp_path_seconds'])},{_f6(c.wall_times['recursive_path_seconds'])}"
        )
    written.append(write_text(out_dir / "timing.csv", "\n".join(lines) + "\n"))

    for c in ok_cells:
        lines = ["topic,document_count"]
        for topic in sorted(c.topic_histogram):
            lines.append(f"{topic},{c.topic_histogram[topic]}")
        written.append(write_text(out_dir / f"histogram_{c.cell_id}.csv", "\n".join(lines) + "\n"))
    return written
