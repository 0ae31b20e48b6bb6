"""Convoy cohesion metrics: platooning error and speed difference.

Platooning error is ``|gap - desired_gap|`` per follower per tick, with the
gap measured center to center in the ENU plane. Speed difference is the
per-tick spread (max - min) of speeds over the whole string, leader
included. Run-level statistics are the nearest-rank 95th percentile of the
platooning error and the time mean of the speed difference.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import EmptyInputError, IncompleteSweepError, MalformedTraceError
from .sim.trace import SCHEMA_LINE, Trace


@dataclass(frozen=True)
class MetricSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise MalformedTraceError(f"{self.label}: {len(self.times)} times vs {len(self.values)} values")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise MalformedTraceError(f"{self.label}: times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    def masked(self, mask: np.ndarray) -> MetricSeries:
        return MetricSeries(self.times[mask], self.values[mask], self.label)


def _require_rows(trace: Trace) -> None:
    if len(trace) == 0:
        raise EmptyInputError("trace has no rows")


def platooning_error(trace: Trace, d_des: float = 15.0) -> list[MetricSeries]:
    """One series per follower (vehicle 1..n)."""
    _require_rows(trace)
    times = trace.times()
    gaps = trace.gaps()
    return [
        MetricSeries(times, np.abs(gaps[:, j] - d_des), f"v{j + 1}_platooning_error_m")
        for j in range(gaps.shape[1])
    ]


def speed_difference(trace: Trace) -> MetricSeries:
    _require_rows(trace)
    speeds = trace.speeds()
    return MetricSeries(trace.times(), speeds.max(axis=1) - speeds.min(axis=1), "speed_difference_mps")


def percentile_95(series: Union[MetricSeries, Sequence[float], np.ndarray]) -> float:
    """Nearest-rank 95th percentile: element ``ceil(0.95 N) - 1`` of the sorted values."""
    values = series.values if isinstance(series, MetricSeries) else np.asarray(series, dtype=float)
    n = len(values)
    if n == 0:
        raise EmptyInputError("percentile of an empty series")
    rank = (95 * n + 99) // 100  # ceil(0.95 n) in exact integer arithmetic
    return float(np.sort(values)[rank - 1])


def steady_state_mask(times: np.ndarray, change_times: Iterable[float], settle: float = 15.0) -> np.ndarray:
    """True for ticks outside the ``settle`` window after each speed change."""
    mask = np.ones(len(times), dtype=bool)
    for t0 in change_times:
        mask &= ~((times >= t0) & (times < t0 + settle))
    return mask


@dataclass(frozen=True)
class RunMetrics:
    mean_speed_difference: float
    p95_platooning_error: tuple[float, ...]  # per follower

    @property
    def p95_worst(self) -> float:
        return max(self.p95_platooning_error) if self.p95_platooning_error else 0.0


def run_metrics(trace: Trace, d_des: float = 15.0) -> RunMetrics:
    sd = speed_difference(trace)
    errors = platooning_error(trace, d_des)
    return RunMetrics(float(np.mean(sd.values)), tuple(percentile_95(e) for e in errors))


@dataclass(frozen=True)
class SweepRow:
    per: float
    mean_speed_difference: float
    p95_platooning_error: float
    seeds: int
    p95_per_follower: tuple[float, ...] = ()


@dataclass(frozen=True)
class SweepSummary:
    rows: tuple[SweepRow, ...]
    seeds: tuple[int, ...]
    runs: Mapping[tuple[float, int], RunMetrics] = field(default_factory=dict)

    @property
    def per_levels(self) -> list[float]:
        return [r.per for r in self.rows]

    def trend(self) -> tuple[float, float]:
        """Spearman rank correlation of PER against (mean speed difference, p95 error)."""
        if len(self.rows) < 2:
            return math.nan, math.nan
        pers = self.per_levels
        sd = stats.spearmanr(pers, [r.mean_speed_difference for r in self.rows]).statistic
        pe = stats.spearmanr(pers, [r.p95_platooning_error for r in self.rows]).statistic
        return float(sd), float(pe)

    def to_csv(self) -> str:
        followers = max((len(r.p95_per_follower) for r in self.rows), default=0)
        buf = io.StringIO()
        buf.write(SCHEMA_LINE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["per", "mean_speed_difference_mps", "p95_platooning_error_m", "seeds"]
            + [f"v{j + 1}_p95_platooning_error_m" for j in range(followers)]
        )
        for r in self.rows:
            w.writerow(
                [repr(r.per), repr(r.mean_speed_difference), repr(r.p95_platooning_error), r.seeds]
                + [repr(v) for v in r.p95_per_follower]
            )
        return buf.getvalue()

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv())


def sweep_aggregate(
    runs: Mapping[tuple[float, int], Union[Trace, RunMetrics]],
    d_des: float = 15.0,
    levels: Optional[Iterable[float]] = None,
) -> SweepSummary:
    """Average run metrics over seeds, one row per PER level in ascending order.

    The per-run error statistic is the worst follower's p95; per-follower
    means are kept alongside. ``levels`` lists the PER values that must be
    present.
    """
    if not runs:
        raise IncompleteSweepError("no runs to aggregate")
    metrics = {
        key: value if isinstance(value, RunMetrics) else run_metrics(value, d_des)
        for key, value in runs.items()
    }
    by_level: dict[float, list[RunMetrics]] = {}
    for (per, _seed), m in sorted(metrics.items()):
        by_level.setdefault(per, []).append(m)
    if levels is not None:
        missing = [p for p in levels if p not in by_level]
        if missing:
            raise IncompleteSweepError(f"no runs for PER level(s) {missing}")
    rows = []
    for per in sorted(by_level):
        ms = by_level[per]
        per_follower = tuple(float(np.mean(col)) for col in zip(*(m.p95_platooning_error for m in ms)))
        rows.append(SweepRow(
            per=per,
            mean_speed_difference=float(np.mean([m.mean_speed_difference for m in ms])),
            p95_platooning_error=float(np.mean([m.p95_worst for m in ms])),
            seeds=len(ms),
            p95_per_follower=per_follower,
        ))
    seeds = tuple(sorted({seed for _, seed in metrics}))
    return SweepSummary(tuple(rows), seeds, metrics)


def series_to_csv(series: Sequence[MetricSeries]) -> str:
    """Write series sharing one time base as columns."""
    if not series:
        raise EmptyInputError("no series to write")
    times = series[0].times
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s"] + [s.label for s in series])
    for k in range(len(times)):
        w.writerow([repr(float(times[k]))] + [repr(float(s.values[k])) for s in series])
    return buf.getvalue()
