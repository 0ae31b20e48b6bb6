"""Per-tick simulation ground truth and its CSV form.

The CSV starts with a ``# schema=1`` comment line, then a header whose
column names carry their units (``_m``, ``_mps``, ``_rad``, ``_s``).
Floats are written with ``repr`` so a trace round-trips exactly and two
runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from ..errors import EmptyInputError, MalformedTraceError

SCHEMA_LINE = "# schema=1"

_FLOAT_FIELDS = (
    ("east", "east_m"),
    ("north", "north_m"),
    ("speed", "speed_mps"),
    ("heading", "heading_rad"),
    ("cmd_speed", "cmd_speed_mps"),
    ("steer", "steer_rad"),
)
_COUNT_FIELDS = ("rx_offered", "rx_accepted", "rx_lost", "rx_gate", "rx_stale")


@dataclass(frozen=True, slots=True)
class VehicleTick:
    east: float
    north: float
    speed: float
    heading: float
    cmd_speed: float
    steer: float
    gap: Optional[float] = None  # to the predecessor; None for the leader
    rx_offered: int = 0
    rx_accepted: int = 0
    rx_lost: int = 0
    rx_gate: int = 0
    rx_stale: int = 0


@dataclass(frozen=True, slots=True)
class TraceRow:
    time: float
    vehicles: tuple[VehicleTick, ...]


def trace_columns(vehicle_count: int, with_gaps: bool = True) -> list[str]:
    cols = ["t_s"]
    for i in range(vehicle_count):
        cols += [f"v{i}_{suffix}" for _, suffix in _FLOAT_FIELDS]
        if i > 0 and with_gaps:
            cols.append(f"v{i}_gap_m")
        cols += [f"v{i}_{name}" for name in _COUNT_FIELDS]
    return cols


class Trace:
    def __init__(self, vehicle_count: int, rows: Iterable[TraceRow] = ()):
        self.vehicle_count = vehicle_count
        self.rows: list[TraceRow] = list(rows)

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.rows], dtype=float)

    def column(self, index: int, attr: str) -> np.ndarray:
        return np.array([getattr(r.vehicles[index], attr) for r in self.rows], dtype=float)

    def speeds(self) -> np.ndarray:
        """(ticks, vehicles) speed matrix."""
        return np.array([[v.speed for v in r.vehicles] for r in self.rows], dtype=float).reshape(
            len(self.rows), self.vehicle_count
        )

    def gaps(self) -> np.ndarray:
        """(ticks, followers) gap matrix."""
        out = np.empty((len(self.rows), max(self.vehicle_count - 1, 0)))
        for k, row in enumerate(self.rows):
            for i in range(1, self.vehicle_count):
                gap = row.vehicles[i].gap
                if gap is None:
                    raise MalformedTraceError(f"trace row {k} lacks v{i}_gap_m")
                out[k, i - 1] = gap
        return out

    @property
    def has_gaps(self) -> bool:
        return all(v.gap is not None for r in self.rows for v in r.vehicles[1:])

    # -- CSV ------------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def write_csv(self, dest: Union[str, Path, io.TextIOBase]) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self.write_csv(fh)
            return
        with_gaps = self.has_gaps
        dest.write(SCHEMA_LINE + "\n")
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(trace_columns(self.vehicle_count, with_gaps))
        for row in self.rows:
            out = [repr(float(row.time))]
            for i, v in enumerate(row.vehicles):
                out += [repr(float(getattr(v, attr))) for attr, _ in _FLOAT_FIELDS]
                if i > 0 and with_gaps:
                    out.append(repr(float(v.gap)))
                out += [str(getattr(v, name)) for name in _COUNT_FIELDS]
            writer.writerow(out)

    @classmethod
    def read_csv(cls, src: Union[str, Path, io.TextIOBase]) -> Trace:
        if isinstance(src, (str, Path)):
            with open(src, newline="") as fh:
                return cls.read_csv(fh)
        lines = src.read().splitlines()
        comments = [ln for ln in lines if ln.startswith("#")]
        body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
        if not body:
            raise EmptyInputError("trace file is empty")
        if comments and SCHEMA_LINE not in comments:
            raise MalformedTraceError(f"unsupported trace schema: {comments[0]!r}")
        reader = csv.reader(body)
        header = next(reader)
        index = {name: k for k, name in enumerate(header)}
        if "t_s" not in index:
            raise MalformedTraceError("missing column t_s")
        ids = sorted({int(m.group(1)) for name in header if (m := re.match(r"v(\d+)_", name))})
        count = len(ids)
        if ids != list(range(count)):
            raise MalformedTraceError(f"vehicle columns must be numbered 0..n-1, found {ids}")
        required = [c for c in trace_columns(count, with_gaps=False)]
        missing = [c for c in required if c not in index]
        if missing:
            raise MalformedTraceError(f"missing column {missing[0]}" + (f" (+{len(missing) - 1} more)" if len(missing) > 1 else ""))
        gap_cols = [index.get(f"v{i}_gap_m") for i in range(count)]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise MalformedTraceError(f"data row {lineno}: {len(rec)} fields, header has {len(header)}")
            try:
                ticks = []
                for i in range(count):
                    floats = [float(rec[index[f"v{i}_{suffix}"]]) for _, suffix in _FLOAT_FIELDS]
                    counts = [int(rec[index[f"v{i}_{name}"]]) for name in _COUNT_FIELDS]
                    gap = float(rec[gap_cols[i]]) if i > 0 and gap_cols[i] is not None else None
                    ticks.append(VehicleTick(*floats, gap, *counts))
                rows.append(TraceRow(float(rec[index["t_s"]]), tuple(ticks)))
            except ValueError as exc:
                raise MalformedTraceError(f"data row {lineno}: {exc}") from None
        if not rows:
            raise EmptyInputError("trace has a header but no rows")
        return cls(count, rows)
