"""Uniformly sampled multi-variable signals."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class SignalError(ValueError):
    pass


@dataclass(frozen=True)
class Signal:
    """A uniformly sampled trace of real-valued variables.

    ``samples`` is an (n, k) array; sample i is taken at
    ``start_time + i * sample_period``.
    """

    sample_period: float
    variables: tuple[str, ...]
    samples: np.ndarray = field(repr=False)
    start_time: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2:
            raise SignalError("samples must be a 2-D array (n samples x k variables)")
        if arr.shape[0] < 1:
            raise SignalError("a signal needs at least one sample")
        if arr.shape[1] != len(self.variables):
            raise SignalError(
                f"each sample must have {len(self.variables)} components, got {arr.shape[1]}"
            )
        if self.sample_period <= 0:
            raise SignalError("sample_period must be positive")
        if len(set(self.variables)) != len(self.variables):
            raise SignalError("duplicate variable names")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "variables", tuple(self.variables))

    @classmethod
    def from_columns(cls, sample_period: float, columns: dict[str, list[float]],
                     start_time: float = 0.0) -> "Signal":
        names = tuple(columns)
        arr = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
        return cls(sample_period, names, arr, start_time)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self) - 1) * self.sample_period

    def time_of(self, index: int) -> float:
        return self.start_time + index * self.sample_period

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the sample at time ``t``; ``t`` must align to the grid."""
        rel = (t - self.start_time) / self.sample_period
        idx = int(round(rel))
        if abs(rel - idx) > tol / self.sample_period + 1e-9:
            raise SignalError(f"time {t} does not align to the sample grid")
        if not 0 <= idx < len(self):
            raise SignalError(f"time {t} is outside the signal")
        return idx

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.variables.index(name)
        except ValueError:
            raise SignalError(f"unknown variable {name!r}") from None
        return self.samples[:, j]

    def value_at(self, name: str, index: int) -> float:
        return float(self.column(name)[index])

    def sample_dict(self, index: int) -> dict[str, float]:
        return {v: float(self.samples[index, j]) for j, v in enumerate(self.variables)}

    def concatenate(self, other: "Signal") -> "Signal":
        """Append ``other`` after this signal (grids and variables must match)."""
        if other.variables != self.variables:
            raise SignalError("variable mismatch in concatenation")
        if abs(other.sample_period - self.sample_period) > 1e-12:
            raise SignalError("sample period mismatch in concatenation")
        expected = self.end_time + self.sample_period
        if abs(other.start_time - expected) > 1e-9:
            raise SignalError("concatenated signal must start one period after this one ends")
        return Signal(self.sample_period, self.variables,
                      np.vstack([self.samples, other.samples]), self.start_time)


def load_trace_csv(path: str) -> Signal:
    """Load a trace CSV whose first column is `time`; spacing must be uniform."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "time":
            raise SignalError(f"{path}: first column must be 'time'")
        names = tuple(h.strip() for h in header[1:])
        times: list[float] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise SignalError(f"{path}:{lineno}: {exc}") from None
            if len(vals) != len(names) + 1:
                raise SignalError(f"{path}:{lineno}: expected {len(names) + 1} columns")
            times.append(vals[0])
            rows.append(vals[1:])
    if not rows:
        raise SignalError(f"{path}: empty trace")
    if len(times) == 1:
        period = 1.0
    else:
        diffs = np.diff(times)
        period = float(diffs[0])
        if period <= 0 or np.any(np.abs(diffs - period) > 1e-6 * max(1.0, abs(period))):
            raise SignalError(f"{path}: time column is not uniformly spaced")
    return Signal(period, names, np.asarray(rows, dtype=float), start_time=times[0])
