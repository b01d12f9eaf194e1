"""Value types shared by every module: cadlag step functions, finite marked
point measures and the power-law tail measure.

All types are immutable once built (their numpy buffers are marked
read-only), so they can be passed freely between worker processes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

#: Distinguished top value for marks. Extended-real ``max`` with it works as
#: expected because it is IEEE ``+inf``.
TOP = math.inf

#: Truncation sentinel meaning "every index retained, whatever the sign of
#: its mark".
RETAIN_ALL = -math.inf


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def _encode_real(x: float):
    # JSON has no infinities.
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return float(x)


def _decode_real(x) -> float:
    if isinstance(x, str):
        return float(x.replace("+", ""))
    return float(x)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function on ``[0, horizon]``.

    The value is ``initial_value`` on ``[0, t_1)`` and ``values[i]`` on
    ``[t_i, t_{i+1})``; the last value extends to the horizon. Jump times lie
    in ``(0, horizon]`` and are strictly increasing. A "jump" may repeat the
    previous value; builders in this package only emit genuine changes.
    """

    initial_value: float
    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __init__(self, initial_value: float, times: Sequence[float] = (),
                 values: Sequence[float] = (), horizon: float = 1.0):
        times = _frozen(times)
        values = _frozen(values)
        if times.shape != values.shape:
            raise ValueError("times and values must have equal length")
        if not horizon > 0 or not math.isfinite(horizon):
            raise DomainError(f"horizon must be positive and finite, got {horizon}")
        if not math.isfinite(initial_value) or not np.all(np.isfinite(values)):
            raise ValueError("step function values must be finite")
        if times.size:
            if times[0] <= 0 or times[-1] > horizon:
                raise DomainError("jump times must lie in (0, horizon]")
            if np.any(np.diff(times) <= 0):
                raise ValueError("jump times must be strictly increasing")
        object.__setattr__(self, "initial_value", float(initial_value))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", float(horizon))

    @classmethod
    def from_jumps(cls, initial_value: float, jumps: Iterable[tuple[float, float]],
                   horizon: float) -> "StepFunction":
        jumps = list(jumps)
        times = [t for t, _ in jumps]
        values = [v for _, v in jumps]
        return cls(initial_value, times, values, horizon)

    @classmethod
    def from_samples(cls, times: np.ndarray, values: np.ndarray,
                     horizon: float) -> "StepFunction":
        """Build from a value sequence observed at ``times`` (first time 0),
        keeping only the points where the value actually changes."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.size == 0 or times[0] != 0.0:
            raise DomainError("sampled path must start at time 0")
        change = np.flatnonzero(values[1:] != values[:-1]) + 1
        return cls(values[0], times[change], values[change], horizon)

    @property
    def jumps(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))

    def __call__(self, t):
        return step_eval(self, t)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (self.initial_value == other.initial_value
                and self.horizon == other.horizon
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def breakpoints(self) -> np.ndarray:
        """``0`` followed by the jump times."""
        return np.concatenate(([0.0], self.times))

    def level_values(self) -> np.ndarray:
        """Values on each constancy interval, aligned with ``breakpoints``."""
        return np.concatenate(([self.initial_value], self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.level_values())))

    def to_dict(self) -> dict:
        return {
            "initial_value": self.initial_value,
            "jumps": [[t, v] for t, v in self.jumps],
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls.from_jumps(d["initial_value"], [tuple(j) for j in d["jumps"]], d["horizon"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        return cls.from_dict(json.loads(text))

    def to_csv(self, path) -> None:
        """Write ``t,value`` rows: time 0 and then every jump point."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.breakpoints(), self.level_values()):
                w.writerow([repr(float(t)), repr(float(v))])


def step_eval(f: StepFunction, t):
    """Right-continuous value of ``f`` at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 0)) or np.any(t_arr > f.horizon):
        raise DomainError(f"evaluation time outside [0, {f.horizon}]")
    idx = np.searchsorted(f.times, t_arr, side="right")
    out = f.level_values()[idx]
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Finite sum of unit masses at ``(times[i], marks[i])`` on
    ``[0, horizon] x (-inf, +inf]``.

    ``truncation`` records the level below which marks may have been
    discarded: ``0`` means exhaustive over positive marks and
    ``RETAIN_ALL`` means nothing at all was dropped. Finiteness of the
    restriction to ``[0, T] x {|y| >= delta}`` holds by construction.

    The constructor keeps the order it is given so that
    :func:`validate_measure` can report unsorted input; use
    :meth:`from_points` to get a (stably) sorted measure.
    """

    times: np.ndarray
    marks: np.ndarray
    horizon: float
    truncation: float = 0.0

    def __init__(self, times: Sequence[float] = (), marks: Sequence[float] = (),
                 horizon: float = 1.0, truncation: float = 0.0):
        times = _frozen(times)
        marks = _frozen(marks)
        if times.shape != marks.shape:
            raise ValueError("times and marks must have equal length")
        if not horizon > 0 or not math.isfinite(horizon):
            raise DomainError(f"horizon must be positive and finite, got {horizon}")
        if np.any(np.isnan(marks)) or np.any(marks == -np.inf):
            raise ValueError("marks must be finite or +inf")
        if np.any(~np.isfinite(times)):
            raise ValueError("point times must be finite")
        if math.isnan(truncation) or truncation == math.inf:
            raise ValueError("truncation must be a real number or RETAIN_ALL")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "truncation", float(truncation))

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]], horizon: float,
                    truncation: float = 0.0) -> "PointMeasure":
        pts = list(points)
        times = np.array([p[0] for p in pts], dtype=float)
        marks = np.array([p[1] for p in pts], dtype=float)
        order = np.argsort(times, kind="stable")
        return cls(times[order], marks[order], horizon, truncation)

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return (self.horizon == other.horizon and self.truncation == other.truncation
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.marks, other.marks))

    __hash__ = None

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.marks.tolist()))

    def count(self, s_lo: float, s_hi: float, x: float) -> int:
        """Number of atoms in ``[s_lo, s_hi] x (x, +inf]``."""
        sel = (self.times >= s_lo) & (self.times <= s_hi) & (self.marks > x)
        return int(np.count_nonzero(sel))

    def restrict(self, level: float) -> "PointMeasure":
        """Atoms with mark strictly above ``level``."""
        keep = self.marks > level
        return PointMeasure(self.times[keep], self.marks[keep], self.horizon,
                            max(self.truncation, level))

    def to_dict(self) -> dict:
        return {
            "points": [[t, _encode_real(y)] for t, y in self.points],
            "horizon": self.horizon,
            "truncation": _encode_real(self.truncation),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PointMeasure":
        pts = d["points"]
        return cls([p[0] for p in pts], [_decode_real(p[1]) for p in pts],
                   d["horizon"], _decode_real(d.get("truncation", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PointMeasure":
        return cls.from_dict(json.loads(text))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "mark"])
            for t, y in self.points:
                w.writerow([repr(t), "inf" if y == TOP else repr(y)])

    @classmethod
    def from_csv(cls, path, horizon: float, truncation: float = 0.0) -> "PointMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["time"]) for r in rows], [float(r["mark"]) for r in rows],
                   horizon, truncation)


def validate_measure(nu: PointMeasure) -> Optional[str]:
    """Return ``None`` if ``nu`` is well formed, else a short description.

    The finite-count requirement is structural (a ``PointMeasure`` is a
    finite list), so only ordering and the time window are checked.
    """
    if nu.times.size and np.any(np.diff(nu.times) < 0):
        return "unsorted"
    if nu.times.size and (nu.times[0] < 0 or nu.times[-1] > nu.horizon):
        return "out of horizon"
    return None


@dataclass(frozen=True)
class TailLaw:
    """Power-law measure on ``(0, inf]`` with ``mu((x, inf]) = c * x**-a``."""

    c: float = 1.0
    a: float = 2.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"c must be positive, got {self.c}")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"a must be positive, got {self.a}")

    def tail_mass(self, x):
        """``mu((x, inf])``; ``inf`` at ``x = 0``."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = self.c * x ** (-self.a)
        return float(out) if out.ndim == 0 else out


def ensure_same_horizon(*objs) -> float:
    horizons = {o.horizon for o in objs}
    if len(horizons) != 1:
        raise DomainError(f"horizon mismatch: {sorted(horizons)}")
    return horizons.pop()
