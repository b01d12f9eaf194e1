"""The running-supremum functional ``F(f, nu)`` and the machinery used to show
it is continuous: matched time changes, an explicit Skorokhod J1 upper
bound, the modulus of continuity and a deterministic family of converging
inputs on which all of it can be checked numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (DomainError, PointMeasure, StepFunction, ensure_same_horizon,
                   step_eval, validate_measure)


class NotMatchedError(ValueError):
    """The two measures have different numbers of atoms above the threshold."""


class TimeChangeError(ValueError):
    """Matched knots do not define a strictly increasing map."""


def _check_pair(f: StepFunction, nu: PointMeasure) -> None:
    ensure_same_horizon(f, nu)
    problem = validate_measure(nu)
    if problem is not None:
        raise DomainError(f"invalid point measure: {problem}")


def _atom_values(f: StepFunction, nu: PointMeasure) -> np.ndarray:
    return step_eval(f, nu.times) + nu.marks if len(nu) else np.empty(0)


def eval_F(f: StepFunction, nu: PointMeasure, t):
    """``sup_{k: tau_k <= t} (f(tau_k) + y_k)``, or ``f(0)`` if no atom is at
    or before ``t``. Accepts a scalar or an array of times."""
    _check_pair(f, nu)
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 0)) or np.any(t_arr > nu.horizon):
        raise DomainError(f"evaluation time outside [0, {nu.horizon}]")
    running = np.maximum.accumulate(_atom_values(f, nu))
    idx = np.searchsorted(nu.times, t_arr, side="right")
    table = np.concatenate(([f.initial_value], running))
    out = table[idx]
    return float(out) if out.ndim == 0 else out


def F_path(f: StepFunction, nu: PointMeasure) -> StepFunction:
    """The whole path ``t -> F(f, nu)(t)``; it can only jump at atom times."""
    _check_pair(f, nu)
    if not len(nu):
        return StepFunction(f.initial_value, (), (), f.horizon)
    running = np.maximum.accumulate(_atom_values(f, nu))
    times = nu.times
    last_of_group = np.flatnonzero(np.r_[times[1:] != times[:-1], True])
    g_times = times[last_of_group]
    g_vals = running[last_of_group]
    if np.any(~np.isfinite(g_vals)):
        raise DomainError("F takes an infinite value; paths must stay finite")
    if g_times[0] == 0.0:
        initial, g_times, g_vals = g_vals[0], g_times[1:], g_vals[1:]
    else:
        initial = f.initial_value
    prev = np.concatenate(([initial], g_vals[:-1]))
    keep = g_vals != prev
    return StepFunction(initial, g_times[keep], g_vals[keep], f.horizon)


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Strictly increasing piecewise-linear bijection of ``[0, T]``."""

    knots_x: np.ndarray
    knots_y: np.ndarray

    def __post_init__(self):
        x = np.array(self.knots_x, dtype=float)
        y = np.array(self.knots_y, dtype=float)
        if x.shape != y.shape or x.size < 2:
            raise TimeChangeError("need at least the two endpoint knots")
        if x[0] != 0 or y[0] != 0 or x[-1] != y[-1] or not x[-1] > 0:
            raise TimeChangeError("endpoints must be fixed: lambda(0)=0, lambda(T)=T")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise TimeChangeError("knots must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "knots_x", x)
        object.__setattr__(self, "knots_y", y)

    @classmethod
    def identity(cls, T: float) -> "TimeChange":
        return cls(np.array([0.0, T]), np.array([0.0, T]))

    @property
    def horizon(self) -> float:
        return float(self.knots_x[-1])

    def __call__(self, s):
        return np.interp(s, self.knots_x, self.knots_y)

    def inverse(self, u):
        return np.interp(u, self.knots_y, self.knots_x)

    def sup_deviation(self) -> float:
        """``sup_t |lambda(t) - t|``; attained at a knot."""
        return float(np.max(np.abs(self.knots_y - self.knots_x)))


def build_time_change(nu_n: PointMeasure, nu_0: PointMeasure, gamma: float,
                      T: float) -> TimeChange:
    """Map the i-th atom of ``nu_n`` with mark above ``gamma`` onto the i-th
    such atom of ``nu_0`` (both enumerated by time) and interpolate linearly.
    """
    big_n = nu_n.times[nu_n.marks > gamma]
    big_0 = nu_0.times[nu_0.marks > gamma]
    if big_n.size != big_0.size:
        raise NotMatchedError(
            f"{big_n.size} atoms above {gamma} in nu_n but {big_0.size} in nu_0")
    x = np.concatenate(([0.0], big_n, [T]))
    y = np.concatenate(([0.0], big_0, [T]))
    # A matched pair sitting exactly on an endpoint is already a knot.
    interior = np.ones(x.size, dtype=bool)
    interior[1:-1] = ~(((x[1:-1] == 0) & (y[1:-1] == 0)) | ((x[1:-1] == T) & (y[1:-1] == T)))
    return TimeChange(x[interior], y[interior])


def skorokhod_upper_bound(g1: StepFunction, g2: StepFunction, lam: TimeChange) -> float:
    """``max(sup|lambda - id|, sup_t |g1(t) - g2(lambda(t))|)``, an upper
    bound for the J1 distance between ``g1`` and ``g2``.

    ``lambda`` carries ``g1``'s time axis onto ``g2``'s, which is the
    orientation :func:`build_time_change` produces. ``g1 - g2 o lambda`` is
    piecewise constant, so the supremum is a maximum over the left ends of
    its constancy intervals.
    """
    T = ensure_same_horizon(g1, g2)
    if lam.horizon != T:
        raise DomainError("time change and paths have different horizons")
    pulled = lam.inverse(g2.times)
    # Step to the first float whose image reaches the jump, so the piece
    # right after each jump of g2 is never skipped by rounding.
    for _ in range(8):
        short = lam(pulled) < g2.times
        if not np.any(short):
            break
        pulled = np.where(short, np.nextafter(pulled, np.inf), pulled)
    cand = np.unique(np.clip(np.concatenate(([0.0], g1.times, pulled)), 0.0, T))
    gap = np.abs(step_eval(g1, cand) - step_eval(g2, np.minimum(lam(cand), T)))
    return max(lam.sup_deviation(), float(np.max(gap)))


def sup_distance(g1: StepFunction, g2: StepFunction) -> float:
    """Exact uniform distance between two step functions."""
    ensure_same_horizon(g1, g2)
    cand = np.union1d(g1.breakpoints(), g2.breakpoints())
    return float(np.max(np.abs(step_eval(g1, cand) - step_eval(g2, cand))))


def _sparse_tables(values: np.ndarray):
    mx, mn = [values], [values]
    span = 1
    while 2 * span <= values.size:
        mx.append(np.maximum(mx[-1][:-span], mx[-1][span:]))
        mn.append(np.minimum(mn[-1][:-span], mn[-1][span:]))
        span *= 2
    return mx, mn


def modulus_of_continuity(f: StepFunction, eps: float) -> float:
    """``sup_{|u - v| < eps} |f(u) - f(v)|`` over ``[0, T]``, exactly.

    Constancy pieces ``i < j`` (left ends ``b_i``) contain points closer than
    ``eps`` iff ``b_j - b_{i+1} < eps``; for each ``j`` those ``i`` form a
    contiguous range, so range max/min queries finish the job.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    b = f.breakpoints()
    vals = f.level_values()
    if vals.size == 1:
        return 0.0
    lo = np.searchsorted(b, b - eps, side="right") - 1
    lo = np.clip(lo, 0, None)
    j = np.arange(vals.size)
    length = j - lo + 1
    level = np.floor(np.log2(length)).astype(int)
    mx, mn = _sparse_tables(vals)
    best = 0.0
    for k in np.unique(level):
        sel = level == k
        a, e = lo[sel], j[sel] - (1 << k) + 1
        hi = np.maximum(mx[k][a], mx[k][e])
        low = np.minimum(mn[k][a], mn[k][e])
        best = max(best, float(np.max(hi - low)))
    return best


# ---------------------------------------------------------------------------
# Deterministic converging family

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DemoParams:
    """Shape of the deterministic family ``(f_n, nu_n) -> (f_0, nu_0)``.

    ``f_0`` is the polygon through ``knots`` sampled every ``resolution``;
    ``nu_0`` has one atom at each odd multiple of ``2^-L T`` for
    ``L = 1..levels`` with mark about ``mark_scale * 2^-L``.
    """

    horizon: float = 1.0
    resolution: float = 1e-4
    levels: int = 8
    mark_scale: float = 1.0
    knots: tuple = ((0.0, 0.0), (0.2, 0.6), (0.45, -0.3), (0.7, 0.4), (1.0, 0.1))
    gamma_exponent: float = 1.0
    partition_offset: float = GOLDEN
    max_cells: int = 1024

    def __post_init__(self):
        if not 0 < self.partition_offset < 1:
            raise DomainError("partition offset must lie in (0, 1)")
        if self.levels < 1 or not self.resolution > 0:
            raise DomainError("levels and resolution must be positive")

    @property
    def atom_resolution(self) -> float:
        return self.horizon * 2.0 ** -self.levels


def demo_limit_function(p: DemoParams) -> StepFunction:
    T = p.horizon
    kx = np.array([k[0] for k in p.knots]) * T
    ky = np.array([k[1] for k in p.knots])
    count = int(round(T / p.resolution))
    times = np.arange(count + 1) * (T / count)
    times[-1] = T
    return StepFunction.from_samples(times, np.interp(times, kx, ky), T)


def demo_limit_measure(p: DemoParams) -> PointMeasure:
    T = p.horizon
    times, marks = [], []
    for L in range(1, p.levels + 1):
        i = np.arange(1, 2 ** (L - 1) + 1)
        times.append((2 * i - 1) * T / 2.0 ** L)
        marks.append(p.mark_scale * 2.0 ** -L * (1.0 + 0.5 * np.mod(i * GOLDEN, 1.0)))
    times = np.concatenate(times)
    marks = np.concatenate(marks)
    order = np.argsort(times, kind="stable")
    return PointMeasure(times[order], marks[order], T, 0.0)


def theorem2_demo_instance(n: int, p: DemoParams = DemoParams()):
    """Return ``(f_n, nu_n, f_0, nu_0)``.

    ``f_n`` rounds ``f_0`` to the grid ``Z / n`` (uniform error at most
    ``1 / (2n)``). ``nu_n`` moves every atom of ``nu_0`` by the increasing
    homeomorphism ``t + T sin(pi t / T) / (4n)`` and scales its mark by
    ``1 +- 1/(2n)``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    T = p.horizon
    f0 = demo_limit_function(p)
    nu0 = demo_limit_measure(p)
    fn_levels = np.round(f0.level_values() * n) / n
    fn = StepFunction.from_samples(f0.breakpoints(), fn_levels, T)
    tn = nu0.times + T * np.sin(np.pi * nu0.times / T) / (4.0 * n)
    sign = np.where(np.arange(len(nu0)) % 2 == 0, 1.0, -1.0)
    yn = nu0.marks * (1.0 + sign / (2.0 * n))
    return fn, PointMeasure(tn, yn, T, 0.0), f0, nu0


def check_demo_hypotheses(f0: StepFunction, nu0: PointMeasure, resolution: float,
                          jump_tol: float = math.inf) -> list[str]:
    """Hypotheses of the continuity theorem, checked at a finite resolution:
    positive marks, no atom at time 0, every interval longer than
    ``resolution`` holds an atom, and ``f_0`` has no jump above ``jump_tol``.
    Returns the violated ones (empty list if all hold)."""
    problems = []
    if validate_measure(nu0) is not None:
        problems.append(validate_measure(nu0))
    if np.any(nu0.marks <= 0):
        problems.append("non-positive mark")
    if np.any(nu0.times == 0):
        problems.append("atom at time 0")
    edges = np.concatenate(([0.0], nu0.times, [nu0.horizon]))
    if np.max(np.diff(edges)) > resolution * (1 + 1e-12):
        problems.append("interval without atoms at working resolution")
    jumps = np.abs(np.diff(f0.level_values()))
    if jumps.size and np.max(jumps) > jump_tol:
        problems.append("f_0 jump exceeds continuity tolerance")
    return problems


def partition_knots(m: int, T: float, offset: float = GOLDEN) -> np.ndarray:
    """``0 < (offset)/m T < (1 + offset)/m T < ... < T`` with ``m`` cells."""
    inner = (np.arange(1, m) - 1 + offset) / m * T
    return np.concatenate(([0.0], inner, [T]))


def _every_cell_hit(knots: np.ndarray, times: np.ndarray) -> bool:
    inside = times[(times > 0) & (times < knots[-1])]
    if np.any(np.isin(inside, knots)):
        return False
    cells = np.searchsorted(knots, inside, side="right") - 1
    return np.unique(cells).size == knots.size - 1


def choose_partition(big_n: np.ndarray, big_0: np.ndarray, T: float, offset: float,
                     max_cells: int):
    """Finest partition (at most ``max_cells`` cells) whose every open cell
    holds a big atom of both measures; ``None`` if even one cell fails."""
    all_times = np.concatenate((big_n, big_0))
    for m in range(max_cells, 0, -1):
        knots = partition_knots(m, T, offset)
        if _every_cell_hit(knots, big_n) and _every_cell_hit(knots, big_0) \
                and not np.any(np.isin(knots[1:-1], all_times)):
            return knots
    return None


def choose_gamma(nu_n: PointMeasure, nu_0: PointMeasure, target: float) -> float:
    """Largest admissible threshold not above ``target``.

    Admissible means both measures have the same positive number of atoms
    above it and it is not itself a mark value.
    """
    marks = np.unique(np.concatenate((nu_n.marks, nu_0.marks)))
    cands = [target] + [0.5 * (lo + hi) for lo, hi in zip(marks[-2::-1], marks[:0:-1])
                        if 0.5 * (lo + hi) < target]
    cands.append(0.5 * marks[0])
    for g in cands:
        if g in marks:
            continue
        k0 = np.count_nonzero(nu_0.marks > g)
        if k0 >= 1 and k0 == np.count_nonzero(nu_n.marks > g):
            return float(g)
    raise NotMatchedError("no admissible threshold")


def theorem2_demo_step(n: int, p: DemoParams = DemoParams()) -> dict:
    """Bound and majorant for one member of the demo family.

    The majorant chains: uniform error of ``f_n``, the matched-atom
    discrepancy, and twice ``omega_{f_0}(3|alpha|) + gamma`` for the
    small-atom terms; the time-change deviation enters through the max.
    """
    fn, nun, f0, nu0 = theorem2_demo_instance(n, p)
    T = p.horizon
    gamma = choose_gamma(nun, nu0, float(n) ** -p.gamma_exponent)
    sel_n = nun.marks > gamma
    sel_0 = nu0.marks > gamma
    knots = None
    while knots is None:
        knots = choose_partition(nun.times[sel_n], nu0.times[sel_0], T,
                                 p.partition_offset, p.max_cells)
        if knots is None:
            # Too few big atoms for any partition: lower the threshold.
            gamma = choose_gamma(nun, nu0, gamma * 0.999999)
            sel_n, sel_0 = nun.marks > gamma, nu0.marks > gamma
    mesh = float(np.max(np.diff(knots)))
    lam = build_time_change(nun, nu0, gamma, T)
    bound = skorokhod_upper_bound(F_path(fn, nun), F_path(f0, nu0), lam)
    uniform_error = sup_distance(fn, f0)
    matched = float(np.sum(np.abs(step_eval(f0, nun.times[sel_n]) - step_eval(f0, nu0.times[sel_0]))
                           + np.abs(nun.marks[sel_n] - nu0.marks[sel_0])))
    omega = modulus_of_continuity(f0, 3.0 * mesh)
    lam_dev = lam.sup_deviation()
    majorant = max(lam_dev, uniform_error + matched + 2.0 * (omega + gamma))
    return {
        "n": int(n),
        "gamma": gamma,
        "cells": int(knots.size - 1),
        "mesh": mesh,
        "matched_atoms": int(np.count_nonzero(sel_0)),
        "lambda_deviation": lam_dev,
        "uniform_error": uniform_error,
        "matched_error": matched,
        "omega_3mesh": omega,
        "bound": bound,
        "majorant": majorant,
    }
