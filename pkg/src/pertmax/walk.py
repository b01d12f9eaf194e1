"""Pre-limit objects: the scaled random walk, the running maximum of the
perturbed walk and the empirical point measure of scaled perturbations.

Given the same :class:`~pertmax.samplers.RngStream`, every function here
reads the same increments and perturbations, so the paths are coupled.
Partial sums are accumulated strictly left to right; together with a shared
grid and shared scaling this makes the running maximum equal, bit for bit,
to the supremum functional applied to the pair (walk path, point measure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import RETAIN_ALL, DomainError, PointMeasure, StepFunction, TailLaw
from .samplers import ETA, XI, RngStream, XiLaw, sample_eta, sample_xi

# joint(gen, size) -> (xi, eta), each of length ``size``; pairs are i.i.d.
JointSampler = Callable[[np.random.Generator, int], "tuple[np.ndarray, np.ndarray]"]


@dataclass(frozen=True)
class WalkConfig:
    xi: XiLaw = field(default_factory=XiLaw)
    tail: TailLaw = field(default_factory=TailLaw)
    n: int = 1000
    horizon: float = 1.0
    joint: Optional[JointSampler] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive, got {self.horizon}")

    @property
    def steps(self) -> int:
        """``[n T]``, robust to ``n * T`` landing a hair below an integer."""
        x = self.n * self.horizon
        r = round(x)
        return int(r) if abs(x - r) <= 1e-9 * max(1.0, x) else int(math.floor(x))

    @property
    def scale(self) -> float:
        return float(self.n) ** (-1.0 / self.tail.a)


def grid_times(cfg: WalkConfig) -> np.ndarray:
    """Times ``k / n`` for ``k = 0..[nT]``."""
    return np.minimum(np.arange(cfg.steps + 1) / cfg.n, cfg.horizon)


def _draw(rng: RngStream, cfg: WalkConfig) -> tuple[np.ndarray, np.ndarray]:
    m = cfg.steps
    if cfg.joint is not None:
        xi, eta = cfg.joint(rng.child(XI).generator(), m + 1)
        return np.asarray(xi, dtype=float)[:m], np.asarray(eta, dtype=float)
    return draw_increments(rng, cfg), draw_perturbations(rng, cfg)


def draw_increments(rng: RngStream, cfg: WalkConfig) -> np.ndarray:
    """``xi_1 .. xi_[nT]`` for this stream."""
    if cfg.joint is None:
        return sample_xi(rng.child(XI).generator(), cfg.xi, size=cfg.steps)
    return _draw(rng, cfg)[0]


def draw_perturbations(rng: RngStream, cfg: WalkConfig) -> np.ndarray:
    """``eta_1 .. eta_{[nT]+1}`` for this stream."""
    if cfg.joint is None:
        return sample_eta(rng.child(ETA).generator(), cfg.tail, size=cfg.steps + 1)
    return _draw(rng, cfg)[1]


def partial_sums(xi: np.ndarray) -> np.ndarray:
    """``S_0 = 0, S_1, ..., S_m``, accumulated sequentially."""
    out = np.empty(xi.size + 1)
    out[0] = 0.0
    np.cumsum(xi, out=out[1:])
    return out


def _perturbed_values(xi, eta, scale):
    # Scale each term before adding: the supremum functional sees
    # scale*S_k and scale*eta_{k+1} separately.
    return scale * partial_sums(xi) + scale * eta


def scaled_walk_path(rng: RngStream, cfg: WalkConfig) -> StepFunction:
    """``t -> n^(-1/a) S_[nt]`` on ``[0, T]`` (Donsker scaling when a = 2)."""
    xi = draw_increments(rng, cfg)
    values = cfg.scale * partial_sums(xi)
    return StepFunction.from_samples(grid_times(cfg), values, cfg.horizon)


def perturbed_max_path(rng: RngStream, cfg: WalkConfig) -> StepFunction:
    """``t -> n^(-1/a) max_{0<=k<=[nt]} (S_k + eta_{k+1})`` on ``[0, T]``.

    Only the times where the running maximum increases are stored.
    """
    xi, eta = _draw(rng, cfg)
    running = np.maximum.accumulate(_perturbed_values(xi, eta, cfg.scale))
    return StepFunction.from_samples(grid_times(cfg), running, cfg.horizon)


def perturbed_max_at(rng: RngStream, cfg: WalkConfig, probe_times) -> np.ndarray:
    """Values of :func:`perturbed_max_path` at ``probe_times`` without
    building the path object."""
    xi, eta = _draw(rng, cfg)
    running = np.maximum.accumulate(_perturbed_values(xi, eta, cfg.scale))
    idx = np.searchsorted(grid_times(cfg), np.asarray(probe_times, dtype=float), side="right") - 1
    return running[idx]


def scaled_terminal_sum(rng: RngStream, cfg: WalkConfig) -> float:
    """``n^(-1/2) S_[nT]`` (Donsker scaling, whatever the tail index)."""
    xi = draw_increments(rng, cfg)
    return float(partial_sums(xi)[-1]) / math.sqrt(cfg.n)


def scaled_max_perturbation(rng: RngStream, cfg: WalkConfig) -> float:
    """``n^(-1/a) max_{1<=k<=[nT]} eta_k``."""
    eta = draw_perturbations(rng, cfg)
    return cfg.scale * float(np.max(eta[: cfg.steps]))


def empirical_point_measure(etas, n: int, a: float, delta: float, T: float) -> PointMeasure:
    """Atoms ``(k/n, n^(-1/a) eta_{k+1})`` for ``0 <= k <= [nT]``.

    With ``delta >= 0`` only atoms whose scaled mark exceeds ``delta`` are
    kept (``delta = 0`` keeps exactly the positive perturbations). The
    sentinel ``delta = RETAIN_ALL`` keeps every index, whatever its sign.
    """
    if not (delta == RETAIN_ALL or delta >= 0):
        raise DomainError(f"delta must be >= 0 or RETAIN_ALL, got {delta}")
    cfg = WalkConfig(n=n, horizon=T, tail=TailLaw(1.0, a))
    m = cfg.steps
    etas = np.asarray(etas, dtype=float)
    if etas.size < m + 1:
        raise ValueError(f"need at least {m + 1} perturbations, got {etas.size}")
    times = grid_times(cfg)
    marks = cfg.scale * etas[: m + 1]
    if delta != RETAIN_ALL:
        keep = marks > delta
        times, marks = times[keep], marks[keep]
    return PointMeasure(times, marks, T, delta)
