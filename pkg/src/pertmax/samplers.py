"""Exact samplers and the seeded, splittable random stream they draw from.

Every sampler takes an explicit ``numpy.random.Generator``; an
:class:`RngStream` is the reproducible recipe that produces one. Passing
``size`` returns an array of i.i.d. draws, otherwise a float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, TailLaw

# Sub-stream labels. Keeping them fixed means a replica's increments, its
# perturbations and its limit-process pieces never share random bits.
XI, ETA, PRM, BM, THETA, GAUSS = range(6)


@dataclass(frozen=True)
class RngStream:
    """Independent random stream identified by ``(seed, index)``.

    Streams are derived with ``SeedSequence(seed, spawn_key=(index, *path))``
    and drive a PCG64 bit generator, so the same identifiers give the same
    draws on every platform. :meth:`child` descends into a labelled
    sub-stream.
    """

    seed: int
    index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.index < 0:
            raise DomainError("stream index must be non-negative")

    def child(self, label: int) -> "RngStream":
        return RngStream(self.seed, self.index, self.path + (int(label),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index,) + self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def describe(self) -> str:
        return f"SeedSequence({self.seed}, spawn_key={(self.index,) + self.path})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def uniform_open0(gen: np.random.Generator, size=None):
    """Uniform draws on ``(0, 1]`` (never 0, so inverse transforms stay finite)."""
    return 1.0 - gen.random(size)


_XI_VARIANTS = ("rademacher", "uniform", "gaussian", "degenerate")


@dataclass(frozen=True)
class XiLaw:
    """Zero-mean increment law with standard deviation ``v``.

    ``uniform`` is the centred uniform law on ``[-sqrt(3) v, sqrt(3) v]``.
    ``degenerate`` is the point mass at 0 and requires ``v == 0``; it only
    exists to isolate the perturbation part of the walk in tests.
    """

    variant: str = "rademacher"
    v: float = 1.0

    def __post_init__(self):
        if self.variant not in _XI_VARIANTS:
            raise DomainError(f"unknown increment law {self.variant!r}")
        if self.variant == "degenerate":
            if self.v != 0:
                raise DomainError("degenerate increments have v = 0")
        elif not (self.v > 0 and math.isfinite(self.v)):
            raise DomainError(f"v must be positive, got {self.v}")


def sample_xi(gen: np.random.Generator, law: XiLaw, size=None):
    gen = as_generator(gen)
    v = law.v
    if law.variant == "rademacher":
        signs = gen.integers(0, 2, size=size, dtype=np.int8)
        out = v * (2.0 * signs - 1.0)
    elif law.variant == "uniform":
        half = math.sqrt(3.0) * v
        out = gen.uniform(-half, half, size)
    elif law.variant == "gaussian":
        out = v * gen.standard_normal(size)
    else:
        out = np.zeros(() if size is None else size)
    return float(out) if size is None else np.asarray(out, dtype=float)


def eta_from_uniform(u, tail: TailLaw):
    """Inverse transform for ``P(eta > x) = min(1, c x^-a)``."""
    return (tail.c / u) ** (1.0 / tail.a)


def sample_eta(gen: np.random.Generator, tail: TailLaw, size=None):
    """Perturbation with exact Pareto-type tail ``min(1, c x^-a)``."""
    gen = as_generator(gen)
    return eta_from_uniform(uniform_open0(gen, size), tail)


def frechet_from_exponential(e, tail: TailLaw):
    return (tail.c / e) ** (1.0 / tail.a)


def sample_frechet(gen: np.random.Generator, tail: TailLaw, size=None):
    """Frechet draw with CDF ``exp(-c x^-a)`` as ``(c / E)^(1/a)``."""
    gen = as_generator(gen)
    e = gen.standard_exponential(size)
    return frechet_from_exponential(e, tail)


def bridge_max_from_uniform(u, left, right, dt, v=1.0):
    """Invert ``P(M > m) = exp(-2 (m - left)(m - right) / (v^2 dt))``.

    Solving the quadratic for the larger root gives
    ``m = (left + right + sqrt((right - left)^2 - 2 v^2 dt log u)) / 2``.
    ``dt == 0`` is accepted here and returns ``max(left, right)``.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    disc = (right - left) ** 2 - 2.0 * v * v * dt * np.log(u)
    m = 0.5 * (left + right + np.sqrt(disc))
    # (a + b + |b - a|) / 2 can round one ulp below max(a, b).
    return np.maximum(m, np.maximum(left, right))


def bridge_max_sample(gen: np.random.Generator, left, right, dt, v: float = 1.0, size=None):
    """Exact maximum of a Brownian path with variance ``v^2`` per unit time
    over a segment of length ``dt`` pinned at ``left`` and ``right``."""
    if np.any(np.asarray(dt) <= 0):
        raise DomainError("segment length dt must be positive")
    if not v > 0:
        raise DomainError("v must be positive")
    if size is None:
        size = np.broadcast(np.asarray(left), np.asarray(right), np.asarray(dt)).shape or None
    u = uniform_open0(as_generator(gen), size)
    out = bridge_max_from_uniform(u, left, right, dt, v)
    return float(out) if np.ndim(out) == 0 else out
