"""Exact dyadic time arithmetic on the unit interval.

Grid times are binary rationals k / 2**n and are kept as
:class:`fractions.Fraction` values, so predecessor/successor logic and
index conversion are exact; floats enter only when probabilities do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import IndexOutOfGrid, LevelTooHigh, OutOfRange

TimeLike = Union[int, float, Fraction]


def as_fraction(t: TimeLike) -> Fraction:
    """Convert a time to an exact rational; floats convert exactly."""
    if isinstance(t, Fraction):
        return t
    if isinstance(t, (int, np.integer)):
        return Fraction(int(t))
    if isinstance(t, (float, np.floating)):
        if not math.isfinite(t):
            raise OutOfRange(f"time {t!r} is not finite")
        return Fraction(float(t))
    raise TypeError(f"cannot interpret {t!r} as a time")


@dataclass(frozen=True)
class DyadicGrid:
    """The master grid {k / 2**master_level : k = 0..2**master_level}."""

    master_level: int

    def __post_init__(self) -> None:
        if not isinstance(self.master_level, int) or self.master_level < 1:
            raise LevelTooHigh("master_level must be an integer >= 1")
        if self.master_level > 24:
            raise LevelTooHigh("master_level above 24 is not supported")

    @property
    def num_steps(self) -> int:
        return 1 << self.master_level

    @property
    def num_points(self) -> int:
        return self.num_steps + 1

    def times(self) -> tuple[Fraction, ...]:
        d = self.num_steps
        return tuple(Fraction(k, d) for k in range(d + 1))

    def float_times(self) -> np.ndarray:
        return np.arange(self.num_points, dtype=float) / self.num_steps

    def time_of(self, k: int) -> Fraction:
        if not 0 <= k <= self.num_steps:
            raise IndexOutOfGrid(f"index {k} outside 0..{self.num_steps}")
        return Fraction(int(k), self.num_steps)

    def index_of(self, t: TimeLike) -> int:
        """Exact master index of a grid time; rejects off-grid times."""
        x = as_fraction(t) * self.num_steps
        if x.denominator != 1 or not 0 <= x.numerator <= self.num_steps:
            raise IndexOutOfGrid(f"time {t!r} is not on the master grid")
        return x.numerator

    def level_stride(self, n: int) -> int:
        """Master-index stride between consecutive level-n grid points."""
        if not isinstance(n, int) or n < 0:
            raise LevelTooHigh("level must be a nonnegative integer")
        if n > self.master_level:
            raise LevelTooHigh(
                f"level {n} exceeds master level {self.master_level}"
            )
        return 1 << (self.master_level - n)

    def level_indices(self, n: int) -> np.ndarray:
        return np.arange(0, self.num_steps + 1, self.level_stride(n))


def grid_predecessor(a: TimeLike, n: int) -> Fraction:
    """max{s in D_n : s < a} for a in (0, 1]."""
    f = as_fraction(a)
    if not 0 < f <= 1:
        raise OutOfRange(f"predecessor requires a in (0, 1], got {a!r}")
    x = f * (1 << n)
    if x.denominator == 1:
        k = x.numerator - 1
    else:
        k = x.numerator // x.denominator
    return Fraction(k, 1 << n)


def grid_successor(a: TimeLike, n: int) -> Fraction:
    """min{t in D_n : t >= a} for a in [0, 1]."""
    f = as_fraction(a)
    if not 0 <= f <= 1:
        raise OutOfRange(f"successor requires a in [0, 1], got {a!r}")
    x = f * (1 << n)
    k = -((-x.numerator) // x.denominator)
    return Fraction(k, 1 << n)
