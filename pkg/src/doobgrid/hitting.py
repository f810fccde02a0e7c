"""Hitting and jump times of path ensembles against interval sets.

Target sets are finite unions of intervals with open or closed ends;
the closed case models a closed subset of the reals, while half-open
ends encode countable unions of closed sets (such as (0, inf)) truncated
to the finitely many intervals a finite path range can meet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ZeroInClosure, ZeroInF
from .paths import INF_IDX, GridStoppingTime, ProcessPaths, jump_process

_INF = float("inf")


@dataclass(frozen=True)
class IntervalUnion:
    """Normalized finite union of real intervals.

    Each entry is (lo, lo_closed, hi, hi_closed); infinite ends are open.
    Membership and distance are exact endpoint arithmetic.
    """

    intervals: tuple[tuple[float, bool, float, bool], ...]

    @staticmethod
    def _normalize(items) -> tuple:
        cleaned = []
        for it in items:
            if len(it) == 2:
                lo, hi = it
                lo_c, hi_c = math.isfinite(lo), math.isfinite(hi)
            else:
                lo, lo_c, hi, hi_c = it
            lo, hi = float(lo), float(hi)
            if lo > hi or (lo == hi and not (lo_c and hi_c)):
                continue  # empty interval
            cleaned.append((lo, bool(lo_c and math.isfinite(lo)), hi, bool(hi_c and math.isfinite(hi))))
        cleaned.sort()
        merged: list[list] = []
        for lo, lo_c, hi, hi_c in cleaned:
            if merged:
                plo, plo_c, phi, phi_c = merged[-1]
                touch = lo < phi or (lo == phi and (lo_c or phi_c))
                if touch:
                    if hi > phi or (hi == phi and hi_c and not phi_c):
                        merged[-1][2], merged[-1][3] = hi, hi_c
                    if lo == plo and lo_c and not plo_c:
                        merged[-1][1] = True
                    continue
            merged.append([lo, lo_c, hi, hi_c])
        return tuple(tuple(iv) for iv in merged)

    @classmethod
    def from_intervals(cls, items: Iterable) -> "IntervalUnion":
        return cls(cls._normalize(items))

    @classmethod
    def closed(cls, pairs: Iterable[tuple[float, float]]) -> "IntervalUnion":
        return cls.from_intervals([(lo, True, hi, True) for lo, hi in pairs])

    @classmethod
    def absolute_at_least(cls, c: float) -> "IntervalUnion":
        """The closed set {x : |x| >= c} for c > 0."""
        if c <= 0:
            raise ValueError("threshold must be positive")
        return cls.from_intervals([(-_INF, False, -c, True), (c, True, _INF, False)])

    @classmethod
    def positive_half_line(cls) -> "IntervalUnion":
        """(0, inf): union of the closed sets [1/k, inf)."""
        return cls.from_intervals([(0.0, False, _INF, False)])

    @classmethod
    def nonzero(cls) -> "IntervalUnion":
        return cls.from_intervals(
            [(-_INF, False, 0.0, False), (0.0, False, _INF, False)]
        )

    @classmethod
    def annulus(cls, n: int) -> "IntervalUnion":
        """{y : |y| in (2**n, 2**(n+1)]} (dyadic shell)."""
        lo, hi = 2.0**n, 2.0 ** (n + 1)
        return cls.from_intervals(
            [(-hi, True, -lo, False), (lo, False, hi, True)]
        )

    def contains(self, x: float) -> bool:
        for lo, lo_c, hi, hi_c in self.intervals:
            above = x > lo or (lo_c and x == lo)
            below = x < hi or (hi_c and x == hi)
            if above and below:
                return True
        return False

    def contains_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape, dtype=bool)
        for lo, lo_c, hi, hi_c in self.intervals:
            above = xs >= lo if lo_c else xs > lo
            below = xs <= hi if hi_c else xs < hi
            out |= above & below
        return out

    def distance(self, x: float) -> float:
        """inf{|x - y| : y in the set}; endpoint values are exact."""
        best = _INF
        for lo, lo_c, hi, hi_c in self.intervals:
            if (x > lo or (lo_c and x == lo)) and (x < hi or (hi_c and x == hi)):
                return 0.0
            if x <= lo:
                best = min(best, lo - x)
            elif x >= hi:
                best = min(best, x - hi)
        return best

    def distance_to_zero(self) -> float:
        return self.distance(0.0)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        for alo, alo_c, ahi, ahi_c in self.intervals:
            for blo, blo_c, bhi, bhi_c in other.intervals:
                if alo > blo or (alo == blo and not alo_c):
                    lo, lo_c = alo, alo_c
                else:
                    lo, lo_c = blo, blo_c
                if ahi < bhi or (ahi == bhi and not ahi_c):
                    hi, hi_c = ahi, ahi_c
                else:
                    hi, hi_c = bhi, bhi_c
                if lo < hi or (lo == hi and lo_c and hi_c):
                    out.append((lo, lo_c, hi, hi_c))
        return IntervalUnion.from_intervals(out)

    def is_empty(self) -> bool:
        return not self.intervals


def ClosedSet(pairs: Sequence[tuple[float, float]]) -> IntervalUnion:
    """Finite union of closed intervals; infinite endpoints allowed."""
    return IntervalUnion.closed(pairs)


def _first_true_index(cond: np.ndarray) -> np.ndarray:
    """Per column, first row index where cond holds, else INF_IDX."""
    any_hit = cond.any(axis=0)
    first = cond.argmax(axis=0).astype(np.int64)
    return np.where(any_hit, first, INF_IDX)


def first_approach_time(X: ProcessPaths, C: IntervalUnion) -> GridStoppingTime:
    """First time the path or its left limit lies in C.

    Per outcome this is the smallest grid index k with X[k] in C or
    X[k-1] in C (with X[0-] = X[0]); the infimum is attained on the grid
    by construction.
    """
    hits = C.contains_array(X.values)
    hits_left = np.vstack([hits[:1], hits[:-1]])
    return GridStoppingTime(X.space, _first_true_index(hits | hits_left))


def next_jump_time(
    X: ProcessPaths, F: IntervalUnion, tau: GridStoppingTime
) -> GridStoppingTime:
    """First time strictly after tau at which the jump of X lies in F.

    Requires the jump-size set to stay away from zero; the result is
    strictly greater than tau wherever tau is finite.
    """
    if F.distance_to_zero() <= 0:
        raise ZeroInClosure("jump-size set must have positive distance to 0")
    jumps = jump_process(X).values
    in_f = F.contains_array(jumps)
    K = X.space.grid.num_steps
    after = np.arange(K + 1)[:, None] > tau.idx[None, :]
    return GridStoppingTime(X.space, _first_true_index(in_f & after))


def _exhaust_positive_distance(X: ProcessPaths, F: IntervalUnion) -> list[GridStoppingTime]:
    # recursion starts strictly after time 0; the jump at 0 is zero anyway
    out: list[GridStoppingTime] = []
    cur = next_jump_time(
        X, F, GridStoppingTime(X.space, np.zeros(X.space.n_outcomes, dtype=np.int64))
    )
    while np.any(cur.idx != INF_IDX):
        out.append(cur)
        cur = next_jump_time(X, F, cur)
    return out


def exhaust_jumps(X: ProcessPaths, F: IntervalUnion) -> list[GridStoppingTime]:
    """Stopping times whose graphs exactly cover the jumps of X in F.

    The graphs are pairwise disjoint and their union is
    {(k, w) : jump of X at k lies in F, k >= 1}.  When F keeps positive
    distance to zero the sequence is obtained by iterating
    :func:`next_jump_time` and is strictly increasing to infinity; when
    the distance is zero (e.g. F = (0, inf)) the jumps are split over
    the dyadic shells {|y| in (2**n, 2**(n+1)]}, each shell is exhausted
    recursively, and the family is re-enumerated shell by shell.
    """
    if F.contains(0.0):
        raise ZeroInF("jump-size set must not contain 0")
    if F.distance_to_zero() > 0:
        return _exhaust_positive_distance(X, F)
    jumps = jump_process(X).values
    sizes = np.unique(np.abs(jumps[F.contains_array(jumps)]))
    sizes = sizes[sizes > 0]
    shells = sorted(
        {_shell_index(float(v)) for v in sizes}
    )
    out: list[GridStoppingTime] = []
    for n in shells:
        Fn = F.intersect(IntervalUnion.annulus(n))
        if not Fn.is_empty():
            out.extend(_exhaust_positive_distance(X, Fn))
    return out


def _shell_index(v: float) -> int:
    """n with v in (2**n, 2**(n+1)] for v > 0 (exact for binary floats)."""
    mant, exp = math.frexp(v)  # v = mant * 2**exp, mant in [0.5, 1)
    return exp - 2 if mant == 0.5 else exp - 1


def localize_bounded(
    X: ProcessPaths, thresholds: Sequence[float]
) -> list[GridStoppingTime]:
    """First-approach times of {|x| >= k} for each threshold k.

    The resulting times increase with the threshold, the path stays
    strictly below k before each time, and a threshold above the path's
    supremum yields the infinite sentinel everywhere.
    """
    out = []
    for k in thresholds:
        out.append(first_approach_time(X, IntervalUnion.absolute_at_least(float(k))))
    return out
