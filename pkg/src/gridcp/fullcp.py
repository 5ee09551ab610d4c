"""The plausibility transducer and its prediction regions.

Given a sample y^n, a nonconformity score psi, and a finite grid of
candidate points, each candidate c is appended to the sample and scored by
the leave-one-out rule: T_i is the score of the i-th element of
(y_1..y_n, c) against the remaining n elements. The candidate's plausibility
is the fraction of the n+1 scores that are at least as large as the
candidate's own score T_{n+1},

    pi(c) = (n+1)^{-1} * #{ i : T_i >= T_{n+1} },

which always counts the candidate itself, so pi takes values in
{1/(n+1), ..., 1}. The alpha-level prediction region is the strict
super-level set {c : pi(c) > alpha}.

Plausibility values are stored as integer numerators over an integer
denominator so that membership of confidence levels in the attainable value
set, and the next-attainable-level function, are exact. Region membership
comparisons happen on the derived doubles, with no epsilon: the indicator
structure is discontinuous by design and fuzzing it would silently change
the transducer.

Confidence levels that sit exactly on an attainable value are refused:
ranking ties at those levels make the strict and weak super-level sets
differ, which would void every exact set-equality check downstream.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .grid import Grid, Region, Sample
from .scores import ScoreFn

__all__ = [
    "Transducer",
    "TieGrid",
    "TieLevelError",
    "transducer",
    "next_level",
    "assert_no_tie",
    "kappa",
    "superlevel_region",
    "normalize_consonant",
]


class TieLevelError(ValueError):
    """Confidence level coincides with an attainable plausibility value."""


@dataclass(frozen=True)
class TieGrid:
    """The attainable-level set {0, 1/(n+1), ..., n/(n+1), 1} for sample size n."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def levels(self) -> tuple[float, ...]:
        return tuple(k / (self.n + 1) for k in range(self.n + 2))

    def __contains__(self, alpha: float) -> bool:
        # Exact comparison on stored doubles, deliberately.
        return any(alpha == lv for lv in self.levels)


def next_level(alpha: float, tg: TieGrid) -> float:
    """The smallest attainable level strictly above alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    for lv in tg.levels:
        if lv > alpha:
            return lv
    raise ValueError(f"no level above {alpha}")  # unreachable for alpha < 1


def assert_no_tie(alpha: float, tg: TieGrid) -> bool:
    """True iff alpha avoids every attainable plausibility value."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha not in tg


@dataclass(frozen=True)
class Transducer:
    """Plausibility values over a grid, stored as exact rationals nums/denom.

    A freshly computed transducer has denom == n+1 and every numerator in
    1..n+1. `normalize_consonant` rescales so the maximum value is exactly 1,
    which changes denom to the maximum numerator.
    """

    universe: Grid
    nums: tuple[int, ...]
    denom: int
    n: int

    def __post_init__(self):
        if len(self.nums) != self.universe.size:
            raise ValueError("one value per grid point required")
        if self.denom < 1:
            raise ValueError("denominator must be positive")
        if any(k < 1 or k > self.denom for k in self.nums):
            raise ValueError("numerators must lie in 1..denom")

    @property
    def values(self) -> np.ndarray:
        """Derived double-precision plausibilities."""
        return np.asarray(self.nums, dtype=float) / self.denom

    @property
    def max_num(self) -> int:
        return max(self.nums)

    def is_consonant(self) -> bool:
        return self.max_num == self.denom

    def argmax_indices(self) -> tuple[int, ...]:
        m = self.max_num
        return tuple(i for i, k in enumerate(self.nums) if k == m)

    def to_csv(self) -> str:
        """Columns: grid_index, one coordinate column per dimension, k, pi_value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.universe.dim
        w.writerow(["grid_index", *[f"x{k}" for k in range(d)], "k", "pi_value"])
        vals = self.values
        for i, p in enumerate(self.universe.points):
            w.writerow([i, *[repr(c) for c in p], self.nums[i], repr(float(vals[i]))])
        return buf.getvalue()


def transducer(y_n: Sample, psi: ScoreFn, universe: Grid) -> Transducer:
    """Run the leave-one-out ranking transform over every grid point.

    Per-point work is pure, so the grid loop parallelizes trivially; the
    vectorized kernels in `scores` already batch it.
    """
    if y_n.dim != universe.dim:
        raise ValueError(
            f"dimension mismatch: sample d={y_n.dim}, grid d={universe.dim}"
        )
    T = psi.loo_matrix(y_n, universe.as_array())
    n = y_n.n
    if T.shape != (universe.size, n + 1):
        raise ValueError("score kernel returned a malformed table")
    counts = np.sum(T >= T[:, -1][:, None], axis=1)
    nums = tuple(int(c) for c in counts)
    return Transducer(universe=universe, nums=nums, denom=n + 1, n=n)


def superlevel_region(t: Transducer, alpha: float) -> Region:
    """{c : pi(c) > alpha} on t's universe (strict, on stored doubles)."""
    vals = t.values
    bits = 0
    for i in range(t.universe.size):
        if vals[i] > alpha:
            bits |= 1 << i
    return Region(t.universe, bits)


def kappa(alpha: float, y_n: Sample, psi: ScoreFn, universe: Grid) -> Region:
    """The alpha-level prediction region {c : pi(c, y^n) > alpha}.

    Refuses alpha on the attainable-value set; under that restriction the
    strict form equals the weak form at the next attainable level, so the
    strict one is computed and the weak one is reserved for diagnostics.
    """
    tg = TieGrid(y_n.n)
    if not assert_no_tie(alpha, tg):
        raise TieLevelError(
            f"alpha={alpha} lies on the attainable plausibility set "
            f"{{k/{y_n.n + 1}: k=0..{y_n.n + 1}}}; pick a level off that set"
        )
    return superlevel_region(transducer(y_n, psi, universe), alpha)


def normalize_consonant(t: Transducer) -> Transducer:
    """Divide by the grid maximum so the top value is exactly 1.

    Idempotent, and preserves the argmax set. The maximum numerator becomes
    the new denominator; already-consonant transducers come back unchanged.
    """
    m = t.max_num
    if m == t.denom:
        return t
    return Transducer(universe=t.universe, nums=t.nums, denom=m, n=t.n)
