"""Possibility contours, credal sets, and imprecise highest-density regions.

A consonant plausibility contour v (max value exactly 1) induces

* an upper probability  U(A) = max_{y in A} v(y)   (maxitive),
* a lower probability   L(A) = 1 - U(A^c)          (conjugate), and
* a credal set: every probability vector p with p(A) <= U(A) for all A.

The credal set is represented intensionally by its contour; only U and L are
ever used, so the (enormous) set of extreme points is never enumerated.

The alpha-level imprecise highest-density region is the intersection of all
events whose lower probability is at least 1-alpha. Two routes compute it:

* `ihdr_bruteforce` enumerates every subset of the grid and intersects the
  qualifying ones -- the definition, verbatim, usable up to 16 points;
* `ihdr_contour` takes the strict super-level set {y : v(y) > alpha}.

Their exact agreement (for alpha off the contour's value set) is one of the
structural facts this package machine-checks rather than assumes.

All set-level comparisons are exact on stored doubles; the membership test
alone uses an additive 1e-12 slack because probability masses arrive as
rounded sums.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .fullcp import Transducer, normalize_consonant, transducer
from .grid import Grid, Region, Sample, UniverseMismatchError
from .scores import ScoreFn

__all__ = [
    "PossibilityContour",
    "ProbVector",
    "CredalSpec",
    "cred",
    "upper_prob",
    "lower_prob",
    "is_member",
    "ihdr_bruteforce",
    "ihdr_contour",
    "check_functor_monotone",
]

_MEMBER_TOL = 1e-12
_BRUTE_LIMIT = 16
_MEMBER_LIMIT = 20


@dataclass(frozen=True)
class PossibilityContour:
    """Per-point plausibilities in [0, 1] with maximum exactly 1."""

    universe: Grid
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != self.universe.size:
            raise ValueError("one contour value per grid point required")
        for v in self.values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"contour value {v} outside [0, 1]")
        if max(self.values) != 1.0:
            raise ValueError("contour is not consonant: max value must be exactly 1")

    @staticmethod
    def from_transducer(t: Transducer) -> PossibilityContour:
        if not t.is_consonant():
            raise ValueError("transducer must be normalized before wrapping")
        return PossibilityContour(t.universe, tuple(float(v) for v in t.values))

    def to_csv(self) -> str:
        """Transducer CSV schema plus a `normalized` flag column."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.universe.dim
        w.writerow(
            ["grid_index", *[f"x{k}" for k in range(d)], "pi_value", "normalized"]
        )
        for i, p in enumerate(self.universe.points):
            w.writerow([i, *[repr(c) for c in p], repr(self.values[i]), 1])
        return buf.getvalue()


@dataclass(frozen=True)
class ProbVector:
    """A probability mass function on the grid (sums to 1 within 1e-12)."""

    universe: Grid
    mass: tuple[float, ...]

    def __post_init__(self):
        if len(self.mass) != self.universe.size:
            raise ValueError("one mass per grid point required")
        if any(m < 0 for m in self.mass):
            raise ValueError("mass must be nonnegative")
        tot = math.fsum(self.mass)
        if abs(tot - 1.0) > 1e-12:
            raise ValueError(f"mass sums to {tot}, not 1")


@dataclass(frozen=True)
class CredalSpec:
    """A credal set, represented by the possibility contour dominating it."""

    contour: PossibilityContour

    @property
    def universe(self) -> Grid:
        return self.contour.universe


def cred(y_n: Sample, psi: ScoreFn, universe: Grid) -> CredalSpec:
    """Sample -> credal set: ranking transform, normalized to consonance."""
    t = normalize_consonant(transducer(y_n, psi, universe))
    return CredalSpec(PossibilityContour.from_transducer(t))


def _check_universe(c: PossibilityContour, a: Region) -> None:
    if a.universe != c.universe:
        raise UniverseMismatchError("region and contour live over different universes")


def upper_prob(c: PossibilityContour, a: Region) -> float:
    """max of the contour over the region; 0 for the empty region."""
    _check_universe(c, a)
    if a.bits == 0:
        return 0.0
    return max(c.values[i] for i in a.indices)


def lower_prob(c: PossibilityContour, a: Region) -> float:
    """Conjugate lower probability: 1 - upper_prob(complement)."""
    _check_universe(c, a)
    return 1.0 - upper_prob(c, a.complement())


def _subset_max(values: np.ndarray) -> np.ndarray:
    """Contour max per bitmask, built by doubling: the table over the first
    b+1 points is the table over the first b points concatenated with itself
    updated by point b."""
    maxv = np.zeros(1)
    for b in range(values.shape[0]):
        maxv = np.concatenate([maxv, np.maximum(maxv, values[b])])
    return maxv


def _subset_sum(values: np.ndarray) -> np.ndarray:
    sums = np.zeros(1)
    for b in range(values.shape[0]):
        sums = np.concatenate([sums, sums + values[b]])
    return sums


def is_member(p: ProbVector, cs: CredalSpec) -> bool:
    """Dominance check over every subset: sum_A p <= max_A v + 1e-12.

    Enumerates all 2^size subsets, so the universe is capped at 20 points.
    """
    if p.universe != cs.universe:
        raise UniverseMismatchError("vector and credal set live over different universes")
    m = cs.universe.size
    if m > _MEMBER_LIMIT:
        raise ValueError(f"universe of size {m} too large for subset enumeration")
    sums = _subset_sum(np.asarray(p.mass, dtype=float))
    maxv = _subset_max(np.asarray(cs.contour.values, dtype=float))
    return bool(np.all(sums <= maxv + _MEMBER_TOL))


def ihdr_bruteforce(alpha: float, cs: CredalSpec) -> Region:
    """Intersection of all subsets whose lower probability is >= 1 - alpha.

    The full grid always qualifies (its lower probability is 1), so the
    intersection is never over an empty family for alpha in [0, 1].
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    m = cs.universe.size
    if m > _BRUTE_LIMIT:
        raise ValueError(f"universe of size {m} too large for subset enumeration")
    maxv = _subset_max(np.asarray(cs.contour.values, dtype=float))
    full = (1 << m) - 1
    masks = np.arange(full + 1, dtype=np.int64)
    lower = 1.0 - maxv[full ^ masks]
    qualifying = masks[lower >= 1.0 - alpha]
    bits = int(np.bitwise_and.reduce(qualifying)) if qualifying.size else full
    return Region(cs.universe, bits)


def ihdr_contour(alpha: float, cs: CredalSpec) -> Region:
    """Closed form: the strict super-level set {y : v(y) > alpha}."""
    bits = 0
    for i, v in enumerate(cs.contour.values):
        if v > alpha:
            bits |= 1 << i
    return Region(cs.universe, bits)


def check_functor_monotone(
    cs_small: CredalSpec, cs_big: CredalSpec, alpha: float
) -> bool:
    """Nested credal sets must yield nested regions at every level.

    Precondition (checked, error on violation): the small contour is
    pointwise dominated by the big one, which is sufficient for the induced
    credal sets to nest. Both regions go through the brute-force route when
    the grid is small enough to enumerate, else the closed form.
    """
    if cs_small.universe != cs_big.universe:
        raise UniverseMismatchError("contours live over different universes")
    vs = cs_small.contour.values
    vb = cs_big.contour.values
    for a, b in zip(vs, vb):
        if a > b:
            raise ValueError(
                f"precondition violated: small contour exceeds big ({a} > {b})"
            )
    if cs_small.universe.size <= 12:
        r_small = ihdr_bruteforce(alpha, cs_small)
        r_big = ihdr_bruteforce(alpha, cs_big)
    else:
        r_small = ihdr_contour(alpha, cs_small)
        r_big = ihdr_contour(alpha, cs_big)
    return r_small.is_subset(r_big)
