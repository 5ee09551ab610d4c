"""The ranking transducer, attainable-level machinery, and regions."""

import csv
import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcp.fullcp import (
    TieGrid,
    TieLevelError,
    Transducer,
    assert_no_tie,
    kappa,
    next_level,
    normalize_consonant,
    superlevel_region,
    transducer,
)
from gridcp.grid import Grid, Sample, make_uniform_grid
from gridcp.scores import EmbeddingNet, MeanAbsDistance, PrototypeEmbedding


def example_grid() -> Grid:
    """The worked four-point grid {0, 0.5, 1, 2}."""
    return Grid(
        points=((0.0,), (0.5,), (1.0,), (2.0,)),
        bounds=((0.0, 2.0),),
        counts=(4,),
        spacing=(0.5,),
    )


class TestTransducer:
    def test_worked_example(self):
        # Hand enumeration: candidate 0.5 gives T=(0.75, 0.75, 0), all three
        # indicators fire; candidate 2 gives T=(1.5, 0, 1.5), two fire.
        t = transducer(Sample.of([0, 1]), MeanAbsDistance(), example_grid())
        assert t.nums == (3, 3, 3, 2)
        assert t.denom == 3
        np.testing.assert_array_equal(t.values, [1.0, 1.0, 1.0, 2.0 / 3.0])

    def test_constant_sample_all_ties(self):
        grid = make_uniform_grid([(0, 4)], [5])
        for psi in (MeanAbsDistance(), PrototypeEmbedding(EmbeddingNet.identity(1))):
            t = transducer(Sample.of([2, 2, 2]), psi, grid)
            assert t.nums[grid.index_of(2.0)] == 4  # pi = 1 at the shared value

    def test_single_point_sample_degenerate_everything_plausible(self):
        # n = 1: the held-out score always ties the candidate's, so pi is
        # identically 1 and every region below level 1 is the full grid.
        # The 7-point grid has non-dyadic coordinates on purpose: the tie
        # must survive floating point, not just friendly values.
        grid = make_uniform_grid([(0, 4)], [7])
        s = Sample.of([2])
        for psi in (MeanAbsDistance(), PrototypeEmbedding(EmbeddingNet.identity(1))):
            t = transducer(s, psi, grid)
            assert t.nums == (2,) * 7
        assert kappa(0.93, s, MeanAbsDistance(), grid) == grid.full_region()

    def test_values_in_attainable_set(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 7))
            s = Sample.of(rng.uniform(-3, 3, n).tolist())
            grid = make_uniform_grid([(-3, 3)], [int(rng.integers(2, 12))])
            t = transducer(s, MeanAbsDistance(), grid)
            assert all(1 <= k <= n + 1 for k in t.nums)
            assert float(np.min(t.values)) >= 1.0 / (n + 1)

    def test_permuting_sample_leaves_values_identical(self):
        grid = make_uniform_grid([(-2, 2)], [9])
        values = [0.3, -1.1, 0.25, 1.9, -0.3]
        ref = transducer(Sample.of(values), MeanAbsDistance(), grid).nums
        for perm in itertools.permutations(values):
            assert transducer(Sample.of(perm), MeanAbsDistance(), grid).nums == ref

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            transducer(Sample.of([(0, 1)]), MeanAbsDistance(), example_grid())

    def test_csv_serialization(self):
        t = transducer(Sample.of([0, 1]), MeanAbsDistance(), example_grid())
        rows = list(csv.reader(io.StringIO(t.to_csv())))
        assert rows[0] == ["grid_index", "x0", "k", "pi_value"]
        assert [r[2] for r in rows[1:]] == ["3", "3", "3", "2"]
        assert float(rows[4][3]) == 2.0 / 3.0


class TestTieGrid:
    def test_levels(self):
        tg = TieGrid(3)
        assert tg.levels == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_next_level_examples(self):
        assert next_level(0.1, TieGrid(3)) == 0.25
        for n in (1, 4, 9):
            assert next_level(0.0, TieGrid(n)) == 1.0 / (n + 1)
        # strictness: 0.25 itself is excluded
        assert next_level(0.25, TieGrid(3)) == 0.5

    def test_next_level_rejects_one(self):
        with pytest.raises(ValueError):
            next_level(1.0, TieGrid(3))

    def test_assert_no_tie(self):
        assert assert_no_tie(0.1, TieGrid(3))
        assert not assert_no_tie(0.5, TieGrid(3))
        assert not assert_no_tie(1.0, TieGrid(7))
        assert not assert_no_tie(0.0, TieGrid(2))


class TestKappa:
    def test_worked_example_alpha_06(self):
        # pi = (1, 1, 1, 2/3) and 2/3 > 0.6, so every candidate survives.
        r = kappa(0.6, Sample.of([0, 1]), MeanAbsDistance(), example_grid())
        assert r.indices == (0, 1, 2, 3)

    def test_alpha_07_drops_last(self):
        r = kappa(0.7, Sample.of([0, 1]), MeanAbsDistance(), example_grid())
        assert r.indices == (0, 1, 2)

    def test_tiny_alpha_full_grid(self):
        # pi is bounded below by 1/(n+1), so any alpha below that keeps all.
        grid = make_uniform_grid([(-4, 4)], [9])
        r = kappa(0.01, Sample.of([0, 1]), MeanAbsDistance(), grid)
        assert r == grid.full_region()

    def test_alpha_099_keeps_only_top_level(self):
        grid = make_uniform_grid([(-4, 4)], [9])
        s = Sample.of([-1.0, 1.2])
        t = transducer(s, MeanAbsDistance(), grid)
        r = kappa(0.99, s, MeanAbsDistance(), grid)
        assert set(r.indices) == {i for i, k in enumerate(t.nums) if k == 3}

    def test_tie_level_refused_with_diagnostic(self):
        with pytest.raises(TieLevelError, match="k/3"):
            kappa(1.0 / 3.0, Sample.of([0, 1]), MeanAbsDistance(), example_grid())

    def test_antitone_in_alpha(self):
        grid = make_uniform_grid([(-3, 3)], [13])
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            s = Sample.of(rng.uniform(-2, 2, n).tolist())
            levels = TieGrid(n).levels
            a1, a2 = sorted(rng.uniform(0.02, 0.98, 2).tolist())
            if any(a1 == lv or a2 == lv for lv in levels) or a1 == a2:
                continue
            r1 = kappa(a1, s, MeanAbsDistance(), grid)
            r2 = kappa(a2, s, MeanAbsDistance(), grid)
            assert r2.is_subset(r1)

    def test_region_depends_on_alpha_only_through_next_level(self):
        grid = make_uniform_grid([(-3, 3)], [11])
        s = Sample.of([0.5, -0.25, 1.0])
        tg = TieGrid(s.n)
        for a1, a2 in [(0.05, 0.2), (0.3, 0.4), (0.8, 0.95)]:
            assert next_level(a1, tg) == next_level(a2, tg)
            assert kappa(a1, s, MeanAbsDistance(), grid) == kappa(
                a2, s, MeanAbsDistance(), grid
            )

    def test_strict_form_equals_weak_form_at_next_level(self):
        grid = make_uniform_grid([(-3, 3)], [11])
        s = Sample.of([0.5, -0.25, 1.0, 0.1])
        t = transducer(s, MeanAbsDistance(), grid)
        for alpha in (0.03, 0.17, 0.33, 0.61, 0.87):
            beta = next_level(alpha, TieGrid(s.n))
            weak_bits = 0
            for i, v in enumerate(t.values):
                if v >= beta:
                    weak_bits |= 1 << i
            assert superlevel_region(t, alpha).bits == weak_bits


class TestNormalizeConsonant:
    def test_idempotent_on_consonant(self):
        t = transducer(Sample.of([0, 1]), MeanAbsDistance(), example_grid())
        assert normalize_consonant(t) is t

    def test_divides_by_maximum(self):
        t = Transducer(universe=make_uniform_grid([(0, 1)], [2]), nums=(2, 1), denom=3, n=2)
        nt = normalize_consonant(t)
        assert nt.denom == 2
        np.testing.assert_array_equal(nt.values, [1.0, 0.5])

    def test_constant_transducer_normalizes_to_one(self):
        t = Transducer(universe=make_uniform_grid([(0, 1)], [3]), nums=(2, 2, 2), denom=5, n=4)
        np.testing.assert_array_equal(normalize_consonant(t).values, [1.0, 1.0, 1.0])

    def test_preserves_argmax_and_idempotent(self):
        rng = np.random.default_rng(9)
        grid = make_uniform_grid([(0, 1)], [6])
        for _ in range(25):
            n = int(rng.integers(2, 9))
            nums = tuple(int(v) for v in rng.integers(1, n + 2, 6))
            t = Transducer(universe=grid, nums=nums, denom=n + 1, n=n)
            nt = normalize_consonant(t)
            assert nt.is_consonant()
            assert nt.argmax_indices() == t.argmax_indices()
            assert normalize_consonant(nt) is nt


@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=5),
    st.integers(min_value=3, max_value=9),
)
@settings(max_examples=40, deadline=None)
def test_transducer_values_never_zero(values, grid_size):
    grid = make_uniform_grid([(-5, 5)], [grid_size])
    t = transducer(Sample.of(values), MeanAbsDistance(), grid)
    assert all(k >= 1 for k in t.nums)
    tg = TieGrid(t.n)
    for v in t.values.tolist():
        assert any(v == lv for lv in tg.levels[1:])
