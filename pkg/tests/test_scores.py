"""Score families: frozen values, exact permutation invariance, config I/O."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcp.grid import Sample
from gridcp.scores import (
    EmbeddingNet,
    MeanAbsDistance,
    NegPredictiveDensity,
    PrototypeEmbedding,
    ScoreFn,
    check_permutation_invariance,
    score_from_json,
    score_mean_abs,
    score_prototype,
)

finite_floats = st.floats(-50, 50)


class FirstElementScore(ScoreFn):
    """Deliberately order-sensitive: negative control for invariance checks."""

    kind = "first_element"

    def evaluate(self, sample: Sample, y) -> float:
        return abs(sample.observations[0][0] - float(np.atleast_1d(y)[0]))


class TestMeanAbs:
    def test_candidate_at_mean(self):
        assert score_mean_abs(Sample.of([0, 1]), 0.5) == 0.0

    def test_hand_arithmetic(self):
        assert score_mean_abs(Sample.of([0, 2]), 0.0) == 1.0

    def test_identity(self):
        assert score_mean_abs(Sample.of([3]), 3.0) == 0.0

    def test_euclidean_for_d2(self):
        s = Sample.of([(0, 0), (2, 2)])
        assert score_mean_abs(s, (1, 1)) == 0.0
        assert score_mean_abs(s, (1, 0)) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            score_mean_abs(Sample.of([(0, 0)]), 1.0)


class TestPrototype:
    def test_candidate_at_prototype(self):
        net = EmbeddingNet.identity(1)
        assert score_prototype(Sample.of([0, 1]), 0.5, net) == 0.0

    def test_hand_arithmetic(self):
        net = EmbeddingNet.identity(1)
        assert score_prototype(Sample.of([0, 2]), 0.0, net) == -1.0

    def test_zero_net_collapses(self):
        net = EmbeddingNet(((((0.0,),), (0.0,)),))
        for y in (-3.0, 0.0, 7.5):
            assert score_prototype(Sample.of([0, 2, 4]), y, net) == 0.0

    def test_sign_is_nonpositive(self):
        net = EmbeddingNet.identity(1)
        assert score_prototype(Sample.of([0, 4]), 9.0, net) <= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            score_prototype(Sample.of([(0, 1)]), (0, 1), EmbeddingNet.identity(1))

    @given(st.lists(finite_floats, min_size=1, max_size=6), finite_floats)
    def test_identity_net_matches_neg_squared_mean_abs(self, values, y):
        net = EmbeddingNet.identity(1)
        lhs = score_prototype(Sample.of(values), y, net)
        rhs = -score_mean_abs(Sample.of(values), y) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestNegPredictiveDensity:
    def test_matches_gaussian(self):
        psi = NegPredictiveDensity(mean=1.0, sd=2.0)
        expected = -math.exp(-0.125) / (2.0 * math.sqrt(2 * math.pi))
        assert psi.evaluate(Sample.of([99.0]), 2.0) == pytest.approx(expected, rel=1e-15)

    def test_sample_argument_ignored(self):
        psi = NegPredictiveDensity(mean=0.0, sd=1.0)
        assert psi.evaluate(Sample.of([1]), 0.3) == psi.evaluate(Sample.of([-9, 4]), 0.3)

    def test_rejects_bad_sd(self):
        with pytest.raises(ValueError):
            NegPredictiveDensity(mean=0.0, sd=0.0)


class TestPermutationInvariance:
    def test_mean_abs_random_permutations(self):
        s = Sample.of([0.3, -1.2, 4.0, 2.2])
        assert check_permutation_invariance(MeanAbsDistance(), s, 0.7, trials=20)

    def test_prototype_random_permutations(self):
        rng = np.random.default_rng(5)
        net = EmbeddingNet.from_weights(
            [rng.standard_normal((3, 1)), rng.standard_normal((2, 3))],
            [rng.standard_normal(3), rng.standard_normal(2)],
        )
        s = Sample.of([0.3, -1.2, 4.0, 2.2, 0.9])
        assert check_permutation_invariance(PrototypeEmbedding(net), s, 0.7, trials=20)

    def test_negative_control(self):
        s = Sample.of([0.0, 10.0, 20.0])
        assert not check_permutation_invariance(FirstElementScore(), s, 1.0, trials=50)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            check_permutation_invariance(MeanAbsDistance(), Sample.of([1]), 0.0, trials=0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_exhaustive_bit_for_bit(self, n):
        # Exact (not approximate) equality across every permutation, n <= 6.
        rng = np.random.default_rng(n)
        values = rng.uniform(-5, 5, n).tolist()
        y = float(rng.uniform(-5, 5))
        net = EmbeddingNet.from_weights(
            [rng.standard_normal((2, 1))], [rng.standard_normal(2)]
        )
        scores = [MeanAbsDistance(), PrototypeEmbedding(net)]
        for psi in scores:
            ref = psi.evaluate(Sample.of(values), y)
            for perm in itertools.permutations(values):
                assert psi.evaluate(Sample.of(perm), y) == ref


class TestVectorizedKernelAgreesWithEvaluate:
    """The fast leave-one-out tables must match the scalar definition."""

    @pytest.mark.parametrize(
        "psi",
        [
            MeanAbsDistance(),
            PrototypeEmbedding(EmbeddingNet.identity(1)),
            NegPredictiveDensity(mean=0.3, sd=1.7),
        ],
    )
    def test_agreement(self, psi):
        rng = np.random.default_rng(11)
        y_n = Sample.of(rng.uniform(-2, 2, 5).tolist())
        candidates = rng.uniform(-2, 2, 7).reshape(-1, 1)
        fast = psi.loo_matrix(y_n, candidates)
        slow = ScoreFn.loo_matrix(psi, y_n, candidates)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


class TestEmbeddingNet:
    def test_relu_between_layers(self):
        # One hidden layer: x -> max(0, -x) -> scaled
        net = EmbeddingNet.from_weights(
            [np.array([[-1.0]]), np.array([[2.0]])], [np.array([0.0]), np.array([0.0])]
        )
        assert net.apply(np.array([[3.0]]))[0, 0] == 0.0
        assert net.apply(np.array([[-3.0]]))[0, 0] == 6.0

    def test_rejects_inconsistent_dims(self):
        with pytest.raises(ValueError):
            EmbeddingNet.from_weights(
                [np.ones((2, 1)), np.ones((1, 3))], [np.zeros(2), np.zeros(1)]
            )

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EmbeddingNet(((((float("nan"),),), (0.0,)),))


class TestJsonConfig:
    def test_mean_abs_roundtrip(self):
        psi = MeanAbsDistance()
        assert score_from_json(psi.to_json()) == psi

    def test_prototype_roundtrip(self):
        net = EmbeddingNet.from_weights([np.array([[1.5], [0.0]])], [np.array([0.1, -2.0])])
        psi = PrototypeEmbedding(net)
        assert score_from_json(psi.to_json()) == psi

    def test_neg_density_roundtrip(self):
        psi = NegPredictiveDensity(mean=0.5, sd=2.5)
        assert score_from_json(psi.to_json()) == psi

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            score_from_json('{"kind": "nope", "params": {}}')


@given(st.lists(finite_floats, min_size=1, max_size=7), finite_floats)
@settings(max_examples=60)
def test_scores_finite_on_finite_inputs(values, y):
    s = Sample.of(values)
    assert math.isfinite(score_mean_abs(s, y))
    assert math.isfinite(score_prototype(s, y, EmbeddingNet.identity(1)))
