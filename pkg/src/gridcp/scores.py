"""Nonconformity scores, permutation-invariant in the sample argument.

A score assigns a real number to (sample, candidate) pairs; by convention a
*small* score in the plug-in ranking machinery means the candidate conforms
to the sample. Three families ship:

* mean absolute distance -- |mean(sample) - y| (Euclidean norm for d > 1);
* prototype embedding    -- the *negated* squared distance between a learned
  embedding of the candidate and the mean embedding of the sample. The sign
  is kept as-is: large values mean conforming for this family, which inverts
  the induced regions but leaves every structural law intact (the laws hold
  for any permutation-invariant score);
* negative predictive density -- minus a frozen Gaussian density evaluated at
  the candidate; the sample argument is ignored, so permutation invariance
  is vacuous (and still property-tested).

Sample aggregates are computed with exactly rounded summation (math.fsum) so
that score values are bit-for-bit invariant under permuting the sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Sample

__all__ = [
    "ScoreFn",
    "MeanAbsDistance",
    "PrototypeEmbedding",
    "NegPredictiveDensity",
    "EmbeddingNet",
    "score_mean_abs",
    "score_prototype",
    "check_permutation_invariance",
    "score_from_json",
    "gaussian_pdf",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gaussian_pdf(y, mean: float, sd: float):
    """Normal density; shared by every caller so float results agree bitwise."""
    z = (np.asarray(y, dtype=float) - mean) / sd
    out = np.exp(-0.5 * z * z) / (sd * _SQRT_2PI)
    return out


def _fsum_mean(points: np.ndarray) -> np.ndarray:
    """Componentwise mean via exactly rounded sums (order-independent)."""
    n, d = points.shape
    return np.array([math.fsum(points[:, k]) / n for k in range(d)])


def _partial_sums(points: np.ndarray) -> np.ndarray:
    """Row i = exactly rounded componentwise sum of all rows except i."""
    n, d = points.shape
    out = np.empty((n, d))
    for i in range(n):
        rest = np.delete(points, i, axis=0)
        for k in range(d):
            out[i, k] = math.fsum(rest[:, k]) if n > 1 else 0.0
    return out


class ScoreFn:
    """Base class for nonconformity scores.

    Subclasses implement `evaluate` (single pair) and may override
    `loo_matrix` with a vectorized kernel used by the ranking transform.
    """

    kind: str = "abstract"

    def evaluate(self, sample: Sample, y) -> float:
        raise NotImplementedError

    def loo_matrix(self, y_n: Sample, candidates: np.ndarray) -> np.ndarray:
        """Leave-one-out score table for the plug-in ranking transform.

        For each candidate c (rows) and each i in 1..n+1 (columns), entry
        [c, i-1] is the score of the i-th element of (y_1..y_n, c) against
        the remaining n elements. Default implementation loops over
        `evaluate`; subclasses provide vectorized versions.
        """
        pts = list(y_n.observations)
        G = candidates.shape[0]
        n = y_n.n
        out = np.empty((G, n + 1))
        for g in range(G):
            cand = tuple(float(v) for v in np.atleast_1d(candidates[g]))
            full = pts + [cand]
            for i in range(n + 1):
                rest = Sample(tuple(full[:i] + full[i + 1 :]))
                out[g, i] = self.evaluate(rest, full[i])
        return out

    def to_json(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class MeanAbsDistance(ScoreFn):
    """|mean(sample) - y|, Euclidean norm when d > 1."""

    kind: str = "mean_abs_distance"

    def evaluate(self, sample: Sample, y) -> float:
        return score_mean_abs(sample, y)

    def loo_matrix(self, y_n: Sample, candidates: np.ndarray) -> np.ndarray:
        pts = y_n.as_array()  # (n, d)
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))
        if cand.shape[1] != pts.shape[1]:
            cand = cand.reshape(-1, pts.shape[1])
        n, d = pts.shape
        # Per-index partial sums via exactly rounded summation, rather than
        # total-minus-point: the latter's rounding can break score ties that
        # hold in exact arithmetic (e.g. n = 1, where the held-out point's
        # score must tie the candidate's at every candidate).
        partial = _partial_sums(pts)  # (n, d), row i = sum over pts without i
        base_sum = np.array([math.fsum(pts[:, k]) for k in range(d)])  # (d,)
        # columns 0..n-1: held-out training point i against the other n points
        mean_wo_i = (partial[None, :, :] + cand[:, None, :]) / n  # (G, n, d)
        t_train = np.linalg.norm(mean_wo_i - pts[None, :, :], axis=2)  # (G, n)
        # column n: the candidate against the training sample
        t_cand = np.linalg.norm(base_sum[None, :] / n - cand, axis=1)  # (G,)
        return np.concatenate([t_train, t_cand[:, None]], axis=1)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "params": {}}, sort_keys=True)


@dataclass(frozen=True)
class EmbeddingNet:
    """Fixed feed-forward map R^d -> R^m: affine layers with ReLU between
    them and a linear last layer. Weights are user-supplied constants."""

    layers: tuple[tuple[tuple[tuple[float, ...], ...], tuple[float, ...]], ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        prev = None
        for W, b in self.layers:
            rows = len(W)
            cols = len(W[0])
            if any(len(r) != cols for r in W):
                raise ValueError("ragged weight matrix")
            if len(b) != rows:
                raise ValueError("bias length must match output dim")
            for r in W:
                for v in r:
                    if not math.isfinite(v):
                        raise ValueError("non-finite weight")
            if prev is not None and cols != prev:
                raise ValueError("layer dims inconsistent")
            prev = rows

    @property
    def in_dim(self) -> int:
        return len(self.layers[0][0][0])

    @property
    def out_dim(self) -> int:
        return len(self.layers[-1][1])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map a (batch, d) array to (batch, m)."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        last = len(self.layers) - 1
        for j, (W, b) in enumerate(self.layers):
            h = h @ np.asarray(W, dtype=float).T + np.asarray(b, dtype=float)
            if j != last:
                h = np.maximum(h, 0.0)
        return h

    @staticmethod
    def identity(d: int) -> EmbeddingNet:
        W = tuple(tuple(1.0 if i == j else 0.0 for j in range(d)) for i in range(d))
        return EmbeddingNet(((W, tuple(0.0 for _ in range(d))),))

    @staticmethod
    def from_weights(mats: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> EmbeddingNet:
        layers = tuple(
            (tuple(tuple(float(v) for v in row) for row in W), tuple(float(v) for v in b))
            for W, b in zip(mats, biases)
        )
        return EmbeddingNet(layers)


@dataclass(frozen=True)
class PrototypeEmbedding(ScoreFn):
    """Negated squared distance to the sample's embedding prototype."""

    net: EmbeddingNet
    kind: str = "prototype_embedding"

    def evaluate(self, sample: Sample, y) -> float:
        return score_prototype(sample, y, self.net)

    def loo_matrix(self, y_n: Sample, candidates: np.ndarray) -> np.ndarray:
        pts = y_n.as_array()
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))
        if cand.shape[1] != pts.shape[1]:
            cand = cand.reshape(-1, pts.shape[1])
        n = pts.shape[0]
        emb_train = self.net.apply(pts)  # (n, m)
        emb_cand = self.net.apply(cand)  # (G, m)
        m = emb_train.shape[1]
        # Same tie-preservation concern as the mean-distance kernel: build
        # per-index partial sums instead of subtracting from the total.
        partial = _partial_sums(emb_train)  # (n, m)
        base_sum = np.array([math.fsum(emb_train[:, k]) for k in range(m)])
        proto_wo_i = (partial[None, :, :] + emb_cand[:, None, :]) / n  # (G, n, m)
        diff = emb_train[None, :, :] - proto_wo_i
        t_train = -np.sum(diff * diff, axis=2)
        dcand = emb_cand - base_sum[None, :] / n
        t_cand = -np.sum(dcand * dcand, axis=1)
        return np.concatenate([t_train, t_cand[:, None]], axis=1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "params": {
                    "weights": [[list(r) for r in W] for W, _ in self.net.layers],
                    "biases": [list(b) for _, b in self.net.layers],
                },
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class NegPredictiveDensity(ScoreFn):
    """Minus a frozen Gaussian predictive density at the candidate.

    The sample argument is ignored: the predictive was already fit to the
    sample that produced this score, so the leave-one-out machinery sees a
    fixed function of the candidate alone.
    """

    mean: float
    sd: float
    kind: str = "neg_predictive_density"

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")

    def density(self, y):
        return gaussian_pdf(y, self.mean, self.sd)

    def evaluate(self, sample: Sample, y) -> float:
        val = float(np.atleast_1d(y)[0]) if not isinstance(y, (int, float)) else float(y)
        return -float(self.density(val))

    def loo_matrix(self, y_n: Sample, candidates: np.ndarray) -> np.ndarray:
        pts = y_n.as_array()[:, 0]
        cand = np.asarray(candidates, dtype=float).reshape(-1)
        t_train = -self.density(pts)  # constant across candidates
        t_cand = -self.density(cand)
        G = cand.shape[0]
        out = np.empty((G, pts.shape[0] + 1))
        out[:, : pts.shape[0]] = t_train[None, :]
        out[:, -1] = t_cand
        return out

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "params": {"mean": self.mean, "sd": self.sd}},
            sort_keys=True,
        )


def score_mean_abs(y_n: Sample, y) -> float:
    """|mean(y_n) - y|; Euclidean norm componentwise for d > 1."""
    pts = y_n.as_array()
    mean = _fsum_mean(pts)
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    if yy.shape[0] != pts.shape[1]:
        raise ValueError(f"dimension mismatch: sample d={pts.shape[1]}, y={yy.shape}")
    diff = mean - yy
    return float(math.sqrt(math.fsum((diff * diff).tolist())))


def score_prototype(y_n: Sample, y, net: EmbeddingNet) -> float:
    """-||phi(y) - mean_i phi(y_i)||^2 with the network's embedding phi.

    Note the sign: the value is <= 0 and *larger* (closer to 0) means more
    conforming, the reverse of the other families.
    """
    pts = y_n.as_array()
    if pts.shape[1] != net.in_dim:
        raise ValueError(
            f"dimension mismatch: sample d={pts.shape[1]}, net expects {net.in_dim}"
        )
    emb = net.apply(pts)
    proto = _fsum_mean(emb)
    phi_y = net.apply(np.atleast_2d(np.asarray(y, dtype=float)))[0]
    diff = phi_y - proto
    return -float(math.fsum((diff * diff).tolist()))


def check_permutation_invariance(
    psi: ScoreFn, y_n: Sample, y, trials: int, seed: int = 0
) -> bool:
    """True iff psi agrees exactly across `trials` random permutations of y_n."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    ref = psi.evaluate(y_n, y)
    obs = list(y_n.observations)
    for _ in range(trials):
        perm = rng.permutation(len(obs))
        shuffled = Sample(tuple(obs[int(i)] for i in perm))
        if psi.evaluate(shuffled, y) != ref:
            return False
    return True


def score_from_json(text: str) -> ScoreFn:
    """Load a score config: {"kind": ..., "params": {...}}."""
    obj = json.loads(text)
    kind = obj.get("kind")
    params = obj.get("params", {})
    if kind == "mean_abs_distance":
        return MeanAbsDistance()
    if kind == "prototype_embedding":
        net = EmbeddingNet(
            tuple(
                (tuple(tuple(float(v) for v in row) for row in W), tuple(float(v) for v in b))
                for W, b in zip(params["weights"], params["biases"])
            )
        )
        return PrototypeEmbedding(net)
    if kind == "neg_predictive_density":
        return NegPredictiveDensity(mean=float(params["mean"]), sd=float(params["sd"]))
    raise ValueError(f"unknown score kind {kind!r}")
