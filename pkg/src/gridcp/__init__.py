"""gridcp: full conformal prediction and its possibility/credal reformulation
on finite grids, plus a harness that machine-checks the structural laws
tying the two together (and the Bayesian predictive route) at desk scale."""

from .bayes import (
    ConjugateModel,
    CredalPrior,
    DensityTieError,
    PredictiveDensity,
    bcp,
    check_bayes_triangle,
    check_eposterior,
    midpoint_grid,
    posterior_predictive,
    quant,
    upper_posterior,
)
from .catlaws import (
    FiniteCorrespondence,
    FinSet,
    VietorisObject,
    check_category_axioms,
    check_monad_laws,
    compose,
    identity,
    tensor,
    vietoris_map,
)
from .fullcp import (
    TieGrid,
    TieLevelError,
    Transducer,
    assert_no_tie,
    kappa,
    next_level,
    normalize_consonant,
    transducer,
)
from .grid import (
    Grid,
    Region,
    Sample,
    UniverseMismatchError,
    drop_index,
    make_uniform_grid,
)
from .harness import ExperimentConfig, emit, run_experiment
from .imprecise import (
    CredalSpec,
    PossibilityContour,
    ProbVector,
    check_functor_monotone,
    cred,
    ihdr_bruteforce,
    ihdr_contour,
    is_member,
    lower_prob,
    upper_prob,
)
from .scores import (
    EmbeddingNet,
    MeanAbsDistance,
    NegPredictiveDensity,
    PrototypeEmbedding,
    ScoreFn,
    check_permutation_invariance,
    score_mean_abs,
    score_prototype,
)

__version__ = "0.1.0"

__all__ = [
    "ConjugateModel",
    "CredalPrior",
    "CredalSpec",
    "DensityTieError",
    "EmbeddingNet",
    "ExperimentConfig",
    "FinSet",
    "FiniteCorrespondence",
    "Grid",
    "MeanAbsDistance",
    "NegPredictiveDensity",
    "PossibilityContour",
    "PredictiveDensity",
    "ProbVector",
    "PrototypeEmbedding",
    "Region",
    "Sample",
    "ScoreFn",
    "TieGrid",
    "TieLevelError",
    "Transducer",
    "UniverseMismatchError",
    "VietorisObject",
    "assert_no_tie",
    "bcp",
    "check_bayes_triangle",
    "check_category_axioms",
    "check_eposterior",
    "check_functor_monotone",
    "check_monad_laws",
    "check_permutation_invariance",
    "compose",
    "cred",
    "drop_index",
    "emit",
    "identity",
    "ihdr_bruteforce",
    "ihdr_contour",
    "is_member",
    "kappa",
    "lower_prob",
    "make_uniform_grid",
    "midpoint_grid",
    "next_level",
    "normalize_consonant",
    "posterior_predictive",
    "quant",
    "run_experiment",
    "score_mean_abs",
    "score_prototype",
    "tensor",
    "transducer",
    "upper_posterior",
    "upper_prob",
    "vietoris_map",
]
