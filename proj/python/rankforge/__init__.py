"""Learning-to-rank recommender toolkit: LambdaMART and factorized variants."""

from ._core import (  # noqa: F401
    FactorModel,
    RegressionTree,
    ScorerModel,
    dcg_at_k,
    fit_tree,
    input_similarity,
    kernel_width,
    lambda_gradients,
    mcnemar_pvalue,
    ndcg_at_k,
    output_distance,
    pair_constraints,
    rank_descending,
    swap_delta_ndcg,
    train_lambdamart,
    train_lmmf,
    user_memory_scores,
    weighted_swap_delta,
)

__all__ = [
    "FactorModel",
    "RegressionTree",
    "ScorerModel",
    "dcg_at_k",
    "fit_tree",
    "input_similarity",
    "kernel_width",
    "lambda_gradients",
    "mcnemar_pvalue",
    "ndcg_at_k",
    "output_distance",
    "pair_constraints",
    "rank_descending",
    "swap_delta_ndcg",
    "train_lambdamart",
    "train_lmmf",
    "user_memory_scores",
    "weighted_swap_delta",
]
