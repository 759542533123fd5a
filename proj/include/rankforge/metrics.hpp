#pragma once

#include <span>

#include "rankforge/core.hpp"

namespace rankforge {

// Truncation level at which DCG/NDCG is evaluated.
struct TruncationLevel {
  int k;

  explicit TruncationLevel(int k_);
};

// Gain and discount terms of the DCG sum: (2^y - 1) and
// I(rank <= k) / log2(rank + 1).
double label_gain(double label);
double rank_discount(int rank, TruncationLevel k);

// DCG@k: sum over elements ranked within the top k of (2^y - 1) / log2(rank + 1).
double dcg_at_k(std::span<const double> labels, const RankVector& ranks, TruncationLevel k);

// DCG of the label vector under its own descending ranking.
double ideal_dcg_at_k(std::span<const double> labels, TruncationLevel k);

// NDCG@k in [0, 1]. An all-zero label vector is defined to score 1.0: any
// ranking of uniformly irrelevant items is perfect.
double ndcg_at_k(std::span<const double> labels, std::span<const double> predicted_scores,
                 TruncationLevel k);

// NDCG change caused by swapping the ground-truth labels of items j and k
// under a fixed predicted ranking. Both terms are normalized by the ideal DCG
// of the original labels; the label multiset is invariant under the swap so
// the two ideals coincide.
double swap_delta_ndcg(std::span<const double> labels, const RankVector& predicted_ranks,
                       int item_j, int item_k, TruncationLevel trunc);

// Swap delta attenuated by item similarity: delta * (1 - similarity).
double weighted_swap_delta(double delta, double item_similarity);

}  // namespace rankforge
