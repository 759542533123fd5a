#include "rankforge/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace rankforge {


double label_gain(double label) { return std::exp2(label) - 1.0; }

double rank_discount(int rank, TruncationLevel k) {
  if (rank > k.k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

TruncationLevel::TruncationLevel(int k_) : k(k_) {
  if (k < 1) {
    throw std::invalid_argument("TruncationLevel: k must be >= 1");
  }
}

double dcg_at_k(std::span<const double> labels, const RankVector& ranks, TruncationLevel k) {
  if (labels.size() != ranks.size()) {
    throw std::invalid_argument("dcg_at_k: labels and ranks length mismatch");
  }
  double dcg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    dcg += label_gain(labels[i]) * rank_discount(ranks[i], k);
  }
  return dcg;
}

double ideal_dcg_at_k(std::span<const double> labels, TruncationLevel k) {
  return dcg_at_k(labels, rank_descending(labels), k);
}

double ndcg_at_k(std::span<const double> labels, std::span<const double> predicted_scores,
                 TruncationLevel k) {
  if (labels.size() != predicted_scores.size()) {
    throw std::invalid_argument("ndcg_at_k: labels and scores length mismatch");
  }
  const double ideal = ideal_dcg_at_k(labels, k);
  if (ideal <= 0.0) {
    return 1.0;
  }
  return dcg_at_k(labels, rank_descending(predicted_scores), k) / ideal;
}

double swap_delta_ndcg(std::span<const double> labels, const RankVector& predicted_ranks,
                       int item_j, int item_k, TruncationLevel trunc) {
  if (labels.size() != predicted_ranks.size()) {
    throw std::invalid_argument("swap_delta_ndcg: labels and ranks length mismatch");
  }
  const int m = static_cast<int>(labels.size());
  if (item_j < 0 || item_j >= m || item_k < 0 || item_k >= m || item_j == item_k) {
    throw std::invalid_argument("swap_delta_ndcg: invalid item indices");
  }
  const double ideal = ideal_dcg_at_k(labels, trunc);
  if (ideal <= 0.0) {
    return 0.0;
  }
  // Only the two swapped positions change, so the DCG difference factors into
  // (gain_j - gain_k) * (discount_j - discount_k).
  const double gj = label_gain(labels[static_cast<std::size_t>(item_j)]);
  const double gk = label_gain(labels[static_cast<std::size_t>(item_k)]);
  const double dj = rank_discount(predicted_ranks[static_cast<std::size_t>(item_j)], trunc);
  const double dk = rank_discount(predicted_ranks[static_cast<std::size_t>(item_k)], trunc);
  return (gj - gk) * (dj - dk) / ideal;
}

double weighted_swap_delta(double delta, double item_similarity) {
  return delta * (1.0 - item_similarity);
}

}  // namespace rankforge
