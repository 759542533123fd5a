#include "rankforge/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rankforge {

std::vector<int> nearest_neighbors(std::span<const double> query, const EntityFeatures& rows,
                                   int k) {
  const std::size_t n = rows.n_entities();
  if (n == 0) {
    throw std::invalid_argument("nearest_neighbors: no candidate rows");
  }
  if (query.size() != rows.dim()) {
    throw std::invalid_argument("nearest_neighbors: descriptor dimension mismatch");
  }
  if (k < 1) {
    throw std::invalid_argument("nearest_neighbors: k must be >= 1");
  }
  std::vector<std::pair<double, int>> dist;
  dist.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = rows.row(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double d = query[j] - row[j];
      d2 += d * d;
    }
    dist.emplace_back(d2, static_cast<int>(i));
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
  std::vector<int> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(dist[i].second);
  return out;
}

std::vector<double> user_memory_scores(std::span<const double> new_user_desc,
                                       const PreferenceMatrix& train,
                                       const EntityFeatures& train_user_features,
                                       const NeighborQuery& q) {
  if (train.n_users() != static_cast<int>(train_user_features.n_entities())) {
    throw std::invalid_argument("user_memory_scores: feature rows do not match training users");
  }
  const std::vector<int> neighbors = nearest_neighbors(new_user_desc, train_user_features, q.k);
  std::vector<double> sum(static_cast<std::size_t>(train.n_items()), 0.0);
  std::vector<int> count(static_cast<std::size_t>(train.n_items()), 0);
  for (int nb : neighbors) {
    for (const auto& [item, score] : train.observed(nb)) {
      sum[static_cast<std::size_t>(item)] += score;
      ++count[static_cast<std::size_t>(item)];
    }
  }
  std::vector<double> out(sum.size(), 0.0);
  for (std::size_t j = 0; j < sum.size(); ++j) {
    if (count[j] > 0) out[j] = sum[j] / static_cast<double>(count[j]);
  }
  return out;
}

double full_memory_score(std::span<const double> new_user_desc,
                         std::span<const double> new_item_desc, const PreferenceMatrix& train,
                         const EntityFeatures& train_user_features,
                         const EntityFeatures& train_item_features, const NeighborQuery& q) {
  if (train.n_users() != static_cast<int>(train_user_features.n_entities()) ||
      train.n_items() != static_cast<int>(train_item_features.n_entities())) {
    throw std::invalid_argument("full_memory_score: feature rows do not match training data");
  }
  const std::vector<int> user_nb = nearest_neighbors(new_user_desc, train_user_features, q.k);
  const std::vector<int> item_nb = nearest_neighbors(new_item_desc, train_item_features, q.k);
  std::vector<char> wanted(static_cast<std::size_t>(train.n_items()), 0);
  for (int j : item_nb) wanted[static_cast<std::size_t>(j)] = 1;
  double sum = 0.0;
  int count = 0;
  for (int u : user_nb) {
    for (const auto& [item, score] : train.observed(u)) {
      if (wanted[static_cast<std::size_t>(item)]) {
        sum += score;
        ++count;
      }
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace rankforge
