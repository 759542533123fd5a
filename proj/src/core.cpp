#include "rankforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rankforge {

PreferenceMatrix::PreferenceMatrix(int n_users, int n_items, std::vector<Entry> entries)
    : n_users_(n_users), n_items_(n_items) {
  if (n_users <= 0 || n_items <= 0) {
    throw std::invalid_argument("PreferenceMatrix: dimensions must be positive");
  }
  by_user_.resize(static_cast<std::size_t>(n_users));
  for (const Entry& e : entries) {
    if (e.user < 0 || e.user >= n_users || e.item < 0 || e.item >= n_items) {
      throw std::invalid_argument("PreferenceMatrix: entry index out of range (user " +
                                  std::to_string(e.user) + ", item " + std::to_string(e.item) + ")");
    }
    if (!std::isfinite(e.score) || e.score < 0.0) {
      throw std::invalid_argument("PreferenceMatrix: score must be finite and non-negative");
    }
    by_user_[static_cast<std::size_t>(e.user)].emplace_back(e.item, e.score);
  }
  for (int u = 0; u < n_users; ++u) {
    auto& row = by_user_[static_cast<std::size_t>(u)];
    if (row.empty()) {
      throw std::invalid_argument("PreferenceMatrix: user " + std::to_string(u) +
                                  " has no observed entries");
    }
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i].first == row[i - 1].first) {
        throw std::invalid_argument("PreferenceMatrix: duplicate entry (user " +
                                    std::to_string(u) + ", item " + std::to_string(row[i].first) + ")");
      }
    }
    n_observed_ += row.size();
  }
}

std::vector<std::vector<std::pair<int, double>>> PreferenceMatrix::by_item() const {
  std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(n_items_));
  for (int u = 0; u < n_users_; ++u) {
    for (const auto& [item, score] : by_user_[static_cast<std::size_t>(u)]) {
      out[static_cast<std::size_t>(item)].emplace_back(u, score);
    }
  }
  return out;
}

std::vector<Entry> PreferenceMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(n_observed_);
  for (int u = 0; u < n_users_; ++u) {
    for (const auto& [item, score] : by_user_[static_cast<std::size_t>(u)]) {
      out.push_back({u, item, score});
    }
  }
  return out;
}

EntityFeatures::EntityFeatures(Matrix values, std::vector<std::string> column_names)
    : values_(std::move(values)), column_names_(std::move(column_names)) {
  if (column_names_.size() != values_.cols()) {
    throw std::invalid_argument("EntityFeatures: column name count does not match matrix width");
  }
  for (double v : values_.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("EntityFeatures: non-finite descriptor value");
    }
  }
}

RankVector::RankVector(std::vector<int> ranks) : ranks_(std::move(ranks)) {
  const std::size_t m = ranks_.size();
  if (m == 0) {
    throw std::invalid_argument("RankVector: empty");
  }
  std::vector<char> seen(m, 0);
  for (int r : ranks_) {
    if (r < 1 || static_cast<std::size_t>(r) > m || seen[static_cast<std::size_t>(r - 1)]) {
      throw std::invalid_argument("RankVector: not a permutation of 1..M");
    }
    seen[static_cast<std::size_t>(r - 1)] = 1;
  }
}

RankVector rank_descending(std::span<const double> scores) {
  if (scores.empty()) {
    throw std::invalid_argument("rank_descending: empty input");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("rank_descending: non-finite score");
    }
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  std::vector<int> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    ranks[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
  }
  return RankVector(std::move(ranks));
}

PairSet pair_constraints(std::span<const double> labels) {
  for (double y : labels) {
    if (!std::isfinite(y)) {
      throw std::invalid_argument("pair_constraints: non-finite label");
    }
  }
  PairSet out;
  const int m = static_cast<int>(labels.size());
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      if (labels[static_cast<std::size_t>(j)] > labels[static_cast<std::size_t>(k)]) {
        out.pairs.emplace_back(j, k);
      }
    }
  }
  return out;
}

}  // namespace rankforge
