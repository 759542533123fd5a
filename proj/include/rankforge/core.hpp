#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rankforge {

// Dense row-major matrix of doubles. The workhorse container for feature
// tables, latent factor blocks and regression targets.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// One observed preference cell.
struct Entry {
  int user = 0;
  int item = 0;
  double score = 0.0;
};

// Sparse preference matrix with an explicit observed-entry mask, stored as a
// per-user index of (item, score) pairs sorted by item. Construction enforces:
// indices in range, scores finite and non-negative, no duplicate cell, and at
// least one observed entry per user.
class PreferenceMatrix {
 public:
  PreferenceMatrix(int n_users, int n_items, std::vector<Entry> entries);

  int n_users() const { return n_users_; }
  int n_items() const { return n_items_; }
  std::size_t n_observed() const { return n_observed_; }

  const std::vector<std::pair<int, double>>& observed(int user) const {
    return by_user_[static_cast<std::size_t>(user)];
  }

  // Per-item reverse index: (user, score) pairs sorted by user.
  std::vector<std::vector<std::pair<int, double>>> by_item() const;

  std::vector<Entry> entries() const;

 private:
  int n_users_ = 0;
  int n_items_ = 0;
  std::size_t n_observed_ = 0;
  std::vector<std::vector<std::pair<int, double>>> by_user_;
};

// Dense descriptor matrix, one row per entity. All values must be finite.
class EntityFeatures {
 public:
  EntityFeatures() = default;
  EntityFeatures(Matrix values, std::vector<std::string> column_names);

  std::size_t n_entities() const { return values_.rows(); }
  std::size_t dim() const { return values_.cols(); }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  const Matrix& values() const { return values_; }
  const std::vector<std::string>& column_names() const { return column_names_; }

 private:
  Matrix values_;
  std::vector<std::string> column_names_;
};

// A permutation of 1..M; rank 1 is the most preferred position.
class RankVector {
 public:
  explicit RankVector(std::vector<int> ranks);

  const std::vector<int>& ranks() const { return ranks_; }
  std::size_t size() const { return ranks_.size(); }
  int operator[](std::size_t i) const { return ranks_[i]; }

 private:
  std::vector<int> ranks_;
};

// Pairwise preference constraints for one user: (j, k) iff label_j > label_k.
struct PairSet {
  std::vector<std::pair<int, int>> pairs;

  std::size_t size() const { return pairs.size(); }
};

// Ranks scores in decreasing order; the highest score gets rank 1 and ties are
// broken by ascending element index.
RankVector rank_descending(std::span<const double> scores);

// Enumerates every ordered pair (j, k) with labels[j] > labels[k].
PairSet pair_constraints(std::span<const double> labels);

// A full dataset: preference matrix plus user and item descriptors.
struct Dataset {
  PreferenceMatrix prefs;
  EntityFeatures users;
  EntityFeatures items;
};

}  // namespace rankforge
