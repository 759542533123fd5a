#pragma once

#include <span>
#include <string>
#include <vector>

#include "rankforge/core.hpp"
#include "rankforge/metrics.hpp"

namespace rankforge {

// Inverse squared length scale of the heat kernel. Distinct from the sigmoid
// scale of the pairwise logistic loss.
struct KernelWidth {
  double sigma;

  explicit KernelWidth(double sigma_);
};

// Symmetric similarity matrix with unit diagonal plus, per entity, the indices
// of its k most similar others. Pairs with similarity 0 (e.g. empty common
// support) are excluded from neighborhoods, so a neighborhood may hold fewer
// than k_neighbors entries.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;

  // Validates symmetry, unit diagonal and finiteness, then builds the kNN
  // neighborhoods (ties broken by ascending index).
  static SimilarityGraph from_matrix(Matrix matrix, int k_neighbors);

  int size() const { return static_cast<int>(matrix_.rows()); }
  double at(int i, int j) const {
    return matrix_(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  const Matrix& matrix() const { return matrix_; }
  int k_neighbors() const { return k_neighbors_; }
  const std::vector<int>& neighbors(int i) const {
    return neighborhoods_[static_cast<std::size_t>(i)];
  }

 private:
  Matrix matrix_;
  int k_neighbors_ = 0;
  std::vector<std::vector<int>> neighborhoods_;
};

enum class Axis { Users, Items };

// sigma = 1 / (mean Euclidean distance over unordered distinct pairs)^2.
KernelWidth kernel_width(const EntityFeatures& descriptors);

// Heat-kernel similarity s_ij = exp(-sigma * ||x_i - x_j||^2).
SimilarityGraph input_similarity(const EntityFeatures& descriptors, KernelWidth width,
                                 int k_neighbors = 5);

// Symmetric preference-vector distance over a common support:
// 1/2 * ((1 - NDCG@k(y_a, y_b)) + (1 - NDCG@k(y_b, y_a))), where
// NDCG@k(y_a, y_b) ranks items by y_b and evaluates against ground truth y_a.
double output_distance(std::span<const double> y_a, std::span<const double> y_b,
                       TruncationLevel k);

// s = exp(-output_distance) over each pair's commonly observed support; pairs
// with empty common support get similarity 0.
SimilarityGraph output_similarity(const PreferenceMatrix& preferences, Axis axis,
                                  TruncationLevel k, int k_neighbors = 5);

// Elementwise mu1 * s_in + mu2 * s_out, clamped to [0, 1], unit diagonal.
SimilarityGraph blend_item_similarity(const SimilarityGraph& s_in, const SimilarityGraph& s_out,
                                      double mu1, double mu2);

// Writes the matrix as CSV rows (row, col, value).
void save_similarity_csv(const SimilarityGraph& graph, const std::string& path);

}  // namespace rankforge
