#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rankforge/core.hpp"

namespace rankforge {

struct TreeParams {
  int max_leaves = 3;
  double min_leaf_fraction = 0.1;  // minimum fraction of training rows per leaf
  int output_dim = 1;
};

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // leaf payload, empty for internal nodes

  bool is_leaf() const { return left < 0; }
};

// Axis-aligned binary regression tree with vector-valued leaves. Routing goes
// left iff feature value <= threshold.
class RegressionTree {
 public:
  RegressionTree() = default;

  static RegressionTree single_leaf(std::vector<double> value);

  int output_dim() const { return output_dim_; }
  int n_leaves() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::span<const double> predict(std::span<const double> row) const;
  int leaf_for(std::span<const double> row) const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  friend RegressionTree fit_tree(const Matrix&, const Matrix&, const TreeParams&);
  friend RegressionTree newton_leaf_refit(const RegressionTree&, const Matrix&,
                                          std::span<const double>, std::span<const double>);

  std::vector<TreeNode> nodes_;
  int output_dim_ = 0;
};

// Greedy best-first growth: each accepted split maximizes the SSE reduction
// summed over all output dimensions, subject to both children holding at least
// ceil(min_leaf_fraction * n_rows) rows. Growth stops at max_leaves or when no
// split reduces the SSE. Leaf values are the mean target vectors of their rows.
RegressionTree fit_tree(const Matrix& features, const Matrix& targets, const TreeParams& params);

// One Newton step on each leaf constant of a scalar tree: the leaf value
// becomes -(sum g_i) / (sum h_i) over the rows routed to it. Leaves with zero
// curvature sum keep their mean-fit value.
RegressionTree newton_leaf_refit(const RegressionTree& tree, const Matrix& features,
                                 std::span<const double> g, std::span<const double> h);

}  // namespace rankforge
