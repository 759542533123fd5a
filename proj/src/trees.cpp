#include "rankforge/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rankforge {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // SSE reduction; <= 0 means no admissible split
};

// Score of a candidate partition from sufficient statistics. SSE(S) equals
// sum_i ||t_i||^2 - sum_d S_d^2 / n; the first term cancels in the gain, so
// only the squared-sum terms are needed.
double sum_sq_over_n(std::span<const double> sum, double n) {
  double s = 0.0;
  for (double v : sum) s += v * v;
  return s / n;
}

class SplitFinder {
 public:
  SplitFinder(const Matrix& features, const Matrix& targets, int min_count)
      : features_(features), targets_(targets), min_count_(min_count) {
    binary_.assign(features.cols(), true);
    for (std::size_t j = 0; j < features.cols(); ++j) {
      for (std::size_t i = 0; i < features.rows(); ++i) {
        const double v = features(i, j);
        if (v != 0.0 && v != 1.0) {
          binary_[j] = false;
          break;
        }
      }
    }
  }

  Split best_split(const std::vector<int>& rows, std::span<const double> node_sum) const {
    const std::size_t n_features = features_.cols();
    std::vector<Split> per_feature(n_features);
#pragma omp parallel for schedule(static)
    for (long long jj = 0; jj < static_cast<long long>(n_features); ++jj) {
      const std::size_t j = static_cast<std::size_t>(jj);
      per_feature[j] = binary_[j] ? best_binary_split(rows, node_sum, static_cast<int>(j))
                                  : best_sorted_split(rows, node_sum, static_cast<int>(j));
    }
    // reduction must pick the same winner as a sequential search: strict >
    // resolves gain ties to the lower feature index
    Split best;
    for (const Split& s : per_feature) {
      if (s.gain > best.gain) best = s;
    }
    return best;
  }

 private:
  Split best_binary_split(const std::vector<int>& rows, std::span<const double> node_sum,
                          int feature) const {
    const std::size_t dim = targets_.cols();
    std::vector<double> left_sum(dim, 0.0);
    std::size_t n_left = 0;
    for (int r : rows) {
      if (features_(static_cast<std::size_t>(r), static_cast<std::size_t>(feature)) <= 0.5) {
        ++n_left;
        const auto t = targets_.row(static_cast<std::size_t>(r));
        for (std::size_t d = 0; d < dim; ++d) left_sum[d] += t[d];
      }
    }
    const std::size_t n = rows.size();
    const std::size_t n_right = n - n_left;
    Split out;
    if (n_left < static_cast<std::size_t>(min_count_) ||
        n_right < static_cast<std::size_t>(min_count_)) {
      return out;
    }
    std::vector<double> right_sum(dim);
    for (std::size_t d = 0; d < dim; ++d) right_sum[d] = node_sum[d] - left_sum[d];
    const double gain = sum_sq_over_n(left_sum, static_cast<double>(n_left)) +
                        sum_sq_over_n(right_sum, static_cast<double>(n_right)) -
                        sum_sq_over_n(node_sum, static_cast<double>(n));
    out.feature = feature;
    out.threshold = 0.5;
    out.gain = gain;
    return out;
  }

  Split best_sorted_split(const std::vector<int>& rows, std::span<const double> node_sum,
                          int feature) const {
    const std::size_t n = rows.size();
    const std::size_t dim = targets_.cols();
    std::vector<std::pair<double, int>> order;
    order.reserve(n);
    for (int r : rows) {
      order.emplace_back(features_(static_cast<std::size_t>(r), static_cast<std::size_t>(feature)),
                         r);
    }
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Split out;
    std::vector<double> left_sum(dim, 0.0);
    std::vector<double> right_sum(dim);
    const double node_term = sum_sq_over_n(node_sum, static_cast<double>(n));
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto t = targets_.row(static_cast<std::size_t>(order[i].second));
      for (std::size_t d = 0; d < dim; ++d) left_sum[d] += t[d];
      if (order[i].first == order[i + 1].first) continue;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < static_cast<std::size_t>(min_count_) ||
          n_right < static_cast<std::size_t>(min_count_)) {
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) right_sum[d] = node_sum[d] - left_sum[d];
      const double gain = sum_sq_over_n(left_sum, static_cast<double>(n_left)) +
                          sum_sq_over_n(right_sum, static_cast<double>(n_right)) - node_term;
      if (gain > out.gain) {
        double mid = 0.5 * (order[i].first + order[i + 1].first);
        // Guard against midpoint collapse onto the upper value; threshold must
        // route exactly the scanned prefix to the left.
        if (!(order[i].first < mid) || !(mid < order[i + 1].first)) {
          mid = order[i].first;
        }
        out.feature = feature;
        out.threshold = mid;
        out.gain = gain;
      }
    }
    return out;
  }

  const Matrix& features_;
  const Matrix& targets_;
  int min_count_;
  std::vector<bool> binary_;
};

struct Candidate {
  int node = -1;
  std::vector<int> rows;
  Split split;
};

std::vector<double> mean_vector(const Matrix& targets, const std::vector<int>& rows) {
  std::vector<double> sum(targets.cols(), 0.0);
  for (int r : rows) {
    const auto t = targets.row(static_cast<std::size_t>(r));
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += t[d];
  }
  for (double& v : sum) v /= static_cast<double>(rows.size());
  return sum;
}

std::vector<double> sum_vector(const Matrix& targets, const std::vector<int>& rows) {
  std::vector<double> sum(targets.cols(), 0.0);
  for (int r : rows) {
    const auto t = targets.row(static_cast<std::size_t>(r));
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += t[d];
  }
  return sum;
}

}  // namespace

RegressionTree RegressionTree::single_leaf(std::vector<double> value) {
  RegressionTree t;
  t.output_dim_ = static_cast<int>(value.size());
  TreeNode leaf;
  leaf.value = std::move(value);
  t.nodes_.push_back(std::move(leaf));
  return t;
}

int RegressionTree::n_leaves() const {
  int n = 0;
  for (const TreeNode& node : nodes_) {
    if (node.is_leaf()) ++n;
  }
  return n;
}

int RegressionTree::leaf_for(std::span<const double> row) const {
  int idx = 0;
  while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& node = nodes_[static_cast<std::size_t>(idx)];
    if (static_cast<std::size_t>(node.feature) >= row.size()) {
      throw std::invalid_argument("RegressionTree: row shorter than referenced feature index");
    }
    const double v = row[static_cast<std::size_t>(node.feature)];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("RegressionTree: non-finite feature value");
    }
    idx = v <= node.threshold ? node.left : node.right;
  }
  return idx;
}

std::span<const double> RegressionTree::predict(std::span<const double> row) const {
  return nodes_[static_cast<std::size_t>(leaf_for(row))].value;
}

nlohmann::json RegressionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& node : nodes_) {
    if (node.is_leaf()) {
      nodes.push_back({{"values", node.value}});
    } else {
      nodes.push_back({{"feature", node.feature},
                       {"threshold", node.threshold},
                       {"left", node.left},
                       {"right", node.right}});
    }
  }
  return {{"output_dim", output_dim_}, {"nodes", nodes}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree t;
  t.output_dim_ = j.at("output_dim").get<int>();
  const auto& nodes = j.at("nodes");
  const int n = static_cast<int>(nodes.size());
  for (const auto& nj : nodes) {
    TreeNode node;
    if (nj.contains("values")) {
      node.value = nj.at("values").get<std::vector<double>>();
      if (static_cast<int>(node.value.size()) != t.output_dim_) {
        throw std::invalid_argument("RegressionTree::from_json: leaf dimension mismatch");
      }
    } else {
      node.feature = nj.at("feature").get<int>();
      node.threshold = nj.at("threshold").get<double>();
      node.left = nj.at("left").get<int>();
      node.right = nj.at("right").get<int>();
      if (node.left < 0 || node.left >= n || node.right < 0 || node.right >= n ||
          node.feature < 0) {
        throw std::invalid_argument("RegressionTree::from_json: malformed internal node");
      }
    }
    t.nodes_.push_back(std::move(node));
  }
  if (t.nodes_.empty()) {
    throw std::invalid_argument("RegressionTree::from_json: empty tree");
  }
  return t;
}

RegressionTree fit_tree(const Matrix& features, const Matrix& targets, const TreeParams& params) {
  const std::size_t n = features.rows();
  if (n == 0) {
    throw std::invalid_argument("fit_tree: no training rows");
  }
  if (targets.rows() != n) {
    throw std::invalid_argument("fit_tree: features and targets row count mismatch");
  }
  if (params.output_dim != static_cast<int>(targets.cols())) {
    throw std::invalid_argument("fit_tree: params.output_dim does not match target width");
  }
  if (params.max_leaves < 2) {
    throw std::invalid_argument("fit_tree: max_leaves must be >= 2");
  }
  if (params.min_leaf_fraction <= 0.0 || params.min_leaf_fraction > 1.0 ||
      params.min_leaf_fraction * static_cast<double>(n) < 1.0 - 1e-9) {
    throw std::invalid_argument("fit_tree: min_leaf_fraction * n_rows must be >= 1");
  }
  const int min_count = std::max(
      1, static_cast<int>(std::ceil(params.min_leaf_fraction * static_cast<double>(n) - 1e-9)));

  RegressionTree tree;
  tree.output_dim_ = params.output_dim;

  std::vector<int> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  TreeNode root;
  root.value = mean_vector(targets, all_rows);
  tree.nodes_.push_back(std::move(root));

  SplitFinder finder(features, targets, min_count);

  std::vector<Candidate> candidates;
  {
    Split s = finder.best_split(all_rows, sum_vector(targets, all_rows));
    if (s.gain > 0.0) {
      candidates.push_back({0, std::move(all_rows), s});
    }
  }

  int n_leaves = 1;
  while (n_leaves < params.max_leaves && !candidates.empty()) {
    // Lowest node index wins gain ties; node indices increase with creation
    // order, which is itself deterministic.
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
      if (candidates[c].split.gain > candidates[best].split.gain) best = c;
    }
    Candidate chosen = std::move(candidates[best]);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));

    std::vector<int> left_rows;
    std::vector<int> right_rows;
    for (int r : chosen.rows) {
      const double v = features(static_cast<std::size_t>(r),
                                static_cast<std::size_t>(chosen.split.feature));
      (v <= chosen.split.threshold ? left_rows : right_rows).push_back(r);
    }

    const int left_idx = static_cast<int>(tree.nodes_.size());
    const int right_idx = left_idx + 1;
    TreeNode left;
    left.value = mean_vector(targets, left_rows);
    TreeNode right;
    right.value = mean_vector(targets, right_rows);
    tree.nodes_.push_back(std::move(left));
    tree.nodes_.push_back(std::move(right));

    TreeNode& parent = tree.nodes_[static_cast<std::size_t>(chosen.node)];
    parent.feature = chosen.split.feature;
    parent.threshold = chosen.split.threshold;
    parent.left = left_idx;
    parent.right = right_idx;
    parent.value.clear();
    ++n_leaves;

    if (n_leaves < params.max_leaves) {
      Split ls = finder.best_split(left_rows, sum_vector(targets, left_rows));
      if (ls.gain > 0.0) {
        candidates.push_back({left_idx, std::move(left_rows), ls});
      }
      Split rs = finder.best_split(right_rows, sum_vector(targets, right_rows));
      if (rs.gain > 0.0) {
        candidates.push_back({right_idx, std::move(right_rows), rs});
      }
    }
  }
  return tree;
}

RegressionTree newton_leaf_refit(const RegressionTree& tree, const Matrix& features,
                                 std::span<const double> g, std::span<const double> h) {
  if (tree.output_dim() != 1) {
    throw std::invalid_argument("newton_leaf_refit: tree must have scalar leaves");
  }
  if (g.size() != features.rows() || h.size() != features.rows()) {
    throw std::invalid_argument("newton_leaf_refit: derivative length mismatch");
  }
  RegressionTree out = tree;
  std::vector<double> sum_g(out.nodes_.size(), 0.0);
  std::vector<double> sum_h(out.nodes_.size(), 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const int leaf = out.leaf_for(features.row(r));
    sum_g[static_cast<std::size_t>(leaf)] += g[r];
    sum_h[static_cast<std::size_t>(leaf)] += h[r];
  }
  for (std::size_t i = 0; i < out.nodes_.size(); ++i) {
    if (out.nodes_[i].is_leaf() && sum_h[i] != 0.0) {
      out.nodes_[i].value[0] = -sum_g[i] / sum_h[i];
    }
  }
  return out;
}

}  // namespace rankforge
