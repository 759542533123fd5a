#include "rankforge/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace rankforge {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

// Directed NDCG@k(y_a, y_b): rank items by y_b, evaluate against ground truth y_a.
double directed_ndcg(std::span<const double> y_a, std::span<const double> y_b,
                     TruncationLevel k) {
  return ndcg_at_k(y_a, y_b, k);
}

}  // namespace

KernelWidth::KernelWidth(double sigma_) : sigma(sigma_) {
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    throw std::invalid_argument("KernelWidth: sigma must be finite and positive");
  }
}

SimilarityGraph SimilarityGraph::from_matrix(Matrix matrix, int k_neighbors) {
  if (matrix.rows() != matrix.cols()) {
    throw std::invalid_argument("SimilarityGraph: matrix must be square");
  }
  if (k_neighbors < 0) {
    throw std::invalid_argument("SimilarityGraph: k_neighbors must be non-negative");
  }
  const std::size_t n = matrix.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (matrix(i, i) != 1.0) {
      throw std::invalid_argument("SimilarityGraph: diagonal must be 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(matrix(i, j))) {
        throw std::invalid_argument("SimilarityGraph: non-finite similarity");
      }
      if (matrix(i, j) != matrix(j, i)) {
        throw std::invalid_argument("SimilarityGraph: matrix must be symmetric");
      }
    }
  }

  SimilarityGraph g;
  g.matrix_ = std::move(matrix);
  g.k_neighbors_ = k_neighbors;
  g.neighborhoods_.resize(n);
  std::vector<int> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && g.matrix_(i, j) > 0.0) {
        candidates.push_back(static_cast<int>(j));
      }
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors),
                                                   candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), [&](int a, int b) {
                        const double sa = g.matrix_(i, static_cast<std::size_t>(a));
                        const double sb = g.matrix_(i, static_cast<std::size_t>(b));
                        if (sa != sb) return sa > sb;
                        return a < b;
                      });
    candidates.resize(take);
    g.neighborhoods_[i] = candidates;
  }
  return g;
}

KernelWidth kernel_width(const EntityFeatures& descriptors) {
  const std::size_t n = descriptors.n_entities();
  if (n < 2) {
    throw std::invalid_argument("kernel_width: need at least two entities");
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += std::sqrt(squared_distance(descriptors.row(i), descriptors.row(j)));
      ++pairs;
    }
  }
  const double mean = sum / static_cast<double>(pairs);
  if (mean <= 0.0) {
    throw std::invalid_argument("kernel_width: all entities identical, zero mean distance");
  }
  return KernelWidth(1.0 / (mean * mean));
}

SimilarityGraph input_similarity(const EntityFeatures& descriptors, KernelWidth width,
                                 int k_neighbors) {
  const std::size_t n = descriptors.n_entities();
  Matrix m(n, n, 0.0);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s =
          std::exp(-width.sigma * squared_distance(descriptors.row(i), descriptors.row(j)));
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return SimilarityGraph::from_matrix(std::move(m), k_neighbors);
}

double output_distance(std::span<const double> y_a, std::span<const double> y_b,
                       TruncationLevel k) {
  if (y_a.size() != y_b.size()) {
    throw std::invalid_argument("output_distance: support length mismatch");
  }
  if (y_a.empty()) {
    throw std::invalid_argument("output_distance: empty common support");
  }
  return 0.5 * ((1.0 - directed_ndcg(y_a, y_b, k)) + (1.0 - directed_ndcg(y_b, y_a, k)));
}

SimilarityGraph output_similarity(const PreferenceMatrix& preferences, Axis axis,
                                  TruncationLevel k, int k_neighbors) {
  // Preference vectors over the chosen axis, stored as sorted sparse rows.
  std::vector<std::vector<std::pair<int, double>>> rows;
  if (axis == Axis::Users) {
    rows.reserve(static_cast<std::size_t>(preferences.n_users()));
    for (int u = 0; u < preferences.n_users(); ++u) {
      rows.push_back(preferences.observed(u));
    }
  } else {
    rows = preferences.by_item();
  }

  const std::size_t n = rows.size();
  Matrix m(n, n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    m(i, i) = 1.0;
    std::vector<double> ya;
    std::vector<double> yb;
    for (std::size_t j = i + 1; j < n; ++j) {
      ya.clear();
      yb.clear();
      // Merge-intersect the two sorted supports.
      std::size_t p = 0;
      std::size_t q = 0;
      while (p < rows[i].size() && q < rows[j].size()) {
        if (rows[i][p].first < rows[j][q].first) {
          ++p;
        } else if (rows[i][p].first > rows[j][q].first) {
          ++q;
        } else {
          ya.push_back(rows[i][p].second);
          yb.push_back(rows[j][q].second);
          ++p;
          ++q;
        }
      }
      double s = 0.0;
      if (!ya.empty()) {
        s = std::exp(-output_distance(ya, yb, k));
      }
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return SimilarityGraph::from_matrix(std::move(m), k_neighbors);
}

SimilarityGraph blend_item_similarity(const SimilarityGraph& s_in, const SimilarityGraph& s_out,
                                      double mu1, double mu2) {
  if (s_in.size() != s_out.size()) {
    throw std::invalid_argument("blend_item_similarity: size mismatch");
  }
  if (mu1 < 0.0 || mu2 < 0.0) {
    throw std::invalid_argument("blend_item_similarity: weights must be non-negative");
  }
  const std::size_t n = static_cast<std::size_t>(s_in.size());
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double raw = mu1 * s_in.matrix()(i, j) + mu2 * s_out.matrix()(i, j);
      const double s = std::clamp(raw, 0.0, 1.0);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return SimilarityGraph::from_matrix(std::move(m), s_in.k_neighbors());
}

void save_similarity_csv(const SimilarityGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_similarity_csv: cannot open " + path);
  }
  out << "row,col,value\n";
  char buf[64];
  for (int i = 0; i < graph.size(); ++i) {
    for (int j = 0; j < graph.size(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), graph.at(i, j));
      out << i << ',' << j << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf))
          << '\n';
    }
  }
}

}  // namespace rankforge
