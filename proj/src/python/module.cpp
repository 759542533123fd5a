#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/baselines.hpp"
#include "rankforge/boosting.hpp"
#include "rankforge/core.hpp"
#include "rankforge/eval.hpp"
#include "rankforge/metrics.hpp"
#include "rankforge/similarity.hpp"
#include "rankforge/trees.hpp"

namespace py = pybind11;
using namespace rankforge;

namespace {

Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("matrix must have at least one row");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw std::invalid_argument("ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].assign(m.row(i).begin(), m.row(i).end());
  }
  return rows;
}

EntityFeatures features_from(const std::vector<std::vector<double>>& rows) {
  Matrix m = matrix_from(rows);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m.cols(); ++j) names.push_back("f" + std::to_string(j));
  return EntityFeatures(std::move(m), std::move(names));
}

// groups: (user_row, item_rows, labels) triples
std::vector<RatingGroup> groups_from(
    const std::vector<std::tuple<int, std::vector<int>, std::vector<double>>>& groups) {
  std::vector<RatingGroup> out;
  out.reserve(groups.size());
  for (const auto& [user, items, labels] : groups) {
    out.push_back({user, items, labels});
  }
  return out;
}

BoostParams params_from_kwargs(double eta, int max_trees, int patience, double sigmoid_scale,
                               int truncation, int max_leaves, double min_leaf_fraction,
                               int rank, double mu1, double mu2, std::uint64_t seed) {
  BoostParams p;
  p.eta = eta;
  p.max_trees = max_trees;
  p.early_stop_patience = patience;
  p.sigmoid_scale = sigmoid_scale;
  p.truncation = TruncationLevel(truncation);
  p.tree_params.max_leaves = max_leaves;
  p.tree_params.min_leaf_fraction = min_leaf_fraction;
  p.rank = rank;
  p.mu1 = mu1;
  p.mu2 = mu2;
  p.seed = seed;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "rankforge core: LambdaMART and factorized variants with NDCG machinery";

  m.def(
      "rank_descending",
      [](const std::vector<double>& scores) { return rank_descending(scores).ranks(); },
      py::arg("scores"),
      "Ranks of the scores in decreasing order (rank 1 = best, ties by index).");

  m.def(
      "pair_constraints",
      [](const std::vector<double>& labels) { return pair_constraints(labels).pairs; },
      py::arg("labels"), "All ordered pairs (j, k) with labels[j] > labels[k].");

  m.def(
      "dcg_at_k",
      [](const std::vector<double>& labels, const std::vector<int>& ranks, int k) {
        return dcg_at_k(labels, RankVector(ranks), TruncationLevel(k));
      },
      py::arg("labels"), py::arg("ranks"), py::arg("k"));

  m.def(
      "ndcg_at_k",
      [](const std::vector<double>& labels, const std::vector<double>& scores, int k) {
        return ndcg_at_k(labels, scores, TruncationLevel(k));
      },
      py::arg("labels"), py::arg("scores"), py::arg("k"));

  m.def(
      "swap_delta_ndcg",
      [](const std::vector<double>& labels, const std::vector<int>& predicted_ranks, int j,
         int k, int trunc) {
        return swap_delta_ndcg(labels, RankVector(predicted_ranks), j, k,
                               TruncationLevel(trunc));
      },
      py::arg("labels"), py::arg("predicted_ranks"), py::arg("j"), py::arg("k"),
      py::arg("trunc"));

  m.def("weighted_swap_delta", &weighted_swap_delta, py::arg("delta"),
        py::arg("item_similarity"));

  m.def(
      "kernel_width",
      [](const std::vector<std::vector<double>>& rows) {
        return kernel_width(features_from(rows)).sigma;
      },
      py::arg("descriptors"),
      "Heat-kernel inverse width: 1 / (mean pairwise Euclidean distance)^2.");

  m.def(
      "input_similarity",
      [](const std::vector<std::vector<double>>& rows, double sigma, int k_neighbors) {
        return matrix_to(
            input_similarity(features_from(rows), KernelWidth(sigma), k_neighbors).matrix());
      },
      py::arg("descriptors"), py::arg("sigma"), py::arg("k_neighbors") = 5);

  m.def(
      "output_distance",
      [](const std::vector<double>& ya, const std::vector<double>& yb, int k) {
        return output_distance(ya, yb, TruncationLevel(k));
      },
      py::arg("y_a"), py::arg("y_b"), py::arg("k"));

  m.def(
      "lambda_gradients",
      [](const std::vector<double>& labels, const std::vector<double>& scores, double sigma,
         int trunc) {
        const LambdaGrad lg = lambda_gradients(labels, scores, sigma, TruncationLevel(trunc));
        return py::make_tuple(lg.lambda, lg.curvature, lg.loss);
      },
      py::arg("labels"), py::arg("scores"), py::arg("sigmoid_scale") = 1.0,
      py::arg("trunc") = 5, "Returns (lambda, curvature, loss) for one user.");

  m.def("mcnemar_pvalue", &mcnemar_pvalue, py::arg("wins"), py::arg("losses"));

  py::class_<RegressionTree>(m, "RegressionTree")
      .def_property_readonly("n_leaves", &RegressionTree::n_leaves)
      .def_property_readonly("output_dim", &RegressionTree::output_dim)
      .def(
          "predict",
          [](const RegressionTree& tree, const std::vector<double>& row) {
            const auto leaf = tree.predict(row);
            return std::vector<double>(leaf.begin(), leaf.end());
          },
          py::arg("row"))
      .def("to_json", [](const RegressionTree& tree) { return tree.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return RegressionTree::from_json(nlohmann::json::parse(text));
      });

  m.def(
      "fit_tree",
      [](const std::vector<std::vector<double>>& features,
         const std::vector<std::vector<double>>& targets, int max_leaves,
         double min_leaf_fraction) {
        const Matrix x = matrix_from(features);
        const Matrix y = matrix_from(targets);
        TreeParams params{max_leaves, min_leaf_fraction, static_cast<int>(y.cols())};
        return fit_tree(x, y, params);
      },
      py::arg("features"), py::arg("targets"), py::arg("max_leaves") = 3,
      py::arg("min_leaf_fraction") = 0.1);

  py::class_<ScorerModel>(m, "ScorerModel")
      .def_property_readonly("n_trees",
                             [](const ScorerModel& m_) { return m_.trees.size(); })
      .def(
          "predict",
          [](const ScorerModel& m_, const std::vector<double>& user_desc,
             const std::vector<double>& item_desc) { return m_.predict(user_desc, item_desc); },
          py::arg("user_desc"), py::arg("item_desc"))
      .def("to_json", [](const ScorerModel& m_) { return m_.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return ScorerModel::from_json(nlohmann::json::parse(text));
      });

  py::class_<FactorModel>(m, "FactorModel")
      .def_property_readonly("n_trees",
                             [](const FactorModel& m_) { return m_.user_trees.size(); })
      .def_property_readonly("rank", [](const FactorModel& m_) { return m_.params.rank; })
      .def(
          "predict",
          [](const FactorModel& m_, const std::vector<double>& user_desc,
             const std::vector<double>& item_desc) { return m_.predict(user_desc, item_desc); },
          py::arg("user_desc"), py::arg("item_desc"))
      .def(
          "user_factor",
          [](const FactorModel& m_, const std::vector<double>& user_desc) {
            return m_.user_factor(user_desc);
          },
          py::arg("user_desc"))
      .def(
          "item_factor",
          [](const FactorModel& m_, const std::vector<double>& item_desc) {
            return m_.item_factor(item_desc);
          },
          py::arg("item_desc"))
      .def("to_json", [](const FactorModel& m_) { return m_.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return FactorModel::from_json(nlohmann::json::parse(text));
      });

  m.def(
      "train_lambdamart",
      [](const std::vector<std::vector<double>>& user_features,
         const std::vector<std::vector<double>>& item_features,
         const std::vector<std::tuple<int, std::vector<int>, std::vector<double>>>& groups,
         double eta, int max_trees, int patience, double sigmoid_scale, int truncation,
         int max_leaves, double min_leaf_fraction, std::uint64_t seed) {
        const EntityFeatures users = features_from(user_features);
        const EntityFeatures items = features_from(item_features);
        RankingData data;
        data.users = &users;
        data.items = &items;
        data.groups = groups_from(groups);
        const BoostParams params =
            params_from_kwargs(eta, max_trees, patience, sigmoid_scale, truncation, max_leaves,
                               min_leaf_fraction, 0, 0.0, 0.0, seed);
        return train_lambdamart(data, data, params);
      },
      py::arg("user_features"), py::arg("item_features"), py::arg("groups"),
      py::arg("eta") = 0.1, py::arg("max_trees") = 100, py::arg("patience") = 100,
      py::arg("sigmoid_scale") = 1.0, py::arg("truncation") = 5, py::arg("max_leaves") = 3,
      py::arg("min_leaf_fraction") = 0.05, py::arg("seed") = 42,
      "Trains plain LambdaMART; groups are (user_row, item_rows, labels) triples and the "
      "training data doubles as the early-stopping validation set.");

  m.def(
      "train_lmmf",
      [](const std::vector<std::vector<double>>& user_features,
         const std::vector<std::vector<double>>& item_features,
         const std::vector<std::tuple<int, std::vector<int>, std::vector<double>>>& groups,
         int rank, double eta, int max_trees, int patience, double sigmoid_scale,
         int truncation, int max_leaves, double min_leaf_fraction, std::uint64_t seed) {
        const EntityFeatures users = features_from(user_features);
        const EntityFeatures items = features_from(item_features);
        RankingData data;
        data.users = &users;
        data.items = &items;
        data.groups = groups_from(groups);
        const BoostParams params =
            params_from_kwargs(eta, max_trees, patience, sigmoid_scale, truncation, max_leaves,
                               min_leaf_fraction, rank, 0.0, 0.0, seed);
        return train_lmmf(data, data, params);
      },
      py::arg("user_features"), py::arg("item_features"), py::arg("groups"),
      py::arg("rank") = 2, py::arg("eta") = 0.1, py::arg("max_trees") = 100,
      py::arg("patience") = 100, py::arg("sigmoid_scale") = 1.0, py::arg("truncation") = 5,
      py::arg("max_leaves") = 3, py::arg("min_leaf_fraction") = 0.2, py::arg("seed") = 42,
      "Trains the factorized model; latent factors come from multi-output trees over the "
      "user and item descriptors.");

  m.def(
      "user_memory_scores",
      [](const std::vector<double>& new_user, const std::vector<std::vector<double>>& train_users,
         const std::vector<std::tuple<int, int, double>>& ratings, int n_items, int k) {
        std::vector<Entry> entries;
        entries.reserve(ratings.size());
        for (const auto& [u, i, s] : ratings) entries.push_back({u, i, s});
        const PreferenceMatrix prefs(static_cast<int>(train_users.size()), n_items, entries);
        return user_memory_scores(new_user, prefs, features_from(train_users),
                                  NeighborQuery{k});
      },
      py::arg("new_user_desc"), py::arg("train_user_features"), py::arg("ratings"),
      py::arg("n_items"), py::arg("k") = 5);
}
