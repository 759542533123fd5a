#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rankforge/core.hpp"
#include "rankforge/metrics.hpp"
#include "rankforge/similarity.hpp"
#include "rankforge/trees.hpp"

namespace rankforge {

struct BoostParams {
  double eta = 0.01;
  int max_trees = 15000;
  int early_stop_patience = 200;
  double sigmoid_scale = 1.0;
  TruncationLevel truncation = TruncationLevel(5);
  TreeParams tree_params;
  int rank = 0;      // latent dimension, factorized models only
  double mu1 = 0.0;  // input-space regularization weight
  double mu2 = 0.0;  // output-space regularization weight
  std::uint64_t seed = 42;
};

nlohmann::json boost_params_to_json(const BoostParams& p);
BoostParams boost_params_from_json(const nlohmann::json& j);

// Observed ratings of one user; item indices address rows of the item
// descriptor matrix of the enclosing RankingData.
struct RatingGroup {
  int user = 0;  // row in the user descriptor matrix
  std::vector<int> items;
  std::vector<double> labels;
};

// A self-contained ranking dataset: descriptors plus per-user observations.
// Train and validation sets may use different user descriptor matrices (e.g.
// held-out users) but must share the item descriptor space.
struct RankingData {
  const EntityFeatures* users = nullptr;
  const EntityFeatures* items = nullptr;
  std::vector<RatingGroup> groups;
};

// Per-item pseudo-gradients of the pairwise logistic loss for one user, with
// the matching Newton curvatures and the user's loss contribution.
struct LambdaGrad {
  std::vector<double> lambda;
  std::vector<double> curvature;
  double loss = 0.0;
};

// One pairwise constraint (item j preferred over item k) with its fixed
// |delta NDCG| weight.
struct WeightedPair {
  int j = 0;
  int k = 0;
  double weight = 0.0;
};

// Lambdas from explicit pair weights: for each pair,
//   lambda_jk = -sigma / (1 + exp(sigma * (s_j - s_k))) * weight,
// added to lambda[j] and subtracted from lambda[k]. The per-user sum is zero
// by construction.
LambdaGrad lambda_from_pairs(std::span<const double> scores, double sigmoid_scale,
                             std::span<const WeightedPair> pairs);

// Full lambda computation for one user: pair constraints from the labels, pair
// weights |swap_delta_ndcg| from the current predicted ranking, optionally
// attenuated by (1 - item similarity). item_ids maps local positions to rows
// of the similarity graph and must be provided iff item_sim is.
LambdaGrad lambda_gradients(std::span<const double> labels, std::span<const double> scores,
                            double sigmoid_scale, TruncationLevel trunc,
                            const SimilarityGraph* item_sim = nullptr,
                            std::span<const int> item_ids = {});

// Scalar-score model: f(c, d) = sum_t eta * tree_t(c (+) d) over the
// concatenated user and item descriptors.
class ScorerModel {
 public:
  BoostParams params;
  int user_dim = 0;
  int item_dim = 0;
  bool weighted = false;  // trained with similarity-weighted deltas
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> user_desc, std::span<const double> item_desc) const;
  double predict_row(std::span<const double> concatenated) const;

  nlohmann::json to_json() const;
  static ScorerModel from_json(const nlohmann::json& j);
};

// Factorized model: f(c, d) = f_u(c) . f_v(d) with
// f_u(c) = u0 + sum_t eta * h_u_t(c) and f_v(d) = v0 + sum_t eta * h_v_t(d).
class FactorModel {
 public:
  BoostParams params;
  int user_dim = 0;
  int item_dim = 0;
  bool regularized = false;
  std::vector<double> u0;
  std::vector<double> v0;
  std::vector<RegressionTree> user_trees;
  std::vector<RegressionTree> item_trees;

  std::vector<double> user_factor(std::span<const double> user_desc) const;
  std::vector<double> item_factor(std::span<const double> item_desc) const;
  double predict(std::span<const double> user_desc, std::span<const double> item_desc) const;

  nlohmann::json to_json() const;
  static FactorModel from_json(const nlohmann::json& j);
};

enum class Side { Users, Items };

// Latent factor matrix (one row per entity) realized by the model's ensemble.
Matrix latent_factors(const FactorModel& model, const EntityFeatures& descriptors, Side side);

// Symmetrized view of a graph's kNN lists: j is adjacent to i iff j lies in
// i's neighborhood or i lies in j's. The neighbor-sum gradient below is the
// exact derivative of the edge penalty only over a symmetric edge set.
struct KnnEdgeList {
  std::vector<std::vector<int>> adjacency;       // per node, sorted
  std::vector<std::pair<int, int>> edges;        // unordered pairs, i < j
};

KnnEdgeList knn_edges(const SimilarityGraph& graph);

// sum over kNN edges of s_ij * ||x_i - x_j||^2
double laplacian_penalty(const SimilarityGraph& graph, const KnnEdgeList& edges, const Matrix& x);

// Row i of the result is 2 * sum_{j ~ i} s_ij (x_i - x_j), the gradient of the
// penalty with respect to x_i.
Matrix laplacian_gradient(const SimilarityGraph& graph, const KnnEdgeList& edges, const Matrix& x);

// Graph Laplacian regularizers for the factorized model. Graph sizes must
// match the training user and item counts; mu1 weighs the input-space graphs
// and mu2 the output-space graphs.
struct LaplacianRegularizers {
  SimilarityGraph user_input;
  SimilarityGraph user_output;
  SimilarityGraph item_input;
  SimilarityGraph item_output;
  double mu1 = 0.0;
  double mu2 = 0.0;
};

struct TrainLogRow {
  int iter = 0;
  double train_loss = 0.0;
  double valid_ndcg = 0.0;
  double best_valid_ndcg = 0.0;
};

// Plain (or similarity-weighted) LambdaMART: scalar trees fit to the negative
// lambdas over all observed cells, Newton leaf refit, shrinkage eta. Returns
// the snapshot with the best validation mean NDCG@k. item_weighting, when
// given, must cover the item descriptor space and turns the deltas into
// weighted deltas (the LMW variant).
ScorerModel train_lambdamart(const RankingData& train, const RankingData& valid,
                             const BoostParams& params,
                             const SimilarityGraph* item_weighting = nullptr,
                             std::vector<TrainLogRow>* log = nullptr);

// Factorized LambdaMART: per iteration computes the residual targets
//   r_u_i = -sum_j lambda_ij * v_j  (- Laplacian neighbor terms when regularized)
//   r_v_j = -sum_i lambda_ij * u_i  (- Laplacian neighbor terms)
// at the previous iterate, fits one multi-output tree per side and updates
// both ensembles simultaneously with shrinkage eta. With regularizers, the
// deltas inside lambda are weighted by the blended item similarity.
FactorModel train_lmmf(const RankingData& train, const RankingData& valid,
                       const BoostParams& params,
                       const LaplacianRegularizers* regularization = nullptr,
                       std::vector<TrainLogRow>* log = nullptr);

// Model file round trip; predictions of the reloaded model are bit-identical.
void save_scorer(const ScorerModel& model, const std::string& path);
ScorerModel load_scorer(const std::string& path);
void save_factor(const FactorModel& model, const std::string& path);
FactorModel load_factor(const std::string& path);

// Reads the "model_type" tag of a saved model file.
std::string model_type_of(const std::string& path);

}  // namespace rankforge
