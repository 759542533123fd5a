#include "rankforge/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rankforge/rng.hpp"

namespace rankforge {

namespace {

// log(1 + e^x) without overflow
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// 1 / (1 + e^x) without overflow
double inv_logistic(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

void validate_ranking_data(const RankingData& data, const char* what) {
  if (data.users == nullptr || data.items == nullptr) {
    throw std::invalid_argument(std::string(what) + ": missing descriptor matrices");
  }
  if (data.groups.empty()) {
    throw std::invalid_argument(std::string(what) + ": no rating groups");
  }
  const int nu = static_cast<int>(data.users->n_entities());
  const int ni = static_cast<int>(data.items->n_entities());
  for (const RatingGroup& g : data.groups) {
    if (g.user < 0 || g.user >= nu) {
      throw std::invalid_argument(std::string(what) + ": group user index out of range");
    }
    if (g.items.empty() || g.items.size() != g.labels.size()) {
      throw std::invalid_argument(std::string(what) + ": malformed rating group");
    }
    for (int it : g.items) {
      if (it < 0 || it >= ni) {
        throw std::invalid_argument(std::string(what) + ": group item index out of range");
      }
    }
  }
}

std::size_t total_pair_count(const RankingData& data) {
  std::size_t total = 0;
  for (const RatingGroup& g : data.groups) {
    for (std::size_t j = 0; j < g.labels.size(); ++j) {
      for (std::size_t k = 0; k < g.labels.size(); ++k) {
        if (g.labels[j] > g.labels[k]) ++total;
      }
    }
  }
  return total;
}

struct GroupLayout {
  std::vector<std::size_t> offset;
  std::size_t total = 0;
};

GroupLayout layout_of(const RankingData& data) {
  GroupLayout l;
  l.offset.reserve(data.groups.size());
  for (const RatingGroup& g : data.groups) {
    l.offset.push_back(l.total);
    l.total += g.items.size();
  }
  return l;
}

// Design matrix for the scalar path: one row per observed cell, user
// descriptor concatenated with the item descriptor.
Matrix build_design(const RankingData& data, const GroupLayout& layout) {
  const std::size_t du = data.users->dim();
  const std::size_t dl = data.items->dim();
  Matrix x(layout.total, du + dl);
  for (std::size_t gi = 0; gi < data.groups.size(); ++gi) {
    const RatingGroup& g = data.groups[gi];
    const auto user_row = data.users->row(static_cast<std::size_t>(g.user));
    for (std::size_t p = 0; p < g.items.size(); ++p) {
      auto out = x.row(layout.offset[gi] + p);
      std::copy(user_row.begin(), user_row.end(), out.begin());
      const auto item_row = data.items->row(static_cast<std::size_t>(g.items[p]));
      std::copy(item_row.begin(), item_row.end(), out.begin() + static_cast<std::ptrdiff_t>(du));
    }
  }
  return x;
}

double mean_ndcg(const RankingData& data, const GroupLayout& layout,
                 const std::vector<double>& scores, TruncationLevel k) {
  double sum = 0.0;
  for (std::size_t gi = 0; gi < data.groups.size(); ++gi) {
    const RatingGroup& g = data.groups[gi];
    sum += ndcg_at_k(g.labels, {scores.data() + layout.offset[gi], g.items.size()}, k);
  }
  return sum / static_cast<double>(data.groups.size());
}

// Subtracts mu times the penalty gradient of row i from the residual row.
void subtract_laplacian_gradient(const SimilarityGraph& g, const KnnEdgeList& edges, double mu,
                                 const Matrix& x, std::size_t i, std::span<double> residual) {
  if (mu == 0.0) return;
  const auto xi = x.row(i);
  for (int j : edges.adjacency[i]) {
    const double w = 2.0 * mu * g.at(static_cast<int>(i), j);
    const auto xj = x.row(static_cast<std::size_t>(j));
    for (std::size_t d = 0; d < residual.size(); ++d) {
      residual[d] -= w * (xi[d] - xj[d]);
    }
  }
}

}  // namespace

KnnEdgeList knn_edges(const SimilarityGraph& graph) {
  const std::size_t n = static_cast<std::size_t>(graph.size());
  KnnEdgeList out;
  out.adjacency.resize(n);
  for (int i = 0; i < graph.size(); ++i) {
    for (int j : graph.neighbors(i)) {
      out.adjacency[static_cast<std::size_t>(i)].push_back(j);
      out.adjacency[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& adj = out.adjacency[i];
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    for (int j : adj) {
      if (static_cast<std::size_t>(j) > i) {
        out.edges.emplace_back(static_cast<int>(i), j);
      }
    }
  }
  return out;
}

double laplacian_penalty(const SimilarityGraph& graph, const KnnEdgeList& edges, const Matrix& x) {
  double sum = 0.0;
  for (const auto& [i, j] : edges.edges) {
    double d2 = 0.0;
    const auto xi = x.row(static_cast<std::size_t>(i));
    const auto xj = x.row(static_cast<std::size_t>(j));
    for (std::size_t d = 0; d < xi.size(); ++d) {
      const double diff = xi[d] - xj[d];
      d2 += diff * diff;
    }
    sum += graph.at(i, j) * d2;
  }
  return sum;
}

Matrix laplacian_gradient(const SimilarityGraph& graph, const KnnEdgeList& edges, const Matrix& x) {
  Matrix grad(x.rows(), x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto gi = grad.row(i);
    const auto xi = x.row(i);
    for (int j : edges.adjacency[i]) {
      const double w = 2.0 * graph.at(static_cast<int>(i), j);
      const auto xj = x.row(static_cast<std::size_t>(j));
      for (std::size_t d = 0; d < gi.size(); ++d) {
        gi[d] += w * (xi[d] - xj[d]);
      }
    }
  }
  return grad;
}

nlohmann::json boost_params_to_json(const BoostParams& p) {
  return {{"eta", p.eta},
          {"max_trees", p.max_trees},
          {"early_stop_patience", p.early_stop_patience},
          {"sigmoid_scale", p.sigmoid_scale},
          {"truncation", p.truncation.k},
          {"max_leaves", p.tree_params.max_leaves},
          {"min_leaf_fraction", p.tree_params.min_leaf_fraction},
          {"rank", p.rank},
          {"mu1", p.mu1},
          {"mu2", p.mu2},
          {"seed", p.seed}};
}

BoostParams boost_params_from_json(const nlohmann::json& j) {
  BoostParams p;
  p.eta = j.at("eta").get<double>();
  p.max_trees = j.at("max_trees").get<int>();
  p.early_stop_patience = j.at("early_stop_patience").get<int>();
  p.sigmoid_scale = j.at("sigmoid_scale").get<double>();
  p.truncation = TruncationLevel(j.at("truncation").get<int>());
  p.tree_params.max_leaves = j.at("max_leaves").get<int>();
  p.tree_params.min_leaf_fraction = j.at("min_leaf_fraction").get<double>();
  p.rank = j.at("rank").get<int>();
  p.mu1 = j.at("mu1").get<double>();
  p.mu2 = j.at("mu2").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

LambdaGrad lambda_from_pairs(std::span<const double> scores, double sigmoid_scale,
                             std::span<const WeightedPair> pairs) {
  LambdaGrad out;
  out.lambda.assign(scores.size(), 0.0);
  out.curvature.assign(scores.size(), 0.0);
  const double sigma = sigmoid_scale;
  for (const WeightedPair& p : pairs) {
    const double diff = scores[static_cast<std::size_t>(p.j)] -
                        scores[static_cast<std::size_t>(p.k)];
    const double rho = inv_logistic(sigma * diff);
    const double lambda_jk = -sigma * rho * p.weight;
    out.lambda[static_cast<std::size_t>(p.j)] += lambda_jk;
    out.lambda[static_cast<std::size_t>(p.k)] -= lambda_jk;
    const double curv = sigma * sigma * p.weight * rho * (1.0 - rho);
    out.curvature[static_cast<std::size_t>(p.j)] += curv;
    out.curvature[static_cast<std::size_t>(p.k)] += curv;
    out.loss += p.weight * softplus(-sigma * diff);
  }
  return out;
}

LambdaGrad lambda_gradients(std::span<const double> labels, std::span<const double> scores,
                            double sigmoid_scale, TruncationLevel trunc,
                            const SimilarityGraph* item_sim, std::span<const int> item_ids) {
  if (labels.size() != scores.size()) {
    throw std::invalid_argument("lambda_gradients: labels and scores length mismatch");
  }
  if (item_sim != nullptr && item_ids.size() != labels.size()) {
    throw std::invalid_argument("lambda_gradients: item_ids required with item similarity");
  }
  const PairSet constraints = pair_constraints(labels);
  if (constraints.pairs.empty()) {
    LambdaGrad out;
    out.lambda.assign(scores.size(), 0.0);
    out.curvature.assign(scores.size(), 0.0);
    return out;
  }
  // Per-user gains, discounts and the shared ideal are computed once; the
  // per-pair delta is then the same product swap_delta_ndcg evaluates.
  const RankVector ranks = rank_descending(scores);
  const double ideal = ideal_dcg_at_k(labels, trunc);
  std::vector<double> gains(labels.size());
  std::vector<double> discounts(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    gains[i] = label_gain(labels[i]);
    discounts[i] = rank_discount(ranks[i], trunc);
  }
  std::vector<WeightedPair> pairs;
  pairs.reserve(constraints.pairs.size());
  for (const auto& [j, k] : constraints.pairs) {
    double delta = 0.0;
    if (ideal > 0.0) {
      delta = (gains[static_cast<std::size_t>(j)] - gains[static_cast<std::size_t>(k)]) *
              (discounts[static_cast<std::size_t>(j)] - discounts[static_cast<std::size_t>(k)]) /
              ideal;
    }
    if (item_sim != nullptr) {
      delta = weighted_swap_delta(delta, item_sim->at(item_ids[static_cast<std::size_t>(j)],
                                                      item_ids[static_cast<std::size_t>(k)]));
    }
    pairs.push_back({j, k, std::fabs(delta)});
  }
  return lambda_from_pairs(scores, sigmoid_scale, pairs);
}

double ScorerModel::predict_row(std::span<const double> concatenated) const {
  if (concatenated.size() != static_cast<std::size_t>(user_dim + item_dim)) {
    throw std::invalid_argument("ScorerModel: descriptor dimension mismatch");
  }
  double score = 0.0;
  for (const RegressionTree& tree : trees) {
    score += params.eta * tree.predict(concatenated)[0];
  }
  return score;
}

double ScorerModel::predict(std::span<const double> user_desc,
                            std::span<const double> item_desc) const {
  if (user_desc.size() != static_cast<std::size_t>(user_dim) ||
      item_desc.size() != static_cast<std::size_t>(item_dim)) {
    throw std::invalid_argument("ScorerModel: descriptor dimension mismatch");
  }
  std::vector<double> row(user_desc.size() + item_desc.size());
  std::copy(user_desc.begin(), user_desc.end(), row.begin());
  std::copy(item_desc.begin(), item_desc.end(),
            row.begin() + static_cast<std::ptrdiff_t>(user_desc.size()));
  return predict_row(row);
}

nlohmann::json ScorerModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const RegressionTree& t : trees) trees_json.push_back(t.to_json());
  return {{"model_type", weighted ? "lambdamart_weighted" : "lambdamart"},
          {"params", boost_params_to_json(params)},
          {"user_dim", user_dim},
          {"item_dim", item_dim},
          {"trees", trees_json}};
}

ScorerModel ScorerModel::from_json(const nlohmann::json& j) {
  ScorerModel m;
  const std::string type = j.at("model_type").get<std::string>();
  if (type != "lambdamart" && type != "lambdamart_weighted") {
    throw std::invalid_argument("ScorerModel::from_json: wrong model_type " + type);
  }
  m.weighted = type == "lambdamart_weighted";
  m.params = boost_params_from_json(j.at("params"));
  m.user_dim = j.at("user_dim").get<int>();
  m.item_dim = j.at("item_dim").get<int>();
  for (const auto& tj : j.at("trees")) m.trees.push_back(RegressionTree::from_json(tj));
  return m;
}

std::vector<double> FactorModel::user_factor(std::span<const double> user_desc) const {
  if (user_desc.size() != static_cast<std::size_t>(user_dim)) {
    throw std::invalid_argument("FactorModel: user descriptor dimension mismatch");
  }
  std::vector<double> f = u0;
  for (const RegressionTree& tree : user_trees) {
    const auto leaf = tree.predict(user_desc);
    for (std::size_t d = 0; d < f.size(); ++d) f[d] += params.eta * leaf[d];
  }
  return f;
}

std::vector<double> FactorModel::item_factor(std::span<const double> item_desc) const {
  if (item_desc.size() != static_cast<std::size_t>(item_dim)) {
    throw std::invalid_argument("FactorModel: item descriptor dimension mismatch");
  }
  std::vector<double> f = v0;
  for (const RegressionTree& tree : item_trees) {
    const auto leaf = tree.predict(item_desc);
    for (std::size_t d = 0; d < f.size(); ++d) f[d] += params.eta * leaf[d];
  }
  return f;
}

double FactorModel::predict(std::span<const double> user_desc,
                            std::span<const double> item_desc) const {
  const std::vector<double> u = user_factor(user_desc);
  const std::vector<double> v = item_factor(item_desc);
  double dot = 0.0;
  for (std::size_t d = 0; d < u.size(); ++d) dot += u[d] * v[d];
  return dot;
}

nlohmann::json FactorModel::to_json() const {
  nlohmann::json user_json = nlohmann::json::array();
  for (const RegressionTree& t : user_trees) user_json.push_back(t.to_json());
  nlohmann::json item_json = nlohmann::json::array();
  for (const RegressionTree& t : item_trees) item_json.push_back(t.to_json());
  return {{"model_type", regularized ? "lmmf_reg" : "lmmf"},
          {"params", boost_params_to_json(params)},
          {"user_dim", user_dim},
          {"item_dim", item_dim},
          {"u0", u0},
          {"v0", v0},
          {"user_trees", user_json},
          {"item_trees", item_json}};
}

FactorModel FactorModel::from_json(const nlohmann::json& j) {
  FactorModel m;
  const std::string type = j.at("model_type").get<std::string>();
  if (type != "lmmf" && type != "lmmf_reg") {
    throw std::invalid_argument("FactorModel::from_json: wrong model_type " + type);
  }
  m.regularized = type == "lmmf_reg";
  m.params = boost_params_from_json(j.at("params"));
  m.user_dim = j.at("user_dim").get<int>();
  m.item_dim = j.at("item_dim").get<int>();
  m.u0 = j.at("u0").get<std::vector<double>>();
  m.v0 = j.at("v0").get<std::vector<double>>();
  if (static_cast<int>(m.u0.size()) != m.params.rank ||
      static_cast<int>(m.v0.size()) != m.params.rank) {
    throw std::invalid_argument("FactorModel::from_json: offset dimension mismatch");
  }
  for (const auto& tj : j.at("user_trees")) m.user_trees.push_back(RegressionTree::from_json(tj));
  for (const auto& tj : j.at("item_trees")) m.item_trees.push_back(RegressionTree::from_json(tj));
  return m;
}

Matrix latent_factors(const FactorModel& model, const EntityFeatures& descriptors, Side side) {
  const std::size_t n = descriptors.n_entities();
  Matrix out(n, static_cast<std::size_t>(model.params.rank));
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> f = side == Side::Users ? model.user_factor(descriptors.row(i))
                                                      : model.item_factor(descriptors.row(i));
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

ScorerModel train_lambdamart(const RankingData& train, const RankingData& valid,
                             const BoostParams& params, const SimilarityGraph* item_weighting,
                             std::vector<TrainLogRow>* log) {
  validate_ranking_data(train, "train_lambdamart(train)");
  validate_ranking_data(valid, "train_lambdamart(valid)");
  if (train.users->dim() != valid.users->dim() || train.items->dim() != valid.items->dim()) {
    throw std::invalid_argument("train_lambdamart: train/valid descriptor dimension mismatch");
  }
  if (params.eta <= 0.0 || params.max_trees < 1 || params.sigmoid_scale <= 0.0) {
    throw std::invalid_argument("train_lambdamart: invalid learning rate, tree budget or sigmoid scale");
  }
  if (item_weighting != nullptr &&
      item_weighting->size() != static_cast<int>(train.items->n_entities())) {
    throw std::invalid_argument("train_lambdamart: weighting graph does not cover the item space");
  }
  if (total_pair_count(train) == 0) {
    throw std::invalid_argument("train_lambdamart: nothing to learn (no preference pairs)");
  }

  const GroupLayout layout = layout_of(train);
  const GroupLayout vlayout = layout_of(valid);
  const Matrix design = build_design(train, layout);
  const Matrix vdesign = build_design(valid, vlayout);

  std::vector<double> scores(layout.total, 0.0);
  std::vector<double> vscores(vlayout.total, 0.0);
  std::vector<double> g(layout.total);
  std::vector<double> h(layout.total);
  std::vector<double> group_loss(train.groups.size());

  TreeParams tp = params.tree_params;
  tp.output_dim = 1;

  std::vector<RegressionTree> trees;
  double best_valid = mean_ndcg(valid, vlayout, vscores, params.truncation);
  int best_t = 0;
  int bad_rounds = 0;
  const int patience = std::max(1, params.early_stop_patience);

  for (int t = 1; t <= params.max_trees; ++t) {
#pragma omp parallel for schedule(dynamic, 32)
    for (long long gi = 0; gi < static_cast<long long>(train.groups.size()); ++gi) {
      const RatingGroup& grp = train.groups[static_cast<std::size_t>(gi)];
      const std::size_t off = layout.offset[static_cast<std::size_t>(gi)];
      const LambdaGrad lg =
          lambda_gradients(grp.labels, {scores.data() + off, grp.items.size()},
                           params.sigmoid_scale, params.truncation, item_weighting, grp.items);
      std::copy(lg.lambda.begin(), lg.lambda.end(), g.begin() + static_cast<std::ptrdiff_t>(off));
      std::copy(lg.curvature.begin(), lg.curvature.end(),
                h.begin() + static_cast<std::ptrdiff_t>(off));
      group_loss[static_cast<std::size_t>(gi)] = lg.loss;
    }
    double loss = 0.0;
    for (double l : group_loss) loss += l;

    Matrix targets(layout.total, 1);
    for (std::size_t r = 0; r < layout.total; ++r) targets(r, 0) = -g[r];

    RegressionTree tree = newton_leaf_refit(fit_tree(design, targets, tp), design, g, h);

#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(layout.total); ++r) {
      scores[static_cast<std::size_t>(r)] +=
          params.eta * tree.predict(design.row(static_cast<std::size_t>(r)))[0];
    }
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(vlayout.total); ++r) {
      vscores[static_cast<std::size_t>(r)] +=
          params.eta * tree.predict(vdesign.row(static_cast<std::size_t>(r)))[0];
    }
    trees.push_back(std::move(tree));

    const double valid_ndcg = mean_ndcg(valid, vlayout, vscores, params.truncation);
    if (valid_ndcg > best_valid) {
      best_valid = valid_ndcg;
      best_t = t;
      bad_rounds = 0;
    } else {
      ++bad_rounds;
    }
    if (log != nullptr) log->push_back({t, loss, valid_ndcg, best_valid});
    if (bad_rounds >= patience) break;
  }

  trees.resize(static_cast<std::size_t>(best_t));
  ScorerModel model;
  model.params = params;
  model.user_dim = static_cast<int>(train.users->dim());
  model.item_dim = static_cast<int>(train.items->dim());
  model.weighted = item_weighting != nullptr;
  model.trees = std::move(trees);
  return model;
}

FactorModel train_lmmf(const RankingData& train, const RankingData& valid,
                       const BoostParams& params, const LaplacianRegularizers* regularization,
                       std::vector<TrainLogRow>* log) {
  validate_ranking_data(train, "train_lmmf(train)");
  validate_ranking_data(valid, "train_lmmf(valid)");
  if (train.users->dim() != valid.users->dim() || train.items->dim() != valid.items->dim() ||
      train.items->n_entities() != valid.items->n_entities()) {
    throw std::invalid_argument("train_lmmf: train/valid spaces do not agree");
  }
  if (params.rank < 1) {
    throw std::invalid_argument("train_lmmf: rank must be >= 1");
  }
  if (params.eta <= 0.0 || params.max_trees < 1 || params.sigmoid_scale <= 0.0) {
    throw std::invalid_argument("train_lmmf: invalid learning rate, tree budget or sigmoid scale");
  }
  const std::size_t n_users = train.users->n_entities();
  const std::size_t n_items = train.items->n_entities();
  const std::size_t r = static_cast<std::size_t>(params.rank);
  if (params.rank > static_cast<int>(std::min(n_users, n_items))) {
    std::cerr << "train_lmmf: warning: rank " << params.rank << " exceeds min(n, m) = "
              << std::min(n_users, n_items) << "\n";
  }

  const SimilarityGraph* blended_weighting = nullptr;
  SimilarityGraph blended;
  KnnEdgeList u_in_edges;
  KnnEdgeList u_out_edges;
  KnnEdgeList v_in_edges;
  KnnEdgeList v_out_edges;
  if (regularization != nullptr) {
    const LaplacianRegularizers& reg = *regularization;
    if (reg.mu1 < 0.0 || reg.mu2 < 0.0) {
      throw std::invalid_argument("train_lmmf: regularization weights must be non-negative");
    }
    if ((reg.mu1 > 0.0 || reg.mu2 > 0.0) &&
        (reg.user_input.size() == 0 || reg.user_output.size() == 0 ||
         reg.item_input.size() == 0 || reg.item_output.size() == 0)) {
      throw std::invalid_argument("train_lmmf: empty similarity graphs with mu > 0");
    }
    if (reg.user_input.size() != static_cast<int>(n_users) ||
        reg.user_output.size() != static_cast<int>(n_users) ||
        reg.item_input.size() != static_cast<int>(n_items) ||
        reg.item_output.size() != static_cast<int>(n_items)) {
      throw std::invalid_argument("train_lmmf: similarity graph sizes do not match the data");
    }
    blended = blend_item_similarity(reg.item_input, reg.item_output, reg.mu1, reg.mu2);
    blended_weighting = &blended;
    u_in_edges = knn_edges(reg.user_input);
    u_out_edges = knn_edges(reg.user_output);
    v_in_edges = knn_edges(reg.item_input);
    v_out_edges = knn_edges(reg.item_output);
  }

  // Shared random offsets realize the paper's random initialization while
  // keeping f_u and f_v well defined for entities never seen in training.
  std::vector<double> u0(r);
  std::vector<double> v0(r);
  {
    Rng rng_u(derive_seed(params.seed, "lmmf-init-u"));
    for (double& v : u0) v = rng_u.uniform(-0.1, 0.1);
    Rng rng_v(derive_seed(params.seed, "lmmf-init-v"));
    for (double& v : v0) v = rng_v.uniform(-0.1, 0.1);
  }

  Matrix factors_u(n_users, r);
  for (std::size_t i = 0; i < n_users; ++i) {
    std::copy(u0.begin(), u0.end(), factors_u.row(i).begin());
  }
  Matrix factors_v(n_items, r);
  for (std::size_t j = 0; j < n_items; ++j) {
    std::copy(v0.begin(), v0.end(), factors_v.row(j).begin());
  }
  const std::size_t n_valid_users = valid.users->n_entities();
  Matrix factors_u_valid(n_valid_users, r);
  for (std::size_t i = 0; i < n_valid_users; ++i) {
    std::copy(u0.begin(), u0.end(), factors_u_valid.row(i).begin());
  }

  const GroupLayout layout = layout_of(train);
  const GroupLayout vlayout = layout_of(valid);

  // group index per user row (-1 when the user has no observations)
  std::vector<int> group_of_user(n_users, -1);
  for (std::size_t gi = 0; gi < train.groups.size(); ++gi) {
    group_of_user[static_cast<std::size_t>(train.groups[gi].user)] = static_cast<int>(gi);
  }
  // reverse index: item row -> (group, position)
  std::vector<std::vector<std::pair<int, int>>> item_obs(n_items);
  for (std::size_t gi = 0; gi < train.groups.size(); ++gi) {
    const RatingGroup& g = train.groups[gi];
    for (std::size_t p = 0; p < g.items.size(); ++p) {
      item_obs[static_cast<std::size_t>(g.items[p])].emplace_back(static_cast<int>(gi),
                                                                  static_cast<int>(p));
    }
  }

  auto score_group = [&](const Matrix& fu, const RatingGroup& grp, std::span<double> out) {
    const auto u = fu.row(static_cast<std::size_t>(grp.user));
    for (std::size_t p = 0; p < grp.items.size(); ++p) {
      const auto v = factors_v.row(static_cast<std::size_t>(grp.items[p]));
      double dot = 0.0;
      for (std::size_t d = 0; d < r; ++d) dot += u[d] * v[d];
      out[p] = dot;
    }
  };

  auto valid_metric = [&]() {
    double sum = 0.0;
    std::vector<double> buf;
    for (const RatingGroup& grp : valid.groups) {
      buf.resize(grp.items.size());
      score_group(factors_u_valid, grp, buf);
      sum += ndcg_at_k(grp.labels, buf, params.truncation);
    }
    return sum / static_cast<double>(valid.groups.size());
  };

  TreeParams tp = params.tree_params;
  tp.output_dim = params.rank;

  std::vector<RegressionTree> user_trees;
  std::vector<RegressionTree> item_trees;
  std::vector<std::vector<double>> lambdas(train.groups.size());
  std::vector<double> group_loss(train.groups.size());
  std::vector<double> scores(layout.total);

  double best_valid = valid_metric();
  int best_t = 0;
  int bad_rounds = 0;
  const int patience = std::max(1, params.early_stop_patience);

  for (int t = 1; t <= params.max_trees; ++t) {
#pragma omp parallel for schedule(dynamic, 32)
    for (long long gi = 0; gi < static_cast<long long>(train.groups.size()); ++gi) {
      const RatingGroup& grp = train.groups[static_cast<std::size_t>(gi)];
      const std::size_t off = layout.offset[static_cast<std::size_t>(gi)];
      score_group(factors_u, grp, {scores.data() + off, grp.items.size()});
      LambdaGrad lg =
          lambda_gradients(grp.labels, {scores.data() + off, grp.items.size()},
                           params.sigmoid_scale, params.truncation, blended_weighting, grp.items);
      lambdas[static_cast<std::size_t>(gi)] = std::move(lg.lambda);
      group_loss[static_cast<std::size_t>(gi)] = lg.loss;
    }
    double loss = 0.0;
    for (double l : group_loss) loss += l;
    if (regularization != nullptr) {
      loss += regularization->mu1 * laplacian_penalty(regularization->user_input, u_in_edges,
                                                      factors_u);
      loss += regularization->mu2 * laplacian_penalty(regularization->user_output, u_out_edges,
                                                      factors_u);
      loss += regularization->mu1 * laplacian_penalty(regularization->item_input, v_in_edges,
                                                      factors_v);
      loss += regularization->mu2 * laplacian_penalty(regularization->item_output, v_out_edges,
                                                      factors_v);
    }

    // Residual targets at the previous iterate, both sides before any update.
    Matrix residual_u(n_users, r, 0.0);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n_users); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      auto ru = residual_u.row(i);
      const int gi = group_of_user[i];
      if (gi >= 0) {
        const RatingGroup& grp = train.groups[static_cast<std::size_t>(gi)];
        const std::vector<double>& lam = lambdas[static_cast<std::size_t>(gi)];
        for (std::size_t p = 0; p < grp.items.size(); ++p) {
          const auto v = factors_v.row(static_cast<std::size_t>(grp.items[p]));
          for (std::size_t d = 0; d < r; ++d) ru[d] -= lam[p] * v[d];
        }
      }
      if (regularization != nullptr) {
        subtract_laplacian_gradient(regularization->user_input, u_in_edges, regularization->mu1,
                                    factors_u, i, ru);
        subtract_laplacian_gradient(regularization->user_output, u_out_edges, regularization->mu2,
                                    factors_u, i, ru);
      }
    }
    Matrix residual_v(n_items, r, 0.0);
#pragma omp parallel for schedule(static)
    for (long long jj = 0; jj < static_cast<long long>(n_items); ++jj) {
      const std::size_t j = static_cast<std::size_t>(jj);
      auto rv = residual_v.row(j);
      for (const auto& [gi, p] : item_obs[j]) {
        const RatingGroup& grp = train.groups[static_cast<std::size_t>(gi)];
        const double lam = lambdas[static_cast<std::size_t>(gi)][static_cast<std::size_t>(p)];
        const auto u = factors_u.row(static_cast<std::size_t>(grp.user));
        for (std::size_t d = 0; d < r; ++d) rv[d] -= lam * u[d];
      }
      if (regularization != nullptr) {
        subtract_laplacian_gradient(regularization->item_input, v_in_edges, regularization->mu1,
                                    factors_v, j, rv);
        subtract_laplacian_gradient(regularization->item_output, v_out_edges, regularization->mu2,
                                    factors_v, j, rv);
      }
    }

    RegressionTree tree_u = fit_tree(train.users->values(), residual_u, tp);
    RegressionTree tree_v = fit_tree(train.items->values(), residual_v, tp);

#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n_users); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const auto leaf = tree_u.predict(train.users->row(i));
      auto row = factors_u.row(i);
      for (std::size_t d = 0; d < r; ++d) row[d] += params.eta * leaf[d];
    }
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n_valid_users); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const auto leaf = tree_u.predict(valid.users->row(i));
      auto row = factors_u_valid.row(i);
      for (std::size_t d = 0; d < r; ++d) row[d] += params.eta * leaf[d];
    }
#pragma omp parallel for schedule(static)
    for (long long jj = 0; jj < static_cast<long long>(n_items); ++jj) {
      const std::size_t j = static_cast<std::size_t>(jj);
      const auto leaf = tree_v.predict(train.items->row(j));
      auto row = factors_v.row(j);
      for (std::size_t d = 0; d < r; ++d) row[d] += params.eta * leaf[d];
    }

    user_trees.push_back(std::move(tree_u));
    item_trees.push_back(std::move(tree_v));

    const double valid_ndcg = valid_metric();
    if (valid_ndcg > best_valid) {
      best_valid = valid_ndcg;
      best_t = t;
      bad_rounds = 0;
    } else {
      ++bad_rounds;
    }
    if (log != nullptr) log->push_back({t, loss, valid_ndcg, best_valid});
    if (bad_rounds >= patience) break;
  }

  user_trees.resize(static_cast<std::size_t>(best_t));
  item_trees.resize(static_cast<std::size_t>(best_t));

  FactorModel model;
  model.params = params;
  model.user_dim = static_cast<int>(train.users->dim());
  model.item_dim = static_cast<int>(train.items->dim());
  model.regularized = regularization != nullptr;
  model.u0 = std::move(u0);
  model.v0 = std::move(v0);
  model.user_trees = std::move(user_trees);
  model.item_trees = std::move(item_trees);
  return model;
}

namespace {

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump() << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path);
  }
  return nlohmann::json::parse(in);
}

}  // namespace

void save_scorer(const ScorerModel& model, const std::string& path) {
  write_json_file(model.to_json(), path);
}

ScorerModel load_scorer(const std::string& path) {
  return ScorerModel::from_json(read_json_file(path));
}

void save_factor(const FactorModel& model, const std::string& path) {
  write_json_file(model.to_json(), path);
}

FactorModel load_factor(const std::string& path) {
  return FactorModel::from_json(read_json_file(path));
}

std::string model_type_of(const std::string& path) {
  return read_json_file(path).at("model_type").get<std::string>();
}

}  // namespace rankforge
