#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/boosting.hpp"
#include "rankforge/rng.hpp"

#include "oracles.hpp"

using namespace rankforge;

namespace {

EntityFeatures features_from(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < rows[0].size(); ++j) names.push_back("f" + std::to_string(j));
  return EntityFeatures(std::move(m), std::move(names));
}

SimilarityGraph uniform_similarity(int n, double off_diag, int k_neighbors) {
  Matrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n), off_diag);
  for (int i = 0; i < n; ++i) m(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
  return SimilarityGraph::from_matrix(std::move(m), k_neighbors);
}

// Pairwise logistic loss with frozen weights, written out directly.
double frozen_loss(const Matrix& u, const Matrix& v,
                   const std::vector<std::vector<WeightedPair>>& pairs_per_user, double sigma) {
  double loss = 0.0;
  for (std::size_t i = 0; i < pairs_per_user.size(); ++i) {
    for (const WeightedPair& p : pairs_per_user[i]) {
      double diff = 0.0;
      for (std::size_t d = 0; d < u.cols(); ++d) {
        diff += u(i, d) * (v(static_cast<std::size_t>(p.j), d) -
                           v(static_cast<std::size_t>(p.k), d));
      }
      loss += p.weight * std::log(1.0 + std::exp(-sigma * diff));
    }
  }
  return loss;
}

}  // namespace

TEST_CASE("lambda gradient examples") {
  {
    const LambdaGrad lg = lambda_gradients(std::vector<double>{3.0, 1.0},
                                           std::vector<double>{0.0, 0.0}, 1.0,
                                           TruncationLevel(2));
    CHECK(lg.lambda[0] == doctest::Approx(-0.1450951293015673).epsilon(1e-12));
    CHECK(lg.lambda[1] == doctest::Approx(0.1450951293015673).epsilon(1e-12));
    CHECK(lg.curvature[0] > 0.0);
  }
  {
    const LambdaGrad lg = lambda_gradients(std::vector<double>{2.0, 2.0, 2.0},
                                           std::vector<double>{0.3, 0.1, 0.2}, 1.0,
                                           TruncationLevel(3));
    for (double l : lg.lambda) CHECK(l == 0.0);
    CHECK(lg.loss == 0.0);
  }
  {
    // identical items under weighting incur no loss at all
    const SimilarityGraph sim = uniform_similarity(2, 1.0, 1);
    const std::vector<int> ids{0, 1};
    const LambdaGrad lg = lambda_gradients(std::vector<double>{3.0, 1.0},
                                           std::vector<double>{0.0, 0.0}, 1.0,
                                           TruncationLevel(2), &sim, ids);
    CHECK(lg.lambda[0] == 0.0);
    CHECK(lg.lambda[1] == 0.0);
  }
}

TEST_CASE("per-user lambda conservation") {
  Rng rng(401);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 2 + rng.below_int(9);
    std::vector<double> labels(static_cast<std::size_t>(m));
    std::vector<double> scores(static_cast<std::size_t>(m));
    for (double& y : labels) y = static_cast<double>(rng.below(6));
    for (double& s : scores) s = rng.uniform(-2.0, 2.0);
    const LambdaGrad lg =
        lambda_gradients(labels, scores, 0.5 + rng.uniform(0.0, 2.0),
                         TruncationLevel(1 + rng.below_int(m)));
    double sum = 0.0;
    for (double l : lg.lambda) sum += l;
    CHECK(std::fabs(sum) < 1e-12);
  }
}

TEST_CASE("frozen-weight factorized gradients match finite differences") {
  Rng rng(409);
  const double sigma = 1.0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + rng.below_int(4);
    const int m = 2 + rng.below_int(4);
    const int r = 1 + rng.below_int(3);
    Matrix u(static_cast<std::size_t>(n), static_cast<std::size_t>(r));
    Matrix v(static_cast<std::size_t>(m), static_cast<std::size_t>(r));
    for (double& x : u.data()) x = rng.uniform(-1.0, 1.0);
    for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);

    std::vector<std::vector<WeightedPair>> pairs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<double> labels(static_cast<std::size_t>(m));
      for (double& y : labels) y = static_cast<double>(rng.below(4));
      for (const auto& [j, k] : pair_constraints(labels).pairs) {
        pairs[static_cast<std::size_t>(i)].push_back({j, k, rng.uniform(0.05, 1.0)});
      }
    }

    // analytic gradients through the lambda aggregation
    Matrix grad_u(static_cast<std::size_t>(n), static_cast<std::size_t>(r), 0.0);
    Matrix grad_v(static_cast<std::size_t>(m), static_cast<std::size_t>(r), 0.0);
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(static_cast<std::size_t>(m), 0.0);
      for (int j = 0; j < m; ++j) {
        for (int d = 0; d < r; ++d) {
          scores[static_cast<std::size_t>(j)] += u(static_cast<std::size_t>(i),
                                                   static_cast<std::size_t>(d)) *
                                                 v(static_cast<std::size_t>(j),
                                                   static_cast<std::size_t>(d));
        }
      }
      const LambdaGrad lg =
          lambda_from_pairs(scores, sigma, pairs[static_cast<std::size_t>(i)]);
      for (int j = 0; j < m; ++j) {
        for (int d = 0; d < r; ++d) {
          grad_u(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) +=
              lg.lambda[static_cast<std::size_t>(j)] *
              v(static_cast<std::size_t>(j), static_cast<std::size_t>(d));
          grad_v(static_cast<std::size_t>(j), static_cast<std::size_t>(d)) +=
              lg.lambda[static_cast<std::size_t>(j)] *
              u(static_cast<std::size_t>(i), static_cast<std::size_t>(d));
        }
      }
    }

    const auto eval = [&] { return frozen_loss(u, v, pairs, sigma); };
    const double h = 1e-5;
    for (std::size_t i = 0; i < u.rows(); ++i) {
      for (std::size_t d = 0; d < u.cols(); ++d) {
        const double fd = oracle::central_difference(eval, u(i, d), h);
        CHECK(oracle::close_rel(grad_u(i, d), fd, 1e-4));
      }
    }
    for (std::size_t j = 0; j < v.rows(); ++j) {
      for (std::size_t d = 0; d < v.cols(); ++d) {
        const double fd = oracle::central_difference(eval, v(j, d), h);
        CHECK(oracle::close_rel(grad_v(j, d), fd, 1e-4));
      }
    }
  }
}

TEST_CASE("laplacian gradient matches finite differences of the edge penalty") {
  Rng rng(419);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + rng.below_int(4);
    const int r = 1 + rng.below_int(3);
    Matrix sim(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      sim(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
      for (int j = i + 1; j < n; ++j) {
        const double s = rng.uniform(0.05, 0.95);
        sim(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
        sim(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = s;
      }
    }
    const SimilarityGraph graph = SimilarityGraph::from_matrix(std::move(sim), 2);
    const KnnEdgeList edges = knn_edges(graph);

    Matrix x(static_cast<std::size_t>(n), static_cast<std::size_t>(r));
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    const Matrix grad = laplacian_gradient(graph, edges, x);
    const double mu = rng.uniform(0.1, 10.0);
    const auto eval = [&] { return mu * laplacian_penalty(graph, edges, x); };
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t d = 0; d < x.cols(); ++d) {
        const double fd = oracle::central_difference(eval, x(i, d), 1e-5);
        CHECK(oracle::close_rel(mu * grad(i, d), fd, 1e-4));
      }
    }
  }
}

TEST_CASE("scorer and factor model prediction forms") {
  {
    ScorerModel m;
    m.params.eta = 0.1;
    m.user_dim = 1;
    m.item_dim = 1;
    m.trees.push_back(RegressionTree::single_leaf({2.0}));
    CHECK(m.predict(std::vector<double>{0.0}, std::vector<double>{0.0}) ==
          doctest::Approx(0.2));
    CHECK_THROWS_AS(m.predict(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0}),
                    std::invalid_argument);
  }
  {
    FactorModel m;
    m.params.eta = 0.1;
    m.params.rank = 2;
    m.user_dim = 1;
    m.item_dim = 1;
    m.u0 = {0.3, 0.0};
    m.v0 = {1.0, 0.5};
    CHECK(m.predict(std::vector<double>{7.0}, std::vector<double>{7.0}) ==
          doctest::Approx(0.3));
    m.u0 = {1.0, 0.0};
    m.v0 = {0.0, 1.0};
    CHECK(m.predict(std::vector<double>{7.0}, std::vector<double>{7.0}) == 0.0);
  }
}

TEST_CASE("latent factors realize the ensemble") {
  FactorModel m;
  m.params.eta = 0.5;
  m.params.rank = 2;
  m.user_dim = 1;
  m.item_dim = 1;
  m.u0 = {0.1, -0.2};
  m.v0 = {0.3, 0.4};
  const EntityFeatures users = features_from({{0.0}, {1.0}});
  const EntityFeatures items = features_from({{0.0}});

  Matrix factors = latent_factors(m, users, Side::Users);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(factors(i, 0) == doctest::Approx(0.1));
    CHECK(factors(i, 1) == doctest::Approx(-0.2));
  }

  Matrix fx(2, 1);
  fx(0, 0) = 0.0;
  fx(1, 0) = 1.0;
  Matrix fy(2, 2);
  fy(0, 0) = 1.0;
  fy(0, 1) = 2.0;
  fy(1, 0) = 3.0;
  fy(1, 1) = 4.0;
  m.user_trees.push_back(fit_tree(fx, fy, TreeParams{2, 0.5, 2}));
  factors = latent_factors(m, users, Side::Users);
  CHECK(factors(0, 0) == doctest::Approx(0.1 + 0.5 * 1.0));
  CHECK(factors(1, 1) == doctest::Approx(-0.2 + 0.5 * 4.0));

  // factors reproduce predict
  const Matrix item_factors = latent_factors(m, items, Side::Items);
  const double dot = factors(0, 0) * item_factors(0, 0) + factors(0, 1) * item_factors(0, 1);
  CHECK(dot == doctest::Approx(m.predict(users.row(0), items.row(0))));
}

TEST_CASE("lambdamart separates a two-item toy problem") {
  const EntityFeatures users = features_from({{1.0}});
  const EntityFeatures items = features_from({{0.0}, {1.0}});
  RankingData train;
  train.users = &users;
  train.items = &items;
  train.groups = {{0, {0, 1}, {1.0, 3.0}}};
  BoostParams params;
  params.eta = 0.5;
  params.max_trees = 50;
  params.early_stop_patience = 50;
  params.truncation = TruncationLevel(2);
  params.tree_params = {2, 0.5, 1};
  std::vector<TrainLogRow> log;
  const ScorerModel model = train_lambdamart(train, train, params, nullptr, &log);
  REQUIRE(!model.trees.empty());
  CHECK(model.predict(users.row(0), items.row(1)) > model.predict(users.row(0), items.row(0)));
  CHECK(log.back().best_valid_ndcg == doctest::Approx(1.0));
}

TEST_CASE("lambdamart refuses degenerate training data") {
  const EntityFeatures users = features_from({{1.0}});
  const EntityFeatures items = features_from({{0.0}, {1.0}});
  RankingData train;
  train.users = &users;
  train.items = &items;
  train.groups = {{0, {0, 1}, {2.0, 2.0}}};
  BoostParams params;
  CHECK_THROWS_WITH_AS(train_lambdamart(train, train, params),
                       "train_lambdamart: nothing to learn (no preference pairs)",
                       std::invalid_argument);
}

TEST_CASE("patience zero stops after the first non-improving round") {
  const EntityFeatures users = features_from({{1.0}});
  const EntityFeatures items = features_from({{0.0}, {1.0}});
  RankingData train;
  train.users = &users;
  train.items = &items;
  train.groups = {{0, {0, 1}, {1.0, 3.0}}};
  // the validation user has tied labels, so its NDCG is 1.0 from the start
  RankingData valid = train;
  valid.groups = {{0, {0, 1}, {2.0, 2.0}}};
  BoostParams params;
  params.eta = 0.1;
  params.max_trees = 100;
  params.early_stop_patience = 0;
  params.truncation = TruncationLevel(2);
  params.tree_params = {2, 0.5, 1};
  std::vector<TrainLogRow> log;
  const ScorerModel model = train_lambdamart(train, valid, params, nullptr, &log);
  CHECK(log.size() == 1);
  CHECK(model.trees.empty());
}

TEST_CASE("best-snapshot contract") {
  Rng rng(431);
  const int n = 6;
  const int m = 8;
  std::vector<std::vector<double>> ufeat;
  std::vector<std::vector<double>> ifeat;
  for (int i = 0; i < n; ++i) ufeat.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
  for (int j = 0; j < m; ++j) ifeat.push_back({rng.uniform(0.0, 1.0)});
  const EntityFeatures users = features_from(ufeat);
  const EntityFeatures items = features_from(ifeat);
  RankingData train;
  train.users = &users;
  train.items = &items;
  for (int i = 0; i < n; ++i) {
    RatingGroup g;
    g.user = i;
    for (int j = 0; j < m; ++j) {
      g.items.push_back(j);
      g.labels.push_back(static_cast<double>(rng.below(4)));
    }
    train.groups.push_back(std::move(g));
  }
  BoostParams params;
  params.eta = 0.3;
  params.max_trees = 40;
  params.early_stop_patience = 40;
  params.truncation = TruncationLevel(3);
  params.tree_params = {3, 1.0 / (n * m), 1};
  std::vector<TrainLogRow> log;
  const ScorerModel model = train_lambdamart(train, train, params, nullptr, &log);
  REQUIRE(!log.empty());
  const std::size_t kept = model.trees.size();
  if (kept > 0) {
    const double best = log[kept - 1].valid_ndcg;
    for (const TrainLogRow& row : log) CHECK(best >= row.valid_ndcg - 1e-15);
  }
  // best-so-far column is monotone
  for (std::size_t i = 1; i < log.size(); ++i) {
    CHECK(log[i].best_valid_ndcg >= log[i - 1].best_valid_ndcg);
  }
}

TEST_CASE("lmmf with zero mu matches the unregularized path") {
  Rng rng(433);
  const int n = 5;
  const int m = 6;
  std::vector<std::vector<double>> ufeat;
  std::vector<std::vector<double>> ifeat;
  for (int i = 0; i < n; ++i) ufeat.push_back({rng.uniform(0.0, 1.0)});
  for (int j = 0; j < m; ++j) ifeat.push_back({rng.uniform(0.0, 1.0)});
  const EntityFeatures users = features_from(ufeat);
  const EntityFeatures items = features_from(ifeat);
  RankingData train;
  train.users = &users;
  train.items = &items;
  for (int i = 0; i < n; ++i) {
    RatingGroup g;
    g.user = i;
    for (int j = 0; j < m; ++j) {
      g.items.push_back(j);
      g.labels.push_back(static_cast<double>(rng.below(5)));
    }
    train.groups.push_back(std::move(g));
  }
  BoostParams params;
  params.eta = 0.2;
  params.max_trees = 15;
  params.early_stop_patience = 15;
  params.rank = 2;
  params.truncation = TruncationLevel(3);
  params.tree_params = {3, 1.0 / n, 2};
  params.seed = 7;

  const FactorModel plain = train_lmmf(train, train, params, nullptr);

  LaplacianRegularizers reg;
  reg.user_input = uniform_similarity(n, 0.5, 2);
  reg.user_output = uniform_similarity(n, 0.4, 2);
  reg.item_input = uniform_similarity(m, 0.5, 2);
  reg.item_output = uniform_similarity(m, 0.4, 2);
  reg.mu1 = 0.0;
  reg.mu2 = 0.0;
  const FactorModel zero_mu = train_lmmf(train, train, params, &reg);

  CHECK(plain.u0 == zero_mu.u0);
  CHECK(plain.v0 == zero_mu.v0);
  REQUIRE(plain.user_trees.size() == zero_mu.user_trees.size());
  for (std::size_t t = 0; t < plain.user_trees.size(); ++t) {
    CHECK(plain.user_trees[t].to_json() == zero_mu.user_trees[t].to_json());
    CHECK(plain.item_trees[t].to_json() == zero_mu.item_trees[t].to_json());
  }

  // regularization with mu > 0 changes the fit
  reg.mu1 = 5.0;
  reg.mu2 = 5.0;
  BoostParams reg_params = params;
  reg_params.mu1 = 5.0;
  reg_params.mu2 = 5.0;
  const FactorModel regular = train_lmmf(train, train, reg_params, &reg);
  CHECK(regular.regularized);
}

TEST_CASE("lmmf rejects empty graphs when mu is positive") {
  const EntityFeatures users = features_from({{0.0}, {1.0}});
  const EntityFeatures items = features_from({{0.0}, {1.0}});
  RankingData train;
  train.users = &users;
  train.items = &items;
  train.groups = {{0, {0, 1}, {3.0, 1.0}}, {1, {0, 1}, {1.0, 3.0}}};
  BoostParams params;
  params.rank = 1;
  params.max_trees = 2;
  params.tree_params = {2, 0.5, 1};
  LaplacianRegularizers reg;
  reg.mu1 = 1.0;
  CHECK_THROWS_AS(train_lmmf(train, train, params, &reg), std::invalid_argument);
}

TEST_CASE("lmmf with a single user and item stays at the initialization") {
  const EntityFeatures users = features_from({{1.0}});
  const EntityFeatures items = features_from({{1.0}});
  RankingData train;
  train.users = &users;
  train.items = &items;
  train.groups = {{0, {0}, {2.0}}};
  BoostParams params;
  params.rank = 1;
  params.max_trees = 5;
  params.early_stop_patience = 2;
  params.truncation = TruncationLevel(1);
  params.tree_params = {2, 1.0, 1};
  const FactorModel model = train_lmmf(train, train, params);
  const double expected = model.u0[0] * model.v0[0];
  CHECK(model.predict(users.row(0), items.row(0)) == doctest::Approx(expected));
}

TEST_CASE("model persistence round trips bit-exactly") {
  Rng rng(439);
  const int n = 4;
  const int m = 5;
  std::vector<std::vector<double>> ufeat;
  std::vector<std::vector<double>> ifeat;
  for (int i = 0; i < n; ++i) ufeat.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
  for (int j = 0; j < m; ++j) ifeat.push_back({rng.uniform(0.0, 1.0)});
  const EntityFeatures users = features_from(ufeat);
  const EntityFeatures items = features_from(ifeat);
  RankingData train;
  train.users = &users;
  train.items = &items;
  for (int i = 0; i < n; ++i) {
    RatingGroup g;
    g.user = i;
    for (int j = 0; j < m; ++j) {
      g.items.push_back(j);
      g.labels.push_back(static_cast<double>(rng.below(4)));
    }
    train.groups.push_back(std::move(g));
  }
  BoostParams params;
  params.eta = 0.17;
  params.max_trees = 8;
  params.early_stop_patience = 8;
  params.truncation = TruncationLevel(3);
  params.tree_params = {3, 1.0 / (n * m), 1};

  const ScorerModel scorer = train_lambdamart(train, train, params);
  const std::string scorer_path = "/tmp/rankforge_test_scorer.json";
  save_scorer(scorer, scorer_path);
  const ScorerModel scorer_back = load_scorer(scorer_path);
  CHECK(model_type_of(scorer_path) == "lambdamart");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      CHECK(scorer.predict(users.row(static_cast<std::size_t>(i)),
                           items.row(static_cast<std::size_t>(j))) ==
            scorer_back.predict(users.row(static_cast<std::size_t>(i)),
                                items.row(static_cast<std::size_t>(j))));
    }
  }

  params.rank = 2;
  params.tree_params = {3, 0.25, 2};  // user/item trees fit over 4 and 5 rows
  const FactorModel factor = train_lmmf(train, train, params);
  const std::string factor_path = "/tmp/rankforge_test_factor.json";
  save_factor(factor, factor_path);
  const FactorModel factor_back = load_factor(factor_path);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      CHECK(factor.predict(users.row(static_cast<std::size_t>(i)),
                           items.row(static_cast<std::size_t>(j))) ==
            factor_back.predict(users.row(static_cast<std::size_t>(i)),
                                items.row(static_cast<std::size_t>(j))));
    }
  }
  std::remove(scorer_path.c_str());
  std::remove(factor_path.c_str());
}

TEST_CASE("identical seeds give identical models") {
  Rng rng(443);
  const int n = 4;
  const int m = 4;
  std::vector<std::vector<double>> ufeat;
  std::vector<std::vector<double>> ifeat;
  for (int i = 0; i < n; ++i) ufeat.push_back({rng.uniform(0.0, 1.0)});
  for (int j = 0; j < m; ++j) ifeat.push_back({rng.uniform(0.0, 1.0)});
  const EntityFeatures users = features_from(ufeat);
  const EntityFeatures items = features_from(ifeat);
  RankingData train;
  train.users = &users;
  train.items = &items;
  for (int i = 0; i < n; ++i) {
    RatingGroup g;
    g.user = i;
    for (int j = 0; j < m; ++j) {
      g.items.push_back(j);
      g.labels.push_back(static_cast<double>((i + j) % 4));
    }
    train.groups.push_back(std::move(g));
  }
  BoostParams params;
  params.eta = 0.2;
  params.max_trees = 6;
  params.early_stop_patience = 6;
  params.rank = 2;
  params.truncation = TruncationLevel(2);
  params.tree_params = {2, 1.0 / n, 2};
  params.seed = 12345;
  const FactorModel a = train_lmmf(train, train, params);
  const FactorModel b = train_lmmf(train, train, params);
  CHECK(a.to_json().dump() == b.to_json().dump());
}
