// Acceptance suite: one pass/fail line per criterion. Each criterion pins its
// tolerances and runtime budget in code. The MovieLens criterion needs the
// ml-100k dataset on disk (RANKFORGE_DATA or ./ml-100k) and reports SKIP when
// it is absent; everything else is self-contained.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rankforge/baselines.hpp"
#include "rankforge/boosting.hpp"
#include "rankforge/core.hpp"
#include "rankforge/eval.hpp"
#include "rankforge/ingest.hpp"
#include "rankforge/metrics.hpp"
#include "rankforge/rng.hpp"
#include "rankforge/similarity.hpp"
#include "rankforge/trees.hpp"

#include "oracles.hpp"

using namespace rankforge;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::string first_failure;
  int failures = 0;

  void expect(bool condition, const std::string& message) {
    if (!condition) {
      ++failures;
      if (ok) first_failure = message;
      ok = false;
    }
  }
};

Outcome finish(const Check& check, double elapsed_s, double budget_s, std::string note = "") {
  if (!check.ok) {
    return {Status::Fail,
            check.first_failure + " (" + std::to_string(check.failures) + " failed checks)"};
  }
  if (elapsed_s > budget_s) {
    return {Status::Fail, "runtime " + std::to_string(elapsed_s) + "s exceeds the " +
                              std::to_string(budget_s) + "s budget"};
  }
  return {Status::Pass, note};
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Metric oracle: swap deltas against brute-force double evaluation.

Outcome run_metric_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  Rng rng(20240521);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + rng.below_int(7);  // up to 8 items
    std::vector<double> labels(static_cast<std::size_t>(m));
    for (double& y : labels) y = static_cast<double>(rng.below(6));  // integer labels 0..5
    std::vector<double> scores(static_cast<std::size_t>(m));
    for (double& s : scores) s = rng.uniform(-1.0, 1.0);
    const RankVector ranks = rank_descending(scores);
    const int trunc = 1 + rng.below_int(m);
    const int j = rng.below_int(m);
    int k = rng.below_int(m - 1);
    if (k >= j) ++k;

    const double fast = swap_delta_ndcg(labels, ranks, j, k, TruncationLevel(trunc));
    const double brute = oracle::swap_delta_bruteforce(labels, ranks.ranks(), j, k, trunc);
    check.expect(std::fabs(fast - brute) <= 1e-12,
                 "swap delta differs from brute force by " + fmt(std::fabs(fast - brute), 16));

    const double v = ndcg_at_k(labels, scores, TruncationLevel(trunc));
    check.expect(v >= 0.0 && v <= 1.0 + 1e-15, "NDCG outside [0,1]: " + fmt(v, 12));
    const double perfect = ndcg_at_k(labels, labels, TruncationLevel(trunc));
    check.expect(std::fabs(perfect - 1.0) <= 1e-12,
                 "perfect ranking scored " + fmt(perfect, 12));
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 5.0, "1000 instances, max |fast - brute| <= 1e-12");
}

// --------------------------------------------------------------------------
// 2. Lambda conservation: per-user lambda sums vanish.

Outcome run_lambda_conservation() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  Rng rng(20240522);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + rng.below_int(11);
    std::vector<double> labels(static_cast<std::size_t>(m));
    std::vector<double> scores(static_cast<std::size_t>(m));
    for (double& y : labels) y = static_cast<double>(rng.below(6));
    for (double& s : scores) s = rng.uniform(-3.0, 3.0);
    const LambdaGrad lg = lambda_gradients(labels, scores, 0.25 + rng.uniform(0.0, 2.0),
                                           TruncationLevel(1 + rng.below_int(m)));
    double sum = 0.0;
    for (double l : lg.lambda) sum += l;
    check.expect(std::fabs(sum) <= 1e-12, "lambda sum " + fmt(sum, 16));
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 5.0, "1000 users, |sum lambda| <= 1e-12");
}

// --------------------------------------------------------------------------
// 3. Gradient checks: frozen-weight factorized loss and Laplacian terms
//    against central finite differences.

Outcome run_gradient_checks() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  Rng rng(20240523);
  const double sigma = 1.0;
  const double h = 1e-5;

  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.below_int(4);  // n, m <= 5
    const int m = 2 + rng.below_int(4);
    const int r = 1 + rng.below_int(3);  // r <= 3
    Matrix u(static_cast<std::size_t>(n), static_cast<std::size_t>(r));
    Matrix v(static_cast<std::size_t>(m), static_cast<std::size_t>(r));
    for (double& x : u.data()) x = rng.uniform(-1.0, 1.0);
    for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);

    std::vector<std::vector<WeightedPair>> pairs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<double> labels(static_cast<std::size_t>(m));
      for (double& y : labels) y = static_cast<double>(rng.below(4));
      for (const auto& [a, b] : pair_constraints(labels).pairs) {
        pairs[static_cast<std::size_t>(i)].push_back({a, b, rng.uniform(0.05, 1.0)});
      }
    }

    Matrix grad_u(static_cast<std::size_t>(n), static_cast<std::size_t>(r), 0.0);
    Matrix grad_v(static_cast<std::size_t>(m), static_cast<std::size_t>(r), 0.0);
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(static_cast<std::size_t>(m), 0.0);
      for (int j = 0; j < m; ++j) {
        for (int d = 0; d < r; ++d) {
          scores[static_cast<std::size_t>(j)] +=
              u(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) *
              v(static_cast<std::size_t>(j), static_cast<std::size_t>(d));
        }
      }
      const LambdaGrad lg = lambda_from_pairs(scores, sigma, pairs[static_cast<std::size_t>(i)]);
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

    const auto loss = [&] {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        for (const WeightedPair& p : pairs[static_cast<std::size_t>(i)]) {
          double diff = 0.0;
          for (int d = 0; d < r; ++d) {
            diff += u(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) *
                    (v(static_cast<std::size_t>(p.j), static_cast<std::size_t>(d)) -
                     v(static_cast<std::size_t>(p.k), static_cast<std::size_t>(d)));
          }
          total += p.weight * std::log(1.0 + std::exp(-sigma * diff));
        }
      }
      return total;
    };

    for (std::size_t i = 0; i < u.rows(); ++i) {
      for (std::size_t d = 0; d < u.cols(); ++d) {
        const double fd = oracle::central_difference(loss, u(i, d), h);
        check.expect(oracle::close_rel(grad_u(i, d), fd, 1e-4),
                     "factorized grad_u mismatch: " + fmt(grad_u(i, d), 10) + " vs " + fmt(fd, 10));
      }
    }
    for (std::size_t j = 0; j < v.rows(); ++j) {
      for (std::size_t d = 0; d < v.cols(); ++d) {
        const double fd = oracle::central_difference(loss, v(j, d), h);
        check.expect(oracle::close_rel(grad_v(j, d), fd, 1e-4),
                     "factorized grad_v mismatch: " + fmt(grad_v(j, d), 10) + " vs " + fmt(fd, 10));
      }
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + rng.below_int(3);
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
    const double mu = rng.uniform(0.1, 10.0);
    const Matrix grad = laplacian_gradient(graph, edges, x);
    const auto penalty = [&] { return mu * laplacian_penalty(graph, edges, x); };
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t d = 0; d < x.cols(); ++d) {
        const double fd = oracle::central_difference(penalty, x(i, d), h);
        check.expect(oracle::close_rel(mu * grad(i, d), fd, 1e-4),
                     "laplacian grad mismatch: " + fmt(mu * grad(i, d), 10) + " vs " + fmt(fd, 10));
      }
    }
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 30.0, "100 factorized + 100 laplacian instances at 1e-4 relative");
}

// --------------------------------------------------------------------------
// 4. Tree oracle: first split equals exhaustive argmin SSE on all small
//    dataset shapes (rows <= 6, features <= 3).

Outcome run_tree_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  Rng rng(20240524);
  int datasets = 0;
  for (int n = 2; n <= 6; ++n) {
    for (int f = 1; f <= 3; ++f) {
      for (int rep = 0; rep < 80; ++rep) {
        std::vector<std::vector<double>> feat(static_cast<std::size_t>(n));
        std::vector<std::vector<double>> targ(static_cast<std::size_t>(n));
        const bool grid_features = rep % 2 == 0;  // tie-heavy vs continuous
        for (int row = 0; row < n; ++row) {
          for (int c = 0; c < f; ++c) {
            feat[static_cast<std::size_t>(row)].push_back(
                grid_features ? static_cast<double>(rng.below(3)) : rng.uniform(0.0, 1.0));
          }
          targ[static_cast<std::size_t>(row)] = {static_cast<double>(rng.below(4))};
        }
        ++datasets;
        Matrix fx(static_cast<std::size_t>(n), static_cast<std::size_t>(f));
        Matrix fy(static_cast<std::size_t>(n), 1);
        for (int row = 0; row < n; ++row) {
          for (int c = 0; c < f; ++c) {
            fx(static_cast<std::size_t>(row), static_cast<std::size_t>(c)) =
                feat[static_cast<std::size_t>(row)][static_cast<std::size_t>(c)];
          }
          fy(static_cast<std::size_t>(row), 0) = targ[static_cast<std::size_t>(row)][0];
        }
        const RegressionTree tree =
            fit_tree(fx, fy, TreeParams{2, 1.0 / static_cast<double>(n), 1});
        const oracle::SplitAgreement verdict = oracle::check_first_split(feat, targ, 1, tree);
        check.expect(verdict.ok, verdict.why);
      }
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 10.0, std::to_string(datasets) + " datasets swept");
}

// --------------------------------------------------------------------------
// 5. Separable-toy convergence.

Dataset rank2_dataset(int n_users, int n_items, std::uint64_t seed) {
  Rng rng(seed);
  Matrix ustar(static_cast<std::size_t>(n_users), 2);
  Matrix vstar(static_cast<std::size_t>(n_items), 2);
  for (double& x : ustar.data()) x = rng.uniform(0.0, 1.0);
  for (double& x : vstar.data()) x = rng.uniform(0.0, 1.0);
  double max_score = 0.0;
  Matrix scores(static_cast<std::size_t>(n_users), static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_users; ++i) {
    for (int j = 0; j < n_items; ++j) {
      double dot = 0.0;
      for (int d = 0; d < 2; ++d) {
        dot += ustar(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) *
               vstar(static_cast<std::size_t>(j), static_cast<std::size_t>(d));
      }
      scores(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = dot;
      max_score = std::max(max_score, dot);
    }
  }
  std::vector<Entry> entries;
  for (int i = 0; i < n_users; ++i) {
    for (int j = 0; j < n_items; ++j) {
      const double quantized = std::round(
          5.0 * scores(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) / max_score);
      entries.push_back({i, j, quantized});
    }
  }
  return Dataset{PreferenceMatrix(n_users, n_items, entries),
                 EntityFeatures(std::move(ustar), {"u0", "u1"}),
                 EntityFeatures(std::move(vstar), {"v0", "v1"})};
}

Outcome run_toy_convergence() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  std::string note;

  // LambdaMART on a 5x5 noiseless dataset with an informative item feature.
  {
    Matrix ufeat(5, 5, 0.0);
    for (std::size_t i = 0; i < 5; ++i) ufeat(i, i) = 1.0;
    Matrix ifeat(5, 1);
    for (std::size_t j = 0; j < 5; ++j) ifeat(j, 0) = static_cast<double>(j);
    const EntityFeatures users(std::move(ufeat), {"u0", "u1", "u2", "u3", "u4"});
    const EntityFeatures items(std::move(ifeat), {"x"});
    RankingData train;
    train.users = &users;
    train.items = &items;
    for (int i = 0; i < 5; ++i) {
      RatingGroup g;
      g.user = i;
      for (int j = 0; j < 5; ++j) {
        g.items.push_back(j);
        g.labels.push_back(static_cast<double>(j));
      }
      train.groups.push_back(std::move(g));
    }
    BoostParams params;
    params.eta = 0.1;
    params.max_trees = 200;
    params.early_stop_patience = 200;
    params.truncation = TruncationLevel(3);
    params.tree_params = {3, 1.0 / 25.0, 1};
    std::vector<TrainLogRow> log;
    train_lambdamart(train, train, params, nullptr, &log);
    double best = 0.0;
    int reached_at = -1;
    for (const TrainLogRow& row : log) {
      if (row.valid_ndcg > best) best = row.valid_ndcg;
      if (best == 1.0 && reached_at < 0) reached_at = row.iter;
    }
    check.expect(best == 1.0,
                 "LM training NDCG@3 peaked at " + fmt(best, 6) + " within 200 trees");
    note += "LM NDCG@3 = 1.0 at tree " + std::to_string(reached_at);
  }

  // LM-MF with r = 2 on the synthetic rank-2 generator, held-out users.
  {
    const Dataset data = rank2_dataset(30, 20, 77);
    FoldIndices fold;
    fold.kind = SplitKind::UserColdStart;
    fold.seed = 77;
    for (int u = 0; u < 25; ++u) fold.train_users.push_back(u);
    for (int u = 25; u < 30; ++u) fold.test_users.push_back(u);
    for (int j = 0; j < 20; ++j) {
      fold.train_items.push_back(j);
      fold.test_items.push_back(j);
    }
    for (int u : fold.train_users) {
      for (const auto& [item, score] : data.prefs.observed(u)) {
        fold.train_cells.push_back({u, item, score});
      }
    }
    for (int u : fold.test_users) {
      for (const auto& [item, score] : data.prefs.observed(u)) {
        fold.test_cells.push_back({u, item, score});
      }
    }
    TrainOptions opts;
    opts.boost.eta = 0.1;
    opts.boost.max_trees = 400;
    opts.boost.early_stop_patience = 100;
    opts.boost.truncation = TruncationLevel(5);
    opts.boost.tree_params = {8, 0.05, 2};
    opts.boost.rank = 2;
    opts.boost.seed = 7;
    opts.valid_user_fraction = 0.2;
    const TrainedRanker ranker = train_on_fold(data, fold, Method::LMMF, opts);
    const std::vector<TruncationLevel> ks{TruncationLevel(5)};
    const EvalReport report = evaluate_ndcg(score_fold(data, fold, ranker), ks);
    check.expect(report.mean[0] >= 0.9,
                 "LM-MF held-out NDCG@5 = " + fmt(report.mean[0], 4) + " < 0.9");
    note += "; LM-MF held-out NDCG@5 = " + fmt(report.mean[0], 4);
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 120.0, note);
}

// --------------------------------------------------------------------------
// 7. McNemar unit values and symmetry.

Outcome run_mcnemar() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  check.expect(std::fabs(mcnemar_pvalue(10, 2) - 0.0433) <= 1e-3,
               "mcnemar(10,2) = " + fmt(mcnemar_pvalue(10, 2), 6));
  Rng rng(20240526);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = rng.below_int(100);
    const int l = rng.below_int(100);
    const double p = mcnemar_pvalue(w, l);
    const double q = mcnemar_pvalue(l, w);
    check.expect(p == q, "asymmetry at (" + std::to_string(w) + "," + std::to_string(l) + ")");
    check.expect(p >= 0.0 && p <= 1.0, "p outside [0,1]");
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 5.0);
}

// --------------------------------------------------------------------------
// 8. Determinism: byte-identical model files and reports across two runs.

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run_determinism() {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  const Dataset data = rank2_dataset(16, 12, 55);
  const auto folds = split_user_cold_start(data.prefs, false, 0.5, 5);
  TrainOptions opts;
  opts.boost.eta = 0.2;
  opts.boost.max_trees = 20;
  opts.boost.early_stop_patience = 20;
  opts.boost.truncation = TruncationLevel(3);
  opts.boost.tree_params = {4, 0.125, 2};
  opts.boost.rank = 2;
  opts.boost.mu1 = 1.0;
  opts.boost.mu2 = 0.1;
  opts.boost.seed = 99;

  const fs::path dir = fs::temp_directory_path() / "rankforge_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> model_files;
  std::vector<std::string> report_files;
  for (int run = 0; run < 2; ++run) {
    const TrainedRanker ranker = train_on_fold(data, folds[0], Method::LMMFReg, opts);
    const std::string model_path = (dir / ("model_" + std::to_string(run) + ".json")).string();
    save_ranker(ranker, model_path);
    const std::vector<TruncationLevel> ks{TruncationLevel(1), TruncationLevel(3),
                                          TruncationLevel(5)};
    const EvalReport report = evaluate_ndcg(score_fold(data, folds[0], ranker), ks);
    const std::string report_path = (dir / ("report_" + std::to_string(run) + ".csv")).string();
    write_report_csv(report, report_path, opts.boost.seed);
    model_files.push_back(model_path);
    report_files.push_back(report_path);
  }
  check.expect(read_bytes(model_files[0]) == read_bytes(model_files[1]),
               "model files differ between identical runs");
  check.expect(read_bytes(report_files[0]) == read_bytes(report_files[1]),
               "report files differ between identical runs");
  fs::remove_all(dir);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 120.0);
}

// --------------------------------------------------------------------------
// 6. MovieLens 100K user cold start.

std::string find_ml100k() {
  std::vector<std::string> candidates;
  if (const char* root = std::getenv("RANKFORGE_DATA")) {
    candidates.push_back(std::string(root) + "/ml-100k");
    candidates.push_back(root);
  }
  candidates.push_back("ml-100k");
  candidates.push_back("data/ml-100k");
  for (const std::string& dir : candidates) {
    if (fs::exists(fs::path(dir) / "u.data") && fs::exists(fs::path(dir) / "u.user") &&
        fs::exists(fs::path(dir) / "u.item")) {
      return dir;
    }
  }
  return "";
}

FoldIndices make_ucs_fold(const Dataset& data, std::vector<int> train_users,
                          std::vector<int> test_users, std::uint64_t seed) {
  FoldIndices fold;
  fold.kind = SplitKind::UserColdStart;
  fold.seed = seed;
  fold.train_users = std::move(train_users);
  fold.test_users = std::move(test_users);
  for (int j = 0; j < data.prefs.n_items(); ++j) {
    fold.train_items.push_back(j);
    fold.test_items.push_back(j);
  }
  for (int u : fold.train_users) {
    for (const auto& [item, score] : data.prefs.observed(u)) {
      fold.train_cells.push_back({u, item, score});
    }
  }
  for (int u : fold.test_users) {
    for (const auto& [item, score] : data.prefs.observed(u)) {
      fold.test_cells.push_back({u, item, score});
    }
  }
  return fold;
}

Outcome run_movielens_user_cold_start() {
  const std::string dir = find_ml100k();
  if (dir.empty()) {
    return {Status::Skip,
            "ml-100k not found; set RANKFORGE_DATA to a directory containing ml-100k/"};
  }
  const auto start = std::chrono::steady_clock::now();
  Check check;

  const RawDataset raw = load_movielens_100k(dir);
  const Dataset data = make_dataset(raw, movielens_schema(raw));
  check.expect(data.prefs.n_users() == 943, "expected 943 users");
  check.expect(data.prefs.n_items() == 1682, "expected 1682 items");
  check.expect(data.prefs.n_observed() == 100000, "expected 100000 ratings");

  // Paper protocol at desk scale: 50/50 user split, trees capped at 2000,
  // eta 0.01, 100-leaf trees with a 1% minimum leaf, r = 50, NDCG@5. The
  // (mu1, mu2) selection runs a reduced grid with 2-fold inner CV instead of
  // the full 10x10 grid with 5 folds.
  const std::vector<TruncationLevel> ks{TruncationLevel(5)};
  const std::vector<GridCell> reduced_grid{{0.1, 0.1}, {0.1, 5.0}, {0.1, 25.0},
                                           {5.0, 0.1},  {5.0, 5.0}, {5.0, 25.0},
                                           {25.0, 0.1}, {25.0, 5.0}, {25.0, 25.0}};

  const auto base_options = [](std::uint64_t seed) {
    TrainOptions opts;
    opts.boost.eta = 0.01;
    opts.boost.max_trees = 2000;
    opts.boost.early_stop_patience = 200;
    opts.boost.truncation = TruncationLevel(5);
    opts.boost.tree_params = {100, 0.01, 1};
    opts.boost.rank = 50;
    opts.boost.seed = seed;
    opts.valid_user_fraction = 0.1;
    return opts;
  };

  struct MethodStats {
    std::vector<double> means;                 // one per seed
    std::vector<std::vector<double>> by_user;  // per seed per-user NDCG@5
  };
  std::map<std::string, MethodStats> stats;

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto folds = split_user_cold_start(data.prefs, false, 0.5, seed);
    const FoldIndices& fold = folds[0];

    double best_mu1 = 0.1;
    double best_mu2 = 0.1;
    {
      // inner 2-fold CV over the training users for (mu1, mu2)
      std::vector<int> users = fold.train_users;
      Rng rng(derive_seed(seed, "ml-inner"));
      rng.shuffle(users);
      const std::size_t half = users.size() / 2;
      std::vector<std::vector<int>> halves(2);
      halves[0].assign(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(half));
      halves[1].assign(users.begin() + static_cast<std::ptrdiff_t>(half), users.end());
      std::sort(halves[0].begin(), halves[0].end());
      std::sort(halves[1].begin(), halves[1].end());
      const GridResult grid = grid_search(
          reduced_grid, 2,
          [&](GridCell cell, int inner_fold, std::uint64_t cell_seed) {
            const FoldIndices inner =
                make_ucs_fold(data, halves[static_cast<std::size_t>(inner_fold)],
                              halves[static_cast<std::size_t>(1 - inner_fold)], cell_seed);
            TrainOptions opts = base_options(cell_seed);
            opts.boost.max_trees = 600;  // inner-CV tree cap
            opts.boost.early_stop_patience = 100;
            opts.boost.mu1 = cell.mu1;
            opts.boost.mu2 = cell.mu2;
            const TrainedRanker ranker = train_on_fold(data, inner, Method::LMMFReg, opts);
            return evaluate_ndcg(score_fold(data, inner, ranker), ks).mean[0];
          },
          derive_seed(seed, "ml-grid"));
      best_mu1 = grid.best.mu1;
      best_mu2 = grid.best.mu2;
    }

    for (Method method : {Method::UB, Method::LM, Method::LMMF, Method::LMMFReg}) {
      TrainOptions opts = base_options(seed);
      if (method == Method::LMMFReg) {
        opts.boost.mu1 = best_mu1;
        opts.boost.mu2 = best_mu2;
      }
      const TrainedRanker ranker = train_on_fold(data, fold, method, opts);
      const EvalReport report = evaluate_ndcg(score_fold(data, fold, ranker), ks);
      MethodStats& s = stats[method_name(method)];
      s.means.push_back(report.mean[0]);
      std::vector<double> per_user;
      for (const auto& row : report.rows) per_user.push_back(row.ndcg[0]);
      s.by_user.push_back(per_user);
      std::cerr << "[movielens] seed " << seed << " " << method_name(method)
                << " NDCG@5 = " << fmt(report.mean[0], 4)
                << (method == Method::LMMFReg
                        ? " (mu1=" + fmt(best_mu1, 1) + ", mu2=" + fmt(best_mu2, 1) + ")"
                        : "")
                << "\n";
    }
  }

  const auto seed_mean = [&](const std::string& m) {
    const auto& v = stats.at(m).means;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  const double ub = seed_mean("ub");
  const double lm = seed_mean("lm");
  const double lmmf = seed_mean("lm-mf");
  const double lmmfreg = seed_mean("lm-mf-reg");

  const bool ordering = lmmfreg >= lmmf && lmmf > lm && lmmf > ub && lmmfreg > ub;
  const bool band = std::fabs(ub - 0.6001) <= 0.03 && std::fabs(lm - 0.6227) <= 0.03 &&
                    std::fabs(lmmf - 0.6439) <= 0.03 && std::fabs(lmmfreg - 0.6503) <= 0.03;

  std::string note = "UB " + fmt(ub, 4) + " LM " + fmt(lm, 4) + " LM-MF " + fmt(lmmf, 4) +
                     " LM-MF-Reg " + fmt(lmmfreg, 4);
  if (!band) {
    // fallback: ordering plus McNemar significance of LM-MF over LM, pooled
    // per-user wins and losses across the three seeds
    int wins = 0;
    int losses = 0;
    for (std::size_t s = 0; s < stats["lm-mf"].by_user.size(); ++s) {
      const Comparison c =
          compare_per_unit(stats["lm-mf"].by_user[s], stats["lm"].by_user[s]);
      wins += c.wins;
      losses += c.losses;
    }
    const double p = mcnemar_pvalue(wins, losses);
    note += "; band missed, fallback p(LM-MF vs LM) = " + fmt(p, 6);
    check.expect(ordering && p < 0.05,
                 "neither the +-0.03 band nor the ordering-with-significance fallback holds: " +
                     note);
  } else {
    check.expect(ordering, "magnitudes in band but ordering violated: " + note);
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(check, elapsed, 14400.0, note);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  std::vector<std::string> exclude;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only.push_back(argv[++i]);
    } else if (arg == "--exclude" && i + 1 < argc) {
      exclude.push_back(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only substr] [--exclude substr]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric_oracle", run_metric_oracle},
      {"lambda_conservation", run_lambda_conservation},
      {"gradient_checks", run_gradient_checks},
      {"tree_oracle", run_tree_oracle},
      {"toy_convergence", run_toy_convergence},
      {"movielens_user_cold_start", run_movielens_user_cold_start},
      {"mcnemar", run_mcnemar},
      {"determinism", run_determinism},
  };

  const auto selected = [&](const std::string& name) {
    for (const std::string& e : exclude) {
      if (name.find(e) != std::string::npos) return false;
    }
    if (only.empty()) return true;
    for (const std::string& o : only) {
      if (name.find(o) != std::string::npos) return true;
    }
    return false;
  };

  int failed = 0;
  int ran = 0;
  int skipped = 0;
  for (const auto& [name, run] : criteria) {
    if (!selected(name)) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = outcome.status == Status::Pass   ? "PASS"
                      : outcome.status == Status::Skip ? "SKIP"
                                                       : "FAIL";
    std::cout << "[" << tag << "] " << name << " (" << fmt(elapsed, 1) << "s)"
              << (outcome.detail.empty() ? "" : ": " + outcome.detail) << "\n";
    if (outcome.status == Status::Fail) ++failed;
    if (outcome.status == Status::Skip) ++skipped;
  }
  if (ran == 0) {
    std::cerr << "no criteria selected\n";
    return 2;
  }
  if (failed > 0) return 1;
  if (skipped == ran) return 77;
  return 0;
}
