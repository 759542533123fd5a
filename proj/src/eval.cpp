#include "rankforge/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rankforge/rng.hpp"
#include "rankforge/similarity.hpp"

namespace rankforge {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, static_cast<std::size_t>(end - buf));
}

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::size_t floor_fraction(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

}  // namespace

FoldIndices split_matrix_completion(const PreferenceMatrix& prefs, int n_train, int n_valid,
                                    std::uint64_t seed) {
  if (n_train < 1 || n_valid < 0) {
    throw std::invalid_argument("split_matrix_completion: invalid per-user counts");
  }
  FoldIndices fold;
  fold.kind = SplitKind::MatrixCompletion;
  fold.seed = seed;
  for (int u = 0; u < prefs.n_users(); ++u) fold.train_users.push_back(u);
  fold.test_users = fold.train_users;
  for (int i = 0; i < prefs.n_items(); ++i) fold.train_items.push_back(i);
  fold.test_items = fold.train_items;

  Rng rng(derive_seed(seed, "split-mc"));
  for (int u = 0; u < prefs.n_users(); ++u) {
    const auto& obs = prefs.observed(u);
    const int total = static_cast<int>(obs.size());
    if (total < n_train + n_valid + 1) {
      throw std::invalid_argument("split_matrix_completion: user " + std::to_string(u) +
                                  " has only " + std::to_string(total) +
                                  " observed items, needs > " + std::to_string(n_train + n_valid));
    }
    std::vector<int> pos(obs.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    rng.shuffle(pos);
    for (int i = 0; i < total; ++i) {
      const auto& [item, score] = obs[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
      Entry e{u, item, score};
      if (i < n_train) {
        fold.train_cells.push_back(e);
      } else if (i < n_train + n_valid) {
        fold.valid_cells.push_back(e);
      } else {
        fold.test_cells.push_back(e);
      }
    }
  }
  return fold;
}

namespace {

std::vector<std::pair<std::vector<int>, std::vector<int>>> user_partitions(
    const PreferenceMatrix& prefs, bool leave_one_out, double fraction, std::uint64_t seed,
    const char* label) {
  const int n = prefs.n_users();
  if (n < 2) {
    throw std::invalid_argument("cold start split: need at least two users");
  }
  std::vector<std::pair<std::vector<int>, std::vector<int>>> parts;
  if (leave_one_out) {
    for (int held = 0; held < n; ++held) {
      std::vector<int> train;
      train.reserve(static_cast<std::size_t>(n - 1));
      for (int u = 0; u < n; ++u) {
        if (u != held) train.push_back(u);
      }
      parts.emplace_back(std::move(train), std::vector<int>{held});
    }
  } else {
    if (fraction <= 0.0 || fraction >= 1.0) {
      throw std::invalid_argument("cold start split: fraction must be in (0, 1)");
    }
    std::vector<int> users(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) users[static_cast<std::size_t>(u)] = u;
    Rng rng(derive_seed(seed, label));
    rng.shuffle(users);
    const std::size_t n_train = floor_fraction(users.size(), fraction);
    if (n_train == 0 || n_train == users.size()) {
      throw std::invalid_argument("cold start split: fraction leaves one side empty");
    }
    std::vector<int> train(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<int> test(users.begin() + static_cast<std::ptrdiff_t>(n_train), users.end());
    parts.emplace_back(sorted(std::move(train)), sorted(std::move(test)));
  }
  return parts;
}

}  // namespace

std::vector<FoldIndices> split_user_cold_start(const PreferenceMatrix& prefs, bool leave_one_out,
                                               double fraction, std::uint64_t seed) {
  auto parts = user_partitions(prefs, leave_one_out, fraction, seed, "split-ucs");
  std::vector<FoldIndices> folds;
  folds.reserve(parts.size());
  std::vector<int> all_items;
  for (int i = 0; i < prefs.n_items(); ++i) all_items.push_back(i);
  for (std::size_t f = 0; f < parts.size(); ++f) {
    FoldIndices fold;
    fold.kind = SplitKind::UserColdStart;
    fold.seed = seed;
    fold.train_users = std::move(parts[f].first);
    fold.test_users = std::move(parts[f].second);
    fold.train_items = all_items;
    fold.test_items = all_items;
    for (int u : fold.train_users) {
      for (const auto& [item, score] : prefs.observed(u)) {
        fold.train_cells.push_back({u, item, score});
      }
    }
    for (int u : fold.test_users) {
      for (const auto& [item, score] : prefs.observed(u)) {
        fold.test_cells.push_back({u, item, score});
      }
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::vector<FoldIndices> split_full_cold_start(const PreferenceMatrix& prefs, bool leave_one_out,
                                               double user_fraction, double item_fraction,
                                               std::uint64_t seed) {
  if (item_fraction <= 0.0 || item_fraction >= 1.0) {
    throw std::invalid_argument("split_full_cold_start: item fraction must be in (0, 1)");
  }
  auto parts = user_partitions(prefs, leave_one_out, user_fraction, seed, "split-fcs");
  std::vector<FoldIndices> folds;
  folds.reserve(parts.size());
  const int m = prefs.n_items();
  for (std::size_t f = 0; f < parts.size(); ++f) {
    FoldIndices fold;
    fold.kind = SplitKind::FullColdStart;
    fold.seed = seed;
    fold.train_users = std::move(parts[f].first);
    fold.test_users = std::move(parts[f].second);

    std::vector<int> items(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) items[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, "split-fcs-items", f));
    rng.shuffle(items);
    const std::size_t n_train_items = floor_fraction(items.size(), item_fraction);
    if (n_train_items == 0 || n_train_items == items.size()) {
      throw std::invalid_argument("split_full_cold_start: item fraction leaves one side empty");
    }
    fold.train_items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train_items));
    fold.test_items.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train_items), items.end());
    std::sort(fold.train_items.begin(), fold.train_items.end());
    std::sort(fold.test_items.begin(), fold.test_items.end());

    std::vector<char> is_train_item(static_cast<std::size_t>(m), 0);
    for (int i : fold.train_items) is_train_item[static_cast<std::size_t>(i)] = 1;
    for (int u : fold.train_users) {
      for (const auto& [item, score] : prefs.observed(u)) {
        if (is_train_item[static_cast<std::size_t>(item)]) {
          fold.train_cells.push_back({u, item, score});
        }
      }
    }
    for (int u : fold.test_users) {
      for (const auto& [item, score] : prefs.observed(u)) {
        if (!is_train_item[static_cast<std::size_t>(item)]) {
          fold.test_cells.push_back({u, item, score});
        }
      }
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

Slice make_slice(const Dataset& data, std::span<const int> users, std::span<const int> items,
                 std::span<const Entry> cells) {
  std::vector<int> user_local(data.users.n_entities(), -1);
  std::vector<int> item_local(data.items.n_entities(), -1);
  std::vector<char> has_cell(data.users.n_entities(), 0);
  for (const Entry& e : cells) has_cell[static_cast<std::size_t>(e.user)] = 1;

  std::vector<int> user_ids;
  std::vector<int> item_ids;
  for (int u : users) {
    if (has_cell[static_cast<std::size_t>(u)]) {
      user_local[static_cast<std::size_t>(u)] = static_cast<int>(user_ids.size());
      user_ids.push_back(u);
    }
  }
  for (int i : items) {
    item_local[static_cast<std::size_t>(i)] = static_cast<int>(item_ids.size());
    item_ids.push_back(i);
  }
  if (user_ids.empty()) {
    throw std::invalid_argument("make_slice: no user with observed cells in the slice");
  }

  std::vector<Entry> local_cells;
  local_cells.reserve(cells.size());
  for (const Entry& e : cells) {
    const int lu = user_local[static_cast<std::size_t>(e.user)];
    const int li = item_local[static_cast<std::size_t>(e.item)];
    if (lu < 0 || li < 0) {
      throw std::invalid_argument("make_slice: cell outside the user/item universe");
    }
    local_cells.push_back({lu, li, e.score});
  }

  Matrix umat(user_ids.size(), data.users.dim());
  for (std::size_t i = 0; i < user_ids.size(); ++i) {
    const auto row = data.users.row(static_cast<std::size_t>(user_ids[i]));
    std::copy(row.begin(), row.end(), umat.row(i).begin());
  }
  Matrix imat(item_ids.size(), data.items.dim());
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    const auto row = data.items.row(static_cast<std::size_t>(item_ids[i]));
    std::copy(row.begin(), row.end(), imat.row(i).begin());
  }

  PreferenceMatrix prefs(static_cast<int>(umat.rows()), static_cast<int>(imat.rows()),
                         std::move(local_cells));
  return Slice{std::move(user_ids), std::move(item_ids), std::move(prefs),
               EntityFeatures(std::move(umat), data.users.column_names()),
               EntityFeatures(std::move(imat), data.items.column_names())};
}

EvalReport evaluate_ndcg(const std::vector<UserScores>& units,
                         std::span<const TruncationLevel> ks) {
  if (ks.empty()) {
    throw std::invalid_argument("evaluate_ndcg: no truncation levels");
  }
  EvalReport report;
  for (const TruncationLevel& k : ks) report.ks.push_back(k.k);
  report.mean.assign(ks.size(), 0.0);
  for (const UserScores& unit : units) {
    if (unit.labels.size() != unit.scores.size()) {
      throw std::invalid_argument("evaluate_ndcg: labels and scores length mismatch");
    }
    if (unit.labels.empty()) {
      ++report.n_skipped;
      continue;
    }
    EvalReport::Row row;
    row.user = unit.user;
    row.n_items = static_cast<int>(unit.labels.size());
    for (const TruncationLevel& k : ks) {
      row.ndcg.push_back(ndcg_at_k(unit.labels, unit.scores, k));
    }
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) {
    throw std::invalid_argument("evaluate_ndcg: no unit with observed test items");
  }
  for (const auto& row : report.rows) {
    for (std::size_t i = 0; i < row.ndcg.size(); ++i) report.mean[i] += row.ndcg[i];
  }
  for (double& m : report.mean) m /= static_cast<double>(report.rows.size());
  return report;
}

double mcnemar_pvalue(int wins, int losses) {
  if (wins < 0 || losses < 0) {
    throw std::invalid_argument("mcnemar_pvalue: counts must be non-negative");
  }
  const int total = wins + losses;
  if (total == 0) return 1.0;
  const double diff = std::fabs(static_cast<double>(wins) - static_cast<double>(losses));
  if (diff <= 1.0) return 1.0;  // continuity correction clamped at zero
  const double stat = (diff - 1.0) * (diff - 1.0) / static_cast<double>(total);
  // chi-square upper tail, 1 degree of freedom
  return std::erfc(std::sqrt(stat / 2.0));
}

Comparison compare_per_unit(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("compare_per_unit: length mismatch");
  }
  Comparison c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++c.wins;
    } else if (a[i] < b[i]) {
      ++c.losses;
    } else {
      ++c.ties;
    }
  }
  c.p_value = mcnemar_pvalue(c.wins, c.losses);
  return c;
}

GridResult grid_search(std::span<const GridCell> cells, int n_folds,
                       const std::function<double(GridCell, int, std::uint64_t)>& score_cell,
                       std::uint64_t base_seed) {
  if (cells.empty()) {
    throw std::invalid_argument("grid_search: empty grid");
  }
  if (n_folds < 1) {
    throw std::invalid_argument("grid_search: need at least one fold");
  }
  GridResult result;
  result.mean_scores.reserve(cells.size());
  std::size_t best_idx = 0;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    double sum = 0.0;
    for (int f = 0; f < n_folds; ++f) {
      sum += score_cell(cells[ci], f, derive_seed(base_seed, "grid", ci, static_cast<std::uint64_t>(f)));
    }
    const double mean = sum / static_cast<double>(n_folds);
    result.mean_scores.push_back(mean);
    const bool better =
        mean > result.mean_scores[best_idx] ||
        (mean == result.mean_scores[best_idx] &&
         (cells[ci].mu1 < cells[best_idx].mu1 ||
          (cells[ci].mu1 == cells[best_idx].mu1 && cells[ci].mu2 < cells[best_idx].mu2)));
    if (ci == 0 || better) best_idx = ci;
  }
  result.best = cells[best_idx];
  return result;
}

// ---------------------------------------------------------------------------

std::string method_name(Method m) {
  switch (m) {
    case Method::LM: return "lm";
    case Method::LMW: return "lmw";
    case Method::LMMF: return "lm-mf";
    case Method::LMMFReg: return "lm-mf-reg";
    case Method::UB: return "ub";
    case Method::FB: return "fb";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "lm") return Method::LM;
  if (name == "lmw") return Method::LMW;
  if (name == "lm-mf") return Method::LMMF;
  if (name == "lm-mf-reg") return Method::LMMFReg;
  if (name == "ub") return Method::UB;
  if (name == "fb") return Method::FB;
  return std::nullopt;
}

namespace {

std::vector<RatingGroup> groups_of(const PreferenceMatrix& prefs) {
  std::vector<RatingGroup> groups;
  groups.reserve(static_cast<std::size_t>(prefs.n_users()));
  for (int u = 0; u < prefs.n_users(); ++u) {
    RatingGroup g;
    g.user = u;
    for (const auto& [item, score] : prefs.observed(u)) {
      g.items.push_back(item);
      g.labels.push_back(score);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

EntityFeatures rows_subset(const EntityFeatures& all, std::span<const int> ids) {
  Matrix m(ids.size(), all.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = all.row(static_cast<std::size_t>(ids[i]));
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return EntityFeatures(std::move(m), all.column_names());
}

}  // namespace

TrainedRanker train_on_fold(const Dataset& data, const FoldIndices& fold, Method method,
                            const TrainOptions& opts, std::vector<TrainLogRow>* log) {
  TrainedRanker ranker;
  ranker.method = method;
  ranker.neighbors = opts.neighbors;
  if (method == Method::UB) {
    if (fold.kind != SplitKind::UserColdStart) {
      throw std::invalid_argument("train_on_fold: ub applies to user cold start folds only");
    }
    return ranker;
  }
  if (method == Method::FB) {
    if (fold.kind != SplitKind::FullColdStart) {
      throw std::invalid_argument("train_on_fold: fb applies to full cold start folds only");
    }
    return ranker;
  }

  // Early-stopping validation: matrix completion folds carry explicit masks;
  // cold-start folds carve a fraction of the training users.
  std::vector<int> core_users = fold.train_users;
  std::vector<int> valid_users;
  if (fold.kind != SplitKind::MatrixCompletion) {
    const std::size_t n_valid = floor_fraction(core_users.size(), opts.valid_user_fraction);
    if (core_users.size() >= 2 && n_valid >= 1 && n_valid < core_users.size()) {
      std::vector<int> shuffled = core_users;
      Rng rng(derive_seed(opts.boost.seed, "valid-carve"));
      rng.shuffle(shuffled);
      valid_users.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid));
      core_users.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid), shuffled.end());
      std::sort(valid_users.begin(), valid_users.end());
      std::sort(core_users.begin(), core_users.end());
    }
  }

  std::vector<char> is_valid_user(data.users.n_entities(), 0);
  for (int u : valid_users) is_valid_user[static_cast<std::size_t>(u)] = 1;
  std::vector<Entry> core_cells;
  std::vector<Entry> carve_cells;
  for (const Entry& e : fold.train_cells) {
    (is_valid_user[static_cast<std::size_t>(e.user)] ? carve_cells : core_cells).push_back(e);
  }

  const Slice slice = make_slice(data, core_users, fold.train_items, core_cells);

  std::vector<int> item_local(data.items.n_entities(), -1);
  for (std::size_t i = 0; i < slice.item_ids.size(); ++i) {
    item_local[static_cast<std::size_t>(slice.item_ids[i])] = static_cast<int>(i);
  }

  RankingData train;
  train.users = &slice.users;
  train.items = &slice.items;
  train.groups = groups_of(slice.prefs);

  // Validation groups in the slice's item space.
  EntityFeatures valid_features;
  std::vector<RatingGroup> valid_groups;
  if (fold.kind == SplitKind::MatrixCompletion) {
    std::vector<int> user_local(data.users.n_entities(), -1);
    for (std::size_t i = 0; i < slice.user_ids.size(); ++i) {
      user_local[static_cast<std::size_t>(slice.user_ids[i])] = static_cast<int>(i);
    }
    std::map<int, RatingGroup> by_user;
    for (const Entry& e : fold.valid_cells) {
      const int lu = user_local[static_cast<std::size_t>(e.user)];
      const int li = item_local[static_cast<std::size_t>(e.item)];
      if (lu < 0 || li < 0) continue;
      RatingGroup& g = by_user[lu];
      g.user = lu;
      g.items.push_back(li);
      g.labels.push_back(e.score);
    }
    for (auto& [lu, g] : by_user) valid_groups.push_back(std::move(g));
  } else if (!valid_users.empty()) {
    std::vector<int> vuser_local(data.users.n_entities(), -1);
    for (std::size_t i = 0; i < valid_users.size(); ++i) {
      vuser_local[static_cast<std::size_t>(valid_users[i])] = static_cast<int>(i);
    }
    valid_features = rows_subset(data.users, valid_users);
    std::map<int, RatingGroup> by_user;
    for (const Entry& e : carve_cells) {
      const int lu = vuser_local[static_cast<std::size_t>(e.user)];
      const int li = item_local[static_cast<std::size_t>(e.item)];
      if (lu < 0 || li < 0) continue;
      RatingGroup& g = by_user[lu];
      g.user = lu;
      g.items.push_back(li);
      g.labels.push_back(e.score);
    }
    for (auto& [lu, g] : by_user) valid_groups.push_back(std::move(g));
  }

  RankingData valid;
  valid.items = &slice.items;
  if (valid_groups.empty()) {
    // Toy-scale fallback: validate on the training data itself.
    valid.users = &slice.users;
    valid.groups = train.groups;
  } else if (fold.kind == SplitKind::MatrixCompletion) {
    valid.users = &slice.users;
    valid.groups = std::move(valid_groups);
  } else {
    valid.users = &valid_features;
    valid.groups = std::move(valid_groups);
  }

  BoostParams params = opts.boost;
  const bool needs_item_graphs = method == Method::LMW || method == Method::LMMFReg;
  const bool needs_user_graphs = method == Method::LMMFReg;

  SimilarityGraph item_in;
  SimilarityGraph item_out;
  SimilarityGraph user_in;
  SimilarityGraph user_out;
  if (needs_item_graphs) {
    item_in = input_similarity(slice.items, kernel_width(slice.items),
                               opts.similarity_k_neighbors);
    item_out = output_similarity(slice.prefs, Axis::Items, params.truncation,
                                 opts.similarity_k_neighbors);
  }
  if (needs_user_graphs) {
    user_in = input_similarity(slice.users, kernel_width(slice.users),
                               opts.similarity_k_neighbors);
    user_out = output_similarity(slice.prefs, Axis::Users, params.truncation,
                                 opts.similarity_k_neighbors);
  }
  if (!opts.dump_similarity_dir.empty() && needs_item_graphs) {
    namespace fs = std::filesystem;
    fs::create_directories(opts.dump_similarity_dir);
    save_similarity_csv(item_in, opts.dump_similarity_dir + "/item_input.csv");
    save_similarity_csv(item_out, opts.dump_similarity_dir + "/item_output.csv");
    if (needs_user_graphs) {
      save_similarity_csv(user_in, opts.dump_similarity_dir + "/user_input.csv");
      save_similarity_csv(user_out, opts.dump_similarity_dir + "/user_output.csv");
    }
  }

  switch (method) {
    case Method::LM: {
      ranker.scorer = train_lambdamart(train, valid, params, nullptr, log);
      break;
    }
    case Method::LMW: {
      const SimilarityGraph blended =
          blend_item_similarity(item_in, item_out, params.mu1, params.mu2);
      ranker.scorer = train_lambdamart(train, valid, params, &blended, log);
      break;
    }
    case Method::LMMF: {
      if (params.rank <= 0) {
        params.rank = static_cast<int>(std::min(slice.user_ids.size(), slice.item_ids.size()));
      }
      ranker.factor = train_lmmf(train, valid, params, nullptr, log);
      break;
    }
    case Method::LMMFReg: {
      if (params.rank <= 0) {
        params.rank = static_cast<int>(std::min(slice.user_ids.size(), slice.item_ids.size()));
      }
      LaplacianRegularizers reg;
      reg.user_input = std::move(user_in);
      reg.user_output = std::move(user_out);
      reg.item_input = std::move(item_in);
      reg.item_output = std::move(item_out);
      reg.mu1 = params.mu1;
      reg.mu2 = params.mu2;
      ranker.factor = train_lmmf(train, valid, params, &reg, log);
      break;
    }
    default:
      break;
  }
  return ranker;
}

std::vector<UserScores> score_fold(const Dataset& data, const FoldIndices& fold,
                                   const TrainedRanker& ranker) {
  if (ranker.method == Method::UB && fold.kind != SplitKind::UserColdStart) {
    throw std::invalid_argument("score_fold: ub applies to user cold start folds only");
  }
  if (ranker.method == Method::FB && fold.kind != SplitKind::FullColdStart) {
    throw std::invalid_argument("score_fold: fb applies to full cold start folds only");
  }
  // test users with no observed test cells still count as (skipped) units
  std::map<int, std::vector<Entry>> cells_by_user;
  for (int u : fold.test_users) cells_by_user[u];
  for (const Entry& e : fold.test_cells) cells_by_user[e.user].push_back(e);

  std::optional<Slice> memory_slice;
  std::vector<int> item_local;
  if (ranker.method == Method::UB || ranker.method == Method::FB) {
    memory_slice = make_slice(data, fold.train_users, fold.train_items, fold.train_cells);
    item_local.assign(data.items.n_entities(), -1);
    for (std::size_t i = 0; i < memory_slice->item_ids.size(); ++i) {
      item_local[static_cast<std::size_t>(memory_slice->item_ids[i])] = static_cast<int>(i);
    }
  }
  std::unordered_map<int, std::vector<double>> item_factor_cache;

  std::vector<UserScores> out;
  out.reserve(cells_by_user.size());
  for (const auto& [u, cells] : cells_by_user) {
    UserScores unit;
    unit.user = u;
    unit.labels.reserve(cells.size());
    unit.scores.reserve(cells.size());
    for (const Entry& e : cells) unit.labels.push_back(e.score);
    const auto user_row = data.users.row(static_cast<std::size_t>(u));
    switch (ranker.method) {
      case Method::UB: {
        if (!cells.empty()) {
          const std::vector<double> all_scores =
              user_memory_scores(user_row, memory_slice->prefs, memory_slice->users,
                                 ranker.neighbors);
          for (const Entry& e : cells) {
            const int li = item_local[static_cast<std::size_t>(e.item)];
            unit.scores.push_back(li >= 0 ? all_scores[static_cast<std::size_t>(li)] : 0.0);
          }
        }
        break;
      }
      case Method::FB: {
        for (const Entry& e : cells) {
          unit.scores.push_back(full_memory_score(
              user_row, data.items.row(static_cast<std::size_t>(e.item)), memory_slice->prefs,
              memory_slice->users, memory_slice->items, ranker.neighbors));
        }
        break;
      }
      case Method::LMMF:
      case Method::LMMFReg: {
        if (!cells.empty()) {
          const FactorModel& model = *ranker.factor;
          const std::vector<double> uf = model.user_factor(user_row);
          for (const Entry& e : cells) {
            auto it = item_factor_cache.find(e.item);
            if (it == item_factor_cache.end()) {
              it = item_factor_cache
                       .emplace(e.item, model.item_factor(
                                            data.items.row(static_cast<std::size_t>(e.item))))
                       .first;
            }
            double dot = 0.0;
            for (std::size_t d = 0; d < uf.size(); ++d) dot += uf[d] * it->second[d];
            unit.scores.push_back(dot);
          }
        }
        break;
      }
      case Method::LM:
      case Method::LMW: {
        const ScorerModel& model = *ranker.scorer;
        for (const Entry& e : cells) {
          unit.scores.push_back(
              model.predict(user_row, data.items.row(static_cast<std::size_t>(e.item))));
        }
        break;
      }
    }
    out.push_back(std::move(unit));
  }
  return out;
}

void save_ranker(const TrainedRanker& ranker, const std::string& path) {
  switch (ranker.method) {
    case Method::LM:
    case Method::LMW:
      save_scorer(*ranker.scorer, path);
      return;
    case Method::LMMF:
    case Method::LMMFReg:
      save_factor(*ranker.factor, path);
      return;
    case Method::UB:
    case Method::FB: {
      nlohmann::json j{{"model_type", method_name(ranker.method)},
                       {"k_neighbors", ranker.neighbors.k}};
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open for writing: " + path);
      out << j.dump() << '\n';
      return;
    }
  }
}

TrainedRanker load_ranker(const std::string& path) {
  const std::string type = model_type_of(path);
  TrainedRanker ranker;
  if (type == "lambdamart" || type == "lambdamart_weighted") {
    ranker.scorer = load_scorer(path);
    ranker.method = ranker.scorer->weighted ? Method::LMW : Method::LM;
  } else if (type == "lmmf" || type == "lmmf_reg") {
    ranker.factor = load_factor(path);
    ranker.method = ranker.factor->regularized ? Method::LMMFReg : Method::LMMF;
  } else if (type == "ub" || type == "fb") {
    std::ifstream in(path, std::ios::binary);
    const nlohmann::json j = nlohmann::json::parse(in);
    ranker.method = type == "ub" ? Method::UB : Method::FB;
    ranker.neighbors.k = j.at("k_neighbors").get<int>();
  } else {
    throw std::runtime_error("load_ranker: unknown model_type " + type);
  }
  return ranker;
}

void write_report_csv(const EvalReport& report, const std::string& path, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# seed=" << seed << "\n";
  out << "# skipped=" << report.n_skipped << "\n";
  out << "user,n_items";
  for (int k : report.ks) out << ",ndcg@" << k;
  out << "\n";
  for (const auto& row : report.rows) {
    out << row.user << ',' << row.n_items;
    for (double v : row.ndcg) out << ',' << format_double(v);
    out << "\n";
  }
}

EvalReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  EvalReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("skipped=");
      if (pos != std::string::npos) {
        report.n_skipped = std::stoi(line.substr(pos + 8));
      }
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    if (!header_seen) {
      header_seen = true;
      int col = 0;
      while (std::getline(ss, field, ',')) {
        if (col >= 2) {
          const auto at = field.find('@');
          if (at == std::string::npos) {
            throw std::runtime_error("read_report_csv: malformed header column " + field);
          }
          report.ks.push_back(std::stoi(field.substr(at + 1)));
        }
        ++col;
      }
      continue;
    }
    EvalReport::Row row;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      if (col == 0) {
        row.user = std::stoi(field);
      } else if (col == 1) {
        row.n_items = std::stoi(field);
      } else {
        row.ndcg.push_back(std::stod(field));
      }
      ++col;
    }
    if (row.ndcg.size() != report.ks.size()) {
      throw std::runtime_error("read_report_csv: row width does not match header");
    }
    report.rows.push_back(std::move(row));
  }
  if (!header_seen || report.rows.empty()) {
    throw std::runtime_error("read_report_csv: no data rows in " + path);
  }
  report.mean.assign(report.ks.size(), 0.0);
  for (const auto& row : report.rows) {
    for (std::size_t i = 0; i < row.ndcg.size(); ++i) report.mean[i] += row.ndcg[i];
  }
  for (double& m : report.mean) m /= static_cast<double>(report.rows.size());
  return report;
}

std::string format_summary(const EvalReport& report, const std::string& method) {
  std::string out;
  out += "method: " + method + "\n";
  out += "units: " + std::to_string(report.rows.size()) + " (skipped " +
         std::to_string(report.n_skipped) + ")\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "NDCG@%d: %.6f\n", report.ks[i], report.mean[i]);
    out += buf;
  }
  return out;
}

}  // namespace rankforge
