// rankforge: learning-to-rank recommender toolkit.
// Verbs: ingest, split, train, evaluate, compare, gridsearch.
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rankforge/csv.hpp"
#include "rankforge/eval.hpp"
#include "rankforge/ingest.hpp"
#include "rankforge/rng.hpp"

namespace fs = std::filesystem;
using namespace rankforge;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// dataset directories (written by ingest, read by everything else)

Dataset load_dataset_dir(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "ratings.csv")) {
    throw UsageError("dataset directory not found or not ingested: " + dir);
  }
  const RawDataset raw = load_generic(dir + "/ratings.csv", dir + "/user_features.csv",
                                      dir + "/item_features.csv");
  FeatureSchema schema;
  if (fs::exists(dir + "/schema.json")) {
    schema = load_schema(dir + "/schema.json");
  } else {
    schema = infer_schema(raw);
  }
  return make_dataset(raw, schema);
}

// ---------------------------------------------------------------------------
// fold files

void write_id_csv(const std::string& path, const std::string& column,
                  const std::vector<int>& ids, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# seed=" << seed << "\n" << column << "\n";
  for (int id : ids) out << id << "\n";
}

std::vector<int> read_id_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<int> ids;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    ids.push_back(static_cast<int>(parse_int_or_throw(line, path)));
  }
  return ids;
}

void write_cell_csv(const std::string& path, const std::vector<Entry>& cells,
                    std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# seed=" << seed << "\nuser,item,score\n";
  for (const Entry& e : cells) {
    out << e.user << ',' << e.item << ',' << double_to_string(e.score) << "\n";
  }
}

std::vector<Entry> read_cell_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Entry> cells;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = csv_split(line);
    if (fields.size() != 3) throw std::runtime_error(path + ": malformed cell row");
    cells.push_back({static_cast<int>(parse_int_or_throw(fields[0], path)),
                     static_cast<int>(parse_int_or_throw(fields[1], path)),
                     parse_double_or_throw(fields[2], path)});
  }
  return cells;
}

std::string kind_name(SplitKind kind) {
  switch (kind) {
    case SplitKind::MatrixCompletion: return "matrix-completion";
    case SplitKind::UserColdStart: return "user-cold-start";
    case SplitKind::FullColdStart: return "full-cold-start";
  }
  return "?";
}

SplitKind kind_from_name(const std::string& name) {
  if (name == "matrix-completion") return SplitKind::MatrixCompletion;
  if (name == "user-cold-start") return SplitKind::UserColdStart;
  if (name == "full-cold-start") return SplitKind::FullColdStart;
  throw UsageError("unknown split kind: " + name);
}

void write_folds(const std::string& dir, const std::vector<FoldIndices>& folds,
                 std::uint64_t seed) {
  fs::create_directories(dir);
  nlohmann::json manifest{{"kind", kind_name(folds.front().kind)},
                          {"seed", seed},
                          {"n_folds", folds.size()}};
  {
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "fold_%04zu", f);
    const std::string fdir = dir + "/" + name;
    fs::create_directories(fdir);
    const FoldIndices& fold = folds[f];
    write_id_csv(fdir + "/train_users.csv", "user", fold.train_users, seed);
    write_id_csv(fdir + "/test_users.csv", "user", fold.test_users, seed);
    write_id_csv(fdir + "/train_items.csv", "item", fold.train_items, seed);
    write_id_csv(fdir + "/test_items.csv", "item", fold.test_items, seed);
    write_cell_csv(fdir + "/train_cells.csv", fold.train_cells, seed);
    write_cell_csv(fdir + "/valid_cells.csv", fold.valid_cells, seed);
    write_cell_csv(fdir + "/test_cells.csv", fold.test_cells, seed);
  }
}

FoldIndices read_fold(const std::string& folds_dir, int index) {
  std::ifstream manifest_in(folds_dir + "/manifest.json");
  if (!manifest_in) throw UsageError("folds directory not found: " + folds_dir);
  const nlohmann::json manifest = nlohmann::json::parse(manifest_in);
  const int n_folds = manifest.at("n_folds").get<int>();
  if (index < 0 || index >= n_folds) {
    throw UsageError("fold index " + std::to_string(index) + " out of range (folds: " +
                     std::to_string(n_folds) + ")");
  }
  char name[32];
  std::snprintf(name, sizeof(name), "fold_%04d", index);
  const std::string fdir = folds_dir + "/" + name;
  FoldIndices fold;
  fold.kind = kind_from_name(manifest.at("kind").get<std::string>());
  fold.seed = manifest.at("seed").get<std::uint64_t>();
  fold.train_users = read_id_csv(fdir + "/train_users.csv");
  fold.test_users = read_id_csv(fdir + "/test_users.csv");
  fold.train_items = read_id_csv(fdir + "/train_items.csv");
  fold.test_items = read_id_csv(fdir + "/test_items.csv");
  fold.train_cells = read_cell_csv(fdir + "/train_cells.csv");
  fold.valid_cells = read_cell_csv(fdir + "/valid_cells.csv");
  fold.test_cells = read_cell_csv(fdir + "/test_cells.csv");
  return fold;
}

// The stamped config reproduces the run via `rankforge --config resolved.ini`
// (the [verb] section both selects the subcommand and carries its options).
void write_resolved_config(CLI::App* sub, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/resolved.ini", std::ios::binary);
  out << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string dataset = "generic";
  std::string path;
  std::string ratings;
  std::string user_features;
  std::string item_features;
  std::string rescale;  // "SRC:DST"
  std::string out;
};

int cmd_ingest(CLI::App* sub, IngestArgs& args) {
  std::string path = args.path;
  if (path.empty()) {
    if (const char* root = std::getenv("RANKFORGE_DATA")) {
      path = std::string(root) + (args.dataset == "ml100k" ? "/ml-100k" : "/ml-1m");
    }
  }
  RawDataset raw;
  FeatureSchema schema;
  if (args.dataset == "ml100k") {
    if (path.empty()) throw UsageError("ml100k needs --path or RANKFORGE_DATA");
    raw = load_movielens_100k(path);
    schema = movielens_schema(raw);
  } else if (args.dataset == "ml1m") {
    if (path.empty()) throw UsageError("ml1m needs --path or RANKFORGE_DATA");
    raw = load_movielens_1m(path);
    schema = movielens_schema(raw);
  } else if (args.dataset == "generic") {
    std::string ratings = args.ratings;
    std::string users = args.user_features;
    std::string items = args.item_features;
    if (!path.empty()) {
      if (ratings.empty()) ratings = path + "/ratings.csv";
      if (users.empty()) users = path + "/user_features.csv";
      if (items.empty()) items = path + "/item_features.csv";
    }
    if (ratings.empty() || users.empty() || items.empty()) {
      throw UsageError("generic needs --path or all of --ratings/--user-features/--item-features");
    }
    raw = load_generic(ratings, users, items);
    schema = infer_schema(raw);
  } else {
    throw UsageError("unknown dataset kind: " + args.dataset);
  }

  if (!args.rescale.empty()) {
    const auto pos = args.rescale.find(':');
    if (pos == std::string::npos) throw UsageError("--rescale expects SRC:DST");
    const double src = parse_double_or_throw(args.rescale.substr(0, pos), "--rescale");
    const double dst = parse_double_or_throw(args.rescale.substr(pos + 1), "--rescale");
    if (!(src > 0.0)) throw UsageError("--rescale source maximum must be positive");
    for (RawRating& r : raw.ratings) r.score *= dst / src;
  }

  export_generic(raw, args.out);
  save_schema(schema, args.out + "/schema.json");
  {
    nlohmann::json stats{{"users", raw.user_ids.size()},
                         {"items", raw.item_ids.size()},
                         {"ratings", raw.ratings.size()}};
    std::ofstream out(args.out + "/stats.json", std::ios::binary);
    out << stats.dump(2) << "\n";
  }
  write_resolved_config(sub, args.out);
  std::cout << "ingested " << raw.user_ids.size() << " users, " << raw.item_ids.size()
            << " items, " << raw.ratings.size() << " ratings into " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string data;
  std::string kind = "user-cold-start";
  int train_items = 15;
  int valid_items = 10;
  std::string mode = "fraction";
  double fraction = 0.5;
  double item_fraction = 0.5;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_split(CLI::App* sub, SplitArgs& args) {
  const Dataset data = load_dataset_dir(args.data);
  const SplitKind kind = kind_from_name(args.kind);
  const bool loo = args.mode == "loo";
  if (!loo && args.mode != "fraction") {
    throw UsageError("--mode must be loo or fraction");
  }
  std::vector<FoldIndices> folds;
  switch (kind) {
    case SplitKind::MatrixCompletion:
      folds.push_back(
          split_matrix_completion(data.prefs, args.train_items, args.valid_items, args.seed));
      break;
    case SplitKind::UserColdStart:
      folds = split_user_cold_start(data.prefs, loo, args.fraction, args.seed);
      break;
    case SplitKind::FullColdStart:
      folds = split_full_cold_start(data.prefs, loo, args.fraction, args.item_fraction,
                                    args.seed);
      break;
  }
  write_folds(args.out, folds, args.seed);
  write_resolved_config(sub, args.out);
  std::cout << "wrote " << folds.size() << " fold(s) to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string folds;
  int fold = 0;
  std::string method = "lm";
  double eta = 0.01;
  int max_trees = 15000;
  int patience = 200;
  double sigmoid_scale = 1.0;
  int truncation = 5;
  int max_leaves = 3;
  double min_leaf_fraction = 0.1;
  int rank = 0;
  double mu1 = -1.0;  // negative = unset
  double mu2 = -1.0;
  int k_neighbors = 5;
  double valid_fraction = 0.1;
  std::uint64_t seed = 42;
  std::string dump_similarities;
  std::string out;
};

TrainOptions to_train_options(const TrainArgs& args, Method method) {
  TrainOptions opts;
  opts.boost.eta = args.eta;
  opts.boost.max_trees = args.max_trees;
  opts.boost.early_stop_patience = args.patience;
  opts.boost.sigmoid_scale = args.sigmoid_scale;
  opts.boost.truncation = TruncationLevel(args.truncation);
  opts.boost.tree_params.max_leaves = args.max_leaves;
  opts.boost.tree_params.min_leaf_fraction = args.min_leaf_fraction;
  opts.boost.rank = args.rank;
  opts.boost.mu1 = std::max(args.mu1, 0.0);
  opts.boost.mu2 = std::max(args.mu2, 0.0);
  opts.boost.seed = args.seed;
  opts.neighbors.k = args.k_neighbors;
  opts.valid_user_fraction = args.valid_fraction;
  opts.similarity_k_neighbors = args.k_neighbors;
  opts.dump_similarity_dir = args.dump_similarities;
  if (method == Method::UB || method == Method::FB) {
    opts.boost = BoostParams{};
    opts.boost.seed = args.seed;
    opts.neighbors.k = args.k_neighbors;
  }
  return opts;
}

Method parse_method(const TrainArgs& args) {
  const auto method = method_from_name(args.method);
  if (!method) throw UsageError("unknown method: " + args.method);
  const bool uses_mu = *method == Method::LMW || *method == Method::LMMFReg;
  if ((args.mu1 >= 0.0 || args.mu2 >= 0.0) && !uses_mu) {
    throw UsageError("--mu1/--mu2 apply to lmw and lm-mf-reg only");
  }
  const bool factorized = *method == Method::LMMF || *method == Method::LMMFReg;
  if (args.rank > 0 && !factorized) {
    throw UsageError("--rank applies to lm-mf and lm-mf-reg only");
  }
  return *method;
}

int cmd_train(CLI::App* sub, TrainArgs& args) {
  const Method method = parse_method(args);
  const Dataset data = load_dataset_dir(args.data);
  const FoldIndices fold = read_fold(args.folds, args.fold);
  if (method == Method::UB && fold.kind != SplitKind::UserColdStart) {
    throw UsageError("ub applies to user-cold-start folds only");
  }
  if (method == Method::FB && fold.kind != SplitKind::FullColdStart) {
    throw UsageError("fb applies to full-cold-start folds only");
  }
  const TrainOptions opts = to_train_options(args, method);

  std::vector<TrainLogRow> log;
  const TrainedRanker ranker = train_on_fold(data, fold, method, opts, &log);

  fs::create_directories(args.out);
  save_ranker(ranker, args.out + "/model.json");
  {
    std::ofstream out(args.out + "/training_log.csv", std::ios::binary);
    out << "# seed=" << args.seed << "\niter,train_loss,valid_ndcg,best_valid_ndcg\n";
    for (const TrainLogRow& row : log) {
      out << row.iter << ',' << double_to_string(row.train_loss) << ','
          << double_to_string(row.valid_ndcg) << ',' << double_to_string(row.best_valid_ndcg)
          << "\n";
    }
  }
  write_resolved_config(sub, args.out);
  std::size_t n_trees = 0;
  if (ranker.scorer) n_trees = ranker.scorer->trees.size();
  if (ranker.factor) n_trees = ranker.factor->user_trees.size();
  std::cout << "trained " << method_name(method) << " (" << n_trees << " trees kept) into "
            << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string data;
  std::string folds;
  int fold = 0;
  std::string model;
  std::vector<int> ks{1, 3, 5};
  std::string out;
};

int cmd_evaluate(CLI::App* sub, EvaluateArgs& args) {
  const Dataset data = load_dataset_dir(args.data);
  const FoldIndices fold = read_fold(args.folds, args.fold);
  if (!fs::exists(args.model)) {
    throw UsageError("model file not found: " + args.model);
  }
  const TrainedRanker ranker = load_ranker(args.model);
  std::vector<TruncationLevel> ks;
  for (int k : args.ks) ks.emplace_back(k);
  const EvalReport report = evaluate_ndcg(score_fold(data, fold, ranker), ks);
  fs::create_directories(args.out);
  write_report_csv(report, args.out + "/report.csv", fold.seed);
  const std::string summary = format_summary(report, method_name(ranker.method));
  {
    std::ofstream out(args.out + "/summary.txt", std::ios::binary);
    out << summary;
  }
  write_resolved_config(sub, args.out);
  std::cout << summary;
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::string a;
  std::string b;
  std::string out;
};

int cmd_compare(CLI::App* /*sub*/, CompareArgs& args) {
  const EvalReport ra = read_report_csv(args.a);
  const EvalReport rb = read_report_csv(args.b);
  std::map<int, std::size_t> b_index;
  for (std::size_t i = 0; i < rb.rows.size(); ++i) b_index[rb.rows[i].user] = i;

  std::ostringstream out;
  out << "a: " << args.a << "\nb: " << args.b << "\n";
  for (std::size_t ka = 0; ka < ra.ks.size(); ++ka) {
    const auto kb_it = std::find(rb.ks.begin(), rb.ks.end(), ra.ks[ka]);
    if (kb_it == rb.ks.end()) continue;
    const std::size_t kb = static_cast<std::size_t>(kb_it - rb.ks.begin());
    std::vector<double> va;
    std::vector<double> vb;
    for (const auto& row : ra.rows) {
      const auto it = b_index.find(row.user);
      if (it == b_index.end()) continue;
      va.push_back(row.ndcg[ka]);
      vb.push_back(rb.rows[it->second].ndcg[kb]);
    }
    if (va.empty()) continue;
    const Comparison c = compare_per_unit(va, vb);
    const char* marker = c.p_value < 0.05 ? (c.wins > c.losses ? "(+)" : "(-)") : "(=)";
    char line[160];
    std::snprintf(line, sizeof(line),
                  "NDCG@%d: wins=%d losses=%d ties=%d p=%.6f %s\n", ra.ks[ka], c.wins,
                  c.losses, c.ties, c.p_value, marker);
    out << line;
  }
  std::cout << out.str();
  if (!args.out.empty()) {
    fs::create_directories(fs::path(args.out).parent_path().string().empty()
                               ? "."
                               : fs::path(args.out).parent_path().string());
    std::ofstream f(args.out, std::ios::binary);
    f << out.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gridsearch

struct GridArgs {
  std::string data;
  std::string folds;
  int fold = 0;
  std::string method = "lm-mf-reg";
  std::vector<double> grid{0.1, 1.0, 5.0, 7.0, 10.0};
  int inner_folds = 3;
  double eta = 0.01;
  int max_trees = 1000;
  int patience = 200;
  int truncation = 5;
  int max_leaves = 3;
  double min_leaf_fraction = 0.1;
  int rank = 0;
  int k_neighbors = 5;
  double valid_fraction = 0.1;
  int jobs = 1;
  std::uint64_t seed = 42;
  std::string out;
};

struct GridTask {
  std::size_t cell = 0;
  int fold = 0;
};

int cmd_gridsearch(CLI::App* sub, GridArgs& args) {
  const auto method = method_from_name(args.method);
  if (!method || (*method != Method::LMW && *method != Method::LMMFReg)) {
    throw UsageError("gridsearch applies to lmw and lm-mf-reg only");
  }
  if (args.inner_folds < 2) throw UsageError("--inner-folds must be >= 2");
  const Dataset data = load_dataset_dir(args.data);
  const FoldIndices fold = read_fold(args.folds, args.fold);

  std::vector<GridCell> cells;
  for (double mu1 : args.grid) {
    for (double mu2 : args.grid) cells.push_back({mu1, mu2});
  }

  // inner cross-validation folds over the training users; cells and folds may
  // run concurrently, each with a seed derived from (seed, cell, fold)
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(args.inner_folds));
  {
    std::vector<int> users = fold.train_users;
    Rng rng(derive_seed(args.seed, "gridsearch-folds"));
    rng.shuffle(users);
    for (std::size_t i = 0; i < users.size(); ++i) {
      groups[i % groups.size()].push_back(users[i]);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
  }
  std::vector<char> in_group(data.users.n_entities(), 0);
  const auto make_inner_fold = [&](int held_out) {
    FoldIndices inner;
    inner.kind = SplitKind::UserColdStart;
    inner.seed = derive_seed(args.seed, "gridsearch-inner", static_cast<std::uint64_t>(held_out));
    inner.test_users = groups[static_cast<std::size_t>(held_out)];
    for (int g = 0; g < args.inner_folds; ++g) {
      if (g == held_out) continue;
      inner.train_users.insert(inner.train_users.end(), groups[static_cast<std::size_t>(g)].begin(),
                               groups[static_cast<std::size_t>(g)].end());
    }
    std::sort(inner.train_users.begin(), inner.train_users.end());
    inner.train_items = fold.train_items;
    inner.test_items = fold.train_items;
    std::fill(in_group.begin(), in_group.end(), 0);
    for (int u : inner.test_users) in_group[static_cast<std::size_t>(u)] = 1;
    for (const Entry& e : fold.train_cells) {
      (in_group[static_cast<std::size_t>(e.user)] ? inner.test_cells : inner.train_cells)
          .push_back(e);
    }
    return inner;
  };

  fs::create_directories(args.out);
  const std::string grid_path = args.out + "/grid.csv";

  // resumable: (cell, fold) scores already in grid.csv are kept
  std::map<std::pair<std::size_t, int>, double> done;
  if (fs::exists(grid_path)) {
    std::ifstream in(grid_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("mu1,", 0) == 0) continue;
      const auto fields = csv_split(line);
      if (fields.size() != 4) continue;
      const double mu1 = parse_double_or_throw(fields[0], grid_path);
      const double mu2 = parse_double_or_throw(fields[1], grid_path);
      const int inner_fold = static_cast<int>(parse_int_or_throw(fields[2], grid_path));
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        if (cells[ci].mu1 == mu1 && cells[ci].mu2 == mu2) {
          done[{ci, inner_fold}] = parse_double_or_throw(fields[3], grid_path);
          break;
        }
      }
    }
    std::cout << "resuming: " << done.size() << " of " << cells.size() * static_cast<std::size_t>(args.inner_folds)
              << " grid evaluations already present\n";
  }

  std::vector<GridTask> tasks;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (int f = 0; f < args.inner_folds; ++f) {
      if (done.find({ci, f}) == done.end()) tasks.push_back({ci, f});
    }
  }

  std::vector<FoldIndices> inner_folds;
  inner_folds.reserve(static_cast<std::size_t>(args.inner_folds));
  for (int f = 0; f < args.inner_folds; ++f) inner_folds.push_back(make_inner_fold(f));

  const auto score_task = [&](const GridTask& task) {
    TrainArgs targs;
    targs.eta = args.eta;
    targs.max_trees = args.max_trees;
    targs.patience = args.patience;
    targs.truncation = args.truncation;
    targs.max_leaves = args.max_leaves;
    targs.min_leaf_fraction = args.min_leaf_fraction;
    targs.rank = args.rank;
    targs.k_neighbors = args.k_neighbors;
    targs.valid_fraction = args.valid_fraction;
    targs.mu1 = cells[task.cell].mu1;
    targs.mu2 = cells[task.cell].mu2;
    targs.seed = derive_seed(args.seed, "grid", task.cell, static_cast<std::uint64_t>(task.fold));
    const TrainOptions opts = to_train_options(targs, *method);
    const FoldIndices& inner = inner_folds[static_cast<std::size_t>(task.fold)];
    const TrainedRanker ranker = train_on_fold(data, inner, *method, opts);
    const std::vector<TruncationLevel> ks{TruncationLevel(args.truncation)};
    return evaluate_ndcg(score_fold(data, inner, ranker), ks).mean[0];
  };

  std::vector<double> task_scores(tasks.size(), 0.0);
  const int jobs = std::max(1, args.jobs);
  if (jobs == 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) task_scores[t] = score_task(tasks[t]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        while (true) {
          const std::size_t t = next.fetch_add(1);
          if (t >= tasks.size()) break;
          task_scores[t] = score_task(tasks[t]);
        }
      });
    }
    for (std::thread& w : workers) w.join();
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    done[{tasks[t].cell, tasks[t].fold}] = task_scores[t];
  }

  {
    std::ofstream out(grid_path, std::ios::binary);
    out << "# seed=" << args.seed << "\nmu1,mu2,fold,ndcg\n";
    for (const auto& [key, score] : done) {
      out << double_to_string(cells[key.first].mu1) << ',' << double_to_string(cells[key.first].mu2)
          << ',' << key.second << ',' << double_to_string(score) << "\n";
    }
  }

  // aggregate, pick the best cell (ties to the smaller mu1, then mu2)
  std::size_t best = 0;
  std::vector<double> means(cells.size(), 0.0);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    double sum = 0.0;
    for (int f = 0; f < args.inner_folds; ++f) sum += done.at({ci, f});
    means[ci] = sum / static_cast<double>(args.inner_folds);
    const bool better = means[ci] > means[best] ||
                        (means[ci] == means[best] &&
                         (cells[ci].mu1 < cells[best].mu1 ||
                          (cells[ci].mu1 == cells[best].mu1 && cells[ci].mu2 < cells[best].mu2)));
    if (ci == 0 || better) best = ci;
  }
  {
    std::ofstream out(args.out + "/grid_summary.csv", std::ios::binary);
    out << "# seed=" << args.seed << "\nmu1,mu2,mean_ndcg\n";
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      out << double_to_string(cells[ci].mu1) << ',' << double_to_string(cells[ci].mu2) << ','
          << double_to_string(means[ci]) << "\n";
    }
  }
  {
    nlohmann::json bestj{{"mu1", cells[best].mu1},
                         {"mu2", cells[best].mu2},
                         {"mean_ndcg", means[best]},
                         {"method", args.method},
                         {"seed", args.seed}};
    std::ofstream out(args.out + "/best.json", std::ios::binary);
    out << bestj.dump(2) << "\n";
  }
  write_resolved_config(sub, args.out);
  std::cout << "best cell: mu1=" << cells[best].mu1 << " mu2=" << cells[best].mu2
            << " mean NDCG@" << args.truncation << "=" << means[best] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankforge: LambdaMART and factorized variants for cold-start recommendation"};
  app.set_config("--config", "", "read options from an INI config file");
  app.require_subcommand(1);

  IngestArgs ingest_args;
  CLI::App* ingest =
      app.add_subcommand("ingest", "load a dataset and write the canonical directory");
  ingest->configurable()->fallthrough();
  ingest->add_option("--dataset", ingest_args.dataset, "ml100k, ml1m or generic")
      ->capture_default_str();
  ingest->add_option("--path", ingest_args.path, "dataset directory (default: RANKFORGE_DATA)")
      ->capture_default_str();
  ingest->add_option("--ratings", ingest_args.ratings, "generic ratings csv")->capture_default_str();
  ingest->add_option("--user-features", ingest_args.user_features, "generic user features csv")
      ->capture_default_str();
  ingest->add_option("--item-features", ingest_args.item_features, "generic item features csv")
      ->capture_default_str();
  ingest->add_option("--rescale", ingest_args.rescale, "linear score rescale SRC:DST")
      ->capture_default_str();
  ingest->add_option("--out", ingest_args.out, "output dataset directory")
      ->required()
      ->capture_default_str();

  SplitArgs split_args;
  CLI::App* split = app.add_subcommand("split", "write evaluation folds");
  split->configurable()->fallthrough();
  split->add_option("--data", split_args.data, "dataset directory")->required()->capture_default_str();
  split->add_option("--kind", split_args.kind,
                    "matrix-completion, user-cold-start or full-cold-start")
      ->capture_default_str();
  split->add_option("--train-items", split_args.train_items,
                    "matrix completion: training items per user")
      ->capture_default_str();
  split->add_option("--valid-items", split_args.valid_items,
                    "matrix completion: validation items per user")
      ->capture_default_str();
  split->add_option("--mode", split_args.mode, "cold start user folds: loo or fraction")
      ->capture_default_str();
  split->add_option("--fraction", split_args.fraction, "training user fraction")
      ->capture_default_str();
  split->add_option("--item-fraction", split_args.item_fraction,
                    "full cold start: training item fraction")
      ->capture_default_str();
  split->add_option("--seed", split_args.seed, "split seed")->capture_default_str();
  split->add_option("--out", split_args.out, "fold output directory")->required()->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a method on one fold");
  train->configurable()->fallthrough();
  train->add_option("--data", train_args.data, "dataset directory")->required()->capture_default_str();
  train->add_option("--folds", train_args.folds, "folds directory")->required()->capture_default_str();
  train->add_option("--fold", train_args.fold, "fold index")->capture_default_str();
  train->add_option("--method", train_args.method, "lm, lmw, lm-mf, lm-mf-reg, ub or fb")
      ->capture_default_str();
  train->add_option("--eta", train_args.eta, "learning rate")->capture_default_str();
  train->add_option("--max-trees", train_args.max_trees, "tree budget")->capture_default_str();
  train->add_option("--patience", train_args.patience, "early stopping patience")
      ->capture_default_str();
  train->add_option("--sigmoid-scale", train_args.sigmoid_scale, "pairwise logistic scale")
      ->capture_default_str();
  train->add_option("--truncation", train_args.truncation, "NDCG truncation level")
      ->capture_default_str();
  train->add_option("--max-leaves", train_args.max_leaves, "maximum leaves per tree")
      ->capture_default_str();
  train->add_option("--min-leaf-fraction", train_args.min_leaf_fraction,
                    "minimum fraction of rows per leaf")
      ->capture_default_str();
  train->add_option("--rank", train_args.rank,
                    "latent dimension (0 = min of train users/items); lm-mf and lm-mf-reg")
      ->capture_default_str();
  train->add_option("--mu1", train_args.mu1, "input-space regularization weight")
      ->capture_default_str();
  train->add_option("--mu2", train_args.mu2, "output-space regularization weight")
      ->capture_default_str();
  train->add_option("--k-neighbors", train_args.k_neighbors,
                    "neighborhood size for baselines and Laplacians")
      ->capture_default_str();
  train->add_option("--valid-fraction", train_args.valid_fraction,
                    "training users carved out for early stopping (cold start)")
      ->capture_default_str();
  train->add_option("--seed", train_args.seed, "run seed")->capture_default_str();
  train->add_option("--dump-similarities", train_args.dump_similarities,
                    "directory for similarity matrix CSV dumps")
      ->capture_default_str();
  train->add_option("--out", train_args.out, "run output directory")->required()->capture_default_str();

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a model on a fold's test units");
  evaluate->configurable()->fallthrough();
  evaluate->add_option("--data", eval_args.data, "dataset directory")->required()->capture_default_str();
  evaluate->add_option("--folds", eval_args.folds, "folds directory")->required()->capture_default_str();
  evaluate->add_option("--fold", eval_args.fold, "fold index")->capture_default_str();
  evaluate->add_option("--model", eval_args.model, "model.json path")->required()->capture_default_str();
  evaluate->add_option("--ks", eval_args.ks, "truncation levels")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--out", eval_args.out, "report output directory")
      ->required()
      ->capture_default_str();

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "win/loss comparison of two reports");
  compare->configurable()->fallthrough();
  compare->add_option("--a", compare_args.a, "first report.csv")->required();
  compare->add_option("--b", compare_args.b, "second report.csv")->required();
  compare->add_option("--out", compare_args.out, "comparison output file");

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand("gridsearch", "inner-CV grid search over (mu1, mu2)");
  grid->configurable()->fallthrough();
  grid->add_option("--data", grid_args.data, "dataset directory")->required()->capture_default_str();
  grid->add_option("--folds", grid_args.folds, "folds directory")->required()->capture_default_str();
  grid->add_option("--fold", grid_args.fold, "fold index")->capture_default_str();
  grid->add_option("--method", grid_args.method, "lmw or lm-mf-reg")->capture_default_str();
  grid->add_option("--grid", grid_args.grid, "mu values; the grid is their cross product")
      ->delimiter(',')
      ->capture_default_str();
  grid->add_option("--inner-folds", grid_args.inner_folds, "inner CV fold count")
      ->capture_default_str();
  grid->add_option("--eta", grid_args.eta, "learning rate")->capture_default_str();
  grid->add_option("--max-trees", grid_args.max_trees, "tree budget per cell")
      ->capture_default_str();
  grid->add_option("--patience", grid_args.patience, "early stopping patience")
      ->capture_default_str();
  grid->add_option("--truncation", grid_args.truncation, "NDCG truncation level")
      ->capture_default_str();
  grid->add_option("--max-leaves", grid_args.max_leaves, "maximum leaves per tree")
      ->capture_default_str();
  grid->add_option("--min-leaf-fraction", grid_args.min_leaf_fraction,
                   "minimum fraction of rows per leaf")
      ->capture_default_str();
  grid->add_option("--rank", grid_args.rank, "latent dimension (0 = auto)")
      ->capture_default_str();
  grid->add_option("--k-neighbors", grid_args.k_neighbors, "neighborhood size")
      ->capture_default_str();
  grid->add_option("--valid-fraction", grid_args.valid_fraction,
                   "early-stopping carve fraction")
      ->capture_default_str();
  grid->add_option("--jobs", grid_args.jobs, "worker threads over (cell, fold) tasks")
      ->capture_default_str();
  grid->add_option("--seed", grid_args.seed, "base seed")->capture_default_str();
  grid->add_option("--out", grid_args.out, "grid output directory")->required()->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest, ingest_args);
    if (split->parsed()) return cmd_split(split, split_args);
    if (train->parsed()) return cmd_train(train, train_args);
    if (evaluate->parsed()) return cmd_evaluate(evaluate, eval_args);
    if (compare->parsed()) return cmd_compare(compare, compare_args);
    if (grid->parsed()) return cmd_gridsearch(grid, grid_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
