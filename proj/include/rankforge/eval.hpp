#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankforge/baselines.hpp"
#include "rankforge/boosting.hpp"
#include "rankforge/core.hpp"
#include "rankforge/metrics.hpp"

namespace rankforge {

enum class SplitKind { MatrixCompletion, UserColdStart, FullColdStart };

struct SplitSpec {
  SplitKind kind = SplitKind::UserColdStart;
  int train_items_per_user = 15;  // matrix completion: N
  int valid_items_per_user = 10;  // matrix completion holdout for early stopping
  bool leave_one_out = false;     // cold start user folds
  double user_fraction = 0.5;     // cold start, when not leave-one-out
  double item_fraction = 0.5;     // full cold start item partition
  std::uint64_t seed = 0;
};

// One evaluation fold. Cell lists are expressed in the dataset's global
// indices; together the train/valid/test cells of a fold never overlap.
struct FoldIndices {
  SplitKind kind = SplitKind::UserColdStart;
  std::uint64_t seed = 0;
  std::vector<int> train_users;
  std::vector<int> test_users;
  std::vector<int> train_items;
  std::vector<int> test_items;
  std::vector<Entry> train_cells;
  std::vector<Entry> valid_cells;  // matrix completion only
  std::vector<Entry> test_cells;
};

// Matrix completion: per user, n_train random observed items for training,
// n_valid disjoint ones for validation, the rest for testing. Every user must
// have at least n_train + n_valid + 1 observed items.
FoldIndices split_matrix_completion(const PreferenceMatrix& prefs, int n_train, int n_valid,
                                    std::uint64_t seed);

// User cold start: leave-one-out produces one fold per user; otherwise a
// single fold with floor(n * fraction) training users.
std::vector<FoldIndices> split_user_cold_start(const PreferenceMatrix& prefs, bool leave_one_out,
                                               double fraction, std::uint64_t seed);

// Full cold start: user folds as above plus a per-fold random item partition
// with floor(m * item_fraction) training items. Training sees only observed
// (train user, train item) cells; testing evaluates held-out users on test
// items only.
std::vector<FoldIndices> split_full_cold_start(const PreferenceMatrix& prefs, bool leave_one_out,
                                               double user_fraction, double item_fraction,
                                               std::uint64_t seed);

// Compacted training view of a fold: local user/item index spaces with the
// matching descriptor rows. Users without any observed cell in the slice are
// dropped (position in user_ids/item_ids = local index).
struct Slice {
  std::vector<int> user_ids;
  std::vector<int> item_ids;
  PreferenceMatrix prefs;
  EntityFeatures users;
  EntityFeatures items;
};

Slice make_slice(const Dataset& data, std::span<const int> users, std::span<const int> items,
                 std::span<const Entry> cells);

// Labeled predictions of one evaluation unit.
struct UserScores {
  int user = 0;
  std::vector<double> labels;
  std::vector<double> scores;
};

struct EvalReport {
  struct Row {
    int user = 0;
    int n_items = 0;
    std::vector<double> ndcg;  // one value per truncation level
  };
  std::vector<int> ks;
  std::vector<Row> rows;
  std::vector<double> mean;  // one value per truncation level
  int n_skipped = 0;         // units with zero test items
};

EvalReport evaluate_ndcg(const std::vector<UserScores>& units,
                         std::span<const TruncationLevel> ks);

// Continuity-corrected McNemar test: chi-square statistic
// (|wins - losses| - 1)^2 / (wins + losses) with the correction clamped so the
// statistic is never negative, upper tail at 1 degree of freedom.
double mcnemar_pvalue(int wins, int losses);

struct Comparison {
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;
};

// Per-unit comparison of paired metric values (a vs b); equal values tie.
Comparison compare_per_unit(std::span<const double> a, std::span<const double> b);

struct GridCell {
  double mu1 = 0.0;
  double mu2 = 0.0;
};

struct GridResult {
  GridCell best;
  std::vector<double> mean_scores;  // one per cell, fold average
};

// Scores every (cell, fold) via the callback and picks the cell with the best
// mean score; ties resolve to the smaller mu1, then smaller mu2. The callback
// seed is derived from (base_seed, cell index, fold index).
GridResult grid_search(std::span<const GridCell> cells, int n_folds,
                       const std::function<double(GridCell, int, std::uint64_t)>& score_cell,
                       std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Protocol harness shared by the CLI and the acceptance suite.

enum class Method { LM, LMW, LMMF, LMMFReg, UB, FB };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct TrainOptions {
  BoostParams boost;
  NeighborQuery neighbors;
  // fraction of training users carved out as the early-stopping validation
  // set in cold-start folds (matrix completion folds carry explicit masks)
  double valid_user_fraction = 0.1;
  int similarity_k_neighbors = 5;
  // optional directory for similarity matrix CSV dumps
  std::string dump_similarity_dir;
};

struct TrainedRanker {
  Method method = Method::LM;
  std::optional<ScorerModel> scorer;
  std::optional<FactorModel> factor;
  NeighborQuery neighbors;
};

// Trains one method on a fold: slices the training data, builds similarity
// graphs where the method needs them, carves the early-stopping validation
// set, and runs the boosting loop. UB/FB need no training and return the
// neighbor query only.
TrainedRanker train_on_fold(const Dataset& data, const FoldIndices& fold, Method method,
                            const TrainOptions& opts, std::vector<TrainLogRow>* log = nullptr);

// Scores the fold's test units with a trained ranker.
std::vector<UserScores> score_fold(const Dataset& data, const FoldIndices& fold,
                                   const TrainedRanker& ranker);

void save_ranker(const TrainedRanker& ranker, const std::string& path);
TrainedRanker load_ranker(const std::string& path);

// Report files: per-unit CSV rows and a plain-text summary table.
void write_report_csv(const EvalReport& report, const std::string& path, std::uint64_t seed);
EvalReport read_report_csv(const std::string& path);
std::string format_summary(const EvalReport& report, const std::string& method);

}  // namespace rankforge
