#include <doctest.h>

#include <stdexcept>

#include <vector>

#include "rankforge/baselines.hpp"
#include "rankforge/rng.hpp"

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

}  // namespace

TEST_CASE("nearest neighbors break ties by index") {
  const EntityFeatures rows = features_from({{1.0}, {1.0}, {1.0}, {5.0}});
  CHECK(nearest_neighbors(std::vector<double>{1.0}, rows, 2) == std::vector<int>{0, 1});
  CHECK(nearest_neighbors(std::vector<double>{5.0}, rows, 1) == std::vector<int>{3});
  // fewer candidates than k
  CHECK(nearest_neighbors(std::vector<double>{1.0}, rows, 10).size() == 4);
}

TEST_CASE("user memory scores") {
  // 5 training users, all neighbors of the query
  std::vector<Entry> entries;
  for (int u = 0; u < 5; ++u) entries.push_back({u, 0, 4.0});
  entries.push_back({0, 1, 2.0});
  entries.push_back({1, 1, 4.0});
  // item 2 rated by nobody
  const PreferenceMatrix train(5, 3, entries);
  const EntityFeatures feats = features_from({{0.0}, {0.1}, {0.2}, {0.3}, {0.4}});
  const std::vector<double> scores =
      user_memory_scores(std::vector<double>{0.2}, train, feats, NeighborQuery{5});
  CHECK(scores[0] == doctest::Approx(4.0));
  CHECK(scores[1] == doctest::Approx(3.0));  // mean over the observing neighbors only
  CHECK(scores[2] == 0.0);
}

TEST_CASE("full memory score averages the observed cross product") {
  // 5 x 5 grid, every cell observed with score 5
  std::vector<Entry> entries;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) entries.push_back({u, i, 5.0});
  }
  std::vector<std::vector<double>> ufeat;
  std::vector<std::vector<double>> ifeat;
  for (int k = 0; k < 5; ++k) {
    ufeat.push_back({0.1 * k});
    ifeat.push_back({0.1 * k});
  }
  const PreferenceMatrix train(5, 5, entries);
  const EntityFeatures users = features_from(ufeat);
  const EntityFeatures items = features_from(ifeat);
  CHECK(full_memory_score(std::vector<double>{0.2}, std::vector<double>{0.2}, train, users,
                          items, NeighborQuery{5}) == doctest::Approx(5.0));

  // mixed observations: 12 cells at 1.0, 13 cells at 3.0
  std::vector<Entry> mixed;
  int count = 0;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) {
      mixed.push_back({u, i, count < 12 ? 1.0 : 3.0});
      ++count;
    }
  }
  const PreferenceMatrix train2(5, 5, mixed);
  CHECK(full_memory_score(std::vector<double>{0.2}, std::vector<double>{0.2}, train2, users,
                          items, NeighborQuery{5}) == doctest::Approx(2.04));

  // empty observed cross product
  std::vector<Entry> sparse;
  for (int u = 0; u < 5; ++u) sparse.push_back({u, u, 2.0});
  const PreferenceMatrix train3(5, 6, sparse);
  const EntityFeatures items6 =
      features_from({{0.0}, {0.1}, {0.2}, {0.3}, {0.4}, {9.0}});
  // item neighborhood of the far item with k=1 is {5}, rated by nobody
  CHECK(full_memory_score(std::vector<double>{0.0}, std::vector<double>{9.0}, train3, users,
                          items6, NeighborQuery{1}) == 0.0);
}

TEST_CASE("memory scores stay within the observed range") {
  Rng rng(509);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + rng.below_int(5);
    const int m = 5 + rng.below_int(5);
    std::vector<Entry> entries;
    double lo = 1e9;
    double hi = -1e9;
    std::vector<std::vector<double>> ufeat;
    for (int u = 0; u < n; ++u) {
      ufeat.push_back({rng.uniform(0.0, 1.0)});
      for (int i = 0; i < m; ++i) {
        if (rng.next_double() < 0.6) {
          const double s = static_cast<double>(1 + rng.below(5));
          entries.push_back({u, i, s});
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
      }
      if (entries.empty() || entries.back().user != u) entries.push_back({u, 0, 3.0});
    }
    lo = std::min(lo, 3.0);
    hi = std::max(hi, 3.0);
    const PreferenceMatrix train(n, m, entries);
    const EntityFeatures feats = features_from(ufeat);
    const std::vector<double> scores =
        user_memory_scores(std::vector<double>{rng.uniform(0.0, 1.0)}, train, feats,
                           NeighborQuery{5});
    for (double s : scores) {
      if (s != 0.0) {
        CHECK(s >= lo - 1e-12);
        CHECK(s <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("training row permutation leaves baseline outputs unchanged") {
  // same data in two storage orders; the preference matrix normalizes order
  std::vector<Entry> entries{{0, 0, 1.0}, {1, 0, 2.0}, {2, 0, 3.0}, {2, 1, 4.0}};
  std::vector<Entry> shuffled{{2, 1, 4.0}, {0, 0, 1.0}, {2, 0, 3.0}, {1, 0, 2.0}};
  const PreferenceMatrix a(3, 2, entries);
  const PreferenceMatrix b(3, 2, shuffled);
  const EntityFeatures feats = features_from({{0.0}, {1.0}, {2.0}});
  const std::vector<double> q{0.5};
  CHECK(user_memory_scores(q, a, feats, NeighborQuery{2}) ==
        user_memory_scores(q, b, feats, NeighborQuery{2}));
}
