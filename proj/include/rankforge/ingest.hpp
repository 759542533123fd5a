#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rankforge/core.hpp"

namespace rankforge {

struct RawRating {
  int user = 0;
  int item = 0;
  double score = 0.0;
};

// Loader output: original ids mapped to dense 0-based indices (assigned by
// ascending original id, numeric-aware), ratings over those indices, and raw
// attribute tables kept as strings until encoding.
struct RawDataset {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<RawRating> ratings;  // sorted by (user, item)
  std::vector<std::string> user_columns;
  std::vector<std::vector<std::string>> user_attrs;  // [user][column]
  std::vector<std::string> item_columns;
  std::vector<std::vector<std::string>> item_attrs;
};

// MovieLens 100K: u.data (tab-separated user, item, rating 1-5, timestamp),
// u.user (id|age|gender|occupation|zip), u.item (pipe-separated, 19 trailing
// binary genre flags). Timestamps are parsed and discarded.
RawDataset load_movielens_100k(const std::string& dir);

// MovieLens 1M: "::"-separated ratings.dat / users.dat / movies.dat; genre
// names mapped onto the 19-flag space (18 named genres plus unknown).
RawDataset load_movielens_1m(const std::string& dir);

// Generic CSV triple with mandatory header rows; ratings columns must be
// (user_id, item_id, score), an optional trailing timestamp is ignored.
RawDataset load_generic(const std::string& ratings_csv, const std::string& users_csv,
                        const std::string& items_csv);

enum class ColumnKind {
  Numeric,             // parsed as a double, passed through
  Categorical,         // one-of-N over the category list plus a reserved "other"
  CategoricalClosed,   // one-of-N, unseen values are an error
  AgeBucket,           // fixed 7-bucket age scheme
  ZipBucket,           // zip first character: 10 digit buckets plus "other"
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  // categorical kinds: fixed category list; empty = derive from the data
  std::vector<std::string> categories;
};

struct FeatureSchema {
  std::vector<ColumnSpec> user_columns;
  std::vector<ColumnSpec> item_columns;
};

// Schema for the MovieLens attribute layout (age bucket, closed gender and
// occupation, zip bucket; numeric genre flags).
FeatureSchema movielens_schema(const RawDataset& raw);

// Numeric columns where every value parses as a double, open categorical
// otherwise.
FeatureSchema infer_schema(const RawDataset& raw);

// Fills empty category lists from the data so the schema pins the encoding.
FeatureSchema resolve_schema(const RawDataset& raw, FeatureSchema schema);

// One-of-N / passthrough encoding per the schema; all emitted columns are
// finite, categorical ones are {0,1}.
std::pair<EntityFeatures, EntityFeatures> encode_features(const RawDataset& raw,
                                                          const FeatureSchema& schema);

PreferenceMatrix preference_matrix(const RawDataset& raw);

Dataset make_dataset(const RawDataset& raw, const FeatureSchema& schema);

// Linear score rescale y * dst_max / src_max; order preserving.
PreferenceMatrix rescale_scores(const PreferenceMatrix& prefs, double src_max, double dst_max);

// Writes ratings.csv / user_features.csv / item_features.csv under dir;
// reloading with load_generic reproduces the dataset exactly.
void export_generic(const RawDataset& raw, const std::string& dir);

void save_schema(const FeatureSchema& schema, const std::string& path);
FeatureSchema load_schema(const std::string& path);

}  // namespace rankforge
