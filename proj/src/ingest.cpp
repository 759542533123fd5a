#include "rankforge/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rankforge/csv.hpp"

namespace rankforge {

namespace {

namespace fs = std::filesystem;

const char* const kGenreNames[19] = {
    "unknown", "Action",    "Adventure", "Animation", "Children's", "Comedy",  "Crime",
    "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
    "Romance", "Sci-Fi",    "Thriller",  "War",       "Western"};

const char* const kAgeBuckets[7] = {"under18", "18-24", "25-34", "35-44",
                                    "45-49",   "50-55", "56+"};

int age_bucket_index(long long age) {
  if (age < 18) return 0;
  if (age <= 24) return 1;
  if (age <= 34) return 2;
  if (age <= 44) return 3;
  if (age <= 49) return 4;
  if (age <= 55) return 5;
  return 6;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_char(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split_double_colon(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find("::", start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
}

// Dense index assignment by ascending original id; numeric order when every id
// parses as an integer, lexicographic otherwise.
std::vector<std::string> sort_ids(std::vector<std::string> ids) {
  bool all_numeric = true;
  for (const std::string& id : ids) {
    long long v = 0;
    if (!try_parse_int(id, v)) {
      all_numeric = false;
      break;
    }
  }
  if (all_numeric) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      long long va = 0;
      long long vb = 0;
      try_parse_int(a, va);
      try_parse_int(b, vb);
      return va < vb;
    });
  } else {
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

struct AttrTable {
  std::vector<std::string> ids;                    // sorted
  std::vector<std::vector<std::string>> attrs;     // aligned with ids
  std::unordered_map<std::string, int> index;
};

AttrTable index_attrs(std::vector<std::pair<std::string, std::vector<std::string>>> rows,
                      const std::string& what) {
  AttrTable table;
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& [id, attrs] : rows) ids.push_back(id);
  table.ids = sort_ids(std::move(ids));
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (!table.index.emplace(table.ids[i], static_cast<int>(i)).second) {
      throw std::runtime_error(what + ": duplicate id " + table.ids[i]);
    }
  }
  table.attrs.resize(table.ids.size());
  for (auto& [id, attrs] : rows) {
    table.attrs[static_cast<std::size_t>(table.index.at(id))] = std::move(attrs);
  }
  return table;
}

void finish_ratings(RawDataset& raw, const std::string& what) {
  std::sort(raw.ratings.begin(), raw.ratings.end(), [](const RawRating& a, const RawRating& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.item < b.item;
  });
  for (std::size_t i = 1; i < raw.ratings.size(); ++i) {
    if (raw.ratings[i].user == raw.ratings[i - 1].user &&
        raw.ratings[i].item == raw.ratings[i - 1].item) {
      throw std::runtime_error(what + ": duplicate rating for (user " +
                               raw.user_ids[static_cast<std::size_t>(raw.ratings[i].user)] +
                               ", item " +
                               raw.item_ids[static_cast<std::size_t>(raw.ratings[i].item)] + ")");
    }
  }
}

int checked_rating(const std::string& field, const std::string& context) {
  const long long r = parse_int_or_throw(field, context);
  if (r < 1 || r > 5) {
    throw std::runtime_error(context + ": rating " + field + " out of range 1-5");
  }
  return static_cast<int>(r);
}

}  // namespace

RawDataset load_movielens_100k(const std::string& dir) {
  RawDataset raw;
  raw.user_columns = {"age", "gender", "occupation", "zip"};
  raw.item_columns.assign(std::begin(kGenreNames), std::end(kGenreNames));

  std::vector<std::pair<std::string, std::vector<std::string>>> user_rows;
  {
    const std::string path = dir + "/u.user";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const auto fields = split_char(lines[ln], '|');
      if (fields.size() != 5) {
        throw std::runtime_error(context + ": expected 5 pipe-separated fields, got " +
                                 std::to_string(fields.size()));
      }
      parse_int_or_throw(fields[0], context);
      parse_int_or_throw(fields[1], context);  // age must be an integer
      user_rows.emplace_back(fields[0],
                             std::vector<std::string>{fields[1], fields[2], fields[3], fields[4]});
    }
  }
  AttrTable users = index_attrs(std::move(user_rows), dir + "/u.user");

  std::vector<std::pair<std::string, std::vector<std::string>>> item_rows;
  {
    const std::string path = dir + "/u.item";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const auto fields = split_char(lines[ln], '|');
      if (fields.size() != 24) {
        throw std::runtime_error(context + ": expected 24 pipe-separated fields, got " +
                                 std::to_string(fields.size()));
      }
      parse_int_or_throw(fields[0], context);
      std::vector<std::string> flags;
      flags.reserve(19);
      for (std::size_t f = 5; f < 24; ++f) {
        if (fields[f] != "0" && fields[f] != "1") {
          throw std::runtime_error(context + ": genre flag must be 0 or 1, got '" + fields[f] +
                                   "'");
        }
        flags.push_back(fields[f]);
      }
      item_rows.emplace_back(fields[0], std::move(flags));
    }
  }
  AttrTable items = index_attrs(std::move(item_rows), dir + "/u.item");

  {
    const std::string path = dir + "/u.data";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const auto fields = split_char(lines[ln], '\t');
      if (fields.size() != 4) {
        throw std::runtime_error(context + ": expected 4 tab-separated fields, got " +
                                 std::to_string(fields.size()));
      }
      const auto user_it = users.index.find(fields[0]);
      if (user_it == users.index.end()) {
        throw std::runtime_error(context + ": unknown user id " + fields[0]);
      }
      const auto item_it = items.index.find(fields[1]);
      if (item_it == items.index.end()) {
        throw std::runtime_error(context + ": unknown item id " + fields[1]);
      }
      const int rating = checked_rating(fields[2], context);
      parse_int_or_throw(fields[3], context);  // timestamp, discarded
      raw.ratings.push_back({user_it->second, item_it->second, static_cast<double>(rating)});
    }
  }

  raw.user_ids = std::move(users.ids);
  raw.user_attrs = std::move(users.attrs);
  raw.item_ids = std::move(items.ids);
  raw.item_attrs = std::move(items.attrs);
  finish_ratings(raw, dir + "/u.data");
  return raw;
}

RawDataset load_movielens_1m(const std::string& dir) {
  RawDataset raw;
  raw.user_columns = {"age", "gender", "occupation", "zip"};
  raw.item_columns.assign(std::begin(kGenreNames), std::end(kGenreNames));

  std::unordered_map<std::string, int> genre_index;
  for (int g = 0; g < 19; ++g) genre_index.emplace(kGenreNames[g], g);

  std::vector<std::pair<std::string, std::vector<std::string>>> user_rows;
  {
    const std::string path = dir + "/users.dat";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const auto fields = split_double_colon(lines[ln]);
      if (fields.size() != 5) {
        throw std::runtime_error(context + ": expected 5 ::-separated fields, got " +
                                 std::to_string(fields.size()));
      }
      parse_int_or_throw(fields[0], context);
      parse_int_or_throw(fields[2], context);  // age code
      // users.dat order is (gender, age, occupation, zip); the shared column
      // layout is (age, gender, occupation, zip)
      user_rows.emplace_back(fields[0],
                             std::vector<std::string>{fields[2], fields[1], fields[3], fields[4]});
    }
  }
  AttrTable users = index_attrs(std::move(user_rows), dir + "/users.dat");

  std::vector<std::pair<std::string, std::vector<std::string>>> item_rows;
  {
    const std::string path = dir + "/movies.dat";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const std::string& line = lines[ln];
      // Titles may in principle contain "::"; split at the first and the last
      // separator so the id and the genre list are always clean.
      const std::size_t first = line.find("::");
      const std::size_t last = line.rfind("::");
      if (first == std::string::npos || last == first) {
        throw std::runtime_error(context + ": expected id::title::genres");
      }
      const std::string id = line.substr(0, first);
      const std::string genres = line.substr(last + 2);
      parse_int_or_throw(id, context);
      std::vector<std::string> flags(19, "0");
      for (const std::string& name : split_char(genres, '|')) {
        const auto it = genre_index.find(name);
        if (it == genre_index.end()) {
          throw std::runtime_error(context + ": unknown genre '" + name + "'");
        }
        flags[static_cast<std::size_t>(it->second)] = "1";
      }
      item_rows.emplace_back(id, std::move(flags));
    }
  }
  AttrTable items = index_attrs(std::move(item_rows), dir + "/movies.dat");

  {
    const std::string path = dir + "/ratings.dat";
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const std::string context = path + ":" + std::to_string(ln + 1);
      const auto fields = split_double_colon(lines[ln]);
      if (fields.size() != 4) {
        throw std::runtime_error(context + ": expected 4 ::-separated fields, got " +
                                 std::to_string(fields.size()));
      }
      const auto user_it = users.index.find(fields[0]);
      if (user_it == users.index.end()) {
        throw std::runtime_error(context + ": unknown user id " + fields[0]);
      }
      const auto item_it = items.index.find(fields[1]);
      if (item_it == items.index.end()) {
        throw std::runtime_error(context + ": unknown item id " + fields[1]);
      }
      const int rating = checked_rating(fields[2], context);
      parse_int_or_throw(fields[3], context);
      raw.ratings.push_back({user_it->second, item_it->second, static_cast<double>(rating)});
    }
  }

  raw.user_ids = std::move(users.ids);
  raw.user_attrs = std::move(users.attrs);
  raw.item_ids = std::move(items.ids);
  raw.item_attrs = std::move(items.attrs);
  finish_ratings(raw, dir + "/ratings.dat");
  return raw;
}

namespace {

AttrTable load_feature_csv(const std::string& path, std::vector<std::string>& columns) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw std::runtime_error(path + ": missing header row");
  }
  const std::vector<std::string> header = csv_split(lines[0]);
  if (header.empty() || header[0].empty()) {
    throw std::runtime_error(path + ": header must start with the id column");
  }
  columns.assign(header.begin() + 1, header.end());
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string context = path + ":" + std::to_string(ln + 1);
    auto fields = csv_split(lines[ln]);
    if (fields.size() != header.size()) {
      throw std::runtime_error(context + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(fields.size()));
    }
    std::vector<std::string> attrs(fields.begin() + 1, fields.end());
    rows.emplace_back(std::move(fields[0]), std::move(attrs));
  }
  if (rows.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  return index_attrs(std::move(rows), path);
}

}  // namespace

RawDataset load_generic(const std::string& ratings_csv, const std::string& users_csv,
                        const std::string& items_csv) {
  RawDataset raw;
  AttrTable users = load_feature_csv(users_csv, raw.user_columns);
  AttrTable items = load_feature_csv(items_csv, raw.item_columns);

  const std::vector<std::string> lines = read_lines(ratings_csv);
  if (lines.empty()) {
    throw std::runtime_error(ratings_csv + ": missing header row");
  }
  const std::vector<std::string> header = csv_split(lines[0]);
  if (header.size() < 3 || header[0] != "user_id" || header[1] != "item_id" ||
      header[2] != "score") {
    throw std::runtime_error(ratings_csv + ": header must start with user_id,item_id,score");
  }
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string context = ratings_csv + ":" + std::to_string(ln + 1);
    const auto fields = csv_split(lines[ln]);
    if (fields.size() < 3) {
      throw std::runtime_error(context + ": expected at least 3 fields");
    }
    const auto user_it = users.index.find(fields[0]);
    if (user_it == users.index.end()) {
      throw std::runtime_error(context + ": unknown user id " + fields[0]);
    }
    const auto item_it = items.index.find(fields[1]);
    if (item_it == items.index.end()) {
      throw std::runtime_error(context + ": unknown item id " + fields[1]);
    }
    const double score = parse_double_or_throw(fields[2], context);
    if (!std::isfinite(score) || score < 0.0) {
      throw std::runtime_error(context + ": score must be finite and non-negative");
    }
    raw.ratings.push_back({user_it->second, item_it->second, score});
  }

  raw.user_ids = std::move(users.ids);
  raw.user_attrs = std::move(users.attrs);
  raw.item_ids = std::move(items.ids);
  raw.item_attrs = std::move(items.attrs);
  finish_ratings(raw, ratings_csv);
  return raw;
}

FeatureSchema movielens_schema(const RawDataset& raw) {
  FeatureSchema schema;
  schema.user_columns = {{"age", ColumnKind::AgeBucket, {}},
                         {"gender", ColumnKind::CategoricalClosed, {}},
                         {"occupation", ColumnKind::CategoricalClosed, {}},
                         {"zip", ColumnKind::ZipBucket, {}}};
  for (const std::string& genre : raw.item_columns) {
    schema.item_columns.push_back({genre, ColumnKind::Numeric, {}});
  }
  return resolve_schema(raw, std::move(schema));
}

namespace {

bool column_is_numeric(const std::vector<std::vector<std::string>>& attrs, std::size_t col) {
  for (const auto& row : attrs) {
    double v = 0.0;
    if (!try_parse_double(row[col], v) || !std::isfinite(v)) return false;
  }
  return true;
}

std::vector<std::string> observed_categories(const std::vector<std::vector<std::string>>& attrs,
                                             std::size_t col) {
  std::set<std::string> values;
  for (const auto& row : attrs) values.insert(row[col]);
  return {values.begin(), values.end()};
}

void resolve_side(const std::vector<std::string>& columns,
                  const std::vector<std::vector<std::string>>& attrs,
                  std::vector<ColumnSpec>& specs, const char* side) {
  if (specs.size() != columns.size()) {
    throw std::invalid_argument(std::string("schema does not cover all ") + side + " columns");
  }
  for (std::size_t c = 0; c < specs.size(); ++c) {
    if (specs[c].name != columns[c]) {
      throw std::invalid_argument(std::string("schema ") + side + " column '" + specs[c].name +
                                  "' does not match data column '" + columns[c] + "'");
    }
    if ((specs[c].kind == ColumnKind::Categorical ||
         specs[c].kind == ColumnKind::CategoricalClosed) &&
        specs[c].categories.empty()) {
      specs[c].categories = observed_categories(attrs, c);
    }
  }
}

struct SideEncoder {
  std::vector<std::string> names;
  std::size_t width = 0;
};

SideEncoder plan_side(const std::vector<ColumnSpec>& specs) {
  SideEncoder enc;
  for (const ColumnSpec& spec : specs) {
    switch (spec.kind) {
      case ColumnKind::Numeric:
        enc.names.push_back(spec.name);
        break;
      case ColumnKind::Categorical:
        for (const std::string& cat : spec.categories) enc.names.push_back(spec.name + "=" + cat);
        enc.names.push_back(spec.name + "=other");
        break;
      case ColumnKind::CategoricalClosed:
        for (const std::string& cat : spec.categories) enc.names.push_back(spec.name + "=" + cat);
        break;
      case ColumnKind::AgeBucket:
        for (const char* b : kAgeBuckets) enc.names.push_back(spec.name + "=" + b);
        break;
      case ColumnKind::ZipBucket:
        for (char d = '0'; d <= '9'; ++d) enc.names.push_back(spec.name + "=" + d);
        enc.names.push_back(spec.name + "=other");
        break;
    }
  }
  enc.width = enc.names.size();
  return enc;
}

EntityFeatures encode_side(const std::vector<std::vector<std::string>>& attrs,
                           const std::vector<ColumnSpec>& specs, const char* side) {
  const SideEncoder enc = plan_side(specs);
  Matrix m(attrs.size(), enc.width, 0.0);
  std::set<std::string> warned;
  for (std::size_t row = 0; row < attrs.size(); ++row) {
    std::size_t out = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
      const ColumnSpec& spec = specs[c];
      const std::string& value = attrs[row][c];
      const std::string context =
          std::string(side) + " row " + std::to_string(row) + ", column " + spec.name;
      switch (spec.kind) {
        case ColumnKind::Numeric: {
          m(row, out) = parse_double_or_throw(value, context);
          ++out;
          break;
        }
        case ColumnKind::Categorical:
        case ColumnKind::CategoricalClosed: {
          const auto it =
              std::lower_bound(spec.categories.begin(), spec.categories.end(), value);
          const bool found = it != spec.categories.end() && *it == value;
          if (found) {
            m(row, out + static_cast<std::size_t>(it - spec.categories.begin())) = 1.0;
          } else if (spec.kind == ColumnKind::Categorical) {
            m(row, out + spec.categories.size()) = 1.0;
            if (warned.insert(spec.name + "=" + value).second) {
              std::cerr << "encode_features: warning: unseen value '" << value << "' in column "
                        << spec.name << " mapped to the reserved other column\n";
            }
          } else {
            throw std::runtime_error(context + ": value '" + value +
                                     "' not in the closed category set");
          }
          out += spec.categories.size() +
                 (spec.kind == ColumnKind::Categorical ? std::size_t{1} : std::size_t{0});
          break;
        }
        case ColumnKind::AgeBucket: {
          const long long age = parse_int_or_throw(value, context);
          m(row, out + static_cast<std::size_t>(age_bucket_index(age))) = 1.0;
          out += 7;
          break;
        }
        case ColumnKind::ZipBucket: {
          std::size_t bucket = 10;  // other
          if (!value.empty() && value[0] >= '0' && value[0] <= '9') {
            bucket = static_cast<std::size_t>(value[0] - '0');
          }
          m(row, out + bucket) = 1.0;
          out += 11;
          break;
        }
      }
    }
  }
  return EntityFeatures(std::move(m), enc.names);
}

}  // namespace

FeatureSchema infer_schema(const RawDataset& raw) {
  FeatureSchema schema;
  for (std::size_t c = 0; c < raw.user_columns.size(); ++c) {
    schema.user_columns.push_back({raw.user_columns[c],
                                   column_is_numeric(raw.user_attrs, c) ? ColumnKind::Numeric
                                                                        : ColumnKind::Categorical,
                                   {}});
  }
  for (std::size_t c = 0; c < raw.item_columns.size(); ++c) {
    schema.item_columns.push_back({raw.item_columns[c],
                                   column_is_numeric(raw.item_attrs, c) ? ColumnKind::Numeric
                                                                        : ColumnKind::Categorical,
                                   {}});
  }
  return resolve_schema(raw, std::move(schema));
}

FeatureSchema resolve_schema(const RawDataset& raw, FeatureSchema schema) {
  resolve_side(raw.user_columns, raw.user_attrs, schema.user_columns, "user");
  resolve_side(raw.item_columns, raw.item_attrs, schema.item_columns, "item");
  return schema;
}

std::pair<EntityFeatures, EntityFeatures> encode_features(const RawDataset& raw,
                                                          const FeatureSchema& schema) {
  FeatureSchema resolved = resolve_schema(raw, schema);
  return {encode_side(raw.user_attrs, resolved.user_columns, "user"),
          encode_side(raw.item_attrs, resolved.item_columns, "item")};
}

PreferenceMatrix preference_matrix(const RawDataset& raw) {
  std::vector<Entry> entries;
  entries.reserve(raw.ratings.size());
  for (const RawRating& r : raw.ratings) entries.push_back({r.user, r.item, r.score});
  return PreferenceMatrix(static_cast<int>(raw.user_ids.size()),
                          static_cast<int>(raw.item_ids.size()), std::move(entries));
}

Dataset make_dataset(const RawDataset& raw, const FeatureSchema& schema) {
  auto [users, items] = encode_features(raw, schema);
  return Dataset{preference_matrix(raw), std::move(users), std::move(items)};
}

PreferenceMatrix rescale_scores(const PreferenceMatrix& prefs, double src_max, double dst_max) {
  if (!(src_max > 0.0) || !std::isfinite(src_max) || !std::isfinite(dst_max)) {
    throw std::invalid_argument("rescale_scores: src_max must be positive and finite");
  }
  const double factor = dst_max / src_max;
  std::vector<Entry> entries = prefs.entries();
  for (Entry& e : entries) e.score *= factor;
  return PreferenceMatrix(prefs.n_users(), prefs.n_items(), std::move(entries));
}

void export_generic(const RawDataset& raw, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/ratings.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + dir + "/ratings.csv");
    out << "user_id,item_id,score\n";
    for (const RawRating& r : raw.ratings) {
      out << csv_escape(raw.user_ids[static_cast<std::size_t>(r.user)]) << ','
          << csv_escape(raw.item_ids[static_cast<std::size_t>(r.item)]) << ','
          << double_to_string(r.score) << '\n';
    }
  }
  const auto write_features = [&](const std::string& path, const std::string& id_col,
                                  const std::vector<std::string>& ids,
                                  const std::vector<std::string>& columns,
                                  const std::vector<std::vector<std::string>>& attrs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << csv_escape(id_col);
    for (const std::string& col : columns) out << ',' << csv_escape(col);
    out << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << csv_escape(ids[i]);
      for (const std::string& v : attrs[i]) out << ',' << csv_escape(v);
      out << '\n';
    }
  };
  write_features(dir + "/user_features.csv", "user_id", raw.user_ids, raw.user_columns,
                 raw.user_attrs);
  write_features(dir + "/item_features.csv", "item_id", raw.item_ids, raw.item_columns,
                 raw.item_attrs);
}

namespace {

std::string kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::CategoricalClosed: return "categorical_closed";
    case ColumnKind::AgeBucket: return "age_bucket";
    case ColumnKind::ZipBucket: return "zip_bucket";
  }
  return "?";
}

ColumnKind kind_from_name(const std::string& name) {
  if (name == "numeric") return ColumnKind::Numeric;
  if (name == "categorical") return ColumnKind::Categorical;
  if (name == "categorical_closed") return ColumnKind::CategoricalClosed;
  if (name == "age_bucket") return ColumnKind::AgeBucket;
  if (name == "zip_bucket") return ColumnKind::ZipBucket;
  throw std::runtime_error("unknown column kind " + name);
}

nlohmann::json side_to_json(const std::vector<ColumnSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ColumnSpec& spec : specs) {
    arr.push_back({{"name", spec.name},
                   {"kind", kind_name(spec.kind)},
                   {"categories", spec.categories}});
  }
  return arr;
}

std::vector<ColumnSpec> side_from_json(const nlohmann::json& arr) {
  std::vector<ColumnSpec> specs;
  for (const auto& j : arr) {
    specs.push_back({j.at("name").get<std::string>(),
                     kind_from_name(j.at("kind").get<std::string>()),
                     j.at("categories").get<std::vector<std::string>>()});
  }
  return specs;
}

}  // namespace

void save_schema(const FeatureSchema& schema, const std::string& path) {
  nlohmann::json j{{"user_columns", side_to_json(schema.user_columns)},
                   {"item_columns", side_to_json(schema.item_columns)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  return FeatureSchema{side_from_json(j.at("user_columns")), side_from_json(j.at("item_columns"))};
}

}  // namespace rankforge
