#pragma once

// Tabular classification datasets with designated sensitive attributes:
// CSV loading with one-hot encoding and standardization, a columnar
// serialization format, a synthetic biased-data generator and a seeded
// train/test split.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "otf/error.hpp"

namespace otf {

enum class SensitiveKind { categorical, continuous };

inline std::string to_string(SensitiveKind kind) {
  return kind == SensitiveKind::categorical ? "categorical" : "continuous";
}

inline SensitiveKind parse_sensitive_kind(const std::string& s) {
  if (s == "categorical") return SensitiveKind::categorical;
  if (s == "continuous") return SensitiveKind::continuous;
  throw ConfigError("unknown sensitive attribute kind '" + s + "'");
}

/// One sensitive attribute and the S columns it expands into.
struct SensitiveAttribute {
  std::string name;
  SensitiveKind kind = SensitiveKind::categorical;
  std::vector<std::string> columns;  // names of its columns in S, in order

  bool operator==(const SensitiveAttribute&) const = default;
};

/// Affine map applied to one encoded column: z = (x - mean) / scale.
struct ColumnScaling {
  std::string column;
  double mean = 0.0;
  double scale = 1.0;

  bool operator==(const ColumnScaling&) const = default;
};

/// Column roles for CSV loading.
struct Schema {
  std::string label;
  /// When set, Y = (label == positive_label). Otherwise label values must be 0/1.
  std::optional<std::string> positive_label;
  std::vector<std::pair<std::string, SensitiveKind>> sensitive;
  std::vector<std::string> drop;
};

struct TabularDataset {
  Eigen::MatrixXd X;  // n x d_X, standardized
  Eigen::MatrixXd S;  // n x d_S, one-hot groups or standardized continuous values
  Eigen::VectorXd Y;  // n, values in {0, 1}
  std::vector<std::string> column_names;  // X columns
  std::vector<SensitiveAttribute> sensitive_spec;
  std::vector<ColumnScaling> scaling;  // X columns, then continuous S columns
  std::string label_name = "label";
  std::vector<std::string> warnings;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index feature_count() const { return X.cols(); }
  Eigen::Index sensitive_count() const { return S.cols(); }

  std::vector<std::string> sensitive_column_names() const {
    std::vector<std::string> out;
    for (const auto& a : sensitive_spec) out.insert(out.end(), a.columns.begin(), a.columns.end());
    return out;
  }

  /// Rows selected by `indices`, in that order. Scaling parameters are kept.
  TabularDataset subset(const std::vector<Eigen::Index>& indices) const {
    TabularDataset out;
    out.X.resize(static_cast<Eigen::Index>(indices.size()), X.cols());
    out.S.resize(static_cast<Eigen::Index>(indices.size()), S.cols());
    out.Y.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const Eigen::Index i = indices[r];
      if (i < 0 || i >= size()) throw DimensionError("subset index " + std::to_string(i) + " out of range");
      const auto rr = static_cast<Eigen::Index>(r);
      out.X.row(rr) = X.row(i);
      out.S.row(rr) = S.row(i);
      out.Y(rr) = Y(i);
    }
    out.column_names = column_names;
    out.sensitive_spec = sensitive_spec;
    out.scaling = scaling;
    out.label_name = label_name;
    return out;
  }

  bool operator==(const TabularDataset& o) const {
    return X == o.X && S == o.S && Y == o.Y && column_names == o.column_names &&
           sensitive_spec == o.sensitive_spec && scaling == o.scaling && label_name == o.label_name;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw DataError("CSV parse error at row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA" || s == "nan"; }

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw DataError("CSV parse error at row 0: empty file");
  t.header = split_csv_line(line, row);
  for (auto& h : t.header) h = trim(h);
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, row);
    if (fields.size() != t.header.size())
      throw DataError("CSV parse error at row " + std::to_string(row) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    for (auto& f : fields) f = trim(f);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// Mean and population standard deviation of a column.
inline std::pair<double, double> column_moments(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return {mean, std::sqrt(var)};
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Standardizes every column of `M` in place; constant columns are reported
/// through the returned mask (true = keep).
inline std::vector<bool> standardize_columns(Eigen::MatrixXd& M, const std::vector<std::string>& names,
                                             std::vector<ColumnScaling>& scaling) {
  std::vector<bool> keep(static_cast<std::size_t>(M.cols()), true);
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    auto [mean, sd] = detail::column_moments(M.col(c));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      keep[static_cast<std::size_t>(c)] = false;
      continue;
    }
    M.col(c) = (M.col(c).array() - mean) / sd;
    scaling.push_back({names[static_cast<std::size_t>(c)], mean, sd});
  }
  return keep;
}

/// Loads a raw CSV file and preprocesses it: rows with missing values are
/// dropped, categorical columns are one-hot encoded (levels in order of first
/// appearance), every feature column is standardized, constant feature
/// columns are dropped with a warning.
inline TabularDataset load_csv(std::istream& in, const Schema& schema) {
  const auto table = detail::read_csv_table(in);
  auto find = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError("schema error: column '" + name + "' not found");
    return static_cast<std::size_t>(it - table.header.begin());
  };

  const std::size_t label_col = find(schema.label);
  std::vector<std::size_t> sensitive_cols;
  for (const auto& [name, kind] : schema.sensitive) sensitive_cols.push_back(find(name));
  std::vector<bool> is_feature(table.header.size(), true);
  is_feature[label_col] = false;
  for (auto c : sensitive_cols) is_feature[c] = false;
  for (const auto& d : schema.drop) is_feature[find(d)] = false;

  TabularDataset ds;
  ds.label_name = schema.label;

  std::vector<const std::vector<std::string>*> rows;
  for (const auto& r : table.rows) {
    if (std::none_of(r.begin(), r.end(), detail::is_missing)) rows.push_back(&r);
  }
  if (rows.size() < table.rows.size())
    ds.warnings.push_back("dropped " + std::to_string(table.rows.size() - rows.size()) +
                          " rows with missing values");
  if (rows.empty()) throw DataError("no complete rows in CSV input");
  const auto n = static_cast<Eigen::Index>(rows.size());

  ds.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = (*rows[static_cast<std::size_t>(i)])[label_col];
    if (schema.positive_label) {
      ds.Y(i) = v == *schema.positive_label ? 1.0 : 0.0;
      continue;
    }
    const auto d = detail::parse_double(v);
    if (!d || (*d != 0.0 && *d != 1.0))
      throw DataError("schema error: label '" + schema.label + "' has non-binary value '" + v + "' at row " +
                      std::to_string(i + 1));
    ds.Y(i) = *d;
  }

  // Encodes one raw column into one or more numeric columns.
  auto encode = [&](std::size_t col, bool categorical, std::vector<std::string>& names,
                    std::vector<Eigen::VectorXd>& out) {
    const std::string& base = table.header[col];
    if (!categorical) {
      Eigen::VectorXd v(n);
      bool numeric = true;
      for (Eigen::Index i = 0; i < n && numeric; ++i) {
        const auto d = detail::parse_double((*rows[static_cast<std::size_t>(i)])[col]);
        if (!d) numeric = false;
        else v(i) = *d;
      }
      if (numeric) {
        names.push_back(base);
        out.push_back(std::move(v));
        return true;
      }
    }
    std::vector<std::string> levels;
    std::unordered_map<std::string, Eigen::Index> index;
    for (const auto* r : rows) {
      const auto& v = (*r)[col];
      if (index.emplace(v, static_cast<Eigen::Index>(levels.size())).second) levels.push_back(v);
    }
    const auto first = out.size();
    for (const auto& l : levels) {
      names.push_back(base + "=" + l);
      out.emplace_back(Eigen::VectorXd::Zero(n));
    }
    for (Eigen::Index i = 0; i < n; ++i)
      out[first + static_cast<std::size_t>(index.at((*rows[static_cast<std::size_t>(i)])[col]))](i) = 1.0;
    return false;
  };

  std::vector<std::string> x_names;
  std::vector<Eigen::VectorXd> x_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (is_feature[c]) encode(c, false, x_names, x_cols);
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t c = 0; c < x_cols.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = x_cols[c];
  const auto keep = standardize_columns(X, x_names, ds.scaling);
  std::vector<Eigen::Index> kept;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (keep[c]) {
      kept.push_back(static_cast<Eigen::Index>(c));
      ds.column_names.push_back(x_names[c]);
    } else {
      ds.warnings.push_back("dropped constant column '" + x_names[c] + "'");
    }
  }
  ds.X = X(Eigen::all, kept);

  std::vector<Eigen::VectorXd> s_cols;
  for (std::size_t a = 0; a < schema.sensitive.size(); ++a) {
    const auto& [name, kind] = schema.sensitive[a];
    SensitiveAttribute attr{name, kind, {}};
    const auto first = s_cols.size();
    const bool numeric = encode(sensitive_cols[a], kind == SensitiveKind::categorical, attr.columns, s_cols);
    if (kind == SensitiveKind::continuous) {
      if (!numeric) throw DataError("schema error: continuous sensitive column '" + name + "' is not numeric");
      auto [mean, sd] = detail::column_moments(s_cols[first]);
      if (!(sd > 0.0)) throw DataError("schema error: continuous sensitive column '" + name + "' is constant");
      s_cols[first] = (s_cols[first].array() - mean) / sd;
      ds.scaling.push_back({name, mean, sd});
    }
    ds.sensitive_spec.push_back(std::move(attr));
  }
  ds.S.resize(n, static_cast<Eigen::Index>(s_cols.size()));
  for (std::size_t c = 0; c < s_cols.size(); ++c) ds.S.col(static_cast<Eigen::Index>(c)) = s_cols[c];
  return ds;
}

inline TabularDataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_csv(in, schema);
}

/// Writes the columnar CSV (X columns, S columns, label) and returns the JSON
/// sidecar describing the schema and scaling.
inline nlohmann::json write_dataset(std::ostream& csv, const TabularDataset& ds) {
  const auto s_names = ds.sensitive_column_names();
  std::vector<std::string> header = ds.column_names;
  header.insert(header.end(), s_names.begin(), s_names.end());
  header.push_back(ds.label_name);
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << '"' << header[i] << '"';
  csv << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) csv << detail::format_double(ds.X(i, c)) << ',';
    for (Eigen::Index c = 0; c < ds.S.cols(); ++c) csv << detail::format_double(ds.S(i, c)) << ',';
    csv << detail::format_double(ds.Y(i)) << '\n';
  }

  nlohmann::json meta;
  meta["features"] = ds.column_names;
  meta["label"] = ds.label_name;
  meta["sensitive"] = nlohmann::json::array();
  for (const auto& a : ds.sensitive_spec)
    meta["sensitive"].push_back({{"name", a.name}, {"kind", to_string(a.kind)}, {"columns", a.columns}});
  meta["scaling"] = nlohmann::json::array();
  for (const auto& s : ds.scaling)
    meta["scaling"].push_back({{"column", s.column}, {"mean", s.mean}, {"scale", s.scale}});
  return meta;
}

/// Writes `path` and its sidecar `path + ".json"`.
inline void write_dataset(const std::string& path, const TabularDataset& ds) {
  std::ofstream csv(path);
  if (!csv) throw DataError("cannot write '" + path + "'");
  const auto meta = write_dataset(csv, ds);
  std::ofstream side(path + ".json");
  side << meta.dump(2) << '\n';
}

/// Reads a dataset produced by `write_dataset`; no further preprocessing.
inline TabularDataset read_dataset(std::istream& csv, const nlohmann::json& meta) {
  TabularDataset ds;
  ds.column_names = meta.at("features").get<std::vector<std::string>>();
  ds.label_name = meta.at("label").get<std::string>();
  for (const auto& a : meta.at("sensitive"))
    ds.sensitive_spec.push_back({a.at("name").get<std::string>(), parse_sensitive_kind(a.at("kind")),
                                 a.at("columns").get<std::vector<std::string>>()});
  for (const auto& s : meta.at("scaling"))
    ds.scaling.push_back({s.at("column").get<std::string>(), s.at("mean").get<double>(), s.at("scale").get<double>()});

  const auto table = detail::read_csv_table(csv);
  const auto dx = static_cast<Eigen::Index>(ds.column_names.size());
  const auto ds_ = static_cast<Eigen::Index>(ds.sensitive_column_names().size());
  if (static_cast<Eigen::Index>(table.header.size()) != dx + ds_ + 1)
    throw DataError("serialized dataset header does not match its sidecar");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  ds.X.resize(n, dx);
  ds.S.resize(n, ds_);
  ds.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < dx + ds_ + 1; ++c) {
      const auto v = detail::parse_double(r[static_cast<std::size_t>(c)]);
      if (!v) throw DataError("CSV parse error at row " + std::to_string(i + 1) + ": non-numeric value");
      if (c < dx) ds.X(i, c) = *v;
      else if (c < dx + ds_) ds.S(i, c - dx) = *v;
      else ds.Y(i) = *v;
    }
  }
  return ds;
}

inline TabularDataset read_dataset(const std::string& path) {
  std::ifstream csv(path);
  std::ifstream side(path + ".json");
  if (!csv || !side) throw DataError("cannot open serialized dataset '" + path + "'");
  return read_dataset(csv, nlohmann::json::parse(side));
}

/// Parameters of the synthetic biased dataset generator.
struct SyntheticSpec {
  Eigen::Index n = 2000;
  Eigen::Index d_X = 5;
  Eigen::Index group_count = 2;
  double bias_strength = 2.0;  // mean shift of feature 0 for group 0
  std::uint64_t seed = 0;
};

/// Gaussian features; group 0 has feature 0 shifted by `bias_strength`; the
/// label is drawn from a logistic model driven mostly by features 0..2, so
/// an accuracy-only classifier inherits the group dependence of feature 0.
/// Groups are assigned round-robin then shuffled, so every group is nonempty.
inline TabularDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.d_X < 1) throw ConfigError("synthetic spec needs n >= 1 and d_X >= 1");
  if (spec.group_count < 2) throw ConfigError("synthetic spec needs group_count >= 2");
  if (!(spec.bias_strength >= 0.0)) throw ConfigError("synthetic spec needs bias_strength >= 0");
  if (spec.n < spec.group_count) throw ConfigError("synthetic spec needs n >= group_count");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<Eigen::Index> group(static_cast<std::size_t>(spec.n));
  for (Eigen::Index i = 0; i < spec.n; ++i) group[static_cast<std::size_t>(i)] = i % spec.group_count;
  std::shuffle(group.begin(), group.end(), rng);

  static constexpr double kLabelWeights[] = {1.0, 1.5, 1.0};
  TabularDataset ds;
  ds.X.resize(spec.n, spec.d_X);
  ds.S = Eigen::MatrixXd::Zero(spec.n, spec.group_count);
  ds.Y.resize(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const auto g = group[static_cast<std::size_t>(i)];
    ds.S(i, g) = 1.0;
    for (Eigen::Index c = 0; c < spec.d_X; ++c) ds.X(i, c) = normal(rng);
    if (g == 0) ds.X(i, 0) += spec.bias_strength;
    double logit = -0.5 * spec.bias_strength * kLabelWeights[0] / static_cast<double>(spec.group_count);
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(spec.d_X, 3); ++c) logit += kLabelWeights[c] * ds.X(i, c);
    ds.Y(i) = uniform(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
  }

  for (Eigen::Index c = 0; c < spec.d_X; ++c) ds.column_names.push_back("x" + std::to_string(c));
  standardize_columns(ds.X, ds.column_names, ds.scaling);
  SensitiveAttribute attr{"group", SensitiveKind::categorical, {}};
  for (Eigen::Index g = 0; g < spec.group_count; ++g) attr.columns.push_back("group=" + std::to_string(g));
  ds.sensitive_spec.push_back(std::move(attr));
  return ds;
}

/// Deterministic seeded split; the first element holds round((1 - test_fraction) * n) rows.
inline std::pair<TabularDataset, TabularDataset> train_test_split(const TabularDataset& ds, std::uint64_t seed,
                                                                  double test_fraction = 0.2) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(ds.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround((1.0 - test_fraction) * static_cast<double>(ds.size())));
  if (n_train == 0 || n_train == idx.size()) throw DataError("dataset too small to split");
  std::vector<Eigen::Index> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {ds.subset(train), ds.subset(test)};
}

}  // namespace otf
