#pragma once

// Predictive and fairness metrics for probabilistic scores, and aggregation
// of repeated runs into sweep tables.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "otf/error.hpp"
#include "otf/tabular_data.hpp"

namespace otf {

/// Probability that a random positive outranks a random negative; ties count 1/2.
inline double auc(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });

  // Midranks (1-based), summed over positives.
  double positive_rank_sum = 0.0;
  double positives = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels(order[k]) == 1.0) {
        positive_rank_sum += midrank;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw DataError("auc: labels contain a single class");
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

/// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double va = da.square().sum();
  const double vb = db.square().sum();
  if (!(va > 0.0) || !(vb > 0.0)) return std::nullopt;
  return (da * db).sum() / std::sqrt(va * vb);
}

/// max_k |corr(scores, S_k)|. Constant scores give 0 (they satisfy the
/// covariance constraint); constant S columns are skipped. Both cases append
/// a note to `warnings` when given.
inline double pdp_violation(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::MatrixXd>& S,
                            std::vector<std::string>* warnings = nullptr) {
  if (scores.size() != S.rows()) throw DimensionError("pdp_violation: scores and S differ in length");
  const Eigen::ArrayXd centered = scores.array() - scores.mean();
  if (!(centered.square().sum() > 0.0)) {
    if (warnings) warnings->push_back("constant scores: correlation undefined, violation set to 0");
    return 0.0;
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < S.cols(); ++k) {
    const auto r = pearson(scores, S.col(k));
    if (!r) {
      if (warnings) warnings->push_back("sensitive column " + std::to_string(k) + " is constant; skipped");
      continue;
    }
    worst = std::max(worst, std::abs(*r));
  }
  return std::min(worst, 1.0);
}

/// max over labels l of the PDP violation among samples with Y = l.
inline double peo_violation(const Eigen::Ref<const Eigen::VectorXd>& scores, const Eigen::Ref<const Eigen::MatrixXd>& S,
                            const Eigen::Ref<const Eigen::VectorXd>& labels,
                            std::vector<std::string>* warnings = nullptr) {
  if (scores.size() != labels.size() || scores.size() != S.rows())
    throw DimensionError("peo_violation: inconsistent lengths");
  double worst = 0.0;
  for (int l = 0; l < 2; ++l) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      if (labels(i) == static_cast<double>(l)) idx.push_back(i);
    if (idx.empty()) throw DataError("peo_violation: no samples with label " + std::to_string(l));
    const Eigen::VectorXd s = scores(idx);
    const Eigen::MatrixXd sub = S(idx, Eigen::all);
    worst = std::max(worst, pdp_violation(s, sub, warnings));
  }
  return worst;
}

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct MetricsReport {
  double auc = 0.0;
  double pdp_violation = 0.0;
  double peo_violation = 0.0;
  std::map<std::string, std::pair<double, double>> per_attribute;  // name -> (pdp, peo)
  Split split = Split::test;
  std::vector<std::string> warnings;
};

inline MetricsReport evaluate_scores(const Eigen::Ref<const Eigen::VectorXd>& scores, const TabularDataset& ds,
                                     Split split) {
  MetricsReport r;
  r.split = split;
  r.auc = auc(scores, ds.Y);
  r.pdp_violation = pdp_violation(scores, ds.S, &r.warnings);
  r.peo_violation = peo_violation(scores, ds.S, ds.Y, &r.warnings);
  Eigen::Index col = 0;
  for (const auto& a : ds.sensitive_spec) {
    const auto w = static_cast<Eigen::Index>(a.columns.size());
    const Eigen::MatrixXd block = ds.S.middleCols(col, w);
    r.per_attribute[a.name] = {pdp_violation(scores, block), peo_violation(scores, block, ds.Y)};
    col += w;
  }
  return r;
}

/// One finished run of a sweep.
struct RunRecord {
  std::string method;  // otf, norm, none
  double alpha = 0.0;
  std::string notion;  // pdp, peo
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct SweepRow {
  std::string method;
  double alpha = 0.0;
  std::string notion;
  double epsilon = 0.0;
  std::size_t runs = 0;
  double auc_mean = 0.0, auc_se = 0.0;
  double pdp_mean = 0.0, pdp_se = 0.0;
  double peo_mean = 0.0, peo_se = 0.0;
  /// Violation of the notion the runs were trained for.
  double violation_mean() const { return notion == "peo" ? peo_mean : pdp_mean; }
  double violation_se() const { return notion == "peo" ? peo_se : pdp_se; }
};

/// Mean and standard error of the mean (sample SD / sqrt(k)).
inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return {v.front(), 0.0};
  const double k = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / k;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (k - 1.0)) / std::sqrt(k)};
}

/// Groups runs by (method, alpha, epsilon) and summarizes each group. All
/// runs must share one notion and every group needs at least two runs.
inline std::vector<SweepRow> aggregate_sweep(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw DataError("aggregate_sweep: no runs");
  for (const auto& r : runs)
    if (r.notion != runs.front().notion)
      throw DataError("aggregate_sweep: mixed notions '" + runs.front().notion + "' and '" + r.notion + "'");
  using Key = std::tuple<std::string, double, double>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) groups[{r.method, r.alpha, r.epsilon}].push_back(&r);

  std::vector<SweepRow> rows;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2)
      throw DataError("aggregate_sweep: configuration " + std::get<0>(key) + " alpha=" +
                      std::to_string(std::get<1>(key)) + " has fewer than 2 runs");
    std::vector<double> a, p, e;
    for (const auto* m : members) {
      a.push_back(m->metrics.auc);
      p.push_back(m->metrics.pdp_violation);
      e.push_back(m->metrics.peo_violation);
    }
    SweepRow row;
    row.method = std::get<0>(key);
    row.alpha = std::get<1>(key);
    row.epsilon = std::get<2>(key);
    row.notion = runs.front().notion;
    row.runs = members.size();
    std::tie(row.auc_mean, row.auc_se) = mean_and_se(a);
    std::tie(row.pdp_mean, row.pdp_se) = mean_and_se(p);
    std::tie(row.peo_mean, row.peo_se) = mean_and_se(e);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace otf
