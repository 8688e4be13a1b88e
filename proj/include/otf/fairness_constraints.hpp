#pragma once

// Constraint matrices G of linear fairness notions: a score vector f over the
// samples is fair iff G f = 0. Each row evaluates one constraint function g_c
// at every sample.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "otf/error.hpp"
#include "otf/tabular_data.hpp"

namespace otf {

enum class Notion { pdp, peo, composite };

inline std::string to_string(Notion n) {
  switch (n) {
    case Notion::pdp: return "pdp";
    case Notion::peo: return "peo";
    case Notion::composite: return "composite";
  }
  return "?";
}

inline Notion parse_notion(const std::string& s) {
  if (s == "pdp") return Notion::pdp;
  if (s == "peo") return Notion::peo;
  throw ConfigError("unknown fairness notion '" + s + "' (expected pdp or peo)");
}

struct ConstraintMatrix {
  Eigen::MatrixXd G;  // d_F x n
  Notion notion = Notion::pdp;
  std::vector<std::string> row_labels;

  Eigen::Index rows() const { return G.rows(); }
  Eigen::Index samples() const { return G.cols(); }
};

namespace detail {

// Continuous attributes whose (conditional) mean is this small relative to
// their spread use the centered covariance row (a - m) / sd instead of the
// ratio row a / m - 1. Both rows span the same constraint.
inline constexpr double kRatioFormMinMean = 0.1;

struct GroupColumn {
  Eigen::Index column;
  std::string name;
  bool continuous;
};

inline std::vector<GroupColumn> group_columns(const TabularDataset& ds) {
  std::vector<GroupColumn> out;
  Eigen::Index c = 0;
  for (const auto& a : ds.sensitive_spec)
    for (const auto& col : a.columns) out.push_back({c++, col, a.kind == SensitiveKind::continuous});
  // Datasets assembled by hand may carry S without a sensitive_spec.
  for (; c < ds.S.cols(); ++c) out.push_back({c, "s" + std::to_string(c), false});
  return out;
}

/// Centered row for the samples selected by `mask`; zero elsewhere.
inline Eigen::RowVectorXd centered_row(const Eigen::VectorXd& s, const Eigen::ArrayXd& mask, bool continuous,
                                       const std::string& what, std::string& form) {
  const double count = mask.sum();
  const double mean = (s.array() * mask).sum() / count;
  if (!continuous) {
    if (!(mean > 0.0)) throw DegenerateGroupError("degenerate group: " + what + " has no members");
    form = "ratio";
    return (mask * (s.array() / mean - 1.0)).matrix().transpose();
  }
  const double sd = std::sqrt((mask * (s.array() - mean).square()).sum() / count);
  if (!(sd > 0.0)) throw DegenerateGroupError("degenerate group: " + what + " is constant");
  if (std::abs(mean) >= kRatioFormMinMean * sd) {
    form = "ratio";
    return (mask * (s.array() / mean - 1.0)).matrix().transpose();
  }
  form = "cov";
  return (mask * (s.array() - mean) / sd).matrix().transpose();
}

}  // namespace detail

/// Probabilistic demographic parity: one row per sensitive column,
/// G_kj = S_jk / E[S_k] - 1 with the empirical mean over `ds`.
inline ConstraintMatrix build_pdp(const TabularDataset& ds) {
  if (ds.size() < 2) throw DataError("PDP constraints need at least 2 samples");
  const auto cols = detail::group_columns(ds);
  ConstraintMatrix out;
  out.notion = Notion::pdp;
  out.G.resize(static_cast<Eigen::Index>(cols.size()), ds.size());
  const Eigen::ArrayXd all = Eigen::ArrayXd::Ones(ds.size());
  for (std::size_t r = 0; r < cols.size(); ++r) {
    std::string form;
    out.G.row(static_cast<Eigen::Index>(r)) =
        detail::centered_row(ds.S.col(cols[r].column), all, cols[r].continuous, cols[r].name, form);
    out.row_labels.push_back("pdp:" + cols[r].name + (form == "cov" ? " (cov)" : ""));
  }
  return out;
}

/// Probabilistic equalized odds: rows k + l * d_S for label l in {0, 1}, with
/// entries Y_l (S_k / E[S_k | Y = l] - 1), zero for samples of the other label.
inline ConstraintMatrix build_peo(const TabularDataset& ds) {
  if (ds.size() < 2) throw DataError("PEO constraints need at least 2 samples");
  const auto cols = detail::group_columns(ds);
  const auto d_s = static_cast<Eigen::Index>(cols.size());
  ConstraintMatrix out;
  out.notion = Notion::peo;
  out.G.resize(2 * d_s, ds.size());
  out.row_labels.resize(static_cast<std::size_t>(2 * d_s));
  for (int l = 0; l < 2; ++l) {
    const Eigen::ArrayXd mask = (ds.Y.array() == static_cast<double>(l)).cast<double>();
    for (Eigen::Index k = 0; k < d_s; ++k) {
      const auto& col = cols[static_cast<std::size_t>(k)];
      const std::string cell = col.name + " | y=" + std::to_string(l);
      if (mask.sum() == 0.0) throw DegenerateGroupError("degenerate cell: " + cell + " (no samples with label)");
      std::string form;
      out.G.row(k + l * d_s) = detail::centered_row(ds.S.col(col.column), mask, col.continuous, cell, form);
      out.row_labels[static_cast<std::size_t>(k + l * d_s)] = "peo:" + cell + (form == "cov" ? " (cov)" : "");
    }
  }
  return out;
}

inline ConstraintMatrix build_constraints(const TabularDataset& ds, Notion notion) {
  switch (notion) {
    case Notion::pdp: return build_pdp(ds);
    case Notion::peo: return build_peo(ds);
    case Notion::composite: break;
  }
  throw ConfigError("composite constraints are built with concat()");
}

/// Stacks the rows of several constraint matrices built over the same samples.
inline ConstraintMatrix concat(const std::vector<ConstraintMatrix>& parts) {
  if (parts.empty()) throw DimensionError("concat needs at least one constraint matrix");
  if (parts.size() == 1) return parts.front();
  const auto n = parts.front().samples();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.samples() != n)
      throw DimensionError("concat: sample counts differ (" + std::to_string(n) + " vs " +
                           std::to_string(p.samples()) + ")");
    rows += p.rows();
  }
  ConstraintMatrix out;
  out.notion = Notion::composite;
  out.G.resize(rows, n);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.G.middleRows(r, p.rows()) = p.G;
    r += p.rows();
    out.row_labels.insert(out.row_labels.end(), p.row_labels.begin(), p.row_labels.end());
  }
  return out;
}

/// Column subset of G. Expectations inside G stay those of the full set the
/// matrix was built from.
inline ConstraintMatrix restrict_to_batch(const ConstraintMatrix& m, const std::vector<Eigen::Index>& indices) {
  std::vector<bool> seen(static_cast<std::size_t>(m.samples()), false);
  for (const auto i : indices) {
    if (i < 0 || i >= m.samples())
      throw DimensionError("batch index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(m.samples()) + ")");
    if (seen[static_cast<std::size_t>(i)]) throw DimensionError("duplicate batch index " + std::to_string(i));
    seen[static_cast<std::size_t>(i)] = true;
  }
  ConstraintMatrix out;
  out.notion = m.notion;
  out.row_labels = m.row_labels;
  out.G = m.G(Eigen::all, indices);
  return out;
}

}  // namespace otf
