#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "otf/error.hpp"

namespace otf {

enum class CostNormalization { none, mean_scaled };

inline CostNormalization parse_cost_normalization(const std::string& s) {
  if (s == "none") return CostNormalization::none;
  if (s == "mean_scaled") return CostNormalization::mean_scaled;
  throw ConfigError("unknown cost normalization '" + s + "'");
}

inline std::string to_string(CostNormalization n) { return n == CostNormalization::none ? "none" : "mean_scaled"; }

/// Nonnegative transport cost between samples.
struct CostMatrix {
  Eigen::MatrixXd C;
  std::string metric_tag = "euclidean";
  CostNormalization normalization = CostNormalization::none;

  Eigen::Index size() const { return C.rows(); }
};

namespace detail {

inline void check_finite_rows(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& idx) {
  for (const auto i : idx) {
    if (!X.row(i).allFinite()) throw DataError("non-finite feature value in sample " + std::to_string(i));
  }
}

inline CostMatrix pairwise_euclidean(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& idx,
                                     CostNormalization normalization) {
  check_finite_rows(X, idx);
  const auto b = static_cast<Eigen::Index>(idx.size());
  CostMatrix out;
  out.normalization = normalization;
  out.C.resize(b, b);
  for (Eigen::Index a = 0; a < b; ++a) {
    out.C(a, a) = 0.0;
    for (Eigen::Index c = a + 1; c < b; ++c) {
      const double d = (X.row(idx[static_cast<std::size_t>(a)]) - X.row(idx[static_cast<std::size_t>(c)])).norm();
      out.C(a, c) = d;
      out.C(c, a) = d;
    }
  }
  if (normalization == CostNormalization::mean_scaled) {
    const double mean = out.C.mean();
    if (mean > 0.0) out.C /= mean;
  }
  return out;
}

}  // namespace detail

/// C_ij = ||x_i - x_j||_2 over all rows of X.
inline CostMatrix euclidean_cost(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                 CostNormalization normalization = CostNormalization::none) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
  return detail::pairwise_euclidean(X, idx, normalization);
}

/// Euclidean cost restricted to the rows in `indices`; only the b x b block is computed.
inline CostMatrix batch_cost(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& indices,
                             CostNormalization normalization = CostNormalization::none) {
  if (indices.empty()) throw DimensionError("batch_cost: empty index list");
  for (const auto i : indices) {
    if (i < 0 || i >= X.rows())
      throw DimensionError("batch_cost: index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(X.rows()) + ")");
  }
  return detail::pairwise_euclidean(X, indices, normalization);
}

}  // namespace otf
