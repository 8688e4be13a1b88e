#pragma once

// Fixtures shared by the test binaries.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "otf/fairness_constraints.hpp"
#include "otf/tabular_data.hpp"
#include "otf/transport_cost.hpp"

namespace otf::testing {

/// Dataset with one categorical attribute whose columns are the columns of S.
inline TabularDataset make_dataset(const Eigen::MatrixXd& S, const Eigen::VectorXd& Y, Eigen::MatrixXd X = {}) {
  TabularDataset ds;
  if (X.size() == 0) X = Eigen::MatrixXd::Zero(S.rows(), 1);
  ds.X = X;
  ds.S = S;
  ds.Y = Y;
  for (Eigen::Index c = 0; c < X.cols(); ++c) ds.column_names.push_back("x" + std::to_string(c));
  SensitiveAttribute a{"group", SensitiveKind::categorical, {}};
  for (Eigen::Index c = 0; c < S.cols(); ++c) a.columns.push_back("group=" + std::to_string(c));
  ds.sensitive_spec.push_back(a);
  return ds;
}

/// Small transport instance with unit-scale costs and zero-sum constraint rows.
struct Instance {
  Eigen::VectorXd h;
  CostMatrix C;
  ConstraintMatrix G;
};

inline Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d_f, Eigen::Index dim = 2) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance inst;
  Eigen::MatrixXd X(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < dim; ++c) X(i, c) = unit(rng);
  inst.C = euclidean_cost(X);
  inst.h.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) inst.h(i) = 0.05 + 0.95 * unit(rng);
  inst.G.G.resize(d_f, n);
  for (Eigen::Index r = 0; r < d_f; ++r) {
    for (Eigen::Index j = 0; j < n; ++j) inst.G.G(r, j) = normal(rng);
    inst.G.G.row(r).array() -= inst.G.G.row(r).mean();
    inst.G.row_labels.push_back("r" + std::to_string(r));
  }
  return inst;
}

/// Orthogonal projection of v onto the null-space of G.
inline Eigen::VectorXd project_to_null_space(const Eigen::MatrixXd& G, const Eigen::VectorXd& v) {
  // Group rows are often linearly dependent, so the rank cut is explicit.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G.transpose(), Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
  const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
  return v - U * (U.transpose() * v);
}

}  // namespace otf::testing
