#pragma once

// Exact solver for the unsmoothed transport-to-fairness linear program on
// tiny instances. Used as ground truth for the entropic solver.
//
//   min <C, P>  s.t.  P >= 0,  P 1 = h,  and either  G P^T 1 = 0
//   (equality) or  -|G h| <= G P^T 1 <= |G h|  (relaxed).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "otf/error.hpp"
#include "otf/fairness_constraints.hpp"
#include "otf/transport_cost.hpp"

namespace otf {

inline constexpr Eigen::Index kLpMaxSamples = 16;

/// Thrown when phase one ends with positive infeasibility. `certificate` is a
/// Farkas vector y with y^T A <= 0 and y^T b > 0 for the equality system A x = b.
class LpInfeasibleError : public InfeasibleError {
 public:
  LpInfeasibleError(const std::string& what, Eigen::VectorXd certificate)
      : InfeasibleError(what), certificate(std::move(certificate)) {}
  Eigen::VectorXd certificate;
};

struct LpSolution {
  Eigen::VectorXd x;
  double value = 0.0;
  int pivots = 0;
};

namespace detail {

/// Dense tableau simplex with Bland's rule.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd T, std::vector<Eigen::Index> basis) : T_(std::move(T)), basis_(std::move(basis)) {}

  /// Minimizes the objective stored in the last row over columns [0, allowed).
  void optimize(Eigen::Index allowed, int& pivots) {
    const Eigen::Index m = T_.rows() - 1;
    const Eigen::Index rhs = T_.cols() - 1;
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (T_(m, j) < -kTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        if (T_(r, enter) <= kTol) continue;
        const double ratio = T_(r, rhs) / T_(r, enter);
        if (ratio < best - kTol || (ratio <= best + kTol && leave >= 0 && basis_[r] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = r;
        }
      }
      if (leave < 0) throw NumericError("linear program is unbounded");
      pivot(leave, enter);
      ++pivots;
    }
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    T_.row(r) /= T_(r, c);
    for (Eigen::Index k = 0; k < T_.rows(); ++k) {
      if (k != r && T_(k, c) != 0.0) T_.row(k) -= T_(k, c) * T_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Eigen::MatrixXd& table() { return T_; }
  std::vector<Eigen::Index>& basis() { return basis_; }

  static constexpr double kTol = 1e-11;

 private:
  Eigen::MatrixXd T_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// min c^T x  s.t.  A x = b, x >= 0, by two-phase simplex.
inline LpSolution solve_standard_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw DimensionError("solve_standard_lp: inconsistent dimensions");

  // Columns: x (n), artificials (m), rhs.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  Eigen::VectorXd flip = Eigen::VectorXd::Ones(m);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    if (b(r) < 0.0) flip(r) = -1.0;
    T.row(r).head(n) = flip(r) * A.row(r);
    T(r, n + r) = 1.0;
    T(r, n + m) = flip(r) * b(r);
    basis[static_cast<std::size_t>(r)] = n + r;
  }
  // Phase one objective: sum of artificials, expressed in nonbasic terms.
  for (Eigen::Index r = 0; r < m; ++r) T.row(m) -= T.row(r);
  for (Eigen::Index r = 0; r < m; ++r) T(m, n + r) = 0.0;

  LpSolution sol;
  detail::Tableau tab(std::move(T), std::move(basis));
  tab.optimize(n + m, sol.pivots);
  auto& t = tab.table();
  const double infeasibility = -t(m, n + m);
  const double scale = 1.0 + b.cwiseAbs().sum();
  if (infeasibility > 1e-9 * scale) {
    // Reduced cost of artificial k is 1 - pi_k.
    Eigen::VectorXd y(m);
    for (Eigen::Index r = 0; r < m; ++r) y(r) = (1.0 - t(m, n + r)) * flip(r);
    throw LpInfeasibleError("linear program is infeasible (phase-one residual " + std::to_string(infeasibility) + ")",
                            std::move(y));
  }
  // Drive remaining artificials out of the basis; rows that cannot pivot are redundant.
  std::vector<bool> redundant(static_cast<std::size_t>(m), false);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (tab.basis()[static_cast<std::size_t>(r)] < n) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(t(r, j)) > 1e-9) {
        col = j;
        break;
      }
    }
    if (col >= 0) tab.pivot(r, col);
    else redundant[static_cast<std::size_t>(r)] = true;
  }
  // Phase two objective.
  t.row(m).setZero();
  t.row(m).head(n) = c.transpose();
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index bv = tab.basis()[static_cast<std::size_t>(r)];
    if (redundant[static_cast<std::size_t>(r)] || bv >= n) continue;
    t.row(m) -= c(bv) * t.row(r);
  }
  // Artificials stay out: columns beyond n are excluded from entering.
  tab.optimize(n, sol.pivots);

  sol.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index bv = tab.basis()[static_cast<std::size_t>(r)];
    if (bv < n) sol.x(bv) = t(r, n + m);
  }
  sol.value = c.dot(sol.x);
  return sol;
}

struct LpInstance {
  CostMatrix C;
  Eigen::VectorXd h;
  ConstraintMatrix G;
  bool relaxed = false;
};

struct LpResult {
  double cost = 0.0;
  Eigen::MatrixXd coupling;
};

inline LpResult solve_lp(const LpInstance& inst) {
  const Eigen::Index n = inst.h.size();
  if (n > kLpMaxSamples) throw ConfigError("LP oracle is limited to " + std::to_string(kLpMaxSamples) + " samples");
  if (n < 1) throw DimensionError("LP oracle needs at least one sample");
  if (inst.C.C.rows() != n || inst.C.C.cols() != n || inst.G.samples() != n)
    throw DimensionError("LP instance dimensions disagree");
  const Eigen::Index d = inst.G.rows();
  const Eigen::Index vars = n * n + (inst.relaxed ? 2 * d : 0);
  const Eigen::Index rows = n + (inst.relaxed ? 2 * d : d);

  // Variable (i, j) sits at column i * n + j.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, vars);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(vars);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      A(i, i * n + j) = 1.0;
      c(i * n + j) = inst.C.C(i, j);
    }
    b(i) = inst.h(i);
  }
  const Eigen::VectorXd gamma = (inst.G.G * inst.h).cwiseAbs();
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) A(n + k, i * n + j) = inst.G.G(k, j);
    if (inst.relaxed) {
      // G P^T 1 + s+ = gamma and -G P^T 1 + s- = gamma.
      A(n + k, n * n + k) = 1.0;
      b(n + k) = gamma(k);
      A.row(n + d + k).head(n * n) = -A.row(n + k).head(n * n);
      A(n + d + k, n * n + d + k) = 1.0;
      b(n + d + k) = gamma(k);
    }
  }
  const auto sol = solve_standard_lp(A, b, c);
  LpResult out;
  out.cost = sol.value;
  out.coupling = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      sol.x.data(), n, n);
  return out;
}

}  // namespace otf
