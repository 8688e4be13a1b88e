#pragma once

// Entropic-smoothed optimal transport to a linear fairness set.
//
// For scores h > 0, cost C and constraints G the smoothed cost is
//
//   OTF_eps(h)  = min_P <C, P> + eps * sum_ij P_ij (log P_ij - 1)
//                 s.t. P 1 = h,  G P^T 1 = 0,
//
// and the relaxed cost OTFR_eps(h) replaces the fairness equality with
// |G P^T 1| <= |G h|. Both are solved through their duals by exact coordinate
// ascent: the row potentials (lambda, resp. kappa) in closed form, each
// fairness multiplier (mu_c, resp. phi_c and psi_c) by a scalar Newton solve.
// All exponentials live in the log domain. The coupling implied by duals is
//
//   P_ij = exp((-C_ij + row_i + sum_c nu_c G_cj) / eps),
//
// with nu = mu for the equality problem and nu = phi - psi for the relaxed one.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "otf/error.hpp"
#include "otf/fairness_constraints.hpp"
#include "otf/scalar_root.hpp"
#include "otf/transport_cost.hpp"

namespace otf {

/// How each fairness multiplier is maximized. `fixed_rows` holds the row
/// potentials fixed during the scalar solve. `joint_rows` maximizes over the
/// multiplier and all row potentials together (rows re-solved in closed form
/// inside each scalar evaluation); it costs O(n^2) per evaluation but needs
/// far fewer sweeps at small epsilon.
enum class MultiplierUpdate { fixed_rows, joint_rows };

inline std::string to_string(MultiplierUpdate m) { return m == MultiplierUpdate::fixed_rows ? "fixed_rows" : "joint_rows"; }

inline MultiplierUpdate parse_multiplier_update(const std::string& s) {
  if (s == "fixed_rows") return MultiplierUpdate::fixed_rows;
  if (s == "joint_rows") return MultiplierUpdate::joint_rows;
  throw ConfigError("unknown multiplier update '" + s + "' (expected fixed_rows or joint_rows)");
}

struct SolverConfig {
  double epsilon = 1e-3;
  MultiplierUpdate multiplier_update = MultiplierUpdate::joint_rows;
  double outer_tol = 1e-8;  // sup-norm change of the row potentials per sweep
  int max_outer_sweeps = 10000;
  double inner_tol = 1e-10;
  int inner_max_iters = 100;
  double score_floor = 1e-6;
  bool compute_marginals = true;
  bool record_coordinate_values = false;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
    if (!(outer_tol > 0.0)) throw ConfigError("outer_tol must be positive");
    if (max_outer_sweeps < 1) throw ConfigError("max_outer_sweeps must be at least 1");
    if (!(inner_tol > 0.0)) throw ConfigError("inner_tol must be positive");
    if (inner_max_iters < 1) throw ConfigError("inner_max_iters must be at least 1");
    if (!(score_floor > 0.0 && score_floor <= 1.0)) throw ConfigError("score_floor must lie in (0, 1]");
  }
};

/// Above this smoothing strength the adjusted cost loses most of its
/// unfairness signal; configurations beyond it get a warning.
inline constexpr double kEpsilonWarningThreshold = 0.1;

/// Duals of the equality problem.
struct DualState {
  Eigen::VectorXd lambda;  // row marginals, length n
  Eigen::VectorXd mu;      // fairness equalities, length d_F
};

/// Duals of the relaxed problem; phi, psi <= 0, gamma = |G h| fixed per solve.
struct RelaxedDualState {
  Eigen::VectorXd kappa;
  Eigen::VectorXd phi;
  Eigen::VectorXd psi;
  Eigen::VectorXd gamma;
};

struct SweepRecord {
  int sweep;
  double dual;
  double row_change;  // sup-norm change of lambda (kappa) in this sweep
};

struct SolveResult {
  double objective = 0.0;  // dual value at the returned variables
  std::variant<DualState, RelaxedDualState> duals;
  Eigen::VectorXd coupling_row_marginals;  // P 1
  Eigen::VectorXd coupling_col_marginals;  // P^T 1
  Eigen::VectorXd fairness_residual;       // G P^T 1
  bool converged = false;
  int sweeps_used = 0;
  std::vector<SweepRecord> trace;
  std::vector<double> coordinate_values;  // dual after every coordinate block, if requested

  bool relaxed() const { return std::holds_alternative<RelaxedDualState>(duals); }
  const DualState& equality_duals() const { return std::get<DualState>(duals); }
  const RelaxedDualState& relaxed_duals() const { return std::get<RelaxedDualState>(duals); }
};

/// Fairness multipliers carried between solves; row potentials are always
/// recomputed first in a sweep, so they need no warm value.
struct WarmStart {
  std::optional<Eigen::VectorXd> mu;
  std::optional<Eigen::VectorXd> phi;
  std::optional<Eigen::VectorXd> psi;
};

inline Eigen::VectorXd clamp_scores(const Eigen::Ref<const Eigen::VectorXd>& h, double floor) {
  if (!h.allFinite()) throw NumericError("score vector has non-finite entries");
  return h.cwiseMax(floor).cwiseMin(1.0);
}

/// Throws InfeasibleError unless G has a nontrivial null-space. Constraint
/// matrices that annihilate the constant vector pass directly.
inline void check_feasible(const Eigen::Ref<const Eigen::MatrixXd>& G) {
  const Eigen::Index n = G.cols();
  if (n == 0) throw DimensionError("constraint matrix has no columns");
  const Eigen::VectorXd row_sums = G.rowwise().sum();
  const Eigen::VectorXd row_scale = G.cwiseAbs().rowwise().sum();
  if ((row_sums.cwiseAbs().array() <= 1e-9 * (row_scale.array() + 1e-300)).all()) return;
  if (G.rows() < n) return;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  if (lu.rank() < n) return;
  throw InfeasibleError("constraint matrix has full column rank " + std::to_string(n) +
                        ": no nonzero score vector is fair");
}

namespace detail {

class DualAscent {
 public:
  DualAscent(const Eigen::Ref<const Eigen::VectorXd>& h, const CostMatrix& cost, const ConstraintMatrix& constraints,
             const SolverConfig& cfg, bool relaxed)
      : cfg_(cfg), relaxed_(relaxed), eps_(cfg.epsilon), G_(constraints.G) {
    cfg_.validate();
    const Eigen::Index n = h.size();
    if (cost.C.rows() != n || cost.C.cols() != n)
      throw DimensionError("cost matrix is " + std::to_string(cost.C.rows()) + "x" + std::to_string(cost.C.cols()) +
                           ", expected " + std::to_string(n) + "x" + std::to_string(n));
    if (G_.cols() != n)
      throw DimensionError("constraint matrix has " + std::to_string(G_.cols()) + " columns, expected " +
                           std::to_string(n));
    check_feasible(G_);
    h_ = clamp_scores(h, cfg_.score_floor);
    log_h_ = h_.array().log();
    scaled_cost_ = cost.C / eps_;
    scaled_cost_t_ = scaled_cost_.transpose();
    max_cost_ = cost.C.cwiseAbs().maxCoeff();
    // The pruned log-sum-exp would skip NaN terms silently.
    if (!cost.C.allFinite()) throw numeric_failure("cost matrix");
    const Eigen::Index d = G_.rows();
    row_ = Eigen::VectorXd::Zero(n);
    nu_a_ = Eigen::VectorXd::Zero(d);
    nu_b_ = Eigen::VectorXd::Zero(d);
    active_.resize(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) active_[static_cast<std::size_t>(c)] = G_.row(c).cwiseAbs().maxCoeff() > 0.0;
    if (relaxed_) gamma_ = (G_ * h_).cwiseAbs();
    column_log_mass_ = Eigen::ArrayXd::Zero(n);
  }

  void warm_start(const WarmStart& w) {
    const Eigen::Index d = G_.rows();
    auto take = [&](const std::optional<Eigen::VectorXd>& v, Eigen::VectorXd& dst, bool nonpositive) {
      if (!v || v->size() != d || !v->allFinite()) return;
      dst = (nonpositive ? Eigen::VectorXd(v->cwiseMin(0.0)) : *v) / eps_;
    };
    if (relaxed_) {
      take(w.phi, nu_a_, true);
      take(w.psi, nu_b_, true);
    } else {
      take(w.mu, nu_a_, false);
    }
  }

  /// Combined fairness multiplier per constraint, divided by epsilon.
  Eigen::VectorXd fairness_potential() const { return relaxed_ ? Eigen::VectorXd(nu_a_ - nu_b_) : nu_a_; }

  /// Closed-form update of every row potential; returns the sup-norm change.
  /// Also refreshes the column log-masses used by the multiplier updates.
  double update_rows() {
    const Eigen::Index n = h_.size();
    const Eigen::ArrayXd m = (G_.transpose() * fairness_potential()).array();
    double change = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = log_sum_exp_diff(m.data(), scaled_cost_t_.col(i).data(), n);
      const double updated = eps_ * (log_h_(i) - lse);
      change = std::max(change, std::abs(updated - row_(i)));
      row_(i) = updated;
    }
    if (!row_.allFinite()) throw numeric_failure("row potential update");
    const Eigen::ArrayXd r = row_.array() / eps_;
    for (Eigen::Index j = 0; j < n; ++j)
      column_log_mass_(j) = log_sum_exp_diff(r.data(), scaled_cost_.col(j).data(), n) + m(j);
    if (!column_log_mass_.allFinite()) throw numeric_failure("column mass update");
    record();
    return change;
  }

  /// Exact maximization over the multipliers of constraint c.
  void update_constraint(Eigen::Index c) {
    if (!active_[static_cast<std::size_t>(c)]) return;
    if (cfg_.multiplier_update == MultiplierUpdate::joint_rows) {
      update_constraint_joint(c);
      return;
    }
    const Eigen::ArrayXd g = G_.row(c).transpose().array();
    RootOptions opt;
    opt.tol = cfg_.inner_tol;
    opt.max_iters = cfg_.inner_max_iters;
    if (!relaxed_) {
      require_mixed_signs(g, c);
      const Eigen::ArrayXd base = column_log_mass_ - nu_a_(c) * g;
      const auto root = minimize_lse(base, g, nu_a_(c), opt);
      nu_a_(c) = root.t;
      column_log_mass_ = base + root.t * g;
      record();
      return;
    }
    if (gamma_(c) == 0.0) require_mixed_signs(g, c);
    {
      const Eigen::ArrayXd base = column_log_mass_ - nu_a_(c) * g;
      const auto root = minimize_exp_lse_linear(base, g, gamma_(c), nu_a_(c), opt);
      nu_a_(c) = root.t;
      column_log_mass_ = base + root.t * g;
      record();
    }
    {
      const Eigen::ArrayXd base = column_log_mass_ + nu_b_(c) * g;
      const auto root = minimize_exp_lse_linear(base, -g, gamma_(c), nu_b_(c), opt);
      nu_b_(c) = root.t;
      column_log_mass_ = base - root.t * g;
      record();
    }
  }

  /// Maximizes over multiplier c and the row potentials together. With rows at
  /// their optimum the dual reduces to -eps sum_i h_i LSE_i(t) plus terms linear
  /// in t, whose stationarity condition sum_i h_i E_i[g] = gamma is increasing in t.
  void update_constraint_joint(Eigen::Index c) {
    const Eigen::ArrayXd g = G_.row(c).transpose().array();
    RootOptions opt;
    opt.tol = cfg_.inner_tol * h_.sum();
    opt.max_iters = cfg_.inner_max_iters;
    opt.initial_step = 1.0 / g.abs().maxCoeff();
    // Returns the maximizing value of the multiplier that enters as sign * t * g.
    auto solve = [&](double sign, double current, double target) {
      const Eigen::ArrayXd dir = sign * g;
      const Eigen::ArrayXd base = (G_.transpose() * fairness_potential()).array() - current * dir;
      const auto root = monotone_root(
          [&](double t) {
            const auto [mean, var] = row_moments(base + t * dir, dir);
            return MonotoneEval{mean - target, var};
          },
          current, opt);
      return root.t;
    };
    if (!relaxed_) {
      require_mixed_signs(g, c);
      nu_a_(c) = solve(1.0, nu_a_(c), 0.0);
      update_rows();
      return;
    }
    if (gamma_(c) == 0.0) require_mixed_signs(g, c);
    opt.upper_bound = 0.0;
    nu_a_(c) = solve(1.0, nu_a_(c), gamma_(c));
    update_rows();
    nu_b_(c) = solve(-1.0, nu_b_(c), gamma_(c));
    update_rows();
  }

  double dual_value() const {
    double value = row_.dot(h_) - eps_ * std::exp(log_sum_exp(column_log_mass_));
    if (relaxed_) value += eps_ * gamma_.dot(nu_a_ + nu_b_);
    return value;
  }

  SolveResult run() {
    SolveResult res;
    const Eigen::Index d = G_.rows();
    int sweep = 0;
    Eigen::VectorXd previous = row_;
    for (; sweep < cfg_.max_outer_sweeps; ++sweep) {
      // Change since the previous sweep's row update; joint multiplier updates
      // also move the rows, so this is wider than the last closed-form step.
      update_rows();
      const double change = (row_ - previous).cwiseAbs().maxCoeff();
      previous = row_;
      res.trace.push_back({sweep, dual_value(), change});
      if (sweep > 0 && change < cfg_.outer_tol) {
        res.converged = true;
        break;
      }
      for (Eigen::Index c = 0; c < d; ++c) update_constraint(c);
    }
    res.sweeps_used = std::min(sweep + 1, cfg_.max_outer_sweeps);
    res.objective = dual_value();
    if (!std::isfinite(res.objective)) throw numeric_failure("dual value");
    if (relaxed_) res.duals = RelaxedDualState{row_, eps_ * nu_a_, eps_ * nu_b_, gamma_};
    else res.duals = DualState{row_, eps_ * nu_a_};
    res.coupling_col_marginals = column_log_mass_.exp().matrix();
    res.fairness_residual = G_ * res.coupling_col_marginals;
    if (cfg_.compute_marginals) {
      const Eigen::ArrayXd m = (G_.transpose() * fairness_potential()).array();
      res.coupling_row_marginals.resize(h_.size());
      for (Eigen::Index i = 0; i < h_.size(); ++i)
        res.coupling_row_marginals(i) =
            std::exp(row_(i) / eps_ + log_sum_exp_diff(m.data(), scaled_cost_t_.col(i).data(), h_.size()));
    }
    res.coordinate_values = std::move(values_);
    return res;
  }

  const Eigen::VectorXd& scores() const { return h_; }

 private:
  NumericError numeric_failure(const std::string& where) const {
    return NumericError("non-finite value in " + where + " (epsilon = " + std::to_string(eps_) +
                        ", max |C| / epsilon = " + std::to_string(max_cost_ / eps_) + ")");
  }

  void require_mixed_signs(const Eigen::ArrayXd& g, Eigen::Index c) const {
    if (g.maxCoeff() > 0.0 && g.minCoeff() < 0.0) return;
    throw InfeasibleError("fairness constraint " + std::to_string(c) +
                          " has entries of a single sign: no positive fair score vector exists");
  }

  /// sum_i h_i E_i[g] and sum_i h_i Var_i[g] under the row distributions
  /// softmax_j(a_j - C_ij / eps).
  std::pair<double, double> row_moments(const Eigen::ArrayXd& a, const Eigen::ArrayXd& g) {
    const Eigen::Index n = h_.size();
    double mean = 0.0, var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* c = scaled_cost_t_.col(i).data();
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) mx = std::max(mx, a(j) - c[j]);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double z = a(j) - c[j] - mx;
        if (z <= -50.0) continue;
        const double w = std::exp(z);
        s0 += w;
        s1 += w * g(j);
        s2 += w * g(j) * g(j);
      }
      const double e1 = s1 / s0;
      mean += h_(i) * e1;
      var += h_(i) * std::max(0.0, s2 / s0 - e1 * e1);
    }
    return {mean, var};
  }

  void record() {
    if (cfg_.record_coordinate_values) values_.push_back(dual_value());
  }

  SolverConfig cfg_;
  bool relaxed_;
  double eps_;
  Eigen::MatrixXd G_;
  Eigen::MatrixXd scaled_cost_;    // C / eps
  Eigen::MatrixXd scaled_cost_t_;  // its transpose, so rows of C are contiguous
  double max_cost_ = 0.0;
  Eigen::VectorXd h_;
  Eigen::ArrayXd log_h_;
  Eigen::VectorXd row_;   // lambda or kappa
  Eigen::VectorXd nu_a_;  // mu or phi, divided by eps
  Eigen::VectorXd nu_b_;  // psi divided by eps, relaxed only
  Eigen::VectorXd gamma_;
  std::vector<bool> active_;
  Eigen::ArrayXd column_log_mass_;  // log (P^T 1)_j
  std::vector<double> values_;
};

}  // namespace detail

/// Smoothed transport cost to the fair set (equality constraints).
inline SolveResult solve_otfe(const Eigen::Ref<const Eigen::VectorXd>& h, const CostMatrix& C,
                              const ConstraintMatrix& G, const SolverConfig& cfg, const WarmStart* warm = nullptr) {
  detail::DualAscent solver(h, C, G, cfg, false);
  if (warm) solver.warm_start(*warm);
  return solver.run();
}

/// Smoothed transport cost with unfairness bounded by that of h.
inline SolveResult solve_otfre(const Eigen::Ref<const Eigen::VectorXd>& h, const CostMatrix& C,
                               const ConstraintMatrix& G, const SolverConfig& cfg, const WarmStart* warm = nullptr) {
  detail::DualAscent solver(h, C, G, cfg, true);
  if (warm) solver.warm_start(*warm);
  return solver.run();
}

struct AdjustedOtfResult {
  double cost = 0.0;  // OTF_eps(h) - OTFR_eps(h)
  Eigen::VectorXd gradient;
  SolveResult otfe;
  SolveResult otfre;
};

/// Adjusted cost and its gradient with respect to h, taken at the returned
/// duals (exact at convergence, an approximation otherwise):
///   d/dh_i = lambda_i - kappa_i - sum_c (phi_c + psi_c) sign((G h)_c) G_ci.
/// `warm`, when given, seeds the multipliers and receives the new ones.
inline AdjustedOtfResult adjusted_otf(const Eigen::Ref<const Eigen::VectorXd>& h, const CostMatrix& C,
                                      const ConstraintMatrix& G, const SolverConfig& cfg, WarmStart* warm = nullptr) {
  AdjustedOtfResult out;
  out.otfe = solve_otfe(h, C, G, cfg, warm);
  out.otfre = solve_otfre(h, C, G, cfg, warm);
  out.cost = out.otfe.objective - out.otfre.objective;

  const auto& eq = out.otfe.equality_duals();
  const auto& rel = out.otfre.relaxed_duals();
  const Eigen::VectorXd unfairness = G.G * clamp_scores(h, cfg.score_floor);
  const Eigen::VectorXd sign = unfairness.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
  const Eigen::VectorXd weight = (rel.phi + rel.psi).cwiseProduct(sign);
  out.gradient = eq.lambda - rel.kappa - G.G.transpose() * weight;
  if (warm) {
    warm->mu = eq.mu;
    warm->phi = rel.phi;
    warm->psi = rel.psi;
  }
  return out;
}

/// Dense coupling implied by equality-problem duals.
inline Eigen::MatrixXd recover_coupling(const DualState& duals, const CostMatrix& C, const ConstraintMatrix& G,
                                        double epsilon) {
  if (!duals.lambda.allFinite() || !duals.mu.allFinite()) throw NumericError("recover_coupling: non-finite duals");
  const Eigen::RowVectorXd col = (G.G.transpose() * duals.mu).transpose();
  Eigen::MatrixXd P = ((-C.C).colwise() + duals.lambda).rowwise() + col;
  P = (P.array() / epsilon).exp().matrix();
  if (!P.allFinite()) throw NumericError("recover_coupling: overflow at epsilon = " + std::to_string(epsilon));
  return P;
}

/// Dense coupling implied by relaxed-problem duals.
inline Eigen::MatrixXd recover_coupling(const RelaxedDualState& duals, const CostMatrix& C, const ConstraintMatrix& G,
                                        double epsilon) {
  return recover_coupling(DualState{duals.kappa, duals.phi - duals.psi}, C, G, epsilon);
}

/// <C, P> - eps H(P) with H(P) = -sum P (log P - 1).
inline double primal_objective(const Eigen::MatrixXd& P, const CostMatrix& C, double epsilon) {
  const Eigen::ArrayXXd p = P.array();
  return (C.C.array() * p).sum() + epsilon * (p * (p.log() - 1.0)).sum();
}

/// One JSON object per sweep: {"solver", "sweep", "dual", "row_change"}.
inline void write_trace_jsonl(std::ostream& out, const SolveResult& res, const std::string& solver) {
  for (const auto& r : res.trace) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "{\"solver\":\"%s\",\"sweep\":%d,\"dual\":%.17g,\"row_change\":%.17g}\n",
                  solver.c_str(), r.sweep, r.dual, r.row_change);
    out << buf;
  }
}

}  // namespace otf
