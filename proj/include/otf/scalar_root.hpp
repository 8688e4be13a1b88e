#pragma once

// One-dimensional helpers for the dual coordinate updates: a stabilized
// log-sum-exp and a safeguarded Newton root finder for increasing functions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "otf/error.hpp"

namespace otf::detail {

/// log(sum_j exp(v_j)), shifted by the maximum.
template <typename Derived>
double log_sum_exp(const Eigen::ArrayBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v - m).exp().sum());
}

/// log(sum_j exp(a_j - c_j)). Terms more than 50 below the maximum are
/// skipped; their total relative weight is below n * 2e-22.
inline double log_sum_exp_diff(const double* a, const double* c, Eigen::Index n) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) m = std::max(m, a[j] - c[j]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double z = a[j] - c[j] - m;
    if (z > -50.0) s += std::exp(z);
  }
  return m + std::log(s);
}

/// Value and slope of an increasing function at a point. A value of -inf
/// marks points known to lie left of the root where the function itself is
/// not representable; Newton steps are not taken from such points.
struct MonotoneEval {
  double value;
  double slope;
};

struct RootOptions {
  double tol = 1e-10;        // |value| at which the root is accepted
  int max_iters = 100;       // Newton/bisection iterations after bracketing
  double initial_step = 1.0;  // first bracket expansion step
  std::optional<double> upper_bound;  // search restricted to t <= upper_bound
};

struct RootResult {
  double t;
  int iterations;
  bool converged;
};

/// Root of an increasing function by safeguarded Newton. The bracket is grown
/// geometrically from `t0`; Newton steps that leave the bracket are replaced by
/// bisection. With an upper bound whose value is <= 0, the bound is returned.
template <typename Fn>
RootResult monotone_root(Fn&& f, double t0, const RootOptions& opt) {
  if (opt.upper_bound) t0 = std::min(t0, *opt.upper_bound);
  MonotoneEval e0 = f(t0);
  if (std::abs(e0.value) <= opt.tol) return {t0, 0, true};

  double lo, hi;
  if (e0.value > 0.0) {
    hi = t0;
    double step = opt.initial_step;
    lo = t0 - step;
    int grow = 0;
    for (; f(lo).value > 0.0; ++grow) {
      if (grow > 1100) throw NumericError("scalar dual update: no sign change found below " + std::to_string(t0));
      hi = lo;
      step *= 2.0;
      lo = t0 - step;
    }
  } else {
    if (opt.upper_bound) {
      if (t0 >= *opt.upper_bound) return {*opt.upper_bound, 0, true};
      const auto eb = f(*opt.upper_bound);
      if (eb.value <= 0.0) return {*opt.upper_bound, 0, true};
    }
    lo = t0;
    double step = opt.initial_step;
    hi = t0 + step;
    if (opt.upper_bound) hi = std::min(hi, *opt.upper_bound);
    int grow = 0;
    for (; f(hi).value < 0.0; ++grow) {
      if (grow > 1100) throw NumericError("scalar dual update: no sign change found above " + std::to_string(t0));
      lo = hi;
      step *= 2.0;
      hi = t0 + step;
      if (opt.upper_bound) hi = std::min(hi, *opt.upper_bound);
    }
  }

  // Newton starts from t0 when it still bounds the bracket.
  double t = t0;
  MonotoneEval e = e0;
  if (t < lo || t > hi) {
    t = 0.5 * (lo + hi);
    e = f(t);
  }
  for (int it = 1; it <= opt.max_iters; ++it) {
    if (std::abs(e.value) <= opt.tol) return {t, it, true};
    if (e.value > 0.0) hi = t;
    else lo = t;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) return {t, it, true};
    double next = 0.5 * (lo + hi);
    if (std::isfinite(e.value) && e.slope > 0.0 && std::isfinite(e.slope)) {
      const double newton = t - e.value / e.slope;
      if (newton > lo && newton < hi) next = newton;
    }
    t = next;
    e = f(t);
  }
  return {t, opt.max_iters, std::abs(e.value) <= opt.tol};
}

/// Weighted moments of g under softmax(b + t g): returns {A(t), A'(t), A''(t)}
/// for A(t) = log sum_j exp(b_j + t g_j).
struct LseMoments {
  double value;
  double mean;
  double variance;
};

inline LseMoments lse_moments(const Eigen::ArrayXd& b, const Eigen::ArrayXd& g, double t) {
  const Eigen::ArrayXd z = b + t * g;
  const double m = z.maxCoeff();
  const Eigen::ArrayXd w = (z - m).exp();
  const double s = w.sum();
  const double mean = (w * g).sum() / s;
  const double second = (w * g.square()).sum() / s;
  return {m + std::log(s), mean, std::max(0.0, second - mean * mean)};
}

/// argmin_t log sum_j exp(b_j + t g_j); requires g to take both signs.
inline RootResult minimize_lse(const Eigen::ArrayXd& b, const Eigen::ArrayXd& g, double t0, RootOptions opt) {
  const double gmax = g.abs().maxCoeff();
  opt.initial_step = 1.0 / gmax;
  return monotone_root(
      [&](double t) {
        const auto m = lse_moments(b, g, t);
        return MonotoneEval{m.mean, m.variance};
      },
      t0, opt);
}

/// argmin_{t <= 0} exp(A(t)) - gamma t with A as in `minimize_lse`, gamma >= 0.
/// For gamma > 0 the stationarity condition exp(A) A' = gamma is solved in the
/// log form A + log A' - log gamma, which is increasing wherever A' > 0.
inline RootResult minimize_exp_lse_linear(const Eigen::ArrayXd& b, const Eigen::ArrayXd& g, double gamma, double t0,
                                          RootOptions opt) {
  opt.upper_bound = 0.0;
  const double gmax = g.abs().maxCoeff();
  opt.initial_step = 1.0 / gmax;
  if (!(gamma > 0.0)) {
    return monotone_root(
        [&](double t) {
          const auto m = lse_moments(b, g, t);
          return MonotoneEval{m.mean, m.variance};
        },
        t0, opt);
  }
  const double log_gamma = std::log(gamma);
  return monotone_root(
      [&](double t) {
        const auto m = lse_moments(b, g, t);
        if (!(m.mean > 0.0)) return MonotoneEval{-std::numeric_limits<double>::infinity(), 0.0};
        return MonotoneEval{m.value + std::log(m.mean) - log_gamma, m.mean + m.variance / m.mean};
      },
      t0, opt);
}

}  // namespace otf::detail
