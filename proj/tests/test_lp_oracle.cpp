#include <gtest/gtest.h>

#include <functional>
#include <limits>
#include <random>

#include "otf/lp_oracle.hpp"
#include "support.hpp"

using namespace otf;

namespace {

LpInstance two_point(bool relaxed) {
  LpInstance inst;
  inst.C.C = (Eigen::Matrix2d() << 0, 1, 1, 0).finished();
  inst.h = Eigen::Vector2d(0.8, 0.2);
  inst.G.G = Eigen::RowVector2d(1, -1);
  inst.relaxed = relaxed;
  return inst;
}

/// Exhaustive search over couplings whose entries are multiples of `step`.
double grid_optimum(const LpInstance& inst, double step) {
  const Eigen::Index n = inst.h.size();
  const Eigen::VectorXd gamma = (inst.G.G * inst.h).cwiseAbs();
  std::vector<long> units(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) units[static_cast<std::size_t>(i)] = std::lround(inst.h(i) / step);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  double best = std::numeric_limits<double>::infinity();
  // Distributes units[i] over row i, entry by entry.
  std::function<void(Eigen::Index, Eigen::Index, long)> fill = [&](Eigen::Index i, Eigen::Index j, long left) {
    if (i == n) {
      const Eigen::VectorXd r = inst.G.G * P.colwise().sum().transpose();
      const bool ok = inst.relaxed ? ((r.cwiseAbs() - gamma).array() <= 1e-12).all()
                                   : (r.cwiseAbs().array() <= 1e-12).all();
      if (ok) best = std::min(best, (inst.C.C.array() * P.array()).sum());
      return;
    }
    if (j == n - 1) {
      P(i, j) = static_cast<double>(left) * step;
      fill(i + 1, 0, i + 1 < n ? units[static_cast<std::size_t>(i + 1)] : 0);
      return;
    }
    for (long u = 0; u <= left; ++u) {
      P(i, j) = static_cast<double>(u) * step;
      fill(i, j + 1, left - u);
    }
  };
  fill(0, 0, units[0]);
  return best;
}

}  // namespace

TEST(SolveLp, TwoPointEquality) {
  const auto r = solve_lp(two_point(false));
  EXPECT_NEAR(r.cost, 0.3, 1e-12);
  EXPECT_NEAR(r.coupling(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(r.coupling(0, 1), 0.3, 1e-12);
  EXPECT_NEAR(r.coupling(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(r.coupling(1, 1), 0.2, 1e-12);
}

TEST(SolveLp, TwoPointRelaxedIsDiagonal) {
  const auto r = solve_lp(two_point(true));
  EXPECT_NEAR(r.cost, 0.0, 1e-12);
  EXPECT_TRUE(r.coupling.isApprox(Eigen::Vector2d(0.8, 0.2).asDiagonal().toDenseMatrix(), 1e-12));
}

TEST(SolveLp, FairScoresCostNothing) {
  auto inst = two_point(false);
  inst.h = Eigen::Vector2d(0.4, 0.4);
  EXPECT_NEAR(solve_lp(inst).cost, 0.0, 1e-12);
  inst.relaxed = true;
  EXPECT_NEAR(solve_lp(inst).cost, 0.0, 1e-12);
}

TEST(SolveLp, TooManySamplesIsSizeError) {
  LpInstance inst;
  inst.h = Eigen::VectorXd::Constant(17, 0.5);
  inst.C.C = Eigen::MatrixXd::Zero(17, 17);
  inst.G.G = Eigen::MatrixXd::Zero(1, 17);
  EXPECT_THROW(solve_lp(inst), ConfigError);
}

TEST(SolveLp, InfeasibleReturnsFarkasCertificate) {
  auto inst = two_point(false);
  inst.G.G = Eigen::RowVector2d(1, 1);  // G f = sum(h) > 0 for every coupling
  try {
    solve_lp(inst);
    FAIL() << "expected infeasibility";
  } catch (const LpInfeasibleError& e) {
    // Equality system of solve_lp: rows P 1 = h, then G P^T 1 = 0.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 4);
    A << 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1;
    const Eigen::Vector3d b(0.8, 0.2, 0.0);
    ASSERT_EQ(e.certificate.size(), 3);
    EXPECT_LE((e.certificate.transpose() * A).maxCoeff(), 1e-9);
    EXPECT_GT(e.certificate.dot(b), 1e-9);
  }
}

TEST(SolveStandardLp, SmallKnownProgram) {
  // min -x0 - x1 s.t. x0 + 2 x1 + s0 = 4, 3 x0 + x1 + s1 = 6.
  Eigen::MatrixXd A(2, 4);
  A << 1, 2, 1, 0, 3, 1, 0, 1;
  const auto sol = solve_standard_lp(A, Eigen::Vector2d(4, 6), Eigen::Vector4d(-1, -1, 0, 0));
  EXPECT_NEAR(sol.value, -2.8, 1e-12);
  EXPECT_NEAR(sol.x(0), 1.6, 1e-12);
  EXPECT_NEAR(sol.x(1), 1.2, 1e-12);
}

TEST(SolveStandardLp, RedundantRowsHandled) {
  Eigen::MatrixXd A(3, 3);
  A << 1, 1, 1, 2, 2, 2, 1, 0, 0;
  const auto sol = solve_standard_lp(A, Eigen::Vector3d(1, 2, 0.25), Eigen::Vector3d(3, 1, 2));
  EXPECT_NEAR(sol.value, 0.25 * 3 + 0.75 * 1, 1e-12);
}

TEST(SolveLp, MatchesGridSearch) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> units(1, 8);
  const double step = 0.05;
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index n = trial < 6 ? 2 : 3;
    auto base = otf::testing::random_instance(rng, n, 1);
    LpInstance inst;
    inst.C = base.C;
    inst.h.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) inst.h(i) = step * units(rng);
    // Group rows whose grid feasibility is guaranteed: PDP with a 1/(n-1) split.
    inst.G.G.resize(1, n);
    inst.G.G.setConstant(-1.0);
    inst.G.G(0, 0) = static_cast<double>(n - 1);
    for (const bool relaxed : {false, true}) {
      inst.relaxed = relaxed;
      const double grid = grid_optimum(inst, step);
      if (!std::isfinite(grid)) continue;
      const double lp = solve_lp(inst).cost;
      EXPECT_LE(lp, grid + 1e-9) << "trial " << trial;
      EXPECT_LE(grid - lp, step * inst.C.C.maxCoeff() + 1e-9) << "trial " << trial;
    }
  }
}

TEST(SolveLp, EqualityCostDominatesRelaxed) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const auto base = otf::testing::random_instance(rng, 2 + trial % 5, 1 + trial % 2);
    LpInstance inst{base.C, base.h, base.G, false};
    const double eq = solve_lp(inst).cost;
    inst.relaxed = true;
    const double rel = solve_lp(inst).cost;
    EXPECT_GE(eq, rel - 1e-10);
    EXPECT_GE(rel, -1e-12);
  }
}

TEST(SolveLp, CouplingIsFeasible) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto base = otf::testing::random_instance(rng, 5, 2);
    const auto r = solve_lp({base.C, base.h, base.G, false});
    EXPECT_GE(r.coupling.minCoeff(), -1e-12);
    EXPECT_LT((r.coupling.rowwise().sum() - base.h).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((base.G.G * r.coupling.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR((r.coupling.array() * base.C.C.array()).sum(), r.cost, 1e-12);
  }
}
