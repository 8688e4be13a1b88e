#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "otf/evaluation.hpp"
#include "support.hpp"

using namespace otf;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) out(i++) = x;
  return out;
}

/// Eight samples: group-shifted scores among positives, the opposite shift
/// among negatives, so the pooled covariance cancels.
struct EoFixture {
  Eigen::VectorXd scores = vec({0.9, 0.7, 0.5, 0.3, 0.2, 0.4, 0.6, 0.8});
  Eigen::VectorXd labels = vec({1, 1, 1, 1, 0, 0, 0, 0});
  Eigen::MatrixXd S = [] {
    Eigen::MatrixXd s(8, 2);
    s << 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1;
    return s;
  }();
};

RunRecord run(const std::string& method, double alpha, double auc_value, const std::string& notion = "pdp") {
  RunRecord r;
  r.method = method;
  r.alpha = alpha;
  r.notion = notion;
  r.epsilon = 1e-3;
  r.metrics.auc = auc_value;
  r.metrics.pdp_violation = 0.1;
  r.metrics.peo_violation = 0.2;
  return r;
}

}  // namespace

TEST(Auc, PerfectRanking) {
  EXPECT_NEAR(auc(vec({0.9, 0.8, 0.2, 0.1}), vec({1, 1, 0, 0})), 1.0, 1e-12);
}

TEST(Auc, AllTiesIsHalf) {
  EXPECT_NEAR(auc(vec({0.4, 0.4, 0.4, 0.4}), vec({1, 1, 0, 0})), 0.5, 1e-12);
}

TEST(Auc, InterleavedPairs) {
  // Pairs (0.9, 0.8), (0.9, 0.2), (0.1, 0.8), (0.1, 0.2): two of four ordered correctly.
  EXPECT_NEAR(auc(vec({0.9, 0.1, 0.8, 0.2}), vec({1, 1, 0, 0})), 0.5, 1e-12);
}

TEST(Auc, PartialTiesCountHalf) {
  // Pairs: (0.5, 0.5) tie, (0.5, 0.1) win, (0.9, 0.5) win, (0.9, 0.1) win.
  EXPECT_NEAR(auc(vec({0.5, 0.9, 0.5, 0.1}), vec({1, 1, 0, 0})), 3.5 / 4.0, 1e-12);
}

TEST(Auc, SingleClassIsError) {
  EXPECT_THROW(auc(vec({0.1, 0.2}), vec({1, 1})), DataError);
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd s(300), y(300);
  for (Eigen::Index i = 0; i < 300; ++i) {
    y(i) = coin(rng);
    s(i) = normal(rng) + y(i);
  }
  const Eigen::VectorXd t = s.array().exp() * 3.0 + 1.0;
  EXPECT_NEAR(auc(s, y), auc(t, y), 1e-12);
}

TEST(PdpViolation, ScoresEqualToGroupColumn) {
  Eigen::MatrixXd S(4, 2);
  S << 1, 0, 0, 1, 1, 0, 0, 1;
  EXPECT_NEAR(pdp_violation(S.col(0), S), 1.0, 1e-12);
}

TEST(PdpViolation, IndependentScoresAreNearZero) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  Eigen::VectorXd s(10000);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(10000, 2);
  for (Eigen::Index i = 0; i < 10000; ++i) {
    s(i) = unit(rng);
    S(i, coin(rng) ? 1 : 0) = 1.0;
  }
  EXPECT_LT(pdp_violation(s, S), 0.05);
}

TEST(PdpViolation, ConstantScoresGiveZeroWithWarning) {
  Eigen::MatrixXd S(3, 1);
  S << 1, 0, 1;
  std::vector<std::string> warnings;
  EXPECT_EQ(pdp_violation(vec({0.3, 0.3, 0.3}), S, &warnings), 0.0);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("constant scores"), std::string::npos);
}

TEST(PdpViolation, InvariantUnderPositiveAffineMap) {
  const EoFixture f;
  const Eigen::VectorXd t = f.scores.array() * 0.01 + 0.4;
  EXPECT_NEAR(pdp_violation(f.scores.head(4), f.S.topRows(4)), pdp_violation(t.head(4), f.S.topRows(4)), 1e-12);
}

TEST(PeoViolation, ConstantWithinSlicesIsZero) {
  const EoFixture f;
  const Eigen::VectorXd s = vec({0.8, 0.8, 0.8, 0.8, 0.2, 0.2, 0.2, 0.2});
  EXPECT_EQ(peo_violation(s, f.S, f.labels), 0.0);
}

TEST(PeoViolation, ShiftAmongPositivesCancelsInPooledPdp) {
  const EoFixture f;
  // Within each slice the scores are an exact linear function of the group
  // indicator plus an orthogonal offset: deviations (0.3, 0.1, -0.1, -0.3)
  // against (0.5, 0.5, -0.5, -0.5) give 0.4 / sqrt(0.2 * 1) = 2 / sqrt(5).
  EXPECT_NEAR(peo_violation(f.scores, f.S, f.labels), 2.0 / std::sqrt(5.0), 1e-12);
  // Pooled, both groups sum to 2.2, so the covariance vanishes.
  EXPECT_NEAR(pdp_violation(f.scores, f.S), 0.0, 1e-12);
}

TEST(PeoViolation, IdenticalGroupsAreZero) {
  Eigen::MatrixXd S(8, 2);
  S << 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1;
  const Eigen::VectorXd s = vec({0.9, 0.9, 0.4, 0.4, 0.2, 0.2, 0.6, 0.6});
  EXPECT_NEAR(peo_violation(s, S, vec({1, 1, 1, 1, 0, 0, 0, 0})), 0.0, 1e-12);
}

TEST(PeoViolation, EmptySliceIsError) {
  const EoFixture f;
  EXPECT_THROW(peo_violation(f.scores, f.S, Eigen::VectorXd::Ones(8)), DataError);
}

TEST(EvaluateScores, PerAttributeBreakdown) {
  const EoFixture f;
  auto ds = otf::testing::make_dataset(f.S, f.labels);
  const auto r = evaluate_scores(f.scores, ds, Split::train);
  EXPECT_EQ(r.split, Split::train);
  ASSERT_EQ(r.per_attribute.count("group"), 1u);
  EXPECT_NEAR(r.per_attribute.at("group").second, r.peo_violation, 1e-15);
  EXPECT_NEAR(r.auc, auc(f.scores, f.labels), 1e-15);
  for (const double m : {r.auc, r.pdp_violation, r.peo_violation}) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
}

TEST(AggregateSweep, TwoRunsMeanAndStandardError) {
  const auto rows = aggregate_sweep({run("otf", 0.5, 0.8), run("otf", 0.5, 0.9)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].auc_mean, 0.85, 1e-12);
  EXPECT_NEAR(rows[0].auc_se, 0.05, 1e-12);
  EXPECT_EQ(rows[0].runs, 2u);
}

TEST(AggregateSweep, IdenticalRunsHaveZeroError) {
  std::vector<RunRecord> runs(10, run("norm", 0.3, 0.77));
  const auto rows = aggregate_sweep(runs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].auc_se, 0.0);
  EXPECT_EQ(rows[0].pdp_se, 0.0);
  EXPECT_NEAR(rows[0].violation_mean(), 0.1, 1e-15);
}

TEST(AggregateSweep, GroupsByMethodAndAlpha) {
  const auto rows = aggregate_sweep(
      {run("otf", 0.1, 0.8), run("otf", 0.1, 0.8), run("otf", 0.9, 0.7), run("otf", 0.9, 0.7), run("norm", 0.1, 0.6),
       run("norm", 0.1, 0.6)});
  EXPECT_EQ(rows.size(), 3u);
}

TEST(AggregateSweep, ContractViolations) {
  EXPECT_THROW(aggregate_sweep({}), DataError);
  EXPECT_THROW(aggregate_sweep({run("otf", 0.5, 0.8), run("otf", 0.5, 0.9, "peo")}), DataError);
  EXPECT_THROW(aggregate_sweep({run("otf", 0.5, 0.8)}), DataError);
}

TEST(AggregateSweep, PeoSweepReportsPeoViolation) {
  const auto rows = aggregate_sweep({run("otf", 0.5, 0.8, "peo"), run("otf", 0.5, 0.9, "peo")});
  EXPECT_NEAR(rows[0].violation_mean(), 0.2, 1e-15);
}
