#include <gtest/gtest.h>

#include <random>

#include "otf/fairness_constraints.hpp"
#include "support.hpp"

using namespace otf;
using otf::testing::make_dataset;

namespace {

TabularDataset single_column(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  return make_dataset(Eigen::MatrixXd(s), y);
}

TabularDataset random_groups(std::uint64_t seed, Eigen::Index n, Eigen::Index groups) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, groups - 1);
  std::bernoulli_distribution coin(0.4);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, groups);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // First 2 * groups rows cover every (group, label) cell.
    const Eigen::Index g = i < 2 * groups ? i % groups : pick(rng);
    S(i, g) = 1.0;
    Y(i) = i < 2 * groups ? double(i / groups) : double(coin(rng));
  }
  return make_dataset(S, Y);
}

}  // namespace

TEST(Pdp, AlternatingColumn) {
  const auto G = build_pdp(single_column(Eigen::Vector4d(1, 0, 1, 0), Eigen::Vector4d(1, 0, 1, 0)));
  ASSERT_EQ(G.rows(), 1);
  EXPECT_EQ(G.G.row(0), Eigen::RowVector4d(1, -1, 1, -1));
  EXPECT_EQ(G.notion, Notion::pdp);
}

TEST(Pdp, ConstantOnesColumnGivesZeroRow) {
  const auto G = build_pdp(single_column(Eigen::Vector4d::Ones(), Eigen::Vector4d(1, 0, 1, 0)));
  EXPECT_EQ(G.G.row(0), Eigen::RowVector4d::Zero());
}

TEST(Pdp, EmptyGroupNamesTheGroup) {
  Eigen::MatrixXd S(3, 2);
  S << 1, 0, 1, 0, 1, 0;
  try {
    build_pdp(make_dataset(S, Eigen::Vector3d(0, 1, 0)));
    FAIL() << "expected a degenerate-group error";
  } catch (const DegenerateGroupError& e) {
    EXPECT_NE(std::string(e.what()).find("group=1"), std::string::npos);
  }
}

TEST(Pdp, ContinuousRatioForm) {
  auto ds = single_column(Eigen::Vector4d(1, 2, 3, 6), Eigen::Vector4d(1, 0, 1, 0));
  ds.sensitive_spec[0].kind = SensitiveKind::continuous;
  const auto G = build_pdp(ds);
  EXPECT_TRUE(G.G.row(0).isApprox(Eigen::RowVector4d(1, 2, 3, 6) / 3.0 - Eigen::RowVector4d::Ones()));
  EXPECT_EQ(G.row_labels[0].find("(cov)"), std::string::npos);
}

TEST(Pdp, ContinuousNearZeroMeanUsesCovarianceForm) {
  auto ds = single_column(Eigen::Vector4d(-1.5, -0.5, 0.5, 1.5), Eigen::Vector4d(1, 0, 1, 0));
  ds.sensitive_spec[0].kind = SensitiveKind::continuous;
  const auto G = build_pdp(ds);
  const double sd = std::sqrt(1.25);
  EXPECT_TRUE(G.G.row(0).isApprox(Eigen::RowVector4d(-1.5, -0.5, 0.5, 1.5) / sd));
  EXPECT_NE(G.row_labels[0].find("(cov)"), std::string::npos);
}

TEST(Peo, ConditionalRow) {
  const auto G = build_peo(single_column(Eigen::Vector4d(1, 0, 1, 0), Eigen::Vector4d(1, 1, 0, 0)));
  ASSERT_EQ(G.rows(), 2);
  // Row k + l * d_S with k = 0, l = 1.
  EXPECT_EQ(G.G.row(1), Eigen::RowVector4d(1, -1, 0, 0));
  EXPECT_EQ(G.G.row(0), Eigen::RowVector4d(0, 0, 1, -1));
  EXPECT_EQ(G.notion, Notion::peo);
}

TEST(Peo, AllLabelsEqualIsDegenerate) {
  EXPECT_THROW(build_peo(single_column(Eigen::Vector4d(1, 0, 1, 0), Eigen::Vector4d::Ones())), DegenerateGroupError);
}

TEST(Peo, FairByConstructionScoresAreAnnihilated) {
  Eigen::MatrixXd S(6, 2);
  S << 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1;
  const Eigen::VectorXd Y = (Eigen::VectorXd(6) << 1, 1, 1, 1, 0, 0).finished();
  // Within Y = 1 both groups average 0.6; within Y = 0 both equal 0.3.
  const Eigen::VectorXd f = (Eigen::VectorXd(6) << 0.8, 0.5, 0.4, 0.7, 0.3, 0.3).finished();
  const auto G = build_peo(make_dataset(S, Y));
  EXPECT_LT((G.G * f).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::VectorXd unfair = (Eigen::VectorXd(6) << 0.9, 0.5, 0.9, 0.5, 0.3, 0.3).finished();
  EXPECT_GT((G.G * unfair).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Constraints, RowsAreCentered) {
  const auto ds = random_groups(5, 400, 3);
  const auto pdp = build_pdp(ds);
  for (Eigen::Index r = 0; r < pdp.rows(); ++r) EXPECT_LT(std::abs(pdp.G.row(r).sum()) / 400.0, 1e-9);
  const auto peo = build_peo(ds);
  for (int l = 0; l < 2; ++l) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < ds.size(); ++j)
        if (ds.Y(j) == l) sum += peo.G(k + l * 3, j);
      EXPECT_LT(std::abs(sum) / 400.0, 1e-9);
    }
  }
}

TEST(Constraints, ConstantScoresAreFair) {
  const auto ds = random_groups(6, 250, 4);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(250, 0.37);
  EXPECT_LT((build_pdp(ds).G * h).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((build_peo(ds).G * h).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Constraints, ZeroResidualIffZeroCorrelation) {
  const auto ds = random_groups(7, 300, 2);
  const auto G = build_pdp(ds);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd h(300);
    for (auto& v : h) v = normal(rng);
    const Eigen::VectorXd fair = otf::testing::project_to_null_space(G.G, h);
    for (Eigen::Index k = 0; k < ds.S.cols(); ++k) {
      const Eigen::ArrayXd a = fair.array() - fair.mean();
      const Eigen::ArrayXd s = ds.S.col(k).array() - ds.S.col(k).mean();
      EXPECT_LT(std::abs((a * s).sum()) / std::sqrt(a.square().sum() * s.square().sum()), 1e-10);
    }
    // And a vector with nonzero correlation has nonzero residual.
    const Eigen::VectorXd biased = fair + ds.S.col(0);
    EXPECT_GT((G.G * biased).cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Concat, StacksRowsAndLabels) {
  const auto ds = random_groups(9, 50, 2);
  const auto a = build_pdp(ds);
  const auto b = build_pdp(ds);
  const auto c = concat({a, b});
  EXPECT_EQ(c.rows(), 4);
  EXPECT_EQ(c.notion, Notion::composite);
  EXPECT_EQ(c.row_labels.size(), 4u);
  EXPECT_EQ(c.G.topRows(2), a.G);
  EXPECT_EQ(c.G.bottomRows(2), b.G);
}

TEST(Concat, SingleMatrixIsIdentity) {
  const auto a = build_peo(random_groups(10, 40, 2));
  const auto c = concat({a});
  EXPECT_EQ(c.G, a.G);
  EXPECT_EQ(c.row_labels, a.row_labels);
  EXPECT_EQ(c.notion, a.notion);
}

TEST(Concat, MismatchedSampleCountIsDimensionError) {
  EXPECT_THROW(concat({build_pdp(random_groups(1, 40, 2)), build_pdp(random_groups(1, 41, 2))}), DimensionError);
}

TEST(RestrictToBatch, AllIndicesIsIdentity) {
  const auto a = build_pdp(random_groups(11, 30, 3));
  std::vector<Eigen::Index> all(30);
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  EXPECT_EQ(restrict_to_batch(a, all).G, a.G);
}

TEST(RestrictToBatch, SingleColumnKeepsFullSetExpectation) {
  const auto G = build_pdp(single_column(Eigen::Vector4d(1, 0, 1, 0), Eigen::Vector4d(1, 0, 1, 0)));
  const auto b = restrict_to_batch(G, {0});
  ASSERT_EQ(b.G.cols(), 1);
  EXPECT_EQ(b.G(0, 0), 1.0);
}

TEST(RestrictToBatch, InvalidIndicesRejected) {
  const auto G = build_pdp(single_column(Eigen::Vector4d(1, 0, 1, 0), Eigen::Vector4d(1, 0, 1, 0)));
  EXPECT_THROW(restrict_to_batch(G, {1, 1}), DimensionError);
  EXPECT_THROW(restrict_to_batch(G, {4}), DimensionError);
  EXPECT_THROW(restrict_to_batch(G, {-1}), DimensionError);
}

TEST(RestrictToBatch, CommutesWithConcat) {
  const auto ds = random_groups(12, 60, 2);
  const auto a = build_pdp(ds);
  const auto b = build_peo(ds);
  const std::vector<Eigen::Index> idx{5, 17, 3, 42, 59};
  EXPECT_EQ(restrict_to_batch(concat({a, b}), idx).G, concat({restrict_to_batch(a, idx), restrict_to_batch(b, idx)}).G);
}

TEST(Notion, ParseRoundTrip) {
  EXPECT_EQ(parse_notion("pdp"), Notion::pdp);
  EXPECT_EQ(parse_notion(to_string(Notion::peo)), Notion::peo);
  EXPECT_THROW(parse_notion("dp"), ConfigError);
}
