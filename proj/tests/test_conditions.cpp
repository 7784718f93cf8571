#include <gtest/gtest.h>

#include <cmath>

#include "odcl/clustering.hpp"
#include "oracles.hpp"

using namespace odcl;

namespace {

PointSet four_points() {
  Mat A(4, 1);
  A << 0.0, 0.1, 10.0, 10.1;
  return PointSet(A);
}

const Assignment kTwo{0, 0, 1, 1};

Mat random_rotation(std::uint64_t seed, Index d) {
  odcl::Rng rng(seed, {Domain::kMisc, 9});
  Mat G(d, d);
  for (Index i = 0; i < G.size(); ++i) {
    G.data()[i] = rng.normal();
  }
  Eigen::HouseholderQR<Mat> qr(G);
  return qr.householderQ();
}

}  // namespace

TEST(Separability, FourPointExamples) {
  const auto pts = four_points();
  const auto ok = check_separability(pts, kTwo, 2.0);
  EXPECT_NEAR(ok.max_radius, 0.05, 1e-12);
  EXPECT_NEAR(ok.min_center_gap, 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(ok.alpha_required, 2.0);
  EXPECT_TRUE(ok.holds);
  EXPECT_FALSE(check_separability(pts, kTwo, 300.0).holds);
}

TEST(Separability, SingleClusterHoldsTrivially) {
  const auto r = check_separability(four_points(), {0, 0, 0, 0}, 50.0);
  EXPECT_TRUE(std::isinf(r.min_center_gap));
  EXPECT_TRUE(r.holds);
}

TEST(Separability, Errors) {
  const auto pts = four_points();
  EXPECT_THROW(check_separability(pts, kTwo, 1.0), InvalidArgument);
  EXPECT_THROW(check_separability(pts, {0, 0, 2, 2}, 2.0), InvalidArgument);
  EXPECT_THROW(check_separability(pts, {0, 0, 1}, 2.0), InvalidArgument);
}

TEST(Separability, InvariantUnderTranslationRotationAndScale) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = oracle::separable_instance(
        seed, 20, 5, [](int m, int s) { return alpha_convex(m, s); });
    const Index d = inst.points.cols();
    const double alpha = alpha_convex(static_cast<int>(inst.points.rows()), inst.smallest);
    const auto base = check_separability(PointSet(inst.points), inst.truth, alpha);
    ASSERT_TRUE(base.holds);

    odcl::Rng rng(seed, {Domain::kMisc, 10});
    Eigen::RowVectorXd shift(d);
    for (Index c = 0; c < d; ++c) {
      shift[c] = 100.0 * rng.normal();
    }
    const Mat moved = (inst.points * random_rotation(seed, d)).rowwise() + shift;
    const auto r = check_separability(PointSet(moved), inst.truth, alpha);
    EXPECT_EQ(r.holds, base.holds);
    EXPECT_NEAR(r.max_radius, base.max_radius, 1e-9 * (1.0 + base.max_radius));
    EXPECT_NEAR(r.min_center_gap, base.min_center_gap, 1e-9 * base.min_center_gap);

    const auto s = check_separability(PointSet(3.5 * inst.points), inst.truth, alpha);
    EXPECT_EQ(s.holds, base.holds);
    EXPECT_NEAR(s.max_radius, 3.5 * base.max_radius, 1e-9 * (1.0 + base.max_radius));
  }
}

TEST(LambdaInterval, FourPointExample) {
  const auto [lo, hi] = lambda_interval(four_points(), kTwo);
  EXPECT_NEAR(lo, 0.025, 1e-12);
  EXPECT_NEAR(hi, 2.5, 1e-12);
}

TEST(LambdaInterval, CoincidentClustersHaveZeroLowerEnd) {
  Mat A(5, 2);
  A << 1, 1, 1, 1, 1, 1, -3, 2, -3, 2;
  const auto [lo, hi] = lambda_interval(PointSet(A), {0, 0, 0, 1, 1});
  EXPECT_EQ(lo, 0.0);
  EXPECT_GT(hi, 0.0);
}

TEST(LambdaInterval, SingleClusterIsAnError) {
  EXPECT_THROW(lambda_interval(four_points(), {0, 0, 0, 0}), InvalidArgument);
}

TEST(LambdaInterval, NonemptyUnderSufficientSeparation) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = oracle::separable_instance(
        seed, 16, 4, [](int m, int s) { return alpha_convex(m, s); });
    const auto [lo, hi] = lambda_interval(PointSet(inst.points), inst.truth);
    EXPECT_LT(lo, hi) << "seed " << seed;
  }
}

TEST(VerifyRecovery, FourPointTruth) {
  const auto pts = four_points();
  // diameters 0.1 over size 2; gap 10 over 2*4 - 2 - 2
  const auto rc = verify_recovery(pts, kTwo, 1.0);
  EXPECT_NEAR(rc.lower, 0.05, 1e-12);
  EXPECT_NEAR(rc.upper, 2.5, 1e-12);
  EXPECT_TRUE(rc.holds);
  EXPECT_FALSE(verify_recovery(pts, kTwo, 0.01).holds);
  EXPECT_FALSE(verify_recovery(pts, kTwo, 2.5).holds);
}

TEST(CenterSeparation, FourPointBothNorms) {
  const auto cs = center_separation_holds(four_points(), kTwo, 10.0);
  // residuals +-0.05: |A - C|_F = 0.1 = |A - C|_2, and min(sqrt(2) * 0.1, 0.1) = 0.1
  EXPECT_NEAR(cs.frobenius_norm, 0.1, 1e-12);
  EXPECT_NEAR(cs.spectral_norm, 0.1, 1e-12);
  ASSERT_EQ(cs.delta.size(), 2u);
  EXPECT_NEAR(cs.delta[0], 0.1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cs.max_c, 10.0 / (2.0 * 0.1 / std::sqrt(2.0)), 1e-9);
  EXPECT_TRUE(cs.holds);
  EXPECT_FALSE(center_separation_holds(four_points(), kTwo, 71.0).holds);
}

TEST(CenterSeparation, SpectralBranchWhenResidualsSpread) {
  // residuals +-e1, +-e2 in one cluster and +-e3, +-e4 in the other: all
  // singular values sqrt(2), so sqrt(K) |.|_2 = 2 < |.|_F = sqrt(8)
  Mat A = Mat::Zero(8, 5);
  for (int j = 0; j < 4; ++j) {
    A(2 * j, j) = 1.0;
    A(2 * j + 1, j) = -1.0;
  }
  A.bottomRows(4).col(4).array() += 20.0;
  const Assignment truth{0, 0, 0, 0, 1, 1, 1, 1};
  const auto cs = center_separation_holds(PointSet(A), truth, 1.0);
  EXPECT_NEAR(cs.spectral_norm, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cs.frobenius_norm, std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(cs.delta[0], 2.0 / 2.0, 1e-12);
  EXPECT_NEAR(cs.max_c, 20.0 / 2.0, 1e-9);
}

TEST(CenterSeparation, ZeroRadiusHoldsForAnyC) {
  Mat A(4, 2);
  A << 0, 0, 0, 0, 1, 0, 1, 0;
  const auto cs = center_separation_holds(PointSet(A), kTwo, 1e9);
  EXPECT_TRUE(cs.holds);
  EXPECT_EQ(cs.delta[0], 0.0);
}

TEST(CenterSeparation, Errors) {
  EXPECT_THROW(center_separation_holds(four_points(), kTwo, 0.0), InvalidArgument);
  EXPECT_THROW(center_separation_holds(four_points(), {1, 1, 1, 1}, 1.0), InvalidArgument);
}

// |A - C|_F <= sqrt(m) max_radius gives Delta_k <= sqrt(m) max_radius / sqrt(|C_(K)|),
// so separability with alpha = 2 c sqrt(m) / sqrt(|C_(K)|) is enough.
TEST(CenterSeparation, ImpliedBySeparability) {
  for (const double c : {1.0, 4.0}) {
    auto alpha = [c](int m, int s) {
      return std::max(1.01, 2.0 * c * std::sqrt(static_cast<double>(m) / s));
    };
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto inst = oracle::separable_instance(seed, 24, 5, alpha);
      const PointSet pts(inst.points);
      const int m = static_cast<int>(pts.size());
      ASSERT_TRUE(check_separability(pts, inst.truth, alpha(m, inst.smallest)).holds);
      EXPECT_TRUE(center_separation_holds(pts, inst.truth, c).holds)
          << "c " << c << " seed " << seed;
    }
  }
}

// Dropping the square root on |C_(K)| is not enough: equal-radius 1-D
// clusters of size 4 give Delta_k = sqrt(m) r / 2 while the gap is only
// required to exceed 2 c sqrt(m) r / 4.
TEST(CenterSeparation, WeakerSeparationFactorIsNotSufficient) {
  const double c = 1.0;
  Mat A(8, 1);
  A << -1, -1, 1, 1, 0, 0, 0, 0;
  A.bottomRows(4) = A.topRows(4);
  const double alpha = 2.0 * c * std::sqrt(8.0) / 4.0;
  A.bottomRows(4).array() += 1.05 * alpha;
  const Assignment truth{0, 0, 0, 0, 1, 1, 1, 1};
  const PointSet pts(A);
  ASSERT_TRUE(check_separability(pts, truth, alpha).holds);
  EXPECT_FALSE(center_separation_holds(pts, truth, c).holds);
}
