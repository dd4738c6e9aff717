#include <gtest/gtest.h>

#include <cmath>

#include "fqgan/metrics.hpp"
#include "support/gradcheck.hpp"

using namespace fqgan;
using fqgan::testing::random_tensor;

namespace {

Tensor gaussian(std::size_t n, double mx, double my, double sx, double sy, Rng& rng) {
  Tensor t({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    t.at(i, 0) = mx + sx * rng.normal();
    t.at(i, 1) = my + sy * rng.normal();
  }
  return t;
}

}  // namespace

TEST(Frechet, IdenticalSetsScoreExactlyZero) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Tensor a = gaussian(3 + rng.index(50), rng.normal(), rng.normal(), 0.3, 2.0, rng);
    EXPECT_EQ(frechet_2d(a, a).value, 0.0);
  }
}

TEST(Frechet, ClosedFormForDiagonalCovariances) {
  // W2^2 between N(m1, diag(a1,b1)) and N(m2, diag(a2,b2)):
  // |m1-m2|^2 + (sqrt a1 - sqrt a2)^2 + (sqrt b1 - sqrt b2)^2
  Tensor a = Tensor::matrix(4, 2, {1, 0, -1, 0, 0, 2, 0, -2});
  Tensor b = Tensor::matrix(4, 2, {3, 1, 1, 1, 2, 4, 2, -2});
  const auto fa = fit_gaussian(a), fb = fit_gaussian(b);
  EXPECT_EQ(fa.cov[1], 0.0);
  EXPECT_EQ(fb.cov[1], 0.0);
  const double want = 4.0 + 1.0 + std::pow(std::sqrt(fa.cov[0]) - std::sqrt(fb.cov[0]), 2) +
                      std::pow(std::sqrt(fa.cov[3]) - std::sqrt(fb.cov[3]), 2);
  EXPECT_NEAR(frechet_2d(a, b).value, want, 1e-12);
}

TEST(Frechet, FitGaussianUsesUnbiasedCovariance) {
  const auto g = fit_gaussian(Tensor::matrix(3, 2, {0, 0, 1, 2, 2, 4}));
  EXPECT_DOUBLE_EQ(g.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(g.mean[1], 2.0);
  EXPECT_DOUBLE_EQ(g.cov[0], 1.0);
  EXPECT_DOUBLE_EQ(g.cov[1], 2.0);
  EXPECT_DOUBLE_EQ(g.cov[3], 4.0);
}

TEST(Frechet, MeanGapConverges) {
  Rng rng(2);
  const double d = 1.5;
  const Tensor a = gaussian(10000, 0, 0, 1, 1, rng);
  const Tensor b = gaussian(10000, d, 0, 1, 1, rng);
  EXPECT_NEAR(frechet_2d(a, b).value, d * d, 0.05 * d * d);
}

TEST(Frechet, SingularCovarianceIsRegularized) {
  const Tensor line = Tensor::matrix(3, 2, {0, 0, 1, 1, 2, 2});
  const auto s = frechet_2d(line, line);
  EXPECT_TRUE(std::isfinite(s.value));
  EXPECT_THROW(frechet_2d(Tensor::matrix(1, 2, {0, 0}), line), std::invalid_argument);
}

TEST(Mmd, PointMassesHaveClosedForm) {
  // a at origin (2 copies), b at distance r (2 copies):
  // k_aa = k_bb = 1, k_ab = exp(-r^2 / 2s^2); mmd2 = 2 - 2 k_ab
  const Tensor a = Tensor::matrix(2, 2, {0, 0, 0, 0});
  const Tensor b = Tensor::matrix(2, 2, {3, 4, 3, 4});
  EXPECT_NEAR(mmd2_unbiased(a, b, 5.0), 2.0 - 2.0 * std::exp(-25.0 / 50.0), 1e-15);
}

TEST(Mmd, UnbiasedNearZeroForSameDistribution) {
  Rng rng(3);
  const Tensor a = random_tensor({400, 2}, rng), b = random_tensor({400, 2}, rng);
  EXPECT_NEAR(mmd2_unbiased(a, b, 1.0), 0.0, 5e-3);
  EXPECT_GT(mmd2_unbiased(a, gaussian(400, 1, 0, 1, 1, rng), 1.0), 0.05);
}

TEST(Mmd, RejectsTooFewRows) {
  EXPECT_THROW(mmd2_unbiased(Tensor({1, 2}), Tensor({3, 2}), 1.0), std::invalid_argument);
  EXPECT_THROW(mmd2_unbiased(Tensor({2, 2}), Tensor({3, 3}), 1.0), std::invalid_argument);
}

TEST(Mmd, MedianBandwidth) {
  const Tensor a = Tensor::matrix(2, 1, {0, 1});
  const Tensor b = Tensor::matrix(1, 1, {3});
  // pooled distances 1, 3, 2
  EXPECT_EQ(median_bandwidth(a, b), 2.0);
  const Tensor same = Tensor::matrix(2, 1, {1, 1});
  EXPECT_EQ(median_bandwidth(same, same), 0.0);
}

TEST(Mmd, PermutationTestSeparatesShiftedSets) {
  Rng rng(4);
  const Tensor a = gaussian(100, 0, 0, 1, 1, rng), b = gaussian(100, 1, 0, 1, 1, rng);
  const auto t = mmd_permutation_test(a, b, median_bandwidth(a, b), 200, rng);
  EXPECT_LT(t.p_value, 0.01);
}

TEST(Mmd, PermutationTestNullPValueIsNotTiny) {
  Rng rng(5);
  const Tensor a = gaussian(60, 0, 0, 1, 1, rng), b = gaussian(60, 0, 0, 1, 1, rng);
  const auto t = mmd_permutation_test(a, b, median_bandwidth(a, b), 100, rng);
  EXPECT_GE(t.p_value, 1.0 / 101.0);
  EXPECT_LE(t.p_value, 1.0);
}

TEST(ModeCoverage, CountsCoveredModes) {
  const auto spec = ring_mixture(4, 2.0, 0.1);
  // 30 points on mode 0, 30 on mode 1, 30 far outside everything
  Tensor s({90, 2});
  for (std::size_t i = 0; i < 30; ++i) {
    s.at(i, 0) = 2.0, s.at(i, 1) = 0.01;
    s.at(30 + i, 0) = 0.0, s.at(30 + i, 1) = 2.0;
    s.at(60 + i, 0) = 10.0, s.at(60 + i, 1) = 10.0;
  }
  const auto r = mode_coverage(s, spec);
  EXPECT_EQ(r.total_modes, 4u);
  EXPECT_EQ(r.modes_covered, 2u);
  EXPECT_NEAR(r.high_quality_fraction, 60.0 / 90.0, 1e-15);
  std::size_t total = 0;
  for (auto c : r.counts) total += c;
  EXPECT_EQ(total, 90u);
}

TEST(ModeCoverage, MinCountThreshold) {
  const auto spec = ring_mixture(2, 1.0, 0.1);
  const Tensor s = Tensor::matrix(3, 2, {1, 0, 1, 0, -1, 0});
  EXPECT_EQ(mode_coverage(s, spec, 3.0, 2).modes_covered, 1u);
  EXPECT_EQ(mode_coverage(s, spec, 3.0, 1).modes_covered, 2u);
}

TEST(ModeCoverage, TrueSamplesCoverEverything) {
  Rng rng(6);
  const auto spec = ring_mixture(8, 2.0, 0.02);
  const auto r = mode_coverage(sample(spec, 2000, rng), spec);
  EXPECT_EQ(r.modes_covered, 8u);
  EXPECT_GT(r.high_quality_fraction, 0.98);
}

TEST(PerModeFrechet, EmptyWhereTooFewSamples) {
  Rng rng(7);
  const auto spec = ring_mixture(2, 2.0, 0.05);
  const Tensor real = sample(spec, 200, rng);
  Tensor gen({10, 2});
  for (std::size_t i = 0; i < 10; ++i) gen.at(i, 0) = 2.0 + 0.05 * rng.normal(), gen.at(i, 1) = 0.05 * rng.normal();
  const auto f = per_mode_frechet(gen, real, spec);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_TRUE(f[0].has_value());
  EXPECT_FALSE(f[1].has_value());
}

TEST(FeatureMmd, QuantizedFeaturesAreCodebookItems) {
  Rng rng(8);
  auto c = fqgan::testing::random_fq_case(rng);
  const Tensor x = random_tensor({40, 2}, rng);
  const Tensor y = random_tensor({40, 2}, rng);
  EXPECT_TRUE(std::isfinite(quantized_feature_mmd(c.model, x, y, 1)));
  EXPECT_TRUE(std::isfinite(hidden_feature_mmd(c.model, x, y, 1)));
  EXPECT_THROW(quantized_feature_mmd(c.model, x, y, 2), std::invalid_argument);
  const Tensor f = layer_features(c.model, x, 1, true);
  EXPECT_EQ(f.shape(), (Shape{80, 4}));
  for (std::size_t i = 0; i < f.rows(); ++i) {
    bool member = false;
    for (std::size_t k = 0; k < 4 && !member; ++k) member = f.row(i)[0] == c.model.fq_layers()[0].codebook.item(k)[0];
    EXPECT_TRUE(member);
  }
}
