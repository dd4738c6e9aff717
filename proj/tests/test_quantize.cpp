#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fqgan/quantize.hpp"
#include "support/gradcheck.hpp"
#include "support/properties.hpp"

using namespace fqgan;
using fqgan::testing::random_tensor;

TEST(Codebook, DefaultsAndValidation) {
  vq::Codebook cb(4, 3, 0.5, 0.1);
  EXPECT_EQ(cb.size(), 4u);
  EXPECT_EQ(cb.dim(), 3u);
  EXPECT_EQ(cb.items(), Tensor({4, 3}, 0.0));
  EXPECT_EQ(cb.ema_count(2), 1.0);
  EXPECT_THROW(vq::Codebook(4, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(vq::Codebook(4, 3, -0.1), std::invalid_argument);
  EXPECT_THROW(vq::Codebook(4, 3, 0.9, -1.0), std::invalid_argument);
  EXPECT_NO_THROW(vq::Codebook(4, 3, 0.0));
}

TEST(Codebook, SetItemKeepsSumCountInvariant) {
  Rng rng(1);
  auto cb = vq::Codebook::random(3, 2, 0.9, 0.25, rng);
  const Tensor f = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const std::size_t idx[] = {1, 1};
  cb.ema_update(f, idx);
  const double v[] = {0.5, -0.5};
  cb.set_item(1, v);
  EXPECT_DOUBLE_EQ(cb.ema_sum(1)[0] / cb.ema_count(1), 0.5);
  EXPECT_DOUBLE_EQ(cb.ema_sum(1)[1] / cb.ema_count(1), -0.5);
}

TEST(Codebook, NearestBreaksTiesTowardLowestIndex) {
  vq::Codebook cb(3, 1);
  cb.set_items(Tensor::matrix(3, 1, {-1, 1, 1}));
  const double mid[] = {0.0};
  EXPECT_EQ(cb.nearest(mid).index, 0u);
  const double right[] = {1.0};
  EXPECT_EQ(cb.nearest(right).index, 1u);
  EXPECT_EQ(cb.nearest(right).distance2, 0.0);
}

TEST(Codebook, EmaUpdateSingleStepByHand) {
  vq::Codebook cb(2, 1, 0.5);
  cb.set_items(Tensor::matrix(2, 1, {4, 8}));
  const std::size_t idx[] = {0, 0};
  const auto counts = cb.ema_update(Tensor::matrix(2, 1, {1, 3}), idx);
  EXPECT_EQ(counts, (std::vector<std::size_t>{2, 0}));
  // m = 0.5*4 + 0.5*4 = 4, N = 0.5 + 0.5*2 = 1.5
  EXPECT_DOUBLE_EQ(cb.item(0)[0], 4.0 / 1.5);
  EXPECT_EQ(cb.item(1)[0], 8.0);
  EXPECT_EQ(cb.ema_count(1), 0.5);
}

TEST(Codebook, EmaUpdateRejectsBadInput) {
  vq::Codebook cb(2, 2);
  const std::size_t one[] = {0};
  const std::size_t bad[] = {2};
  EXPECT_THROW(cb.ema_update(Tensor({1, 3}), one), DimensionError);
  EXPECT_THROW(cb.ema_update(Tensor({2, 2}), one), DimensionError);
  EXPECT_THROW(cb.ema_update(Tensor({1, 2}), bad), std::out_of_range);
}

TEST(Codebook, MatchesGeometricOracle) {
  Rng rng(11);
  const auto r = fqgan::testing::ema_oracle_check(10, 20, rng);
  EXPECT_LE(r.max_deviation, 1e-10);
  EXPECT_TRUE(r.lambda_zero_exact);
  EXPECT_TRUE(r.unused_unchanged);
}

TEST(Codebook, TextRoundTripIsExact) {
  Rng rng(3);
  auto cb = vq::Codebook::random(8, 3, 0.37, 0.25, rng, vq::InitScheme::Uniform);
  const Tensor f = random_tensor({5, 3}, rng);
  const std::size_t idx[] = {0, 3, 3, 7, 1};
  cb.ema_update(f, idx);
  std::stringstream ss;
  cb.write(ss);
  EXPECT_EQ(vq::Codebook::read(ss), cb);
}

TEST(Codebook, ReadRejectsGarbage) {
  std::istringstream in("not a codebook\n");
  EXPECT_ANY_THROW(vq::Codebook::read(in));
}

TEST(Codebook, InitSchemeNames) {
  EXPECT_EQ(vq::parse_init_scheme("uniform"), vq::InitScheme::Uniform);
  EXPECT_EQ(vq::to_string(vq::InitScheme::UnitGaussian), "unit-gaussian");
  EXPECT_THROW(vq::parse_init_scheme("kmeans"), std::invalid_argument);
}

TEST(Quantize, InvariantsOnRandomInstances) {
  Rng rng(21);
  const auto r = fqgan::testing::quantization_invariants(2000, rng);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(Quantize, PositionsSplitRowsIntoVectors) {
  vq::Codebook cb(2, 2);
  cb.set_items(Tensor::matrix(2, 2, {0, 0, 10, 10}));
  const Tensor h = Tensor::matrix(1, 4, {9, 9, 1, -1});
  const auto a = vq::assign(h, 2, cb);
  EXPECT_EQ(a.indices, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(a.quantized, Tensor::matrix(1, 4, {10, 10, 0, 0}));
  EXPECT_EQ(a.counts, (std::vector<std::size_t>{1, 1}));
  EXPECT_THROW(vq::assign(Tensor({1, 5}), 2, cb), DimensionError);
}

TEST(Quantize, CommitLossValueAndNormalizer) {
  vq::Codebook cb(1, 2, 0.9, 0.5);
  cb.set_items(Tensor::matrix(1, 2, {1, 1}));
  ad::Tape tape;
  const auto h = tape.leaf(Tensor::matrix(2, 2, {0, 1, 3, 1}), true);
  const auto q = vq::quantize_map(h, cb, {1, 4.0, {}});
  // residual^2 sum = 1 + 4; beta 0.5; over 4
  EXPECT_DOUBLE_EQ(q.commit_loss, 0.5 * 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(q.commit.value()[0], q.commit_loss);
  EXPECT_DOUBLE_EQ(q.dict_loss, 5.0 / 4.0);
  EXPECT_EQ(q.output.value(), q.quantized);
  tape.backward(q.commit);
  // d/dh = 2 beta (h - e) / 4
  EXPECT_EQ(tape.grad(h), Tensor::matrix(2, 2, {-0.25, 0, 0.5, 0}));
}

TEST(Quantize, ValueFormCommitmentLossAveragesRows) {
  const Tensor h = Tensor::matrix(2, 1, {1, 3});
  const Tensor e = Tensor::matrix(2, 1, {0, 0});
  EXPECT_DOUBLE_EQ(vq::commitment_loss(h, e, 0.25), 0.25 * 10.0 / 2.0);
}

TEST(Quantize, StraightThroughContract) {
  Rng rng(31);
  const auto r = fqgan::testing::straight_through_check(20, rng);
  EXPECT_LE(r.max_relative_error, 1e-3);
  EXPECT_EQ(r.max_code_gradient, 0.0);
}

TEST(Quantize, CommitmentGivesNoGradientToCode) {
  ad::Tape tape;
  const auto h = tape.leaf(Tensor::matrix(1, 2, {1, 2}), true);
  const auto e = tape.leaf(Tensor::matrix(1, 2, {0, 5}), true);
  tape.backward(vq::commitment_loss(h, e, 0.25, 1.0));
  EXPECT_EQ(tape.grad(e), Tensor({1, 2}, 0.0));
  EXPECT_EQ(tape.grad(h), Tensor::matrix(1, 2, {0.5, -1.5}));
}

TEST(Quantize, UsageStatsPerplexity) {
  const std::size_t even[] = {5, 5, 5, 5};
  EXPECT_NEAR(vq::usage_stats(even).perplexity, 4.0, 1e-12);
  const std::size_t one[] = {0, 9, 0};
  EXPECT_NEAR(vq::usage_stats(one).perplexity, 1.0, 1e-12);
  const std::size_t none[] = {0, 0};
  EXPECT_THROW(vq::usage_stats(none), std::invalid_argument);
}
