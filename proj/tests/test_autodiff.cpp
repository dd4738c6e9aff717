#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fqgan/ops.hpp"
#include "support/gradcheck.hpp"

using namespace fqgan;
using fqgan::testing::random_tensor;

TEST(Tensor, ShapeAndValues) {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
  EXPECT_EQ(t.reshaped({3, 2}).at(2, 1), 6.0);
}

TEST(Tensor, RejectsZeroExtentsAndBadLengths) {
  EXPECT_THROW(Tensor({0, 2}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::matrix(2, 2, {1, 2, 3}).reshaped({3, 1}), DimensionError);
}

TEST(Tape, ChainRuleOnSmallGraph) {
  // f = sum((a * b) + a) with a = [1 2], b = [3 4]: df/da = b + 1, df/db = a
  ad::Tape tape;
  const auto a = tape.leaf(Tensor::matrix(1, 2, {1, 2}), true);
  const auto b = tape.leaf(Tensor::matrix(1, 2, {3, 4}), true);
  const auto f = ad::sum(ad::add(ad::mul(a, b), a));
  EXPECT_EQ(f.value()[0], 1 * 3 + 1 + 2 * 4 + 2);
  tape.backward(f);
  EXPECT_EQ(tape.grad(a), Tensor::matrix(1, 2, {4, 5}));
  EXPECT_EQ(tape.grad(b), Tensor::matrix(1, 2, {1, 2}));
}

TEST(Tape, SecondBackwardThrows) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::scalar(2.0), true);
  const auto y = ad::square(x);
  tape.backward(y);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(y), ad::TapeError);
}

TEST(Tape, BackwardNeedsSingleElementOrSeed) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}), true);
  const auto y = ad::square(x);
  EXPECT_THROW(tape.backward(y), DimensionError);
  tape.backward(y, Tensor({2, 2}, 1.0));
  EXPECT_EQ(tape.grad(x), Tensor::matrix(2, 2, {2, 4, 6, 8}));
}

TEST(Tape, RejectsForeignVariables) {
  ad::Tape a, b;
  const auto x = a.leaf(Tensor::scalar(1.0), true);
  const auto y = b.leaf(Tensor::scalar(1.0), true);
  EXPECT_THROW(ad::add(x, y), ad::TapeError);
  EXPECT_THROW(b.backward(x), ad::TapeError);
}

TEST(Tape, RequiresGradPropagatesFromParents) {
  ad::Tape tape;
  const auto c = tape.leaf(Tensor::scalar(1.0));
  const auto p = tape.leaf(Tensor::scalar(2.0), true);
  EXPECT_FALSE(ad::square(c).requires_grad());
  EXPECT_TRUE(ad::mul(c, p).requires_grad());
  EXPECT_FALSE(ad::stop_gradient(p).requires_grad());
}

TEST(Tape, GradOfUnreachedNodeIsZero) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::matrix(1, 3, {1, 2, 3}), true);
  const auto unused = tape.leaf(Tensor::matrix(1, 2, {5, 6}), true);
  tape.backward(ad::sum(x));
  EXPECT_EQ(tape.grad(unused), Tensor({1, 2}, 0.0));
}

TEST(Tape, BackwardVisitsNodesInReverseOrder) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::scalar(0.5), true);
  const auto y = ad::tanh(x);
  const auto z = ad::square(y);
  tape.backward(z);
  const auto& trace = tape.backward_trace();
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GT(trace[i - 1], trace[i]);
  EXPECT_EQ(trace.front(), z.id());
}

TEST(StopGradient, DetachedBranchNeverAccumulates) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::matrix(1, 2, {1.5, -2.0}), true);
  const auto s = ad::stop_gradient(x);
  tape.backward(ad::sum(ad::mul(s, s)));
  EXPECT_EQ(tape.grad(x), Tensor({1, 2}, 0.0));
  EXPECT_EQ(tape.grad(s), Tensor({1, 2}, 0.0));
}

TEST(StopGradient, ForwardIsIdentity) {
  ad::Tape tape;
  const Tensor v = Tensor::matrix(2, 1, {3.25, -1e-300});
  EXPECT_EQ(ad::stop_gradient(tape.leaf(v, true)).value(), v);
}

TEST(StopGradient, ConstantPassesThrough) {
  ad::Tape tape;
  const auto c = tape.leaf(Tensor::matrix(1, 2, {1.0, 2.0}));
  EXPECT_EQ(ad::stop_gradient(c).id(), c.id());
}

TEST(StraightThrough, ValueIsQuantizedExactly) {
  ad::Tape tape;
  const Tensor q = Tensor::matrix(1, 3, {0.1, 0.2, 0.3});
  const Tensor h = Tensor::matrix(1, 3, {0.7, -1e-17, 1e17});
  const auto out = ad::straight_through(tape.leaf(q, true), tape.leaf(h, true));
  EXPECT_EQ(out.value(), q);
}

TEST(StraightThrough, GradientPassesToOriginalOnly) {
  ad::Tape tape;
  const auto q = tape.leaf(Tensor::matrix(1, 2, {1, 2}), true);
  const auto h = tape.leaf(Tensor::matrix(1, 2, {3, 5}), true);
  const auto out = ad::straight_through(q, h);
  tape.backward(ad::sum(ad::square(out)));
  EXPECT_EQ(tape.grad(h), Tensor::matrix(1, 2, {2, 4}));  // 2 * q
  EXPECT_EQ(tape.grad(q), Tensor({1, 2}, 0.0));
}

TEST(Ops, ShapeErrors) {
  ad::Tape tape;
  const auto a = tape.leaf(Tensor({2, 3}));
  const auto b = tape.leaf(Tensor({2, 2}));
  EXPECT_THROW(ad::matmul(a, b), DimensionError);
  EXPECT_THROW(ad::add(a, b), DimensionError);
  EXPECT_THROW(ad::add_bias(a, tape.leaf(Tensor({2}))), DimensionError);
  EXPECT_THROW(ad::slice_rows(a, 1, 2), DimensionError);
  const std::size_t bad[] = {2};
  EXPECT_THROW(ad::gather_rows(a, bad), DimensionError);
}

TEST(Ops, LogRejectsNonPositive) {
  ad::Tape tape;
  EXPECT_THROW(ad::log(tape.leaf(Tensor::matrix(1, 2, {1.0, 0.0}))), DomainError);
  EXPECT_THROW(ad::log(tape.leaf(Tensor::matrix(1, 1, {-2.0}))), DomainError);
}

TEST(Ops, SoftplusIsStableAtExtremes) {
  ad::Tape tape;
  const auto y = ad::softplus(tape.leaf(Tensor::matrix(1, 3, {-800, 0, 800})));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_DOUBLE_EQ(y.value()[1], std::log(2.0));
  EXPECT_EQ(y.value()[2], 800.0);
  const auto s = ad::log_sigmoid(tape.leaf(Tensor::matrix(1, 1, {-800})));
  EXPECT_EQ(s.value()[0], -800.0);
}

TEST(Ops, MatmulMatchesNaiveProduct) {
  Rng rng(5);
  for (std::size_t m : {1u, 4u, 7u})
    for (std::size_t k : {1u, 3u, 16u})
      for (std::size_t n : {1u, 15u, 16u, 33u}) {
        const Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
        ad::Tape tape;
        const Tensor c = ad::matmul(tape.leaf(a), tape.leaf(b)).value();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
            EXPECT_EQ(c.at(i, j), s) << m << "x" << k << "x" << n;
          }
      }
}

TEST(Ops, GatherRowsScatterAddsRepeats) {
  ad::Tape tape;
  const auto t = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}), true);
  const std::size_t idx[] = {1, 1, 0};
  const auto g = ad::gather_rows(t, idx);
  EXPECT_EQ(g.value(), Tensor::matrix(3, 2, {3, 4, 3, 4, 1, 2}));
  tape.backward(ad::sum(g));
  EXPECT_EQ(tape.grad(t), Tensor::matrix(2, 2, {1, 1, 2, 2}));
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const auto& c = fqgan::testing::op_cases()[GetParam()];
  Rng rng(1000 + GetParam());
  for (int trial = 0; trial < 20; ++trial) {
    const auto inputs = c.inputs(rng);
    EXPECT_LE(fqgan::testing::gradient_error(c, inputs, rng), 1e-4) << c.name << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range<std::size_t>(0, fqgan::testing::op_cases().size()),
                         [](const auto& info) {
                           std::string n = fqgan::testing::op_cases()[info.param].name;
                           for (char& ch : n)
                             if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                           return n;
                         });
