#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fqgan/config.hpp"
#include "fqgan/datasets.hpp"
#include "fqgan/rng.hpp"

using namespace fqgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fqgan_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Rng, SplitmixReferenceValues) {
  // published splitmix64 outputs for seed 0
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64_next(s), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(splitmix64_next(s), 0x6E789E6AA1B965F4ull);
}

TEST(Rng, SeedsViaSplitmix) {
  std::uint64_t s = 42;
  Rng rng(42);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rng.state().s[i], splitmix64_next(s));
}

TEST(Rng, Xoshiro256StarStarStep) {
  // reference: x = s1 * 5, rotl(x, 7) * 9 for state {1, 2, 3, 4}
  Rng rng;
  rng.set_state({{1, 2, 3, 4}, false, 0.0});
  EXPECT_EQ(rng.next_u64(), 11520u);
  EXPECT_EQ(rng.next_u64(), 0u);
  EXPECT_EQ(rng.next_u64(), 1509978240u);
}

TEST(Rng, StreamsDifferAndRepeat) {
  Rng a = Rng::stream(7, streams::kData), b = Rng::stream(7, streams::kLatent);
  Rng c = Rng::stream(7, streams::kData);
  EXPECT_NE(a.next_u64(), b.next_u64());
  c.next_u64();
  EXPECT_EQ(a.next_u64(), c.next_u64());
}

TEST(Rng, UniformAndIndexRanges) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.index(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, SpareSurvivesStateCopy) {
  Rng a(3);
  a.normal();
  ASSERT_TRUE(a.state().has_spare);
  Rng b;
  b.set_state(a.state());
  EXPECT_EQ(a.normal(), b.normal());
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Datasets, RingMeans) {
  const auto r = ring_mixture(4, 2.0, 0.1);
  ASSERT_EQ(r.modes(), 4u);
  EXPECT_EQ(r.means[0], (Point2{2.0, 0.0}));
  EXPECT_NEAR(r.means[1][0], 0.0, 1e-15);
  EXPECT_NEAR(r.means[1][1], 2.0, 1e-15);
  EXPECT_NO_THROW(r.validate());
}

TEST(Datasets, GridIsCentred) {
  const auto g = grid_mixture(3, 1.5, 0.05);
  ASSERT_EQ(g.modes(), 9u);
  EXPECT_EQ(g.means.front(), (Point2{-1.5, -1.5}));
  EXPECT_EQ(g.means[4], (Point2{0.0, 0.0}));
  EXPECT_EQ(g.means.back(), (Point2{1.5, 1.5}));
}

TEST(Datasets, ValidationRejectsDegenerateMixtures) {
  MixtureSpec s{{{0, 0}, {0, 0}}, 0.1};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.means = {{0, 0}};
  s.stddev = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(ring_mixture(0, 1.0, 0.1), std::invalid_argument);
}

TEST(Datasets, SampleIsSeedDeterministicAndNearModes) {
  const auto spec = ring_mixture(8, 2.0, 0.02);
  const Tensor a = sample(spec, 500, 9), b = sample(spec, 500, 9);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double r = std::hypot(a.at(i, 0), a.at(i, 1));
    EXPECT_NEAR(r, 2.0, 0.2);
  }
}

TEST(Datasets, SampleDrawOrder) {
  const auto spec = ring_mixture(8, 2.0, 0.5);
  Rng rng(4), mirror(4);
  const Tensor s = sample(spec, 3, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& m = spec.means[mirror.index(8)];
    const double x = m[0] + 0.5 * mirror.normal();
    const double y = m[1] + 0.5 * mirror.normal();
    EXPECT_EQ(s.at(i, 0), x);
    EXPECT_EQ(s.at(i, 1), y);
  }
}

TEST(Csv, RoundTripIsExact) {
  const Tensor t = sample(ring_mixture(3, 1.0, 0.3), 50, 1);
  const fs::path p = scratch("round.csv");
  save_csv(p, t);
  EXPECT_EQ(load_csv(p, 2), t);
}

TEST(Csv, HeaderAndErrors) {
  const fs::path p = scratch("bad.csv");
  {
    std::ofstream f(p);
    f << "x,y\n1,2\n3,4\n";
  }
  EXPECT_EQ(load_csv(p, 2, true), Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_THROW(load_csv(p, 2, false), CsvError);
  EXPECT_THROW(load_csv(p, 3, true), CsvError);
  EXPECT_THROW(load_csv(scratch("missing.csv"), 2), CsvError);
  {
    std::ofstream f(p);
    f << "1,abc\n";
  }
  EXPECT_THROW(load_csv(p, 2), CsvError);
}

TEST(Config, TextRoundTrip) {
  TrainConfig c;
  c.fq_layers = {1, 3};
  c.lambda = 0.1 + 0.2;
  c.g_loss = GeneratorLoss::Minimax;
  c.codebook_init = vq::InitScheme::Uniform;
  c.seed = 123456789012345ull;
  EXPECT_EQ(parse_config(to_config_text(c)), c);
  c.fq_layers.clear();
  EXPECT_EQ(parse_config(to_config_text(c)), c);
}

TEST(Config, EveryKeyReadsBack) {
  const TrainConfig c;
  for (const auto& key : config_keys()) {
    TrainConfig d;
    EXPECT_NO_THROW(apply_setting(d, key, config_value(c, key))) << key;
  }
}

TEST(Config, ParsesCommentsAndReportsLine) {
  const auto c = parse_config("# comment\n\nlambda = 0.5\nfq_layers=none\n");
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_TRUE(c.fq_layers.empty());
  try {
    parse_config("lambda=0.5\nbogus=1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(parse_config("batch_size=-3\n"), ConfigError);
  EXPECT_THROW(parse_config("use_ema=maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("lambda=1.5\n").validate(), std::invalid_argument);
}
