#include <gtest/gtest.h>

#include <cmath>

#include "lpcnet/nn.hpp"
#include "lpcnet/sampler.hpp"

using namespace lpcnet;

namespace {

ProbDist uniform() {
  ProbDist d;
  d.p.fill(1.0 / 256.0);
  return d;
}

}  // namespace

TEST(Temperature, KnownValues) {
  EXPECT_DOUBLE_EQ(temperature(0.0), 1.0);
  EXPECT_DOUBLE_EQ(temperature(1.0 / 3.0), 1.0);
  EXPECT_DOUBLE_EQ(temperature(0.2), 1.0);
  EXPECT_DOUBLE_EQ(temperature(0.5), 1.25);
  EXPECT_DOUBLE_EQ(temperature(1.0), 2.0);
}

TEST(Temperature, ScaleAndClamp) {
  EXPECT_DOUBLE_EQ(temperature(1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(temperature(1.0, 2.0), 3.0);
  EXPECT_DOUBLE_EQ(temperature(1.7), 2.0);
  EXPECT_DOUBLE_EQ(temperature(-0.4), 1.0);
}

TEST(SharpenAndFloor, UniformUnchanged) {
  const auto out = sharpen_and_floor(uniform(), 1.0, 0.002);
  for (double p : out.p) EXPECT_NEAR(p, 1.0 / 256.0, 1e-15);
}

TEST(SharpenAndFloor, SmallMassRemoved) {
  ProbDist d;
  d.p[0] = 0.999;
  d.p[1] = 0.001;
  const auto out = sharpen_and_floor(d, 1.0, 0.002);
  EXPECT_DOUBLE_EQ(out.p[0], 1.0);
  EXPECT_DOUBLE_EQ(out.p[1], 0.0);
}

TEST(SharpenAndFloor, SquaringHandCase) {
  ProbDist d;
  d.p[0] = 0.8;
  d.p[1] = 0.2;
  const auto out = sharpen_and_floor(d, 2.0, 0.0);
  EXPECT_NEAR(out.p[0], 0.941, 1e-3);
  EXPECT_NEAR(out.p[1], 0.059, 1e-3);
}

TEST(SharpenAndFloor, OutputIsValidAndKeepsArgmax) {
  SplitMix64 rng(5);
  for (int t = 0; t < 200; ++t) {
    ProbDist d;
    double s = 0.0;
    for (auto& p : d.p) s += (p = std::pow(rng.uniform(), 4.0));
    for (auto& p : d.p) p /= s;
    const double c = 1.0 + rng.uniform();
    const auto out = sharpen_and_floor(d, c, 0.002);
    EXPECT_TRUE(out.valid(1e-6));
    EXPECT_EQ(out.argmax(), d.argmax());
    // Every surviving entry had more than T of the sharpened mass.
    double sharp_sum = 0.0;
    for (double p : d.p) sharp_sum += std::pow(p, c);
    for (std::size_t i = 0; i < kNumLevels; ++i) {
      if (out.p[i] > 0.0) EXPECT_GT(std::pow(d.p[i], c) / sharp_sum, 0.002);
    }
  }
}

TEST(SharpenAndFloor, FloorAboveEverythingFallsBackToArgmax) {
  ProbDist out;
  EXPECT_FALSE(sharpen_and_floor(uniform(), 1.0, 0.5, out));
  EXPECT_DOUBLE_EQ(out.p[0], 1.0);
  EXPECT_DOUBLE_EQ(out.sum(), 1.0);
}

TEST(Sampler, CountsFallbacks) {
  SamplerConfig cfg;
  cfg.floor = 0.5;
  Sampler s(cfg);
  EXPECT_EQ(s.sample(uniform(), 0.0).value(), 0);
  EXPECT_EQ(s.fallbacks(), 1u);
}

TEST(Draw, OneHot) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    ProbDist d;
    d.p[77] = 1.0;
    SplitMix64 rng(seed);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(draw(d, rng).value(), 77);
  }
}

TEST(Draw, DeterministicForSeed) {
  auto run = [] {
    SplitMix64 rng(1234);
    std::vector<int> v;
    const auto d = uniform();
    for (int i = 0; i < 1000; ++i) v.push_back(draw(d, rng).value());
    return v;
  };
  EXPECT_EQ(run(), run());
}

TEST(Draw, NeverPicksZeroMass) {
  ProbDist d;
  d.p[10] = 0.5;
  d.p[200] = 0.5;
  SplitMix64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const int v = draw(d, rng).value();
    EXPECT_TRUE(v == 10 || v == 200);
  }
}

TEST(Draw, FrequenciesWithinThreeSigma) {
  ProbDist d;
  double s = 0.0;
  for (std::size_t i = 0; i < kNumLevels; ++i) s += (d.p[i] = 1.0 + static_cast<double>(i % 7));
  for (auto& p : d.p) p /= s;
  SplitMix64 rng(77);
  const int n = 200000;
  std::array<int, kNumLevels> counts{};
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(draw(d, rng).value())];
  int outside = 0;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const double mean = n * d.p[i];
    const double sigma = std::sqrt(n * d.p[i] * (1.0 - d.p[i]));
    if (std::abs(counts[i] - mean) > 3.0 * sigma) ++outside;
  }
  // 256 independent-ish cells: about 0.7 expected outside 3 sigma.
  EXPECT_LE(outside, 4);
}

TEST(SplitMix64, KnownSequence) {
  // Reference values of the standard SplitMix64 generator seeded with 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(rng.counter(), 2u);
}

TEST(SharpenAndFloor, LogitsPathMatchesProbabilityPath) {
  SplitMix64 rng(8);
  for (int t = 0; t < 100; ++t) {
    std::array<float, kNumLevels> z{};
    for (auto& v : z) v = static_cast<float>(8.0 * rng.uniform() - 4.0);
    const double c = 1.0 + rng.uniform();
    const auto a = sharpen_and_floor(softmax(z), c, 0.002);
    ProbDist b;
    sharpen_and_floor_logits(z, c, 0.002, b);
    for (std::size_t i = 0; i < kNumLevels; ++i) ASSERT_NEAR(a.p[i], b.p[i], 1e-6) << i;
  }
}

TEST(SharpenAndFloor, NonFiniteLogitsThrow) {
  std::array<float, kNumLevels> z{};
  ProbDist out;
  for (std::size_t at : {std::size_t{0}, std::size_t{3}, std::size_t{255}}) {
    auto bad = z;
    bad[at] = std::nanf("");
    EXPECT_THROW(sharpen_and_floor_logits(bad, 1.0, 0.002, out), Error) << at;
  }
}
