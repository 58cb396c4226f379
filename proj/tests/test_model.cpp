#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lpcnet/model.hpp"
#include "oracles.hpp"

using namespace lpcnet;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.na = 64;
  c.nb = 16;
  c.width = 32;
  c.density = 0.2;
  return c;
}

std::vector<FeatureVector> random_features(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<FeatureVector> out(n);
  for (auto& f : out) {
    for (auto& v : f) v = g(rng);
  }
  return out;
}

}  // namespace

TEST(FrameNetwork, WindowPadsWithZeros) {
  std::vector<FeatureVector> seq(3);
  for (std::size_t t = 0; t < 3; ++t) seq[t].fill(static_cast<float>(t + 1));
  const auto w = window_at(seq, 0);
  EXPECT_EQ(w[0], FeatureVector{});
  EXPECT_EQ(w[1], FeatureVector{});
  EXPECT_EQ(w[2], seq[0]);
  EXPECT_EQ(w[4], seq[2]);
  const auto last = window_at(seq, 2);
  EXPECT_EQ(last[3], FeatureVector{});
  EXPECT_EQ(last[4], FeatureVector{});
}

TEST(FrameNetwork, ZeroWeightsGiveOutputBias) {
  Model m = zero_model(small_config());
  for (std::size_t i = 0; i < m.frame.fc2.bias.size(); ++i) m.frame.fc2.bias[i] = 0.01f * static_cast<float>(i);
  std::mt19937_64 rng(31);
  const auto seq = random_features(4, rng);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto f = frame_rate_forward(m.frame, window_at(seq, t));
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_FLOAT_EQ(f[i], std::tanh(m.frame.fc2.bias[i]));
  }
}

TEST(FrameNetwork, ResidualCarriesCentreFeatures) {
  Model m = zero_model(small_config());
  for (std::size_t i = 0; i < m.frame.width(); ++i) m.frame.fc1.weight(i, i) = 1.0f;
  for (std::size_t i = 0; i < m.frame.cond_size(); ++i) m.frame.fc2.weight(i, i) = 1.0f;
  FeatureWindow w{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) w[2][i] = 0.05f * static_cast<float>(i);
  const auto f = frame_rate_forward(m.frame, w);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const float x = i < kNumFeatures ? w[2][i] : 0.0f;
    EXPECT_NEAR(f[i], std::tanh(std::tanh(x)), 1e-6);
  }
}

TEST(FrameNetwork, BatchEqualsPerWindow) {
  std::mt19937_64 rng(32);
  const Model m = random_model(small_config(), 3);
  const auto seq = random_features(7, rng);
  const auto all = frame_rate_forward_all(m.frame, seq);
  for (std::size_t t = 0; t < seq.size(); ++t) EXPECT_EQ(all[t], frame_rate_forward(m.frame, window_at(seq, t)));
}

TEST(Embeddings, IdentityTableGivesInputMatrices) {
  std::mt19937_64 rng(33);
  DenseMatrix e(256, 256);
  for (std::size_t i = 0; i < 256; ++i) e(i, i) = 1.0f;
  std::array<DenseMatrix, 9> u;
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& m : u) {
    m = DenseMatrix(16, 256);
    for (auto& v : m.values()) v = d(rng);
  }
  const auto folded = fold_embeddings(e, u);
  for (std::size_t k = 0; k < 9; ++k) {
    for (std::size_t level = 0; level < 256; ++level) {
      for (std::size_t r = 0; r < 16; ++r) ASSERT_EQ(folded.v[k](level, r), u[k](r, level));
    }
  }
}

TEST(Embeddings, FoldedColumnsMatchProducts) {
  std::mt19937_64 rng(34);
  const auto un = random_unfolded_embeddings(32, 16, 1.0f, rng);
  const auto folded = fold_embeddings(un);
  for (std::size_t k = 0; k < 9; ++k) {
    for (std::size_t level = 0; level < 256; ++level) {
      const auto ref = oracle::gemv(un.input[k], oracle::to_double(un.embedding.row(level)));
      for (std::size_t r = 0; r < 32; ++r) ASSERT_NEAR(folded.v[k](level, r), ref[r], 1e-6);
    }
  }
}

TEST(Embeddings, RejectsWrongTableSize) {
  std::array<DenseMatrix, 9> u;
  for (auto& m : u) m = DenseMatrix(16, 8);
  EXPECT_THROW(fold_embeddings(DenseMatrix(255, 8), u), DimensionError);
}

TEST(FrameSetup, ZeroConditioningGivesZero) {
  const Model m = random_model(small_config(), 4);
  const auto g = frame_setup(m.sample, std::vector<float>(m.sample.cond_size(), 0.0f));
  for (const auto& v : g.g) EXPECT_EQ(v, std::vector<float>(m.sample.na(), 0.0f));
}

TEST(FrameSetup, IsLinear) {
  std::mt19937_64 rng(35);
  const Model m = random_model(small_config(), 5);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> f(m.sample.cond_size()), f3(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng), f3[i] = 3.0f * f[i];
  const auto a = frame_setup(m.sample, f);
  const auto b = frame_setup(m.sample, f3);
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t i = 0; i < a.g[g].size(); ++i) EXPECT_NEAR(b.g[g][i], 3.0f * a.g[g][i], 1e-5);
  }
}

TEST(SampleNetwork, ZeroWeightsGiveUniform) {
  const Model m = zero_model(small_config());
  SampleRateState st(m.sample);
  SampleRateScratch s(m.sample);
  const auto g = frame_setup(m.sample, std::vector<float>(m.sample.cond_size(), 0.0f));
  ProbDist out;
  sample_rate_step(m.sample, st, MuLawLevel(3), MuLawLevel(200), MuLawLevel(128), g, s, out);
  for (double p : out.p) EXPECT_DOUBLE_EQ(p, 1.0 / 256.0);
}

TEST(SampleNetwork, Deterministic) {
  const Model m = random_model(small_config(), 6);
  auto run = [&] {
    SampleRateState st(m.sample);
    SampleRateScratch s(m.sample);
    const auto g = frame_setup(m.sample, std::vector<float>(m.sample.cond_size(), 0.3f));
    ProbDist out;
    for (int i = 0; i < 5; ++i) sample_rate_step(m.sample, st, MuLawLevel(10 + i), MuLawLevel(100), MuLawLevel(250 - i), g, s, out);
    return out.p;
  };
  EXPECT_EQ(run(), run());
}

TEST(SampleNetwork, FoldedPathMatchesLiteralPath) {
  const ModelConfig cfg = small_config();
  Model m = random_model(cfg, 7);
  std::mt19937_64 rng(36);
  const auto un = random_unfolded_embeddings(cfg.na, 16, 1.0f, rng);
  m.sample.embed = fold_embeddings(un);
  oracle::LiteralSampleNet ref(m.sample, un);

  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> f(m.sample.cond_size());
  for (auto& v : f) v = d(rng);
  const auto g = frame_setup(m.sample, f);
  SampleRateState st(m.sample);
  SampleRateScratch s(m.sample);
  ProbDist out;
  std::uniform_int_distribution<int> level(0, 255);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const MuLawLevel a(level(rng)), b(level(rng)), c(level(rng));
    sample_rate_step(m.sample, st, a, b, c, g, s, out);
    const auto logits = ref.step(a, b, c, oracle::to_double(f));
    for (std::size_t i = 0; i < kNumLevels; ++i) worst = std::max(worst, std::abs(logits[i] - s.logits[i]));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Complexity, DefaultConfiguration) {
  const double g = complexity_gflops({});
  EXPECT_NEAR(g, 2.292, 0.0005);
  EXPECT_NEAR(g + kNeglectedTermsGflops, 2.8, 0.1);
}

TEST(Complexity, ZeroDensityAndZeroGruB) {
  ComplexityInputs c;
  c.density = 0.0;
  c.nb = 0.0;
  EXPECT_EQ(complexity_gflops(c), 0.0);
}

TEST(Complexity, RejectsNegative) {
  ComplexityInputs c;
  c.na = -1;
  EXPECT_THROW(complexity_gflops(c), std::domain_error);
  c.na = 384;
  c.density = 1.5;
  EXPECT_THROW(complexity_gflops(c), std::domain_error);
}

TEST(Complexity, RandomModelMatchesFormula) {
  const Model m = random_model({}, 8);
  double density = 0.0;
  for (const auto& r : m.sample.gru_a.recurrent) density += r.density();
  density /= 3.0;
  EXPECT_NEAR(density, 0.1, 0.001);
  const double formula = complexity_weights_per_sample({});
  EXPECT_NEAR(model_weights_per_sample(m.sample) / formula, 1.0, 0.05);
}

TEST(RandomModel, DiagonalSlotsInBlocksAreZero) {
  const Model m = random_model(small_config(), 9);
  for (const auto& r : m.sample.gru_a.recurrent) {
    for (std::size_t b = 0; b < r.block_count(); ++b) {
      const auto blk = r.blocks()[b];
      if (blk.col >= blk.row_start && blk.col < blk.row_start + kBlockRows) {
        EXPECT_EQ(r.block_values()[b * kBlockRows + (blk.col - blk.row_start)], 0.0f);
      }
    }
  }
}

TEST(RandomModel, RejectsIndivisibleSize) {
  ModelConfig c = small_config();
  c.na = 40;
  EXPECT_THROW(random_model(c, 1), DimensionError);
}
