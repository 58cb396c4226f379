#pragma once

// The two-network vocoder topology.
//
// Frame-rate network: conv3 -> conv3 -> (+ zero-extended input features)
// -> fc -> fc, all tanh, producing the conditioning vector f once per frame.
//
// Sample-rate network: GRU_A with block-sparse recurrent weights whose
// non-recurrent inputs are folded embedding lookups plus a per-frame
// conditioning term g = U f, then a small dense GRU_B on GRU_A's output,
// DualFC and softmax over the 256 excitation levels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"
#include "lpcnet/nn.hpp"

namespace lpcnet {

inline constexpr std::size_t kContextFrames = 5;  // t-2 .. t+2
inline constexpr std::size_t kLookaheadFrames = 2;

/// Feature frames t-2..t+2; frames outside the sequence are zero vectors.
using FeatureWindow = std::array<FeatureVector, kContextFrames>;

inline FeatureWindow window_at(std::span<const FeatureVector> seq, std::size_t t) {
  FeatureWindow w{};
  for (std::size_t k = 0; k < kContextFrames; ++k) {
    const auto i = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(kLookaheadFrames);
    if (i >= 0 && i < static_cast<std::ptrdiff_t>(seq.size())) w[k] = seq[static_cast<std::size_t>(i)];
  }
  return w;
}

// ---------------------------------------------------------------------------
// Frame-rate network.

struct FrameRateParams {
  Conv1dParams conv1;  // width x (3 * 20)
  Conv1dParams conv2;  // width x (3 * width)
  DenseLayer fc1;      // width x width
  DenseLayer fc2;      // cond x width

  std::size_t width() const { return conv1.outputs(); }
  std::size_t cond_size() const { return fc2.outputs(); }

  void validate() const {
    require_dims(conv1.inputs() == kNumFeatures && conv1.weight.cols() == 3 * kNumFeatures, "conv1 input");
    require_dims(conv1.bias.size() == conv1.outputs(), "conv1 bias");
    require_dims(conv2.weight.cols() == 3 * conv1.outputs() && conv2.bias.size() == conv2.outputs(), "conv2");
    require_dims(conv2.outputs() >= kNumFeatures, "conv2 width below feature count");
    require_dims(fc1.inputs() == conv2.outputs() && fc1.bias.size() == fc1.outputs(), "fc1");
    require_dims(fc2.inputs() == fc1.outputs() && fc2.bias.size() == fc2.outputs(), "fc2");
  }
};

struct FrameRateScratch {
  std::array<std::vector<float>, 3> c1;
  std::vector<float> c2, h1;

  explicit FrameRateScratch(const FrameRateParams& p)
      : c2(p.conv2.outputs()), h1(p.fc1.outputs()) {
    for (auto& v : c1) v.assign(p.conv1.outputs(), 0.0f);
  }
};

inline void frame_rate_forward(const FrameRateParams& p, const FeatureWindow& w, std::span<float> f,
                               FrameRateScratch& s) {
  require_dims(f.size() == p.cond_size(), "frame_rate_forward output");
  for (std::size_t k = 0; k < 3; ++k) conv1d_3(p.conv1, w[k], w[k + 1], w[k + 2], s.c1[k]);
  conv1d_3(p.conv2, s.c1[0], s.c1[1], s.c1[2], s.c2);
  for (std::size_t i = 0; i < kNumFeatures; ++i) s.c2[i] += w[kLookaheadFrames][i];
  dense_tanh(p.fc1, s.c2, s.h1);
  dense_tanh(p.fc2, s.h1, f);
}

inline std::vector<float> frame_rate_forward(const FrameRateParams& p, const FeatureWindow& w) {
  FrameRateScratch s(p);
  std::vector<float> f(p.cond_size());
  frame_rate_forward(p, w, f, s);
  return f;
}

inline std::vector<std::vector<float>> frame_rate_forward_all(const FrameRateParams& p,
                                                               std::span<const FeatureVector> seq) {
  FrameRateScratch s(p);
  std::vector<std::vector<float>> out(seq.size(), std::vector<float>(p.cond_size()));
  for (std::size_t t = 0; t < seq.size(); ++t) frame_rate_forward(p, window_at(seq, t), out[t], s);
  return out;
}

// ---------------------------------------------------------------------------
// Folded embeddings.

enum EmbeddedInput : std::size_t { kSignal = 0, kPrediction = 1, kExcitation = 2 };

/// V^(gate, input) for gates u, r, h and inputs s, p, e. Each matrix is
/// stored level-major: row j (256 rows) is the N_A-long column v_j.
struct FoldedEmbeddings {
  std::array<DenseMatrix, 9> v;

  static constexpr std::size_t index(std::size_t gate, std::size_t input) { return gate * 3 + input; }
  const DenseMatrix& at(std::size_t gate, std::size_t input) const { return v[index(gate, input)]; }
  std::span<const float> lookup(std::size_t gate, std::size_t input, MuLawLevel level) const {
    return at(gate, input).row(static_cast<std::size_t>(level.value()));
  }
};

/// Embedding table E (256 x d) and the GRU_A input submatrices U^(g,i)
/// (N_A x d each, indexed like FoldedEmbeddings).
struct UnfoldedEmbeddings {
  DenseMatrix embedding;
  std::array<DenseMatrix, 9> input;
};

/// V^(g,i) = U^(g,i) E, computed once.
inline FoldedEmbeddings fold_embeddings(const DenseMatrix& embedding, const std::array<DenseMatrix, 9>& input) {
  require_dims(embedding.rows() == kNumLevels, "embedding must have 256 rows");
  FoldedEmbeddings out;
  const std::size_t na = input[0].rows();
  for (std::size_t m = 0; m < 9; ++m) {
    const DenseMatrix& u = input[m];
    require_dims(u.rows() == na && u.cols() == embedding.cols(), "embedding input submatrix");
    DenseMatrix v(kNumLevels, na);
    for (std::size_t level = 0; level < kNumLevels; ++level) {
      const auto e = embedding.row(level);
      for (std::size_t r = 0; r < na; ++r) v(level, r) = static_cast<float>(dot(u.row(r), e));
    }
    out.v[m] = std::move(v);
  }
  return out;
}

inline FoldedEmbeddings fold_embeddings(const UnfoldedEmbeddings& u) { return fold_embeddings(u.embedding, u.input); }

// ---------------------------------------------------------------------------
// Sample-rate network.

struct SampleRateParams {
  GruParams<BlockSparseMatrix> gru_a;  // no input matrices: inputs are folded
  FoldedEmbeddings embed;
  std::array<DenseMatrix, 3> cond;     // U^(g) applied to f, N_A x cond
  GruParams<DenseMatrix> gru_b;        // input matrices N_B x N_A
  DualFcParams dual_fc;

  std::size_t na() const { return gru_a.hidden(); }
  std::size_t nb() const { return gru_b.hidden(); }
  std::size_t cond_size() const { return cond[0].cols(); }

  void validate() const {
    gru_a.validate();
    gru_b.validate();
    dual_fc.validate();
    require_dims(na() % kBlockRows == 0, "N_A must be divisible by 16");
    require_dims(!gru_a.has_input(), "GRU_A inputs must be folded");
    for (const auto& m : embed.v) require_dims(m.rows() == kNumLevels && m.cols() == na(), "folded embedding");
    for (const auto& c : cond) require_dims(c.rows() == na() && c.cols() == cond_size(), "conditioning matrix");
    require_dims(gru_b.has_input() && gru_b.input_size() == na(), "GRU_B input must be GRU_A output");
    require_dims(dual_fc.inputs() == nb() && dual_fc.outputs() == kNumLevels, "DualFC shape");
  }
};

/// g^(u), g^(r), g^(h): the conditioning vector's contribution to each gate.
struct ConditioningContribution {
  std::array<std::vector<float>, 3> g;

  ConditioningContribution() = default;
  explicit ConditioningContribution(std::size_t na) {
    for (auto& v : g) v.assign(na, 0.0f);
  }
};

inline void frame_setup(const SampleRateParams& p, std::span<const float> f, ConditioningContribution& out) {
  require_dims(f.size() == p.cond_size(), "frame_setup conditioning vector");
  for (std::size_t gate = 0; gate < 3; ++gate) {
    out.g[gate].resize(p.na());
    dense_gemv(p.cond[gate], f, out.g[gate]);
  }
}

inline ConditioningContribution frame_setup(const SampleRateParams& p, std::span<const float> f) {
  ConditioningContribution c(p.na());
  frame_setup(p, f, c);
  return c;
}

struct SampleRateState {
  std::vector<float> h_a, h_b;

  SampleRateState() = default;
  explicit SampleRateState(const SampleRateParams& p) : h_a(p.na(), 0.0f), h_b(p.nb(), 0.0f) {}
};

struct SampleRateScratch {
  std::array<std::vector<float>, 3> in_a, in_b;
  GruScratch gru_a, gru_b;
  DualFcScratch fc;
  std::array<float, kNumLevels> logits{};

  explicit SampleRateScratch(const SampleRateParams& p) : gru_a(p.na()), gru_b(p.nb()), fc(p.dual_fc) {
    for (auto& v : in_a) v.assign(p.na(), 0.0f);
    for (auto& v : in_b) v.assign(p.nb(), 0.0f);
  }
};

/// One sample of the sample-rate network up to the output logits, left in
/// `s.logits`. Updates the GRU states in place.
inline void sample_rate_logits(const SampleRateParams& p, SampleRateState& st, MuLawLevel s_prev, MuLawLevel p_cur,
                               MuLawLevel e_prev, const ConditioningContribution& g, SampleRateScratch& s) {
  const std::size_t na = p.na();
  require_dims(st.h_a.size() == na && st.h_b.size() == p.nb(), "sample_rate_step state");
  for (std::size_t gate = 0; gate < 3; ++gate) {
    require_dims(g.g[gate].size() == na, "conditioning contribution");
    const auto vs = p.embed.lookup(gate, kSignal, s_prev);
    const auto vp = p.embed.lookup(gate, kPrediction, p_cur);
    const auto ve = p.embed.lookup(gate, kExcitation, e_prev);
    const auto& gg = g.g[gate];
    auto& in = s.in_a[gate];
    for (std::size_t i = 0; i < na; ++i) in[i] = vs[i] + vp[i] + ve[i] + gg[i];
  }
  gru_step(p.gru_a, st.h_a, GateInputs{s.in_a[0], s.in_a[1], s.in_a[2]}, st.h_a, s.gru_a);
  for (std::size_t gate = 0; gate < 3; ++gate) dense_gemv(p.gru_b.input[gate], st.h_a, s.in_b[gate]);
  gru_step(p.gru_b, st.h_b, GateInputs{s.in_b[0], s.in_b[1], s.in_b[2]}, st.h_b, s.gru_b);
  dual_fc(p.dual_fc, st.h_b, s.logits, s.fc);
}

/// One sample of the sample-rate network. Updates the GRU states in place and
/// writes P(e_t).
inline void sample_rate_step(const SampleRateParams& p, SampleRateState& st, MuLawLevel s_prev, MuLawLevel p_cur,
                             MuLawLevel e_prev, const ConditioningContribution& g, SampleRateScratch& s,
                             ProbDist& out) {
  sample_rate_logits(p, st, s_prev, p_cur, e_prev, g, s);
  softmax(s.logits, out.p);
  if (!out.valid()) throw Error("sample_rate_step: output distribution is not normalized");
}

// ---------------------------------------------------------------------------

struct Model {
  FrameRateParams frame;
  SampleRateParams sample;

  void validate() const {
    frame.validate();
    sample.validate();
    require_dims(frame.cond_size() == sample.cond_size(), "conditioning size between networks");
  }
};

// ---------------------------------------------------------------------------
// Complexity accounting: two operations per weight per sample.

struct ComplexityInputs {
  double na = 384;
  double nb = 16;
  double levels = 256;
  double density = 0.1;
  double rate = 16000;
};

inline constexpr double kNeglectedTermsGflops = 0.5;

inline double complexity_weights_per_sample(const ComplexityInputs& c) {
  if (c.na < 0 || c.nb < 0 || c.levels < 0 || c.rate < 0 || c.density < 0 || c.density > 1) {
    throw std::domain_error("complexity: arguments must be non-negative with density in [0, 1]");
  }
  return 3.0 * c.density * c.na * c.na + 3.0 * c.nb * (c.na + c.nb) + 2.0 * c.nb * c.levels;
}

inline double complexity_gflops(const ComplexityInputs& c) {
  return complexity_weights_per_sample(c) * 2.0 * c.rate / 1e9;
}

/// Weights touched per sample by an actual model: GRU_A recurrent (blocks and
/// diagonal), GRU_B input and recurrent, DualFC.
inline double model_weights_per_sample(const SampleRateParams& p) {
  double w = 0.0;
  for (const auto& m : p.gru_a.recurrent) w += static_cast<double>(m.stored_weights());
  for (std::size_t g = 0; g < 3; ++g) {
    w += static_cast<double>(p.gru_b.input[g].rows() * p.gru_b.input[g].cols());
    w += static_cast<double>(p.gru_b.recurrent[g].rows() * p.gru_b.recurrent[g].cols());
  }
  w += static_cast<double>(p.dual_fc.w1.rows() * p.dual_fc.w1.cols() * 2);
  return w;
}

// ---------------------------------------------------------------------------
// Random initialization, used for benchmarks and tests.

struct ModelConfig {
  std::size_t na = 384;
  std::size_t nb = 16;
  std::size_t width = 128;  // frame-rate network width and conditioning size
  double density = 0.1;     // GRU_A recurrent density, diagonal included
  float scale = 1.0f;       // multiplier on the 1/sqrt(fan_in) init range
};

namespace detail {

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, float range, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-range, range);
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = dist(rng);
  return m;
}

inline std::vector<float> random_vector(std::size_t n, float range, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-range, range);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline float init_range(std::size_t fan_in, float scale) {
  return scale / std::sqrt(static_cast<float>(std::max<std::size_t>(fan_in, 1)));
}

}  // namespace detail

/// Random block-sparse n x n matrix whose stored weights (blocks and
/// diagonal) are as close as possible to density * n^2. Block slots on the
/// diagonal are zero.
inline BlockSparseMatrix random_block_sparse(std::size_t n, double density, float range, std::mt19937_64& rng) {
  const std::size_t groups = n / kBlockRows;
  const double target = density * static_cast<double>(n * n) - static_cast<double>(n);
  const auto count = static_cast<std::size_t>(std::clamp<double>(std::round(target / kBlockRows), 0.0,
                                                                  static_cast<double>(groups * n)));
  std::vector<std::uint32_t> slots(groups * n);
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<std::uint32_t>(i);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(count);
  std::uniform_real_distribution<float> dist(-range, range);
  std::vector<SparseBlock> blocks;
  std::vector<float> values;
  blocks.reserve(count);
  values.reserve(count * kBlockRows);
  for (std::uint32_t s : slots) {
    const SparseBlock b{static_cast<std::uint32_t>((s / n) * kBlockRows), static_cast<std::uint32_t>(s % n)};
    blocks.push_back(b);
    for (std::size_t j = 0; j < kBlockRows; ++j) {
      values.push_back(b.row_start + j == b.col ? 0.0f : dist(rng));
    }
  }
  return BlockSparseMatrix(n, n, std::move(blocks), std::move(values), detail::random_vector(n, range, rng));
}

/// Random unfolded GRU_A inputs with embedding size `dim`.
inline UnfoldedEmbeddings random_unfolded_embeddings(std::size_t na, std::size_t dim, float scale,
                                                      std::mt19937_64& rng) {
  UnfoldedEmbeddings u;
  u.embedding = detail::random_dense(kNumLevels, dim, scale, rng);
  for (auto& m : u.input) m = detail::random_dense(na, dim, detail::init_range(3 * dim, scale), rng);
  return u;
}

inline Model random_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.na % kBlockRows != 0) throw DimensionError("random_model: N_A must be divisible by 16");
  std::mt19937_64 rng(seed);
  const float s = cfg.scale;
  using detail::init_range;
  using detail::random_dense;
  using detail::random_vector;
  Model m;
  auto& fr = m.frame;
  fr.conv1 = {random_dense(cfg.width, 3 * kNumFeatures, init_range(3 * kNumFeatures, s), rng),
              random_vector(cfg.width, 0.1f * s, rng)};
  fr.conv2 = {random_dense(cfg.width, 3 * cfg.width, init_range(3 * cfg.width, s), rng),
              random_vector(cfg.width, 0.1f * s, rng)};
  fr.fc1 = {random_dense(cfg.width, cfg.width, init_range(cfg.width, s), rng), random_vector(cfg.width, 0.1f * s, rng)};
  fr.fc2 = {random_dense(cfg.width, cfg.width, init_range(cfg.width, s), rng), random_vector(cfg.width, 0.1f * s, rng)};

  auto& sr = m.sample;
  const float ra = init_range(cfg.na, s);
  for (std::size_t g = 0; g < 3; ++g) {
    sr.gru_a.recurrent[g] = random_block_sparse(cfg.na, cfg.density, ra / std::sqrt(static_cast<float>(cfg.density)), rng);
    sr.gru_a.bias[g] = random_vector(cfg.na, 0.1f * s, rng);
    sr.cond[g] = random_dense(cfg.na, cfg.width, init_range(cfg.width, s), rng);
  }
  sr.embed = fold_embeddings(random_unfolded_embeddings(cfg.na, 16, s, rng));
  for (std::size_t g = 0; g < 3; ++g) {
    sr.gru_b.recurrent[g] = random_dense(cfg.nb, cfg.nb, init_range(cfg.nb, s), rng);
    sr.gru_b.input[g] = random_dense(cfg.nb, cfg.na, init_range(cfg.na, s), rng);
    sr.gru_b.bias[g] = random_vector(cfg.nb, 0.1f * s, rng);
  }
  auto& fc = sr.dual_fc;
  fc.w1 = random_dense(kNumLevels, cfg.nb, init_range(cfg.nb, s), rng);
  fc.w2 = random_dense(kNumLevels, cfg.nb, init_range(cfg.nb, s), rng);
  fc.b1 = random_vector(kNumLevels, 0.1f * s, rng);
  fc.b2 = random_vector(kNumLevels, 0.1f * s, rng);
  fc.a1 = random_vector(kNumLevels, s, rng);
  fc.a2 = random_vector(kNumLevels, s, rng);
  m.validate();
  return m;
}

/// All-zero parameters of the given shape; GRU_A keeps an empty block list.
inline Model zero_model(const ModelConfig& cfg) {
  Model m = random_model(cfg, 0);
  auto zero = [](DenseMatrix& d) { std::fill(d.values().begin(), d.values().end(), 0.0f); };
  auto zerov = [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.0f); };
  zero(m.frame.conv1.weight), zerov(m.frame.conv1.bias);
  zero(m.frame.conv2.weight), zerov(m.frame.conv2.bias);
  zero(m.frame.fc1.weight), zerov(m.frame.fc1.bias);
  zero(m.frame.fc2.weight), zerov(m.frame.fc2.bias);
  auto& sr = m.sample;
  for (std::size_t g = 0; g < 3; ++g) {
    sr.gru_a.recurrent[g] = BlockSparseMatrix(cfg.na, cfg.na, {}, {}, std::vector<float>(cfg.na, 0.0f));
    zerov(sr.gru_a.bias[g]);
    zero(sr.cond[g]);
    zero(sr.gru_b.recurrent[g]);
    zero(sr.gru_b.input[g]);
    zerov(sr.gru_b.bias[g]);
  }
  for (auto& v : sr.embed.v) zero(v);
  zero(sr.dual_fc.w1), zero(sr.dual_fc.w2);
  zerov(sr.dual_fc.b1), zerov(sr.dual_fc.b2), zerov(sr.dual_fc.a1), zerov(sr.dual_fc.a2);
  return m;
}

}  // namespace lpcnet
