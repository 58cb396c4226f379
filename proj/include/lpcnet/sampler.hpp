#pragma once

// Drawing the excitation level: pitch-dependent sharpening, probability
// floor, inverse-CDF draw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"
#include "lpcnet/log.hpp"
#include "lpcnet/nn.hpp"

namespace lpcnet {

inline constexpr double kDefaultFloor = 0.002;

/// SplitMix64 in counter form: output n is mix(seed + n * 0x9E3779B97F4A7C15)
/// for n = 1, 2, ... with Stafford's "Mix13" finalizer. Uniform doubles take
/// the top 53 bits.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// c = 1 + scale * max(0, 1.5 g_p - 0.5), with g_p clamped to [0, 1].
inline double temperature(double pitch_corr, double scale = 1.0) {
  const double g = std::clamp(pitch_corr, 0.0, 1.0);
  return 1.0 + scale * std::max(0.0, 1.5 * g - 0.5);
}

namespace detail {

/// Divides `out` by `sum`, subtracts the floor, clips at zero and renormalizes.
/// `top` is the index of the largest entry, kept alone when nothing survives.
inline bool floor_and_normalize(ProbDist& out, double sum, double floor, std::size_t top) {
  double kept = 0.0;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const double v = out.p[i] / sum - floor;
    out.p[i] = v > 0.0 ? v : 0.0;
    kept += out.p[i];
  }
  if (!(kept > 0.0)) {
    out.p.fill(0.0);
    out.p[top] = 1.0;
    return false;
  }
  for (std::size_t i = 0; i < kNumLevels; ++i) out.p[i] /= kept;
  return true;
}

}  // namespace detail

/// out = R(max(R(in^c) - T, 0)), R renormalizing to unit sum. The power is
/// taken in the log domain; zero entries stay zero. Returns false when every
/// entry falls under the floor, in which case `out` is one-hot on the argmax.
inline bool sharpen_and_floor(const ProbDist& in, double c, double floor, ProbDist& out) {
  double sum = 0.0;
  if (c == 1.0) {
    for (std::size_t i = 0; i < kNumLevels; ++i) sum += (out.p[i] = in.p[i]);
  } else {
    double mx = -HUGE_VAL;
    for (std::size_t i = 0; i < kNumLevels; ++i) {
      out.p[i] = in.p[i] > 0.0 ? c * std::log(in.p[i]) : -HUGE_VAL;
      mx = std::max(mx, out.p[i]);
    }
    for (std::size_t i = 0; i < kNumLevels; ++i) {
      out.p[i] = in.p[i] > 0.0 ? std::exp(out.p[i] - mx) : 0.0;
      sum += out.p[i];
    }
  }
  return detail::floor_and_normalize(out, sum, floor, out.argmax());
}

/// Same result as sharpen_and_floor(softmax(logits), c, floor): the sharpened
/// distribution is proportional to exp(c (z - max z)).
inline bool sharpen_and_floor_logits(std::span<const float, kNumLevels> logits, double c, double floor,
                                     ProbDist& out) {
  const auto top = std::max_element(logits.begin(), logits.end());
  const float mx = *top;
  const float cf = static_cast<float>(c);
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    out.p[i] = detail::exp_poly(cf * (logits[i] - mx));
    sum += out.p[i];
  }
  if (!std::isfinite(mx) || !std::isfinite(sum)) throw Error("sampler: non-finite logits");
  return detail::floor_and_normalize(out, sum, floor, static_cast<std::size_t>(top - logits.begin()));
}

inline ProbDist sharpen_and_floor(const ProbDist& in, double c, double floor = kDefaultFloor) {
  ProbDist out;
  sharpen_and_floor(in, c, floor, out);
  return out;
}

/// Inverse-CDF draw; never returns a zero-probability level.
inline MuLawLevel draw(const ProbDist& dist, SplitMix64& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (dist.p[i] <= 0.0) continue;
    acc += dist.p[i];
    last = static_cast<int>(i);
    if (u < acc) return MuLawLevel(last);
  }
  return MuLawLevel(last >= 0 ? last : MuLawLevel::kZero);
}

struct SamplerConfig {
  double floor = kDefaultFloor;
  double temp_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Per-stream sampler state: the RNG and a count of floor fallbacks.
class Sampler {
 public:
  explicit Sampler(const SamplerConfig& cfg = {}) : cfg_(cfg), rng_(cfg.seed) {}

  MuLawLevel sample(const ProbDist& dist, double pitch_corr) {
    note(sharpen_and_floor(dist, temperature(pitch_corr, cfg_.temp_scale), cfg_.floor, work_));
    return draw(work_, rng_);
  }

  /// Draws straight from network logits, skipping the explicit softmax.
  MuLawLevel sample_logits(std::span<const float, kNumLevels> logits, double pitch_corr) {
    note(sharpen_and_floor_logits(logits, temperature(pitch_corr, cfg_.temp_scale), cfg_.floor, work_));
    return draw(work_, rng_);
  }

  const SamplerConfig& config() const { return cfg_; }
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  void note(bool kept_mass) {
    if (kept_mass) return;
    ++fallbacks_;
    logger().warn("probability floor {} removed every level; falling back to argmax", cfg_.floor);
  }

  SamplerConfig cfg_;
  SplitMix64 rng_;
  ProbDist work_;
  std::size_t fallbacks_ = 0;
};

}  // namespace lpcnet
