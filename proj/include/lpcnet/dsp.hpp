#pragma once

// Sample-domain primitives: emphasis filters, mu-law companding, Bark-band
// cepstral analysis and open-loop pitch search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lpcnet/common.hpp"

namespace lpcnet {

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

/// Mono PCM at 16 kHz. Samples must be finite; filter outputs may exceed the
/// nominal [-1, 1) range, so only finiteness is enforced.
struct AudioBuffer {
  static constexpr int rate = kSampleRate;
  std::vector<float> samples;

  AudioBuffer() = default;
  explicit AudioBuffer(std::vector<float> s) : samples(std::move(s)) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i])) {
        throw Error("AudioBuffer: non-finite sample at index " + std::to_string(i));
      }
    }
  }

  std::size_t size() const { return samples.size(); }
  std::span<const float> view() const { return samples; }
};

// ---------------------------------------------------------------------------
// Emphasis filters. E(z) = 1 - alpha z^-1 and its inverse D(z).

class EmphasisState {
 public:
  explicit EmphasisState(float alpha = kEmphasisAlpha) : alpha_(alpha) {}

  float alpha() const { return alpha_; }
  double mem = 0.0;

 private:
  float alpha_;
};

inline float preemphasize_sample(float x, EmphasisState& st) {
  const double y = static_cast<double>(x) - st.alpha() * st.mem;
  st.mem = x;
  return static_cast<float>(y);
}

inline float deemphasize_sample(float x, EmphasisState& st) {
  const double y = static_cast<double>(x) + st.alpha() * st.mem;
  st.mem = y;
  return static_cast<float>(y);
}

inline void preemphasize(std::span<const float> in, std::span<float> out, EmphasisState& st) {
  require_dims(in.size() == out.size(), "preemphasize in/out");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = preemphasize_sample(in[i], st);
}

inline void deemphasize(std::span<const float> in, std::span<float> out, EmphasisState& st) {
  require_dims(in.size() == out.size(), "deemphasize in/out");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = deemphasize_sample(in[i], st);
}

inline AudioBuffer preemphasize(const AudioBuffer& in, EmphasisState& st) {
  AudioBuffer out;
  out.samples.resize(in.size());
  preemphasize(in.view(), out.samples, st);
  return out;
}

inline AudioBuffer deemphasize(const AudioBuffer& in, EmphasisState& st) {
  AudioBuffer out;
  out.samples.resize(in.size());
  deemphasize(in.view(), out.samples, st);
  return out;
}

// ---------------------------------------------------------------------------
// 8-bit mu-law, scale-referenced to |x| = 1.0.

class MuLawLevel {
 public:
  static constexpr int kZero = 128;

  constexpr MuLawLevel() = default;
  constexpr explicit MuLawLevel(int level) : level_(level) {
    if (level < 0 || level > 255) throw std::out_of_range("mu-law level out of range");
  }

  constexpr int value() const { return level_; }
  constexpr auto operator<=>(const MuLawLevel&) const = default;

 private:
  int level_ = kZero;
};

namespace detail {

inline const std::array<float, kNumLevels>& mulaw_decode_table() {
  static const std::array<float, kNumLevels> table = [] {
    std::array<float, kNumLevels> t{};
    for (int level = 0; level < 256; ++level) {
      const int u = level - MuLawLevel::kZero;
      const double mag = (std::pow(256.0, std::abs(u) / 128.0) - 1.0) / 255.0;
      t[level] = static_cast<float>(u < 0 ? -mag : mag);
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline MuLawLevel mulaw_encode(float x) {
  const double v = std::clamp(static_cast<double>(x), -1.0, 1.0);
  const double mag = std::log1p(255.0 * std::abs(v)) / std::log(256.0) * 128.0;
  const long u = std::lround(v < 0 ? -mag : mag);
  return MuLawLevel(static_cast<int>(std::clamp<long>(u + MuLawLevel::kZero, 0, 255)));
}

inline float mulaw_decode(MuLawLevel level) {
  return detail::mulaw_decode_table()[static_cast<std::size_t>(level.value())];
}

// ---------------------------------------------------------------------------
// Band layout. Band centres in units of 200 Hz; 4 FFT bins per unit at a
// 320-point transform (50 Hz bins). Bands are triangular between centres.

inline constexpr std::size_t kNumBins = kWindowSize / 2 + 1;  // 161
inline constexpr std::array<int, kNumBands> kBandCenters200Hz = {
    0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 34, 40};
inline constexpr int kBinsPerUnit = 4;
inline constexpr double kLogEnergyFloor = 1e-10;

inline constexpr int band_center_bin(std::size_t band) {
  return kBandCenters200Hz[band] * kBinsPerUnit;
}

/// Triangular weight of FFT bin `bin` in band `band`.
inline double band_weight(std::size_t band, int bin) {
  const int c = band_center_bin(band);
  if (bin == c) return 1.0;
  if (bin < c) {
    if (band == 0) return 0.0;
    const int lo = band_center_bin(band - 1);
    return bin > lo ? static_cast<double>(bin - lo) / (c - lo) : 0.0;
  }
  if (band + 1 == kNumBands) return 0.0;
  const int hi = band_center_bin(band + 1);
  return bin < hi ? static_cast<double>(hi - bin) / (hi - c) : 0.0;
}

namespace detail {

struct AnalysisTables {
  std::array<double, kWindowSize> window{};
  std::vector<double> cos_table;  // kNumBins x kWindowSize
  std::vector<double> sin_table;
  std::array<double, kNumBands * kNumBands> dct{};  // dct[k * N + n]
  std::array<double, kNumBands> band_norm{};

  AnalysisTables() : cos_table(kNumBins * kWindowSize), sin_table(kNumBins * kWindowSize) {
    constexpr double pi = std::numbers::pi;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      window[n] = std::sin(pi * (n + 0.5) / kWindowSize);
    }
    for (std::size_t k = 0; k < kNumBins; ++k) {
      for (std::size_t n = 0; n < kWindowSize; ++n) {
        const std::size_t m = (k * n) % kWindowSize;
        const double phase = 2.0 * pi * m / kWindowSize;
        cos_table[k * kWindowSize + n] = std::cos(phase);
        sin_table[k * kWindowSize + n] = std::sin(phase);
      }
    }
    for (std::size_t k = 0; k < kNumBands; ++k) {
      const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / kNumBands);
      for (std::size_t n = 0; n < kNumBands; ++n) {
        dct[k * kNumBands + n] = scale * std::cos(pi * (n + 0.5) * k / kNumBands);
      }
    }
    for (std::size_t b = 0; b < kNumBands; ++b) {
      double s = 0.0;
      for (int bin = 0; bin < static_cast<int>(kNumBins); ++bin) s += band_weight(b, bin);
      band_norm[b] = s;
    }
  }
};

inline const AnalysisTables& analysis_tables() {
  static const AnalysisTables tables;
  return tables;
}

}  // namespace detail

/// Orthonormal DCT-II over the 18 log band energies.
inline std::array<float, kNumBands> dct18(const std::array<double, kNumBands>& in) {
  const auto& t = detail::analysis_tables();
  std::array<float, kNumBands> out{};
  for (std::size_t k = 0; k < kNumBands; ++k) {
    double acc = 0.0;
    for (std::size_t n = 0; n < kNumBands; ++n) acc += t.dct[k * kNumBands + n] * in[n];
    out[k] = static_cast<float>(acc);
  }
  return out;
}

/// Orthonormal DCT-III, the exact inverse of dct18.
inline std::array<double, kNumBands> idct18(std::span<const float, kNumBands> in) {
  const auto& t = detail::analysis_tables();
  std::array<double, kNumBands> out{};
  for (std::size_t n = 0; n < kNumBands; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kNumBands; ++k) acc += t.dct[k * kNumBands + n] * in[k];
    out[n] = acc;
  }
  return out;
}

/// |X_k|^2 of the sine-windowed 320-sample frame, bins 0..160.
inline std::array<double, kNumBins> power_spectrum(std::span<const float, kWindowSize> frame) {
  const auto& t = detail::analysis_tables();
  std::array<double, kWindowSize> x{};
  for (std::size_t n = 0; n < kWindowSize; ++n) x[n] = t.window[n] * frame[n];
  std::array<double, kNumBins> ps{};
  for (std::size_t k = 0; k < kNumBins; ++k) {
    const double* c = &t.cos_table[k * kWindowSize];
    const double* s = &t.sin_table[k * kWindowSize];
    double re = 0.0;
    double im = 0.0;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      re += c[n] * x[n];
      im -= s[n] * x[n];
    }
    ps[k] = re * re + im * im;
  }
  return ps;
}

/// Mean power per band: triangular-weighted sum normalized by the weight sum.
inline std::array<double, kNumBands> band_energies(const std::array<double, kNumBins>& ps) {
  const auto& t = detail::analysis_tables();
  std::array<double, kNumBands> e{};
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const int lo = b == 0 ? 0 : band_center_bin(b - 1);
    const int hi = b + 1 == kNumBands ? band_center_bin(b) : band_center_bin(b + 1);
    double acc = 0.0;
    for (int bin = lo; bin <= hi; ++bin) acc += band_weight(b, bin) * ps[static_cast<std::size_t>(bin)];
    e[b] = acc / t.band_norm[b];
  }
  return e;
}

inline std::array<float, kNumBands> cepstrum_from_band_energies(const std::array<double, kNumBands>& e) {
  std::array<double, kNumBands> log_e{};
  for (std::size_t b = 0; b < kNumBands; ++b) log_e[b] = std::log10(std::max(e[b], kLogEnergyFloor));
  return dct18(log_e);
}

// ---------------------------------------------------------------------------
// Pitch.

inline constexpr int kMinPeriod = 32;
inline constexpr int kMaxPeriod = 256;
inline constexpr double kOctaveRatio = 0.85;

struct PitchEstimate {
  int period = kMinPeriod;
  float correlation = 0.0f;
};

namespace detail {

inline double sample_or_zero(std::span<const float> x, std::ptrdiff_t i) {
  return i >= 0 && i < static_cast<std::ptrdiff_t>(x.size()) ? x[static_cast<std::size_t>(i)] : 0.0;
}

}  // namespace detail

/// Normalized cross-correlation between x[n] and x[n - lag] over
/// [start, start + length). Samples before index 0 read as zero.
inline double normalized_correlation(std::span<const float> x, std::ptrdiff_t start, std::size_t length, int lag) {
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const auto i = start + static_cast<std::ptrdiff_t>(n);
    const double a = detail::sample_or_zero(x, i);
    const double b = detail::sample_or_zero(x, i - lag);
    xy += a * b;
    xx += a * a;
    yy += b * b;
  }
  const double denom = xx * yy;
  return denom > 0.0 ? xy / std::sqrt(denom) : 0.0;
}

/// Open-loop search over [kMinPeriod, kMaxPeriod]. After the global maximum
/// is found, the shortest submultiple keeping kOctaveRatio of its
/// correlation wins.
inline PitchEstimate estimate_pitch(std::span<const float> x, std::ptrdiff_t start, std::size_t length = kWindowSize) {
  std::array<double, kMaxPeriod + 1> rho{};
  int best = kMinPeriod;
  for (int lag = kMinPeriod; lag <= kMaxPeriod; ++lag) {
    rho[static_cast<std::size_t>(lag)] = normalized_correlation(x, start, length, lag);
    if (rho[static_cast<std::size_t>(lag)] > rho[static_cast<std::size_t>(best)]) best = lag;
  }
  int chosen = best;
  const double best_rho = rho[static_cast<std::size_t>(best)];
  if (best_rho > 0.0) {
    for (int k = best / kMinPeriod; k >= 2; --k) {
      const int centre = static_cast<int>(std::lround(static_cast<double>(best) / k));
      int cand = -1;
      for (int lag = std::max(kMinPeriod, centre - 1); lag <= std::min(kMaxPeriod, centre + 1); ++lag) {
        if (cand < 0 || rho[static_cast<std::size_t>(lag)] > rho[static_cast<std::size_t>(cand)]) cand = lag;
      }
      if (cand >= 0 && rho[static_cast<std::size_t>(cand)] >= kOctaveRatio * best_rho) {
        chosen = cand;
        break;
      }
    }
  }
  const double g = std::clamp(rho[static_cast<std::size_t>(chosen)], 0.0, 1.0);
  return {chosen, static_cast<float>(g)};
}

// ---------------------------------------------------------------------------
// Features.

inline constexpr float kPeriodOffset = 100.0f;
inline constexpr float kPeriodScale = 50.0f;

struct FeatureFrame {
  std::array<float, kNumBands> cepstrum{};
  int period = kMinPeriod;
  float correlation = 0.0f;

  FeatureVector to_vector() const {
    FeatureVector v{};
    std::copy(cepstrum.begin(), cepstrum.end(), v.begin());
    v[kNumBands] = (static_cast<float>(period) - kPeriodOffset) / kPeriodScale;
    v[kNumBands + 1] = correlation;
    return v;
  }

  static FeatureFrame from_vector(const FeatureVector& v) {
    FeatureFrame f;
    std::copy(v.begin(), v.begin() + kNumBands, f.cepstrum.begin());
    const long p = std::lround(v[kNumBands] * kPeriodScale + kPeriodOffset);
    f.period = static_cast<int>(std::clamp<long>(p, kMinPeriod, kMaxPeriod));
    f.correlation = std::clamp(v[kNumBands + 1], 0.0f, 1.0f);
    return f;
  }
};

/// First sample of the 20 ms window centred on frame `frame_index`.
inline std::ptrdiff_t analysis_window_start(std::size_t frame_index) {
  return static_cast<std::ptrdiff_t>(frame_index * kFrameSize) -
         static_cast<std::ptrdiff_t>((kWindowSize - kFrameSize) / 2);
}

/// Features of one frame. `audio` is expected to be pre-emphasized; samples
/// before the start of the buffer read as zero, but the window may not run
/// past its end.
inline FeatureFrame analyze_frame(std::span<const float> audio, std::size_t frame_index) {
  const std::ptrdiff_t start = analysis_window_start(frame_index);
  const auto end = start + static_cast<std::ptrdiff_t>(kWindowSize);
  if (end > static_cast<std::ptrdiff_t>(audio.size())) {
    throw InsufficientSamplesError("analyze_frame: frame " + std::to_string(frame_index) + " needs " +
                                   std::to_string(end) + " samples, have " + std::to_string(audio.size()));
  }
  std::array<float, kWindowSize> frame{};
  for (std::size_t n = 0; n < kWindowSize; ++n) {
    frame[n] = static_cast<float>(detail::sample_or_zero(audio, start + static_cast<std::ptrdiff_t>(n)));
  }
  FeatureFrame out;
  out.cepstrum = cepstrum_from_band_energies(band_energies(power_spectrum(frame)));
  const PitchEstimate pitch = estimate_pitch(audio, start, kWindowSize);
  out.period = pitch.period;
  out.correlation = pitch.correlation;
  return out;
}

/// Pre-emphasizes `audio` and analyzes every whole frame. The tail is padded
/// with zeros so the last frame's window fits.
inline std::vector<FeatureFrame> extract_features(const AudioBuffer& audio) {
  EmphasisState emph;
  std::vector<float> x(audio.size() + (kWindowSize - kFrameSize) / 2, 0.0f);
  preemphasize(audio.view(), std::span<float>(x).first(audio.size()), emph);
  const std::size_t frames = audio.size() / kFrameSize;
  std::vector<FeatureFrame> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) out.push_back(analyze_frame(x, i));
  return out;
}

}  // namespace lpcnet
