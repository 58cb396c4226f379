#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpcnet {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameSize = 160;   // 10 ms hop
inline constexpr std::size_t kWindowSize = 320;  // 20 ms analysis window
inline constexpr std::size_t kNumBands = 18;
inline constexpr std::size_t kNumFeatures = kNumBands + 2;
inline constexpr std::size_t kLpcOrder = 16;
inline constexpr std::size_t kNumLevels = 256;
inline constexpr float kEmphasisAlpha = 0.85f;

// Network input for one frame: [18 cepstra, normalized period, correlation].
using FeatureVector = std::array<float, kNumFeatures>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(std::string("dimension mismatch: ") + what);
}

/// Categorical distribution over the 256 mu-law levels.
struct ProbDist {
  std::array<double, kNumLevels> p{};

  double sum() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }

  bool valid(double tol = 1e-6) const {
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
    }
    return std::abs(sum() - 1.0) <= tol;
  }

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    return best;
  }
};

}  // namespace lpcnet
