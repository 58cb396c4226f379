#pragma once

// Linear prediction derived from the Bark cepstrum:
// cepstrum -> band energies -> linear-frequency PSD -> autocorrelation ->
// Levinson-Durbin. The predictor is p_t = sum_k a_k s_{t-k}.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"

namespace lpcnet {

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

struct Autocorrelation {
  std::vector<double> r;

  Autocorrelation() = default;
  explicit Autocorrelation(std::vector<double> lags) : r(std::move(lags)) {
    if (r.empty() || !(r[0] > 0.0)) throw DegenerateInputError("autocorrelation: r0 must be positive");
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (!std::isfinite(r[k]) || std::abs(r[k]) > r[0]) {
        throw DegenerateInputError("autocorrelation: lag " + std::to_string(k) + " exceeds r0 or is not finite");
      }
    }
  }

  std::size_t max_lag() const { return r.size() - 1; }
};

struct LpcCoeffs {
  std::array<double, kLpcOrder> a{};
};

struct LevinsonResult {
  std::vector<double> a;           // a_1..a_order
  std::vector<double> reflection;  // k_1..k_order
  std::vector<double> error;       // prediction error energy after each step, error[0] = r0
};

/// Levinson-Durbin recursion. Throws DegenerateInputError when a reflection
/// coefficient reaches magnitude 1.
inline LevinsonResult levinson_durbin_full(const Autocorrelation& acf, std::size_t order) {
  if (order > acf.max_lag()) {
    throw DimensionError("levinson_durbin: order " + std::to_string(order) + " exceeds available lags");
  }
  const auto& r = acf.r;
  LevinsonResult out;
  out.a.assign(order, 0.0);
  out.reflection.reserve(order);
  out.error.reserve(order + 1);
  double err = r[0];
  out.error.push_back(err);
  std::vector<double> prev(order, 0.0);
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc -= out.a[j - 1] * r[i - j];
    const double k = acc / err;
    if (!(std::abs(k) < 1.0)) {
      throw DegenerateInputError("levinson_durbin: |k_" + std::to_string(i) + "| = " + std::to_string(std::abs(k)) +
                                 " >= 1");
    }
    std::copy(out.a.begin(), out.a.begin() + static_cast<std::ptrdiff_t>(i - 1), prev.begin());
    for (std::size_t j = 1; j < i; ++j) out.a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
    out.a[i - 1] = k;
    err *= 1.0 - k * k;
    out.reflection.push_back(k);
    out.error.push_back(err);
  }
  return out;
}

/// Coefficients 1..order; the remaining slots of the order-16 container are zero.
inline LpcCoeffs levinson_durbin(const Autocorrelation& acf, std::size_t order) {
  if (order > kLpcOrder) throw DimensionError("levinson_durbin: order above 16");
  const LevinsonResult res = levinson_durbin_full(acf, order);
  LpcCoeffs c;
  std::copy(res.a.begin(), res.a.end(), c.a.begin());
  return c;
}

// ---------------------------------------------------------------------------
// Cepstrum to predictor.

inline constexpr double kWhiteNoiseFloor = 1e-4;
// Binomial lag window parameter; close to a Gaussian window of ~60 Hz
// bandwidth at 16 kHz.
inline constexpr double kLagWindowN = 3600.0;

/// Log10 band energies recovered from the cepstrum.
inline std::array<double, kNumBands> band_log_energies(std::span<const float, kNumBands> cepstrum) {
  return idct18(cepstrum);
}

/// Linear-frequency PSD on the 161-bin half spectrum. Log energies are
/// interpolated linearly between band centres; flat beyond the outer centres.
inline std::array<double, kNumBins> psd_from_band_log_energies(const std::array<double, kNumBands>& log_e) {
  std::array<double, kNumBins> psd{};
  const int first = band_center_bin(0);
  const int last = band_center_bin(kNumBands - 1);
  for (int bin = 0; bin < static_cast<int>(kNumBins); ++bin) {
    double le = 0.0;
    if (bin <= first) {
      le = log_e.front();
    } else if (bin >= last) {
      le = log_e.back();
    } else {
      std::size_t b = 0;
      while (band_center_bin(b + 1) < bin) ++b;
      const int lo = band_center_bin(b);
      const int hi = band_center_bin(b + 1);
      const double frac = static_cast<double>(bin - lo) / (hi - lo);
      le = (1.0 - frac) * log_e[b] + frac * log_e[b + 1];
    }
    psd[static_cast<std::size_t>(bin)] = std::pow(10.0, le);
  }
  return psd;
}

/// Inverse real DFT of the even-symmetric 320-point PSD, lags 0..max_lag.
inline std::vector<double> psd_to_autocorrelation(const std::array<double, kNumBins>& psd, std::size_t max_lag) {
  constexpr double pi = std::numbers::pi;
  constexpr std::size_t n = kWindowSize;
  std::vector<double> r(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double acc = psd[0] + psd[n / 2] * ((k & 1u) ? -1.0 : 1.0);
    for (std::size_t i = 1; i < n / 2; ++i) {
      acc += 2.0 * psd[i] * std::cos(2.0 * pi * static_cast<double>((i * k) % n) / n);
    }
    r[k] = acc / n;
  }
  return r;
}

/// White-noise floor on lag 0 and binomial lag window on lags 1..M.
inline Autocorrelation regularize(std::vector<double> r) {
  if (r.empty()) throw DegenerateInputError("regularize: empty autocorrelation");
  r[0] *= 1.0 + kWhiteNoiseFloor;
  double w = 1.0;
  for (std::size_t k = 1; k < r.size(); ++k) {
    w *= (kLagWindowN - static_cast<double>(k) + 1.0) / (kLagWindowN + static_cast<double>(k));
    r[k] *= w;
  }
  return Autocorrelation(std::move(r));
}

inline LpcCoeffs cepstrum_to_lpc(std::span<const float, kNumBands> cepstrum) {
  for (float c : cepstrum) {
    if (!std::isfinite(c)) throw DegenerateInputError("cepstrum_to_lpc: non-finite cepstral coefficient");
  }
  const auto psd = psd_from_band_log_energies(band_log_energies(cepstrum));
  try {
    return levinson_durbin(regularize(psd_to_autocorrelation(psd, kLpcOrder)), kLpcOrder);
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError(std::string("cepstrum_to_lpc: numerical degeneracy: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-stream prediction state.

struct LpcState {
  LpcCoeffs coeffs;
  std::array<float, kLpcOrder> history{};  // history[0] = s_{t-1}
};

inline float predict(const LpcState& st) {
  double p = 0.0;
  for (std::size_t k = 0; k < kLpcOrder; ++k) p += st.coeffs.a[k] * st.history[k];
  return static_cast<float>(p);
}

inline void update_history(LpcState& st, float sample) {
  std::copy_backward(st.history.begin(), st.history.end() - 1, st.history.end());
  st.history[0] = sample;
}

}  // namespace lpcnet
