#pragma once

// End-to-end synthesis. Per frame: conditioning vector, g terms and LPC
// from the centre frame of a 5-frame feature window. Per sample: predict,
// run the sample-rate network, draw the excitation, reconstruct
// s_t = p_t + e_t, feed the mu-law-quantized s_t back into the predictor,
// and emit the de-emphasized s_t.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"
#include "lpcnet/lpc.hpp"
#include "lpcnet/model.hpp"
#include "lpcnet/sampler.hpp"

namespace lpcnet {

inline constexpr float kMaxOutputSample = 32767.0f / 32768.0f;

using FrameSamples = std::array<float, kFrameSize>;

/// Everything that happened to one sample on its way through the stream.
struct SampleTrace {
  float prediction = 0.0f;         // p_t
  MuLawLevel prediction_level;     // network input for p_t
  MuLawLevel excitation;           // drawn e_t
  float signal = 0.0f;             // s_t = p_t + decode(e_t), pre-emphasis domain
  float history_input = 0.0f;      // value pushed into the predictor history
  float output = 0.0f;             // emitted, de-emphasized and clamped
};

using SampleTap = std::function<void(const SampleTrace&)>;

class SynthStream {
 public:
  explicit SynthStream(std::shared_ptr<const Model> model, const SamplerConfig& cfg = {})
      : model_(std::move(model)),
        state_(model_->sample),
        cond_(model_->sample.na()),
        f_(model_->frame.cond_size()),
        frame_scratch_(model_->frame),
        sample_scratch_(model_->sample),
        sampler_(cfg) {}

  /// Synthesizes the centre frame of `window`: always 160 samples.
  void synthesize_frame(const FeatureWindow& window, std::span<float, kFrameSize> out) {
    const Model& m = *model_;
    frame_rate_forward(m.frame, window, f_, frame_scratch_);
    frame_setup(m.sample, f_, cond_);
    const FeatureVector& cur = window[kLookaheadFrames];
    lpc_.coeffs = cepstrum_to_lpc(std::span<const float, kNumBands>(cur.data(), kNumBands));
    const double pitch_corr = cur[kNumBands + 1];

    for (std::size_t i = 0; i < kFrameSize; ++i) {
      SampleTrace tr;
      tr.prediction = predict(lpc_);
      tr.prediction_level = mulaw_encode(tr.prediction);
      sample_rate_logits(m.sample, state_, s_prev_, tr.prediction_level, e_prev_, cond_, sample_scratch_);
      tr.excitation = sampler_.sample_logits(sample_scratch_.logits, pitch_corr);
      tr.signal = tr.prediction + mulaw_decode(tr.excitation);
      const MuLawLevel s_level = mulaw_encode(tr.signal);
      tr.history_input = mulaw_decode(s_level);
      update_history(lpc_, tr.history_input);
      s_prev_ = s_level;
      e_prev_ = tr.excitation;
      tr.output = std::clamp(deemphasize_sample(tr.signal, deemph_), -1.0f, kMaxOutputSample);
      out[i] = tr.output;
      if (tap_) tap_(tr);
    }
    ++frames_;
  }

  FrameSamples synthesize_frame(const FeatureWindow& window) {
    FrameSamples out{};
    synthesize_frame(window, out);
    return out;
  }

  void set_tap(SampleTap tap) { tap_ = std::move(tap); }

  std::size_t frames() const { return frames_; }
  std::size_t floor_fallbacks() const { return sampler_.fallbacks(); }
  const SampleRateState& network_state() const { return state_; }
  const LpcState& lpc_state() const { return lpc_; }
  const ConditioningContribution& conditioning() const { return cond_; }

 private:
  std::shared_ptr<const Model> model_;
  SampleRateState state_;
  LpcState lpc_;
  EmphasisState deemph_;
  MuLawLevel s_prev_;
  MuLawLevel e_prev_;
  ConditioningContribution cond_;
  std::vector<float> f_;
  FrameRateScratch frame_scratch_;
  SampleRateScratch sample_scratch_;
  Sampler sampler_;
  SampleTap tap_;
  std::size_t frames_ = 0;
};

/// Feature-at-a-time front end. Output lags input by two frames (the
/// conditioning network looks two frames ahead); finish() flushes the tail
/// as if two zero feature frames followed.
class StreamingSynthesizer {
 public:
  explicit StreamingSynthesizer(std::shared_ptr<const Model> model, const SamplerConfig& cfg = {})
      : stream_(std::move(model), cfg) {}

  /// Returns true and fills `out` when a frame became ready.
  bool push(const FeatureVector& features, std::span<float, kFrameSize> out) {
    shift_in(features);
    ++received_;
    if (received_ < kLookaheadFrames + 1) return false;
    emit(out);
    return true;
  }

  /// Remaining frames, 160 samples each.
  std::vector<float> finish() {
    std::vector<float> out;
    std::size_t virtual_count = received_;
    FrameSamples buf{};
    while (emitted_ < received_) {
      shift_in(FeatureVector{});
      ++virtual_count;
      if (virtual_count >= emitted_ + kLookaheadFrames + 1) {
        emit(buf);
        out.insert(out.end(), buf.begin(), buf.end());
      }
    }
    return out;
  }

  const SynthStream& stream() const { return stream_; }

 private:
  void shift_in(const FeatureVector& v) {
    std::move(window_.begin() + 1, window_.end(), window_.begin());
    window_.back() = v;
  }

  void emit(std::span<float, kFrameSize> out) {
    stream_.synthesize_frame(window_, out);
    ++emitted_;
  }

  SynthStream stream_;
  FeatureWindow window_{};
  std::size_t received_ = 0;
  std::size_t emitted_ = 0;
};

/// Whole-sequence synthesis; identical to streaming frame by frame.
inline std::vector<float> synthesize(std::shared_ptr<const Model> model, std::span<const FeatureVector> features,
                                     const SamplerConfig& cfg = {}, std::size_t* fallbacks = nullptr) {
  SynthStream stream(std::move(model), cfg);
  std::vector<float> out(features.size() * kFrameSize);
  for (std::size_t t = 0; t < features.size(); ++t) {
    stream.synthesize_frame(window_at(features, t), std::span<float, kFrameSize>(out.data() + t * kFrameSize, kFrameSize));
  }
  if (fallbacks != nullptr) *fallbacks = stream.floor_fallbacks();
  return out;
}

inline std::vector<FeatureVector> to_vectors(std::span<const FeatureFrame> frames) {
  std::vector<FeatureVector> v;
  v.reserve(frames.size());
  for (const auto& f : frames) v.push_back(f.to_vector());
  return v;
}

/// Analysis followed by synthesis; output has the input length rounded down
/// to whole frames.
inline AudioBuffer copy_synthesis(std::shared_ptr<const Model> model, const AudioBuffer& input,
                                  const SamplerConfig& cfg = {}) {
  const auto features = to_vectors(extract_features(input));
  return AudioBuffer(synthesize(std::move(model), features, cfg));
}

// ---------------------------------------------------------------------------
// Throughput.

struct SynthesisReport {
  std::size_t frames = 0;
  std::size_t samples = 0;
  double wall_seconds = 0.0;
  double samples_per_second = 0.0;
  double real_time_factor = 0.0;  // 16000 / samples_per_second; below 1 is faster than real time
  std::size_t floor_fallbacks = 0;
};

struct BenchOptions {
  std::size_t warmup_frames = 100;
  std::size_t timed_frames = 1000;
  std::size_t runs = 5;
  SamplerConfig sampler;
};

struct BenchResult {
  SynthesisReport report;             // the median run
  std::vector<double> run_seconds;
  double model_flops_per_sample = 0;  // two per stored weight actually used
  double formula_flops_per_sample = 0;
  double gru_a_density = 0;
};

/// Deterministic feature sequence for benchmarking: slowly varying spectral
/// tilt and pitch.
inline std::vector<FeatureVector> bench_features(std::size_t frames) {
  std::vector<FeatureVector> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    FeatureFrame f;
    const double phase = 2.0 * 3.141592653589793 * static_cast<double>(t) / 50.0;
    f.cepstrum[0] = static_cast<float>(-8.0 + std::sin(phase));
    f.cepstrum[1] = static_cast<float>(1.5 + 0.5 * std::cos(phase));
    f.cepstrum[2] = static_cast<float>(-0.3 * std::sin(2 * phase));
    f.period = 80 + static_cast<int>(20.0 * std::sin(phase / 3.0));
    f.correlation = static_cast<float>(0.5 + 0.45 * std::sin(phase / 2.0));
    out[t] = f.to_vector();
  }
  return out;
}

inline BenchResult bench(std::shared_ptr<const Model> model, const BenchOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto features = bench_features(opt.warmup_frames + opt.timed_frames);
  BenchResult res;
  std::vector<SynthesisReport> reports;
  FrameSamples buf{};
  for (std::size_t run = 0; run < std::max<std::size_t>(opt.runs, 1); ++run) {
    SynthStream stream(model, opt.sampler);
    for (std::size_t t = 0; t < opt.warmup_frames; ++t) stream.synthesize_frame(window_at(features, t), buf);
    const auto start = clock::now();
    for (std::size_t t = opt.warmup_frames; t < features.size(); ++t) stream.synthesize_frame(window_at(features, t), buf);
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    SynthesisReport r;
    r.frames = opt.timed_frames;
    r.samples = opt.timed_frames * kFrameSize;
    r.wall_seconds = secs;
    r.samples_per_second = secs > 0 ? static_cast<double>(r.samples) / secs : 0.0;
    r.real_time_factor = r.samples_per_second > 0 ? kSampleRate / r.samples_per_second : 0.0;
    r.floor_fallbacks = stream.floor_fallbacks();
    reports.push_back(r);
    res.run_seconds.push_back(secs);
  }
  std::sort(reports.begin(), reports.end(),
            [](const SynthesisReport& a, const SynthesisReport& b) { return a.wall_seconds < b.wall_seconds; });
  res.report = reports[reports.size() / 2];

  const auto& sr = model->sample;
  double density = 0.0;
  for (const auto& m : sr.gru_a.recurrent) density += m.density();
  res.gru_a_density = density / 3.0;
  res.model_flops_per_sample = 2.0 * model_weights_per_sample(sr);
  ComplexityInputs c;
  c.na = static_cast<double>(sr.na());
  c.nb = static_cast<double>(sr.nb());
  c.levels = kNumLevels;
  c.density = res.gru_a_density;
  c.rate = kSampleRate;
  res.formula_flops_per_sample = 2.0 * complexity_weights_per_sample(c);
  return res;
}

}  // namespace lpcnet
