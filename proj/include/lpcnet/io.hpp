#pragma once

// WAV (16-bit PCM, mono, 16 kHz only) and raw feature file I/O.
//
// Feature files are a headerless sequence of little-endian float32 records,
// 20 per frame: 18 cepstra, (period - 100) / 50, pitch correlation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"

namespace lpcnet {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class IoError : public Error {
 public:
  using Error::Error;
};

class WavFormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <class T>
T load_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void store_le(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace detail

inline AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) { return WavFormatError(name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto size = detail::load_le<std::uint32_t>(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw fail("truncated fmt chunk");
      const auto format = detail::load_le<std::uint16_t>(&bytes[body]);
      const auto channels = detail::load_le<std::uint16_t>(&bytes[body + 2]);
      const auto rate = detail::load_le<std::uint32_t>(&bytes[body + 4]);
      const auto bits = detail::load_le<std::uint16_t>(&bytes[body + 14]);
      if (format != 1) throw fail("unsupported format tag " + std::to_string(format) + " (need PCM = 1)");
      if (channels != 1) throw fail("unsupported channel count " + std::to_string(channels) + " (need mono)");
      if (rate != kSampleRate) throw fail("unsupported sample rate " + std::to_string(rate) + " (need 16000)");
      if (bits != 16) throw fail("unsupported bit depth " + std::to_string(bits) + " (need 16)");
      have_fmt = true;
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      std::vector<float> samples(avail / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<float>(detail::load_le<std::int16_t>(&bytes[body + 2 * i])) / 32768.0f;
      }
      return AudioBuffer(std::move(samples));
    }
    pos = body + size + (size & 1u);
  }
  throw fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline std::vector<std::uint8_t> encode_wav(std::span<const float> samples) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::store_le<std::uint32_t>(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::store_le<std::uint32_t>(out, 16);
  detail::store_le<std::uint16_t>(out, 1);
  detail::store_le<std::uint16_t>(out, 1);
  detail::store_le<std::uint32_t>(out, kSampleRate);
  detail::store_le<std::uint32_t>(out, kSampleRate * 2);
  detail::store_le<std::uint16_t>(out, 2);
  detail::store_le<std::uint16_t>(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::store_le<std::uint32_t>(out, data_bytes);
  for (float s : samples) {
    const long v = std::lround(static_cast<double>(s) * 32768.0);
    detail::store_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp<long>(v, -32768, 32767)));
  }
  return out;
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  return decode_wav(detail::read_file(path), path.string());
}

inline void write_wav(const std::filesystem::path& path, std::span<const float> samples) {
  detail::write_file(path, encode_wav(samples));
}

inline std::vector<FeatureVector> read_features(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  constexpr std::size_t record = kNumFeatures * sizeof(float);
  if (bytes.size() % record != 0) {
    throw IoError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                  std::to_string(record) + "-byte feature records");
  }
  std::vector<FeatureVector> out(bytes.size() / record);
  for (std::size_t f = 0; f < out.size(); ++f) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      out[f][i] = detail::load_le<float>(&bytes[f * record + i * sizeof(float)]);
      if (!std::isfinite(out[f][i])) {
        throw IoError(path.string() + ": non-finite value in frame " + std::to_string(f));
      }
    }
  }
  return out;
}

inline void write_features(const std::filesystem::path& path, std::span<const FeatureVector> frames) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(frames.size() * kNumFeatures * sizeof(float));
  for (const auto& f : frames) {
    for (float v : f) detail::store_le<float>(bytes, v);
  }
  detail::write_file(path, bytes);
}

}  // namespace lpcnet
