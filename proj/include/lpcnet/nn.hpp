#pragma once

// Inference kernels: dense and 16x1 block-sparse products, activations, the
// GRU cell, DualFC and the width-3 temporal convolution.
//
// Weights are stored as float32; dot products accumulate in double.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "lpcnet/common.hpp"

namespace lpcnet {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw DimensionError("DenseMatrix: " + std::to_string(values_.size()) + " values for " + std::to_string(rows_) +
                           "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return values_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const float> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
  constexpr std::size_t kLanes = 8;
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  const std::size_t whole = n - n % kLanes;
  double lanes[kLanes] = {};
  for (std::size_t i = 0; i < whole; i += kLanes) {
#pragma omp simd
    for (std::size_t k = 0; k < kLanes; ++k) lanes[k] += static_cast<double>(pa[i + k]) * pb[i + k];
  }
  double acc = ((lanes[0] + lanes[4]) + (lanes[2] + lanes[6])) + ((lanes[1] + lanes[5]) + (lanes[3] + lanes[7]));
  for (std::size_t i = whole; i < n; ++i) acc += static_cast<double>(pa[i]) * pb[i];
  return acc;
}

/// y += m x
inline void dense_gemv_accum(const DenseMatrix& m, std::span<const float> x, std::span<float> y) {
  require_dims(x.size() == m.cols() && y.size() == m.rows(), "dense_gemv");
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = static_cast<float>(y[r] + dot(m.row(r), x));
}

inline void dense_gemv(const DenseMatrix& m, std::span<const float> x, std::span<float> y) {
  require_dims(x.size() == m.cols() && y.size() == m.rows(), "dense_gemv");
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = static_cast<float>(dot(m.row(r), x));
}

inline std::vector<float> dense_gemv(const DenseMatrix& m, std::span<const float> x) {
  std::vector<float> y(m.rows());
  dense_gemv(m, x, y);
  return y;
}

// ---------------------------------------------------------------------------
// Block-sparse matrices: 16x1 vertical blocks plus the full main diagonal.
// A block may cover a diagonal position; both contributions are summed.

inline constexpr std::size_t kBlockRows = 16;

struct SparseBlock {
  std::uint32_t row_start = 0;
  std::uint32_t col = 0;

  auto operator<=>(const SparseBlock&) const = default;
};

class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;

  /// `values` holds kBlockRows floats per block, in the order of `blocks`.
  /// Blocks are reordered by (row_start, col) internally.
  BlockSparseMatrix(std::size_t rows, std::size_t cols, std::vector<SparseBlock> blocks, std::vector<float> values,
                    std::vector<float> diagonal)
      : rows_(rows), cols_(cols), diagonal_(std::move(diagonal)) {
    if (values.size() != blocks.size() * kBlockRows) {
      throw DimensionError("BlockSparseMatrix: expected " + std::to_string(blocks.size() * kBlockRows) +
                           " block values, got " + std::to_string(values.size()));
    }
    if (diagonal_.size() != std::min(rows, cols)) {
      throw DimensionError("BlockSparseMatrix: diagonal length " + std::to_string(diagonal_.size()) +
                           ", expected " + std::to_string(std::min(rows, cols)));
    }
    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return blocks[a] < blocks[b]; });

    const std::size_t groups = (rows + kBlockRows - 1) / kBlockRows;
    group_offsets_.assign(groups + 1, 0);
    blocks_.reserve(blocks.size());
    values_.reserve(values.size());
    for (std::size_t n = 0; n < order.size(); ++n) {
      const SparseBlock b = blocks[order[n]];
      if (b.row_start % kBlockRows != 0) {
        throw Error("BlockSparseMatrix: block row_start " + std::to_string(b.row_start) + " not a multiple of 16");
      }
      if (b.row_start + kBlockRows > rows || b.col >= cols) {
        throw Error("BlockSparseMatrix: block (" + std::to_string(b.row_start) + ", " + std::to_string(b.col) +
                    ") out of bounds");
      }
      if (n > 0 && blocks_.back() == b) {
        throw Error("BlockSparseMatrix: duplicate block (" + std::to_string(b.row_start) + ", " +
                    std::to_string(b.col) + ")");
      }
      blocks_.push_back(b);
      const auto src = values.begin() + static_cast<std::ptrdiff_t>(order[n] * kBlockRows);
      values_.insert(values_.end(), src, src + kBlockRows);
      ++group_offsets_[b.row_start / kBlockRows + 1];
    }
    for (std::size_t g = 0; g < groups; ++g) group_offsets_[g + 1] += group_offsets_[g];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<SparseBlock>& blocks() const { return blocks_; }
  const std::vector<float>& block_values() const { return values_; }
  const std::vector<float>& diagonal() const { return diagonal_; }
  std::size_t block_count() const { return blocks_.size(); }

  /// Stored weights: 16 per block plus the diagonal.
  std::size_t stored_weights() const { return values_.size() + diagonal_.size(); }
  double density() const {
    return rows_ * cols_ == 0 ? 0.0 : static_cast<double>(stored_weights()) / static_cast<double>(rows_ * cols_);
  }

  std::span<const std::uint32_t> group_offsets() const { return group_offsets_; }

  bool operator==(const BlockSparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<SparseBlock> blocks_;
  std::vector<float> values_;
  std::vector<float> diagonal_;
  std::vector<std::uint32_t> group_offsets_;  // blocks of row group g: [off[g], off[g+1])
};

inline void sparse_gemv(const BlockSparseMatrix& m, std::span<const float> x, std::span<float> y) {
  require_dims(x.size() == m.cols() && y.size() == m.rows(), "sparse_gemv");
  const auto& diag = m.diagonal();
  const auto offsets = m.group_offsets();
  const SparseBlock* blocks = m.blocks().data();
  const float* values = m.block_values().data();
  const float* xp = x.data();
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const std::size_t r0 = g * kBlockRows;
    const std::size_t n = std::min(kBlockRows, m.rows() - r0);
    const std::size_t nd = r0 < diag.size() ? std::min(kBlockRows, diag.size() - r0) : 0;
    double acc[kBlockRows];
    for (std::size_t j = 0; j < kBlockRows; ++j) acc[j] = 0.0;
    for (std::size_t j = 0; j < nd; ++j) acc[j] = static_cast<double>(diag[r0 + j]) * xp[r0 + j];
    const std::uint32_t end = offsets[g + 1];
    for (std::uint32_t b = offsets[g]; b < end; ++b) {
      const double xv = xp[blocks[b].col];
      const float* v = values + static_cast<std::size_t>(b) * kBlockRows;
      for (std::size_t j = 0; j < kBlockRows; ++j) acc[j] += static_cast<double>(v[j]) * xv;
    }
    for (std::size_t j = 0; j < n; ++j) y[r0 + j] = static_cast<float>(acc[j]);
  }
}

inline std::vector<float> sparse_gemv(const BlockSparseMatrix& m, std::span<const float> x) {
  std::vector<float> y(m.rows());
  sparse_gemv(m, x, y);
  return y;
}

inline DenseMatrix densify(const BlockSparseMatrix& m) {
  DenseMatrix d(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.diagonal().size(); ++i) d(i, i) += m.diagonal()[i];
  for (std::size_t b = 0; b < m.block_count(); ++b) {
    const auto blk = m.blocks()[b];
    for (std::size_t j = 0; j < kBlockRows; ++j) d(blk.row_start + j, blk.col) += m.block_values()[b * kBlockRows + j];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Activations.

namespace detail {

// Single-precision exp and tanh without calls into libm, so that loops over
// them vectorize. Both are within a few ulp of the library functions.
inline float exp_poly(float x) {
  x = x < -87.0f ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  const float t = x * 1.44269504088896341f;
  const int n = static_cast<int>(t + std::copysign(0.5f, t));
  const float fn = static_cast<float>(n);
  float r = x - fn * 0.693359375f;
  r -= fn * -2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  return p * std::bit_cast<float>((n + 127) << 23);
}

inline float tanh_poly(float x) {
  const float ax = std::fabs(x);
  const float z = x * x;
  const float small =
      ((((-5.70498872745e-3f * z + 2.06390887954e-2f) * z - 5.37397155531e-2f) * z + 1.33314422036e-1f) * z -
       3.33332819422e-1f) * z * x + x;
  const float big = std::copysign(1.0f - 2.0f / (exp_poly(2.0f * ax) + 1.0f), x);
  return ax < 0.625f ? small : big;
}

}  // namespace detail

inline float sigmoid(float x) { return 1.0f / (1.0f + detail::exp_poly(-x)); }

inline float tanh_act(float x) { return detail::tanh_poly(x); }

inline void apply_tanh(std::span<float> x) {
#pragma omp simd
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = tanh_act(x[i]);
}

inline void apply_sigmoid(std::span<float> x) {
#pragma omp simd
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sigmoid(x[i]);
}

inline void apply_relu(std::span<float> x) {
  for (float& v : x) v = std::max(v, 0.0f);
}

/// Max-subtracted softmax; output sums to one.
inline void softmax(std::span<const float> logits, std::span<double> out) {
  require_dims(logits.size() == out.size() && !logits.empty(), "softmax");
  const float mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = detail::exp_poly(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

inline ProbDist softmax(std::span<const float, kNumLevels> logits) {
  ProbDist d;
  softmax(logits, d.p);
  return d;
}

// ---------------------------------------------------------------------------
// GRU. Gate order is u, r, h throughout.

enum Gate : std::size_t { kUpdate = 0, kReset = 1, kCandidate = 2 };

template <class Recurrent>
struct GruParams {
  std::array<Recurrent, 3> recurrent;  // W^(u), W^(r), W^(h)
  std::array<DenseMatrix, 3> input;    // U^(u), U^(r), U^(h); empty when inputs arrive pre-summed
  std::array<std::vector<float>, 3> bias;

  std::size_t hidden() const { return recurrent[0].rows(); }
  std::size_t input_size() const { return input[0].cols(); }
  bool has_input() const { return !input[0].empty(); }

  void validate() const {
    const std::size_t n = hidden();
    for (std::size_t g = 0; g < 3; ++g) {
      require_dims(recurrent[g].rows() == n && recurrent[g].cols() == n, "GRU recurrent matrix");
      require_dims(bias[g].size() == n, "GRU bias");
      require_dims(input[g].empty() == input[0].empty(), "GRU input matrices");
      if (!input[g].empty()) require_dims(input[g].rows() == n && input[g].cols() == input[0].cols(), "GRU input");
    }
  }
};

inline void gemv(const DenseMatrix& m, std::span<const float> x, std::span<float> y) { dense_gemv(m, x, y); }
inline void gemv(const BlockSparseMatrix& m, std::span<const float> x, std::span<float> y) { sparse_gemv(m, x, y); }

struct GruScratch {
  std::array<std::vector<float>, 3> pre;

  explicit GruScratch(std::size_t hidden = 0) {
    for (auto& v : pre) v.assign(hidden, 0.0f);
  }
};

using GateInputs = std::array<std::span<const float>, 3>;

/// One GRU step on already-summed non-recurrent gate inputs:
///   u = sigma(W_u h + in_u + b_u)
///   r = sigma(W_r h + in_r + b_r)
///   c = tanh(r o (W_h h) + in_h + b_h)
///   h' = u o h + (1 - u) o c
/// `h_out` may alias `h_prev`.
template <class Recurrent>
void gru_step(const GruParams<Recurrent>& p, std::span<const float> h_prev, const GateInputs& in,
              std::span<float> h_out, GruScratch& scratch) {
  const std::size_t n = p.hidden();
  require_dims(h_prev.size() == n && h_out.size() == n, "gru_step state");
  for (std::size_t g = 0; g < 3; ++g) {
    require_dims(in[g].size() == n, "gru_step gate input");
    require_dims(scratch.pre[g].size() == n, "gru_step scratch");
    gemv(p.recurrent[g], h_prev, scratch.pre[g]);
  }
  auto& pu = scratch.pre[kUpdate];
  auto& pr = scratch.pre[kReset];
  auto& ph = scratch.pre[kCandidate];
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    const float u = sigmoid(pu[i] + in[kUpdate][i] + p.bias[kUpdate][i]);
    const float r = sigmoid(pr[i] + in[kReset][i] + p.bias[kReset][i]);
    const float c = tanh_act(r * ph[i] + in[kCandidate][i] + p.bias[kCandidate][i]);
    h_out[i] = u * h_prev[i] + (1.0f - u) * c;
  }
}

/// Classic form with U x terms computed from the input vector.
template <class Recurrent>
std::vector<float> gru_step(const GruParams<Recurrent>& p, std::span<const float> h_prev, std::span<const float> x) {
  require_dims(p.has_input(), "gru_step without input matrices");
  std::array<std::vector<float>, 3> ux;
  for (std::size_t g = 0; g < 3; ++g) ux[g] = dense_gemv(p.input[g], x);
  GruScratch scratch(p.hidden());
  std::vector<float> h(p.hidden());
  gru_step(p, h_prev, GateInputs{ux[0], ux[1], ux[2]}, h, scratch);
  return h;
}

// ---------------------------------------------------------------------------
// DualFC: a1 o tanh(W1 x + b1) + a2 o tanh(W2 x + b2)

struct DualFcParams {
  DenseMatrix w1, w2;
  std::vector<float> b1, b2;
  std::vector<float> a1, a2;

  std::size_t outputs() const { return w1.rows(); }
  std::size_t inputs() const { return w1.cols(); }

  void validate() const {
    require_dims(w1.rows() == w2.rows() && w1.cols() == w2.cols(), "DualFC W1/W2 shape");
    const std::size_t n = w1.rows();
    require_dims(b1.size() == n && b2.size() == n && a1.size() == n && a2.size() == n, "DualFC vectors");
  }
};

/// Work buffers for dual_fc. Built from the parameters, it also holds
/// column-major copies of W1 and W2 so that the short rows of the output
/// layer are processed across rows; it must then only be used with those
/// parameters.
struct DualFcScratch {
  std::vector<float> t1, t2;
  std::vector<float> w1t, w2t;
  std::vector<double> acc1, acc2;

  explicit DualFcScratch(std::size_t outputs = 0) : t1(outputs), t2(outputs) {}

  explicit DualFcScratch(const DualFcParams& p)
      : t1(p.outputs()), t2(p.outputs()), acc1(p.outputs()), acc2(p.outputs()) {
    w1t = transpose(p.w1);
    w2t = transpose(p.w2);
  }

  bool packed() const { return !w1t.empty(); }

 private:
  static std::vector<float> transpose(const DenseMatrix& m) {
    std::vector<float> t(m.rows() * m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) t[c * m.rows() + r] = m(r, c);
    return t;
  }
};

namespace detail {

/// y = W x from a column-major copy of W, double accumulation per row.
inline void gemv_columns(std::span<const float> wt, std::size_t rows, std::span<const float> x,
                         std::span<double> acc, std::span<float> y) {
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double xc = x[c];
    const float* col = wt.data() + c * rows;
#pragma omp simd
    for (std::size_t r = 0; r < rows; ++r) acc[r] += static_cast<double>(col[r]) * xc;
  }
  for (std::size_t r = 0; r < rows; ++r) y[r] = static_cast<float>(acc[r]);
}

}  // namespace detail

inline void dual_fc(const DualFcParams& p, std::span<const float> x, std::span<float> out, DualFcScratch& s) {
  require_dims(x.size() == p.inputs() && out.size() == p.outputs(), "dual_fc");
  require_dims(s.t1.size() == p.outputs() && s.t2.size() == p.outputs(), "dual_fc scratch");
  if (s.packed()) {
    require_dims(s.w1t.size() == p.w1.values().size() && s.w2t.size() == p.w2.values().size(), "dual_fc packed");
    detail::gemv_columns(s.w1t, p.outputs(), x, s.acc1, s.t1);
    detail::gemv_columns(s.w2t, p.outputs(), x, s.acc2, s.t2);
  } else {
    dense_gemv(p.w1, x, s.t1);
    dense_gemv(p.w2, x, s.t2);
  }
#pragma omp simd
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = p.a1[i] * tanh_act(s.t1[i] + p.b1[i]) + p.a2[i] * tanh_act(s.t2[i] + p.b2[i]);
  }
}

inline std::vector<float> dual_fc(const DualFcParams& p, std::span<const float> x) {
  DualFcScratch s(p.outputs());
  std::vector<float> out(p.outputs());
  dual_fc(p, x, out, s);
  return out;
}

// ---------------------------------------------------------------------------
// Dense layer and width-3 temporal convolution, both with tanh.

struct DenseLayer {
  DenseMatrix weight;  // out x in
  std::vector<float> bias;

  std::size_t outputs() const { return weight.rows(); }
  std::size_t inputs() const { return weight.cols(); }
};

inline void dense_tanh(const DenseLayer& l, std::span<const float> x, std::span<float> out) {
  require_dims(l.bias.size() == l.outputs(), "dense bias");
  dense_gemv(l.weight, x, out);
#pragma omp simd
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tanh_act(out[i] + l.bias[i]);
}

/// Weight layout: out x (3 * in); column tap * in + i, tap 0 applying to t-1.
struct Conv1dParams {
  DenseMatrix weight;
  std::vector<float> bias;

  std::size_t outputs() const { return weight.rows(); }
  std::size_t inputs() const { return weight.cols() / 3; }
};

/// Output at t from the frames at t-1, t, t+1. An empty span stands for a
/// zero-padded frame.
inline void conv1d_3(const Conv1dParams& p, std::span<const float> prev, std::span<const float> cur,
                     std::span<const float> next, std::span<float> out) {
  const std::size_t in = p.inputs();
  require_dims(p.weight.cols() == 3 * in && p.bias.size() == p.outputs() && out.size() == p.outputs(),
               "conv1d_3 params");
  const std::array<std::span<const float>, 3> taps{prev, cur, next};
  for (const auto& t : taps) require_dims(t.empty() || t.size() == in, "conv1d_3 frame");
  for (std::size_t o = 0; o < p.outputs(); ++o) {
    const auto row = p.weight.row(o);
    double acc = p.bias[o];
    for (std::size_t k = 0; k < 3; ++k) {
      if (!taps[k].empty()) acc += dot(row.subspan(k * in, in), taps[k]);
    }
    out[o] = tanh_act(static_cast<float>(acc));
  }
}

inline std::vector<float> conv1d_3(const Conv1dParams& p, std::span<const std::vector<float>> frames, std::size_t t) {
  require_dims(t < frames.size(), "conv1d_3 index");
  auto at = [&](std::ptrdiff_t i) -> std::span<const float> {
    if (i < 0 || i >= static_cast<std::ptrdiff_t>(frames.size())) return {};
    return frames[static_cast<std::size_t>(i)];
  };
  const auto ti = static_cast<std::ptrdiff_t>(t);
  std::vector<float> out(p.outputs());
  conv1d_3(p, at(ti - 1), at(ti), at(ti + 1), out);
  return out;
}

}  // namespace lpcnet
