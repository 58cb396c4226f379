#pragma once

// Independent reference implementations used only by the tests. Linear
// algebra goes through Eigen; the network references run in double and take
// the literal (unfolded, densified) route.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "lpcnet/lpcnet.hpp"

namespace oracle {

using lpcnet::DenseMatrix;
using lpcnet::MuLawLevel;

/// Solves the Yule-Walker system R a = [r1..rM] with a dense factorization.
inline std::vector<double> toeplitz_solve(const std::vector<double>& r, std::size_t order) {
  Eigen::MatrixXd R(order, order);
  Eigen::VectorXd rhs(order);
  for (std::size_t i = 0; i < order; ++i) {
    rhs(i) = r[i + 1];
    for (std::size_t j = 0; j < order; ++j) R(i, j) = r[i > j ? i - j : j - i];
  }
  const Eigen::VectorXd a = R.ldlt().solve(rhs);
  return {a.data(), a.data() + order};
}

/// Largest root magnitude of z^M - a1 z^(M-1) - ... - aM, the denominator of
/// the synthesis filter 1 / (1 - sum a_k z^-k).
inline double max_root_magnitude(const std::vector<double>& a) {
  const std::size_t m = a.size();
  if (m == 0) return 0.0;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < m; ++k) c(0, k) = a[k];
  for (std::size_t k = 1; k < m; ++k) c(k, k - 1) = 1.0;
  const Eigen::VectorXcd ev = c.eigenvalues();
  double mx = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) mx = std::max(mx, std::abs(ev(i)));
  return mx;
}

/// Biased autocorrelation of a random signal: white, AR-coloured or a
/// sinusoid in noise. Always positive definite in practice.
inline std::vector<double> random_autocorrelation(std::mt19937_64& rng, std::size_t max_lag) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  const std::size_t len = 400;
  std::vector<double> x(len);
  switch (kind(rng)) {
    case 0:
      for (auto& v : x) v = n01(rng);
      break;
    case 1: {
      const double a1 = u(rng), a2 = 0.5 * u(rng);
      double y1 = 0, y2 = 0;
      for (auto& v : x) {
        v = n01(rng) + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = v;
      }
      break;
    }
    default: {
      const double w = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
      for (std::size_t t = 0; t < len; ++t) x[t] = std::sin(w * static_cast<double>(t)) + 0.3 * n01(rng);
    }
  }
  std::vector<double> r(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    for (std::size_t t = k; t < len; ++t) r[k] += x[t] * x[t - k];
  }
  return r;
}

inline std::vector<double> gemv(const DenseMatrix& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) y[r] += static_cast<double>(m(r, c)) * x[c];
  }
  return y;
}

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// GRU step in double with dense matrices; `in[g]` are the summed
/// non-recurrent gate inputs.
inline std::vector<double> gru(const std::array<DenseMatrix, 3>& w, const std::array<std::vector<float>, 3>& bias,
                               const std::vector<double>& h, const std::array<std::vector<double>, 3>& in) {
  const auto wu = gemv(w[0], h), wr = gemv(w[1], h), wh = gemv(w[2], h);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double uu = sigmoid(wu[i] + in[0][i] + bias[0][i]);
    const double rr = sigmoid(wr[i] + in[1][i] + bias[1][i]);
    const double cc = std::tanh(rr * wh[i] + in[2][i] + bias[2][i]);
    out[i] = uu * h[i] + (1.0 - uu) * cc;
  }
  return out;
}

/// Sample-rate network computed the literal way: embed each input, multiply
/// by the GRU_A input submatrices, densified recurrent weights.
class LiteralSampleNet {
 public:
  LiteralSampleNet(const lpcnet::SampleRateParams& p, const lpcnet::UnfoldedEmbeddings& u) : p_(p), u_(u) {
    for (std::size_t g = 0; g < 3; ++g) wa_[g] = lpcnet::densify(p.gru_a.recurrent[g]);
    ha_.assign(p.na(), 0.0);
    hb_.assign(p.nb(), 0.0);
  }

  std::vector<double> step(MuLawLevel s, MuLawLevel pr, MuLawLevel e, const std::vector<double>& f) {
    const std::array<MuLawLevel, 3> levels{s, pr, e};
    std::array<std::vector<double>, 3> in;
    for (std::size_t g = 0; g < 3; ++g) {
      in[g] = gemv(p_.cond[g], f);
      for (std::size_t i = 0; i < 3; ++i) {
        const auto x = to_double(u_.embedding.row(static_cast<std::size_t>(levels[i].value())));
        const auto y = gemv(u_.input[lpcnet::FoldedEmbeddings::index(g, i)], x);
        for (std::size_t k = 0; k < y.size(); ++k) in[g][k] += y[k];
      }
    }
    ha_ = gru(wa_, p_.gru_a.bias, ha_, in);
    std::array<std::vector<double>, 3> inb;
    for (std::size_t g = 0; g < 3; ++g) inb[g] = gemv(p_.gru_b.input[g], ha_);
    hb_ = gru(p_.gru_b.recurrent, p_.gru_b.bias, hb_, inb);
    const auto& fc = p_.dual_fc;
    const auto t1 = gemv(fc.w1, hb_), t2 = gemv(fc.w2, hb_);
    std::vector<double> logits(t1.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] = fc.a1[i] * std::tanh(t1[i] + fc.b1[i]) + fc.a2[i] * std::tanh(t2[i] + fc.b2[i]);
    }
    return logits;
  }

 private:
  const lpcnet::SampleRateParams& p_;
  const lpcnet::UnfoldedEmbeddings& u_;
  std::array<DenseMatrix, 3> wa_;
  std::vector<double> ha_, hb_;
};

/// Random block-sparse matrix for kernel tests; `allow_diagonal_slots` keeps
/// nonzero values in block positions that lie on the diagonal, so the block
/// and the diagonal overlap.
inline lpcnet::BlockSparseMatrix random_sparse(std::size_t n, double density, std::mt19937_64& rng,
                                               bool allow_diagonal_slots, bool zero_diagonal = false) {
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  const std::size_t groups = n / lpcnet::kBlockRows;
  std::vector<std::uint32_t> slots(groups * n);
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<std::uint32_t>(i);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(static_cast<std::size_t>(std::round(density * static_cast<double>(slots.size()))));
  std::vector<lpcnet::SparseBlock> blocks;
  std::vector<float> values;
  for (auto s : slots) {
    const lpcnet::SparseBlock b{static_cast<std::uint32_t>((s / n) * lpcnet::kBlockRows),
                                static_cast<std::uint32_t>(s % n)};
    blocks.push_back(b);
    for (std::size_t j = 0; j < lpcnet::kBlockRows; ++j) {
      values.push_back(!allow_diagonal_slots && b.row_start + j == b.col ? 0.0f : val(rng));
    }
  }
  std::vector<float> diag(n);
  for (auto& d : diag) d = zero_diagonal ? 0.0f : val(rng);
  return {n, n, std::move(blocks), std::move(values), std::move(diag)};
}

}  // namespace oracle
