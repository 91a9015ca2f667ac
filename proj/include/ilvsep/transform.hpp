#pragma once

#include "ilvsep/wavio.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace ilvsep {

/// Sine window of length 2 * frame_len. Satisfies w[n]^2 + w[n + frame_len]^2 = 1.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sine_window(int frame_len) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(2 * frame_len);
  for (int n = 0; n < 2 * frame_len; ++n) {
    w[n] = std::sin(std::numbers::pi_v<Scalar> * (Scalar(n) + Scalar(0.5)) / Scalar(2 * frame_len));
  }
  return w;
}

/// Orthonormal windowed MDCT of one 2M-sample block into M coefficients.
///
///   X[k] = sqrt(2/M) * sum_n w[n] x[n] cos(pi/M (n + 1/2 + M/2)(k + 1/2))
///
/// The block is folded into an M-point DCT-IV which is evaluated through an
/// M/2-point complex FFT. With the sine window the transform is a tight frame
/// and `inverse` followed by overlap-add reconstructs the input exactly.
template <typename Scalar>
class MdctPlan {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Complex = std::complex<Scalar>;

  explicit MdctPlan(int frame_len)
      : m_(frame_len), window_(sine_window<Scalar>(frame_len)), pre_(frame_len / 2), post_(frame_len / 2) {
    const Scalar pi = std::numbers::pi_v<Scalar>;
    for (int j = 0; j < m_ / 2; ++j) {
      pre_[j] = std::polar(Scalar(1), -pi * Scalar(j) / Scalar(m_));
      post_[j] = std::polar(Scalar(1), -pi * (Scalar(4 * j) + Scalar(1)) / Scalar(4 * m_));
    }
    scale_ = std::sqrt(Scalar(2) / Scalar(m_));
  }

  int frame_len() const { return m_; }
  const Vector& window() const { return window_; }

  /// `block` has 2M samples, `out` receives M coefficients.
  void forward(const Scalar* block, Scalar* out) const {
    const int h = m_ / 2;
    std::vector<Scalar> u(static_cast<std::size_t>(m_));
    auto y = [&](int n) { return window_[n] * block[n]; };
    for (int n = 0; n < h; ++n) u[n] = -y(3 * h - 1 - n) - y(3 * h + n);
    for (int n = h; n < m_; ++n) u[n] = y(n - h) - y(3 * h - 1 - n);
    dct4(u.data(), out);
  }

  /// Adds the windowed 2M-sample synthesis of `coeffs` into `block`.
  void inverse_add(const Scalar* coeffs, Scalar* block) const {
    const int h = m_ / 2;
    std::vector<Scalar> u(static_cast<std::size_t>(m_));
    dct4(coeffs, u.data());
    // Transpose of the fold used in forward().
    std::vector<Scalar> y(static_cast<std::size_t>(2 * m_), Scalar(0));
    for (int n = 0; n < h; ++n) {
      y[3 * h - 1 - n] -= u[n];
      y[3 * h + n] -= u[n];
    }
    for (int n = h; n < m_; ++n) {
      y[n - h] += u[n];
      y[3 * h - 1 - n] -= u[n];
    }
    for (int n = 0; n < 2 * m_; ++n) block[n] += window_[n] * y[n];
  }

 private:
  // Orthonormal DCT-IV (its own inverse) via an M/2-point complex FFT.
  void dct4(const Scalar* in, Scalar* out) const {
    const int h = m_ / 2;
    std::vector<Complex> z(static_cast<std::size_t>(h)), spec;
    for (int j = 0; j < h; ++j) z[j] = Complex(in[2 * j], in[m_ - 1 - 2 * j]) * pre_[j];
    fft_.fwd(spec, z);
    for (int p = 0; p < h; ++p) {
      const Complex y = spec[p] * post_[p];
      out[2 * p] = scale_ * y.real();
      out[m_ - 1 - 2 * p] = -scale_ * y.imag();
    }
  }

  int m_;
  Vector window_;
  std::vector<Complex> pre_;
  std::vector<Complex> post_;
  Scalar scale_;
  mutable Eigen::FFT<Scalar> fft_;
};

/// Per-channel MDCT grid. Each entry of `coeffs` is num_bins x num_frames.
struct TfTensor {
  std::vector<Eigen::MatrixXd> coeffs;
  int frame_len = 0;
  int sample_rate = 0;
  Eigen::Index signal_length = 0;

  Eigen::Index num_bins() const { return frame_len; }
  Eigen::Index num_frames() const { return coeffs.empty() ? 0 : coeffs.front().cols(); }
  int num_channels() const { return static_cast<int>(coeffs.size()); }
};

/// Frames needed to cover `length` samples with frame_len zeros padded at each end.
Eigen::Index mdct_num_frames(Eigen::Index length, int frame_len);

Eigen::MatrixXd mdct_analyze(const Eigen::Ref<const Eigen::VectorXd>& signal, int frame_len);
Eigen::VectorXd mdct_synthesize(const Eigen::Ref<const Eigen::MatrixXd>& grid, int frame_len,
                                Eigen::Index length);

TfTensor mdct_forward(const MultichannelAudio& audio, int frame_len);
MultichannelAudio mdct_inverse(const TfTensor& tf);

}  // namespace ilvsep
