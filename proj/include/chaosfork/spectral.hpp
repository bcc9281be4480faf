#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <complex>

namespace chaosfork {

/// Thin owner of an Eigen FFT plan plus a scratch buffer.
///
/// The plan cache inside Eigen::FFT is mutable, so one instance must not be
/// shared between threads. Copies are independent.
template <typename Scalar>
class SpectralTransform {
 public:
  using Complex = std::complex<Scalar>;
  using ComplexArray = Eigen::Array<Complex, Eigen::Dynamic, 1>;

  /// Unnormalized forward DFT, sum_k a_k exp(-2 pi i j k / n).
  void forward(ComplexArray& data) {
    scratch_.resize(data.size());
    fft_.fwd(scratch_.data(), data.data(), data.size());
    data.swap(scratch_);
  }

  /// Inverse DFT including the 1/n factor.
  void inverse(ComplexArray& data) {
    scratch_.resize(data.size());
    fft_.inv(scratch_.data(), data.data(), data.size());
    data.swap(scratch_);
  }

 private:
  Eigen::FFT<Scalar> fft_;
  ComplexArray scratch_;
};

}  // namespace chaosfork
