#pragma once

#include "chaosfork/errors.hpp"
#include "chaosfork/spectral.hpp"
#include "chaosfork/wavefunction.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace chaosfork {

/// Wigner function sampled on the state's position grid and a momentum grid
/// of spacing dp/2 covering [-p_max/2, p_max/2).
///
/// values(k, m) is W(x_k, p_m) with p_m = (m - n/2) * dp/2, ascending in m.
template <typename Scalar>
struct WignerFunction {
  using Matrix = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix values;
  SpatialGrid<Scalar> grid{};
  /// Largest |Im W| seen before the real part was kept.
  Scalar max_imaginary_residue = 0;

  Eigen::Index n_x() const { return values.rows(); }
  Eigen::Index n_p() const { return values.cols(); }
  Scalar dx() const { return grid.dx(); }
  Scalar dp() const { return grid.dp() / 2; }
  Scalar x(Eigen::Index k) const { return grid.x(k); }
  Scalar p(Eigen::Index m) const { return static_cast<Scalar>(m - n_p() / 2) * dp(); }

  Scalar integral() const { return values.sum() * dx() * dp(); }
};

/// W(x, p) = 1/(pi hbar) int conj(psi(x+y)) psi(x-y) exp(2 i p y / hbar) dy,
/// with y restricted to whole grid cells and psi taken as zero off the grid.
///
/// The symmetric-point transform aliases momenta beyond p_max/2, so the
/// momentum marginal is compared against |psi(p)|^2 and a mismatch above
/// `alias_tolerance` (L1) raises NumericalError.
template <typename Scalar>
WignerFunction<Scalar> wigner_transform(const Wavefunction<Scalar>& psi,
                                        Scalar alias_tolerance = Scalar(1e-6));

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> position_marginal(const WignerFunction<Scalar>& w) {
  return w.values.rowwise().sum() * w.dp();
}

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> momentum_marginal(const WignerFunction<Scalar>& w) {
  return w.values.colwise().sum().transpose() * w.dx();
}

/// |psi(p_m)|^2 on the Wigner momentum grid, evaluated exactly with a
/// zero-padded transform of length 2n.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> momentum_density_on_wigner_grid(const Wavefunction<Scalar>& psi) {
  if (psi.representation() != Representation::position)
    throw std::invalid_argument("momentum density needs the position representation");
  const auto& grid = psi.grid();
  const Eigen::Index n = grid.n_points;
  typename SpectralTransform<Scalar>::ComplexArray padded =
      SpectralTransform<Scalar>::ComplexArray::Zero(2 * n);
  padded.head(n) = psi.amplitudes();
  SpectralTransform<Scalar> fft;
  fft.forward(padded);
  const Scalar scale2 = grid.dx() * grid.dx() / (2 * std::numbers::pi_v<Scalar> * grid.hbar);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> out(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const Eigen::Index signed_m = m - n / 2;
    const Eigen::Index idx = signed_m >= 0 ? signed_m : signed_m + 2 * n;
    out[m] = std::norm(padded[idx]) * scale2;
  }
  return out;
}

template <typename Scalar>
struct MarginalErrors {
  Scalar position_l1 = 0;
  Scalar momentum_l1 = 0;
};

template <typename Scalar>
MarginalErrors<Scalar> marginal_errors(const WignerFunction<Scalar>& w, const Wavefunction<Scalar>& psi) {
  const auto rho_x = psi.amplitudes().abs2().eval();
  const auto rho_p = momentum_density_on_wigner_grid(psi);
  MarginalErrors<Scalar> err;
  err.position_l1 = (position_marginal(w) - rho_x).abs().sum() * w.dx();
  err.momentum_l1 = (momentum_marginal(w) - rho_p).abs().sum() * w.dp();
  return err;
}

template <typename Scalar>
WignerFunction<Scalar> wigner_transform(const Wavefunction<Scalar>& psi, Scalar alias_tolerance) {
  if (psi.representation() != Representation::position)
    throw std::invalid_argument("wigner transform needs the position representation");
  const auto& grid = psi.grid();
  const Eigen::Index n = grid.n_points;
  const auto& a = psi.amplitudes();
  const Scalar prefactor = grid.dx() / (std::numbers::pi_v<Scalar> * grid.hbar);

  WignerFunction<Scalar> w;
  w.grid = grid;
  w.values.resize(n, n);
  SpectralTransform<Scalar> fft;
  typename SpectralTransform<Scalar>::ComplexArray row(n);
  Scalar worst_imag = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    row.setZero();
    const Eigen::Index reach = std::min(k, n - 1 - k);
    for (Eigen::Index j = -reach; j <= reach; ++j) {
      row[j >= 0 ? j : j + n] = std::conj(a[k + j]) * a[k - j];
    }
    fft.forward(row);
    // sum_j f_j exp(+2 pi i j m / n) is the forward transform at -m.
    for (Eigen::Index m = 0; m < n; ++m) {
      const Eigen::Index signed_m = m - n / 2;
      const Eigen::Index idx = signed_m <= 0 ? -signed_m : n - signed_m;
      const auto value = row[idx] * prefactor;
      w.values(k, m) = value.real();
      worst_imag = std::max(worst_imag, std::abs(value.imag()));
    }
  }
  w.max_imaginary_residue = worst_imag;

  if (alias_tolerance > 0) {
    const auto err = marginal_errors(w, psi);
    if (err.momentum_l1 > alias_tolerance) {
      std::ostringstream msg;
      msg << "wigner momentum marginal mismatch " << err.momentum_l1
          << " exceeds tolerance; the state has momenta beyond p_max/2 = " << grid.p_max() / 2;
      throw NumericalError(msg.str());
    }
  }
  return w;
}

/// 2 pi hbar int W1 W2 dx dp; equals |<psi1|psi2>|^2 for pure states.
template <typename Scalar>
Scalar wigner_overlap(const WignerFunction<Scalar>& w1, const WignerFunction<Scalar>& w2) {
  if (!(w1.grid == w2.grid) || w1.values.rows() != w2.values.rows() ||
      w1.values.cols() != w2.values.cols())
    throw std::invalid_argument("wigner overlap of functions on different grids");
  return 2 * std::numbers::pi_v<Scalar> * w1.grid.hbar * (w1.values * w2.values).sum() * w1.dx() *
         w1.dp();
}

/// 2 pi hbar int W1(x, p) W2(x, p - cells * dp) dx dp. A momentum kick by a
/// whole number of Wigner momentum cells shifts W exactly by that many
/// columns, so this is the overlap of psi2 kicked by cells * dp with psi1.
template <typename Scalar>
Scalar wigner_overlap_shifted(const WignerFunction<Scalar>& w1, const WignerFunction<Scalar>& w2,
                              Eigen::Index cells) {
  if (!(w1.grid == w2.grid) || w1.values.rows() != w2.values.rows() ||
      w1.values.cols() != w2.values.cols())
    throw std::invalid_argument("wigner overlap of functions on different grids");
  const Eigen::Index n_p = w1.n_p();
  Scalar sum = 0;
  for (Eigen::Index m = std::max<Eigen::Index>(0, cells); m < std::min(n_p, n_p + cells); ++m)
    sum += (w1.values.col(m) * w2.values.col(m - cells)).sum();
  return 2 * std::numbers::pi_v<Scalar> * w1.grid.hbar * sum * w1.dx() * w1.dp();
}

using Wigner = WignerFunction<double>;

}  // namespace chaosfork
