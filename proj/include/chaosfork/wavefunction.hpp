#pragma once

#include "chaosfork/grid.hpp"
#include "chaosfork/spectral.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace chaosfork {

enum class Representation { position, momentum };

/// Complex amplitudes on a SpatialGrid, either in position or momentum form.
///
/// The discrete norm includes the quadrature weight (dx or dp), so that
/// sum |a|^2 * weight approximates the continuum integral. Momentum amplitudes
/// are stored in FFT order, matching SpatialGrid::p(j).
template <typename Scalar>
class Wavefunction {
 public:
  using Complex = std::complex<Scalar>;
  using Amplitudes = Eigen::Array<Complex, Eigen::Dynamic, 1>;

  Wavefunction() = default;
  Wavefunction(SpatialGrid<Scalar> grid, Amplitudes amplitudes,
               Representation representation = Representation::position)
      : grid_(grid), amplitudes_(std::move(amplitudes)), representation_(representation) {
    if (amplitudes_.size() != grid_.n_points)
      throw std::invalid_argument("amplitude count does not match grid size");
  }

  const SpatialGrid<Scalar>& grid() const { return grid_; }
  const Amplitudes& amplitudes() const { return amplitudes_; }
  Amplitudes& amplitudes() { return amplitudes_; }
  Representation representation() const { return representation_; }

  Scalar weight() const {
    return representation_ == Representation::position ? grid_.dx() : grid_.dp();
  }
  Scalar norm_squared() const { return amplitudes_.abs2().sum() * weight(); }

  void normalize() {
    const Scalar n2 = norm_squared();
    if (!(n2 > 0)) throw std::invalid_argument("cannot normalize a zero wavefunction");
    amplitudes_ /= std::sqrt(n2);
  }

 private:
  SpatialGrid<Scalar> grid_{};
  Amplitudes amplitudes_;
  Representation representation_ = Representation::position;
};

template <typename Scalar>
struct Moments {
  Scalar mean_x = 0;
  Scalar mean_p = 0;
  Scalar spread_x = 0;
  Scalar spread_p = 0;
};

/// Minimum-uncertainty Gaussian with position spread sigma_x and momentum
/// spread hbar/(2 sigma_x), centered at (x0, p0).
template <typename Scalar>
Wavefunction<Scalar> gaussian_wavepacket(const SpatialGrid<Scalar>& grid, Scalar x0, Scalar p0,
                                         Scalar sigma_x) {
  if (!(sigma_x > 0)) throw std::invalid_argument("sigma_x must be positive");
  const Scalar sigma_p = grid.hbar / (2 * sigma_x);
  const Scalar margin = 6;
  if (x0 - margin * sigma_x < grid.x_min || x0 + margin * sigma_x > grid.x_max ||
      std::abs(p0) + margin * sigma_p > grid.p_max()) {
    std::ostringstream msg;
    msg << "wavepacket at (" << x0 << ", " << p0 << ") with sigma_x " << sigma_x
        << " does not fit the grid with a 6-sigma margin";
    throw std::invalid_argument(msg.str());
  }
  typename Wavefunction<Scalar>::Amplitudes amps(grid.n_points);
  for (Eigen::Index k = 0; k < grid.n_points; ++k) {
    const Scalar u = grid.x(k) - x0;
    const Scalar envelope = std::exp(-u * u / (4 * sigma_x * sigma_x));
    amps[k] = std::polar(envelope, p0 * u / grid.hbar);
  }
  Wavefunction<Scalar> psi(grid, std::move(amps));
  psi.normalize();
  return psi;
}

/// <a|b> = sum conj(a) b * weight.
template <typename Scalar>
std::complex<Scalar> inner_product(const Wavefunction<Scalar>& a, const Wavefunction<Scalar>& b) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument("inner product of states on different grids");
  if (a.representation() != b.representation())
    throw std::invalid_argument("inner product of states in different representations");
  return (a.amplitudes().conjugate() * b.amplitudes()).sum() * a.weight();
}

/// |<a|b>|^2
template <typename Scalar>
Scalar overlap(const Wavefunction<Scalar>& a, const Wavefunction<Scalar>& b) {
  return std::norm(inner_product(a, b));
}

/// Unitary transform to momentum amplitudes,
/// phi(p_j) = dx / sqrt(2 pi hbar) * sum_k psi(x_k) exp(-i p_j x_k / hbar).
template <typename Scalar>
Wavefunction<Scalar> to_momentum_space(const Wavefunction<Scalar>& psi) {
  if (psi.representation() != Representation::position)
    throw std::invalid_argument("state is already in the momentum representation");
  const auto& grid = psi.grid();
  auto amps = psi.amplitudes();
  SpectralTransform<Scalar> fft;
  fft.forward(amps);
  const Scalar scale = grid.dx() / std::sqrt(2 * std::numbers::pi_v<Scalar> * grid.hbar);
  for (Eigen::Index j = 0; j < grid.n_points; ++j)
    amps[j] *= std::polar(scale, -grid.p(j) * grid.x_min / grid.hbar);
  return Wavefunction<Scalar>(grid, std::move(amps), Representation::momentum);
}

template <typename Scalar>
Wavefunction<Scalar> to_position_space(const Wavefunction<Scalar>& phi) {
  if (phi.representation() != Representation::momentum)
    throw std::invalid_argument("state is already in the position representation");
  const auto& grid = phi.grid();
  auto amps = phi.amplitudes();
  // Undo the phase and prefactor; inverse() supplies the 1/n.
  const Scalar scale = std::sqrt(2 * std::numbers::pi_v<Scalar> * grid.hbar) / grid.dx();
  for (Eigen::Index j = 0; j < grid.n_points; ++j)
    amps[j] *= std::polar(scale, grid.p(j) * grid.x_min / grid.hbar);
  SpectralTransform<Scalar> fft;
  fft.inverse(amps);
  return Wavefunction<Scalar>(grid, std::move(amps), Representation::position);
}

/// Position and momentum means and spreads. Momentum moments are taken from
/// the momentum representation.
template <typename Scalar>
Moments<Scalar> moments(const Wavefunction<Scalar>& psi) {
  const Wavefunction<Scalar> pos =
      psi.representation() == Representation::position ? psi : to_position_space(psi);
  const Wavefunction<Scalar> mom =
      psi.representation() == Representation::momentum ? psi : to_momentum_space(psi);
  const Scalar n2 = pos.norm_squared();
  if (std::abs(n2 - 1) > Scalar(1e-6)) {
    std::ostringstream msg;
    msg << "moments require a normalized state, norm^2 = " << n2;
    throw std::invalid_argument(msg.str());
  }
  const auto& grid = psi.grid();
  const auto x = grid.positions();
  const auto p = grid.momenta();
  const auto rho_x = (pos.amplitudes().abs2() * grid.dx()).eval();
  const auto rho_p = (mom.amplitudes().abs2() * grid.dp()).eval();

  Moments<Scalar> m;
  m.mean_x = (rho_x * x).sum();
  m.mean_p = (rho_p * p).sum();
  m.spread_x = std::sqrt(std::max(Scalar(0), (rho_x * (x - m.mean_x).square()).sum()));
  m.spread_p = std::sqrt(std::max(Scalar(0), (rho_p * (p - m.mean_p).square()).sum()));
  return m;
}

/// Position spread only; cheaper than moments() because no transform is needed.
template <typename Scalar>
Scalar position_spread(const Wavefunction<Scalar>& psi) {
  const auto& grid = psi.grid();
  const auto rho = psi.amplitudes().abs2().eval();
  const Scalar total = rho.sum();
  Scalar mean = 0;
  for (Eigen::Index k = 0; k < grid.n_points; ++k) mean += rho[k] * grid.x(k);
  mean /= total;
  Scalar var = 0;
  for (Eigen::Index k = 0; k < grid.n_points; ++k) {
    const Scalar u = grid.x(k) - mean;
    var += rho[k] * u * u;
  }
  return std::sqrt(var / total);
}

/// Largest density at either end of the grid relative to the peak density.
template <typename Scalar>
Scalar boundary_density_ratio(const Wavefunction<Scalar>& psi) {
  const auto rho = psi.amplitudes().abs2().eval();
  const Scalar peak = rho.maxCoeff();
  if (!(peak > 0)) return 0;
  return std::max(rho[0], rho[rho.size() - 1]) / peak;
}

/// Multiplies by exp(i q x / hbar), shifting the state by q in momentum.
template <typename Scalar>
Wavefunction<Scalar> momentum_kick(const Wavefunction<Scalar>& psi, Scalar q) {
  if (psi.representation() != Representation::position)
    throw std::invalid_argument("momentum kick needs the position representation");
  auto out = psi;
  const auto& grid = psi.grid();
  for (Eigen::Index k = 0; k < grid.n_points; ++k)
    out.amplitudes()[k] *= std::polar(Scalar(1), q * grid.x(k) / grid.hbar);
  return out;
}

/// Shifts the state by a whole number of grid cells in position (zero fill).
template <typename Scalar>
Wavefunction<Scalar> position_shift(const Wavefunction<Scalar>& psi, Eigen::Index cells) {
  if (psi.representation() != Representation::position)
    throw std::invalid_argument("position shift needs the position representation");
  const Eigen::Index n = psi.grid().n_points;
  typename Wavefunction<Scalar>::Amplitudes amps =
      Wavefunction<Scalar>::Amplitudes::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = k - cells;
    if (src >= 0 && src < n) amps[k] = psi.amplitudes()[src];
  }
  return Wavefunction<Scalar>(psi.grid(), std::move(amps));
}

using State = Wavefunction<double>;

}  // namespace chaosfork
