#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace chaosfork {

/// Uniform periodic position grid together with the conjugate momentum grid.
///
/// Positions are x_k = x_min + k*dx for k in [0, n_points); the right end x_max
/// is excluded. Momenta follow the FFT ordering, p_j = j*dp for j < n/2 and
/// (j - n)*dp otherwise, so the momentum grid spans [-pi*hbar/dx, pi*hbar/dx).
template <typename Scalar>
struct SpatialGrid {
  Eigen::Index n_points = 0;
  Scalar x_min = 0;
  Scalar x_max = 0;
  Scalar hbar = 0;

  Scalar dx() const { return (x_max - x_min) / static_cast<Scalar>(n_points); }
  Scalar dp() const {
    return Scalar(2) * std::numbers::pi_v<Scalar> * hbar / (static_cast<Scalar>(n_points) * dx());
  }
  Scalar p_max() const { return std::numbers::pi_v<Scalar> * hbar / dx(); }

  Scalar x(Eigen::Index k) const { return x_min + static_cast<Scalar>(k) * dx(); }
  Scalar p(Eigen::Index j) const {
    const Eigen::Index signed_j = j < n_points / 2 ? j : j - n_points;
    return static_cast<Scalar>(signed_j) * dp();
  }

  Eigen::Array<Scalar, Eigen::Dynamic, 1> positions() const {
    Eigen::Array<Scalar, Eigen::Dynamic, 1> out(n_points);
    for (Eigen::Index k = 0; k < n_points; ++k) out[k] = x(k);
    return out;
  }
  Eigen::Array<Scalar, Eigen::Dynamic, 1> momenta() const {
    Eigen::Array<Scalar, Eigen::Dynamic, 1> out(n_points);
    for (Eigen::Index j = 0; j < n_points; ++j) out[j] = p(j);
    return out;
  }

  bool operator==(const SpatialGrid&) const = default;
};

inline bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

template <typename Scalar>
SpatialGrid<Scalar> build_grid(Eigen::Index n_points, Scalar x_min, Scalar x_max, Scalar hbar) {
  if (n_points < 2 || !is_power_of_two(n_points)) {
    std::ostringstream msg;
    msg << "grid size must be a power of two >= 2, got " << n_points;
    throw std::invalid_argument(msg.str());
  }
  if (!(x_max > x_min)) throw std::invalid_argument("grid interval is empty or inverted");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
  return SpatialGrid<Scalar>{n_points, x_min, x_max, hbar};
}

using Grid = SpatialGrid<double>;

}  // namespace chaosfork
