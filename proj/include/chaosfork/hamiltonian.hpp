#pragma once

#include <cmath>
#include <stdexcept>

namespace chaosfork {

/// Which member of the forked pair a Hamiltonian describes.
enum class Branch { base, plus, minus };

inline int branch_sign(Branch b) {
  switch (b) {
    case Branch::plus: return 1;
    case Branch::minus: return -1;
    case Branch::base: return 0;
  }
  return 0;
}

/// Periodically driven cosine potential in a weak harmonic trap,
///
///   H = p^2/(2 mass) - kappa cos(x - drive_amplitude sin t) + stiffness (x + s fork_offset)^2 / 2,
///
/// with s = 0, +1, -1 for the base, plus and minus branches.
template <typename Scalar>
struct DrivenHamiltonian {
  Scalar mass = 1;
  Scalar kappa = Scalar(0.36);
  Scalar drive_amplitude = Scalar(3.8);
  Scalar stiffness = Scalar(0.01);
  Scalar fork_offset = Scalar(0.5);
  Branch branch = Branch::base;

  Scalar shift() const { return static_cast<Scalar>(branch_sign(branch)) * fork_offset; }

  DrivenHamiltonian on_branch(Branch b) const {
    DrivenHamiltonian out = *this;
    out.branch = b;
    return out;
  }

  void validate() const {
    if (!(mass > 0)) throw std::invalid_argument("mass must be positive");
    if (!(stiffness >= 0)) throw std::invalid_argument("stiffness must be non-negative");
    if (!std::isfinite(kappa) || !std::isfinite(drive_amplitude) || !std::isfinite(fork_offset))
      throw std::invalid_argument("hamiltonian parameters must be finite");
  }
};

template <typename Scalar>
Scalar drive_phase(const DrivenHamiltonian<Scalar>& h, Scalar t) {
  return h.drive_amplitude * std::sin(t);
}

template <typename Scalar>
Scalar potential_value(const DrivenHamiltonian<Scalar>& h, Scalar x, Scalar t) {
  const Scalar u = x + h.shift();
  return -h.kappa * std::cos(x - drive_phase(h, t)) + h.stiffness * u * u / 2;
}

/// -dV/dx
template <typename Scalar>
Scalar force(const DrivenHamiltonian<Scalar>& h, Scalar x, Scalar t) {
  return -h.kappa * std::sin(x - drive_phase(h, t)) - h.stiffness * (x + h.shift());
}

/// d(force)/dx, used by the tangent map.
template <typename Scalar>
Scalar force_gradient(const DrivenHamiltonian<Scalar>& h, Scalar x, Scalar t) {
  return -h.kappa * std::cos(x - drive_phase(h, t)) - h.stiffness;
}

/// H_plus - H_minus = 2 stiffness fork_offset x, independent of time.
template <typename Scalar>
Scalar perturbation_value(const DrivenHamiltonian<Scalar>& h, Scalar x) {
  return 2 * h.stiffness * h.fork_offset * x;
}

using Hamiltonian = DrivenHamiltonian<double>;

}  // namespace chaosfork
