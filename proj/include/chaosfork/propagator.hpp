#pragma once

#include "chaosfork/errors.hpp"
#include "chaosfork/hamiltonian.hpp"
#include "chaosfork/spectral.hpp"
#include "chaosfork/wavefunction.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace chaosfork {

/// Second-order symmetric (Strang) split-operator propagator for
/// DrivenHamiltonian on a periodic grid.
///
/// One step is exp(-iK dt/2) exp(-iV(t + dt/2) dt) exp(-iK dt/2) (units of
/// hbar). advance() fuses consecutive kinetic half steps so that n steps cost
/// n + 1 transform pairs; the result is the same as n calls of step().
template <typename Scalar>
class SplitOperator {
 public:
  using Complex = std::complex<Scalar>;
  using ComplexArray = Eigen::Array<Complex, Eigen::Dynamic, 1>;
  using RealArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  SplitOperator(const SpatialGrid<Scalar>& grid, Scalar mass, Scalar dt)
      : grid_(grid), dt_(dt), positions_(grid.positions()) {
    if (!(dt > 0)) throw std::invalid_argument("time step must be positive");
    if (!(mass > 0)) throw std::invalid_argument("mass must be positive");
    const RealArray p = grid.momenta();
    const RealArray kinetic = p.square() / (2 * mass);
    half_kinetic_.resize(grid.n_points);
    full_kinetic_.resize(grid.n_points);
    for (Eigen::Index j = 0; j < grid.n_points; ++j) {
      half_kinetic_[j] = std::polar(Scalar(1), -kinetic[j] * dt / (2 * grid.hbar));
      full_kinetic_[j] = std::polar(Scalar(1), -kinetic[j] * dt / grid.hbar);
    }
    cos_x_ = positions_.cos();
    sin_x_ = positions_.sin();
  }

  Scalar dt() const { return dt_; }
  const SpatialGrid<Scalar>& grid() const { return grid_; }

  /// Advances psi by `steps` steps starting at absolute time t0. The drive is
  /// evaluated at the midpoint t0 + (i + 1/2) dt of each step.
  void advance(Wavefunction<Scalar>& psi, const DrivenHamiltonian<Scalar>& h, Scalar t0,
               long steps) {
    if (steps <= 0) return;
    check_state(psi);
    prepare_branch(h);
    auto& amps = psi.amplitudes();
    kinetic(amps, half_kinetic_);
    for (long i = 0; i < steps; ++i) {
      potential(amps, h, t0 + (static_cast<Scalar>(i) + Scalar(0.5)) * dt_);
      kinetic(amps, i + 1 < steps ? full_kinetic_ : half_kinetic_);
    }
  }

  void step(Wavefunction<Scalar>& psi, const DrivenHamiltonian<Scalar>& h, Scalar t) {
    advance(psi, h, t, 1);
  }

 private:
  void check_state(const Wavefunction<Scalar>& psi) const {
    if (psi.representation() != Representation::position)
      throw std::invalid_argument("propagation needs the position representation");
    if (!(psi.grid() == grid_)) throw std::invalid_argument("state and propagator grids differ");
  }

  void prepare_branch(const DrivenHamiltonian<Scalar>& h) {
    const Scalar shift = h.shift();
    if (harmonic_ready_ && shift == harmonic_shift_ && h.stiffness == harmonic_stiffness_) return;
    harmonic_ = h.stiffness * (positions_ + shift).square() / 2;
    harmonic_shift_ = shift;
    harmonic_stiffness_ = h.stiffness;
    harmonic_ready_ = true;
  }

  void kinetic(ComplexArray& amps, const ComplexArray& phases) {
    fft_.forward(amps);
    amps *= phases;
    fft_.inverse(amps);
  }

  void potential(ComplexArray& amps, const DrivenHamiltonian<Scalar>& h, Scalar t_mid) {
    const Scalar shift_angle = drive_phase(h, t_mid);
    const Scalar c = std::cos(shift_angle);
    const Scalar s = std::sin(shift_angle);
    const Scalar scale = dt_ / grid_.hbar;
    // cos(x - phi) = cos x cos phi + sin x sin phi
    for (Eigen::Index k = 0; k < amps.size(); ++k) {
      const Scalar v = -h.kappa * (cos_x_[k] * c + sin_x_[k] * s) + harmonic_[k];
      amps[k] *= std::polar(Scalar(1), -v * scale);
    }
  }

  SpatialGrid<Scalar> grid_;
  Scalar dt_;
  RealArray positions_;
  RealArray cos_x_;
  RealArray sin_x_;
  RealArray harmonic_;
  Scalar harmonic_shift_ = 0;
  Scalar harmonic_stiffness_ = 0;
  bool harmonic_ready_ = false;
  ComplexArray half_kinetic_;
  ComplexArray full_kinetic_;
  SpectralTransform<Scalar> fft_;
};

/// One symmetric step of length dt starting at absolute time t.
template <typename Scalar>
Wavefunction<Scalar> split_operator_step(const Wavefunction<Scalar>& psi,
                                         const DrivenHamiltonian<Scalar>& h, Scalar t, Scalar dt) {
  SplitOperator<Scalar> prop(psi.grid(), h.mass, dt);
  auto out = psi;
  prop.step(out, h, t);
  return out;
}

template <typename Scalar>
struct EvolutionSchedule {
  Scalar preparation_time = 0;
  Scalar tau_max = 200;
  Scalar dt = Scalar(0.005);
  Scalar sample_every = Scalar(0.1);
  /// Stop recording once the overlap drops below this level; 0 disables.
  Scalar stop_overlap = Scalar(0.5);

  /// Number of steps covering `duration`; durations must be whole multiples of dt.
  long steps_for(Scalar duration, const char* what) const {
    const Scalar ratio = duration / dt;
    const long n = std::lround(ratio);
    if (std::abs(ratio - static_cast<Scalar>(n)) > Scalar(1e-6)) {
      std::ostringstream msg;
      msg << what << " (" << duration << ") is not a whole number of time steps (dt = " << dt << ")";
      throw std::invalid_argument(msg.str());
    }
    return n;
  }

  void validate() const {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (!(sample_every >= dt)) throw std::invalid_argument("sample_every must be at least dt");
    if (!(preparation_time >= 0)) throw std::invalid_argument("preparation time must be non-negative");
    if (!(tau_max >= 0)) throw std::invalid_argument("tau_max must be non-negative");
    if (!(stop_overlap >= 0 && stop_overlap < 1)) throw std::invalid_argument("stop_overlap must lie in [0, 1)");
    steps_for(preparation_time, "preparation time");
    steps_for(sample_every, "sample_every");
  }
};

/// Time series recorded after the fork, sampled every sample_every.
template <typename Scalar>
struct OverlapSeries {
  std::vector<Scalar> times;
  std::vector<Scalar> overlap;
  std::vector<Scalar> delta_v;
  std::vector<Scalar> phi;
  /// cos^2(phi) while phi < pi/2, and 0 (the trivial bound) afterwards.
  std::vector<Scalar> bound;
  Moments<Scalar> fork_moments{};
  Scalar spread_x = 0;
  Scalar spread_p = 0;
  bool bound_window_exceeded = false;
  Scalar max_norm_drift = 0;
  Scalar max_boundary_ratio = 0;
};

/// Accumulated phase phi(t) = (1/hbar) int_0^t delta_v dt' (trapezoid) and the
/// bound cos^2 phi, truncated where phi first reaches pi/2.
template <typename Scalar>
struct BoundCurve {
  std::vector<Scalar> phi;
  std::vector<Scalar> bound;
};

template <typename Scalar>
BoundCurve<Scalar> lower_bound_curve(const std::vector<Scalar>& delta_v, Scalar step, Scalar hbar) {
  if (!(step > 0)) throw std::invalid_argument("sample step must be positive");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
  BoundCurve<Scalar> out;
  out.phi.reserve(delta_v.size());
  Scalar phi = 0;
  for (std::size_t k = 0; k < delta_v.size(); ++k) {
    if (delta_v[k] < 0 || !std::isfinite(delta_v[k]))
      throw std::invalid_argument("energy spread samples must be finite and non-negative");
    if (k > 0) phi += Scalar(0.5) * (delta_v[k - 1] + delta_v[k]) * step / hbar;
    out.phi.push_back(phi);
  }
  const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  for (Scalar value : out.phi) {
    if (value >= half_pi) break;
    const Scalar c = std::cos(value);
    out.bound.push_back(c * c);
  }
  return out;
}

/// pi hbar / (2 mean_delta_v)
template <typename Scalar>
Scalar decoherence_bound(Scalar mean_delta_v, Scalar hbar) {
  if (!(mean_delta_v > 0)) throw std::invalid_argument("mean energy spread must be positive");
  return std::numbers::pi_v<Scalar> * hbar / (2 * mean_delta_v);
}

template <typename Scalar>
struct FringeScales {
  Scalar delta_x = 0;
  Scalar delta_p = 0;
  Scalar sub_planck_action = 0;
};

template <typename Scalar>
FringeScales<Scalar> fringe_scales(const Moments<Scalar>& m, Scalar hbar) {
  if (!(m.spread_x > 0) || !(m.spread_p > 0))
    throw std::invalid_argument("fringe scales need positive spreads");
  return {hbar / m.spread_p, hbar / m.spread_x, hbar * hbar / (m.spread_x * m.spread_p)};
}

namespace detail {

template <typename Scalar>
void check_confined(const Wavefunction<Scalar>& psi, Scalar time, Scalar& worst) {
  const Scalar ratio = boundary_density_ratio(psi);
  worst = std::max(worst, ratio);
  if (ratio > Scalar(1e-10)) {
    std::ostringstream msg;
    msg << "state reached the grid boundary at t = " << time << " (edge/peak density " << ratio
        << "); enlarge the grid";
    throw NumericalError(msg.str());
  }
}

template <typename Scalar>
Scalar norm_drift(const Wavefunction<Scalar>& psi) {
  return std::abs(psi.norm_squared() - 1);
}

}  // namespace detail

/// Evolves the two branches H_plus and H_minus from the common state
/// psi_fork at absolute time fork_time and records the overlap diagnostics.
///
/// The energy spread of V = H_plus - H_minus is evaluated in both branch
/// states at every step and the smaller one is used, which gives the tighter
/// bound. phi is integrated at step resolution and then sampled.
template <typename Scalar>
OverlapSeries<Scalar> evolve_branches(const Wavefunction<Scalar>& psi_fork,
                                      const DrivenHamiltonian<Scalar>& h, Scalar fork_time,
                                      const EvolutionSchedule<Scalar>& schedule) {
  schedule.validate();
  h.validate();
  const Scalar hbar = psi_fork.grid().hbar;
  const long stride = schedule.steps_for(schedule.sample_every, "sample_every");
  const long max_steps = std::lround(std::floor(schedule.tau_max / schedule.dt + Scalar(1e-9)));
  const Scalar coupling = std::abs(2 * h.stiffness * h.fork_offset);
  const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;

  OverlapSeries<Scalar> series;
  series.fork_moments = moments(psi_fork);
  series.spread_x = series.fork_moments.spread_x;
  series.spread_p = series.fork_moments.spread_p;

  SplitOperator<Scalar> plus_prop(psi_fork.grid(), h.mass, schedule.dt);
  SplitOperator<Scalar> minus_prop(psi_fork.grid(), h.mass, schedule.dt);
  const auto h_plus = h.on_branch(Branch::plus);
  const auto h_minus = h.on_branch(Branch::minus);
  Wavefunction<Scalar> plus = psi_fork;
  Wavefunction<Scalar> minus = psi_fork;

  Scalar phi = 0;
  Scalar dv_prev = coupling * series.spread_x;
  auto record = [&](Scalar tau, Scalar dv) {
    const Scalar o = overlap(minus, plus);
    series.times.push_back(tau);
    series.overlap.push_back(o);
    series.delta_v.push_back(dv);
    series.phi.push_back(phi);
    if (phi < half_pi) {
      const Scalar c = std::cos(phi);
      series.bound.push_back(c * c);
    } else {
      series.bound_window_exceeded = true;
      series.bound.push_back(0);
    }
    series.max_norm_drift = std::max({series.max_norm_drift, detail::norm_drift(plus),
                                      detail::norm_drift(minus)});
    detail::check_confined(plus, fork_time + tau, series.max_boundary_ratio);
    detail::check_confined(minus, fork_time + tau, series.max_boundary_ratio);
    return o;
  };
  record(0, dv_prev);

  for (long k = 0; k < max_steps; ++k) {
    const Scalar t = fork_time + static_cast<Scalar>(k) * schedule.dt;
    plus_prop.step(plus, h_plus, t);
    minus_prop.step(minus, h_minus, t);
    const Scalar dv = coupling * std::min(position_spread(plus), position_spread(minus));
    phi += Scalar(0.5) * (dv_prev + dv) * schedule.dt / hbar;
    dv_prev = dv;
    if ((k + 1) % stride == 0) {
      const Scalar o = record(static_cast<Scalar>(k + 1) * schedule.dt, dv);
      if (o < schedule.stop_overlap) break;
    }
  }
  if (series.max_norm_drift > Scalar(1e-8)) {
    std::ostringstream msg;
    msg << "norm drifted by " << series.max_norm_drift << " during the branch evolution";
    throw NumericalError(msg.str());
  }
  return series;
}

/// Evolves psi0 under the base Hamiltonian for the preparation time, then
/// forks into the plus and minus branches. Absolute time is kept throughout,
/// so the drive phase continues across the fork.
template <typename Scalar>
OverlapSeries<Scalar> evolve_fork(const Wavefunction<Scalar>& psi0, const DrivenHamiltonian<Scalar>& h,
                                  const EvolutionSchedule<Scalar>& schedule) {
  schedule.validate();
  const long prep_steps = schedule.steps_for(schedule.preparation_time, "preparation time");
  SplitOperator<Scalar> prop(psi0.grid(), h.mass, schedule.dt);
  auto psi = psi0;
  prop.advance(psi, h.on_branch(Branch::base), Scalar(0), prep_steps);
  Scalar worst = 0;
  detail::check_confined(psi, schedule.preparation_time, worst);
  return evolve_branches(psi, h, static_cast<Scalar>(prep_steps) * schedule.dt, schedule);
}

}  // namespace chaosfork
