#include "chaosfork/classical.hpp"

#include "chaosfork/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace chaosfork {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

/// drive[i] = l sin(t0 + i step), i = 0..steps.
std::vector<double> drive_table(const Hamiltonian& h, double t0, long steps, double step) {
  std::vector<double> table(static_cast<std::size_t>(steps) + 1);
  for (long i = 0; i <= steps; ++i) table[i] = drive_phase(h, t0 + static_cast<double>(i) * step);
  return table;
}

inline double tabulated_force(const Hamiltonian& h, double x, double drive, double shift) {
  return -h.kappa * std::sin(x - drive) - h.stiffness * (x + shift);
}

PhaseSpacePoint leapfrog_tabulated(PhaseSpacePoint z, const Hamiltonian& h, const std::vector<double>& drive,
                                   double step) {
  const long steps = static_cast<long>(drive.size()) - 1;
  const double shift = h.shift();
  const double inv_mass = 1.0 / h.mass;
  double x = z.x;
  double p = z.p;
  double f = tabulated_force(h, x, drive[0], shift);
  for (long i = 0; i < steps; ++i) {
    p += 0.5 * step * f;
    x += step * p * inv_mass;
    f = tabulated_force(h, x, drive[i + 1], shift);
    p += 0.5 * step * f;
  }
  return {x, p};
}

long whole_steps(double duration, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  return std::lround(std::abs(duration) / dt);
}

void require_finite(PhaseSpacePoint z, const char* where) {
  if (!z.finite()) {
    std::ostringstream msg;
    msg << "trajectory diverged in " << where;
    throw NumericalError(msg.str());
  }
}

}  // namespace

bool PhaseSpacePoint::finite() const { return std::isfinite(x) && std::isfinite(p); }

InitialGaussianDensity InitialGaussianDensity::coherent(PhaseSpacePoint center, double sigma_x, double hbar) {
  return {center, sigma_x, hbar / (2 * sigma_x)};
}

double InitialGaussianDensity::operator()(PhaseSpacePoint z) const {
  const double u = (z.x - center.x) / sigma_x;
  const double v = (z.p - center.p) / sigma_p;
  return std::exp(-0.5 * (u * u + v * v)) / (two_pi * sigma_x * sigma_p);
}

void InitialGaussianDensity::validate() const {
  if (!(sigma_x > 0) || !(sigma_p > 0)) throw std::invalid_argument("density widths must be positive");
  if (!center.finite()) throw std::invalid_argument("density center must be finite");
}

PhaseBox PhaseBox::around(const InitialGaussianDensity& density, double sigmas) {
  return {density.center.x - sigmas * density.sigma_x, density.center.x + sigmas * density.sigma_x,
          density.center.p - sigmas * density.sigma_p, density.center.p + sigmas * density.sigma_p};
}

PhaseSpacePoint leapfrog(PhaseSpacePoint z, const Hamiltonian& h, double t0, long steps, double step) {
  const double inv_mass = 1.0 / h.mass;
  double x = z.x;
  double p = z.p;
  double f = force(h, x, t0);
  for (long i = 0; i < steps; ++i) {
    p += 0.5 * step * f;
    x += step * p * inv_mass;
    f = force(h, x, t0 + static_cast<double>(i + 1) * step);
    p += 0.5 * step * f;
  }
  return {x, p};
}

PhaseSpacePoint flow_map(PhaseSpacePoint z0, double t0, double t1, const Hamiltonian& h, double dt) {
  const long steps = whole_steps(t1 - t0, dt);
  if (steps == 0) return z0;
  const double step = (t1 - t0) / static_cast<double>(steps);
  const PhaseSpacePoint z = leapfrog(z0, h, t0, steps, step);
  require_finite(z, "flow_map");
  return z;
}

double energy(PhaseSpacePoint z, const Hamiltonian& h, double t) {
  return z.p * z.p / (2 * h.mass) + potential_value(h, z.x, t);
}

double density_at(PhaseSpacePoint z, double t, const Hamiltonian& h, const InitialGaussianDensity& initial,
                  double dt) {
  return initial(flow_map(z, t, 0.0, h, dt));
}

CharacteristicMaps driven_fork_maps(const Hamiltonian& h, double fork_time, double tau, double dt) {
  const Hamiltonian base = h.on_branch(Branch::base);
  const Hamiltonian plus = h.on_branch(Branch::plus);
  const Hamiltonian minus = h.on_branch(Branch::minus);
  const double end = fork_time + tau;
  CharacteristicMaps maps;
  maps.plus_to_initial = [=](PhaseSpacePoint z) {
    return flow_map(flow_map(z, end, fork_time, plus, dt), fork_time, 0.0, base, dt);
  };
  maps.minus_to_initial = [=](PhaseSpacePoint z) {
    return flow_map(flow_map(z, end, fork_time, minus, dt), fork_time, 0.0, base, dt);
  };
  maps.initial_to_plus = [=](PhaseSpacePoint z) {
    return flow_map(flow_map(z, 0.0, fork_time, base, dt), fork_time, end, plus, dt);
  };
  return maps;
}

CharacteristicMaps StretchDriftFlow::maps(double t) const {
  const double squeeze = std::exp(-lambda * t);
  const double stretch = std::exp(lambda * t);
  const PhaseSpacePoint c = center;
  const PhaseSpacePoint drift{velocity.x * t, velocity.p * t};
  CharacteristicMaps maps;
  maps.initial_to_plus = [=](PhaseSpacePoint z) {
    return PhaseSpacePoint{c.x + squeeze * (z.x - c.x), c.p + stretch * (z.p - c.p)};
  };
  maps.plus_to_initial = [=](PhaseSpacePoint z) {
    return PhaseSpacePoint{c.x + stretch * (z.x - c.x), c.p + squeeze * (z.p - c.p)};
  };
  maps.minus_to_initial = [=](PhaseSpacePoint z) {
    return PhaseSpacePoint{c.x + stretch * (z.x - drift.x - c.x), c.p + squeeze * (z.p - drift.p - c.p)};
  };
  return maps;
}

namespace {

struct CellGrid {
  PhaseBox box;
  int resolution;
  double dx() const { return box.width() / resolution; }
  double dp() const { return box.height() / resolution; }
  PhaseSpacePoint center(long index) const {
    const long i = index % resolution;
    const long j = index / resolution;
    return {box.x_min + (static_cast<double>(i) + 0.5) * dx(), box.p_min + (static_cast<double>(j) + 0.5) * dp()};
  }
};

void check_quadrature_args(const PhaseBox& box, int resolution, double hbar) {
  if (resolution < 2) throw std::invalid_argument("quadrature resolution must be at least 2");
  if (!(box.width() > 0) || !(box.height() > 0)) throw std::invalid_argument("quadrature box is empty");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
}

}  // namespace

OverlapQuadrature classical_overlap_on_box(const PhaseBox& box, int resolution, const CharacteristicMaps& maps,
                                           const InitialGaussianDensity& initial, double hbar, int workers) {
  check_quadrature_args(box, resolution, hbar);
  initial.validate();
  const CellGrid cells{box, resolution};
  const long count = static_cast<long>(resolution) * resolution;
  std::vector<double> plus(count), minus(count);
  parallel_for(count, workers, [&](long idx) {
    const PhaseSpacePoint z = cells.center(idx);
    plus[idx] = initial(maps.plus_to_initial(z));
    minus[idx] = initial(maps.minus_to_initial(z));
  });
  const double area = cells.dx() * cells.dp();
  OverlapQuadrature out;
  double product = 0;
  for (long idx = 0; idx < count; ++idx) {
    product += plus[idx] * minus[idx];
    out.mass_plus += plus[idx];
    out.mass_minus += minus[idx];
  }
  out.value = 2 * std::numbers::pi * hbar * product * area;
  out.mass_plus *= area;
  out.mass_minus *= area;
  const double lost = 1.0 - std::min(out.mass_plus, out.mass_minus);
  if (lost > 1e-6) {
    std::ostringstream msg;
    msg << "density support escapes the quadrature box (captured mass " << 1.0 - lost << ")";
    throw NumericalError(msg.str());
  }
  return out;
}

OverlapQuadrature classical_overlap_pullback(const PhaseBox& initial_box, int resolution,
                                             const CharacteristicMaps& maps,
                                             const InitialGaussianDensity& initial, double hbar, int workers) {
  check_quadrature_args(initial_box, resolution, hbar);
  initial.validate();
  const CellGrid cells{initial_box, resolution};
  const long count = static_cast<long>(resolution) * resolution;
  std::vector<double> weight(count), partner(count);
  parallel_for(count, workers, [&](long idx) {
    const PhaseSpacePoint z0 = cells.center(idx);
    weight[idx] = initial(z0);
    partner[idx] = initial(maps.minus_to_initial(maps.initial_to_plus(z0)));
  });
  const double area = cells.dx() * cells.dp();
  OverlapQuadrature out;
  double product = 0;
  for (long idx = 0; idx < count; ++idx) {
    product += weight[idx] * partner[idx];
    out.mass_plus += weight[idx];
    out.mass_minus += partner[idx];
  }
  out.value = 2 * std::numbers::pi * hbar * product * area;
  out.mass_plus *= area;
  out.mass_minus *= area;
  if (out.mass_plus < 1.0 - 1e-6) {
    std::ostringstream msg;
    msg << "initial density is not covered by the quadrature box (captured mass " << out.mass_plus << ")";
    throw NumericalError(msg.str());
  }
  return out;
}

ClassicalOverlap classical_overlap(const PhaseBox& initial_box, int resolution, const CharacteristicMaps& maps,
                                   const InitialGaussianDensity& initial, double hbar, int workers) {
  ClassicalOverlap out;
  out.value = classical_overlap_pullback(initial_box, resolution, maps, initial, hbar, workers).value;
  out.refined_value = classical_overlap_pullback(initial_box, 2 * resolution, maps, initial, hbar, workers).value;
  const double scale = std::max(std::abs(out.refined_value), 1e-300);
  out.converged = std::abs(out.value - out.refined_value) <= 0.01 * scale;
  return out;
}

double stretched_gaussian_overlap(const StretchedGaussianParams& params, double t) {
  const double gx = params.velocity.x * t * std::exp(params.lambda * t) / (2 * params.sigma);
  const double gp = params.velocity.p * t * std::exp(-params.lambda * t) / (2 * params.sigma);
  return std::exp(-gx * gx) * std::exp(-gp * gp);
}

// ---------------------------------------------------------------------------

ForkEchoTracker::ForkEchoTracker(const Hamiltonian& h, const InitialGaussianDensity& initial, double hbar,
                                 double dt, int resolution, double box_sigmas, int workers)
    : h_(h), initial_(initial), hbar_(hbar), dt_(dt), resolution_(resolution), workers_(workers) {
  h_.validate();
  initial_.validate();
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (resolution < 2) throw std::invalid_argument("quadrature resolution must be at least 2");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
  const CellGrid cells{PhaseBox::around(initial, box_sigmas), resolution};
  cell_area_ = cells.dx() * cells.dp();
  const long count = static_cast<long>(resolution) * resolution;
  const double cutoff2 = box_sigmas * box_sigmas;
  for (long idx = 0; idx < count; ++idx) {
    const PhaseSpacePoint z = cells.center(idx);
    const double u = (z.x - initial.center.x) / initial.sigma_x;
    const double v = (z.p - initial.center.p) / initial.sigma_p;
    // Nodes outside the inscribed ellipse carry less than exp(-box_sigmas^2/2) of the peak.
    if (u * u + v * v > cutoff2) continue;
    nodes_.push_back(z);
    weights_.push_back(initial(z));
  }
  at_fork_ = nodes_;
}

void ForkEchoTracker::set_fork_time(double fork_time) {
  const long target = std::lround(fork_time / dt_);
  if (std::abs(fork_time / dt_ - static_cast<double>(target)) > 1e-6)
    throw std::invalid_argument("fork time must be a whole number of time steps");
  if (target < fork_steps_) throw std::invalid_argument("fork time can only move forward");
  if (target == fork_steps_) return;
  const Hamiltonian base = h_.on_branch(Branch::base);
  const auto table = drive_table(base, static_cast<double>(fork_steps_) * dt_, target - fork_steps_, dt_);
  parallel_for(static_cast<long>(at_fork_.size()), workers_, [&](long i) {
    at_fork_[i] = leapfrog_tabulated(at_fork_[i], base, table, dt_);
  });
  for (const auto& z : at_fork_) require_finite(z, "fork preparation");
  fork_steps_ = target;
  fork_time_ = static_cast<double>(target) * dt_;
}

double ForkEchoTracker::overlap(double tau) const {
  const long tau_steps = std::lround(tau / dt_);
  if (tau < 0 || std::abs(tau / dt_ - static_cast<double>(tau_steps)) > 1e-6)
    throw std::invalid_argument("tau must be a non-negative whole number of time steps");
  const Hamiltonian base = h_.on_branch(Branch::base);
  const Hamiltonian plus = h_.on_branch(Branch::plus);
  const Hamiltonian minus = h_.on_branch(Branch::minus);
  const double t_fork = fork_time_;
  const double t_end = static_cast<double>(fork_steps_ + tau_steps) * dt_;
  const auto plus_table = drive_table(plus, t_fork, tau_steps, dt_);
  const auto minus_table = drive_table(minus, t_end, tau_steps, -dt_);
  const auto base_table = drive_table(base, t_fork, fork_steps_, -dt_);

  const long count = static_cast<long>(nodes_.size());
  std::vector<double> partner(count);
  parallel_for(count, workers_, [&](long i) {
    PhaseSpacePoint z = leapfrog_tabulated(at_fork_[i], plus, plus_table, dt_);
    z = leapfrog_tabulated(z, minus, minus_table, -dt_);
    z = leapfrog_tabulated(z, base, base_table, -dt_);
    partner[i] = z.finite() ? initial_(z) : std::numeric_limits<double>::quiet_NaN();
  });
  double sum = 0;
  for (long i = 0; i < count; ++i) sum += weights_[i] * partner[i];
  if (!std::isfinite(sum)) throw NumericalError("trajectory diverged while evaluating the classical overlap");
  return 2 * std::numbers::pi * hbar_ * sum * cell_area_;
}

// ---------------------------------------------------------------------------

PoincareCloud poincare_section(const std::vector<PhaseSpacePoint>& seeds, long n_periods, const Hamiltonian& h,
                               double dt, int workers) {
  if (n_periods < 0) throw std::invalid_argument("number of periods must be non-negative");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const long per_period = std::max(1L, std::lround(two_pi / dt));
  const double step = two_pi / static_cast<double>(per_period);
  const long per_seed = n_periods + 1;
  PoincareCloud cloud;
  cloud.samples.resize(seeds.size() * static_cast<std::size_t>(per_seed));
  parallel_for(static_cast<long>(seeds.size()), workers, [&](long s) {
    PhaseSpacePoint z = seeds[s];
    for (long n = 0; n <= n_periods; ++n) {
      if (n > 0) z = leapfrog(z, h, two_pi * static_cast<double>(n - 1), per_period, step);
      cloud.samples[s * per_seed + n] = {static_cast<int>(s), n, z};
    }
  });
  for (const auto& sample : cloud.samples) require_finite(sample.z, "poincare_section");
  return cloud;
}

double lyapunov_estimate(PhaseSpacePoint z0, double t_max, const Hamiltonian& h, double dt) {
  if (!(t_max > 0)) throw std::invalid_argument("t_max must be positive");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const long steps = std::lround(t_max / dt);
  const long renorm_every = std::max(1L, std::lround(1.0 / dt));
  const double inv_mass = 1.0 / h.mass;
  double x = z0.x, p = z0.p;
  double dx = 1.0, dp = 0.0;
  double log_growth = 0.0;
  double f = force(h, x, 0.0);
  double g = force_gradient(h, x, 0.0);
  for (long i = 0; i < steps; ++i) {
    p += 0.5 * dt * f;
    dp += 0.5 * dt * g * dx;
    x += dt * p * inv_mass;
    dx += dt * dp * inv_mass;
    const double t = static_cast<double>(i + 1) * dt;
    f = force(h, x, t);
    g = force_gradient(h, x, t);
    p += 0.5 * dt * f;
    dp += 0.5 * dt * g * dx;
    if ((i + 1) % renorm_every == 0 || i + 1 == steps) {
      const double norm = std::hypot(dx, dp);
      if (!std::isfinite(norm) || !std::isfinite(x) || !std::isfinite(p))
        throw NumericalError("trajectory diverged in lyapunov_estimate");
      log_growth += std::log(norm);
      dx /= norm;
      dp /= norm;
    }
  }
  return log_growth / (static_cast<double>(steps) * dt);
}

PhaseBox pilot_box(const InitialGaussianDensity& initial, const Hamiltonian& h, double t, double dt,
                   int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("pilot cloud needs at least one sample");
  initial.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PhaseSpacePoint> cloud(n_samples);
  for (auto& z : cloud) {
    const double u = normal(rng);
    const double v = normal(rng);
    z = {initial.center.x + initial.sigma_x * u, initial.center.p + initial.sigma_p * v};
  }
  for (auto& z : cloud) z = flow_map(z, 0.0, t, h, dt);
  PhaseBox box{cloud[0].x, cloud[0].x, cloud[0].p, cloud[0].p};
  for (const auto& z : cloud) {
    box.x_min = std::min(box.x_min, z.x);
    box.x_max = std::max(box.x_max, z.x);
    box.p_min = std::min(box.p_min, z.p);
    box.p_max = std::max(box.p_max, z.p);
  }
  const double mx = 0.1 * std::max(box.width(), 1e-12);
  const double mp = 0.1 * std::max(box.height(), 1e-12);
  return {box.x_min - mx, box.x_max + mx, box.p_min - mp, box.p_max + mp};
}

void parallel_for(long count, int workers, const std::function<void(long)>& body) {
  if (count <= 0) return;
  const long threads = std::clamp<long>(workers, 1, count);
  if (threads == 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const long block = (count + threads - 1) / threads;
  for (long w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        const long begin = w * block;
        const long end = std::min(count, begin + block);
        for (long i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace chaosfork
