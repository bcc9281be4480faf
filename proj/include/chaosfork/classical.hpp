#pragma once

#include "chaosfork/hamiltonian.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace chaosfork {

struct PhaseSpacePoint {
  double x = 0;
  double p = 0;

  bool finite() const;
  bool operator==(const PhaseSpacePoint&) const = default;
};

/// Normalized Gaussian density exp(-dx^2/2sx^2 - dp^2/2sp^2) / (2 pi sx sp).
struct InitialGaussianDensity {
  PhaseSpacePoint center;
  double sigma_x = 1;
  double sigma_p = 1;

  /// The density matching a minimum-uncertainty wavepacket of width sigma_x.
  static InitialGaussianDensity coherent(PhaseSpacePoint center, double sigma_x, double hbar);

  double operator()(PhaseSpacePoint z) const;
  void validate() const;
};

struct PhaseBox {
  double x_min = 0;
  double x_max = 0;
  double p_min = 0;
  double p_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return p_max - p_min; }
  bool contains(PhaseSpacePoint z) const {
    return z.x >= x_min && z.x <= x_max && z.p >= p_min && z.p <= p_max;
  }
  /// Box of +-half_widths * sigma around the density center.
  static PhaseBox around(const InitialGaussianDensity& density, double sigmas);
};

// ---------------------------------------------------------------------------
// Trajectories

/// Leapfrog (kick-drift-kick) over a whole number of steps of signed length
/// `step`, starting at absolute time t0. Negative steps integrate backwards
/// and retrace a forward run exactly up to rounding.
PhaseSpacePoint leapfrog(PhaseSpacePoint z, const Hamiltonian& h, double t0, long steps, double step);

/// Maps z from time t0 to t1 using the whole number of steps nearest to
/// |t1 - t0| / dt. Throws NumericalError if the state stops being finite.
PhaseSpacePoint flow_map(PhaseSpacePoint z0, double t0, double t1, const Hamiltonian& h, double dt);

double energy(PhaseSpacePoint z, const Hamiltonian& h, double t);

/// Liouville density at (z, t): the initial density read at the foot of the
/// backward characteristic through z.
double density_at(PhaseSpacePoint z, double t, const Hamiltonian& h, const InitialGaussianDensity& initial,
                  double dt);

// ---------------------------------------------------------------------------
// Classical overlap

/// Characteristic maps of a forked classical evolution observed at one time.
struct CharacteristicMaps {
  std::function<PhaseSpacePoint(PhaseSpacePoint)> plus_to_initial;
  std::function<PhaseSpacePoint(PhaseSpacePoint)> minus_to_initial;
  std::function<PhaseSpacePoint(PhaseSpacePoint)> initial_to_plus;
};

/// Maps for the driven system: base Hamiltonian on [0, fork_time], then the
/// plus/minus branches on [fork_time, fork_time + tau].
CharacteristicMaps driven_fork_maps(const Hamiltonian& h, double fork_time, double tau, double dt);

/// Synthetic area-preserving flow: both densities are squeezed in x and
/// stretched in p at rate lambda about `center`; the minus density also
/// drifts with constant velocity v.
struct StretchDriftFlow {
  double lambda = 0;
  PhaseSpacePoint velocity;
  PhaseSpacePoint center;

  CharacteristicMaps maps(double t) const;
};

struct OverlapQuadrature {
  double value = 0;
  /// Quadrature of each density alone over the same cells.
  double mass_plus = 0;
  double mass_minus = 0;
};

/// 2 pi hbar sum L_plus(z) L_minus(z) dx dp over cell centers z of `box` at
/// the observation time, each density obtained by backward characteristics.
/// Throws NumericalError when either density loses more than 1e-6 of its
/// mass outside the box.
OverlapQuadrature classical_overlap_on_box(const PhaseBox& box, int resolution, const CharacteristicMaps& maps,
                                           const InitialGaussianDensity& initial, double hbar, int workers = 1);

/// The same integral after the area-preserving change of variables
/// z = Phi_plus(z0): 2 pi hbar sum L0(z0) L0(Phi_minus^-1 Phi_plus z0) over
/// cells of `box` in initial coordinates. The integrand stays smooth on the
/// scale of the initial density until the overlap is already small, so far
/// fewer cells are needed than on the observation-time box.
OverlapQuadrature classical_overlap_pullback(const PhaseBox& initial_box, int resolution,
                                             const CharacteristicMaps& maps,
                                             const InitialGaussianDensity& initial, double hbar,
                                             int workers = 1);

struct ClassicalOverlap {
  double value = 0;
  double refined_value = 0;
  bool converged = false;
};

/// Pullback overlap at `resolution` and 2x `resolution`; converged when the
/// two differ by at most 1% (relative).
ClassicalOverlap classical_overlap(const PhaseBox& initial_box, int resolution, const CharacteristicMaps& maps,
                                   const InitialGaussianDensity& initial, double hbar, int workers = 1);

/// Closed-form overlap of two stretched Gaussians whose centroids separate
/// at constant velocity.
struct StretchedGaussianParams {
  double lambda = 0;
  double sigma = 1;
  PhaseSpacePoint velocity;
};

double stretched_gaussian_overlap(const StretchedGaussianParams& params, double t);

/// Incremental pullback overlap for one driven fork at a sequence of
/// increasing fork times. The base flow of every quadrature node is cached at
/// the current fork time and advanced in place, so a sweep over sorted fork
/// times pays for each preparation interval only once.
class ForkEchoTracker {
 public:
  ForkEchoTracker(const Hamiltonian& h, const InitialGaussianDensity& initial, double hbar, double dt,
                  int resolution, double box_sigmas = 6.0, int workers = 1);

  /// Moves the fork to a later time (or keeps it).
  void set_fork_time(double fork_time);
  double fork_time() const { return fork_time_; }

  /// O_c at tau after the fork.
  double overlap(double tau) const;

  int resolution() const { return resolution_; }

 private:
  Hamiltonian h_;
  InitialGaussianDensity initial_;
  double hbar_;
  double dt_;
  int resolution_;
  int workers_;
  long fork_steps_ = 0;
  double fork_time_ = 0;
  double cell_area_ = 0;
  std::vector<PhaseSpacePoint> nodes_;
  std::vector<double> weights_;
  std::vector<PhaseSpacePoint> at_fork_;
};

// ---------------------------------------------------------------------------
// Section and Lyapunov exponent

struct PoincareSample {
  int seed_id = 0;
  long period = 0;
  PhaseSpacePoint z;
};

struct PoincareCloud {
  std::vector<PoincareSample> samples;
};

/// Stroboscopic samples at t = 2 pi n, n = 0..n_periods, for each seed.
PoincareCloud poincare_section(const std::vector<PhaseSpacePoint>& seeds, long n_periods, const Hamiltonian& h,
                               double dt, int workers = 1);

/// Largest Lyapunov exponent from a tangent vector carried along with the
/// trajectory by the linearized leapfrog, renormalized every time unit.
double lyapunov_estimate(PhaseSpacePoint z0, double t_max, const Hamiltonian& h, double dt);

/// Bounding box (plus 10% margin) of n_samples trajectories drawn from the
/// initial density and carried forward to time t.
PhaseBox pilot_box(const InitialGaussianDensity& initial, const Hamiltonian& h, double t, double dt,
                   int n_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, count) on up to `workers` threads, in contiguous
/// blocks. Callers write results to per-index slots, which keeps the outcome
/// independent of the worker count.
void parallel_for(long count, int workers, const std::function<void(long)>& body);

}  // namespace chaosfork
