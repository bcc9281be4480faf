#include "chaosfork/classical.hpp"
#include "chaosfork/errors.hpp"
#include "chaosfork/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

using namespace chaosfork;

namespace {

constexpr double dt = 0.005;

Hamiltonian harmonic() {
  Hamiltonian h;
  h.kappa = 0;
  h.drive_amplitude = 0;
  return h;
}

// Fixed point of the stroboscopic map inside the largest island.
constexpr PhaseSpacePoint island_center{2.9628049, 0.12545219};

}  // namespace

TEST_CASE("leapfrog retraces itself") {
  const Hamiltonian h;
  for (const PhaseSpacePoint z : {PhaseSpacePoint{7, 0}, PhaseSpacePoint{-2, 0.4}, island_center}) {
    const auto there = flow_map(z, 0, 10, h, dt);
    const auto back = flow_map(there, 10, 0, h, dt);
    CHECK(std::abs(back.x - z.x) < 1e-10);
    CHECK(std::abs(back.p - z.p) < 1e-10);
  }
  CHECK(flow_map({1, 2}, 3, 3, h, dt) == PhaseSpacePoint{1, 2});
}

TEST_CASE("harmonic orbit closes after one period") {
  const auto h = harmonic();
  const double period = 2 * std::numbers::pi / std::sqrt(h.stiffness / h.mass);
  CHECK(period == doctest::Approx(62.83).epsilon(1e-4));
  const PhaseSpacePoint z{3, -0.1};
  const auto end = flow_map(z, 0, period, h, dt);
  CHECK(std::abs(end.x - z.x) < 1e-6);
  CHECK(std::abs(end.p - z.p) < 1e-6);
  const auto half = flow_map(z, 0, period / 2, h, dt);
  CHECK(std::abs(half.x + z.x) < 1e-6);
}

TEST_CASE("energy does not drift without the drive") {
  Hamiltonian h;
  h.drive_amplitude = 0;
  // Compare the midpoint of the bounded energy oscillation in the first and last 20 time units.
  for (const PhaseSpacePoint z0 : {PhaseSpacePoint{1.0, 0.3}, PhaseSpacePoint{0.5, 0}, PhaseSpacePoint{7, 0}}) {
    PhaseSpacePoint z = z0;
    const long n = std::lround(100 / dt);
    const long window = std::lround(20 / dt);
    double lo_first = std::numeric_limits<double>::max(), hi_first = -lo_first;
    double lo_last = lo_first, hi_last = hi_first;
    for (long i = 0; i < n; ++i) {
      z = leapfrog(z, h, i * dt, 1, dt);
      const double e = energy(z, h, 0);
      if (i < window) {
        lo_first = std::min(lo_first, e);
        hi_first = std::max(hi_first, e);
      }
      if (i >= n - window) {
        lo_last = std::min(lo_last, e);
        hi_last = std::max(hi_last, e);
      }
    }
    CHECK(std::abs((lo_last + hi_last) - (lo_first + hi_first)) / 2 < 1e-8);
    CHECK(hi_first - lo_first < 1e-5);
  }
}

TEST_CASE("divergent trajectories are reported") {
  Hamiltonian h;
  h.stiffness = -1;
  h.kappa = 0;
  CHECK_THROWS_AS(flow_map({1e308, 1e308}, 0, 1, h, dt), NumericalError);
  CHECK_THROWS_AS(flow_map({0, 0}, 0, 1, Hamiltonian{}, 0), std::invalid_argument);
}

TEST_CASE("liouville density follows the characteristics") {
  const auto initial = InitialGaussianDensity::coherent({2, 0.3}, 0.4, 0.1);
  const Hamiltonian h;
  for (const PhaseSpacePoint z : {PhaseSpacePoint{2, 0.3}, PhaseSpacePoint{1.8, 0.2}})
    CHECK(density_at(z, 0, h, initial, dt) == initial(z));

  const auto osc = harmonic();
  // sigma_p = omega sigma_x makes the gaussian a fixed point of the harmonic rotation.
  const InitialGaussianDensity round{{0, 0}, 1.0, 0.1};
  for (double t : {5.0, 17.0, 40.0}) {
    CHECK(density_at({0, 0}, t, osc, round, dt) == doctest::Approx(round({0, 0})).epsilon(1e-12));
    CHECK(density_at({0.5, 0.05}, t, osc, round, dt) == doctest::Approx(round({0.5, 0.05})).epsilon(1e-5));
  }

  const double omega = 0.1;
  for (double t : {3.0, 10.0, 31.0}) {
    for (const PhaseSpacePoint z : {PhaseSpacePoint{2.1, 0.25}, PhaseSpacePoint{1.0, 0.0}, PhaseSpacePoint{-0.5, 0.2}}) {
      const double c = std::cos(omega * t), s = std::sin(omega * t);
      const PhaseSpacePoint foot{z.x * c - z.p / omega * s, z.x * omega * s + z.p * c};
      CHECK(density_at(z, t, osc, initial, dt) == doctest::Approx(initial(foot)).epsilon(1e-5));
    }
  }
}

TEST_CASE("stretched gaussian closed form") {
  CHECK(stretched_gaussian_overlap({1, 1, {0.01, 0}}, 0) == 1.0);
  CHECK(stretched_gaussian_overlap({1, 1, {0, 0}}, 7) == 1.0);
  CHECK(stretched_gaussian_overlap({1, 1, {0.01, 0}}, 5) == doctest::Approx(1.050188e-6).epsilon(1e-5));
}

TEST_CASE("pullback quadrature reproduces the stretch and drift flow") {
  for (const auto& c : stretch_drift_checks(96)) {
    INFO(c.name);
    CHECK(c.pass());
  }

  // Without stretching the two gaussians simply separate.
  const StretchedGaussianParams params{0.0, 1.0, {0.3, -0.2}};
  const StretchDriftFlow flow{0.0, params.velocity, {0.5, 0.5}};
  const auto density = InitialGaussianDensity::coherent({0.5, 0.5}, 1.0, 2.0);
  const PhaseBox box = PhaseBox::around(density, 10);
  for (double t : {0.0, 1.0, 3.0, 6.0}) {
    const double expected = std::exp(-std::pow(0.3 * t / 2, 2) - std::pow(0.2 * t / 2, 2));
    CHECK(classical_overlap_pullback(box, 64, flow.maps(t), density, 2.0).value ==
          doctest::Approx(expected).epsilon(1e-8));
    CHECK(classical_overlap_on_box(PhaseBox::around(density, 12), 128, flow.maps(t), density, 2.0).value ==
          doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("classical overlap of the driven fork") {
  const Hamiltonian h;
  const double hbar = 0.1;
  const auto initial = InitialGaussianDensity::coherent({7, 0}, std::sqrt(hbar / 2), hbar);

  ForkEchoTracker tracker(h, initial, hbar, dt, 48);
  tracker.set_fork_time(4);
  const double start = tracker.overlap(0);
  CHECK(start == doctest::Approx(1.0).epsilon(1e-6));
  double previous = start;
  for (double tau = 0.5; tau <= 4; tau += 0.5) {
    const double o = tracker.overlap(tau);
    CHECK(o <= start + 1e-6);
    CHECK(o >= 0);
    previous = o;
  }
  CHECK(previous < 0.9);
  CHECK_THROWS_AS(tracker.set_fork_time(2), std::invalid_argument);

  Hamiltonian same = h;
  same.fork_offset = 0;
  ForkEchoTracker flat(same, initial, hbar, dt, 48);
  flat.set_fork_time(4);
  for (double tau : {0.0, 1.0, 3.0}) CHECK(std::abs(flat.overlap(tau) - flat.overlap(0)) < 1e-12);

  // Exchanging the branches leaves the observation-time quadrature unchanged.
  Hamiltonian swapped = h;
  swapped.fork_offset = -h.fork_offset;
  const double fork = 2, tau = 1;
  PhaseBox box = pilot_box(initial, h, fork + tau, dt, 2000, 3);
  box = {box.x_min - box.width(), box.x_max + box.width(), box.p_min - box.height(), box.p_max + box.height()};
  const auto a = classical_overlap_on_box(box, 160, driven_fork_maps(h, fork, tau, dt), initial, hbar);
  const auto b = classical_overlap_on_box(box, 160, driven_fork_maps(swapped, fork, tau, dt), initial, hbar);
  CHECK(std::abs(a.value - b.value) < 1e-12);
  CHECK(a.value <= 1 + 1e-4);
  CHECK(a.mass_plus == doctest::Approx(1.0).epsilon(1e-4));

  const auto pulled = classical_overlap_pullback(PhaseBox::around(initial, 6), 96,
                                                 driven_fork_maps(h, fork, tau, dt), initial, hbar);
  CHECK(pulled.value == doctest::Approx(a.value).epsilon(1e-2));

  CHECK_THROWS_AS(classical_overlap_on_box(PhaseBox::around(initial, 1), 64, driven_fork_maps(h, fork, tau, dt),
                                           initial, hbar),
                  NumericalError);
}

TEST_CASE("liouville evolution conserves mass") {
  const Hamiltonian h;
  const double hbar = 0.1;
  const auto initial = InitialGaussianDensity::coherent({7, 0}, std::sqrt(hbar / 2), hbar);
  const int resolution = 512;
  for (double t : {0.0, 5.0}) {
    const PhaseBox box = pilot_box(initial, h, t, dt, 10000, 1);
    const double cx = box.width() / resolution, cp = box.height() / resolution;
    std::vector<double> rows(resolution);
    parallel_for(resolution, 2, [&](long i) {
      double sum = 0;
      for (int j = 0; j < resolution; ++j)
        sum += density_at({box.x_min + (i + 0.5) * cx, box.p_min + (j + 0.5) * cp}, t, h, initial, dt);
      rows[i] = sum;
    });
    double mass = 0;
    for (double r : rows) mass += r;
    CHECK(mass * cx * cp == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("section of the driven pendulum") {
  const Hamiltonian h;
  const auto cloud = poincare_section({{1, 2}, {3, 4}}, 0, h, dt);
  REQUIRE(cloud.samples.size() == 2);
  CHECK(cloud.samples[0].z == PhaseSpacePoint{1, 2});
  CHECK(cloud.samples[1].z == PhaseSpacePoint{3, 4});
  CHECK(cloud.samples[1].seed_id == 1);

  const std::vector<PhaseSpacePoint> seeds{island_center, {island_center.x + 0.5, island_center.p}, {7, 0}};
  const auto section = poincare_section(seeds, 1000, h, dt, 2);
  CHECK(section.samples.size() == 3 * 1001);
  double center_wander = 0, ring_wander = 0, sea_energy = 0, sea_left = 0, sea_right = 0;
  for (const auto& s : section.samples) {
    const double r = std::hypot(s.z.x - island_center.x, s.z.p - island_center.p);
    if (s.seed_id == 0) center_wander = std::max(center_wander, r);
    if (s.seed_id == 1) ring_wander = std::max(ring_wander, r);
    if (s.seed_id == 2) {
      sea_energy = std::max(sea_energy, s.z.p * s.z.p / 2 + h.stiffness * s.z.x * s.z.x / 2);
      sea_left = std::min(sea_left, s.z.x);
      sea_right = std::max(sea_right, s.z.x);
    }
  }
  CHECK(center_wander < 1e-6);
  CHECK(ring_wander < 1.6);
  // The sea cloud spreads across both wells of the trap but stays inside |x| < 80.
  CHECK(sea_energy < h.stiffness * 80 * 80 / 2);
  CHECK(sea_left < -20);
  CHECK(sea_right > 20);
}

TEST_CASE("lyapunov exponents") {
  const Hamiltonian h;
  CHECK(std::abs(lyapunov_estimate({3, 0}, 1000, harmonic(), dt)) < 0.01);
  CHECK(std::abs(lyapunov_estimate(island_center, 1000, h, dt)) < 0.02);
  const double short_run = lyapunov_estimate({7, 0}, 1000, h, dt);
  const double long_run = lyapunov_estimate({7, 0}, 2000, h, dt);
  CHECK(short_run > 0.03);
  CHECK(long_run == doctest::Approx(short_run).epsilon(0.2));
  CHECK_THROWS_AS(lyapunov_estimate({0, 0}, 0, h, dt), std::invalid_argument);
}

TEST_CASE("pilot box encloses the forward cloud") {
  const Hamiltonian h;
  const auto initial = InitialGaussianDensity::coherent({7, 0}, 0.3, 0.1);
  const auto a = pilot_box(initial, h, 6, dt, 500, 9);
  const auto b = pilot_box(initial, h, 6, dt, 500, 9);
  CHECK(a.x_min == b.x_min);
  CHECK(a.p_max == b.p_max);
  CHECK(a.contains(flow_map(initial.center, 0, 6, h, dt)));
  CHECK_THROWS_AS(pilot_box(initial, h, 6, dt, 0, 9), std::invalid_argument);
}
