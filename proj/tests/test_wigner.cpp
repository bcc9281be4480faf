#include "chaosfork/propagator.hpp"
#include "chaosfork/sparse_cat.hpp"
#include "chaosfork/wigner.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace chaosfork;

namespace {

Grid small_grid() { return build_grid(512, -12.0, 12.0, 0.1); }

State cat_of(const Grid& grid, std::initializer_list<PhaseSpacePoint> centers) {
  return sparse_cat_state({centers, grid.hbar}, grid);
}

}  // namespace

TEST_CASE("coherent state wigner function is the phase-space gaussian") {
  const auto grid = small_grid();
  const double sx = std::sqrt(grid.hbar / 2);
  const double sp = grid.hbar / (2 * sx);
  const auto psi = gaussian_wavepacket(grid, 1.0, 0.4, sx);
  const auto w = wigner_transform(psi);
  CHECK(w.max_imaginary_residue < 1e-10);
  CHECK(w.values.minCoeff() > -1e-12);
  double worst = 0;
  for (Eigen::Index k = 0; k < w.n_x(); k += 3)
    for (Eigen::Index m = 0; m < w.n_p(); m += 3) {
      const double u = (w.x(k) - 1.0) / sx;
      const double v = (w.p(m) - 0.4) / sp;
      const double expected = std::exp(-(u * u + v * v) / 2) / (std::numbers::pi * grid.hbar);
      worst = std::max(worst, std::abs(w.values(k, m) - expected));
    }
  CHECK(worst < 1e-8);
  CHECK(w.integral() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("marginals reproduce the position and momentum densities") {
  const auto grid = small_grid();
  const auto psi = cat_of(grid, {{-3.0, 0.5}, {2.0, -0.8}, {4.0, 1.5}});
  const auto w = wigner_transform(psi);
  const auto err = marginal_errors(w, psi);
  CHECK(err.position_l1 < 1e-8);
  CHECK(err.momentum_l1 < 1e-8);
  CHECK(w.integral() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w.max_imaginary_residue < 1e-10);
}

TEST_CASE("aliased states are refused") {
  const auto grid = build_grid(128, -6.0, 6.0, 0.1);
  // p_max / 2 = 1.67; a packet at p = 2.2 fits the grid but not the wigner momentum range.
  const auto psi = gaussian_wavepacket(grid, 0.0, 2.2, 0.3);
  CHECK_THROWS_AS(wigner_transform(psi), NumericalError);
}

TEST_CASE("overlap of wigner functions equals the squared inner product") {
  const auto grid = small_grid();
  const auto a = gaussian_wavepacket(grid, 0.0, 0.0, 0.3);
  const auto b = gaussian_wavepacket(grid, 0.4, 0.1, 0.25);
  const auto wa = wigner_transform(a);
  const auto wb = wigner_transform(b);
  CHECK(wigner_overlap(wa, wa) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(wigner_overlap(wa, wb) - overlap(a, b)) < 1e-6);

  // Even and odd states are orthogonal.
  State odd = a;
  for (Eigen::Index k = 0; k < grid.n_points; ++k) odd.amplitudes()[k] *= grid.x(k);
  odd.normalize();
  CHECK(std::abs(wigner_overlap(wa, wigner_transform(odd))) < 1e-6);

  CHECK_THROWS_AS(wigner_overlap(wa, wigner_transform(gaussian_wavepacket(build_grid(256, -12.0, 12.0, 0.1), 0.0, 0.0, 0.3))),
                  std::invalid_argument);
}

TEST_CASE("overlap identity holds for propagated pairs") {
  const auto grid = build_grid(1024, -25.0, 25.0, 0.1);
  const Hamiltonian h;
  auto plus = gaussian_wavepacket(grid, 4.5, 0.0, std::sqrt(grid.hbar / 2));
  auto minus = plus;
  SplitOperator<double> prop(grid, h.mass, 0.005);
  for (int i = 0; i < 5; ++i) {
    prop.advance(plus, h.on_branch(Branch::plus), i * 1.0, 200);
    prop.advance(minus, h.on_branch(Branch::minus), i * 1.0, 200);
    const double direct = overlap(minus, plus);
    const double moyal = wigner_overlap(wigner_transform(minus), wigner_transform(plus));
    CHECK(std::abs(moyal - direct) < 1e-6);
  }
}

TEST_CASE("displacing the state displaces its wigner function") {
  const auto grid = small_grid();
  const auto psi = cat_of(grid, {{-2.0, 0.3}, {2.5, -0.5}});
  const auto w = wigner_transform(psi);
  const Eigen::Index cells = 7;
  const auto kicked = wigner_transform(momentum_kick(psi, cells * w.dp()));
  double worst = 0;
  for (Eigen::Index m = cells; m < w.n_p(); ++m)
    worst = std::max(worst, (kicked.values.col(m) - w.values.col(m - cells)).abs().maxCoeff());
  CHECK(worst < 1e-6);
  CHECK(std::abs(wigner_overlap_shifted(w, w, cells) - overlap(psi, momentum_kick(psi, cells * w.dp()))) < 1e-6);

  const Eigen::Index shift = 40;
  const auto moved = wigner_transform(position_shift(psi, shift));
  worst = 0;
  for (Eigen::Index k = shift; k < w.n_x(); ++k)
    worst = std::max(worst, (moved.values.row(k) - w.values.row(k - shift)).abs().maxCoeff());
  CHECK(worst < 1e-6);
}

TEST_CASE("sparse cat construction") {
  const auto grid = small_grid();
  const auto one = cat_of(grid, {{1.0, 0.5}});
  CHECK(one.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(overlap(one, gaussian_wavepacket(grid, 1.0, 0.5, std::sqrt(grid.hbar / 2))) ==
        doctest::Approx(1.0).epsilon(1e-10));

  // Unnormalized sum of two far-apart gaussians has sqrt(2) times the single norm.
  const auto left = cat_of(grid, {{-3.0, 0.0}});
  const auto right = cat_of(grid, {{3.0, 0.0}});
  const State sum(grid, left.amplitudes() + right.amplitudes());
  CHECK(std::sqrt(sum.norm_squared()) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));

  CHECK_THROWS_AS(cat_of(grid, {{0.0, 0.0}, {1.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(cat_of(grid, {{11.5, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(cat_of(grid, {}), std::invalid_argument);
}

TEST_CASE("four-gaussian cat keeps three quarters of its overlap in interference") {
  const auto grid = build_grid(2048, -40.0, 40.0, 0.1);
  const PhaseBox region{-30, 30, -2.5, 2.5};
  const auto spec = sparse_cat_layout(4, grid.hbar, 10, region, 11);
  CHECK(spec.min_separation() >= 10 * std::sqrt(grid.hbar) - 1e-12);
  const auto report = cat_overlap_experiment(spec, grid, 0.0, 32);
  CHECK(report.self_overlap == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(report.displaced_overlap == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(report.interference_share == doctest::Approx(0.75).epsilon(0.1));
  CHECK(report.g_mean == doctest::Approx(1.0 / 16).epsilon(0.05));
  CHECK(report.band_overlap <= 2.0 / 4);
  CHECK(std::abs(report.band_overlap - report.band_overlap_direct) < 1e-6);

  const double fringe = grid.hbar / spec.max_separation();
  const auto displaced = cat_overlap_experiment(spec, grid, 2 * fringe);
  CHECK(std::abs(displaced.displaced_overlap - displaced.displaced_overlap_direct) < 1e-6);
  CHECK_THROWS_AS(cat_overlap_experiment(spec, grid, std::sqrt(grid.hbar)), std::invalid_argument);
  CHECK_THROWS_AS(cat_overlap_experiment(spec, grid, fringe / 10), std::invalid_argument);
}

TEST_CASE("layouts are reproducible from the seed") {
  const PhaseBox region{-30, 30, -2.5, 2.5};
  const auto a = sparse_cat_layout(6, 0.1, 10, region, 5);
  const auto b = sparse_cat_layout(6, 0.1, 10, region, 5);
  CHECK(a.centers == b.centers);
  CHECK_THROWS_AS(sparse_cat_layout(50, 0.1, 10, {-1, 1, -1, 1}, 5), std::invalid_argument);
}
