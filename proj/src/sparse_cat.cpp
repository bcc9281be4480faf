#include "chaosfork/sparse_cat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace chaosfork {

namespace {

double distance(PhaseSpacePoint a, PhaseSpacePoint b) { return std::hypot(a.x - b.x, a.p - b.p); }

PhaseSpacePoint midpoint(PhaseSpacePoint a, PhaseSpacePoint b) { return {(a.x + b.x) / 2, (a.p + b.p) / 2}; }

constexpr double mask_radius_factor = 3.0;
constexpr double sparseness_factor = 5.0;

std::vector<PhaseSpacePoint> midpoints(const std::vector<PhaseSpacePoint>& centers) {
  std::vector<PhaseSpacePoint> out;
  for (std::size_t j = 0; j < centers.size(); ++j)
    for (std::size_t k = j + 1; k < centers.size(); ++k) out.push_back(midpoint(centers[j], centers[k]));
  return out;
}

}  // namespace

double SparseCatSpec::min_separation() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j)
    for (std::size_t k = j + 1; k < centers.size(); ++k) best = std::min(best, distance(centers[j], centers[k]));
  return best;
}

double SparseCatSpec::max_separation() const {
  double best = 0;
  for (std::size_t j = 0; j < centers.size(); ++j)
    for (std::size_t k = j + 1; k < centers.size(); ++k) best = std::max(best, distance(centers[j], centers[k]));
  return best;
}

void SparseCatSpec::validate() const {
  if (centers.empty()) throw std::invalid_argument("sparse cat needs at least one center");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
  if (centers.size() > 1 && min_separation() < sparseness_factor * std::sqrt(hbar)) {
    std::ostringstream msg;
    msg << "cat centers are not sparse: minimum separation " << min_separation() << " < 5 sqrt(hbar) = "
        << sparseness_factor * std::sqrt(hbar);
    throw std::invalid_argument(msg.str());
  }
}

State sparse_cat_state(const SparseCatSpec& spec, const Grid& grid) {
  spec.validate();
  if (std::abs(grid.hbar - spec.hbar) > 1e-12 * spec.hbar)
    throw std::invalid_argument("cat and grid disagree on hbar");
  const double sigma = std::sqrt(spec.hbar / 2);
  const double margin = 6 * sigma;
  for (const auto& c : spec.centers) {
    if (c.x - margin < grid.x_min || c.x + margin > grid.x_max || std::abs(c.p) + margin > grid.p_max() / 2) {
      std::ostringstream msg;
      msg << "cat center (" << c.x << ", " << c.p << ") is clipped by the grid";
      throw std::invalid_argument(msg.str());
    }
  }
  State::Amplitudes amps = State::Amplitudes::Zero(grid.n_points);
  for (const auto& c : spec.centers) {
    for (Eigen::Index k = 0; k < grid.n_points; ++k) {
      const double x = grid.x(k);
      const double u = x - c.x;
      amps[k] += std::polar(std::exp(-u * u / (2 * spec.hbar)), c.p * x / spec.hbar);
    }
  }
  State psi(grid, std::move(amps));
  psi.normalize();
  return psi;
}

SparseCatSpec sparse_cat_layout(int n, double hbar, double separation_factor, const PhaseBox& region,
                                std::uint64_t seed, double min_dx_factor) {
  if (n < 1) throw std::invalid_argument("layout needs at least one center");
  const double root = std::sqrt(hbar);
  const double min_sep = std::max(separation_factor, sparseness_factor) * root;
  const double clearance = 2.2 * mask_radius_factor * root;
  const double min_dx = min_dx_factor * root;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(region.x_min, region.x_max);
  std::uniform_real_distribution<double> up(region.p_min, region.p_max);

  auto acceptable = [&](const std::vector<PhaseSpacePoint>& centers) {
    for (std::size_t j = 0; j < centers.size(); ++j)
      for (std::size_t k = j + 1; k < centers.size(); ++k) {
        if (distance(centers[j], centers[k]) < min_sep) return false;
        if (std::abs(centers[j].x - centers[k].x) < min_dx) return false;
      }
    // Midpoint masks may overlap each other; they only must not touch a center mask.
    for (const auto& mid : midpoints(centers))
      for (const auto& c : centers)
        if (distance(mid, c) < clearance) return false;
    return true;
  };

  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::vector<PhaseSpacePoint> centers;
    int misses = 0;
    while (static_cast<int>(centers.size()) < n && misses < 5000) {
      centers.push_back({ux(rng), up(rng)});
      if (!acceptable(centers)) {
        centers.pop_back();
        ++misses;
      }
    }
    if (static_cast<int>(centers.size()) == n) {
      std::sort(centers.begin(), centers.end(), [](auto a, auto b) { return a.x < b.x; });
      return {centers, hbar};
    }
  }
  throw std::invalid_argument("could not place the requested number of sparse cat centers in the region");
}

CatOverlapReport cat_overlap_experiment(const SparseCatSpec& spec, const Grid& grid, double displacement,
                                        int band_samples) {
  spec.validate();
  const double root = std::sqrt(spec.hbar);
  if (displacement != 0.0) {
    const double lower = spec.count() > 1 ? spec.hbar / (2 * spec.max_separation()) : 0.0;
    const double upper = root / 2;
    if (std::abs(displacement) < lower || std::abs(displacement) > upper) {
      std::ostringstream msg;
      msg << "displacement " << displacement << " lies outside the fringe-to-packet window [" << lower << ", "
          << upper << "]";
      throw std::invalid_argument(msg.str());
    }
  }
  const State psi = sparse_cat_state(spec, grid);
  const Wigner w = wigner_transform(psi);

  CatOverlapReport report;
  report.n = spec.count();
  const double weight = 2 * std::numbers::pi * spec.hbar * w.dx() * w.dp();
  const double radius = mask_radius_factor * root;
  const auto mids = midpoints(spec.centers);
  std::vector<double> per_center(spec.centers.size(), 0.0);

  report.self_overlap = weight * w.values.square().sum();
  // Center discs are disjoint by sparseness; midpoint discs may overlap each
  // other, so each cell is labelled once.
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> label =
      Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(w.n_x(), w.n_p());
  auto visit_disc = [&](PhaseSpacePoint c, auto&& body) {
    const auto k0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((c.x - radius - w.x(0)) / w.dx())));
    const auto k1 = std::min<Eigen::Index>(w.n_x() - 1, static_cast<Eigen::Index>(std::ceil((c.x + radius - w.x(0)) / w.dx())));
    const auto m0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((c.p - radius - w.p(0)) / w.dp())));
    const auto m1 = std::min<Eigen::Index>(w.n_p() - 1, static_cast<Eigen::Index>(std::ceil((c.p + radius - w.p(0)) / w.dp())));
    for (Eigen::Index m = m0; m <= m1; ++m)
      for (Eigen::Index k = k0; k <= k1; ++k)
        if (distance({w.x(k), w.p(m)}, c) < radius) body(k, m);
  };
  for (std::size_t j = 0; j < spec.centers.size(); ++j)
    visit_disc(spec.centers[j], [&](Eigen::Index k, Eigen::Index m) {
      if (label(k, m) != 0) return;
      label(k, m) = 1;
      const double v = w.values(k, m);
      per_center[j] += weight * v * v;
    });
  for (const auto& mid : mids)
    visit_disc(mid, [&](Eigen::Index k, Eigen::Index m) {
      if (label(k, m) != 0) return;
      label(k, m) = 2;
      const double v = w.values(k, m);
      report.interference_part += weight * v * v;
    });
  for (double c : per_center) report.direct_part += c;
  report.interference_share = report.interference_part / report.self_overlap;
  // g per Gaussian; close to 1/N^2 since N g + N(N-1) g = 1.
  report.g_mean = report.direct_part / static_cast<double>(spec.centers.size());

  auto shift_cells = static_cast<Eigen::Index>(std::lround(std::abs(displacement) / w.dp()));
  if (displacement != 0.0) {
    // Stay inside the window after rounding to whole cells.
    const double lower = spec.count() > 1 ? spec.hbar / (2 * spec.max_separation()) : 0.0;
    shift_cells = std::clamp(shift_cells, static_cast<Eigen::Index>(std::ceil(lower / w.dp())),
                             static_cast<Eigen::Index>(std::floor(root / 2 / w.dp())));
    if (displacement < 0) shift_cells = -shift_cells;
  }
  report.displacement = static_cast<double>(shift_cells) * w.dp();
  report.displaced_overlap = wigner_overlap_shifted(w, w, shift_cells);
  report.displaced_overlap_direct = overlap(psi, momentum_kick(psi, report.displacement));

  if (band_samples > 0) {
    if (spec.count() < 2) throw std::invalid_argument("a displacement band needs at least two centers");
    report.band_lower = spec.hbar / (2 * spec.max_separation());
    report.band_upper = root / 2;
    const auto first = static_cast<Eigen::Index>(std::ceil(report.band_lower / w.dp()));
    const auto last = static_cast<Eigen::Index>(std::floor(report.band_upper / w.dp()));
    if (last < first) throw std::invalid_argument("displacement window is narrower than one Wigner momentum cell");
    const int samples = static_cast<int>(std::min<Eigen::Index>(band_samples, last - first + 1));
    for (int i = 0; i < samples; ++i) {
      const Eigen::Index cells =
          samples == 1 ? first : first + ((last - first) * i + (samples - 1) / 2) / (samples - 1);
      report.band_overlap += wigner_overlap_shifted(w, w, cells) / samples;
      report.band_overlap_direct += overlap(psi, momentum_kick(psi, static_cast<double>(cells) * w.dp())) / samples;
    }
    report.band_samples = samples;
  }
  return report;
}

}  // namespace chaosfork
