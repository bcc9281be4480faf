#pragma once

#include "chaosfork/classical.hpp"
#include "chaosfork/wavefunction.hpp"
#include "chaosfork/wigner.hpp"

#include <cstdint>
#include <vector>

namespace chaosfork {

/// Superposition of N coherent Gaussians centered at phase-space points.
/// Every pair must be separated by at least 5 sqrt(hbar).
struct SparseCatSpec {
  std::vector<PhaseSpacePoint> centers;
  double hbar = 0.1;

  int count() const { return static_cast<int>(centers.size()); }
  double min_separation() const;
  double max_separation() const;
  void validate() const;
};

/// Normalized sum of exp(-(x - x_j)^2 / (2 hbar)) exp(i p_j x / hbar).
State sparse_cat_state(const SparseCatSpec& spec, const Grid& grid);

/// Deterministic random layout of N centers inside `region` such that all
/// centers are at least separation_factor * sqrt(hbar) apart, no pairwise
/// midpoint comes near a center mask, and no two centers share an x coordinate to
/// within min_dx_factor * sqrt(hbar) (so a momentum shift dephases every
/// interference term).
SparseCatSpec sparse_cat_layout(int n, double hbar, double separation_factor, const PhaseBox& region,
                                std::uint64_t seed, double min_dx_factor = 1.0);

struct CatOverlapReport {
  int n = 0;
  /// 2 pi hbar int W^2 over the whole grid (1 for a pure state).
  double self_overlap = 0;
  /// Part of the self-overlap inside the masks around the Gaussian centers.
  double direct_part = 0;
  /// Part inside the masks around the pairwise midpoints.
  double interference_part = 0;
  double interference_share = 0;
  /// Mean 2 pi hbar int G_j^2 over the centers.
  double g_mean = 0;
  double displacement = 0;
  /// 2 pi hbar int W(x, p) W(x, p - displacement).
  double displaced_overlap = 0;
  /// |<psi|exp(i displacement x / hbar)|psi>|^2, the same quantity from the wavefunction.
  double displaced_overlap_direct = 0;

  /// Displaced overlap averaged over evenly spaced shifts across the window
  /// [hbar / (2 d_max), sqrt(hbar) / 2], each a whole number of Wigner
  /// momentum cells. Averaging over the window dephases the interference
  /// terms of every pair, leaving the direct part.
  double band_lower = 0;
  double band_upper = 0;
  int band_samples = 0;
  double band_overlap = 0;
  double band_overlap_direct = 0;
};

/// Decomposes the self-overlap of the cat's Wigner function into direct and
/// interference contributions (discs of radius 3 sqrt(hbar); a point inside
/// several midpoint discs is counted once), then overlaps
/// W with its copy displaced in momentum.
///
/// A nonzero displacement must lie in [hbar / (2 d_max), sqrt(hbar) / 2]; it
/// is rounded to a whole number of Wigner momentum cells.
CatOverlapReport cat_overlap_experiment(const SparseCatSpec& spec, const Grid& grid, double displacement,
                                        int band_samples = 0);

}  // namespace chaosfork
