#pragma once

#include "chaosfork/classical.hpp"
#include "chaosfork/hamiltonian.hpp"
#include "chaosfork/propagator.hpp"
#include "chaosfork/sparse_cat.hpp"
#include "chaosfork/wavefunction.hpp"
#include "chaosfork/wigner.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace chaosfork {

/// Everything needed to reproduce a run.
struct ExperimentConfig {
  Hamiltonian hamiltonian;

  // quantum state and grid
  double hbar = 0.1;
  double x0 = 7;
  double p0 = 0.0;
  double sigma_x = 0.22360679774997896;  // sqrt(hbar / 2)
  long grid_points = 4096;
  double x_min = -80;
  double x_max = 80;

  // time stepping
  double dt = 0.005;
  double sample_every = 0.1;
  double tau_max = 200;
  double stop_overlap = 0.5;

  // classical overlap
  int classical_resolution = 64;
  double classical_box_sigmas = 6;
  double classical_sample_every = 0.1;
  double classical_tau_max = 40;

  // sweep
  std::vector<double> preparation_times;
  double threshold = 0.9;
  std::string output_dir = "out";
  int workers = 1;
  std::uint64_t seed = 1;

  // poincare
  std::vector<PhaseSpacePoint> poincare_seeds;
  long poincare_periods = 1000;

  // sparse cat
  std::vector<int> cat_sizes{2, 4, 8};
  double cat_separation = 10;    // in units of sqrt(hbar)
  double cat_displacement = 0.5;  // momentum shift in units of sqrt(hbar)
  int cat_layouts = 16;
  int cat_band_samples = 64;

  static ExperimentConfig defaults();

  Grid grid() const;
  State initial_state() const;
  InitialGaussianDensity initial_density() const;
  EvolutionSchedule<double> schedule(double preparation_time) const;

  void validate() const;
  bool operator==(const ExperimentConfig&) const;
};

/// Parses `key = value` lines grouped under `[section]` headers. Unknown or
/// malformed keys are reported with their line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Writes `contents` to a sibling temporary file and renames it into place.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

// ---------------------------------------------------------------------------

enum class ConvergenceFlag { not_computed = -1, unconverged = 0, converged = 1 };

struct SweepRecord {
  double preparation_time = 0;
  std::optional<double> tau_d_quantum;
  std::optional<double> tau_d_classical;
  std::optional<double> tau_lower_bound;
  double delta_x = 0;
  double delta_p = 0;
  double mean_delta_v = 0;
  ConvergenceFlag classical_flag = ConvergenceFlag::not_computed;
  /// Bound violations seen in the series (samples with phi < pi/2 and
  /// overlap < bound - 1e-6). Not serialized.
  int bound_violations = 0;
  double max_norm_drift = 0;
  std::string failure;

  bool operator==(const SweepRecord&) const = default;
};

/// First time the series falls to `threshold`, linearly interpolated between
/// the bracketing samples. Requires series[0] == 1 (within 1e-6).
std::optional<double> extract_decoherence_time(const std::vector<double>& times, const std::vector<double>& series,
                                               double threshold);

/// Quantum part of one sweep record from an overlap series.
SweepRecord summarize_series(double preparation_time, const OverlapSeries<double>& series, double threshold,
                             double hbar);

/// Quantum fork at every preparation time. The base evolution is shared
/// across the sorted preparation times; forks run on up to config.workers
/// threads. A failing point is recorded and the sweep continues.
std::vector<SweepRecord> run_quantum_sweep(const ExperimentConfig& config,
                                           std::vector<OverlapSeries<double>>* series_out = nullptr);

/// Classical overlap decay time at every preparation time, filled into
/// `records` (matched by position; records are created when empty).
void run_classical_sweep(const ExperimentConfig& config, std::vector<SweepRecord>& records);

struct ClassicalSeries {
  std::vector<double> times;
  std::vector<double> overlap;
};

/// O_c(tau) at fixed fork time, sampled every `stride` until it falls below
/// `stop_below` or tau reaches tau_max.
ClassicalSeries classical_overlap_series(const ForkEchoTracker& tracker, double stride, double tau_max,
                                         double stop_below);

/// Decay time of O_c for the tracker's fork time. The stride is refined
/// until at least eight samples precede the crossing. The crossing is then
/// re-evaluated with a tracker at twice the resolution to set the flag.
struct ClassicalDecay {
  std::optional<double> tau_d;
  ConvergenceFlag flag = ConvergenceFlag::not_computed;
  double stride = 0;
};

ClassicalDecay classical_decay_time(const ForkEchoTracker& tracker, const ForkEchoTracker* refined,
                                    double threshold, double stride, double dt, double tau_max);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double correlation = 0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

struct FringeStudy {
  struct Row {
    double delta_p = 0;
    double tau_d = 0;
    bool in_fit = false;
  };
  std::vector<Row> rows;  // sorted by delta_p
  LinearFit fit;
  /// Residual tau_d - fit for the excluded (largest delta_p) points.
  std::vector<double> excluded_residuals;
};

/// tau_D versus delta_p with a least-squares line over all but the three
/// largest delta_p values.
FringeStudy run_fringe_study(const std::vector<SweepRecord>& records);

// ---------------------------------------------------------------------------

struct OracleCheck {
  std::string name;
  double expected = 0;
  double measured = 0;
  double tolerance = 0;

  bool pass() const { return std::abs(measured - expected) <= tolerance; }
};

/// Closed-form stretched-Gaussian overlap against the synthetic
/// stretch-and-drift flow through the pullback quadrature, at ten times up
/// to t = 5 (lambda = 1, sigma = 1, v = (0.01, 0), hbar = 2 sigma^2).
std::vector<OracleCheck> stretch_drift_checks(int resolution = 96, int workers = 1);

/// Sparse-cat checks averaged over random layouts for each size.
struct CatStudyRow {
  int n = 0;
  int layouts = 0;
  double self_overlap = 0;
  double interference_share = 0;
  double g_mean = 0;
  double displaced_overlap = 0;
  double displaced_overlap_direct = 0;
  double band_overlap = 0;
  double band_overlap_direct = 0;
};

struct CatStudy {
  double displacement = 0;
  std::vector<CatStudyRow> rows;
  /// Slope of log(band overlap) against log N.
  double scaling_exponent = 0;
};

CatStudy run_cat_study(const ExperimentConfig& config);
std::string format_cat_csv(const CatStudy& study);

// ---------------------------------------------------------------------------

std::string format_sweep_csv(const std::vector<SweepRecord>& records);
std::vector<SweepRecord> parse_sweep_csv(const std::string& text);
void export_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path);

std::string format_fringe_csv(const FringeStudy& study);
std::string format_series_csv(const OverlapSeries<double>& series, const ClassicalSeries* classical);
std::string format_poincare_csv(const PoincareCloud& cloud);

/// Dense W(x, p) dump: header row of momenta, then one row per position.
/// Every `stride`-th point is written in each direction.
std::string format_wigner_csv(const WignerFunction<double>& w, int stride);

}  // namespace chaosfork
