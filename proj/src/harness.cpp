#include "chaosfork/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chaosfork {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& s, int line) {
  if (s.empty()) return std::nullopt;
  double value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return value;
}

double parse_required(const std::string& s, int line) {
  const auto v = parse_optional(s, line);
  if (!v) throw std::invalid_argument("csv line " + std::to_string(line) + ": missing value");
  return *v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  for (char c : line) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (c != '\r') {
      item += c;
    }
  }
  out.push_back(item);
  return out;
}

constexpr const char* sweep_header = "T,tau_d_q,tau_d_c,tau_lb,delta_x,delta_p,mean_delta_v,converged_flag";

}  // namespace

std::optional<double> extract_decoherence_time(const std::vector<double>& times, const std::vector<double>& series,
                                               double threshold) {
  if (times.size() != series.size()) throw std::invalid_argument("times and series differ in length");
  if (series.empty()) throw std::invalid_argument("empty overlap series");
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("threshold must lie in (0, 1)");
  if (std::abs(series.front() - 1) > 1e-6) {
    std::ostringstream msg;
    msg << "overlap series must start at 1, starts at " << series.front();
    throw std::invalid_argument(msg.str());
  }
  for (std::size_t k = 1; k < series.size(); ++k) {
    if (series[k] <= threshold) {
      const double drop = series[k - 1] - series[k];
      const double frac = drop > 0 ? (series[k - 1] - threshold) / drop : 1.0;
      return times[k - 1] + frac * (times[k] - times[k - 1]);
    }
  }
  return std::nullopt;
}

SweepRecord summarize_series(double preparation_time, const OverlapSeries<double>& series, double threshold,
                             double hbar) {
  SweepRecord r;
  r.preparation_time = preparation_time;
  r.tau_d_quantum = extract_decoherence_time(series.times, series.overlap, threshold);
  const auto fringe = fringe_scales(series.fork_moments, hbar);
  r.delta_x = fringe.delta_x;
  r.delta_p = fringe.delta_p;
  r.max_norm_drift = series.max_norm_drift;

  // The bound series is cos^2 phi up to phi = pi/2 and 0 beyond, so it
  // always reaches the threshold once phi grows far enough.
  r.tau_lower_bound = extract_decoherence_time(series.times, series.bound, threshold);

  const double horizon = r.tau_d_quantum ? *r.tau_d_quantum : series.times.back();
  double sum = 0;
  int count = 0;
  for (std::size_t k = 0; k < series.times.size() && series.times[k] <= horizon + 1e-12; ++k) {
    sum += series.delta_v[k];
    ++count;
  }
  r.mean_delta_v = count ? sum / count : 0.0;

  const double half_pi = std::numbers::pi / 2;
  for (std::size_t k = 0; k < series.times.size(); ++k)
    if (series.phi[k] < half_pi && series.overlap[k] < series.bound[k] - 1e-6) ++r.bound_violations;
  return r;
}

std::vector<SweepRecord> run_quantum_sweep(const ExperimentConfig& config,
                                           std::vector<OverlapSeries<double>>* series_out) {
  config.validate();
  const auto& times = config.preparation_times;
  const std::size_t n = times.size();
  std::vector<SweepRecord> records(n);
  std::vector<OverlapSeries<double>> series(n);

  // Shared base evolution; the preparation times are sorted.
  std::vector<std::optional<State>> forks(n);
  {
    const State psi0 = config.initial_state();
    SplitOperator<double> prop(psi0.grid(), config.hamiltonian.mass, config.dt);
    const auto base = config.hamiltonian.on_branch(Branch::base);
    State psi = psi0;
    long done = 0;
    for (std::size_t i = 0; i < n; ++i) {
      records[i].preparation_time = times[i];
      try {
        const long target = config.schedule(times[i]).steps_for(times[i], "preparation time");
        prop.advance(psi, base, static_cast<double>(done) * config.dt, target - done);
        done = target;
        double worst = 0;
        detail::check_confined(psi, times[i], worst);
        forks[i] = psi;
      } catch (const std::exception& e) {
        records[i].failure = e.what();
        for (std::size_t j = i + 1; j < n; ++j) {
          records[j].preparation_time = times[j];
          records[j].failure = e.what();
        }
        break;
      }
    }
  }

  parallel_for(static_cast<long>(n), config.workers, [&](long i) {
    if (!forks[i]) return;
    try {
      const double fork_time = times[i];
      series[i] = evolve_branches(*forks[i], config.hamiltonian, fork_time, config.schedule(fork_time));
      records[i] = summarize_series(fork_time, series[i], config.threshold, config.hbar);
    } catch (const std::exception& e) {
      records[i].failure = e.what();
    }
  });
  if (series_out) *series_out = std::move(series);
  return records;
}

ClassicalSeries classical_overlap_series(const ForkEchoTracker& tracker, double stride, double tau_max,
                                         double stop_below) {
  ClassicalSeries out;
  const double norm = tracker.overlap(0);
  if (!(norm > 0)) throw NumericalError("classical self-overlap vanished");
  for (long k = 0;; ++k) {
    const double tau = static_cast<double>(k) * stride;
    if (tau > tau_max + 1e-9) break;
    const double o = k == 0 ? 1.0 : tracker.overlap(tau) / norm;
    out.times.push_back(tau);
    out.overlap.push_back(o);
    if (o < stop_below) break;
  }
  return out;
}

namespace {

struct Crossing {
  std::optional<double> tau;
  long index = 0;
};

Crossing find_crossing(const ForkEchoTracker& tracker, double stride, double tau_max, double threshold) {
  const auto s = classical_overlap_series(tracker, stride, tau_max, threshold);
  Crossing c;
  c.tau = extract_decoherence_time(s.times, s.overlap, threshold);
  c.index = static_cast<long>(s.times.size()) - 1;
  return c;
}

double snap(double value, double dt) { return std::max(dt, std::round(value / dt) * dt); }

}  // namespace

ClassicalDecay classical_decay_time(const ForkEchoTracker& tracker, const ForkEchoTracker* refined,
                                    double threshold, double stride, double dt, double tau_max) {
  ClassicalDecay out;
  stride = snap(stride, dt);
  Crossing c = find_crossing(tracker, stride, tau_max, threshold);
  while (c.tau && c.index < 8 && stride > dt) {
    const double previous = *c.tau;
    stride = snap(std::min(stride / 2, previous / 8), dt);
    c = find_crossing(tracker, stride, std::min(tau_max, 2 * previous + stride), threshold);
  }
  out.tau_d = c.tau;
  out.stride = stride;
  if (!refined) {
    out.flag = ConvergenceFlag::not_computed;
    return out;
  }
  if (!c.tau) {
    out.flag = ConvergenceFlag::converged;
    return out;
  }
  const Crossing fine = find_crossing(*refined, stride, std::min(tau_max, *c.tau * 1.5 + stride), threshold);
  out.flag = fine.tau && std::abs(*fine.tau - *c.tau) <= 0.01 * *c.tau ? ConvergenceFlag::converged
                                                                        : ConvergenceFlag::unconverged;
  return out;
}

void run_classical_sweep(const ExperimentConfig& config, std::vector<SweepRecord>& records) {
  config.validate();
  const auto& times = config.preparation_times;
  if (records.empty()) {
    records.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) records[i].preparation_time = times[i];
  }
  if (records.size() != times.size()) throw std::invalid_argument("records do not match the preparation times");
  const auto density = config.initial_density();
  ForkEchoTracker coarse(config.hamiltonian, density, config.hbar, config.dt, config.classical_resolution,
                         config.classical_box_sigmas, config.workers);
  ForkEchoTracker fine(config.hamiltonian, density, config.hbar, config.dt, 2 * config.classical_resolution,
                       config.classical_box_sigmas, config.workers);
  bool broken = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (broken) {
      records[i].classical_flag = ConvergenceFlag::unconverged;
      continue;
    }
    try {
      coarse.set_fork_time(times[i]);
      fine.set_fork_time(times[i]);
      const auto decay = classical_decay_time(coarse, &fine, config.threshold, config.classical_sample_every,
                                              config.dt, config.classical_tau_max);
      records[i].classical_flag = decay.flag;
      records[i].tau_d_classical = decay.flag == ConvergenceFlag::converged ? decay.tau_d : std::nullopt;
    } catch (const NumericalError& e) {
      // A diverged base flow cannot be recovered for later fork times.
      records[i].classical_flag = ConvergenceFlag::unconverged;
      if (records[i].failure.empty()) records[i].failure = e.what();
      broken = true;
    }
  }
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("least squares needs two or more pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("least squares needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.correlation = syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return fit;
}

FringeStudy run_fringe_study(const std::vector<SweepRecord>& records) {
  FringeStudy study;
  for (const auto& r : records)
    if (r.tau_d_quantum && r.delta_p > 0) study.rows.push_back({r.delta_p, *r.tau_d_quantum, false});
  if (study.rows.size() < 5) {
    std::ostringstream msg;
    msg << "fringe study needs at least 5 usable sweep points, got " << study.rows.size();
    throw std::invalid_argument(msg.str());
  }
  std::sort(study.rows.begin(), study.rows.end(), [](const auto& a, const auto& b) { return a.delta_p < b.delta_p; });
  const std::size_t fit_count = study.rows.size() - 3;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < fit_count; ++i) {
    study.rows[i].in_fit = true;
    x.push_back(study.rows[i].delta_p);
    y.push_back(study.rows[i].tau_d);
  }
  study.fit = least_squares(x, y);
  for (std::size_t i = fit_count; i < study.rows.size(); ++i)
    study.excluded_residuals.push_back(study.rows[i].tau_d -
                                       (study.fit.slope * study.rows[i].delta_p + study.fit.intercept));
  return study;
}

// ---------------------------------------------------------------------------

std::vector<OracleCheck> stretch_drift_checks(int resolution, int workers) {
  const StretchedGaussianParams params{1.0, 1.0, {0.01, 0.0}};
  const double hbar = 2 * params.sigma * params.sigma;
  const StretchDriftFlow flow{params.lambda, params.velocity, {0.0, 0.0}};
  const auto density = InitialGaussianDensity::coherent({0.0, 0.0}, params.sigma, hbar);
  const PhaseBox box = PhaseBox::around(density, 10);
  std::vector<OracleCheck> checks;
  for (int k = 1; k <= 10; ++k) {
    const double t = 0.5 * k;
    OracleCheck c;
    std::ostringstream name;
    name << "stretched-gaussian overlap at t=" << t;
    c.name = name.str();
    c.expected = stretched_gaussian_overlap(params, t);
    c.measured = classical_overlap_pullback(box, resolution, flow.maps(t), density, hbar, workers).value;
    c.tolerance = 1e-6;
    checks.push_back(c);
  }
  return checks;
}

CatStudy run_cat_study(const ExperimentConfig& config) {
  config.validate();
  const Grid grid = config.grid();
  const double root = std::sqrt(config.hbar);
  const double sigma = std::sqrt(config.hbar / 2);
  const double p_edge = std::min(2.5, grid.p_max() / 2 - 7 * sigma);
  if (!(p_edge > 0)) throw std::invalid_argument("grid momentum range is too small for a sparse cat");
  const PhaseBox region{0.75 * grid.x_min, 0.75 * grid.x_max, -p_edge, p_edge};

  CatStudy study;
  const double requested = config.cat_displacement * root;
  study.displacement = requested;
  std::vector<double> log_n, log_o;
  for (int n : config.cat_sizes) {
    CatStudyRow row;
    row.n = n;
    row.layouts = config.cat_layouts;
    std::vector<CatOverlapReport> reports(config.cat_layouts);
    parallel_for(config.cat_layouts, config.workers, [&](long i) {
      const auto spec = sparse_cat_layout(n, config.hbar, config.cat_separation, region,
                                          config.seed + 1000003ULL * static_cast<std::uint64_t>(n) + i);
      reports[i] = cat_overlap_experiment(spec, grid, requested, config.cat_band_samples);
    });
    for (const auto& r : reports) {
      row.self_overlap += r.self_overlap / row.layouts;
      row.interference_share += r.interference_share / row.layouts;
      row.g_mean += r.g_mean / row.layouts;
      row.displaced_overlap += r.displaced_overlap / row.layouts;
      row.displaced_overlap_direct += r.displaced_overlap_direct / row.layouts;
      row.band_overlap += r.band_overlap / row.layouts;
      row.band_overlap_direct += r.band_overlap_direct / row.layouts;
      study.displacement = r.displacement;
    }
    study.rows.push_back(row);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_o.push_back(std::log(row.band_overlap));
  }
  if (study.rows.size() >= 2) study.scaling_exponent = least_squares(log_n, log_o).slope;
  return study;
}

std::string format_cat_csv(const CatStudy& study) {
  std::ostringstream out;
  out << "n,layouts,self_overlap,interference_share,g_mean,displacement,displaced_overlap,displaced_overlap_direct,band_overlap,band_overlap_direct\n";
  for (const auto& r : study.rows)
    out << r.n << ',' << r.layouts << ',' << fmt(r.self_overlap) << ',' << fmt(r.interference_share) << ','
        << fmt(r.g_mean) << ',' << fmt(study.displacement) << ',' << fmt(r.displaced_overlap) << ','
        << fmt(r.displaced_overlap_direct) << ',' << fmt(r.band_overlap) << ',' << fmt(r.band_overlap_direct) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

std::string format_sweep_csv(const std::vector<SweepRecord>& records) {
  std::vector<const SweepRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto a, auto b) { return a->preparation_time < b->preparation_time; });
  std::ostringstream out;
  out << sweep_header << '\n';
  for (const auto* r : sorted) {
    out << fmt(r->preparation_time) << ',' << fmt(r->tau_d_quantum) << ',' << fmt(r->tau_d_classical) << ','
        << fmt(r->tau_lower_bound) << ',' << fmt(r->delta_x) << ',' << fmt(r->delta_p) << ','
        << fmt(r->mean_delta_v) << ',' << static_cast<int>(r->classical_flag) << '\n';
  }
  return out.str();
}

std::vector<SweepRecord> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw std::invalid_argument("csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != sweep_header)
    throw std::invalid_argument("csv header mismatch: expected '" + std::string(sweep_header) + "', found '" +
                                line + "'");
  std::vector<SweepRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8)
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected 8 columns, found " +
                                  std::to_string(cells.size()));
    SweepRecord r;
    r.preparation_time = parse_required(cells[0], line_no);
    r.tau_d_quantum = parse_optional(cells[1], line_no);
    r.tau_d_classical = parse_optional(cells[2], line_no);
    r.tau_lower_bound = parse_optional(cells[3], line_no);
    r.delta_x = parse_required(cells[4], line_no);
    r.delta_p = parse_required(cells[5], line_no);
    r.mean_delta_v = parse_required(cells[6], line_no);
    const double flag = parse_required(cells[7], line_no);
    if (flag != -1 && flag != 0 && flag != 1)
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": converged_flag must be -1, 0 or 1");
    r.classical_flag = static_cast<ConvergenceFlag>(static_cast<int>(flag));
    records.push_back(r);
  }
  return records;
}

void export_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
  write_file_atomically(path, format_sweep_csv(records));
}

std::string format_fringe_csv(const FringeStudy& study) {
  std::ostringstream out;
  out << "delta_p,tau_d_q,in_fit,fit_slope,fit_intercept,fit_r\n";
  for (const auto& row : study.rows)
    out << fmt(row.delta_p) << ',' << fmt(row.tau_d) << ',' << (row.in_fit ? 1 : 0) << ',' << fmt(study.fit.slope)
        << ',' << fmt(study.fit.intercept) << ',' << fmt(study.fit.correlation) << '\n';
  return out.str();
}

std::string format_series_csv(const OverlapSeries<double>& series, const ClassicalSeries* classical) {
  std::ostringstream out;
  out << "tau,overlap_q,overlap_c,bound,phi,delta_v\n";
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    std::string oc;
    if (classical) {
      const double tau = series.times[k];
      for (std::size_t j = 0; j < classical->times.size(); ++j)
        if (std::abs(classical->times[j] - tau) < 1e-9) oc = fmt(classical->overlap[j]);
    }
    out << fmt(series.times[k]) << ',' << fmt(series.overlap[k]) << ',' << oc << ',' << fmt(series.bound[k]) << ','
        << fmt(series.phi[k]) << ',' << fmt(series.delta_v[k]) << '\n';
  }
  return out.str();
}

std::string format_poincare_csv(const PoincareCloud& cloud) {
  std::ostringstream out;
  out << "seed_id,n,x,p\n";
  for (const auto& s : cloud.samples) out << s.seed_id << ',' << s.period << ',' << fmt(s.z.x) << ',' << fmt(s.z.p) << '\n';
  return out.str();
}

std::string format_wigner_csv(const WignerFunction<double>& w, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be at least 1");
  std::ostringstream out;
  out << "x\\p";
  for (Eigen::Index m = 0; m < w.n_p(); m += stride) out << ',' << fmt(w.p(m));
  out << '\n';
  for (Eigen::Index k = 0; k < w.n_x(); k += stride) {
    out << fmt(w.x(k));
    for (Eigen::Index m = 0; m < w.n_p(); m += stride) out << ',' << fmt(w.values(k, m));
    out << '\n';
  }
  return out.str();
}

}  // namespace chaosfork
