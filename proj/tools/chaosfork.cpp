// Command-line driver for the fork experiments.

#include "chaosfork/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace chaosfork;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const GlobalOptions& g) {
  ExperimentConfig config = g.config_path.empty() ? ExperimentConfig::defaults() : load_config(g.config_path);
  if (!g.out_dir.empty()) config.output_dir = g.out_dir;
  if (g.workers) config.workers = *g.workers;
  if (g.seed) config.seed = *g.seed;
  config.validate();
  return config;
}

fs::path output(const ExperimentConfig& config, const std::string& name) {
  return fs::path(config.output_dir) / name;
}

void record_config(const ExperimentConfig& config) { save_config(config, output(config, "config.ini")); }

void report_failures(const std::vector<SweepRecord>& records) {
  for (const auto& r : records)
    if (!r.failure.empty()) std::cerr << "T=" << r.preparation_time << ": " << r.failure << '\n';
}

void cmd_poincare(const ExperimentConfig& config) {
  const auto cloud = poincare_section(config.poincare_seeds, config.poincare_periods, config.hamiltonian, config.dt,
                                      config.workers);
  write_file_atomically(output(config, "poincare.csv"), format_poincare_csv(cloud));
  std::cout << "wrote " << cloud.samples.size() << " section points to " << output(config, "poincare.csv").string()
            << '\n';
}

void cmd_evolve(const ExperimentConfig& config, double preparation_time, bool classical, int wigner_stride) {
  const auto schedule = config.schedule(preparation_time);
  schedule.validate();
  const State psi0 = config.initial_state();
  SplitOperator<double> prop(psi0.grid(), config.hamiltonian.mass, config.dt);
  State psi = psi0;
  const long steps = schedule.steps_for(preparation_time, "preparation time");
  prop.advance(psi, config.hamiltonian.on_branch(Branch::base), 0.0, steps);
  const auto series = evolve_branches(psi, config.hamiltonian, preparation_time, schedule);

  std::optional<ClassicalSeries> cs;
  if (classical) {
    ForkEchoTracker tracker(config.hamiltonian, config.initial_density(), config.hbar, config.dt,
                            config.classical_resolution, config.classical_box_sigmas, config.workers);
    tracker.set_fork_time(preparation_time);
    cs = classical_overlap_series(tracker, config.sample_every, std::min(config.tau_max, config.classical_tau_max),
                                  config.stop_overlap);
  }
  write_file_atomically(output(config, "series.csv"), format_series_csv(series, cs ? &*cs : nullptr));
  if (wigner_stride > 0)
    write_file_atomically(output(config, "wigner.csv"), format_wigner_csv(wigner_transform(psi), wigner_stride));

  const auto r = summarize_series(preparation_time, series, config.threshold, config.hbar);
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("none"); };
  std::cout << "T=" << preparation_time << " tau_d_q=" << show(r.tau_d_quantum)
            << " tau_lb=" << show(r.tau_lower_bound);
  if (cs) std::cout << " tau_d_c=" << show(extract_decoherence_time(cs->times, cs->overlap, config.threshold));
  std::cout << " bound_violations=" << r.bound_violations << '\n';
}

void cmd_sweep(const ExperimentConfig& config, bool classical) {
  auto records = run_quantum_sweep(config);
  if (classical) run_classical_sweep(config, records);
  export_csv(records, output(config, "sweep.csv"));
  report_failures(records);
  std::cout << "wrote " << records.size() << " sweep records to " << output(config, "sweep.csv").string() << '\n';
}

void cmd_fringe(const ExperimentConfig& config, const std::string& from) {
  std::vector<SweepRecord> records;
  if (from.empty()) {
    records = run_quantum_sweep(config);
    report_failures(records);
  } else {
    std::ifstream in(from);
    if (!in) throw std::runtime_error("cannot read " + from);
    std::ostringstream text;
    text << in.rdbuf();
    records = parse_sweep_csv(text.str());
  }
  const auto study = run_fringe_study(records);
  write_file_atomically(output(config, "fringe.csv"), format_fringe_csv(study));
  std::cout << "slope=" << study.fit.slope << " intercept=" << study.fit.intercept
            << " r=" << study.fit.correlation << '\n';
}

bool cmd_oracle(const ExperimentConfig& config) {
  bool ok = true;
  std::ostringstream csv;
  csv << "check,expected,measured,tolerance,pass\n";
  for (const auto& c : stretch_drift_checks(96, config.workers)) {
    ok = ok && c.pass();
    csv << c.name << ',' << c.expected << ',' << c.measured << ',' << c.tolerance << ',' << c.pass() << '\n';
    std::printf("%-44s expected %.6e measured %.6e %s\n", c.name.c_str(), c.expected, c.measured,
                c.pass() ? "ok" : "FAIL");
  }
  ExperimentConfig cat = config;
  cat.cat_sizes = {4};
  const auto study = run_cat_study(cat);
  const auto& row = study.rows.front();
  const double expected_share = 0.75;
  const bool share_ok = std::abs(row.interference_share - expected_share) <= 0.1 * expected_share;
  ok = ok && share_ok;
  csv << "cat interference share N=4," << expected_share << ',' << row.interference_share << ','
      << 0.1 * expected_share << ',' << share_ok << '\n';
  std::printf("%-44s expected %.6e measured %.6e %s\n", "cat interference share N=4", expected_share,
              row.interference_share, share_ok ? "ok" : "FAIL");
  write_file_atomically(output(config, "oracle.csv"), csv.str());
  return ok;
}

void cmd_cat(const ExperimentConfig& config, int wigner_stride) {
  const auto study = run_cat_study(config);
  write_file_atomically(output(config, "cat.csv"), format_cat_csv(study));
  for (const auto& r : study.rows)
    std::printf("N=%d share=%.4f displaced=%.4f band=%.4f (2/N=%.4f)\n", r.n, r.interference_share,
                r.displaced_overlap, r.band_overlap, 2.0 / r.n);
  std::printf("scaling exponent %.3f\n", study.scaling_exponent);
  if (wigner_stride > 0 && !config.cat_sizes.empty()) {
    const Grid grid = config.grid();
    const double p_edge = std::min(2.5, grid.p_max() / 2 - 7 * std::sqrt(config.hbar / 2));
    const auto spec = sparse_cat_layout(config.cat_sizes.front(), config.hbar, config.cat_separation,
                                        {0.75 * grid.x_min, 0.75 * grid.x_max, -p_edge, p_edge}, config.seed);
    write_file_atomically(output(config, "cat_wigner.csv"),
                          format_wigner_csv(wigner_transform(sparse_cat_state(spec, grid)), wigner_stride));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum and classical overlap decay under forked driven-pendulum dynamics"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for random layouts and pilot sampling");

  auto* poincare = app.add_subcommand("poincare", "stroboscopic section of the configured seeds");

  auto* evolve = app.add_subcommand("evolve", "overlap, bound and optional classical series at one T");
  double evolve_t = 10;
  bool evolve_classical = false;
  int evolve_wigner = 0;
  evolve->add_option("-T,--preparation-time", evolve_t, "preparation time");
  evolve->add_flag("--classical", evolve_classical, "also compute the classical overlap");
  evolve->add_option("--wigner-stride", evolve_wigner, "dump W(x, p) of the fork state every n points");

  auto* sweep = app.add_subcommand("sweep", "decoherence times over the preparation times");
  bool sweep_quantum_only = false;
  sweep->add_flag("--quantum-only", sweep_quantum_only, "skip the classical overlap");

  auto* fringe = app.add_subcommand("fringe", "decoherence time against fringe scale");
  std::string fringe_from;
  fringe->add_option("--from", fringe_from, "reuse an existing sweep CSV")->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "closed-form checks of the overlap machinery");

  auto* cat = app.add_subcommand("cat", "sparse cat overlap decomposition");
  int cat_wigner = 0;
  cat->add_option("--wigner-stride", cat_wigner, "dump W(x, p) of one cat every n points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    const ExperimentConfig config = resolve(g);
    fs::create_directories(config.output_dir);
    record_config(config);
    if (*poincare) cmd_poincare(config);
    if (*evolve) cmd_evolve(config, evolve_t, evolve_classical, evolve_wigner);
    if (*sweep) cmd_sweep(config, !sweep_quantum_only);
    if (*fringe) cmd_fringe(config, fringe_from);
    if (*oracle && !cmd_oracle(config)) {
      std::cerr << "error: oracle checks failed\n";
      return 1;
    }
    if (*cat) cmd_cat(config, cat_wigner);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
