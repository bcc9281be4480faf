#include "chaosfork/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace chaosfork;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.grid_points = 1024;
  c.x_min = -30;
  c.x_max = 30;
  c.preparation_times = {1, 2, 3};
  c.tau_max = 12;
  c.classical_resolution = 24;
  c.classical_tau_max = 12;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("chaosfork-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("decoherence time is the first interpolated threshold crossing") {
  CHECK(*extract_decoherence_time({0, 1, 2}, {1.0, 0.8, 0.5}, 0.9) == doctest::Approx(0.5));
  CHECK_FALSE(extract_decoherence_time({0, 1, 2}, {1.0, 0.95, 0.92}, 0.9).has_value());
  CHECK(*extract_decoherence_time({0, 0.1, 0.2, 0.3}, {1.0, 0.97, 0.94, 0.88}, 0.9) == doctest::Approx(0.8 / 3));
  CHECK(*extract_decoherence_time({0, 0.2}, {1.0, 0.25}, 0.9) == doctest::Approx(0.2 / 7.5));
  // Only the first crossing counts.
  CHECK(*extract_decoherence_time({0, 1, 2, 3}, {1.0, 0.85, 0.95, 0.5}, 0.9) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(extract_decoherence_time({0, 1}, {0.9, 0.5}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(extract_decoherence_time({0, 1}, {1.0}, 0.9), std::invalid_argument);
}

TEST_CASE("default configuration") {
  const auto c = ExperimentConfig::defaults();
  CHECK(c.hamiltonian.kappa == 0.36);
  CHECK(c.hamiltonian.drive_amplitude == 3.8);
  CHECK(c.hamiltonian.stiffness == 0.01);
  CHECK(c.hamiltonian.fork_offset == 0.5);
  CHECK(c.hamiltonian.mass == 1);
  CHECK(c.threshold == 0.9);
  CHECK(c.dt == 0.005);
  CHECK(c.preparation_times.size() == 14);
  CHECK(c.preparation_times.front() == 2);
  CHECK(c.preparation_times.back() == 40);
  CHECK(c.sigma_x == doctest::Approx(std::sqrt(c.hbar / 2)).epsilon(1e-15));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("configuration round trips through text") {
  auto c = ExperimentConfig::defaults();
  c.hbar = 0.07;
  c.sigma_x = 0.1 / 3;
  c.preparation_times = {0.1, 2.5, 1e3};
  c.poincare_seeds = {{1.5, -0.25}, {0.1, 0.2}};
  c.cat_sizes = {3, 5};
  c.output_dir = "runs/a";
  c.seed = 18446744073709551615ULL;
  const auto back = parse_config(format_config(c));
  CHECK(back == c);
  CHECK(back.sigma_x == c.sigma_x);
  CHECK(back.preparation_times == c.preparation_times);
  CHECK(back.seed == c.seed);
  CHECK(parse_config(format_config(ExperimentConfig::defaults())) == ExperimentConfig::defaults());

  const auto dir = scratch_dir("config");
  save_config(c, dir / "nested" / "run.ini");
  CHECK(load_config(dir / "nested" / "run.ini") == c);
  CHECK_FALSE(fs::exists(dir / "nested" / "run.ini.tmp"));
  CHECK_THROWS(load_config(dir / "missing.ini"));
}

TEST_CASE("configuration errors name the key and line") {
  const auto unknown = error_of("[quantum]\nhbar = 0.1\n\nhbarr = 2\n");
  CHECK(unknown.find("line 4") != std::string::npos);
  CHECK(unknown.find("hbarr") != std::string::npos);

  const auto bad = error_of("# comment\n[schedule]\ndt = fast\n");
  CHECK(bad.find("line 3") != std::string::npos);
  CHECK(bad.find("dt") != std::string::npos);

  CHECK(error_of("[nowhere]\nx = 1\n").find("line 2") != std::string::npos);
  CHECK(error_of("hbar = 1\n").find("line 1") != std::string::npos);
  CHECK(error_of("[quantum]\nhbar 0.1\n").find("line 2") != std::string::npos);
  CHECK(error_of("[sweep]\npreparation_times = 3, 2\n").find("increasing") != std::string::npos);
  CHECK(error_of("[sweep]\nthreshold = 1.5\n").find("threshold") != std::string::npos);
  CHECK(error_of("[quantum]\nhbar = 0.1 # inline\n").empty());
}

TEST_CASE("sweep csv round trips") {
  std::vector<SweepRecord> records(3);
  records[0].preparation_time = 2;
  records[0].tau_d_quantum = 3.1458194855314656;
  records[0].tau_d_classical = 1.0 / 3;
  records[0].tau_lower_bound = 3.0;
  records[0].delta_x = 0.3;
  records[0].delta_p = 0.18;
  records[0].mean_delta_v = 0.01;
  records[0].classical_flag = ConvergenceFlag::converged;
  records[1].preparation_time = 4.925;
  records[1].tau_d_quantum = 1.7;
  records[1].classical_flag = ConvergenceFlag::unconverged;
  records[2].preparation_time = 7.845;

  const auto text = format_sweep_csv(records);
  CHECK(text.substr(0, text.find('\n')) ==
        "T,tau_d_q,tau_d_c,tau_lb,delta_x,delta_p,mean_delta_v,converged_flag");
  CHECK(parse_sweep_csv(text) == records);
  CHECK(format_sweep_csv(parse_sweep_csv(text)) == text);

  CHECK_THROWS_AS(parse_sweep_csv("T,tau_d_q\n1,2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_csv(""), std::invalid_argument);
  const auto header = text.substr(0, text.find('\n') + 1);
  CHECK_THROWS_AS(parse_sweep_csv(header + "1,2,3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_csv(header + "1,2,,,0,0,0,7\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sweep_csv(header + "1,abc,,,0,0,0,1\n"), std::invalid_argument);

  const auto dir = scratch_dir("csv");
  export_csv(records, dir / "sweep.csv");
  CHECK(read_file(dir / "sweep.csv") == text);
}

TEST_CASE("least squares line") {
  const auto fit = least_squares({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(fit.slope == doctest::Approx(2));
  CHECK(fit.intercept == doctest::Approx(1));
  CHECK(fit.correlation == doctest::Approx(1));
  CHECK_THROWS_AS(least_squares({1}, {1}), std::invalid_argument);
}

TEST_CASE("fringe study excludes the largest fringe scales") {
  std::vector<SweepRecord> records;
  for (int i = 0; i < 8; ++i) {
    SweepRecord r;
    r.preparation_time = i;
    r.delta_p = 0.01 * (i + 1);
    r.tau_d_quantum = i < 5 ? 10.0 * r.delta_p + 0.2 : 0.5;
    records.push_back(r);
  }
  const auto study = run_fringe_study(records);
  CHECK(study.fit.slope == doctest::Approx(10));
  CHECK(study.fit.intercept == doctest::Approx(0.2));
  CHECK(study.excluded_residuals.size() == 3);
  for (double r : study.excluded_residuals) CHECK(r < 0);
  CHECK(study.rows.back().in_fit == false);
  records.resize(4);
  CHECK_THROWS_AS(run_fringe_study(records), std::invalid_argument);
}

TEST_CASE("sweep results do not depend on the worker count") {
  auto config = small_config();
  config.workers = 1;
  auto one = run_quantum_sweep(config);
  run_classical_sweep(config, one);
  config.workers = 3;
  auto three = run_quantum_sweep(config);
  run_classical_sweep(config, three);
  CHECK(format_sweep_csv(one) == format_sweep_csv(three));

  for (const auto& r : one) {
    CHECK(r.failure.empty());
    REQUIRE(r.tau_d_quantum.has_value());
    REQUIRE(r.tau_lower_bound.has_value());
    CHECK(*r.tau_lower_bound <= *r.tau_d_quantum);
    CHECK(r.bound_violations == 0);
    CHECK(r.max_norm_drift < 1e-10);
    CHECK(r.classical_flag != ConvergenceFlag::not_computed);
  }
  CHECK(*one[0].tau_d_quantum > *one[2].tau_d_quantum);
}

TEST_CASE("a stricter threshold is crossed earlier") {
  auto config = small_config();
  std::vector<OverlapSeries<double>> series;
  const auto records = run_quantum_sweep(config, &series);
  REQUIRE(series.size() == records.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto loose = summarize_series(config.preparation_times[i], series[i], 0.9, config.hbar);
    const auto strict = summarize_series(config.preparation_times[i], series[i], 0.95, config.hbar);
    REQUIRE(strict.tau_d_quantum.has_value());
    CHECK(*strict.tau_d_quantum <= *loose.tau_d_quantum);
    CHECK(*strict.tau_lower_bound <= *loose.tau_lower_bound);
  }
}

TEST_CASE("identical branches never decohere") {
  auto config = small_config();
  config.hamiltonian.fork_offset = 0;
  config.tau_max = 4;
  config.classical_tau_max = 4;
  config.preparation_times = {1, 3};
  auto records = run_quantum_sweep(config);
  run_classical_sweep(config, records);
  for (const auto& r : records) {
    CHECK_FALSE(r.tau_d_quantum.has_value());
    CHECK_FALSE(r.tau_lower_bound.has_value());
    CHECK_FALSE(r.tau_d_classical.has_value());
    CHECK(r.mean_delta_v == 0);
  }
}

TEST_CASE("sweep points that leave the grid are recorded as failures") {
  auto config = small_config();
  config.grid_points = 512;
  config.x_min = -12;
  config.x_max = 12;
  config.x0 = 0;
  config.tau_max = 3;
  config.preparation_times = {1, 30};
  const auto records = run_quantum_sweep(config);
  INFO(records[0].failure);
  CHECK(records[0].failure.empty());
  CHECK_FALSE(records[1].failure.empty());
  CHECK_FALSE(records[1].tau_d_quantum.has_value());
}
