#include "chaosfork/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace chaosfork {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s) {
  double value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + s + "'");
  return value;
}

template <typename Int = long>
Int parse_long(const std::string& s) {
  Int value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

Field real(std::string section, std::string key, double ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

Field ham(std::string key, double Hamiltonian::*member) {
  return {"hamiltonian", std::move(key),
          [member](ExperimentConfig& c, const std::string& v) { c.hamiltonian.*member = parse_double(v); },
          [member](const ExperimentConfig& c) { return format_double(c.hamiltonian.*member); }};
}

template <typename Int>
Field integer(std::string section, std::string key, Int ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<Int>(parse_long(v)); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(ham("mass", &Hamiltonian::mass));
    f.push_back(ham("kappa", &Hamiltonian::kappa));
    f.push_back(ham("drive_amplitude", &Hamiltonian::drive_amplitude));
    f.push_back(ham("stiffness", &Hamiltonian::stiffness));
    f.push_back(ham("fork_offset", &Hamiltonian::fork_offset));

    f.push_back(real("quantum", "hbar", &ExperimentConfig::hbar));
    f.push_back(real("quantum", "x0", &ExperimentConfig::x0));
    f.push_back(real("quantum", "p0", &ExperimentConfig::p0));
    f.push_back(real("quantum", "sigma_x", &ExperimentConfig::sigma_x));
    f.push_back(integer("quantum", "grid_points", &ExperimentConfig::grid_points));
    f.push_back(real("quantum", "x_min", &ExperimentConfig::x_min));
    f.push_back(real("quantum", "x_max", &ExperimentConfig::x_max));

    f.push_back(real("schedule", "dt", &ExperimentConfig::dt));
    f.push_back(real("schedule", "sample_every", &ExperimentConfig::sample_every));
    f.push_back(real("schedule", "tau_max", &ExperimentConfig::tau_max));
    f.push_back(real("schedule", "stop_overlap", &ExperimentConfig::stop_overlap));

    f.push_back(integer("classical", "resolution", &ExperimentConfig::classical_resolution));
    f.push_back(real("classical", "box_sigmas", &ExperimentConfig::classical_box_sigmas));
    f.push_back(real("classical", "sample_every", &ExperimentConfig::classical_sample_every));
    f.push_back(real("classical", "tau_max", &ExperimentConfig::classical_tau_max));

    f.push_back({"sweep", "preparation_times",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.preparation_times.clear();
                   for (const auto& item : split(v, ',')) c.preparation_times.push_back(parse_double(item));
                 },
                 [](const ExperimentConfig& c) {
                   return join<double>(c.preparation_times, [](const double& d) { return format_double(d); });
                 }});
    f.push_back(real("sweep", "threshold", &ExperimentConfig::threshold));
    f.push_back({"sweep", "output_dir",
                 [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const ExperimentConfig& c) { return c.output_dir; }});
    f.push_back(integer("sweep", "workers", &ExperimentConfig::workers));
    f.push_back({"sweep", "seed",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.seed = parse_long<std::uint64_t>(v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }});

    f.push_back({"poincare", "seeds",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.poincare_seeds.clear();
                   for (const auto& item : split(v, ',')) {
                     const auto parts = split(item, ':');
                     if (parts.size() != 2) throw std::invalid_argument("seed '" + item + "' is not x:p");
                     c.poincare_seeds.push_back({parse_double(parts[0]), parse_double(parts[1])});
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return join<PhaseSpacePoint>(c.poincare_seeds, [](const PhaseSpacePoint& z) {
                     return format_double(z.x) + ":" + format_double(z.p);
                   });
                 }});
    f.push_back(integer("poincare", "periods", &ExperimentConfig::poincare_periods));

    f.push_back({"cat", "sizes",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.cat_sizes.clear();
                   for (const auto& item : split(v, ',')) c.cat_sizes.push_back(static_cast<int>(parse_long(item)));
                 },
                 [](const ExperimentConfig& c) {
                   return join<int>(c.cat_sizes, [](const int& n) { return std::to_string(n); });
                 }});
    f.push_back(real("cat", "separation", &ExperimentConfig::cat_separation));
    f.push_back(real("cat", "displacement", &ExperimentConfig::cat_displacement));
    f.push_back(integer("cat", "layouts", &ExperimentConfig::cat_layouts));
    f.push_back(integer("cat", "band_samples", &ExperimentConfig::cat_band_samples));
    return f;
  }();
  return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.preparation_times = {2.0,   4.925,  7.845,  10.77,  13.69,  16.615, 19.54,
                         22.46, 25.385, 28.31, 31.23, 34.155, 37.075, 40.0};
  for (double x = -14; x <= 14; x += 1) c.poincare_seeds.push_back({x, 0.0});
  // Centers of the two islands on the positive side.
  c.poincare_seeds.push_back({2.9628049, 0.12545219});
  c.poincare_seeds.push_back({8.85036939, 0.10874806});
  return c;
}

Grid ExperimentConfig::grid() const { return build_grid<double>(grid_points, x_min, x_max, hbar); }

State ExperimentConfig::initial_state() const { return gaussian_wavepacket<double>(grid(), x0, p0, sigma_x); }

InitialGaussianDensity ExperimentConfig::initial_density() const {
  return InitialGaussianDensity::coherent({x0, p0}, sigma_x, hbar);
}

EvolutionSchedule<double> ExperimentConfig::schedule(double preparation_time) const {
  EvolutionSchedule<double> s;
  s.preparation_time = preparation_time;
  s.tau_max = tau_max;
  s.dt = dt;
  s.sample_every = sample_every;
  s.stop_overlap = stop_overlap;
  return s;
}

void ExperimentConfig::validate() const {
  hamiltonian.validate();
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("threshold must lie in (0, 1)");
  if (preparation_times.empty()) throw std::invalid_argument("preparation_times must not be empty");
  if (!std::is_sorted(preparation_times.begin(), preparation_times.end()) ||
      std::adjacent_find(preparation_times.begin(), preparation_times.end()) != preparation_times.end())
    throw std::invalid_argument("preparation_times must be strictly increasing");
  if (preparation_times.front() < 0) throw std::invalid_argument("preparation_times must be non-negative");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
  if (!(sigma_x > 0)) throw std::invalid_argument("sigma_x must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (classical_resolution < 2) throw std::invalid_argument("classical resolution must be at least 2");
  if (!(classical_box_sigmas > 0)) throw std::invalid_argument("classical box_sigmas must be positive");
  if (!(classical_sample_every >= dt)) throw std::invalid_argument("classical sample_every must be at least dt");
  if (cat_band_samples < 1) throw std::invalid_argument("cat band_samples must be at least 1");
  if (cat_layouts < 1) throw std::invalid_argument("cat layouts must be at least 1");
  for (int n : cat_sizes)
    if (n < 1) throw std::invalid_argument("cat sizes must be positive");
  if (poincare_periods < 0) throw std::invalid_argument("poincare periods must be non-negative");
  build_grid<double>(grid_points, x_min, x_max, hbar);
  for (double t : preparation_times) schedule(t).validate();
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return format_config(*this) == format_config(o); }

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config = ExperimentConfig::defaults();
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.section + "." + f.key] = &f;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    auto fail = [&](const std::string& why) {
      std::ostringstream msg;
      msg << "config line " << line_no << ": " << why;
      throw std::invalid_argument(msg.str());
    };
    if (content.front() == '[') {
      if (content.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(content).substr(1, content.size() - 2));
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    const std::string qualified = section + "." + key;
    const auto it = index.find(qualified);
    if (it == index.end()) fail("unknown key '" + key + "' in section [" + section + "]");
    try {
      it->second->set(config, value);
    } catch (const std::invalid_argument& e) {
      fail("bad value for key '" + key + "': " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  write_file_atomically(path, format_config(config));
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed while writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace chaosfork
