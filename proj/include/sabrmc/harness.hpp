#pragma once

// Benchmark harness: built-in parameter sets, European call pricing,
// repetition statistics against finite-difference fixtures, convergence and
// martingale studies, configuration files and CSV output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sabrmc/engine.hpp"
#include "sabrmc/error.hpp"

#ifndef SABRMC_DATA_DIR
#define SABRMC_DATA_DIR "data"
#endif

namespace sabrmc {

// ---------------------------------------------------------------- cases

struct CaseSpec {
  std::string label;
  SabrParams params;
  std::vector<double> maturities;
  std::vector<double> strikes;

  void validate() const {
    params.validate();
    if (maturities.empty()) throw ConfigError("case " + label + ": no maturities");
    if (strikes.empty()) throw ConfigError("case " + label + ": no strikes");
    for (double T : maturities) {
      if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("case " + label + ": maturities must be > 0");
    }
    for (std::size_t i = 1; i < maturities.size(); ++i) {
      if (!(maturities[i] > maturities[i - 1])) {
        throw ConfigError("case " + label + ": maturities must be increasing");
      }
    }
    for (double K : strikes) {
      if (!(K > 0.0) || !std::isfinite(K)) throw ConfigError("case " + label + ": strikes must be > 0");
    }
  }
};

inline const std::vector<CaseSpec>& builtin_cases() {
  static const std::vector<CaseSpec> cases = [] {
    const std::vector<double> wide = {0.2, 0.4, 0.8, 1.0, 1.2, 1.6, 2.0};
    std::vector<CaseSpec> c;
    c.push_back({"case1", {1.0, 0.25, 0.3, 0.3, -0.8}, {10.0}, wide});
    c.push_back({"case2", {1.0, 0.25, 0.3, 0.6, -0.5}, {10.0}, wide});
    c.push_back({"case3", {0.05, 0.4, 0.6, 0.3, 0.0}, {1.0},
                 {0.02, 0.04, 0.05, 0.06, 0.08, 0.10}});
    c.push_back({"case4", {1.1, 0.4, 0.8, 0.3, -0.3}, {4.0}, {1.1}});
    c.push_back({"case5", {1.1, 0.3, 0.5, 0.4, -0.8}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1.1}});
    return c;
  }();
  return cases;
}

inline const CaseSpec& builtin_case(std::string_view name) {
  for (const CaseSpec& c : builtin_cases()) {
    if (c.label == name) return c;
  }
  throw ConfigError("unknown case '" + std::string(name) + "' (expected case1 .. case5)");
}

// ---------------------------------------------------------------- fixtures

namespace detail {

inline bool same_grid_point(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Whole-string numeric parse; nullopt on trailing characters or overflow.
inline std::optional<double> parse_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != t.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != t.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reference (finite-difference) call prices keyed by (case, T, K).
struct FixtureEntry {
  std::string label;
  double T = 0.0;
  double K = 0.0;
  double price = 0.0;
  std::string source;
};

class FixtureTable {
 public:
  void add(FixtureEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<FixtureEntry>& entries() const { return entries_; }

  std::optional<double> lookup(std::string_view label, double T, double K) const {
    for (const FixtureEntry& e : entries_) {
      if (e.label == label && detail::same_grid_point(e.T, T) && detail::same_grid_point(e.K, K)) {
        return e.price;
      }
    }
    return std::nullopt;
  }

  /// CSV with header case,T,K,price,source; '#' starts a comment line.
  static FixtureTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open fixture file " + path.string());
    FixtureTable t;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string s = detail::trim(line);
      if (s.empty() || s[0] == '#') continue;
      const auto f = detail::split(s, ',');
      const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
      if (!header) {
        if (f.size() != 5 || f[0] != "case" || f[1] != "T" || f[2] != "K" || f[3] != "price" ||
            f[4] != "source") {
          throw ConfigError(where + "expected header case,T,K,price,source");
        }
        header = true;
        continue;
      }
      if (f.size() != 5) throw ConfigError(where + "expected 5 fields");
      const auto T = detail::parse_double(f[1]);
      const auto K = detail::parse_double(f[2]);
      const auto price = detail::parse_double(f[3]);
      if (!T) throw ConfigError(where + "field 'T': not a number");
      if (!K) throw ConfigError(where + "field 'K': not a number");
      if (!price) throw ConfigError(where + "field 'price': not a number");
      t.add({detail::trim(f[0]), *T, *K, *price, detail::trim(f[4])});
    }
    return t;
  }

  static std::filesystem::path default_path() {
    return std::filesystem::path(SABRMC_DATA_DIR) / "fdm_fixtures.csv";
  }

 private:
  std::vector<FixtureEntry> entries_;
};

// ---------------------------------------------------------------- pricing

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Undiscounted call price mean(max(F_T - K, 0)).
inline double price_european_call(std::span<const double> terminal, double strike) {
  if (terminal.empty()) throw DomainError("price_european_call: no terminal prices");
  if (!(strike >= 0.0)) throw DomainError("price_european_call: requires strike >= 0");
  CompensatedSum s;
  for (double f : terminal) s.add(std::max(f - strike, 0.0));
  return s.value() / static_cast<double>(terminal.size());
}

inline double rms_error(double bias, double stdev) { return std::hypot(bias, stdev); }

// ---------------------------------------------------------------- runs

struct RunConfig {
  Scheme scheme = Scheme::cev;
  double h = 1.0;
  std::int64_t n_paths = 100000;
  int n_reps = 50;
  std::uint64_t base_seed = 1;
  SimulationOptions sim{};

  void validate(const CaseSpec& c) const {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("h must be > 0");
    if (n_paths <= 0) throw ConfigError("n_paths must be > 0");
    if (n_reps <= 0) throw ConfigError("n_reps must be > 0");
    check_scheme(scheme, c.params);
    for (double T : c.maturities) step_count(T, h);
  }
};

/// One output row. Optional fields are not available: bias without a
/// fixture, stdev with a single repetition, rms when either is missing.
struct RunStats {
  std::string label;
  Scheme scheme = Scheme::cev;
  double T = 0.0;
  double K = 0.0;
  double h = 0.0;
  std::int64_t n_paths = 0;
  int n_reps = 0;
  double price_mean = 0.0;
  std::optional<double> bias;
  std::optional<double> stdev;
  std::optional<double> rms;
  double cpu_seconds = 0.0;  // mean wall-clock per repetition
};

/// (T, K) points of a case that have no fixture price.
inline std::vector<std::pair<double, double>> missing_fixtures(const CaseSpec& c,
                                                               const FixtureTable& fixtures) {
  std::vector<std::pair<double, double>> out;
  for (double T : c.maturities) {
    for (double K : c.strikes) {
      if (!fixtures.lookup(c.label, T, K)) out.emplace_back(T, K);
    }
  }
  return out;
}

/// m repetitions with seeds base_seed + r; every (T, K) of the case is
/// priced from the same paths. fixtures may be null (no bias).
inline std::vector<RunStats> run_case(const CaseSpec& c, const RunConfig& cfg,
                                      const FixtureTable* fixtures = nullptr) {
  c.validate();
  cfg.validate(c);
  const std::size_t nT = c.maturities.size(), nK = c.strikes.size();
  const std::size_t np = static_cast<std::size_t>(cfg.n_paths);
  // prices[(t * nK + k) * m + r]
  std::vector<double> prices(nT * nK * cfg.n_reps);
  double seconds = 0.0;
  for (int r = 0; r < cfg.n_reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> f = simulate_observed(cfg.scheme, c.params, c.maturities, cfg.h,
                                                    cfg.n_paths, cfg.base_seed + r, cfg.sim);
    for (std::size_t t = 0; t < nT; ++t) {
      const std::span<const double> row(f.data() + t * np, np);
      for (std::size_t k = 0; k < nK; ++k) {
        prices[(t * nK + k) * cfg.n_reps + r] = price_european_call(row, c.strikes[k]);
      }
    }
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  std::vector<RunStats> out;
  const double m = cfg.n_reps;
  for (std::size_t t = 0; t < nT; ++t) {
    for (std::size_t k = 0; k < nK; ++k) {
      const std::span<const double> p(prices.data() + (t * nK + k) * cfg.n_reps, cfg.n_reps);
      RunStats s;
      s.label = c.label;
      s.scheme = cfg.scheme;
      s.T = c.maturities[t];
      s.K = c.strikes[k];
      s.h = cfg.h;
      s.n_paths = cfg.n_paths;
      s.n_reps = cfg.n_reps;
      CompensatedSum sum;
      for (double x : p) sum.add(x);
      s.price_mean = sum.value() / m;
      if (cfg.n_reps > 1) {
        CompensatedSum dev;
        for (double x : p) dev.add((x - s.price_mean) * (x - s.price_mean));
        s.stdev = std::sqrt(dev.value() / (m - 1.0));
      }
      if (fixtures) {
        if (const auto ref = fixtures->lookup(c.label, s.T, s.K)) s.bias = s.price_mean - *ref;
      }
      if (s.bias && s.stdev) s.rms = rms_error(*s.bias, *s.stdev);
      s.cpu_seconds = seconds / m;
      out.push_back(std::move(s));
    }
  }
  return out;
}

struct ScheduleEntry {
  std::int64_t n_paths;
  double h;
};

/// One run_case per (N, h) in the given order; other settings from base.
inline std::vector<RunStats> convergence_study(const CaseSpec& c, std::span<const ScheduleEntry> schedule,
                                               const RunConfig& base,
                                               const FixtureTable* fixtures = nullptr) {
  if (schedule.empty()) throw ConfigError("convergence_study: empty schedule");
  std::vector<RunStats> out;
  for (const ScheduleEntry& e : schedule) {
    RunConfig cfg = base;
    cfg.n_paths = e.n_paths;
    cfg.h = e.h;
    for (RunStats& s : run_case(c, cfg, fixtures)) out.push_back(std::move(s));
  }
  return out;
}

struct MartingaleRow {
  std::string label;
  Scheme scheme = Scheme::cev;
  double T = 0.0;
  double h = 0.0;
  std::int64_t n_paths = 0;
  double mean_f = 0.0;   // E[F_T] - F0 is mean_f - f0
  double std_error = 0.0;
  double forward_error = 0.0;
  double atm_price = 0.0;
  std::optional<double> atm_price_error;
};

/// Single repetition per (scheme, h) over all maturities of the case; the
/// at-the-money strike is F0.
inline std::vector<MartingaleRow> martingale_study(const CaseSpec& c, std::span<const Scheme> schemes,
                                                   std::span<const double> h_list, std::int64_t n_paths,
                                                   std::uint64_t seed, const FixtureTable* fixtures = nullptr,
                                                   const SimulationOptions& sim = {}) {
  c.validate();
  if (schemes.empty() || h_list.empty()) throw ConfigError("martingale_study: no schemes or steps");
  if (n_paths <= 1) throw ConfigError("martingale_study: requires n_paths > 1");
  const double f0 = c.params.f0;
  const std::size_t np = static_cast<std::size_t>(n_paths);
  std::vector<MartingaleRow> out;
  for (Scheme scheme : schemes) {
    for (double h : h_list) {
      const std::vector<double> f = simulate_observed(scheme, c.params, c.maturities, h, n_paths, seed, sim);
      for (std::size_t t = 0; t < c.maturities.size(); ++t) {
        const std::span<const double> row(f.data() + t * np, np);
        CompensatedSum sum;
        for (double x : row) sum.add(x);
        const double mean = sum.value() / static_cast<double>(np);
        CompensatedSum dev;
        for (double x : row) dev.add((x - mean) * (x - mean));
        MartingaleRow r;
        r.label = c.label;
        r.scheme = scheme;
        r.T = c.maturities[t];
        r.h = h;
        r.n_paths = n_paths;
        r.mean_f = mean;
        r.std_error = std::sqrt(dev.value() / (np - 1.0) / np);
        r.forward_error = mean - f0;
        r.atm_price = price_european_call(row, f0);
        if (fixtures) {
          if (const auto ref = fixtures->lookup(c.label, r.T, f0)) r.atm_price_error = r.atm_price - *ref;
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- config

/// Raw key = value settings with the line each came from (0 for overrides).
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {"case", "label", "f0", "sigma0", "vov", "beta", "rho",
                                                  "T",    "K",     "scheme", "h", "n_paths", "n_reps",
                                                  "seed", "sln", "threads"};
    return keys;
  }

  static ConfigMap parse(std::istream& in, const std::string& name) {
    ConfigMap m;
    m.name_ = name;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      const std::string s = detail::trim(std::string_view(line).substr(0, hash));
      if (s.empty()) continue;
      const auto eq = s.find('=');
      const std::string where = name + ":" + std::to_string(line_no) + ": ";
      if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
      const std::string key = detail::trim(std::string_view(s).substr(0, eq));
      const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
      if (!is_known(key)) throw ConfigError(where + "unknown key '" + key + "'");
      if (m.values_.count(key)) throw ConfigError(where + "duplicate key '" + key + "'");
      if (value.empty()) throw ConfigError(where + "field '" + key + "': empty value");
      m.values_[key] = {value, line_no};
    }
    return m;
  }

  static ConfigMap load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string());
  }

  void set(const std::string& key, const std::string& value) {
    if (!is_known(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = {value, 0};
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, Entry>& values() const { return values_; }
  const std::string& name() const { return name_; }

  std::string where(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.line == 0) return "override: ";
    return name_ + ":" + std::to_string(it->second.line) + ": ";
  }

 private:
  static bool is_known(const std::string& key) {
    const auto& k = known_keys();
    return std::find(k.begin(), k.end(), key) != k.end();
  }

  std::string name_ = "<config>";
  std::map<std::string, Entry> values_;
};

struct LoadedConfig {
  CaseSpec case_spec;
  RunConfig run;
};

namespace detail {

inline double config_double(const ConfigMap& m, const std::string& key) {
  const auto v = parse_double(m.values().at(key).value);
  if (!v || !std::isfinite(*v)) {
    throw ConfigError(m.where(key) + "field '" + key + "': expected a number, got '" +
                      m.values().at(key).value + "'");
  }
  return *v;
}

inline std::int64_t config_int(const ConfigMap& m, const std::string& key) {
  const auto v = parse_int(m.values().at(key).value);
  if (!v) {
    throw ConfigError(m.where(key) + "field '" + key + "': expected an integer, got '" +
                      m.values().at(key).value + "'");
  }
  return *v;
}

inline std::vector<double> config_list(const ConfigMap& m, const std::string& key) {
  std::vector<double> out;
  for (const std::string& part : split(m.values().at(key).value, ',')) {
    const auto v = parse_double(part);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError(m.where(key) + "field '" + key + "': expected a comma-separated list of numbers, got '" +
                        m.values().at(key).value + "'");
    }
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

/// Resolves a ConfigMap. Either `case` names a built-in set (T and K may
/// narrow it) or f0, sigma0, nu, beta, rho, T and K are all given.
inline LoadedConfig resolve_config(const ConfigMap& m) {
  using detail::config_double;
  using detail::config_int;
  using detail::config_list;
  LoadedConfig out;
  CaseSpec& c = out.case_spec;
  const char* model_keys[] = {"f0", "sigma0", "vov", "beta", "rho"};
  if (m.has("case")) {
    try {
      c = builtin_case(m.values().at("case").value);
    } catch (const ConfigError& e) {
      throw ConfigError(m.where("case") + "field 'case': " + e.what());
    }
    for (const char* k : model_keys) {
      if (m.has(k)) {
        throw ConfigError(m.where(k) + "field '" + k + "': model parameters cannot be combined with 'case'");
      }
    }
    if (m.has("label")) throw ConfigError(m.where("label") + "field 'label': cannot be combined with 'case'");
  } else {
    for (const char* k : {"f0", "sigma0", "vov", "beta", "rho", "T", "K"}) {
      if (!m.has(k)) throw ConfigError(m.name() + ": missing field '" + k + "' (or give 'case')");
    }
    c.label = m.has("label") ? m.values().at("label").value : "custom";
    c.params = {config_double(m, "f0"), config_double(m, "sigma0"), config_double(m, "vov"),
                config_double(m, "beta"), config_double(m, "rho")};
  }
  if (m.has("T")) c.maturities = config_list(m, "T");
  if (m.has("K")) c.strikes = config_list(m, "K");

  RunConfig& r = out.run;
  if (m.has("scheme")) {
    try {
      r.scheme = parse_scheme(m.values().at("scheme").value);
    } catch (const ConfigError& e) {
      throw ConfigError(m.where("scheme") + "field 'scheme': " + e.what());
    }
  }
  if (m.has("h")) r.h = config_double(m, "h");
  if (m.has("n_paths")) r.n_paths = config_int(m, "n_paths");
  if (m.has("n_reps")) {
    const std::int64_t n = config_int(m, "n_reps");
    if (n <= 0 || n > 1'000'000) throw ConfigError(m.where("n_reps") + "field 'n_reps': must be in 1..1000000");
    r.n_reps = static_cast<int>(n);
  }
  if (m.has("seed")) {
    const std::int64_t s = config_int(m, "seed");
    if (s < 0) throw ConfigError(m.where("seed") + "field 'seed': must be >= 0");
    r.base_seed = static_cast<std::uint64_t>(s);
  }
  if (m.has("sln")) {
    const std::string& v = m.values().at("sln").value;
    if (v == "small_time") {
      r.sim.step.sln = SlnMode::small_time;
    } else if (v == "three_moment") {
      r.sim.step.sln = SlnMode::three_moment;
    } else {
      throw ConfigError(m.where("sln") + "field 'sln': expected small_time or three_moment, got '" + v + "'");
    }
  }
  if (m.has("threads")) {
    const std::int64_t t = config_int(m, "threads");
    if (t < 0 || t > 4096) throw ConfigError(m.where("threads") + "field 'threads': must be in 0..4096");
    r.sim.threads = static_cast<unsigned>(t);
  }

  try {
    c.validate();
    r.validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(m.name() + ": " + e.what());
  }
  return out;
}

inline LoadedConfig load_config(const std::filesystem::path& path) {
  return resolve_config(ConfigMap::load(path));
}

namespace detail {

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_list(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_g17(v[i]);
  return s;
}

}  // namespace detail

/// Config text that resolves back to the same case and run settings.
inline std::string format_config(const LoadedConfig& c) {
  std::ostringstream o;
  const SabrParams& p = c.case_spec.params;
  o << "label = " << c.case_spec.label << "\n";
  o << "f0 = " << detail::format_g17(p.f0) << "\n";
  o << "sigma0 = " << detail::format_g17(p.sigma0) << "\n";
  o << "vov = " << detail::format_g17(p.vov) << "\n";
  o << "beta = " << detail::format_g17(p.beta) << "\n";
  o << "rho = " << detail::format_g17(p.rho) << "\n";
  o << "T = " << detail::format_list(c.case_spec.maturities) << "\n";
  o << "K = " << detail::format_list(c.case_spec.strikes) << "\n";
  o << "scheme = " << to_string(c.run.scheme) << "\n";
  o << "h = " << detail::format_g17(c.run.h) << "\n";
  o << "n_paths = " << c.run.n_paths << "\n";
  o << "n_reps = " << c.run.n_reps << "\n";
  o << "seed = " << c.run.base_seed << "\n";
  o << "sln = " << (c.run.sim.step.sln == SlnMode::three_moment ? "three_moment" : "small_time") << "\n";
  o << "threads = " << c.run.sim.threads << "\n";
  return o.str();
}

// ---------------------------------------------------------------- output

inline constexpr std::string_view kResultsHeader =
    "case,scheme,T,K,h,n_paths,n_reps,price,bias,stdev,rms,cpu_seconds";
inline constexpr std::string_view kNotAvailable = "NA";

struct CsvOptions {
  bool timing = true;  // false writes NA for cpu_seconds so reruns are byte-identical
};

inline std::string format_results(std::span<const RunStats> rows, const CsvOptions& opt = {}) {
  auto opt_field = [](const std::optional<double>& v) {
    return v ? detail::format_g17(*v) : std::string(kNotAvailable);
  };
  std::string out(kResultsHeader);
  out += "\n";
  for (const RunStats& r : rows) {
    out += r.label + "," + std::string(to_string(r.scheme)) + "," + detail::format_g17(r.T) + "," +
           detail::format_g17(r.K) + "," + detail::format_g17(r.h) + "," + std::to_string(r.n_paths) + "," +
           std::to_string(r.n_reps) + "," + detail::format_g17(r.price_mean) + "," + opt_field(r.bias) + "," +
           opt_field(r.stdev) + "," + opt_field(r.rms) + "," +
           (opt.timing ? detail::format_g17(r.cpu_seconds) : std::string(kNotAvailable)) + "\n";
  }
  return out;
}

inline constexpr std::string_view kMartingaleHeader =
    "case,scheme,T,h,n_paths,mean_F_T,stderr,forward_error,atm_price,atm_price_error";

inline std::string format_martingale(std::span<const MartingaleRow> rows) {
  std::string out(kMartingaleHeader);
  out += "\n";
  for (const MartingaleRow& r : rows) {
    out += r.label + "," + std::string(to_string(r.scheme)) + "," + detail::format_g17(r.T) + "," +
           detail::format_g17(r.h) + "," + std::to_string(r.n_paths) + "," + detail::format_g17(r.mean_f) + "," +
           detail::format_g17(r.std_error) + "," + detail::format_g17(r.forward_error) + "," +
           detail::format_g17(r.atm_price) + "," +
           (r.atm_price_error ? detail::format_g17(*r.atm_price_error) : std::string(kNotAvailable)) + "\n";
  }
  return out;
}

/// Writes text to path; refuses to replace an existing file unless
/// overwrite is set.
inline void check_writable(const std::filesystem::path& path, bool overwrite) {
  if (!overwrite && std::filesystem::exists(path)) {
    throw ConfigError("refusing to overwrite " + path.string() + " (pass --force)");
  }
}

inline void write_text(const std::filesystem::path& path, std::string_view text, bool overwrite) {
  check_writable(path, overwrite);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw ConfigError("write to " + path.string() + " failed");
}

inline void write_results(const std::filesystem::path& path, std::span<const RunStats> rows, bool overwrite,
                          const CsvOptions& opt = {}) {
  write_text(path, format_results(rows, opt), overwrite);
}

}  // namespace sabrmc
