// sabrmc: command-line driver for pricing runs, convergence and martingale
// studies, conditional-moment dumps and CEV sampler validation.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sabrmc/sabrmc.hpp"

namespace {

using namespace sabrmc;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFixture = 3;

struct OutputOptions {
  std::string path;
  bool force = false;
};

bool to_stdout(const OutputOptions& out) { return out.path.empty() || out.path == "-"; }

void emit(const OutputOptions& out, const std::string& text) {
  if (to_stdout(out)) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
  } else {
    write_text(out.path, text, out.force);
  }
}

void add_output_options(CLI::App* app, OutputOptions& out) {
  app->add_option("-o,--output", out.path, "output CSV file (default: standard output)");
  app->add_flag("--force", out.force, "overwrite an existing output file");
}

// Settings shared by the run subcommands: a config file plus one flag per key.
struct RunOptions {
  std::string config;
  std::map<std::string, std::string> overrides;
  std::string fixtures = FixtureTable::default_path().string();
  bool bias = false;
  bool no_timing = false;
  OutputOptions out;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "config file of 'key = value' lines");
    for (const std::string& key : ConfigMap::known_keys()) {
      app->add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { overrides[key] = v; },
          "override config key '" + key + "'");
    }
    app->add_option("--fixtures", fixtures, "reference price CSV");
    app->add_flag("--bias", bias, "require a reference price for every (T, K); exit 3 if one is missing");
    app->add_flag("--no-timing", no_timing, "write NA for cpu_seconds so reruns are byte-identical");
    add_output_options(app, out);
  }

  LoadedConfig load() const {
    ConfigMap m;
    if (!config.empty()) m = ConfigMap::load(config);
    for (const auto& [k, v] : overrides) m.set(k, v);
    return resolve_config(m);
  }

  // Reference prices, or nothing when the file is absent and bias is optional.
  std::optional<FixtureTable> load_fixtures(const CaseSpec& c) const {
    if (!bias && !std::filesystem::exists(fixtures)) return std::nullopt;
    FixtureTable t = FixtureTable::load(fixtures);
    const auto missing = missing_fixtures(c, t);
    for (const auto& [T, K] : missing) {
      std::fprintf(stderr, "%s: no reference price for %s at T=%g, K=%g\n", bias ? "error" : "warning",
                   c.label.c_str(), T, K);
    }
    if (bias && !missing.empty()) throw FixtureError("missing reference prices for case " + c.label);
    return t;
  }
};

std::vector<ScheduleEntry> parse_schedule(const std::string& text) {
  std::vector<ScheduleEntry> out;
  for (const std::string& item : detail::split(text, ',')) {
    const auto parts = detail::split(item, ':');
    const auto n = parts.size() == 2 ? detail::parse_int(parts[0]) : std::nullopt;
    const auto h = parts.size() == 2 ? detail::parse_double(parts[1]) : std::nullopt;
    if (!n || !h || *n <= 0 || !(*h > 0.0)) {
      throw ConfigError("--schedule: expected N:h[,N:h...], got '" + item + "'");
    }
    out.push_back({*n, *h});
  }
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& name) {
  std::vector<double> out;
  for (const std::string& item : detail::split(text, ',')) {
    const auto v = detail::parse_double(item);
    if (!v) throw ConfigError(name + ": expected a comma-separated list of numbers, got '" + text + "'");
    out.push_back(*v);
  }
  return out;
}

int run_price(const RunOptions& o) {
  const LoadedConfig c = o.load();
  const auto fixtures = o.load_fixtures(c.case_spec);
  const auto rows = run_case(c.case_spec, c.run, fixtures ? &*fixtures : nullptr);
  emit(o.out, format_results(rows, {!o.no_timing}));
  return kExitOk;
}

int run_converge(const RunOptions& o, const std::string& schedule_text, int rows) {
  const LoadedConfig c = o.load();
  std::vector<ScheduleEntry> schedule;
  if (!schedule_text.empty()) {
    schedule = parse_schedule(schedule_text);
  } else {
    if (rows < 1 || rows > 30) throw ConfigError("--rows: must be in 1..30");
    ScheduleEntry e{c.run.n_paths, c.run.h};
    for (int i = 0; i < rows; ++i, e.n_paths *= 2, e.h /= 2) schedule.push_back(e);
  }
  for (const ScheduleEntry& e : schedule) {
    RunConfig cfg = c.run;
    cfg.n_paths = e.n_paths;
    cfg.h = e.h;
    cfg.validate(c.case_spec);
  }
  const auto fixtures = o.load_fixtures(c.case_spec);
  const auto out = convergence_study(c.case_spec, schedule, c.run, fixtures ? &*fixtures : nullptr);
  emit(o.out, format_results(out, {!o.no_timing}));
  return kExitOk;
}

int run_martingale(const RunOptions& o, const std::string& schemes_text, const std::string& hs_text) {
  const LoadedConfig c = o.load();
  std::vector<Scheme> schemes;
  for (const std::string& s : detail::split(schemes_text, ',')) {
    const Scheme sc = parse_scheme(detail::trim(s));
    if (sc != Scheme::cev && sc != Scheme::islah) throw ConfigError("--schemes: expected cev and/or islah");
    check_scheme(sc, c.case_spec.params);
    schemes.push_back(sc);
  }
  const std::vector<double> hs = hs_text.empty() ? std::vector<double>{c.run.h} : parse_list(hs_text, "--hs");
  for (double h : hs) {
    RunConfig cfg = c.run;
    cfg.h = h;
    cfg.validate(c.case_spec);
  }
  CaseSpec atm = c.case_spec;
  atm.strikes = {atm.params.f0};
  const auto fixtures = o.load_fixtures(atm);
  const auto rows = martingale_study(c.case_spec, schemes, hs, c.run.n_paths, c.run.base_seed,
                                     fixtures ? &*fixtures : nullptr, c.run.sim);
  emit(o.out, format_martingale(rows));
  return kExitOk;
}

int run_moments(const std::string& nus_text, const std::string& zs_text, const OutputOptions& out) {
  const auto nus = parse_list(nus_text, "--nu_hat");
  const auto zs = parse_list(zs_text, "--z_hat");
  std::string text = "nu_hat,z_hat,mean,cv,skew,exkurt,m2,m3,m4,sln_mean,sln_log_sd,sln_weight\n";
  char buf[512];
  for (double nu : nus) {
    for (double z : zs) {
      CondVarInputs in{nu, z};
      try {
        in.validate();
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
      const MomentSet m = cond_moments(in);
      const SlnParams s = sln_fit_small_time(m);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    nu, z, m.mu, m.cv, m.skew, m.exkurt, m.mu2p, m.mu3p, m.mu4p, s.mean, s.log_sd, s.weight);
      text += buf;
    }
  }
  emit(out, text);
  return kExitOk;
}

int run_cev_cdf(double beta, double mean, double var_scale, std::int64_t n, std::uint64_t seed, int points,
                const OutputOptions& out) {
  const CevParams p{beta, mean, var_scale};
  try {
    p.validate();
    if (!(mean > 0.0)) throw DomainError("requires mean > 0");
  } catch (const DomainError& e) {
    throw ConfigError(std::string("cev-cdf: ") + e.what());
  }
  if (n < 100) throw ConfigError("cev-cdf: --n must be >= 100");
  if (points < 2) throw ConfigError("cev-cdf: --points must be >= 2");
  RngStream rng(seed, 0);
  std::vector<double> draws(static_cast<std::size_t>(n));
  for (double& x : draws) x = cev_sample(rng, p);
  std::sort(draws.begin(), draws.end());
  const double y_max = draws[static_cast<std::size_t>(0.999 * (draws.size() - 1))];
  const double zeros = static_cast<double>(std::upper_bound(draws.begin(), draws.end(), 0.0) - draws.begin());
  std::fprintf(stderr, "absorbed: empirical %.6g, analytic %.6g\n", zeros / n, absorption_prob(p));
  std::string text = "y,analytic_survival,empirical_survival\n";
  char buf[128];
  for (int i = 1; i <= points; ++i) {
    const double y = y_max * i / points;
    const double emp =
        static_cast<double>(draws.end() - std::upper_bound(draws.begin(), draws.end(), y)) / n;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", y, cev_survival(y, p), emp);
    text += buf;
  }
  emit(out, text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SABR Monte Carlo with conditional CEV sampling"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  RunOptions price_opt;
  auto* price = app.add_subcommand("price", "price the case's calls over repeated runs");
  price_opt.attach(price);

  RunOptions conv_opt;
  std::string schedule;
  int rows = 5;
  auto* conv = app.add_subcommand("converge", "RMS error over a schedule of (N, h)");
  conv_opt.attach(conv);
  conv->add_option("--schedule", schedule, "N:h pairs, e.g. 160000:1,320000:0.5");
  conv->add_option("--rows", rows, "without --schedule: rows doubling N and halving h from n_paths, h");

  RunOptions mart_opt;
  std::string schemes = "cev,islah";
  std::string hs;
  auto* mart = app.add_subcommand("martingale", "E[F_T] - F0 and ATM price error per maturity");
  mart_opt.attach(mart);
  mart->add_option("--schemes", schemes, "comma-separated subset of cev,islah");
  mart->add_option("--hs", hs, "comma-separated step sizes (default: h)");

  std::string nus = "0.1,0.2,0.4,0.8", zs = "-1,0,1";
  OutputOptions mom_out;
  auto* mom = app.add_subcommand("moments", "conditional average-variance moments and fits");
  mom->add_option("--nu_hat", nus, "comma-separated nu sqrt(h) values");
  mom->add_option("--z_hat", zs, "comma-separated conditioning values");
  add_output_options(mom, mom_out);

  double beta = 0.3, mean = 1.0, var_scale = 0.5;
  std::int64_t n = 1'000'000;
  std::uint64_t seed = 1;
  int points = 50;
  OutputOptions cdf_out;
  auto* cdf = app.add_subcommand("cev-cdf", "analytic vs empirical CEV survival function");
  cdf->add_option("--beta", beta, "CEV exponent in (0, 1)");
  cdf->add_option("--mean", mean, "mean (initial forward)");
  cdf->add_option("--var_scale", var_scale, "variance budget sigma^2 T");
  cdf->add_option("--n", n, "number of samples");
  cdf->add_option("--seed", seed, "random seed");
  cdf->add_option("--points", points, "number of y grid points");
  add_output_options(cdf, cdf_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    for (const OutputOptions* o : {&price_opt.out, &conv_opt.out, &mart_opt.out, &mom_out, &cdf_out}) {
      if (!to_stdout(*o)) check_writable(o->path, o->force);
    }
    if (*price) return run_price(price_opt);
    if (*conv) return run_converge(conv_opt, schedule, rows);
    if (*mart) return run_martingale(mart_opt, schemes, hs);
    if (*mom) return run_moments(nus, zs, mom_out);
    if (*cdf) return run_cev_cdf(beta, mean, var_scale, n, seed, points, cdf_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const FixtureError& e) {
    std::fprintf(stderr, "fixture error: %s\n", e.what());
    return kExitFixture;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
