#pragma once

// SABR path simulation: conditional CEV scheme, Islah variant, exact
// lognormal branch for beta = 1, and an Euler baseline.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sabrmc/cev.hpp"
#include "sabrmc/condvar.hpp"
#include "sabrmc/error.hpp"
#include "sabrmc/parallel.hpp"
#include "sabrmc/rng.hpp"
#include "sabrmc/sampling.hpp"

namespace sabrmc {

/// dF = sigma F^beta dW, dsigma = nu sigma dZ, d<W, Z> = rho dt.
struct SabrParams {
  double f0 = 1.0;
  double sigma0 = 0.2;
  double vov = 0.3;
  double beta = 0.5;
  double rho = 0.0;

  double beta_star() const noexcept { return 1.0 - beta; }
  double rho_star() const noexcept { return std::sqrt((1.0 - rho) * (1.0 + rho)); }

  void validate() const {
    if (!(f0 > 0.0) || !std::isfinite(f0)) throw ConfigError("SabrParams: requires finite f0 > 0");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) {
      throw ConfigError("SabrParams: requires finite sigma0 > 0");
    }
    if (!(vov >= 0.0) || !std::isfinite(vov)) throw ConfigError("SabrParams: requires finite vov >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("SabrParams: requires 0 <= beta <= 1");
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("SabrParams: requires -1 <= rho <= 1");
  }
};

struct PathState {
  double t = 0.0;
  double f = 1.0;
  double sigma = 0.2;
  bool absorbed = false;

  static PathState initial(const SabrParams& p) { return {0.0, p.f0, p.sigma0, false}; }
};

/// Conditioning quantities of the last step.
struct StepDiagnostics {
  double z_hat = 0.0;
  double avg_var = 1.0;
  double cond_mean = 0.0;
};

enum class Scheme { cev, islah, lognormal, euler };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::cev: return "cev";
    case Scheme::islah: return "islah";
    case Scheme::lognormal: return "lognormal";
    case Scheme::euler: return "euler";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "cev") return Scheme::cev;
  if (name == "islah") return Scheme::islah;
  if (name == "lognormal") return Scheme::lognormal;
  if (name == "euler") return Scheme::euler;
  throw ConfigError("unknown scheme '" + std::string(name) + "' (expected cev, islah, lognormal, euler)");
}

/// Shifted-lognormal fit used for the conditional average variance: weight
/// 5/6 matching mean and cv, or the exact three-moment fit.
enum class SlnMode { small_time, three_moment };

struct StepOptions {
  SlnMode sln = SlnMode::small_time;
};

struct VolStep {
  double sigma_next;
  double z_hat;
};

/// sigma_{t+h} = sigma_t exp(nu_hat z_hat), z_hat = X - nu_hat / 2.
template <RandomSource G>
VolStep vol_step(G& rng, double sigma_t, double vov, double h) {
  const double nu_hat = vov * std::sqrt(h);
  const double z_hat = sample_normal(rng) - 0.5 * nu_hat;
  return {sigma_t * std::exp(nu_hat * z_hat), z_hat};
}

/// Draw of I given z_hat from the shifted-lognormal fit.
template <RandomSource G>
double sample_conditional_avg_var(G& rng, double nu_hat, double z_hat, const StepOptions& opt) {
  const bool three = opt.sln == SlnMode::three_moment;
  const FastStats st = fast_stats(nu_hat, z_hat, three);
  const SlnParams sln =
      three ? sln_fit_three_moments(st.mu, st.cv, st.skew).params : sln_fit_small_time(st.mu, st.cv);
  return sample_avg_var(rng, sln);
}

/// Fbar = F_t exp(rho (sigma_{t+h} - sigma_t) / (nu F_t^b) - rho^2 sigma_t^2 h I / (2 F_t^(2b))),
/// b = beta_*.
inline double cond_mean(const SabrParams& p, const PathState& s, double sigma_next, double avg_var,
                        double h) {
  const double fb = p.beta_star() == 0.0 ? 1.0 : std::pow(s.f, p.beta_star());
  const double drift = p.rho * (sigma_next - s.sigma) / (p.vov * fb);
  const double conv = p.rho * p.rho * s.sigma * s.sigma * h * avg_var / (2.0 * fb * fb);
  return s.f * std::exp(drift - conv);
}

namespace detail {

inline void require_live(const PathState& s, const char* who) {
  if (s.absorbed || !(s.f > 0.0)) throw DomainError(std::string(who) + ": path is absorbed");
}

inline PathState absorbed_state(double t, double sigma) { return {t, 0.0, sigma, true}; }

enum class CondLaw { cev, islah };

template <CondLaw law, RandomSource G>
PathState conditional_step(G& rng, const SabrParams& p, const PathState& s, double h,
                           const StepOptions& opt, StepDiagnostics* diag) {
  const double t = s.t + h;
  if (p.vov == 0.0) {
    const double f = cev_sample(rng, CevParams{p.beta, s.f, s.sigma * s.sigma * h});
    if (diag) *diag = {0.0, 1.0, s.f};
    return f == 0.0 ? absorbed_state(t, s.sigma) : PathState{t, f, s.sigma, false};
  }
  const double nu_hat = p.vov * std::sqrt(h);
  const VolStep v = vol_step(rng, s.sigma, p.vov, h);
  const double avg_var = sample_conditional_avg_var(rng, nu_hat, v.z_hat, opt);
  const double fbar = cond_mean(p, s, v.sigma_next, avg_var, h);
  if (diag) *diag = {v.z_hat, avg_var, fbar};
  const double rho_star2 = (1.0 - p.rho) * (1.0 + p.rho);
  if (rho_star2 == 0.0) return {t, fbar, v.sigma_next, false};
  const double var_scale = rho_star2 * s.sigma * s.sigma * h * avg_var;
  double f;
  if constexpr (law == CondLaw::cev) {
    f = cev_sample(rng, CevParams{p.beta, fbar, var_scale});
  } else {
    const double d_sigma = p.beta_star() * p.rho / p.vov * (v.sigma_next - s.sigma);
    f = islah_sample(rng, p.beta, p.rho, s.f, d_sigma, var_scale);
  }
  return f == 0.0 ? absorbed_state(t, v.sigma_next) : PathState{t, f, v.sigma_next, false};
}

}  // namespace detail

/// One step of the conditional-CEV scheme: volatility, average variance,
/// conditional mean, then an exact CEV draw with variance budget
/// rho_*^2 sigma_t^2 h I.
template <RandomSource G>
PathState sabr_step_cev(G& rng, const SabrParams& p, const PathState& s, double h,
                        const StepOptions& opt = {}, StepDiagnostics* diag = nullptr) {
  detail::require_live(s, "sabr_step_cev");
  return detail::conditional_step<detail::CondLaw::cev>(rng, p, s, h, opt, diag);
}

/// As sabr_step_cev with the forward drawn from the Islah law.
template <RandomSource G>
PathState sabr_step_islah(G& rng, const SabrParams& p, const PathState& s, double h,
                          const StepOptions& opt = {}, StepDiagnostics* diag = nullptr) {
  detail::require_live(s, "sabr_step_islah");
  return detail::conditional_step<detail::CondLaw::islah>(rng, p, s, h, opt, diag);
}

/// Exact conditional lognormal step for beta = 1:
/// F_{t+h} = Fbar exp(rho_* sigma_t sqrt(h I) X - rho_*^2 sigma_t^2 h I / 2).
template <RandomSource G>
PathState sabr_step_lognormal(G& rng, const SabrParams& p, const PathState& s, double h,
                              const StepOptions& opt = {}, StepDiagnostics* diag = nullptr) {
  detail::require_live(s, "sabr_step_lognormal");
  const double t = s.t + h;
  if (p.vov == 0.0) {
    const double sd = s.sigma * std::sqrt(h);
    if (diag) *diag = {0.0, 1.0, s.f};
    return {t, s.f * std::exp(sd * (sample_normal(rng) - 0.5 * sd)), s.sigma, false};
  }
  const double nu_hat = p.vov * std::sqrt(h);
  const VolStep v = vol_step(rng, s.sigma, p.vov, h);
  const double avg_var = sample_conditional_avg_var(rng, nu_hat, v.z_hat, opt);
  const double fbar = cond_mean(p, s, v.sigma_next, avg_var, h);
  if (diag) *diag = {v.z_hat, avg_var, fbar};
  const double rho_star2 = (1.0 - p.rho) * (1.0 + p.rho);
  if (rho_star2 == 0.0) return {t, fbar, v.sigma_next, false};
  const double sd = std::sqrt(rho_star2 * h * avg_var) * s.sigma;
  return {t, fbar * std::exp(sd * (sample_normal(rng) - 0.5 * sd)), v.sigma_next, false};
}

/// Euler step with log-exact volatility; W1 = rho W2 + rho_* Wperp; the
/// forward is absorbed when the update reaches 0.
template <RandomSource G>
PathState sabr_step_euler(G& rng, const SabrParams& p, const PathState& s, double h) {
  if (s.absorbed) return s;
  const double sqrt_h = std::sqrt(h);
  const double w2 = sample_normal(rng);
  const double w_perp = sample_normal(rng);
  const double w1 = p.rho * w2 + p.rho_star() * w_perp;
  const double local = p.beta == 1.0 ? s.f : std::pow(std::max(s.f, 0.0), p.beta);
  const double f = s.f + s.sigma * local * sqrt_h * w1;
  const double nu_sqrt_h = p.vov * sqrt_h;
  const double sigma = s.sigma * std::exp(nu_sqrt_h * (w2 - 0.5 * nu_sqrt_h));
  if (!(f > 0.0)) return detail::absorbed_state(s.t + h, sigma);
  return {s.t + h, f, sigma, false};
}

struct SimulationOptions {
  StepOptions step{};
  unsigned threads = 0;
};

/// Number of steps of size h in T; T/h must be within 1 ulp-scale of an integer.
inline std::int64_t step_count(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0) || !std::isfinite(T) || !std::isfinite(h)) {
    throw ConfigError("step_count: requires T > 0 and h > 0");
  }
  const double ratio = T / h;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 4.0 * std::numeric_limits<double>::epsilon() * n) {
    throw ConfigError("T = " + std::to_string(T) + " is not an integer multiple of h = " +
                      std::to_string(h));
  }
  return static_cast<std::int64_t>(n);
}

inline void check_scheme(Scheme scheme, const SabrParams& p) {
  p.validate();
  switch (scheme) {
    case Scheme::lognormal:
      if (p.beta != 1.0) throw ConfigError("scheme lognormal requires beta = 1");
      break;
    case Scheme::cev:
    case Scheme::islah:
      if (!(p.beta > CevParams::kBetaMargin && p.beta < 1.0 - CevParams::kBetaMargin)) {
        throw ConfigError(std::string("scheme ") + std::string(to_string(scheme)) +
                          " requires 0 < beta < 1 (use lognormal for beta = 1)");
      }
      if (scheme == Scheme::islah && std::abs(p.rho) == 1.0) {
        throw ConfigError("scheme islah requires |rho| < 1");
      }
      break;
    case Scheme::euler:
      break;
  }
}

template <RandomSource G>
PathState sabr_step(Scheme scheme, G& rng, const SabrParams& p, const PathState& s, double h,
                    const StepOptions& opt = {}) {
  switch (scheme) {
    case Scheme::cev: return sabr_step_cev(rng, p, s, h, opt);
    case Scheme::islah: return sabr_step_islah(rng, p, s, h, opt);
    case Scheme::lognormal: return sabr_step_lognormal(rng, p, s, h, opt);
    case Scheme::euler: return sabr_step_euler(rng, p, s, h);
  }
  return s;
}

/// Forward values of every path at each observation time (row-major:
/// out[k * n_paths + p] is path p at times[k]). Path p uses stream
/// (base_seed, p); absorbed paths stay at 0. Output does not depend on the
/// thread count, and a path observed at T equals the same path simulated to T.
inline std::vector<double> simulate_observed(Scheme scheme, const SabrParams& p,
                                             std::span<const double> times, double h,
                                             std::int64_t n_paths, std::uint64_t base_seed,
                                             const SimulationOptions& opt = {}) {
  check_scheme(scheme, p);
  if (times.empty()) throw ConfigError("simulate_observed: no observation times");
  if (n_paths <= 0) throw ConfigError("simulate_observed: requires n_paths > 0");
  std::vector<std::int64_t> obs_steps;
  for (double T : times) {
    const std::int64_t n = step_count(T, h);
    if (!obs_steps.empty() && n <= obs_steps.back()) {
      throw ConfigError("simulate_observed: observation times must be increasing");
    }
    obs_steps.push_back(n);
  }
  const std::size_t np = static_cast<std::size_t>(n_paths);
  std::vector<double> out(obs_steps.size() * np, 0.0);
  parallel_chunks(np, 1024, opt.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t path = begin; path < end; ++path) {
      RngStream rng(base_seed, path);
      PathState s = PathState::initial(p);
      std::int64_t step = 0;
      for (std::size_t k = 0; k < obs_steps.size(); ++k) {
        for (; step < obs_steps[k] && !s.absorbed; ++step) {
          s = sabr_step(scheme, rng, p, s, h, opt.step);
        }
        out[k * np + path] = s.absorbed ? 0.0 : s.f;
      }
    }
  });
  return out;
}

/// Terminal forward values F_T of n_paths paths.
inline std::vector<double> simulate_terminal(Scheme scheme, const SabrParams& p, double T, double h,
                                             std::int64_t n_paths, std::uint64_t base_seed,
                                             const SimulationOptions& opt = {}) {
  const double times[] = {T};
  return simulate_observed(scheme, p, times, h, n_paths, base_seed, opt);
}

}  // namespace sabrmc
