#pragma once

// CEV terminal law with absorbing boundary at zero: z-transform, survival
// function, absorption probability and exact gamma-Poisson-gamma sampling.

#include <cmath>
#include <cstdint>
#include <optional>

#include "sabrmc/error.hpp"
#include "sabrmc/numerics.hpp"
#include "sabrmc/sampling.hpp"

namespace sabrmc {

/// Terminal law of dF = sigma F^beta dW, F absorbed at 0, with E F_T = mean
/// and total variance budget var_scale = sigma^2 T.
struct CevParams {
  static constexpr double kBetaMargin = 1e-6;

  double beta = 0.5;
  double mean = 1.0;
  double var_scale = 1.0;

  double beta_star() const noexcept { return 1.0 - beta; }
  double alpha() const noexcept { return 0.5 / beta_star(); }

  void validate() const {
    if (!(beta > kBetaMargin && beta < 1.0 - kBetaMargin)) {
      throw DomainError("CevParams: requires 1e-6 < beta < 1 - 1e-6");
    }
    if (!(mean >= 0.0) || std::isinf(mean)) throw DomainError("CevParams: requires finite mean >= 0");
    if (!(var_scale > 0.0) || std::isinf(var_scale)) {
      throw DomainError("CevParams: requires finite var_scale > 0");
    }
  }
};

/// Point in the z-coordinate z(y) = y^(2 beta_*) / (beta_*^2 var_scale).
struct ZCoord {
  double z = 0.0;
};

/// z(y) = y^(2 beta_*) / (beta_*^2 var_scale).
inline ZCoord z_transform(double y, const CevParams& p) {
  if (!(y >= 0.0)) throw DomainError("z_transform: requires y >= 0");
  const double bs = p.beta_star();
  return {std::pow(y, 2.0 * bs) / (bs * bs * p.var_scale)};
}

/// Inverse of z_transform: y = (beta_*^2 var_scale z)^(1 / (2 beta_*)).
inline double z_inverse(ZCoord z, const CevParams& p) {
  if (!(z.z >= 0.0)) throw DomainError("z_inverse: requires z >= 0");
  const double bs = p.beta_star();
  return std::pow(bs * bs * p.var_scale * z.z, 0.5 / bs);
}

/// Prob(F_T > y) = P_chi2(z0; 1/beta_*, z(y)) with z0 = z(mean).
inline double cev_survival(double y, const CevParams& p) {
  p.validate();
  if (!(y > 0.0)) throw DomainError("cev_survival: requires y > 0");
  if (!(p.mean > 0.0)) throw DomainError("cev_survival: requires mean > 0");
  if (std::isinf(y)) return 0.0;
  const double z0 = z_transform(p.mean, p).z;
  return ncx2_cdf(z0, Ncx2Params{1.0 / p.beta_star(), z_transform(y, p).z});
}

/// Prob(F_T = 0) = 1 - P_G(z0 / 2; 1 / (2 beta_*)).
inline double absorption_prob(const CevParams& p) {
  p.validate();
  if (!(p.mean > 0.0)) throw DomainError("absorption_prob: requires mean > 0");
  const double z0 = z_transform(p.mean, p).z;
  return 1.0 - reg_gamma_lower(0.5 * z0, p.alpha());
}

/// Exact CEV draw: X ~ G(alpha); absorbed if X >= z0/2, otherwise
/// z_T = 2 G(Poisson(z0/2 - X) + 1) mapped back through z_inverse.
template <RandomSource G>
double cev_sample(G& rng, const CevParams& p) {
  if (p.mean == 0.0) return 0.0;
  p.validate();
  const double half_z0 = 0.5 * z_transform(p.mean, p).z;
  if (!(half_z0 > 0.0)) return 0.0;  // mean^(2 beta_*) underflows
  const std::optional<double> x = sample_gamma_conditional_lt(rng, p.alpha(), half_z0);
  if (!x) return 0.0;
  const std::int64_t n = sample_poisson(rng, half_z0 - *x);
  const double z_t = 2.0 * sample_gamma(rng, static_cast<double>(n) + 1.0);
  return z_inverse({z_t}, p);
}

/// Exponents of the power-of-CEV representation of the Islah law.
struct IslahExponents {
  double beta_prime;       // beta / (1 - beta_* rho^2)
  double beta_star_prime;  // beta_* rho_*^2 / (1 - beta_* rho^2)
};

inline IslahExponents islah_exponents(double beta, double rho) {
  const double bs = 1.0 - beta;
  const double denom = 1.0 - bs * rho * rho;
  return {beta / denom, bs * (1.0 - rho * rho) / denom};
}

/// Islah draw of F_{t+h}: Y ~ CEV(beta', Fbar', var_scale) with
/// Fbar' = |(b'/b)(f_prev^b + d_sigma_term)|^(1/b'), returned as
/// ((b/b') Y^b')^(1/b) where b = beta_*, b' = beta_*'. At rho = 0 the
/// power map is the identity and the CEV draw is returned directly.
template <RandomSource G>
double islah_sample(G& rng, double beta, double rho, double f_prev, double d_sigma_term,
                    double var_scale) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("islah_sample: requires 0 < beta < 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("islah_sample: requires |rho| < 1");
  if (!std::isfinite(f_prev) || !std::isfinite(d_sigma_term)) {
    throw DomainError("islah_sample: requires finite inputs");
  }
  if (rho == 0.0) return cev_sample(rng, CevParams{beta, f_prev, var_scale});
  const double bs = 1.0 - beta;
  const IslahExponents e = islah_exponents(beta, rho);
  const double mean =
      std::pow(std::abs(e.beta_star_prime / bs * (std::pow(f_prev, bs) + d_sigma_term)),
               1.0 / e.beta_star_prime);
  const double y = cev_sample(rng, CevParams{e.beta_prime, mean, var_scale});
  if (y == 0.0) return 0.0;
  return std::pow(bs / e.beta_star_prime * std::pow(y, e.beta_star_prime), 1.0 / bs);
}

/// Prob(F_{t+h} > y) under the Islah law: P_chi2(z'; 1/beta_*', z(y)) with
/// z' = (f_prev^b + d_sigma_term)^2 / (b^2 var_scale) and z(y) built with b.
inline double islah_survival(double y, double beta, double rho, double f_prev,
                             double d_sigma_term, double var_scale) {
  if (!(y > 0.0)) throw DomainError("islah_survival: requires y > 0");
  const double bs = 1.0 - beta;
  const IslahExponents e = islah_exponents(beta, rho);
  const double shifted = std::pow(f_prev, bs) + d_sigma_term;
  const double z_prime = shifted * shifted / (bs * bs * var_scale);
  const double z_y = std::pow(y, 2.0 * bs) / (bs * bs * var_scale);
  return ncx2_cdf(z_prime, Ncx2Params{1.0 / e.beta_star_prime, z_y});
}

}  // namespace sabrmc
