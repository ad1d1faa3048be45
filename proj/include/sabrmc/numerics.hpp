#pragma once

// Special functions used by the samplers and distribution checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "sabrmc/error.hpp"

namespace sabrmc {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLnSqrt2Pi = 0.918938533204672741780329736406;

/// Standard normal density.
inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Standard normal distribution function, evaluated through erfc so both
/// tails keep full relative accuracy.
inline double norm_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

/// Scaled complementary error function exp(x^2) erfc(x).
///
/// Direct product where erfc does not underflow (the exponent uses an fma
/// split of x^2), asymptotic series beyond.
template <class Real>
Real erfcx(Real x) {
  const Real cutoff = std::numeric_limits<Real>::digits > 53 ? Real(100) : Real(26);
  if (x < cutoff) {
    const Real x2 = x * x;
    const Real lo = std::fma(x, x, -x2);
    return std::exp(x2) * std::erfc(x) * (Real(1) + lo);
  }
  // erfcx(x) ~ 1/(x sqrt(pi)) * sum_n (-1)^n (2n-1)!! / (2x^2)^n
  const Real inv2x2 = Real(1) / (Real(2) * x * x);
  Real term = 1, sum = 1;
  for (int n = 1; n < 12; ++n) {
    term *= -Real(2 * n - 1) * inv2x2;
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi_v<Real>));
}

/// Regularized lower incomplete gamma P(alpha, x) = gamma(alpha, x) / Gamma(alpha).
inline double reg_gamma_lower(double x, double alpha) {
  if (!(alpha > 0.0) || !(x >= 0.0)) {
    throw DomainError("reg_gamma_lower: requires x >= 0 and alpha > 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(alpha, x);
}

namespace detail {

// Stirling-series remainder ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)].
inline double stirling_error(double n) {
  constexpr double s0 = 1.0 / 12.0, s1 = 1.0 / 360.0, s2 = 1.0 / 1260.0,
                   s3 = 1.0 / 1680.0, s4 = 1.0 / 1188.0;
  if (n <= 15.0) {
    return std::lgamma(n + 1.0) - (n + 0.5) * std::log(n) + n - kLnSqrt2Pi;
  }
  const double nn = n * n;
  if (n > 500) return (s0 - s1 / nn) / n;
  if (n > 80) return (s0 - (s1 - s2 / nn) / nn) / n;
  if (n > 35) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

// Deviance term x ln(x/m) + m - x without cancellation near x = m.
inline double deviance_term(double x, double m) {
  if (std::abs(x - m) < 0.1 * (x + m)) {
    double v = (x - m) / (x + m);
    double s = (x - m) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / m) + m - x;
}

}  // namespace detail

/// log of the Poisson mass k -> mean^k e^{-mean} / k!, accurate for very
/// large k and mean (saddle-point form).
inline double poisson_log_pmf(double k, double mean) {
  if (mean == 0.0) return k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (k == 0.0) return -mean;
  return -detail::stirling_error(k) - detail::deviance_term(k, mean) -
         0.5 * std::log(2.0 * std::numbers::pi * k);
}

/// Degrees of freedom and noncentrality of a noncentral chi-squared law.
struct Ncx2Params {
  double dof = 1.0;
  double noncentrality = 0.0;

  void validate() const {
    if (!(dof > 0.0) || !(noncentrality >= 0.0) || std::isinf(dof)) {
      throw DomainError("Ncx2Params: requires dof > 0 and noncentrality >= 0");
    }
  }
  /// Bessel order dof/2 - 1 of the density.
  double bessel_order() const { return 0.5 * dof - 1.0; }
};

/// Noncentral chi-squared distribution function as a Poisson mixture of
/// central chi-squared (gamma) distribution functions.
///
/// The summation starts at the modal Poisson index and grows in whichever
/// direction has the heavier next weight until the unvisited Poisson mass
/// is below 1e-12. Every term is bounded by its weight, so the unvisited
/// mass bounds the truncation error.
inline double ncx2_cdf(double x, const Ncx2Params& p) {
  p.validate();
  if (!(x >= 0.0)) throw DomainError("ncx2_cdf: requires x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double half_x = 0.5 * x;
  const double shape = 0.5 * p.dof;
  if (p.noncentrality == 0.0) return reg_gamma_lower(half_x, shape);

  constexpr double kTailBound = 1e-12;
  const double lam = 0.5 * p.noncentrality;
  const double max_terms = 10.0 * p.noncentrality + 1000.0;

  const double k0 = std::floor(lam);
  const double w0 = std::exp(poisson_log_pmf(k0, lam));
  double sum = w0 * reg_gamma_lower(half_x, shape + k0);
  double mass = w0;

  double k_up = k0 + 1.0, w_up = w0 * lam / k_up;
  double k_dn = k0 - 1.0, w_dn = k0 > 0.0 ? w0 * k0 / lam : 0.0;
  double terms = 1.0;
  while (1.0 - mass >= kTailBound) {
    if (terms > max_terms) {
      throw ConvergenceError("ncx2_cdf: Poisson series did not reach its truncation bound");
    }
    if (k_dn >= 0.0 && w_dn >= w_up) {
      sum += w_dn * reg_gamma_lower(half_x, shape + k_dn);
      mass += w_dn;
      w_dn = k_dn > 0.0 ? w_dn * k_dn / lam : 0.0;
      k_dn -= 1.0;
    } else {
      if (w_up == 0.0) break;  // remaining upper weights underflowed
      sum += w_up * reg_gamma_lower(half_x, shape + k_up);
      mass += w_up;
      k_up += 1.0;
      w_up *= lam / k_up;
    }
    terms += 1.0;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// Modified Bessel function of the first kind by its power series.
/// Intended for moderate arguments (test support).
inline double bessel_i(double alpha, double z) {
  if (!(alpha > -1.0) || !(z >= 0.0)) {
    throw DomainError("bessel_i: requires alpha > -1 and z >= 0");
  }
  if (z == 0.0) {
    if (alpha == 0.0) return 1.0;
    if (alpha > 0.0) return 0.0;
    throw std::overflow_error("bessel_i: unbounded at z = 0 for alpha < 0");
  }
  if (z > 700.0) throw std::overflow_error("bessel_i: argument beyond representable range");
  const double half = 0.5 * z;
  const double q = half * half;
  double term = std::exp(alpha * std::log(half) - std::lgamma(alpha + 1.0));
  double sum = term;
  for (int k = 1; k < 100000; ++k) {
    term *= q / (k * (k + alpha));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  if (!std::isfinite(sum)) throw std::overflow_error("bessel_i: overflow");
  return sum;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
template <class Real, std::size_t N>
struct GaussLegendre {
  std::array<Real, N> nodes{};
  std::array<Real, N> weights{};

  GaussLegendre() {
    for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
      Real x = std::cos(std::numbers::pi_v<Real> * (Real(i) + Real(0.75)) / (Real(N) + Real(0.5)));
      Real dp = 0;
      for (int it = 0; it < 100; ++it) {
        Real p0 = 1, p1 = x;
        for (std::size_t n = 2; n <= N; ++n) {
          const Real p2 = ((2 * Real(n) - 1) * x * p1 - (Real(n) - 1) * p0) / Real(n);
          p0 = p1;
          p1 = p2;
        }
        dp = Real(N) * (x * p1 - p0) / (x * x - 1);
        const Real dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) <= 4 * std::numeric_limits<Real>::epsilon()) break;
      }
      // recompute derivative at the converged node
      Real p0 = 1, p1 = x;
      for (std::size_t n = 2; n <= N; ++n) {
        const Real p2 = ((2 * Real(n) - 1) * x * p1 - (Real(n) - 1) * p0) / Real(n);
        p0 = p1;
        p1 = p2;
      }
      dp = Real(N) * (x * p1 - p0) / (x * x - 1);
      const Real w = 2 / ((1 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = weights[N - 1 - i] = w;
    }
  }

  static const GaussLegendre& instance() {
    static const GaussLegendre rule;
    return rule;
  }
};

}  // namespace sabrmc
