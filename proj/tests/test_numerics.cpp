#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "sabrmc/numerics.hpp"

using namespace sabrmc;

namespace {

// Brute-force NCX2 distribution function: 10^4 Poisson-weighted gamma
// terms with weights from lgamma directly, no truncation logic.
double ncx2_cdf_brute(double x, double dof, double r) {
  double sum = 0.0;
  const double lam = 0.5 * r;
  for (int k = 0; k < 10000; ++k) {
    const double w = std::exp(-lam + k * std::log(lam) - std::lgamma(k + 1.0));
    if (w == 0.0 && k > lam) break;
    sum += w * reg_gamma_lower(0.5 * x, 0.5 * dof + k);
  }
  return sum;
}

double ncx2_pdf_bessel(double x, double dof, double r) {
  const double alpha = 0.5 * dof - 1.0;
  return 0.5 * std::pow(x / r, 0.5 * alpha) * bessel_i(alpha, std::sqrt(x * r)) *
         std::exp(-0.5 * (x + r));
}

double gamma_pdf(double x, double shape) {
  return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
}

}  // namespace

TEST(NormPdf, KnownValues) {
  EXPECT_DOUBLE_EQ(norm_pdf(0.0), 0.3989422804014327);
  EXPECT_NEAR(norm_pdf(1.0), 0.24197072451914337, 1e-17);
  for (double z : {0.3, 1.7, 4.2, 9.0}) EXPECT_EQ(norm_pdf(z), norm_pdf(-z));
}

TEST(NormCdf, KnownValuesAndLimits) {
  EXPECT_EQ(norm_cdf(0.0), 0.5);
  EXPECT_EQ(norm_cdf(INFINITY), 1.0);
  EXPECT_EQ(norm_cdf(-INFINITY), 0.0);
  // mpmath, 40 digits
  EXPECT_NEAR(norm_cdf(1.96), 0.97500210485177956586, 1e-15);
}

TEST(NormCdf, SymmetryAndMonotone) {
  double prev = 0.0;
  for (double z = -12.0; z <= 12.0; z += 0.01) {
    EXPECT_NEAR(norm_cdf(z) + norm_cdf(-z), 1.0, 1e-15);
    const double c = norm_cdf(z);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(Erfcx, MatchesDirectProductAndAsymptote) {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.0, 5.0, 10.0, 20.0}) {
    const double direct = std::exp(x * x) * std::erfc(x);
    EXPECT_NEAR(erfcx(x) / direct, 1.0, 1e-13) << x;
  }
  // asymptotic branch against the extended-precision direct product
  EXPECT_NEAR(erfcx(26.0) / static_cast<double>(erfcx(26.0L)), 1.0, 1e-14);
  EXPECT_NEAR(erfcx(1e3) * 1e3 * std::sqrt(std::numbers::pi), 1.0, 1e-6);
  EXPECT_NEAR(erfcx(30.0L) / erfcx(30.0), 1.0, 1e-14);
}

TEST(RegGammaLower, KnownValues) {
  EXPECT_EQ(reg_gamma_lower(0.0, 2.5), 0.0);
  EXPECT_NEAR(reg_gamma_lower(1.0, 1.0), 0.6321205588285577, 1e-15);
  const double median_ish = reg_gamma_lower(10.0, 10.0);
  EXPECT_GT(median_ish, 0.4);
  EXPECT_LT(median_ish, 0.6);
  EXPECT_NEAR(median_ish, 0.54207028552814779, 1e-14);  // mpmath
}

TEST(RegGammaLower, DomainErrors) {
  EXPECT_THROW(reg_gamma_lower(-1.0, 1.0), DomainError);
  EXPECT_THROW(reg_gamma_lower(1.0, 0.0), DomainError);
  EXPECT_THROW(reg_gamma_lower(1.0, -2.0), DomainError);
}

TEST(RegGammaLower, MonotoneAndRecurrence) {
  for (double alpha : {0.3, 0.625, 1.0, 2.5, 17.0, 250.0}) {
    double prev = 0.0;
    for (double x = 0.0; x < 3.0 * alpha + 20.0; x += 0.05 * (1.0 + alpha / 10.0)) {
      const double p = reg_gamma_lower(x, alpha);
      EXPECT_GE(p, prev);
      prev = p;
      if (x > 0.0) {
        const double step = std::exp(alpha * std::log(x) - x - std::lgamma(alpha + 1.0));
        EXPECT_NEAR(reg_gamma_lower(x, alpha + 1.0), p - step, 1e-12);
      }
    }
  }
}

TEST(RegGammaLower, LargeShapeRelativeAccuracy) {
  // Wilson-Hilferty is too crude; compare against the Poisson identity
  // P(n, x) = 1 - sum_{k<n} Pois(k; x) for integer n.
  const double n = 1e6, x = 1e6 - 500.0;
  double tail = 0.0;
  for (double k = n - 1.0; k >= 0.0; k -= 1.0) {
    const double w = std::exp(poisson_log_pmf(k, x));
    tail += w;
    if (w < 1e-30 && k < x) break;
  }
  EXPECT_NEAR(reg_gamma_lower(x, n) / (1.0 - tail), 1.0, 1e-10);
}

TEST(PoissonLogPmf, MatchesLgammaForm) {
  for (double mean : {0.5, 3.0, 40.0, 1e4}) {
    for (double k : {0.0, 1.0, 7.0, 39.0, 10050.0}) {
      const double direct = -mean + k * std::log(mean) - std::lgamma(k + 1.0);
      EXPECT_NEAR(poisson_log_pmf(k, mean), direct, 1e-9 * (1.0 + std::abs(direct)));
    }
  }
}

TEST(Ncx2Cdf, CentralCaseIsGamma) {
  for (double dof : {0.5, 1.0, 1.4285714, 3.0, 10.0}) {
    for (double x : {0.01, 0.5, 2.0, 7.5, 30.0}) {
      EXPECT_NEAR(ncx2_cdf(x, {dof, 0.0}), reg_gamma_lower(0.5 * x, 0.5 * dof), 1e-12);
    }
  }
}

TEST(Ncx2Cdf, ZeroArgumentAndDomain) {
  EXPECT_EQ(ncx2_cdf(0.0, {1.5, 3.0}), 0.0);
  EXPECT_THROW(ncx2_cdf(-1.0, {1.5, 3.0}), DomainError);
  EXPECT_THROW(ncx2_cdf(1.0, {0.0, 3.0}), DomainError);
  EXPECT_THROW(ncx2_cdf(1.0, {1.0, -3.0}), DomainError);
}

TEST(Ncx2Cdf, MatchesBruteForceSeries) {
  EXPECT_NEAR(ncx2_cdf(2.0, {1.5, 3.0}), ncx2_cdf_brute(2.0, 1.5, 3.0), 1e-10);
  EXPECT_NEAR(ncx2_cdf(2.0, {1.5, 3.0}), 0.31043313688693757537, 1e-12);  // mpmath
  for (double r : {0.1, 1.0, 25.0, 400.0}) {
    for (double x : {0.3, 5.0, 50.0, 420.0}) {
      EXPECT_NEAR(ncx2_cdf(x, {2.857, r}), ncx2_cdf_brute(x, 2.857, r), 1e-10) << x << " " << r;
    }
  }
}

TEST(Ncx2Cdf, MonotoneInArgumentDecreasingInNoncentrality) {
  const double dof = 1.0 / 0.7;
  double prev = 0.0;
  for (double x = 0.0; x < 60.0; x += 0.25) {
    const double c = ncx2_cdf(x, {dof, 12.0});
    EXPECT_GE(c, prev - 1e-15);
    prev = c;
  }
  for (double x : {1.0, 10.0, 40.0}) {
    double prev_r = 1.0;
    for (double r = 0.0; r < 100.0; r += 2.5) {
      const double c = ncx2_cdf(x, {dof, r});
      EXPECT_LE(c, prev_r + 1e-15);
      prev_r = c;
    }
  }
}

TEST(Ncx2Cdf, LargeNoncentralityStaysAccurate) {
  // Mean dof + r, variance 2(dof + 2r); the CDF at the mean is near 1/2.
  const double r = 2.0e5;
  const double c = ncx2_cdf(r + 1.5, {1.5, r});
  EXPECT_GT(c, 0.45);
  EXPECT_LT(c, 0.55);
}

TEST(BesselI, ZeroArgument) {
  EXPECT_EQ(bessel_i(0.0, 0.0), 1.0);
  EXPECT_EQ(bessel_i(1.7, 0.0), 0.0);
}

TEST(BesselI, HalfIntegerClosedForm) {
  for (double z : {0.1, 1.0, 3.0, 12.0}) {
    const double closed = std::sqrt(2.0 / (std::numbers::pi * z)) * std::sinh(z);
    EXPECT_NEAR(bessel_i(0.5, z) / closed, 1.0, 1e-14) << z;
  }
  EXPECT_NEAR(bessel_i(0.5, 1.0), 0.93767488824548765, 1e-15);
}

TEST(BesselI, Overflow) { EXPECT_THROW(bessel_i(0.0, 1e4), std::overflow_error); }

// The CEV transition density expressed through the Bessel function equals
// the shifted-Poisson mixture of gamma densities, pointwise.
TEST(Ncx2Density, ShiftedPoissonMixtureIdentity) {
  for (double beta_star : {0.3, 0.5, 0.7, 0.9}) {
    const double alpha = 1.0 / (2.0 * beta_star);
    for (double z0 : {0.5, 3.0, 14.0}) {
      const double lam = 0.5 * z0;
      const double accept = reg_gamma_lower(lam, alpha);
      for (double zt : {0.05, 1.0, 6.0, 25.0}) {
        const double lhs = ncx2_pdf_bessel(z0, 1.0 / beta_star + 2.0, zt);
        double rhs = 0.0;
        for (int k = 0; k < 400; ++k) {
          const double sp = std::exp((alpha + k) * std::log(lam) - lam - std::lgamma(k + alpha + 1.0)) / accept;
          rhs += sp * 0.5 * gamma_pdf(0.5 * zt, k + 1.0);
        }
        rhs *= accept;
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, lhs)) << beta_star << " " << z0 << " " << zt;
      }
    }
  }
}

TEST(GaussLegendre, IntegratesPolynomialsAndExponential) {
  const auto& gl = GaussLegendre<long double, 20>::instance();
  long double s0 = 0, s38 = 0, se = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    s0 += gl.weights[i];
    s38 += gl.weights[i] * std::pow(gl.nodes[i], 38);
    se += gl.weights[i] * std::exp(gl.nodes[i]);
  }
  EXPECT_NEAR(static_cast<double>(s0), 2.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(s38), 2.0 / 39.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(se), std::exp(1.0) - std::exp(-1.0), 1e-15);
}
