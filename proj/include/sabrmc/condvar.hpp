#pragma once

// Conditional average variance I = int_0^1 exp(2 nu_hat Z_s) ds of a
// Brownian bridge Z from 0 to z_hat: exact moments, shape statistics,
// shifted-lognormal fits and sampling.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "sabrmc/error.hpp"
#include "sabrmc/numerics.hpp"
#include "sabrmc/parallel.hpp"
#include "sabrmc/rng.hpp"
#include "sabrmc/sampling.hpp"

namespace sabrmc {

/// Per-step log-volatility scale nu_hat = nu sqrt(h) and the conditioning
/// variate z_hat = ln(sigma_{t+h} / sigma_t) / nu_hat.
struct CondVarInputs {
  double nu_hat = 0.1;
  double z_hat = 0.0;

  static CondVarInputs from_vol_ratio(double nu_hat, double vol_ratio) {
    if (!(vol_ratio > 0.0)) throw DomainError("CondVarInputs: vol_ratio must be positive");
    return {nu_hat, std::log(vol_ratio) / nu_hat};
  }
  double vol_ratio() const { return std::exp(nu_hat * z_hat); }

  void validate() const {
    if (!(nu_hat > 0.0) || !std::isfinite(nu_hat) || !std::isfinite(z_hat)) {
      throw DomainError("CondVarInputs: requires nu_hat > 0 and finite z_hat");
    }
  }
};

/// Raw moments of I and the derived coefficient of variation, skewness and
/// excess kurtosis.
struct MomentSet {
  double mu = 1.0;
  double mu2p = 1.0;
  double mu3p = 1.0;
  double mu4p = 1.0;
  double cv = 0.0;
  double skew = 0.0;
  double exkurt = 0.0;

  double variance() const { return cv * cv * mu * mu; }
};

struct ShapeStats {
  double cv = 0.0;
  double skew = 0.0;
  double exkurt = 0.0;
};

/// Shifted lognormal mean * [(1 - weight) + weight * exp(log_sd X - log_sd^2 / 2)].
/// log_sd = 0 is the degenerate constant law.
struct SlnParams {
  double mean = 1.0;
  double log_sd = 0.0;
  double weight = 1.0;

  /// w = exp(log_sd^2) - 1
  double w() const { return std::expm1(log_sd * log_sd); }

  void validate() const {
    if (!(mean > 0.0) || !(log_sd >= 0.0) || !(weight > 0.0 && weight <= 1.0)) {
      throw DomainError("SlnParams: requires mean > 0, log_sd >= 0, 0 < weight <= 1");
    }
  }
};

/// Result of the three-moment fit. `clamped` is set when the exact fit would
/// need weight > 1 and a plain lognormal matching mean and cv was returned.
struct SlnFit {
  SlnParams params;
  bool clamped = false;
};

namespace detail {

inline constexpr double kSqrt2Pi = 2.50662827463100050242;

// e^{a^2/2} sum_j He_{2j}(z) a^{2j} / (2j+1)!, the small-a expansion of
// (1/2) int_{-1}^{1} exp(a^2 (1 - u^2) / 2 - z a u) du.
inline double mk_series(double a, double z) {
  double he0 = 1.0, he1 = z;  // He_{n-2}, He_{n-1}
  double pw = 1.0;             // a^n / (n+1)!
  double sum = 1.0;
  for (int n = 2; n <= 40; n += 2) {
    const double he_n = z * he1 - (n - 1) * he0;
    he1 = z * he_n - n * he1;
    he0 = he_n;
    pw *= a * a / (n * (n + 1.0));
    const double term = he_n * pw;
    sum += term;
    if (n > 6 && std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return std::exp(0.5 * a * a) * sum;
}

// Closed form through erfcx, valid for z >= 0:
// sqrt(2 pi)/(4a) [erfcx((z-a)/sqrt2) e^{za} - erfcx((z+a)/sqrt2) e^{-za}].
inline double mk_erfcx(double a, double z) {
  constexpr double s = 0.70710678118654752440;
  return kSqrt2Pi / (4.0 * a) *
         (erfcx((z - a) * s) * std::exp(z * a) - erfcx((z + a) * s) * std::exp(-z * a));
}

// Direct form [N(z+a) - N(z-a)] / (2a n(sqrt(z^2+a^2))) at any precision.
template <class Real>
Real mk_direct(const Real& a, const Real& z) {
  using std::exp;
  using std::sqrt;
  const Real r2 = sqrt(Real(2));
  const Real num = (boost::math::erfc(-(z + a) / r2) - boost::math::erfc(-(z - a) / r2)) / 2;
  const Real den = 2 * a * exp(-(z * z + a * a) / 2) / sqrt(2 * boost::math::constants::pi<Real>());
  return num / den;
}

// Higher-order small-time expansions of v, s, kappa in a = nu_hat.
inline ShapeStats small_time_series(double a, double z) {
  constexpr double r3 = 1.73205080756887729353;
  const double a2 = a * a, z2 = z * z, z4 = z2 * z2, z6 = z4 * z2, z8 = z4 * z4;
  const double v2 =
      a2 * (1.0 / 3.0 +
            a2 * ((2.0 / 15.0 - z2 / 45.0) +
                  a2 * ((2.0 * z4 / 945.0 - 4.0 * z2 / 315.0 + 34.0 / 945.0) +
                        a2 * ((-z6 / 4725.0 + 2.0 * z4 / 1575.0 - 2.0 * z2 / 675.0 + 22.0 / 2835.0) +
                              a2 * (2.0 * z8 / 93555.0 - 4.0 * z6 / 31185.0 + 2.0 * z4 / 17325.0 -
                                    284.0 * z2 / 467775.0 + 218.0 / 155925.0)))));
  const double s =
      r3 * a *
      (6.0 / 5.0 +
       a2 * ((-17.0 * z2 / 525.0 + 716.0 / 1575.0) +
             a2 * ((z4 / 420.0 - 38.0 * z2 / 1575.0 + 277.0 / 1575.0) +
                   a2 * (-1003.0 * z6 / 4851000.0 + 829.0 * z4 / 519750.0 - 37033.0 * z2 / 3638250.0 +
                         107594.0 / 1819125.0))));
  const double k =
      a2 * (276.0 / 35.0 +
            a2 * ((1264.0 / 175.0 - 72.0 * z2 / 175.0) +
                  a2 * (7088.0 * z4 / 202125.0 - 38816.0 * z2 / 67375.0 + 208888.0 / 40425.0)));
  return {std::sqrt(v2), s, k};
}

inline MomentSet from_shape(double mu, const ShapeStats& st) {
  MomentSet m;
  m.mu = mu;
  m.cv = st.cv;
  m.skew = st.skew;
  m.exkurt = st.exkurt;
  const double sd = st.cv * mu;
  const double var = sd * sd;
  m.mu2p = mu * mu + var;
  const double c3 = st.skew * var * sd;
  const double c4 = (st.exkurt + 3.0) * var * var;
  m.mu3p = c3 + 3.0 * mu * m.mu2p - 2.0 * mu * mu * mu;
  m.mu4p = c4 + 4.0 * mu * m.mu3p - 6.0 * mu * mu * m.mu2p + 3.0 * mu * mu * mu * mu;
  return m;
}

}  // namespace detail

/// m_k = [N(z+k nu_hat) - N(z-k nu_hat)] / (2 k nu_hat n(sqrt(z^2 + (k nu_hat)^2))).
///
/// Even in z_hat. Evaluated through erfcx so both far tails stay finite,
/// and by its power series when k nu_hat max(1, |z_hat|) <= 0.05.
inline double m_k(const CondVarInputs& in, int k) {
  in.validate();
  if (k < 1 || k > 4) throw DomainError("m_k: k must be in 1..4");
  const double a = k * in.nu_hat;
  const double z = std::abs(in.z_hat);
  if (a * std::max(1.0, z) <= 0.05) return detail::mk_series(a, z);
  return detail::mk_erfcx(a, z);
}

/// Leading small-time terms (nu_hat/sqrt3, 6 sqrt3 nu_hat/5, 276 nu_hat^2/35).
inline ShapeStats small_time_stats(double nu_hat) {
  if (!(nu_hat > 0.0)) throw DomainError("small_time_stats: requires nu_hat > 0");
  constexpr double r3 = 1.73205080756887729353;
  return {nu_hat / r3, 6.0 * r3 / 5.0 * nu_hat, 276.0 / 35.0 * nu_hat * nu_hat};
}

/// Exact conditional moments of I.
///
/// The closed form is evaluated in 50-digit arithmetic, which keeps the
/// cancelling brackets accurate to below double rounding down to
/// nu_hat = 0.005; below that the shape statistics come from their
/// small-time expansions carried to high order.
inline MomentSet cond_moments(const CondVarInputs& in) {
  in.validate();
  constexpr double kSeriesBelow = 0.005;
  if (in.nu_hat < kSeriesBelow) {
    const double mu = in.vol_ratio() * m_k(in, 1);
    return detail::from_shape(mu, detail::small_time_series(in.nu_hat, in.z_hat));
  }
  using Real = boost::multiprecision::cpp_bin_float_50;
  const Real a = in.nu_hat;
  const Real z = in.z_hat;
  std::array<Real, 5> m;
  for (int k = 1; k <= 4; ++k) m[k] = detail::mk_direct<Real>(k * a, z);
  const Real c = cosh(a * z);
  const Real r = exp(a * z);
  const Real a2 = a * a;
  const Real mu = r * m[1];
  const Real mu2 = r * r * (m[2] - c * m[1]) / a2;
  const Real mu3 = r * r * r * (3 * m[3] - 8 * c * m[2] + (4 * c * c + 1) * m[1]) / (8 * a2 * a2);
  const Real mu4 = r * r * r * r *
                   (2 * m[4] - 9 * c * m[3] + (12 * c * c + 2) * m[2] - c * (4 * c * c + 3) * m[1]) /
                   (24 * a2 * a2 * a2);
  const Real var = mu2 - mu * mu;
  const Real c3 = mu3 - 3 * mu * mu2 + 2 * mu * mu * mu;
  const Real c4 = mu4 - 4 * mu * mu3 + 6 * mu * mu * mu2 - 3 * mu * mu * mu * mu;
  if (!(var > 0) || !(c3 > 0) || !(c4 > 0)) {
    throw ConvergenceError("cond_moments: moment bracket lost precision");
  }
  MomentSet out;
  out.mu = static_cast<double>(mu);
  out.mu2p = static_cast<double>(mu2);
  out.mu3p = static_cast<double>(mu3);
  out.mu4p = static_cast<double>(mu4);
  out.cv = static_cast<double>(sqrt(var) / mu);
  out.skew = static_cast<double>(c3 / (var * sqrt(var)));
  out.exkurt = static_cast<double>(c4 / (var * var) - 3);
  return out;
}

/// Mean, cv and skewness of I in double precision for the simulation hot
/// path. The closed form is used for cv when nu_hat >= 0.05 and for the
/// skewness when nu_hat >= 0.1; the expansions below those.
struct FastStats {
  double mu = 1.0;
  double cv = 0.0;
  double skew = 0.0;
};

inline FastStats fast_stats(double nu_hat, double z_hat, bool with_skew = false) {
  const double a = nu_hat;
  const double za = std::abs(z_hat);
  const double ratio = std::exp(a * z_hat);
  if (a < 0.05) {
    const double m1 = a * std::max(1.0, za) <= 0.05 ? detail::mk_series(a, za) : detail::mk_erfcx(a, za);
    const auto st = detail::small_time_series(a, z_hat);
    return {ratio * m1, st.cv, with_skew ? st.skew : 0.0};
  }
  const double m1 = detail::mk_erfcx(a, za);
  const double m2 = detail::mk_erfcx(2.0 * a, za);
  const double c = std::cosh(a * z_hat);
  const double r2 = (m2 - c * m1) / (a * a);
  const double var = r2 - m1 * m1;
  FastStats out{ratio * m1, std::sqrt(var) / m1, 0.0};
  if (!with_skew) return out;
  if (a < 0.1) {
    out.skew = detail::small_time_series(a, z_hat).skew;
  } else {
    const double m3 = detail::mk_erfcx(3.0 * a, za);
    const double r3 = (3.0 * m3 - 8.0 * c * m2 + (4.0 * c * c + 1.0) * m1) / (8.0 * a * a * a * a);
    const double c3 = r3 - 3.0 * m1 * r2 + 2.0 * m1 * m1 * m1;
    out.skew = c3 / (var * std::sqrt(var));
  }
  return out;
}

/// Analytic cv, skewness and excess kurtosis of a shifted lognormal.
inline ShapeStats sln_moments(const SlnParams& p) {
  const double w = p.w();
  const double sw = std::sqrt(w);
  return {p.weight * sw, sw * (w + 3.0), w * (w * w * w + 6.0 * w * w + 15.0 * w + 16.0)};
}

/// Exact shifted-lognormal fit to (mean, cv, skew).
///
/// The lognormal skewness equation s^2 = w (w + 3)^2 is solved by
/// w = 4 sinh^2(arcosh(1 + s^2/2) / 6); the weight then matches cv.
/// Weight > 1 is infeasible and degrades to the lognormal matching mean and
/// cv. Nonpositive cv or skew gives the constant law at the mean.
inline SlnFit sln_fit_three_moments(double mean, double cv, double skew) {
  if (!(mean > 0.0)) throw DomainError("sln_fit_three_moments: requires mean > 0");
  if (!(cv > 0.0) || !(skew > 0.0)) return {{mean, 0.0, 1.0}, false};
  const double x = 0.5 * skew * skew;
  const double theta = std::log1p(x + std::sqrt(x * (x + 2.0)));
  const double two_sh = 2.0 * std::sinh(theta / 6.0);
  const double weight = cv / two_sh;
  if (weight > 1.0) return {{mean, std::sqrt(std::log1p(cv * cv)), 1.0}, true};
  return {{mean, std::sqrt(std::log1p(two_sh * two_sh)), weight}, false};
}

/// Small-time fit with weight 5/6 matching mean and cv.
inline SlnParams sln_fit_small_time(double mean, double cv) {
  if (!(mean > 0.0) || !(cv >= 0.0)) throw DomainError("sln_fit_small_time: requires mean > 0, cv >= 0");
  return {mean, std::sqrt(std::log1p(1.44 * cv * cv)), 5.0 / 6.0};
}

inline SlnParams sln_fit_small_time(const MomentSet& m) { return sln_fit_small_time(m.mu, m.cv); }

/// One draw of mean * [(1 - weight) + weight * exp(log_sd X - log_sd^2/2)].
template <RandomSource G>
double sample_avg_var(G& rng, const SlnParams& p) {
  const double x = sample_normal(rng);
  return p.mean * ((1.0 - p.weight) + p.weight * std::exp(p.log_sd * (x - 0.5 * p.log_sd)));
}

/// Monte Carlo raw moments with standard errors.
struct OracleMoments {
  std::array<double, 4> raw{};
  std::array<double, 4> std_error{};
};

namespace detail {

// exp for |x| <= 700 written without branches or library calls so loops over
// it vectorize: x = k ln2 + r, |r| <= ln2/2, degree-11 Taylor in r.
inline double exp_branchless(double x) {
  constexpr double kLog2e = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kShifter = 0x1.8p52;
  double kd = x * kLog2e + kShifter;
  const std::uint64_t ki = std::bit_cast<std::uint64_t>(kd);
  kd -= kShifter;
  const double r = x - kd * kLn2Hi - kd * kLn2Lo;
  double p = 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return p * std::bit_cast<double>((ki + 1023) << 52);
}

// Standard normals for every entry of out: one ziggurat candidate per word of
// a bulk draw, rejected candidates finished by the slow path.
template <class G>
void fill_normal(G& rng, std::span<double> out, std::vector<std::uint64_t>& bits) {
  const auto& zt = ZigguratTables::instance();
  bits.resize(out.size());
  rng.fill(bits);
  const double* xs = zt.x.data();
  const double* ratio = zt.ratio.data();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const int layer = static_cast<int>(bits[j] & 0x7F);
    const double u = (static_cast<double>(bits[j] >> 11) + 0.5) * 0x1.0p-52 - 1.0;
    out[j] = std::abs(u) < ratio[layer] ? u * xs[layer] : sample_normal_slow(rng, layer, u);
  }
}

// sum_{j=0}^{n} e[j] q^j with 32 interleaved partial sums.
inline double geometric_weighted_sum(std::span<const double> e, double q) {
  constexpr std::size_t kLanes = 32;
  alignas(64) double pw[kLanes], acc[kLanes];
  pw[0] = 1.0;
  for (std::size_t l = 1; l < kLanes; ++l) pw[l] = pw[l - 1] * q;
  const double step = pw[kLanes - 1] * q;
  for (std::size_t l = 0; l < kLanes; ++l) acc[l] = 0.0;
  const double* p = e.data();
  const std::size_t blocks = e.size() / kLanes;
  for (std::size_t blk = 0; blk < blocks; ++blk, p += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] += p[l] * pw[l];
      pw[l] *= step;
    }
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < e.size() - blocks * kLanes; ++l) sum += p[l] * pw[l];
  for (std::size_t l = 0; l < kLanes; ++l) sum += acc[l];
  return sum;
}

}  // namespace detail

/// Brownian-bridge Monte Carlo estimates of E[I^k | z_hat], k = 1..4, for
/// every point of a grid, with all points sharing the same bridges.
///
/// Bridge b uses stream (seed, b). Each bridge is one path W on n_steps
/// steps; B_u = W_u - u W_1 and the integrand exp(2 nu_hat (B_u + u z_hat))
/// = exp(2 nu_hat W_u) q^j, q = exp(2 nu_hat du (z_hat - W_1)), is
/// integrated by the trapezoidal rule. Results do not depend on the thread
/// count.
inline std::vector<OracleMoments> bridge_moment_oracle_grid(std::span<const CondVarInputs> points,
                                                            int n_steps, std::int64_t n_paths,
                                                            std::uint64_t seed, unsigned threads = 0) {
  if (n_steps < 1000 || n_paths < 100000) {
    throw DomainError("bridge_moment_oracle: requires n_steps >= 1000 and n_paths >= 100000");
  }
  for (const auto& p : points) p.validate();

  std::vector<double> nus;
  for (const auto& p : points) nus.push_back(p.nu_hat);
  std::sort(nus.begin(), nus.end());
  nus.erase(std::unique(nus.begin(), nus.end()), nus.end());
  const auto index_of = [&](double nu) {
    return static_cast<std::size_t>(std::find(nus.begin(), nus.end(), nu) - nus.begin());
  };
  std::vector<std::size_t> nu_index(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) nu_index[i] = index_of(points[i].nu_hat);
  // exp(2 nu W) is the square of exp(nu W) when nu / 2 is also on the grid
  std::vector<std::size_t> half(nus.size());
  for (std::size_t v = 0; v < nus.size(); ++v) half[v] = index_of(0.5 * nus[v]);

  const std::size_t n = static_cast<std::size_t>(n_steps);
  const double du = 1.0 / static_cast<double>(n_steps);
  const double sdu = std::sqrt(du);
  constexpr std::size_t kChunk = 2048;
  const std::size_t n_chunks = (static_cast<std::size_t>(n_paths) + kChunk - 1) / kChunk;
  // per chunk, per point: sums of I^k for k = 1..8
  std::vector<std::array<double, 8>> partial(n_chunks * points.size());

  parallel_chunks(static_cast<std::size_t>(n_paths), kChunk, threads,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::vector<std::uint64_t> bits;
    std::vector<double> w(n + 1);
    std::vector<double> level(nus.size() * (n + 1));
    for (std::size_t b = begin; b < end; ++b) {
      RngStream rng(seed, b);
      detail::fill_normal(rng, std::span(w).subspan(1), bits);
      w[0] = 0.0;
      double max_abs = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        w[j] = w[j - 1] + sdu * w[j];
        max_abs = std::max(max_abs, std::abs(w[j]));
      }
      for (std::size_t v = 0; v < nus.size(); ++v) {
        const double c = 2.0 * nus[v];
        double* e = &level[v * (n + 1)];
        if (half[v] < v) {
          const double* h = &level[half[v] * (n + 1)];
          for (std::size_t j = 0; j <= n; ++j) e[j] = h[j] * h[j];
        } else if (c * max_abs < 700.0) {
          for (std::size_t j = 0; j <= n; ++j) e[j] = detail::exp_branchless(c * w[j]);
        } else {
          for (std::size_t j = 0; j <= n; ++j) e[j] = std::exp(c * w[j]);
        }
      }
      for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t v = nu_index[i];
        const double c = 2.0 * nus[v];
        const double q = std::exp(c * du * (points[i].z_hat - w[n]));
        const std::span<const double> e(&level[v * (n + 1)], n + 1);
        const double ends = 0.5 * (e[0] + e[n] * std::exp(c * (points[i].z_hat - w[n])));
        const double integral = (detail::geometric_weighted_sum(e, q) - ends) * du;
        auto& s = partial[chunk * points.size() + i];
        double p = 1.0;
        for (int k = 0; k < 8; ++k) {
          p *= integral;
          s[k] += p;
        }
      }
    }
  });

  std::vector<OracleMoments> out(points.size());
  const double np = static_cast<double>(n_paths);
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::array<double, 8> total{};
    for (std::size_t c = 0; c < n_chunks; ++c) {
      for (int k = 0; k < 8; ++k) total[k] += partial[c * points.size() + i][k];
    }
    for (int k = 0; k < 4; ++k) {
      const double m = total[k] / np;
      const double m2 = total[2 * k + 1] / np;
      out[i].raw[k] = m;
      out[i].std_error[k] = std::sqrt(std::max(0.0, m2 - m * m) / (np - 1.0));
    }
  }
  return out;
}

/// Single-point bridge oracle.
inline OracleMoments bridge_moment_oracle(double nu_hat, double z_hat, int n_steps, std::int64_t n_paths,
                                          std::uint64_t seed, unsigned threads = 0) {
  const CondVarInputs p{nu_hat, z_hat};
  return bridge_moment_oracle_grid(std::span(&p, 1), n_steps, n_paths, seed, threads).front();
}

}  // namespace sabrmc
