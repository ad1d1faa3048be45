#pragma once

// Exact elementary variate generators on deterministic streams.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>

#include "sabrmc/error.hpp"
#include "sabrmc/numerics.hpp"
#include "sabrmc/rng.hpp"

namespace sabrmc {

/// Anything that yields 64 random bits and open-interval uniforms.
template <class G>
concept RandomSource = requires(G& g) {
  { g.next_u64() } -> std::same_as<std::uint64_t>;
  { g.uniform() } -> std::same_as<double>;
};

/// Intensity and shift of the shifted-Poisson law with mass
/// intensity^(shift+n) e^(-intensity) / Gamma(n + shift + 1), normalized by
/// P_G(intensity; shift).
struct SpParams {
  double intensity = 1.0;
  double shift = 1.0;

  void validate() const {
    if (!(intensity > 0.0) || !(shift > 0.0)) {
      throw DomainError("SpParams: requires intensity > 0 and shift > 0");
    }
  }
};

namespace detail {

// 128-layer ziggurat for the standard normal (Marsaglia & Tsang 2000, with
// independent bits for the layer index and the abscissa as in Doornik 2005).
struct ZigguratTables {
  static constexpr int kLayers = 128;
  static constexpr double kR = 3.442619855899;
  static constexpr double kArea = 9.91256303526217e-3;

  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kR * kR);
    x[0] = kArea / f;
    x[1] = kR;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kArea / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }

  static const ZigguratTables& instance() {
    static const ZigguratTables t;
    return t;
  }
};

template <class G>
[[gnu::noinline]] double sample_normal_slow(G& rng, int layer, double u) {
  const auto& zt = ZigguratTables::instance();
  for (;;) {
    if (layer == 0) {
      // tail beyond R (Marsaglia 1964)
      double x, y;
      do {
        x = std::log(rng.uniform()) / zt.kR;
        y = std::log(rng.uniform());
      } while (-2.0 * y < x * x);
      return u < 0.0 ? x - zt.kR : zt.kR - x;
    }
    const double xv = u * zt.x[layer];
    const double f0 = std::exp(-0.5 * (zt.x[layer] * zt.x[layer] - xv * xv));
    const double f1 = std::exp(-0.5 * (zt.x[layer + 1] * zt.x[layer + 1] - xv * xv));
    if (f1 + rng.uniform() * (f0 - f1) < 1.0) return xv;
    const std::uint64_t bits = rng.next_u64();
    layer = static_cast<int>(bits & 0x7F);
    u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-52 - 1.0;
    if (std::abs(u) < zt.ratio[layer]) return u * zt.x[layer];
  }
}

}  // namespace detail

/// Standard normal variate.
template <RandomSource G>
inline double sample_normal(G& rng) {
  const auto& zt = detail::ZigguratTables::instance();
  const std::uint64_t bits = rng.next_u64();
  const int layer = static_cast<int>(bits & 0x7F);
  // 53-bit signed abscissa in (-1, 1)
  const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-52 - 1.0;
  if (std::abs(u) < zt.ratio[layer]) [[likely]] return u * zt.x[layer];
  return detail::sample_normal_slow(rng, layer, u);
}

/// Unit-scale gamma variate (Marsaglia & Tsang squeeze; shape < 1 boosted
/// through G(shape + 1) U^(1/shape)).
template <RandomSource G>
double sample_gamma(G& rng, double shape) {
  if (!(shape > 0.0) || std::isinf(shape)) throw DomainError("sample_gamma: requires shape > 0");
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0);
    return g * std::exp(std::log(rng.uniform()) / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// Poisson variate. Inversion for mean < 10, otherwise Hormann's
/// transformed rejection (PTRS); both exact.
template <RandomSource G>
std::int64_t sample_poisson(G& rng, double mean) {
  if (!(mean >= 0.0) || std::isinf(mean)) throw DomainError("sample_poisson: requires mean >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double u = rng.uniform();
    std::int64_t k = 0;
    double p = std::exp(-mean);
    double cdf = p;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      if (p == 0.0) break;
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    if (lhs <= poisson_log_pmf(k, mean)) return static_cast<std::int64_t>(k);
  }
}

/// Shifted-Poisson variate by the gamma-mixture representation: draw
/// X ~ G(shift) conditioned on X < intensity, then return
/// Poisson(intensity - X).
///
/// The conditioned gamma is drawn by plain rejection from G(shift), whose
/// acceptance is P_G(intensity; shift), or from the power proposal
/// intensity * U^(1/shift) accepted with probability e^(-X), whichever has
/// the higher acceptance rate. Both are exact.
template <RandomSource G>
std::int64_t sample_shifted_poisson(G& rng, const SpParams& p) {
  p.validate();
  const bool power_proposal = p.shift * std::log(p.intensity) < std::lgamma(p.shift + 1.0);
  for (;;) {
    double x;
    if (power_proposal) {
      x = p.intensity * std::exp(std::log(rng.uniform()) / p.shift);
      if (-std::log(rng.uniform()) < x) continue;
    } else {
      x = sample_gamma(rng, p.shift);
      if (!(x < p.intensity)) continue;
    }
    return sample_poisson(rng, p.intensity - x);
  }
}

/// One gamma draw X ~ G(shape); the value if X < bound, empty otherwise.
/// The empty outcome has probability 1 - P_G(bound; shape).
template <RandomSource G>
std::optional<double> sample_gamma_conditional_lt(G& rng, double shape, double bound) {
  if (!(bound > 0.0)) throw DomainError("sample_gamma_conditional_lt: requires bound > 0");
  const double x = sample_gamma(rng, shape);
  if (x < bound) return x;
  return std::nullopt;
}

}  // namespace sabrmc
