#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "sabrmc/condvar.hpp"
#include "sabrmc/rng.hpp"

using namespace sabrmc;

namespace {

// E[I^k | z] as a k-fold integral of the Gaussian moment generating function
// of the bridge, cov(Z_u, Z_w) = min(u, w) - u w, over the ordered simplex
// u_1 < ... < u_k (times k!), mapped from the cube so the integrand is smooth.
long double bridge_moment_quadrature(int k, long double a, long double z) {
  const auto& gl = GaussLegendre<long double, 24>::instance();
  std::vector<std::size_t> idx(k, 0);
  long double total = 0;
  for (;;) {
    // t_1..t_k in (0,1); u_k = t_1, u_{k-1} = t_1 t_2, ...
    std::vector<long double> u(k);
    long double weight = 1, prod = 1;
    for (int d = 0; d < k; ++d) {
      const long double t = 0.5L * (gl.nodes[idx[d]] + 1);
      weight *= 0.5L * gl.weights[idx[d]] * prod;  // Jacobian t_1^{k-1} t_2^{k-2} ...
      prod *= t;
      u[k - 1 - d] = prod;
    }
    long double mean = 0, var = 0;
    for (int i = 0; i < k; ++i) {
      mean += u[i] * z;
      for (int j = 0; j < k; ++j) var += std::min(u[i], u[j]) - u[i] * u[j];
    }
    total += weight * std::exp(2 * a * mean + 2 * a * a * var);
    int d = 0;
    while (d < k && ++idx[d] == 24) idx[d++] = 0;
    if (d == k) break;
  }
  long double fact = 1;
  for (int i = 2; i <= k; ++i) fact *= i;
  return fact * total;
}

struct Frozen {
  double nu, z;
  double m[7];  // mu, mu2p, mu3p, mu4p, cv, skew, exkurt
};

// 60-digit evaluation of the closed form (mpmath).
const Frozen kFrozen[] = {
    {0.4, 1, {1.6154055110623320589, 2.7564145385770818331, 4.9768641198621907805, 9.5260249724432308229, 0.23724613229984008698, 0.88107122297710284901, 1.4569530354648491912}},
    {0.01, 0, {1.0000333340000095239, 1.0001000060002698511, 1.0002000233353652238, 1.0003333966755565712, 0.0057736181639112817296, 0.020785397117085347145, 0.00078864366231046823478}},
    {0.6, 0.5, {1.5460092474780050461, 2.7205196214232827722, 5.5009361841321561289, 12.912150110318367253, 0.3717847050385557866, 1.4400784678768881493, 4.0582853359884078979}},
    {1.5, -3, {0.17192980164142547071, 0.054626746403615086122, 0.042915109203899936376, 0.12617699015491311945, 0.92087156524022254152, 6.2749804513924401989, 162.08445040882116012}},
    {0.1, 4, {1.5369890036102358036, 2.3701580229497596544, 3.6670977504034106641, 5.6925805184946066324, 0.057545460187443396178, 0.20774295017059334122, 0.078926014705873319897}},
    {0.005, 2, {1.010075418548773232, 1.0202608532877463785, 1.0305575842587809754, 1.0409669072146139677, 0.002886756157247911986, 0.010392375227796141964, 0.00019714634291064200166}},
    {0.02, -1, {0.98039473003251034439, 0.96130200027483937256, 0.94270679681142811548, 0.92459459366445615083, 0.011547775228876679515, 0.04157507071875095096, 0.0031553758390057269716}},
};

double field(const MomentSet& m, int i) {
  const double v[7] = {m.mu, m.mu2p, m.mu3p, m.mu4p, m.cv, m.skew, m.exkurt};
  return v[i];
}

}  // namespace

TEST(CondVarInputs, VolRatioRoundTrip) {
  for (double nu : {0.05, 0.4, 1.7}) {
    for (double z : {-3.1, 0.0, 0.25, 2.9}) {
      const auto in = CondVarInputs::from_vol_ratio(nu, std::exp(nu * z));
      EXPECT_NEAR(in.z_hat, z, 1e-12);
      EXPECT_NEAR(in.vol_ratio(), std::exp(nu * z), 1e-15 * std::exp(nu * z));
    }
  }
  EXPECT_THROW(CondVarInputs::from_vol_ratio(0.3, 0.0), DomainError);
  EXPECT_THROW(m_k({0.0, 1.0}, 1), DomainError);
}

TEST(MK, VanishingVolOfVol) {
  for (double z = -3.0; z <= 3.0; z += 0.25) {
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(m_k({1e-6, z}, k), 1.0, 1e-9);
  }
}

TEST(MK, MatchesExtendedPrecision) {
  struct Case { double nu, z; int k; double expect; };
  // mpmath, 50-60 digits
  const Case cases[] = {
      {0.4, 0, 1, 1.0550797132392546151},      {0.3, -2.5, 3, 2.5880545510475298481},
      {0.01, 0.5, 2, 1.0001500120840240386},   {0.0125, 4, 4, 1.0075171021452186517},
      {0.012, 0.3, 4, 1.0008029302998404809},  {1.5, 9, 4, 7.1851666184920886755e+21},
      {0.2, -12, 2, 12.997755242702544221},    {2, 0, 4, 12370674290154.316056},
      {0.5, 30, 1, 110687.24868754476299},     {0.8, -9, 1, 100.63557608525875181},
  };
  for (const auto& c : cases) {
    EXPECT_NEAR(m_k({c.nu, c.z}, c.k) / c.expect, 1.0, 1e-13) << c.nu << " " << c.z << " " << c.k;
  }
}

TEST(MK, EvenInZ) {
  for (double nu : {0.01, 0.2, 0.9}) {
    for (double z : {0.1, 1.3, 4.0, 11.0}) {
      for (int k = 1; k <= 4; ++k) EXPECT_EQ(m_k({nu, z}, k), m_k({nu, -z}, k));
    }
  }
}

TEST(MK, SeriesAndClosedFormAgreeAtSwitch) {
  for (double z : {0.0, 0.7, 3.0}) {
    const double a = 0.05 / std::max(1.0, z);
    const double lo = detail::mk_series(a, z);
    const double hi = detail::mk_erfcx(a, z);
    EXPECT_NEAR(lo / hi, 1.0, 1e-13) << z;
  }
}

TEST(CondMoments, MatchesExtendedPrecision) {
  for (const auto& f : kFrozen) {
    const auto m = cond_moments({f.nu, f.z});
    for (int i = 0; i < 7; ++i) {
      EXPECT_NEAR(field(m, i) / f.m[i], 1.0, 1e-12) << f.nu << " " << f.z << " field " << i;
    }
  }
}

TEST(CondMoments, AgreeWithBridgeQuadrature) {
  // an independent route: Gaussian moment generating function of the bridge
  for (double nu : {0.05, 0.2, 0.4, 0.8}) {
    for (double z : {-1.0, 0.0, 1.5}) {
      const auto m = cond_moments({nu, z});
      const double raw[4] = {m.mu, m.mu2p, m.mu3p, m.mu4p};
      for (int k = 1; k <= 4; ++k) {
        const double q = static_cast<double>(bridge_moment_quadrature(k, nu, z));
        EXPECT_NEAR(raw[k - 1] / q, 1.0, 1e-10) << nu << " " << z << " k=" << k;
      }
    }
  }
}

TEST(CondMoments, ZeroVolOfVolLimit) {
  const auto m = cond_moments({1e-7, 0.0});
  EXPECT_NEAR(m.mu, 1.0, 1e-12);
  EXPECT_NEAR(m.mu4p, 1.0, 1e-12);
  EXPECT_LT(m.cv, 1e-6);
}

TEST(CondMoments, ClosedFormAndExpansionMeetAtThreshold) {
  for (double z : {-2.0, 0.0, 1.0}) {
    const auto lo = cond_moments({0.005 * (1 - 1e-14), z});
    const auto hi = cond_moments({0.005, z});
    EXPECT_NEAR(lo.cv / hi.cv, 1.0, 1e-12);
    EXPECT_NEAR(lo.skew / hi.skew, 1.0, 1e-12);
    EXPECT_NEAR(lo.exkurt / hi.exkurt, 1.0, 1e-10);
    EXPECT_NEAR(lo.mu4p / hi.mu4p, 1.0, 1e-13);
  }
}

TEST(CondMoments, ConsistencyOverGrid) {
  for (double nu = 0.05; nu <= 1.0 + 1e-9; nu += 0.05) {
    for (double z = -4.0; z <= 4.0 + 1e-9; z += 0.5) {
      const auto m = cond_moments({nu, z});
      EXPECT_GE(m.mu2p, m.mu * m.mu);
      EXPECT_TRUE(std::isfinite(m.cv) && std::isfinite(m.skew) && std::isfinite(m.exkurt));
      EXPECT_GT(m.skew, 0.0) << nu << " " << z;
      EXPECT_NEAR(m.cv * m.cv, m.mu2p / (m.mu * m.mu) - 1.0, 1e-12);
    }
  }
}

TEST(CondMoments, ShapeCurvesForFigureGrid) {
  // variance grows with z_hat; cv, skewness and ex-kurtosis are even in z_hat
  double prev = 0.0;
  for (double z = -3.0; z <= 3.0 + 1e-9; z += 0.25) {
    const auto m = cond_moments({0.4, z});
    EXPECT_GT(m.variance(), prev);
    prev = m.variance();
    const auto r = cond_moments({0.4, -z});
    EXPECT_NEAR(m.cv, r.cv, 1e-13);
    EXPECT_NEAR(m.skew, r.skew, 1e-12);
    EXPECT_NEAR(m.exkurt, r.exkurt, 1e-11);
  }
  EXPECT_GT(cond_moments({0.4, 2.0}).variance(), cond_moments({0.4, -2.0}).variance());
}

TEST(SmallTimeStats, LeadingTerms) {
  const auto s = small_time_stats(0.1);
  EXPECT_NEAR(s.cv, 0.057735026918962576, 1e-15);
  EXPECT_NEAR(s.skew, 0.20784609690826528, 1e-15);
  EXPECT_NEAR(s.exkurt, 0.078857142857142857, 1e-15);
  const auto z = small_time_stats(1e-12);
  EXPECT_LT(z.cv, 1e-11);
  EXPECT_LT(z.exkurt, 1e-22);
}

TEST(SmallTimeStats, RatioToExactAtOnePercent) {
  const auto m = cond_moments({0.01, 0.0});
  const auto s = small_time_stats(0.01);
  EXPECT_NEAR(m.cv / s.cv, 1.0, 1e-4);
  EXPECT_NEAR(m.skew / s.skew, 1.0, 1e-3);
  EXPECT_NEAR(m.exkurt / s.exkurt, 1.0, 5e-3);
}

TEST(SmallTimeStats, CubicConvergenceOfCv) {
  double err[3];
  const double nus[3] = {0.04, 0.02, 0.01};
  for (int i = 0; i < 3; ++i) err[i] = cond_moments({nus[i], 0.0}).cv - small_time_stats(nus[i]).cv;
  EXPECT_NEAR(std::log2(err[0] / err[1]), 3.0, 0.02);
  EXPECT_NEAR(std::log2(err[1] / err[2]), 3.0, 0.02);
}

TEST(FastStats, MatchesExactMoments) {
  for (double nu : {0.001, 0.02, 0.0499, 0.05, 0.075, 0.0999, 0.1, 0.3, 0.8, 1.6}) {
    for (double z : {-6.0, -2.0, -0.3, 0.0, 1.0, 3.5, 6.0}) {
      const auto f = fast_stats(nu, z, true);
      const auto m = cond_moments({nu, z});
      EXPECT_NEAR(f.mu / m.mu, 1.0, 1e-13) << nu << " " << z;
      EXPECT_NEAR(f.cv / m.cv, 1.0, 1e-8) << nu << " " << z;
      EXPECT_NEAR(f.skew / m.skew, 1.0, 2e-6) << nu << " " << z;
    }
  }
}

TEST(SlnFit, ThreeMomentRoundTrip) {
  const auto fit = sln_fit_three_moments(1.0, 0.2, 0.8);
  EXPECT_FALSE(fit.clamped);
  const auto st = sln_moments(fit.params);
  EXPECT_NEAR(st.cv, 0.2, 1e-12);
  EXPECT_NEAR(st.skew, 0.8, 1e-12);
  EXPECT_EQ(fit.params.mean, 1.0);
  for (double cv : {0.01, 0.1, 0.5, 1.2}) {
    for (double skew : {0.05, 0.4, 2.0, 9.0}) {
      const auto f = sln_fit_three_moments(2.5, cv, skew);
      if (f.clamped) continue;
      const auto s = sln_moments(f.params);
      EXPECT_NEAR(s.cv / cv, 1.0, 1e-10);
      EXPECT_NEAR(s.skew / skew, 1.0, 1e-10);
    }
  }
}

TEST(SlnFit, LognormalConsistentInputsGiveUnitWeight) {
  for (double cv : {0.05, 0.3, 1.0}) {
    const auto f = sln_fit_three_moments(1.0, cv, cv * (cv * cv + 3.0));
    EXPECT_NEAR(f.params.weight, 1.0, 1e-12);
    EXPECT_NEAR(f.params.log_sd, std::sqrt(std::log1p(cv * cv)), 1e-12);
  }
}

TEST(SlnFit, SmallSkewWeightAsymptote) {
  const double v = 1e-5;
  for (double s : {1e-3, 1e-4}) {
    EXPECT_NEAR(sln_fit_three_moments(1.0, v, s).params.weight / (3.0 * v / s), 1.0, 1e-5);
  }
}

TEST(SlnFit, InfeasibleWeightClampsToLognormal) {
  const auto f = sln_fit_three_moments(1.3, 0.5, 0.1);
  EXPECT_TRUE(f.clamped);
  EXPECT_EQ(f.params.weight, 1.0);
  EXPECT_NEAR(sln_moments(f.params).cv, 0.5, 1e-14);
  EXPECT_EQ(f.params.mean, 1.3);
}

TEST(SlnFit, DegenerateInputsGiveConstant) {
  const auto f = sln_fit_three_moments(0.9, 0.2, -0.1);
  EXPECT_EQ(f.params.log_sd, 0.0);
  RngStream s(1, 0);
  EXPECT_EQ(sample_avg_var(s, f.params), 0.9);
  EXPECT_THROW(sln_fit_three_moments(0.0, 0.2, 0.3), DomainError);
}

TEST(SlnFit, SmallTimeFitIdentities) {
  for (double nu : {0.05, 0.2, 0.7}) {
    for (double z : {-1.0, 0.0, 2.0}) {
      const auto m = cond_moments({nu, z});
      const auto p = sln_fit_small_time(m);
      EXPECT_EQ(p.mean, m.mu);
      EXPECT_EQ(p.weight, 5.0 / 6.0);
      EXPECT_NEAR(5.0 / 6.0 * std::sqrt(p.w()), m.cv, 1e-15);
    }
  }
}

TEST(SlnFit, SmallTimeSkewnessAgreesAtModerateVolOfVol) {
  for (double z : {-1.0, 0.0, 1.0}) {
    const auto m = cond_moments({0.2, z});
    EXPECT_NEAR(sln_moments(sln_fit_small_time(m)).skew / m.skew, 1.0, 0.02) << z;
  }
}

TEST(SlnFit, SmallTimeExKurtosisBelowTruth) {
  for (double z = -3.0; z <= 3.0; z += 0.5) {
    const auto m = cond_moments({0.4, z});
    EXPECT_LT(sln_moments(sln_fit_small_time(m)).exkurt, m.exkurt) << z;
  }
}

TEST(SampleAvgVar, ConstantAndUnbiased) {
  RngStream s(2, 0);
  EXPECT_EQ(sample_avg_var(s, {1.7, 0.0, 5.0 / 6.0}), 1.7);
  const auto p = sln_fit_small_time(1.2, 0.3);
  const int n = 1'000'000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_avg_var(s, p);
    ASSERT_GT(x, 0.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, 1.2, 3.0 * sd / std::sqrt(n));
  EXPECT_NEAR(sd / mean, 0.3, 0.003);
}

TEST(SampleAvgVar, SkewnessMatchesAnalytic) {
  const auto p = sln_fit_small_time(1.0, 0.3);
  const double target = sln_moments(p).skew;
  RngStream s(3, 0);
  const int batches = 100, per = 100'000;
  double sum = 0.0, sum2 = 0.0;
  for (int b = 0; b < batches; ++b) {
    std::vector<double> xs(per);
    double m = 0.0;
    for (auto& x : xs) m += (x = sample_avg_var(s, p));
    m /= per;
    double c2 = 0.0, c3 = 0.0;
    for (double x : xs) {
      const double d = x - m;
      c2 += d * d;
      c3 += d * d * d;
    }
    const double sk = (c3 / per) / std::pow(c2 / per, 1.5);
    sum += sk;
    sum2 += sk * sk;
  }
  const double mean = sum / batches;
  const double se = std::sqrt((sum2 / batches - mean * mean) / (batches - 1));
  EXPECT_NEAR(mean, target, 3.0 * se + 1e-3 * target);
}

TEST(BridgeOracle, VanishingVolOfVol) {
  const auto o = bridge_moment_oracle(1e-4, 0.0, 1000, 100'000, 11, 0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(o.raw[k], 1.0, 3.0 * o.std_error[k] + 1e-6);
}

TEST(BridgeOracle, MeanAgreesWithClosedForm) {
  const auto o = bridge_moment_oracle(0.4, 1.0, 1000, 100'000, 12, 0);
  const auto m = cond_moments({0.4, 1.0});
  EXPECT_NEAR(o.raw[0], m.mu, 3.0 * o.std_error[0]);
  EXPECT_NEAR(o.raw[1], m.mu2p, 4.0 * o.std_error[1]);
}

TEST(BridgeOracle, ThreadCountDoesNotChangeResult) {
  const CondVarInputs pts[] = {{0.3, -1.0}, {0.3, 0.5}, {0.6, 0.0}};
  const auto a = bridge_moment_oracle_grid(pts, 1000, 100'000, 5, 1);
  const auto b = bridge_moment_oracle_grid(pts, 1000, 100'000, 5, 4);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 4; ++k) EXPECT_EQ(a[i].raw[k], b[i].raw[k]);
  }
}

TEST(BridgeOracle, Preconditions) {
  EXPECT_THROW(bridge_moment_oracle(0.4, 0.0, 10, 100'000, 1), DomainError);
  EXPECT_THROW(bridge_moment_oracle(0.4, 0.0, 1000, 10, 1), DomainError);
}

TEST(BridgeOracle, SquaredLevelMatchesDirectExp) {
  const CondVarInputs both[] = {{0.3, 0.5}, {0.6, 0.5}};
  const CondVarInputs alone[] = {{0.6, 0.5}};
  const auto a = bridge_moment_oracle_grid(both, 1000, 100'000, 8, 0);
  const auto b = bridge_moment_oracle_grid(alone, 1000, 100'000, 8, 0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(a[1].raw[k], b[0].raw[k], 1e-12 * b[0].raw[k]);
}

TEST(OracleKernels, BranchlessExpAccuracy) {
  double worst = 0.0;
  for (double x = -700.0; x <= 700.0; x += 0.01237) {
    worst = std::max(worst, std::abs(detail::exp_branchless(x) / std::exp(x) - 1.0));
  }
  EXPECT_LT(worst, 2e-14);
  EXPECT_EQ(detail::exp_branchless(0.0), 1.0);
}

TEST(OracleKernels, BulkNormalsAreStandard) {
  RngStream rng(21, 0);
  std::vector<double> z(2'000'000);
  std::vector<std::uint64_t> bits;
  detail::fill_normal(rng, z, bits);
  double m1 = 0, m2 = 0, m4 = 0, tail = 0;
  for (double x : z) {
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
    tail += std::abs(x) > 3.442619855899;
  }
  const double n = static_cast<double>(z.size());
  EXPECT_NEAR(m1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
  // mass beyond the base-strip edge comes only from the slow path
  const double p = std::erfc(3.442619855899 / std::sqrt(2.0));
  EXPECT_NEAR(tail / n, p, 4.0 * std::sqrt(p / n));
}
