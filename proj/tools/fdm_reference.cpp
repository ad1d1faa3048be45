// Finite-difference reference prices for European calls under SABR with an
// absorbing boundary at F = 0.
//
// Solves V_tau = 1/2 e^{2y} F^{2 beta} V_FF + rho nu e^y F^beta V_Fy
//               + 1/2 nu^2 (V_yy - V_y),   y = ln sigma,
// with the Hundsdorfer-Verwer ADI scheme on a grid refined around the strike,
// after a few implicit Euler steps that damp the payoff kink.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

struct Problem {
  double f0, sigma0, nu, beta, rho, T, K;
};

struct Grid {
  int nf = 400;
  int ny = 160;
  int nt = 400;
  double f_max_mult = 8.0;  // F_max in units of max(F0, K) scaled by vol
  double y_width = 5.0;     // half-width in standard deviations of ln sigma_T
  double f_conc = 0.1;      // sinh concentration width around K, relative
};

// a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i, in place on d.
void thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c,
            std::vector<double>& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

class Solver {
 public:
  Solver(const Problem& p, const Grid& g) : p_(p), g_(g) { build(); }

  double price() {
    const int nt = g_.nt;
    const double dt = p_.T / nt;
    constexpr int kDamp = 4;
    for (int n = 0; n < kDamp; ++n) {
      douglas(0.5 * dt, 1.0);
      douglas(0.5 * dt, 1.0);
    }
    for (int n = kDamp; n < nt; ++n) hundsdorfer_verwer(dt);
    return interpolate(p_.f0, std::log(p_.sigma0));
  }

 private:
  void build() {
    const double scale = std::max(p_.f0, p_.K);
    const double sd_y = p_.nu * std::sqrt(p_.T);
    y_lo_ = std::log(p_.sigma0) - 0.5 * p_.nu * p_.nu * p_.T - g_.y_width * sd_y;
    const double y_hi = std::log(p_.sigma0) + g_.y_width * sd_y;
    // largest plausible F: F0 plus several local-vol standard deviations at high sigma
    const double f_max =
        scale + g_.f_max_mult * std::exp(std::log(p_.sigma0) + 2.0 * sd_y) *
                    std::pow(scale, p_.beta) * std::sqrt(p_.T);
    // sinh grid in F concentrated at K
    const double c = g_.f_conc * p_.K;
    const double lo = std::asinh(-p_.K / c), hi = std::asinh((f_max - p_.K) / c);
    f_.resize(g_.nf + 1);
    for (int i = 0; i <= g_.nf; ++i) {
      f_[i] = p_.K + c * std::sinh(lo + (hi - lo) * i / g_.nf);
    }
    f_[0] = 0.0;
    y_.resize(g_.ny + 1);
    dy_ = (y_hi - y_lo_) / g_.ny;
    for (int j = 0; j <= g_.ny; ++j) y_[j] = y_lo_ + dy_ * j;
    sig_.resize(g_.ny + 1);
    sig2_.resize(g_.ny + 1);
    for (int j = 0; j <= g_.ny; ++j) {
      sig_[j] = std::exp(y_[j]);
      sig2_[j] = sig_[j] * sig_[j];
    }
    fb_.resize(g_.nf + 1);
    fb2_.resize(g_.nf + 1);
    for (int i = 0; i <= g_.nf; ++i) {
      fb_[i] = std::pow(f_[i], p_.beta);
      fb2_[i] = fb_[i] * fb_[i];
    }

    nfp_ = g_.nf + 1;
    u_.assign(nfp_ * (g_.ny + 1), 0.0);
    for (int j = 0; j <= g_.ny; ++j) {
      for (int i = 0; i <= g_.nf; ++i) u_[idx(i, j)] = payoff_cell_average(i);
    }
    // finite difference weights on the nonuniform F grid
    wf_.resize(g_.nf + 1);
    for (int i = 1; i < g_.nf; ++i) {
      const double hm = f_[i] - f_[i - 1], hp = f_[i + 1] - f_[i];
      Weights& w = wf_[i];
      w.d1m = -hp / (hm * (hm + hp));
      w.d10 = (hp - hm) / (hm * hp);
      w.d1p = hm / (hp * (hm + hp));
      w.d2m = 2.0 / (hm * (hm + hp));
      w.d20 = -2.0 / (hm * hp);
      w.d2p = 2.0 / (hp * (hm + hp));
    }
  }

  struct Weights {
    double d1m = 0, d10 = 0, d1p = 0, d2m = 0, d20 = 0, d2p = 0;
  };

  double payoff_cell_average(int i) const {
    if (i == 0) return 0.0;
    if (i == g_.nf) return f_[i] - p_.K;
    const double a = 0.5 * (f_[i - 1] + f_[i]), b = 0.5 * (f_[i] + f_[i + 1]);
    if (b <= p_.K) return 0.0;
    if (a >= p_.K) return f_[i] - p_.K;
    return 0.5 * (b - p_.K) * (b - p_.K) / (b - a);
  }

  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nfp_ + i; }

  double diff_f(int i, int j) const { return 0.5 * sig2_[j] * fb2_[i]; }

  // F0: mixed term; F1: F direction; F2: y direction (interior nodes only).
  void apply_mixed(const std::vector<double>& v, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (p_.rho == 0.0) return;
    for (int j = 1; j < g_.ny; ++j) {
      for (int i = 1; i < g_.nf; ++i) {
        const Weights& w = wf_[i];
        auto dv_f = [&](int jj) {
          return w.d1m * v[idx(i - 1, jj)] + w.d10 * v[idx(i, jj)] + w.d1p * v[idx(i + 1, jj)];
        };
        const double vfy = (dv_f(j + 1) - dv_f(j - 1)) / (2.0 * dy_);
        out[idx(i, j)] = p_.rho * p_.nu * sig_[j] * fb_[i] * vfy;
      }
    }
  }

  void apply_f(const std::vector<double>& v, std::vector<double>& out) const {
    for (int j = 0; j <= g_.ny; ++j) {
      out[idx(0, j)] = 0.0;
      out[idx(g_.nf, j)] = 0.0;
      for (int i = 1; i < g_.nf; ++i) {
        const Weights& w = wf_[i];
        out[idx(i, j)] = diff_f(i, j) *
                         (w.d2m * v[idx(i - 1, j)] + w.d20 * v[idx(i, j)] + w.d2p * v[idx(i + 1, j)]);
      }
    }
  }

  void apply_y(const std::vector<double>& v, std::vector<double>& out) const {
    const double a = 0.5 * p_.nu * p_.nu;
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 1; j < g_.ny; ++j) {
      for (int i = 1; i < g_.nf; ++i) {
        const double vm = v[idx(i, j - 1)], v0 = v[idx(i, j)], vp = v[idx(i, j + 1)];
        out[idx(i, j)] = a * ((vp - 2.0 * v0 + vm) / (dy_ * dy_) - (vp - vm) / (2.0 * dy_));
      }
    }
  }

  // (I - theta dt A1) x = rhs, Dirichlet in F
  void solve_f(std::vector<double>& rhs, double k) const {
    const int n = g_.nf + 1;
    std::vector<double> a(n), b(n), c(n), d(n);
    for (int j = 0; j <= g_.ny; ++j) {
      a[0] = 0; b[0] = 1; c[0] = 0; d[0] = rhs[idx(0, j)];
      a[n - 1] = 0; b[n - 1] = 1; c[n - 1] = 0; d[n - 1] = rhs[idx(n - 1, j)];
      for (int i = 1; i < n - 1; ++i) {
        const double s = k * diff_f(i, j);
        a[i] = -s * wf_[i].d2m;
        b[i] = 1.0 - s * wf_[i].d20;
        c[i] = -s * wf_[i].d2p;
        d[i] = rhs[idx(i, j)];
      }
      thomas(a, b, c, d);
      for (int i = 0; i < n; ++i) rhs[idx(i, j)] = d[i];
    }
  }

  // (I - theta dt A2) x = rhs; boundary rows in y carry no y-operator
  void solve_y(std::vector<double>& rhs, double k) const {
    const int n = g_.ny + 1;
    const double a2 = 0.5 * p_.nu * p_.nu;
    const double lo = a2 * (1.0 / (dy_ * dy_) + 0.5 / dy_);
    const double mid = a2 * (-2.0 / (dy_ * dy_));
    const double hi = a2 * (1.0 / (dy_ * dy_) - 0.5 / dy_);
    std::vector<double> a(n), b(n), c(n), d(n);
    for (int i = 1; i < g_.nf; ++i) {
      a[0] = 0; b[0] = 1; c[0] = 0; d[0] = rhs[idx(i, 0)];
      a[n - 1] = 0; b[n - 1] = 1; c[n - 1] = 0; d[n - 1] = rhs[idx(i, n - 1)];
      for (int j = 1; j < n - 1; ++j) {
        a[j] = -k * lo;
        b[j] = 1.0 - k * mid;
        c[j] = -k * hi;
        d[j] = rhs[idx(i, j)];
      }
      thomas(a, b, c, d);
      for (int j = 0; j < n; ++j) rhs[idx(i, j)] = d[j];
    }
  }

  void apply_all(const std::vector<double>& v, std::vector<double>& f0, std::vector<double>& f1,
                 std::vector<double>& f2) const {
    apply_mixed(v, f0);
    apply_f(v, f1);
    apply_y(v, f2);
  }

  void douglas(double dt, double theta) {
    const std::size_t m = u_.size();
    std::vector<double> f0(m), f1(m), f2(m);
    apply_all(u_, f0, f1, f2);
    std::vector<double> y(m);
    for (std::size_t k = 0; k < m; ++k) y[k] = u_[k] + dt * (f0[k] + f1[k] + f2[k]) - theta * dt * f1[k];
    solve_f(y, theta * dt);
    for (std::size_t k = 0; k < m; ++k) y[k] -= theta * dt * f2[k];
    solve_y(y, theta * dt);
    u_.swap(y);
  }

  void hundsdorfer_verwer(double dt) {
    const double theta = 0.5 + std::sqrt(3.0) / 6.0;
    const std::size_t m = u_.size();
    std::vector<double> f0(m), f1(m), f2(m), g0(m), g1(m), g2(m);
    apply_all(u_, f0, f1, f2);
    std::vector<double> y0(m), y(m);
    for (std::size_t k = 0; k < m; ++k) y0[k] = u_[k] + dt * (f0[k] + f1[k] + f2[k]);
    for (std::size_t k = 0; k < m; ++k) y[k] = y0[k] - theta * dt * f1[k];
    solve_f(y, theta * dt);
    for (std::size_t k = 0; k < m; ++k) y[k] -= theta * dt * f2[k];
    solve_y(y, theta * dt);
    apply_all(y, g0, g1, g2);
    std::vector<double> z(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double y0t = y0[k] + 0.5 * dt * ((g0[k] + g1[k] + g2[k]) - (f0[k] + f1[k] + f2[k]));
      z[k] = y0t - theta * dt * g1[k];
    }
    solve_f(z, theta * dt);
    for (std::size_t k = 0; k < m; ++k) z[k] -= theta * dt * g2[k];
    solve_y(z, theta * dt);
    u_.swap(z);
  }

  double interpolate(double f, double y) const {
    const int i = static_cast<int>(std::upper_bound(f_.begin(), f_.end(), f) - f_.begin()) - 1;
    const int j = static_cast<int>((y - y_lo_) / dy_);
    // cubic Lagrange in F on nodes i-1..i+2, linear-in-y blend of two cubic rows
    auto cubic_f = [&](int jj) {
      double sum = 0.0;
      for (int a = i - 1; a <= i + 2; ++a) {
        double l = 1.0;
        for (int b = i - 1; b <= i + 2; ++b) {
          if (b != a) l *= (f - f_[b]) / (f_[a] - f_[b]);
        }
        sum += l * u_[idx(a, jj)];
      }
      return sum;
    };
    double sum = 0.0;
    for (int a = j - 1; a <= j + 2; ++a) {
      double l = 1.0;
      for (int b = j - 1; b <= j + 2; ++b) {
        if (b != a) l *= (y - y_[b]) / (y_[a] - y_[b]);
      }
      sum += l * cubic_f(a);
    }
    return sum;
  }

  Problem p_;
  Grid g_;
  std::vector<double> f_, y_, fb_, fb2_, sig_, sig2_;
  std::vector<Weights> wf_;
  double y_lo_ = 0.0, dy_ = 0.0;
  int nfp_ = 0;
  std::vector<double> u_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-difference SABR call prices with absorption at zero"};
  Problem p{1.0, 0.25, 0.3, 0.3, -0.8, 10.0, 1.0};
  Grid g;
  std::vector<double> strikes;
  std::vector<double> maturities;
  app.add_option("--f0", p.f0, "initial forward")->required();
  app.add_option("--sigma0", p.sigma0, "initial volatility")->required();
  app.add_option("--nu", p.nu, "vol of vol")->required();
  app.add_option("--beta", p.beta, "CEV exponent")->required();
  app.add_option("--rho", p.rho, "correlation")->required();
  app.add_option("--T", maturities, "maturities")->required();
  app.add_option("--K", strikes, "strikes")->required();
  app.add_option("--nf", g.nf, "forward grid intervals");
  app.add_option("--ny", g.ny, "log-volatility grid intervals");
  app.add_option("--nt", g.nt, "time steps");
  app.add_option("--f-max", g.f_max_mult, "forward domain multiplier");
  app.add_option("--y-width", g.y_width, "log-volatility half-width in standard deviations");
  app.add_option("--f-conc", g.f_conc, "relative width of the strike refinement");
  CLI11_PARSE(app, argc, argv);

  std::printf("T,K,price\n");
  for (double T : maturities) {
    for (double K : strikes) {
      Problem q = p;
      q.T = T;
      q.K = K;
      Solver s(q, g);
      std::printf("%.17g,%.17g,%.10f\n", T, K, s.price());
    }
  }
  return 0;
}
