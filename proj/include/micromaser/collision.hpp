#pragma once

// Repeated-interaction layer: impulsive Jaynes-Cummings Kraus operators, the
// per-collision map F_a, and renewal-process arrival statistics (waiting-time
// distributions, renewal density via a Volterra solve, residual/survival
// probabilities, and arrival-time samplers).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "micromaser/common.hpp"
#include "micromaser/fock.hpp"
#include "micromaser/random.hpp"

namespace micromaser {

// Incoming atoms are diagonal in the energy basis: p|e><e| + (1-p)|g><g|.
struct AncillaState {
  double p = 1.0;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw config_error("ancilla: p must lie in [0, 1]");
  }

  // Inverse beam temperature (k_B = 1). Negative for p > 1/2 (inversion),
  // +-inf at p = 0 or 1.
  double beta(double omega) const { return std::log((1.0 - p) / p) / omega; }
};

struct KrausSet {
  FockOperator l_ee, l_ge, l_gg, l_eg;
  double theta = 0.0;
  double p = 1.0;

  // max | sum L^+L - I | on levels 0..n_interior-1 (top level exempt: the
  // truncated raising operator drops its outgoing transition).
  double completeness_defect() const {
    const int d = static_cast<int>(l_ee.rows());
    CMat s = l_ee.adjoint() * l_ee + l_ge.adjoint() * l_ge + l_gg.adjoint() * l_gg +
             l_eg.adjoint() * l_eg;
    s -= CMat::Identity(d, d);
    return s.topLeftCorner(d - 1, d - 1).cwiseAbs().maxCoeff();
  }
};

inline KrausSet kraus_operators(double theta, double p, const TruncationConfig& trunc) {
  if (!(theta >= 0.0)) throw config_error("kraus_operators: theta must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw config_error("kraus_operators: p must lie in [0, 1]");
  trunc.validate();

  const LadderOperators lad = ladder_operators(trunc);
  const double sp = std::sqrt(p);
  const double sq = std::sqrt(1.0 - p);

  KrausSet ks;
  ks.theta = theta;
  ks.p = p;
  ks.l_ee = sp * diag_number_function([&](int n) { return cos_sqrt(theta, n + 1); }, trunc);
  ks.l_ge = sp * diag_number_function([&](int n) { return sinc_sqrt(theta, n); }, trunc) * lad.a_dag;
  ks.l_gg = sq * diag_number_function([&](int n) { return cos_sqrt(theta, n); }, trunc);
  ks.l_eg = sq * diag_number_function([&](int n) { return sinc_sqrt(theta, n + 1); }, trunc) * lad.a;
  return ks;
}

// Per-collision change map F_a, in Lindblad form
//   F_a rho = sum_mn ( L rho L^+ - 1/2 {L^+L, rho} ).
// On the full space sum L^+L = 1 and this is the Kraus channel minus the
// identity; writing it in Lindblad form keeps the regrouping identity
// L = L_S + R F_a exact on the truncated space as well.
inline Superoperator ancilla_map(const KrausSet& ks) {
  Superoperator f = dissipator(ks.l_ee);
  f += dissipator(ks.l_ge);
  f += dissipator(ks.l_gg);
  f += dissipator(ks.l_eg);
  return f;
}

// Shape-preserving cubic interpolant (Fritsch-Carlson slopes). Used for
// tabulated densities and inverse-CDF sampling.
struct Pchip {
  RVec x, y, d;

  static Pchip fit(const RVec& xs, const RVec& ys) {
    const Eigen::Index n = xs.size();
    if (n < 2 || ys.size() != n) throw config_error("pchip: need >= 2 matching nodes");
    Pchip p;
    p.x = xs;
    p.y = ys;
    p.d = RVec::Zero(n);
    RVec h(n - 1), delta(n - 1);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      h(k) = xs(k + 1) - xs(k);
      if (!(h(k) > 0.0)) throw config_error("pchip: nodes must be strictly increasing");
      delta(k) = (ys(k + 1) - ys(k)) / h(k);
    }
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
      if (delta(k - 1) * delta(k) <= 0.0) {
        p.d(k) = 0.0;
      } else {
        const double w1 = 2.0 * h(k) + h(k - 1);
        const double w2 = h(k) + 2.0 * h(k - 1);
        p.d(k) = (w1 + w2) / (w1 / delta(k - 1) + w2 / delta(k));
      }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double de = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (de * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(de) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return de;
    };
    p.d(0) = n > 2 ? endpoint(h(0), h(1), delta(0), delta(1)) : delta(0);
    p.d(n - 1) = n > 2 ? endpoint(h(n - 2), h(n - 3), delta(n - 2), delta(n - 3)) : delta(n - 2);
    return p;
  }

  double eval(double t) const {
    const Eigen::Index n = x.size();
    if (t <= x(0)) return y(0);
    if (t >= x(n - 1)) return y(n - 1);
    Eigen::Index k = std::upper_bound(x.data(), x.data() + n, t) - x.data() - 1;
    const double h = x(k + 1) - x(k);
    const double s = (t - x(k)) / h;
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    return h00 * y(k) + h * h10 * d(k) + h01 * y(k + 1) + h * h11 * d(k + 1);
  }

  // Inverse for monotone increasing data, by bisection.
  double inverse(double target) const {
    const Eigen::Index n = x.size();
    if (target <= y(0)) return x(0);
    if (target >= y(n - 1)) return x(n - 1);
    double lo = x(0), hi = x(n - 1);
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      (eval(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

struct WaitingTimeDistribution {
  enum class Kind { Exponential, Hyperexponential, Tabulated };
  Kind kind = Kind::Exponential;

  double exp_rate = 1.0;                 // Exponential
  std::vector<double> weights, rates;    // Hyperexponential
  RVec tab_tau, tab_w;                   // Tabulated (tau from 0, density values)

  // Tabulated internals, built on construction.
  Pchip tab_cdf;       // CDF interpolant for sampling
  Pchip tab_res_cdf;   // residual-distribution CDF interpolant
  double tab_mean = 0.0;

  static WaitingTimeDistribution exponential(double rate) {
    if (!(rate > 0.0)) throw config_error("waiting time: exponential rate must be > 0");
    WaitingTimeDistribution w;
    w.kind = Kind::Exponential;
    w.exp_rate = rate;
    return w;
  }

  static WaitingTimeDistribution hyperexponential(std::vector<double> ws,
                                                  std::vector<double> rs) {
    if (ws.empty() || ws.size() != rs.size())
      throw config_error("waiting time: hyperexponential weights/rates size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (!(ws[i] > 0.0) || !(rs[i] > 0.0))
        throw config_error("waiting time: hyperexponential weights and rates must be > 0");
      total += ws[i];
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw config_error("waiting time: hyperexponential weights must sum to 1");
    for (double& w : ws) w /= total;
    WaitingTimeDistribution w;
    w.kind = Kind::Hyperexponential;
    w.weights = std::move(ws);
    w.rates = std::move(rs);
    return w;
  }

  static WaitingTimeDistribution tabulated(RVec tau, RVec wv) {
    if (tau.size() < 3 || tau.size() != wv.size())
      throw config_error("waiting time: tabulated grid needs >= 3 matching nodes");
    if (std::abs(tau(0)) > 0.0)
      throw config_error("waiting time: tabulated grid must start at tau = 0");
    if (wv.minCoeff() < 0.0)
      throw config_error("waiting time: tabulated density must be nonnegative");

    WaitingTimeDistribution w;
    w.kind = Kind::Tabulated;
    w.tab_tau = std::move(tau);

    const Eigen::Index n = w.tab_tau.size();
    RVec cdf = RVec::Zero(n);
    double mean = 0.0;
    for (Eigen::Index k = 1; k < n; ++k) {
      const double h = w.tab_tau(k) - w.tab_tau(k - 1);
      if (!(h > 0.0)) throw config_error("waiting time: tabulated nodes must increase");
      cdf(k) = cdf(k - 1) + 0.5 * h * (wv(k) + wv(k - 1));
      mean += 0.5 * h * (w.tab_tau(k) * wv(k) + w.tab_tau(k - 1) * wv(k - 1));
    }
    if (std::abs(cdf(n - 1) - 1.0) > 1e-6)
      throw config_error("waiting time: tabulated density integrates to " +
                         std::to_string(cdf(n - 1)) + ", expected 1 within 1e-6");
    // Renormalize exactly so the samplers see a proper distribution.
    w.tab_w = wv / cdf(n - 1);
    mean /= cdf(n - 1);
    cdf /= cdf(n - 1);
    w.tab_mean = mean;
    w.tab_cdf = Pchip::fit(w.tab_tau, cdf);

    // Residual CDF: R int_0^t (1 - W); reaches 1 at the last node.
    RVec res = RVec::Zero(n);
    for (Eigen::Index k = 1; k < n; ++k) {
      const double h = w.tab_tau(k) - w.tab_tau(k - 1);
      res(k) = res(k - 1) + 0.5 * h * ((1.0 - cdf(k)) + (1.0 - cdf(k - 1)));
    }
    res /= res(n - 1);
    w.tab_res_cdf = Pchip::fit(w.tab_tau, res);
    return w;
  }

  double pdf(double t) const {
    if (t < 0.0) return 0.0;
    switch (kind) {
      case Kind::Exponential:
        return exp_rate * std::exp(-exp_rate * t);
      case Kind::Hyperexponential: {
        double v = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
          v += weights[i] * rates[i] * std::exp(-rates[i] * t);
        return v;
      }
      case Kind::Tabulated: {
        if (t >= tab_tau(tab_tau.size() - 1)) return 0.0;
        Eigen::Index k =
            std::upper_bound(tab_tau.data(), tab_tau.data() + tab_tau.size(), t) -
            tab_tau.data() - 1;
        const double s = (t - tab_tau(k)) / (tab_tau(k + 1) - tab_tau(k));
        return (1.0 - s) * tab_w(k) + s * tab_w(k + 1);
      }
    }
    return 0.0;
  }

  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    switch (kind) {
      case Kind::Exponential:
        return 1.0 - std::exp(-exp_rate * t);
      case Kind::Hyperexponential: {
        double v = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
          v += weights[i] * (1.0 - std::exp(-rates[i] * t));
        return v;
      }
      case Kind::Tabulated:
        return tab_cdf.eval(t);
    }
    return 0.0;
  }

  double mean() const {
    switch (kind) {
      case Kind::Exponential:
        return 1.0 / exp_rate;
      case Kind::Hyperexponential: {
        double m = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) m += weights[i] / rates[i];
        return m;
      }
      case Kind::Tabulated:
        return tab_mean;
    }
    return 0.0;
  }

  // Mean arrival rate R = 1 / mean gap.
  double mean_rate() const { return 1.0 / mean(); }

  // Laplace transform of the density, ~w(s). Closed form except Tabulated.
  Complex laplace(Complex s) const {
    switch (kind) {
      case Kind::Exponential:
        return exp_rate / (s + exp_rate);
      case Kind::Hyperexponential: {
        Complex v = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
          v += weights[i] * rates[i] / (s + rates[i]);
        return v;
      }
      case Kind::Tabulated: {
        Complex v = 0.0;
        for (Eigen::Index k = 1; k < tab_tau.size(); ++k) {
          const double h = tab_tau(k) - tab_tau(k - 1);
          v += 0.5 * h *
               (std::exp(-s * tab_tau(k)) * tab_w(k) +
                std::exp(-s * tab_tau(k - 1)) * tab_w(k - 1));
        }
        return v;
      }
    }
    return 0.0;
  }

  // Fastest decay rate in the density; sets the Volterra grid resolution.
  double rate_scale() const {
    switch (kind) {
      case Kind::Exponential:
        return exp_rate;
      case Kind::Hyperexponential:
        return *std::max_element(rates.begin(), rates.end());
      case Kind::Tabulated:
        return mean_rate();
    }
    return 1.0;
  }

  double sample_gap(Rng& rng) const {
    switch (kind) {
      case Kind::Exponential:
        return rng.exponential(exp_rate);
      case Kind::Hyperexponential: {
        const int i = rng.categorical(weights.data(), static_cast<int>(weights.size()));
        return rng.exponential(rates[i]);
      }
      case Kind::Tabulated:
        return tab_cdf.inverse(rng.uniform());
    }
    return 0.0;
  }

  // Gap to the first arrival after a stationary time origin, density
  // p1(t) = R (1 - W(t)). For a hyperexponential this is again a
  // hyperexponential with reweighted components c_i R / lambda_i.
  double sample_residual_gap(Rng& rng) const {
    switch (kind) {
      case Kind::Exponential:
        return rng.exponential(exp_rate);
      case Kind::Hyperexponential: {
        const double r = mean_rate();
        std::vector<double> res(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i)
          res[i] = weights[i] * r / rates[i];
        const int i = rng.categorical(res.data(), static_cast<int>(res.size()));
        return rng.exponential(rates[i]);
      }
      case Kind::Tabulated:
        return tab_res_cdf.inverse(rng.uniform());
    }
    return 0.0;
  }
};

// Two-exponential waiting-time mixture whose renewal density is the
// super-bunched g(t) = A exp(-Gamma t) + 1. Inverts R ~g = ~w / (1 - ~w):
//   ~w(s) = R((A+1)s + Gamma) / (s^2 + s(Gamma + R(A+1)) + R Gamma),
// whose denominator has two real positive roots (the discriminant exceeds
// (Gamma - R)^2 for A > 0), giving partial-fraction weights in (0, 1).
inline WaitingTimeDistribution hyperexp_from_superbunched(double a, double gamma_burst,
                                                          double rate) {
  if (!(a > 0.0) || !(gamma_burst > 0.0) || !(rate > 0.0))
    throw config_error("hyperexp_from_superbunched: A, Gamma, R must all be > 0");
  const double b = gamma_burst + rate * (a + 1.0);
  const double c = rate * gamma_burst;
  const double disc = std::sqrt(b * b - 4.0 * c);
  const double l1 = 0.5 * (b + disc);
  const double l2 = 0.5 * (b - disc);
  const double w1 = (rate * (a + 1.0) - l2) / (l1 - l2);
  return WaitingTimeDistribution::hyperexponential({w1, 1.0 - w1}, {l1, l2});
}

namespace detail {

// Panel moments of the waiting-time density over [a, b]:
//   I0 = int_a^b w,  I1 = int_a^b (tau - a) w(tau) dtau.
// Closed form for exponential mixtures; exact piecewise-linear integrals for
// tabulated densities. Treating w exactly leaves only the piecewise-linear
// interpolation of g as the Volterra discretization error, and makes the
// solver exact for Poissonian statistics where g is constant.
struct PanelMoments {
  double i0 = 0.0, i1 = 0.0;
};

inline PanelMoments exp_panel(double c, double lambda, double a, double b) {
  const double ea = std::exp(-lambda * a), eb = std::exp(-lambda * b);
  PanelMoments m;
  m.i0 = c * (ea - eb);
  m.i1 = c * (-(b - a) * eb + (ea - eb) / lambda);
  return m;
}

inline PanelMoments panel_moments(const WaitingTimeDistribution& w, double a, double b) {
  PanelMoments m;
  switch (w.kind) {
    case WaitingTimeDistribution::Kind::Exponential: {
      m = exp_panel(1.0, w.exp_rate, a, b);
      break;
    }
    case WaitingTimeDistribution::Kind::Hyperexponential: {
      for (std::size_t i = 0; i < w.weights.size(); ++i) {
        const PanelMoments part = exp_panel(w.weights[i], w.rates[i], a, b);
        m.i0 += part.i0;
        m.i1 += part.i1;
      }
      break;
    }
    case WaitingTimeDistribution::Kind::Tabulated: {
      // Split [a, b] at tabulation nodes; w is linear on each piece.
      const RVec& xt = w.tab_tau;
      double u = a;
      while (u < b) {
        Eigen::Index k =
            std::upper_bound(xt.data(), xt.data() + xt.size(), u) - xt.data() - 1;
        if (k < 0) k = 0;
        if (k >= xt.size() - 1) break;  // beyond the table: density is zero
        const double v = std::min(b, xt(k + 1));
        const double slope = (w.tab_w(k + 1) - w.tab_w(k)) / (xt(k + 1) - xt(k));
        const double wu = w.tab_w(k) + slope * (u - xt(k));
        const double len = v - u;
        const double i0 = wu * len + 0.5 * slope * len * len;
        const double i1u = 0.5 * wu * len * len + slope * len * len * len / 3.0;
        m.i0 += i0;
        m.i1 += (u - a) * i0 + i1u;
        u = v;
      }
      break;
    }
  }
  return m;
}

}  // namespace detail

// Renewal density g on a uniform grid, from the Volterra equation
//   R g(t) = w(t) + R int_0^t w(tau) g(t - tau) dtau,
// solved forward with product integration (g piecewise linear, w exact).
inline RVec renewal_density(const WaitingTimeDistribution& wtd, const RVec& t_grid) {
  const Eigen::Index n = t_grid.size();
  if (n < 2 || std::abs(t_grid(0)) > 0.0)
    throw config_error("renewal_density: grid must start at 0 with >= 2 points");
  const double h = t_grid(1) - t_grid(0);
  for (Eigen::Index j = 1; j < n; ++j)
    if (std::abs((t_grid(j) - t_grid(j - 1)) - h) > 1e-9 * h)
      throw config_error("renewal_density: grid must be uniform");

  const double rate = wtd.mean_rate();

  // Precompute per-panel coefficients: panel k contributes
  // g_{j-k} (I0 - I1/h) + g_{j-k-1} I1/h to the convolution at node j.
  std::vector<double> ca(n - 1), cb(n - 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const detail::PanelMoments m = detail::panel_moments(wtd, t_grid(k), t_grid(k + 1));
    ca[k] = m.i0 - m.i1 / h;
    cb[k] = m.i1 / h;
  }
  if (1.0 - ca[0] < 0.5)
    throw numeric_error("renewal_density: grid step too coarse for the density scale");

  RVec g(n);
  g(0) = wtd.pdf(0.0) / rate;
  for (Eigen::Index j = 1; j < n; ++j) {
    double acc = wtd.pdf(t_grid(j)) / rate + g(j - 1) * cb[0];
    for (Eigen::Index k = 1; k < j; ++k)
      acc += g(j - k) * ca[k] + g(j - k - 1) * cb[k];
    g(j) = acc / (1.0 - ca[0]);
  }
  return g;
}

struct ResidualSurvival {
  RVec p0;  // probability of no collision in (0, t)
  RVec p1;  // residual-time density of the first arrival
  RVec pf;  // survival of the inter-collision gap
};

inline ResidualSurvival residual_and_survival(const WaitingTimeDistribution& wtd,
                                              const RVec& t_grid) {
  if (t_grid.size() < 2) throw config_error("residual_and_survival: grid too short");
  const double rate = wtd.mean_rate();
  const Eigen::Index n = t_grid.size();
  ResidualSurvival out;
  out.pf.resize(n);
  out.p1.resize(n);
  out.p0.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.pf(j) = 1.0 - wtd.cdf(t_grid(j));
    out.p1(j) = rate * out.pf(j);
  }
  switch (wtd.kind) {
    case WaitingTimeDistribution::Kind::Exponential:
      for (Eigen::Index j = 0; j < n; ++j)
        out.p0(j) = std::exp(-wtd.exp_rate * t_grid(j));
      break;
    case WaitingTimeDistribution::Kind::Hyperexponential:
      for (Eigen::Index j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < wtd.weights.size(); ++i)
          acc += wtd.weights[i] * (1.0 - std::exp(-wtd.rates[i] * t_grid(j))) / wtd.rates[i];
        out.p0(j) = 1.0 - rate * acc;
      }
      break;
    case WaitingTimeDistribution::Kind::Tabulated: {
      out.p0(0) = 1.0;
      for (Eigen::Index j = 1; j < n; ++j)
        out.p0(j) = out.p0(j - 1) -
                    0.5 * (t_grid(j) - t_grid(j - 1)) * (out.p1(j) + out.p1(j - 1));
      break;
    }
  }
  return out;
}

// Renewal process with derived diagnostics on a grid.
struct RenewalProcess {
  WaitingTimeDistribution wtd;
  double rate = 0.0;
  RVec t_grid, g, p0, p1, pf;

  static RenewalProcess make(WaitingTimeDistribution w, double t_max, int n_steps = 0) {
    if (!(t_max > 0.0)) throw config_error("renewal process: t_max must be > 0");
    RenewalProcess rp;
    rp.rate = w.mean_rate();
    if (n_steps <= 0)
      n_steps = std::max(400, static_cast<int>(std::ceil(40.0 * w.rate_scale() * t_max)));
    rp.t_grid = RVec::LinSpaced(n_steps + 1, 0.0, t_max);
    rp.g = renewal_density(w, rp.t_grid);
    const ResidualSurvival rs = residual_and_survival(w, rp.t_grid);
    rp.p0 = rs.p0;
    rp.p1 = rs.p1;
    rp.pf = rs.pf;
    rp.wtd = std::move(w);
    return rp;
  }
};

// First-gap convention: Stationary draws the first gap from the residual
// distribution p1 (arrivals began in the infinite past); FirstJumpW draws it
// from w itself (time origin immediately after a collision).
enum class ArrivalConvention { Stationary, FirstJumpW };

inline std::vector<double> sample_arrival_times(const WaitingTimeDistribution& wtd,
                                                double horizon, std::uint64_t seed,
                                                ArrivalConvention convention) {
  if (!(horizon > 0.0)) throw config_error("sample_arrival_times: horizon must be > 0");
  Rng rng(seed);
  std::vector<double> times;
  double t = convention == ArrivalConvention::Stationary ? wtd.sample_residual_gap(rng)
                                                         : wtd.sample_gap(rng);
  while (t < horizon) {
    times.push_back(t);
    t += wtd.sample_gap(rng);
  }
  return times;
}

}  // namespace micromaser
