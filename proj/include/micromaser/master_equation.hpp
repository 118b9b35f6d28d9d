#pragma once

// Micromaser master equations: cavity Lindbladian, the full six-channel
// generator, the weak-coupling thermal limit, analytic steady states, the
// renewal memory kernel in Laplace space, and Markovian propagation.

#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "micromaser/collision.hpp"
#include "micromaser/common.hpp"
#include "micromaser/fock.hpp"

namespace micromaser {

struct MicromaserParams {
  double omega = 1.0;   // cavity mode frequency
  double gamma = 1.0;   // cavity decay rate
  double nbar = 0.0;    // cavity-reservoir thermal occupation
  double R = 1.0;       // mean atomic arrival rate
  double p = 1.0;       // excited-state probability of incoming atoms
  double theta = 1.0;   // vacuum Rabi angle (Omega * tau_int)
  TruncationConfig trunc;

  void validate() const {
    if (!(omega > 0.0)) throw config_error("params: omega must be > 0");
    if (!(gamma >= 0.0)) throw config_error("params: gamma must be >= 0");
    if (!(nbar >= 0.0)) throw config_error("params: nbar must be >= 0");
    if (!(R >= 0.0)) throw config_error("params: R must be >= 0");
    if (!(p >= 0.0 && p <= 1.0)) throw config_error("params: p must lie in [0, 1]");
    if (!(theta >= 0.0)) throw config_error("params: theta must be >= 0");
    if (gamma == 0.0 && R == 0.0)
      throw config_error("params: at least one of gamma, R must be positive");
    trunc.validate();
  }

  // Inverse temperatures (k_B = 1), possibly infinite or negative.
  // nbar = (exp(omega beta_c) - 1)^-1, p = (exp(omega beta_a) + 1)^-1.
  double beta_c() const { return std::log((nbar + 1.0) / nbar) / omega; }
  double beta_a() const { return std::log((1.0 - p) / p) / omega; }
  double temperature_c() const { return 1.0 / beta_c(); }
  double temperature_a() const { return 1.0 / beta_a(); }
};

// Cavity Lindbladian: -i omega [a^+a, .] + (nbar+1) gamma D[a] + nbar gamma D[a^+].
inline Superoperator cavity_liouvillian(const MicromaserParams& pr) {
  pr.validate();
  const LadderOperators lad = ladder_operators(pr.trunc);
  Superoperator gen = commutator_generator(pr.omega * lad.n_op);
  gen += (pr.nbar + 1.0) * pr.gamma * dissipator(lad.a);
  gen += pr.nbar * pr.gamma * dissipator(lad.a_dag);
  return gen;
}

// The six labelled jump operators of the regrouped master equation.
// C_{-1}, D_1 exchange photons with the cavity reservoir; C_1, D_{-1}
// exchange with the atomic beam; C_0, D_0 are atomic transits with no
// photon-number change.
enum class ChannelLabel { Cm1, C0, C1, Dm1, D0, D1 };

inline const char* channel_name(ChannelLabel l) {
  switch (l) {
    case ChannelLabel::Cm1: return "Cm1";
    case ChannelLabel::C0: return "C0";
    case ChannelLabel::C1: return "C1";
    case ChannelLabel::Dm1: return "Dm1";
    case ChannelLabel::D0: return "D0";
    case ChannelLabel::D1: return "D1";
  }
  return "?";
}

inline FockOperator channel_operator(ChannelLabel label, const MicromaserParams& pr) {
  const LadderOperators lad = ladder_operators(pr.trunc);
  const TruncationConfig& tc = pr.trunc;
  const double th = pr.theta;
  switch (label) {
    case ChannelLabel::Cm1:
      return std::sqrt((pr.nbar + 1.0) * pr.gamma) * lad.a;
    case ChannelLabel::D1:
      return std::sqrt(pr.nbar * pr.gamma) * lad.a_dag;
    case ChannelLabel::C1:
      return std::sqrt(pr.p * pr.R) *
             diag_number_function([&](int n) { return sinc_sqrt(th, n); }, tc) * lad.a_dag;
    case ChannelLabel::Dm1:
      return std::sqrt((1.0 - pr.p) * pr.R) *
             diag_number_function([&](int n) { return sinc_sqrt(th, n + 1); }, tc) * lad.a;
    case ChannelLabel::C0:
      return std::sqrt(pr.p * pr.R) *
             diag_number_function([&](int n) { return cos_sqrt(th, n + 1); }, tc);
    case ChannelLabel::D0:
      return std::sqrt((1.0 - pr.p) * pr.R) *
             diag_number_function([&](int n) { return cos_sqrt(th, n); }, tc);
  }
  throw config_error("channel_operator: unknown label");
}

inline const std::vector<ChannelLabel>& all_channel_labels() {
  static const std::vector<ChannelLabel> labels = {
      ChannelLabel::Cm1, ChannelLabel::C0, ChannelLabel::C1,
      ChannelLabel::Dm1, ChannelLabel::D0, ChannelLabel::D1};
  return labels;
}

// Full micromaser generator in six-channel form,
//   -i omega [a^+a, .] + sum_i D[C_i] + D[D_i],
// which regroups L_S + R F_a.
inline Superoperator full_liouvillian(const MicromaserParams& pr) {
  pr.validate();
  const LadderOperators lad = ladder_operators(pr.trunc);
  Superoperator gen = commutator_generator(pr.omega * lad.n_op);
  for (ChannelLabel label : all_channel_labels())
    gen += dissipator(channel_operator(label, pr));
  return gen;
}

// Weak-coupling (theta << 1) thermal form: the beam acts as a second thermal
// reservoir with gain rate p theta^2 R and loss rate (1-p) theta^2 R. Agrees
// with the full generator to O(theta^4) on low-lying levels.
inline Superoperator weak_coupling_generator(const MicromaserParams& pr) {
  pr.validate();
  const LadderOperators lad = ladder_operators(pr.trunc);
  const double t2 = pr.theta * pr.theta;
  Superoperator gen = cavity_liouvillian(pr);
  gen += pr.p * t2 * pr.R * dissipator(lad.a_dag);
  gen += (1.0 - pr.p) * t2 * pr.R * dissipator(lad.a);
  return gen;
}

// Steady-state photon-number distribution from the product formula
//   P(n) = P(0) prod_m [p R sin^2(sqrt m theta)/m + gamma nbar]
//                     / [(1-p) R sin^2(sqrt m theta)/m + gamma(nbar+1)],
// normalized over the truncated space. Accumulated in log space.
inline DensityMatrix steady_state_analytic(const MicromaserParams& pr) {
  pr.validate();
  const int d = pr.trunc.dim();
  RVec logp(d);
  logp(0) = 0.0;
  for (int m = 1; m < d; ++m) {
    const double s2 = std::pow(std::sin(pr.theta * std::sqrt(static_cast<double>(m))), 2) / m;
    const double num = pr.p * pr.R * s2 + pr.gamma * pr.nbar;
    const double den = (1.0 - pr.p) * pr.R * s2 + pr.gamma * (pr.nbar + 1.0);
    if (!(den > 0.0))
      throw numeric_error("steady_state_analytic: vanishing denominator at level " +
                          std::to_string(m));
    logp(m) = logp(m - 1) + std::log(num) - std::log(den);  // -inf marks a trap
  }
  const double shift = logp.maxCoeff();
  RVec pop(d);
  for (int n = 0; n < d; ++n) pop(n) = std::exp(logp(n) - shift);
  pop /= pop.sum();

  if (pop(d - 1) >= pr.trunc.tail_tol)
    throw numeric_error("steady_state_analytic: population " + std::to_string(pop(d - 1)) +
                        " at truncation level n_max = " + std::to_string(pr.trunc.n_max) +
                        " exceeds tail_tol");
  return DensityMatrix::from_populations(pop);
}

// Laplace-domain memory kernel of the renewal master equation,
//   ~K(s) = (1 - (~g(s) - 1/s) R F_a)^-1.
// Identity for Poissonian statistics, where ~g(s) = 1/s.
inline Superoperator memory_kernel_laplace(const MicromaserParams& pr,
                                           const WaitingTimeDistribution& wtd, Complex s) {
  pr.validate();
  if (!(s.real() > 0.0))
    throw config_error("memory_kernel_laplace: need Re(s) > 0");
  const Complex wl = wtd.laplace(s);
  const Complex g_tilde = wl / (wtd.mean_rate() * (1.0 - wl));
  const Superoperator fa = ancilla_map(kraus_operators(pr.theta, pr.p, pr.trunc));
  const Eigen::Index n = fa.mat.rows();
  CMat m = CMat::Identity(n, n) - (g_tilde - 1.0 / s) * pr.R * fa.mat;
  Eigen::PartialPivLU<CMat> lu(m);
  const double rc = lu.rcond();
  if (rc < 1e-14)
    throw numeric_error("memory_kernel_laplace: singular kernel matrix (rcond = " +
                        std::to_string(rc) + ")");
  return Superoperator(lu.inverse(), fa.dim);
}

struct MemoryKernelEval {
  std::vector<Complex> s_grid;
  std::vector<Superoperator> samples;
};

inline MemoryKernelEval memory_kernel_eval(const MicromaserParams& pr,
                                           const WaitingTimeDistribution& wtd,
                                           const std::vector<Complex>& s_grid) {
  MemoryKernelEval out;
  out.s_grid = s_grid;
  out.samples.reserve(s_grid.size());
  for (Complex s : s_grid) out.samples.push_back(memory_kernel_laplace(pr, wtd, s));
  return out;
}

namespace detail {

// Dormand-Prince 5(4) on the vectorized state, for generators too large to
// exponentiate densely.
inline CVec integrate_rk45(const CMat& gen, CVec v, double t_final) {
  if (t_final <= 0.0) return v;
  const double atol = 1e-12, rtol = 1e-11;
  double t = 0.0;
  double h = std::min(t_final, 0.1 / std::max(1.0, gen.cwiseAbs().maxCoeff()));
  auto f = [&](const CVec& y) -> CVec { return gen * y; };
  while (t < t_final) {
    h = std::min(h, t_final - t);
    const CVec k1 = f(v);
    const CVec k2 = f(v + h * (1.0 / 5.0) * k1);
    const CVec k3 = f(v + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    const CVec k4 = f(v + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    const CVec k5 = f(v + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                               64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
    const CVec k6 = f(v + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 +
                               46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4 -
                               5103.0 / 18656.0 * k5));
    const CVec y5 = v + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                             2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    const CVec k7 = f(y5);
    const CVec y4 = v + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 +
                             393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5 +
                             187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
    const double err = (y5 - y4).cwiseAbs().maxCoeff();
    const double tol = atol + rtol * y5.cwiseAbs().maxCoeff();
    if (err <= tol) {
      t += h;
      v = y5;
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
    h *= std::clamp(factor, 0.2, 5.0);
    if (!(h > 0.0) || !std::isfinite(h))
      throw numeric_error("evolve_markov: step-size failure in adaptive integration");
  }
  return v;
}

}  // namespace detail

// exp(gen * t) as a superoperator; dense scaling-and-squaring.
inline Superoperator evolution_operator(const Superoperator& gen, double t) {
  CMat m = (gen.mat * t).exp();
  return Superoperator(std::move(m), gen.dim);
}

inline DensityMatrix evolve_markov(const Superoperator& gen, const DensityMatrix& rho0,
                                   double t) {
  if (!(t >= 0.0)) throw config_error("evolve_markov: t must be >= 0");
  if (rho0.dim() != gen.dim) throw config_error("evolve_markov: dimension mismatch");
  if (t == 0.0) return rho0;
  CVec v;
  if (gen.mat.rows() <= 1600)
    v = evolution_operator(gen, t).mat * vectorize(rho0.rho);
  else
    v = detail::integrate_rk45(gen.mat, vectorize(rho0.rho), t);
  return DensityMatrix(hermitize(unvectorize(v, gen.dim)));
}

// Gamma -> 0 steady state for super-bunched arrivals, g(t) = A exp(-Gamma t) + 1:
// a (1+A)^-1 : A(1+A)^-1 mixture of the Poisson steady state at enhanced rate
// A R with the ancilla-free cavity equilibrium.
inline DensityMatrix superbunched_steady_state(const MicromaserParams& pr, double a) {
  pr.validate();
  if (!(a > 0.0)) throw config_error("superbunched_steady_state: A must be > 0");
  const Superoperator cav = cavity_liouvillian(pr);
  const Superoperator fa = ancilla_map(kraus_operators(pr.theta, pr.p, pr.trunc));
  const DensityMatrix rho_burst = steady_state_nullspace(cav + a * pr.R * fa);
  const DensityMatrix rho_eq = steady_state_nullspace(cav);
  return DensityMatrix((rho_burst.rho + a * rho_eq.rho) / (1.0 + a));
}

}  // namespace micromaser
