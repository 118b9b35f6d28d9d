#pragma once

// Truncated Fock-space linear algebra: ladder operators, diagonal operator
// functions, Lindblad dissipators as superoperators, stationary-state solves
// and the trace-distance metric. Everything downstream builds on this layer.

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "micromaser/common.hpp"
#include "micromaser/random.hpp"

namespace micromaser {

struct TruncationConfig {
  int n_max = 1;          // highest retained Fock level; dimension = n_max + 1
  double tail_tol = 1e-9; // max tolerated steady-state population at n_max

  int dim() const { return n_max + 1; }

  void validate() const {
    if (n_max < 1) throw config_error("truncation: n_max must be >= 1");
    if (!(tail_tol > 0.0 && tail_tol < 1.0))
      throw config_error("truncation: tail_tol must lie in (0, 1)");
  }
};

struct DensityMatrix {
  CMat rho;

  DensityMatrix() = default;
  explicit DensityMatrix(CMat m) : rho(std::move(m)) {}

  int dim() const { return static_cast<int>(rho.rows()); }
  double trace_real() const { return rho.trace().real(); }

  RVec populations() const { return rho.diagonal().real(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(rho));
    return es.eigenvalues().minCoeff();
  }

  static DensityMatrix number_state(int n, int dim) {
    CMat m = CMat::Zero(dim, dim);
    m(n, n) = 1.0;
    return DensityMatrix(m);
  }

  static DensityMatrix from_populations(const RVec& p) {
    CMat m = CMat::Zero(p.size(), p.size());
    m.diagonal() = p.cast<Complex>();
    return DensityMatrix(m);
  }
};

// Superoperator on vectorized density matrices (column stacking).
struct Superoperator {
  CMat mat;  // dim^2 x dim^2
  int dim = 0;

  Superoperator() = default;
  Superoperator(CMat m, int d) : mat(std::move(m)), dim(d) {}

  static Superoperator zero(int d) {
    return Superoperator(CMat::Zero(static_cast<Eigen::Index>(d) * d,
                                    static_cast<Eigen::Index>(d) * d), d);
  }
  static Superoperator identity(int d) {
    return Superoperator(CMat::Identity(static_cast<Eigen::Index>(d) * d,
                                        static_cast<Eigen::Index>(d) * d), d);
  }

  CMat apply(const CMat& rho) const { return unvectorize(mat * vectorize(rho), dim); }

  // max |vec(I)^T mat|: zero for a trace-preserving generator.
  double trace_defect() const {
    CVec id = vectorize(CMat::Identity(dim, dim));
    return (id.transpose() * mat).cwiseAbs().maxCoeff();
  }

  Superoperator& operator+=(const Superoperator& o) {
    mat += o.mat;
    return *this;
  }
  friend Superoperator operator+(Superoperator a, const Superoperator& b) {
    a += b;
    return a;
  }
  friend Superoperator operator*(double s, Superoperator a) {
    a.mat *= s;
    return a;
  }
};

inline Superoperator left_mult(const FockOperator& l) {
  const int d = static_cast<int>(l.rows());
  return Superoperator(kron(CMat::Identity(d, d), l), d);
}

inline Superoperator right_mult(const FockOperator& r) {
  const int d = static_cast<int>(r.rows());
  return Superoperator(kron(r.transpose(), CMat::Identity(d, d)), d);
}

// rho -> l rho r
inline Superoperator sandwich(const FockOperator& l, const FockOperator& r) {
  return Superoperator(kron(r.transpose(), l), static_cast<int>(l.rows()));
}

struct LadderOperators {
  FockOperator a;
  FockOperator a_dag;
  FockOperator n_op;
};

inline LadderOperators ladder_operators(const TruncationConfig& trunc) {
  trunc.validate();
  const int d = trunc.dim();
  FockOperator a = FockOperator::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  LadderOperators out;
  out.a = a;
  out.a_dag = a.adjoint();
  out.n_op = out.a_dag * out.a;
  return out;
}

// Diagonal operator f(N). f must be finite on 0..n_max (removable
// singularities like sin(theta sqrt(n))/sqrt(n) at n=0 resolved by the caller).
inline FockOperator diag_number_function(const std::function<double(int)>& f,
                                         const TruncationConfig& trunc) {
  trunc.validate();
  const int d = trunc.dim();
  FockOperator m = FockOperator::Zero(d, d);
  for (int n = 0; n < d; ++n) {
    const double v = f(n);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "diag_number_function: non-finite value at Fock level " << n;
      throw config_error(msg.str());
    }
    m(n, n) = v;
  }
  return m;
}

// sin(theta sqrt(n))/sqrt(n), continued to theta at n=0.
inline double sinc_sqrt(double theta, int n) {
  if (n == 0) return theta;
  const double r = std::sqrt(static_cast<double>(n));
  return std::sin(theta * r) / r;
}

inline double cos_sqrt(double theta, int n) {
  return std::cos(theta * std::sqrt(static_cast<double>(n)));
}

// rho -> L rho L^+ - 1/2 {L^+ L, rho}
inline Superoperator dissipator(const FockOperator& l) {
  if (l.rows() != l.cols()) throw config_error("dissipator: operator not square");
  const int d = static_cast<int>(l.rows());
  const CMat ldl = l.adjoint() * l;
  CMat m = kron(l.conjugate(), l);
  m -= 0.5 * kron(CMat::Identity(d, d), ldl);
  m -= 0.5 * kron(ldl.transpose(), CMat::Identity(d, d));
  return Superoperator(std::move(m), d);
}

// rho -> -i [h, rho]
inline Superoperator commutator_generator(const FockOperator& h) {
  const int d = static_cast<int>(h.rows());
  const Complex mi(0.0, -1.0);
  CMat m = mi * (kron(CMat::Identity(d, d), h) - kron(h.transpose(), CMat::Identity(d, d)));
  return Superoperator(std::move(m), d);
}

namespace detail {

// Residual of a candidate null vector, scaled by the generator magnitude.
inline double nullspace_residual(const CMat& gen, const CVec& v, double scale) {
  return (gen * v).cwiseAbs().maxCoeff() / scale;
}

// Shift-inverted power iteration against a sparse LU factorization. The
// generator is singular by construction; a tiny shift makes the factorization
// well defined while amplifying the null direction by ~1/shift per sweep.
inline std::vector<CVec> nullspace_basis_iterative(const CMat& gen, double scale,
                                                   int probes) {
  using SpMat = Eigen::SparseMatrix<Complex>;
  const Eigen::Index n = gen.rows();
  const double shift = 1e-9 * scale;

  SpMat shifted(n, n);
  {
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 8);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        Complex v = gen(i, j);
        if (i == j) v -= shift;
        if (v != Complex(0.0, 0.0)) trip.emplace_back(i, j, v);
      }
    }
    shifted.setFromTriplets(trip.begin(), trip.end());
  }
  Eigen::SparseLU<SpMat> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success)
    throw numeric_error("steady_state_nullspace: sparse LU factorization failed");

  std::vector<CVec> basis;
  Rng rng(0x6d61736572ULL);
  for (int probe = 0; probe < probes; ++probe) {
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v(i) = Complex(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    v.normalize();
    for (int it = 0; it < 6; ++it) {
      v = lu.solve(v);
      v.normalize();
      if (nullspace_residual(gen, v, scale) < 1e-12) break;
    }
    // Deflate against directions already found; what survives with a small
    // residual is an independent null direction.
    for (const CVec& b : basis) v -= b.dot(v) * b;
    if (v.norm() < 1e-6) continue;
    v.normalize();
    if (nullspace_residual(gen, v, scale) < 1e-8) basis.push_back(v);
  }
  return basis;
}

// Dense route for small problems: smallest singular vectors, which also
// yields an exact degeneracy count.
inline std::vector<CVec> nullspace_basis_svd(const CMat& gen, double scale) {
  Eigen::BDCSVD<CMat> svd(gen, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  std::vector<CVec> basis;
  for (Eigen::Index k = sv.size() - 1; k >= 0; --k) {
    if (sv(k) < 1e-10 * scale) basis.push_back(svd.matrixV().col(k));
  }
  return basis;
}

}  // namespace detail

// Unique stationary state of a trace-preserving generator. Dense SVD below
// dim^2 = 1024; sparse shift-invert iteration above (the generator matrices
// are banded, so the factorization is cheap at any desk-scale dimension).
inline DensityMatrix steady_state_nullspace(const Superoperator& gen) {
  const double scale = gen.mat.cwiseAbs().maxCoeff();
  if (scale == 0.0)
    throw numeric_error("steady_state_nullspace: zero generator (null space dimension " +
                        std::to_string(gen.mat.rows()) + ")");

  std::vector<CVec> basis = gen.mat.rows() <= 1024
                                ? detail::nullspace_basis_svd(gen.mat, scale)
                                : detail::nullspace_basis_iterative(gen.mat, scale, 4);
  if (basis.empty())
    throw numeric_error("steady_state_nullspace: no null vector found (residual above threshold)");
  if (basis.size() > 1)
    throw numeric_error("steady_state_nullspace: degenerate null space (dimension " +
                        std::to_string(basis.size()) + ")");

  CMat rho = unvectorize(basis.front(), gen.dim);
  rho = hermitize(rho);
  const double tr = rho.trace().real();
  if (std::abs(tr) < 1e-10 * rho.cwiseAbs().maxCoeff() * gen.dim)
    throw numeric_error("steady_state_nullspace: null vector is traceless");
  rho /= tr;

  const double resid = (gen.mat * vectorize(rho)).cwiseAbs().maxCoeff();
  if (resid >= 1e-10 * std::max(1.0, scale))
    throw numeric_error("steady_state_nullspace: residual " + std::to_string(resid) +
                        " above threshold");
  return DensityMatrix(std::move(rho));
}

// 1/2 ||rho1 - rho2||_1 via the spectrum of the Hermitian difference.
inline double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  if (rho1.dim() != rho2.dim())
    throw config_error("trace_distance: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(rho1.rho - rho2.rho));
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace micromaser
