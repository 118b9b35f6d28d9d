#pragma once

// Shared aliases, error types and vectorization helpers used across the
// library. Conventions: hbar = k_B = 1, rates in units of the cavity decay
// gamma unless a config says otherwise. Density matrices are stored dense;
// superoperators act on column-stacked matrices, vec(A X B) = (B^T (x) A) vec(X).

#include <charconv>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace micromaser {

inline constexpr const char* kVersion = "0.1.0";

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

// Operators on the truncated Fock space are plain dense complex matrices.
using FockOperator = Eigen::MatrixXcd;

// Invalid configuration or violated operation precondition (CLI exit 2).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical-validity failure: truncation leakage, singular solves,
// non-convergent quadrature (CLI exit 3).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline CVec vectorize(const CMat& m) {
  return Eigen::Map<const CVec>(m.data(), m.size());
}

inline CMat unvectorize(const CVec& v, Eigen::Index dim) {
  return Eigen::Map<const CMat>(v.data(), dim, dim);
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CMat hermitize(const CMat& m) { return 0.5 * (m + m.adjoint()); }

inline double hermiticity_defect(const CMat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

// Shortest decimal form that parses back to the identical double, so text
// dumps round-trip bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw config_error("could not parse number: '" + tok + "'");
  return v;
}

}  // namespace micromaser
