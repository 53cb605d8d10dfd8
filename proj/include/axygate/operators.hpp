#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace axygate {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline MatrixXcd destroy_op(int n) {
  MatrixXcd a = MatrixXcd::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(double(k));
  return a;
}

inline MatrixXcd number_op(int n) {
  MatrixXcd m = MatrixXcd::Zero(n, n);
  for (int k = 0; k < n; ++k) m(k, k) = double(k);
  return m;
}

// Qubit basis: index 0 = |g>, 1 = |e>; sigma_z = diag(-1, +1).
inline MatrixXcd pauli_z() {
  MatrixXcd m = MatrixXcd::Zero(2, 2);
  m(0, 0) = -1.0;
  m(1, 1) = 1.0;
  return m;
}

inline MatrixXcd sigma_plus() {
  MatrixXcd m = MatrixXcd::Zero(2, 2);
  m(1, 0) = 1.0; // |e><g|
  return m;
}

// sigma^phi = sigma^+ e^{i phi} + sigma^- e^{-i phi}
inline MatrixXcd sigma_phi(double phi) {
  MatrixXcd m = MatrixXcd::Zero(2, 2);
  m(1, 0) = std::polar(1.0, phi);
  m(0, 1) = std::polar(1.0, -phi);
  return m;
}

// Geometric thermal state on a truncated mode, renormalized over the kept
// levels. p_n proportional to (nbar/(1+nbar))^n.
inline MatrixXcd thermal_state(double nbar, int levels) {
  if (levels < 2) throw std::invalid_argument("thermal_state: need at least 2 levels");
  if (nbar < 0) throw std::invalid_argument("thermal_state: nbar must be >= 0");
  MatrixXcd rho = MatrixXcd::Zero(levels, levels);
  if (nbar == 0.0) {
    rho(0, 0) = 1.0;
    return rho;
  }
  const double q = nbar / (1.0 + nbar);
  double w = 1.0, tot = 0.0;
  for (int n = 0; n < levels; ++n) {
    rho(n, n) = w;
    tot += w;
    w *= q;
  }
  rho /= tot;
  return rho;
}

// Tail weight beyond the kept levels for the untruncated geometric law.
inline double thermal_tail(double nbar, int levels) {
  if (nbar <= 0.0) return 0.0;
  return std::pow(nbar / (1.0 + nbar), levels);
}

// F = |Tr(A B^dag)| / sqrt(Tr(A A^dag) Tr(B B^dag))
inline double operator_fidelity(const MatrixXcd& a, const MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("operator_fidelity: dimension mismatch");
  const double na = std::abs((a * a.adjoint()).trace().real());
  const double nb = std::abs((b * b.adjoint()).trace().real());
  if (na <= 0.0 || nb <= 0.0)
    throw std::invalid_argument("operator_fidelity: zero-norm operator");
  return std::abs((a * b.adjoint()).trace()) / std::sqrt(na * nb);
}

// Reduced qubit state of rho on (q1 x q2) x (nb) x (nc).
inline Eigen::Matrix4cd trace_out_motion(const MatrixXcd& rho, int nb, int nc) {
  const int m = nb * nc;
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  for (int q = 0; q < 4; ++q)
    for (int p = 0; p < 4; ++p)
      for (int k = 0; k < m; ++k) out(q, p) += rho(q * m + k, p * m + k);
  return out;
}

// exp(-i H t) for Hermitian H via eigendecomposition.
inline MatrixXcd hermitian_propagator(const MatrixXcd& h, double t) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  const VectorXd& lam = es.eigenvalues();
  VectorXcd ph(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) ph(i) = std::polar(1.0, -lam(i) * t);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace axygate
