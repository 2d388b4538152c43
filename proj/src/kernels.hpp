#pragma once

// Superoperator kernels specialised to the collective-spin structure:
// J_z is diagonal and J_y is tridiagonal in the Dicke basis, so every term
// below costs O(d^2) instead of a dense d^3 product.

#include "spinsq/spin_algebra.hpp"

namespace spinsq::detail {

// (J_z rho + rho J_z)_{ij} = (m_i + m_j) rho_{ij}
inline ComplexMatrix jz_anticommutator(const ComplexMatrix& rho, const Eigen::VectorXd& m) {
  const auto d = rho.rows();
  ComplexMatrix out(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) out(r, c) = (m(r) + m(c)) * rho(r, c);
  }
  return out;
}

// (D[J_z] rho)_{ij} = -(m_i - m_j)^2 rho_{ij} / 2
inline void add_jz_dissipator(const ComplexMatrix& rho, const Eigen::VectorXd& m, double scale,
                              ComplexMatrix& out) {
  const auto d = rho.rows();
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      const double dm = m(r) - m(c);
      out(r, c) += (-0.5 * scale * dm * dm) * rho(r, c);
    }
  }
}

inline double jz_mean(const ComplexMatrix& rho, const Eigen::VectorXd& m) {
  return (rho.diagonal().real().array() * m.array()).sum();
}

inline double jz2_mean(const ComplexMatrix& rho, const Eigen::VectorXd& m) {
  return (rho.diagonal().real().array() * m.array().square()).sum();
}

// Re Tr[A rho] for a sparse Hermitian A.
inline double sparse_mean(const SparseComplexMatrix& a, const ComplexMatrix& rho) {
  Complex acc = 0.0;
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseComplexMatrix::InnerIterator it(a, k); it; ++it) {
      acc += it.value() * rho(it.col(), it.row());
    }
  }
  return acc.real();
}

// M D[J_z] rho - i lambda [J_y, J_z rho + rho J_z] + (lambda^2 / M) D[J_y] rho
inline ComplexMatrix feedback_drift(const ComplexMatrix& rho, double lambda, double m_strength,
                                    const SpinOperators& ops) {
  const auto d = rho.rows();
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  add_jz_dissipator(rho, ops.m_values, m_strength, out);
  if (lambda != 0.0) {
    const ComplexMatrix a = jz_anticommutator(rho, ops.m_values);
    const ComplexMatrix comm = ops.jy_sparse * a - a * ops.jy_sparse;
    out += Complex(0.0, -lambda) * comm;

    const ComplexMatrix jy_rho = ops.jy_sparse * rho;
    const ComplexMatrix sandwich = jy_rho * ops.jy_sparse;
    const ComplexMatrix left = ops.jy2_sparse * rho;
    const ComplexMatrix right = rho * ops.jy2_sparse;
    out += (lambda * lambda / m_strength) * (sandwich - 0.5 * (left + right));
  }
  return out;
}

}  // namespace spinsq::detail
