#include "spinsq/spin_algebra.hpp"

#include <cmath>
#include <string>

#include "spinsq/errors.hpp"

namespace spinsq {

SpinQuantumNumber SpinQuantumNumber::from_two_j(int two_j) {
  if (two_j < 1) {
    throw Error(ErrorCategory::InvalidArgument,
                "2J must be >= 1, got " + std::to_string(two_j));
  }
  return SpinQuantumNumber(two_j);
}

SpinQuantumNumber SpinQuantumNumber::from_j(double j) {
  const double twice = 2.0 * j;
  const double rounded = std::round(twice);
  if (!std::isfinite(j) || std::abs(twice - rounded) > 1e-9) {
    throw Error(ErrorCategory::InvalidArgument,
                "J must be a positive multiple of 1/2, got " + std::to_string(j));
  }
  return from_two_j(static_cast<int>(rounded));
}

SpinOperators build_spin_operators(SpinQuantumNumber spin, int max_dim) {
  const int d = spin.dim();
  if (d > max_dim) {
    throw Error(ErrorCategory::DimensionOverflow,
                "Hilbert-space dimension " + std::to_string(d) +
                    " exceeds the configured maximum " + std::to_string(max_dim));
  }
  const double j = spin.j();

  ComplexMatrix jplus = ComplexMatrix::Zero(d, d);
  ComplexMatrix jz = ComplexMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = j - k;
    jz(k, k) = m;
    // J+ maps column k (m) to row k-1 (m+1).
    if (k > 0) jplus(k - 1, k) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  const ComplexMatrix jminus = jplus.adjoint();

  SpinOperators ops{spin, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  ops.jx = 0.5 * (jplus + jminus);
  ops.jy = Complex(0.0, -0.5) * (jplus - jminus);
  ops.jz = std::move(jz);
  ops.jy2 = ops.jy * ops.jy;
  ops.jz2 = ops.jz * ops.jz;
  ops.m_values = ops.jz.diagonal().real();
  ops.jx_sparse = ops.jx.sparseView();
  ops.jy_sparse = ops.jy.sparseView();
  ops.jy2_sparse = ops.jy2.sparseView();
  return ops;
}

DensityMatrix css_x(const SpinOperators& ops) {
  // Amplitudes 2^{-J} sqrt(C(2J, J-m)): every atom in (|1> + |2>)/sqrt(2).
  const int n = ops.spin.two_j();
  const int d = ops.dim();
  Eigen::VectorXcd psi(d);
  for (int k = 0; k < d; ++k) {
    const double log_binom =
        std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    psi(k) = std::exp(0.5 * log_binom - 0.5 * n * std::log(2.0));
  }
  psi.normalize();
  return DensityMatrix(psi * psi.adjoint());
}

void DensityMatrix::check(const Tolerances& tol) const {
  if (rho_.rows() != rho_.cols() || rho_.rows() == 0) {
    throw Error(ErrorCategory::InvalidArgument, "density matrix must be square and non-empty");
  }
  const Complex tr = rho_.trace();
  if (std::abs(tr - 1.0) > tol.trace) {
    throw Error(ErrorCategory::InvalidArgument,
                "density matrix trace deviates from 1 by " + std::to_string(std::abs(tr - 1.0)));
  }
  const double asym = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > tol.hermiticity) {
    throw Error(ErrorCategory::InvalidArgument,
                "density matrix is not Hermitian (max deviation " + std::to_string(asym) + ")");
  }
  const double lowest = min_eigenvalue();
  if (lowest < tol.min_eigenvalue) {
    throw Error(ErrorCategory::PositivityViolation,
                "density matrix has eigenvalue " + std::to_string(lowest));
  }
}

double DensityMatrix::min_eigenvalue() const {
  const ComplexMatrix h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double expectation(const ComplexMatrix& op, const ComplexMatrix& rho) {
  if (op.rows() != rho.rows() || op.cols() != rho.cols()) {
    throw Error(ErrorCategory::DimensionMismatch, "operator and state dimensions differ");
  }
  // Tr[A rho] = sum_ij A_ij rho_ji without forming the product.
  const Complex tr = (op.transpose().cwiseProduct(rho)).sum();
  if (std::abs(tr.imag()) > 1e-9 * std::max(1.0, std::abs(tr.real()))) {
    throw Error(ErrorCategory::InvalidArgument,
                "expectation value has imaginary part " + std::to_string(tr.imag()));
  }
  return tr.real();
}

double purity(const ComplexMatrix& rho) {
  return (rho.transpose().cwiseProduct(rho)).sum().real();
}

double variance(const ComplexMatrix& op, const ComplexMatrix& rho) {
  const double mean = expectation(op, rho);
  return expectation(op * op, rho) - mean * mean;
}

double hermitize_and_normalize(ComplexMatrix& rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  rho /= tr;
  return std::abs(tr - 1.0);
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCategory::DimensionMismatch, "trace_distance: dimensions differ");
  }
  const ComplexMatrix diff = a - b;
  const ComplexMatrix h = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

}  // namespace spinsq
