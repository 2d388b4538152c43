#pragma once

// Collective spin-J operators in the Dicke basis |J, m>, m = J, J-1, ..., -J
// (row/column 0 is m = +J). Every module shares this ordering.

#include <complex>
#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace spinsq {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr int kDefaultMaxDimension = 4001;

/// Spin quantum number stored as 2J so half-integer values stay exact.
class SpinQuantumNumber {
 public:
  static SpinQuantumNumber from_two_j(int two_j);
  /// Rejects values that are not a multiple of 1/2.
  static SpinQuantumNumber from_j(double j);

  int two_j() const noexcept { return two_j_; }
  double j() const noexcept { return 0.5 * two_j_; }
  int dim() const noexcept { return two_j_ + 1; }
  /// Number of spin-1/2 atoms, N = 2J.
  int n_atoms() const noexcept { return two_j_; }

  friend bool operator==(SpinQuantumNumber, SpinQuantumNumber) = default;

 private:
  explicit SpinQuantumNumber(int two_j) : two_j_(two_j) {}
  int two_j_;
};

/// Hermitian J_x, J_y, J_z plus the squares the dynamics needs on every step.
struct SpinOperators {
  SpinQuantumNumber spin;
  ComplexMatrix jx;
  ComplexMatrix jy;
  ComplexMatrix jz;
  ComplexMatrix jy2;
  ComplexMatrix jz2;
  // Diagonal of J_z (the m values) and banded J_x, J_y, J_y^2 for the
  // O(d^2) kernels in the integrators.
  Eigen::VectorXd m_values;
  SparseComplexMatrix jx_sparse;
  SparseComplexMatrix jy_sparse;
  SparseComplexMatrix jy2_sparse;

  int dim() const noexcept { return spin.dim(); }
};

/// Builds the operators from J+ with <J,m+1|J+|J,m> = sqrt(J(J+1) - m(m+1)).
/// Throws DimensionOverflow when 2J+1 exceeds max_dim.
SpinOperators build_spin_operators(SpinQuantumNumber spin,
                                   int max_dim = kDefaultMaxDimension);

/// Density matrix on the (2J+1)-dimensional Dicke manifold.
///
/// Construction does not validate; call check() where the invariants
/// (unit trace, Hermitian, positive semidefinite) must be enforced.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(ComplexMatrix rho) : rho_(std::move(rho)) {}

  const ComplexMatrix& matrix() const noexcept { return rho_; }
  Eigen::Index dim() const noexcept { return rho_.rows(); }

  struct Tolerances {
    double trace = 1e-9;
    double hermiticity = 1e-9;
    double min_eigenvalue = -1e-8;
  };
  /// Throws PositivityViolation or InvalidArgument on failure.
  void check(const Tolerances& tol) const;
  void check() const { check(Tolerances{}); }

  double min_eigenvalue() const;

 private:
  ComplexMatrix rho_;
};

/// Pure coherent spin state polarised along +x (the +J eigenvector of J_x).
DensityMatrix css_x(const SpinOperators& ops);

/// Re Tr[op rho]. The imaginary residue must stay below 1e-9.
double expectation(const ComplexMatrix& op, const ComplexMatrix& rho);
inline double expectation(const ComplexMatrix& op, const DensityMatrix& rho) {
  return expectation(op, rho.matrix());
}

/// Tr[rho^2].
double purity(const ComplexMatrix& rho);
inline double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

/// Variance <A^2> - <A>^2 of a Hermitian operator.
double variance(const ComplexMatrix& op, const ComplexMatrix& rho);

/// (rho + rho^dagger)/2 followed by trace renormalisation, in place.
/// Returns |Tr rho - 1| before renormalisation.
double hermitize_and_normalize(ComplexMatrix& rho);

/// Half the sum of |eigenvalues| of a - b (both Hermitian).
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace spinsq
