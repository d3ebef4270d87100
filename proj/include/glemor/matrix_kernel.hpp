#ifndef GLEMOR_MATRIX_KERNEL_HPP
#define GLEMOR_MATRIX_KERNEL_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>

namespace glemor {

using Dense = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Sparse = Eigen::SparseMatrix<double>;

// Largest algebraic eigenvalue of an n-dimensional symmetric operator given as a
// matvec closure.  Deterministic start vector; Lanczos with full reorthogonalization;
// converged when the Ritz estimate moves < rtol relatively over 3 consecutive steps.
// Throws with the last estimate on non-convergence.
double lanczos_max_eig(Eigen::Index n, const std::function<Vector(const Vector&)>& apply,
                       double rtol, const char* what, int max_steps = 400,
                       Vector* eigenvector = nullptr);

// Eigenpairs of Z·Zᵀ with eigenvalues above drop_tol, descending; computed from
// the k×k Gram problem, never forming the n×n product.
struct TruncatedEig {
  Dense U;       // n×k, orthonormal columns
  Vector sigma;  // k nonnegative eigenvalues, descending
};

TruncatedEig truncated_eig_psd(const Dense& Z, double drop_tol);

// Thinnest factor Z' with ‖ZZᵀ − Z'Z'ᵀ‖₂ ≤ rel_tol·‖ZZᵀ‖₂.
Dense compress_factor(const Dense& Z, double rel_tol);

// Square-root factor of a dense symmetric PSD matrix: columns U·√λ for λ > drop_tol,
// descending.  Small negative round-off eigenvalues are clamped to zero.
Dense psd_sqrt_factor(const Dense& X, double drop_tol = 0.0);

// Largest singular value by power iteration on AᵀA.  Deterministic start vector;
// converged when the estimate moves < rtol relatively over 3 consecutive iterates.
double spectral_norm(const Dense& A, double rtol = 1e-10);
double spectral_norm(const Sparse& A, double rtol = 1e-10);

// Smallest singular value.  Sparse path: inverse power iteration on AᵀA through a
// sparse LU; throws on singular input.
double smallest_singular_value(const Dense& A, double rtol = 1e-10);
double smallest_singular_value(const Sparse& A, double rtol = 1e-10);

// 1-norm condition number.  Dense: exact via the inverse.  Sparse: Hager's
// lower-bound estimator for ‖A⁻¹‖₁ through a sparse LU.
double cond_1norm(const Dense& A);
double cond_1norm(const Sparse& A);

}  // namespace glemor

#endif
