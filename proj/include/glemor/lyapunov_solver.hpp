#ifndef GLEMOR_LYAPUNOV_SOLVER_HPP
#define GLEMOR_LYAPUNOV_SOLVER_HPP

#include "glemor/matrix_kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace glemor {

// Direct dense solve of A·X + X·Aᵀ + W = 0 by real Schur reduction and
// quasi-triangular back-substitution.  Throws "unstable mode" if A is not
// Hurwitz and "dense cap exceeded" above the dimension cap.
Dense solve_lyapunov_dense(const Dense& A, const Dense& W, int dense_cap = 600);

// Pre-factored real Schur form of A for repeated solves of A·X + X·Aᵀ + W = 0.
// No stability checks.
class SchurLyapunov {
 public:
  explicit SchurLyapunov(const Dense& A);
  Dense solve(const Dense& W) const;
  const Dense& matrix_t() const { return T_; }

 private:
  Dense U_, T_;
  std::vector<int> block_starts_;
};

// One-shot convenience wrapper around SchurLyapunov; no stability or cap checks.
Dense lyap_schur_solve(const Dense& A, const Dense& W);

struct LyapunovSolution {
  Dense Z;                     // low-rank factor, X ≈ Z·Zᵀ
  double residual_fro = 0.0;   // Frobenius norm of A·X + X·Aᵀ + B·Bᵀ
  double error_bound_2 = 0.0;  // residual_fro/(2σ_min(A)); 0 until σ_min is supplied
  int basis_dim = 0;           // Galerkin subspace dimension used
  bool converged = false;
};

// Spectral-norm error certificate ‖X − X̃‖₂ ≤ ‖R‖_F / (2σ_min(A)).
inline double certify_error(const LyapunovSolution& sol, double sigma_min_a) {
  if (sigma_min_a <= 0.0) throw std::invalid_argument("certify_error: sigma_min must be > 0");
  return sol.residual_fro / (2.0 * sigma_min_a);
}

// Block Krylov basis with the A·V image cached for cheap projections/residuals.
struct BlockArnoldi {
  Dense V;             // n×d orthonormal
  Dense W;             // A·V
  int last_block = 0;  // width of the newest block
};

namespace detail {

// Orthonormalize the incoming block against V with iterated re-orthogonalization;
// deflates columns below 1e-12 of the incoming norm.  Empty result = breakdown.
Dense orthonormalize_block(const Dense& V, Dense block);

}  // namespace detail

template <class Mat>
BlockArnoldi block_arnoldi_init(const Mat& A, const Dense& B) {
  BlockArnoldi basis;
  basis.V = detail::orthonormalize_block(Dense(B.rows(), 0), B);
  basis.W = A * basis.V;
  basis.last_block = int(basis.V.cols());
  return basis;
}

// One block-Arnoldi extension: orthonormalize A·(last block) against the basis.
// Returns false on full deflation (invariant subspace reached).
template <class Mat>
bool block_arnoldi_extend(const Mat& A, BlockArnoldi& basis) {
  if (basis.last_block == 0) return false;
  Dense fresh =
      detail::orthonormalize_block(basis.V, basis.W.rightCols(basis.last_block));
  if (fresh.cols() == 0) {
    basis.last_block = 0;
    return false;
  }
  Dense AV = A * fresh;
  basis.V.conservativeResize(Eigen::NoChange, basis.V.cols() + fresh.cols());
  basis.V.rightCols(fresh.cols()) = fresh;
  basis.W.conservativeResize(Eigen::NoChange, basis.W.cols() + fresh.cols());
  basis.W.rightCols(fresh.cols()) = AV;
  basis.last_block = int(fresh.cols());
  return true;
}

// Galerkin low-rank solve of A·X + X·Aᵀ + B·Bᵀ = 0 over the polynomial block
// Krylov subspace of A and B.  Projected equations are solved directly; the
// residual uses the next-block formula ‖R‖_F = √2·‖ṼᵀA·V·Y‖_F.  Residual decay
// is not assumed monotone: the best iterate seen is returned.
template <class Mat>
LyapunovSolution solve_lyapunov_lowrank(const Mat& A, const Dense& B, double fro_res_tol,
                                        int max_dim = 600, double sigma_min_a = -1.0) {
  if (fro_res_tol <= 0.0)
    throw std::invalid_argument("solve_lyapunov_lowrank: tolerance must be > 0");
  LyapunovSolution out;
  if (B.cols() == 0 || B.norm() == 0.0) {
    out.Z.resize(B.rows(), 0);
    out.converged = true;
    return out;
  }
  BlockArnoldi basis = block_arnoldi_init(A, B);
  const int first_block = basis.last_block;
  Dense best_y, best_v;
  double best_res = -1.0;
  int last_check = 0;
  while (true) {
    Dense fresh = detail::orthonormalize_block(basis.V, basis.W.rightCols(basis.last_block));
    const int d = int(basis.V.cols());
    const bool saturated = fresh.cols() == 0 || d + fresh.cols() > max_dim;
    // Batch the O(d³) projected solves: evaluate at saturation or after ~15% growth.
    if (saturated || d >= last_check + std::max(first_block, int(0.15 * d))) {
      last_check = d;
      Dense H = basis.V.transpose() * basis.W;
      Dense Bl = basis.V.transpose() * B;
      Dense Y = lyap_schur_solve(H, Bl * Bl.transpose());
      if (fresh.cols() == 0) {
        best_y = Y;
        best_v = basis.V;
        best_res = 0.0;
        break;
      }
      double res = std::sqrt(2.0) * (fresh.transpose() * (basis.W * Y)).norm();
      if (best_res < 0.0 || res < best_res) {
        best_y = Y;
        best_v = basis.V;
        best_res = res;
      }
      if (res <= fro_res_tol) break;
    }
    if (saturated) break;
    Dense AV = A * fresh;
    basis.V.conservativeResize(Eigen::NoChange, basis.V.cols() + fresh.cols());
    basis.V.rightCols(fresh.cols()) = fresh;
    basis.W.conservativeResize(Eigen::NoChange, basis.W.cols() + fresh.cols());
    basis.W.rightCols(fresh.cols()) = AV;
    basis.last_block = int(fresh.cols());
  }
  // Factor extraction Z = V·U·√λ with negative round-off eigenvalues clamped.
  Dense F = psd_sqrt_factor(best_y, 0.0);
  out.Z = best_v * F;
  out.residual_fro = best_res;
  out.basis_dim = int(best_v.cols());
  out.converged = best_res <= fro_res_tol;
  if (sigma_min_a > 0.0) out.error_bound_2 = certify_error(out, sigma_min_a);
  return out;
}

}  // namespace glemor

#endif
