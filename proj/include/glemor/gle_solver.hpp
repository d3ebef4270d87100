#ifndef GLEMOR_GLE_SOLVER_HPP
#define GLEMOR_GLE_SOLVER_HPP

#include "glemor/lyapunov_solver.hpp"
#include "glemor/matrix_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace glemor {

// Generalized Lyapunov equation A·X + X·Aᵀ + Σ_j N_j·X·N_jᵀ + B·Bᵀ = 0, A Hurwitz.
template <class Mat>
struct GleProblem {
  Mat A;
  std::vector<Mat> N_list;
  Dense B;
  double scale_applied = 1.0;  // factor already multiplied into each N_j (1 = none)
};

using GleProblemDense = GleProblem<Dense>;
using GleProblemSparse = GleProblem<Sparse>;

// Output of the certified stationary iteration.  The spectral-norm certificate is
//   error_bound_2 = γ·Δ_k + ((1+γ)·‖R_k‖_F + γ·‖R_{k−1}‖_F) / (2σ_min(A)),
// recomputable from gamma, delta_history, inner_residuals and sigma_min.
struct CertifiedGleSolution {
  Dense Z;                              // X ≈ Z·Zᵀ for the (possibly rescaled) problem
  double error_bound_2 = 0.0;
  double gamma = 1.0;
  int iterations = 0;
  std::vector<double> inner_residuals;  // ‖R_k‖_F, one per outer iteration
  std::vector<double> delta_history;    // Δ_{k,k−1}, first entry belongs to k = 2
  std::vector<double> bound_history;    // certificate value, evaluated from k = 2
  double scale_applied = 1.0;
  double sigma_min = 0.0;               // σ_min(A) used in the certificate
  bool converged = false;
};

struct GleSolveOptions {
  int max_outer = 200;
  int max_inner_dim = 600;
  double zeta1 = 0.1;             // inner-tolerance split: certificate budget share
  double zeta2 = 0.9;             // inner-tolerance split: contraction budget share
  bool trust_gamma_one = false;   // caller certifies the problem is already contractive
  double gamma_override = -1.0;   // > 0: validation mode, no rescale, use this exact γ
  double sigma_min_hint = -1.0;   // > 0: reuse a precomputed σ_min(A)
};

// Cheap contraction majorant β = Σ_j σ₁(N_j)² / (2σ_min(A)) ≥ ‖L⁻¹Π‖₂.
template <class Mat>
double contraction_upper_bound(const Mat& A, const std::vector<Mat>& N_list,
                               double sigma_min_a = -1.0) {
  if (sigma_min_a <= 0.0) sigma_min_a = smallest_singular_value(A);
  if (sigma_min_a <= 0.0) throw std::runtime_error("contraction_upper_bound: singular A");
  double num = 0.0;
  for (const Mat& N : N_list) {
    const double s = spectral_norm(N);
    num += s * s;
  }
  return num / (2.0 * sigma_min_a);
}

// Multiplies every N_j by 1/√(β+δ).  With δ = β the rescaled operator satisfies
// ‖L⁻¹Π‖ ≤ 1/2, so γ := v/(1−v) ≤ 1 may be replaced by 1.
template <class Mat>
GleProblem<Mat> rescale_bilinear_terms(const GleProblem<Mat>& problem, double delta,
                                       double sigma_min_a = -1.0) {
  if (delta <= 0.0) throw std::invalid_argument("rescale_bilinear_terms: delta must be > 0");
  const double beta = contraction_upper_bound(problem.A, problem.N_list, sigma_min_a);
  const double s = 1.0 / std::sqrt(beta + delta);
  GleProblem<Mat> out = problem;
  for (Mat& N : out.N_list) N = N * s;
  out.scale_applied = problem.scale_applied * s;
  return out;
}

// ‖L⁻¹Π‖₂ by power iteration on (L⁻¹Π)ᵀ(L⁻¹Π); one dense Lyapunov solve pair per
// step.  Guarded to n ≤ 400: each step costs two Schur back-substitutions.
double estimate_contraction_exact(const Dense& A, const std::vector<Dense>& N_list,
                                  double rtol = 1e-10);

// Prop-3 iterate distance Δ = ‖(Z_k − Z_{k−1})Σ_k^{1/2}‖_F + ‖(Z_k − Z_{k−1})Σ_{k−1}^{1/2}‖_F
// after both factors are brought to the eigen-convention (descending spectrum,
// largest-magnitude entry of each column positive) and zero-padded to equal width.
double delta_between_iterates(const Dense& Zk, const Dense& Zkm1);

namespace detail {

// Re-express a factor in the convention delta_between_iterates expects.
Dense eigen_convention_factor(const Dense& Z);

}  // namespace detail

// Frobenius norm of A·ZZᵀ + ZZᵀ·Aᵀ + Σ N_j·ZZᵀ·N_jᵀ + B·Bᵀ assembled as a low-rank
// symmetric product; exact to round-off, no n×n temporaries.
template <class Mat>
double gle_residual_norm(const GleProblem<Mat>& problem, const Dense& Z) {
  const Eigen::Index k = Z.cols(), m = problem.B.cols();
  const Eigen::Index M = Eigen::Index(problem.N_list.size());
  const Eigen::Index w = 2 * k + M * k + m;
  if (w == 0) return 0.0;
  Dense U(problem.B.rows(), w);
  U.leftCols(k) = problem.A * Z;
  U.middleCols(k, k) = Z;
  for (Eigen::Index j = 0; j < M; ++j) U.middleCols(2 * k + j * k, k) = problem.N_list[j] * Z;
  U.rightCols(m) = problem.B;
  // Coupling blocks: R = (AZ)Zᵀ + Z(AZ)ᵀ + Σ (N_jZ)(N_jZ)ᵀ + BBᵀ = U·S·Uᵀ.
  Dense S = Dense::Zero(w, w);
  S.block(0, k, k, k).setIdentity();
  S.block(k, 0, k, k).setIdentity();
  for (Eigen::Index j = 0; j < M; ++j)
    S.block(2 * k + j * k, 2 * k + j * k, k, k).setIdentity();
  S.bottomRightCorner(m, m).setIdentity();
  // ‖U·S·Uᵀ‖_F = ‖Ru·S·Ruᵀ‖_F for U = Q·Ru; the thin QR keeps cancellation linear.
  Eigen::HouseholderQR<Dense> qr(U);
  const Eigen::Index t = std::min(U.rows(), w);
  Dense Ru = qr.matrixQR().topRows(t).template triangularView<Eigen::Upper>();
  return (Ru * S * Ru.transpose()).norm();
}

// Algorithm: B₁ = B; X_k solves A·X + X·Aᵀ + B_k·B_kᵀ = 0 over a block Krylov space
// with B_k = [N₁Z_{k−1}, …, N_M Z_{k−1}, B₁] compressed at rel_tol = tol·1e-3; the
// inner tolerance follows the ζ-split schedule and the loop stops once the
// certificate drops to tol.  Unless opts asks otherwise the problem is rescaled
// with δ = β first so γ = 1 is valid.
template <class Mat>
CertifiedGleSolution solve_gle(const GleProblem<Mat>& problem, double tol,
                               const GleSolveOptions& opts = {}) {
  if (tol <= 0.0) throw std::invalid_argument("solve_gle: tol must be > 0");
  const double sigma_min =
      opts.sigma_min_hint > 0.0 ? opts.sigma_min_hint : smallest_singular_value(problem.A);

  GleProblem<Mat> p = problem;
  double gamma = 1.0;
  if (opts.gamma_override > 0.0) {
    gamma = opts.gamma_override;  // validation mode: caller supplies the exact γ
  } else if (!opts.trust_gamma_one) {
    const double beta = contraction_upper_bound(problem.A, problem.N_list, sigma_min);
    if (beta > 0.0) p = rescale_bilinear_terms(problem, beta, sigma_min);
  }

  CertifiedGleSolution out;
  out.gamma = gamma;
  out.scale_applied = p.scale_applied;
  out.sigma_min = sigma_min;
  if (p.B.cols() == 0 || p.B.norm() == 0.0) {
    out.Z.resize(p.B.rows(), 0);
    out.converged = true;
    out.iterations = 1;
    out.inner_residuals.push_back(0.0);
    return out;
  }

  bool any_bilinear = false;
  for (const Mat& N : p.N_list)
    if (N.norm() != 0.0) any_bilinear = true;

  const double floor_tol = opts.zeta1 * (2.0 * sigma_min / 3.0) * tol;
  const Dense BBt = p.B * p.B.transpose();
  double tol_lyap =
      std::max(floor_tol, (opts.zeta1 / opts.zeta2) * BBt.norm() / (2.0 * sigma_min));

  if (!any_bilinear) {
    // Plain Lyapunov: one solve at the budget that makes the certificate land at tol.
    const double target = std::min(tol_lyap, 2.0 * sigma_min * tol / (1.0 + gamma));
    LyapunovSolution inner =
        solve_lyapunov_lowrank(p.A, p.B, std::max(target, 1e-300), opts.max_inner_dim);
    out.Z = inner.Z;
    out.iterations = 1;
    out.inner_residuals.push_back(inner.residual_fro);
    out.error_bound_2 = (1.0 + gamma) * inner.residual_fro / (2.0 * sigma_min);
    out.converged = out.error_bound_2 <= tol;
    return out;
  }

  double stall_cap = tol_lyap;
  LyapunovSolution first = solve_lyapunov_lowrank(p.A, p.B, tol_lyap, opts.max_inner_dim);
  Dense Zk = first.Z;
  double Rk = first.residual_fro;
  out.inner_residuals.push_back(Rk);
  out.iterations = 1;

  double delta_prev = -1.0, bound_prev = -1.0;
  double bound = std::numeric_limits<double>::infinity();
  double best_bound = std::numeric_limits<double>::infinity();
  Dense best_Z;
  for (int k = 2; k <= opts.max_outer; ++k) {
    if (delta_prev >= 0.0)
      tol_lyap = std::max(floor_tol, std::min((opts.zeta1 / opts.zeta2) * delta_prev, tol_lyap));
    const double eff = std::min(tol_lyap, stall_cap);

    Dense stack(p.B.rows(), Eigen::Index(p.N_list.size()) * Zk.cols() + p.B.cols());
    for (Eigen::Index j = 0; j < Eigen::Index(p.N_list.size()); ++j)
      stack.middleCols(j * Zk.cols(), Zk.cols()) = p.N_list[j] * Zk;
    stack.rightCols(p.B.cols()) = p.B;
    Dense Bk = compress_factor(stack, tol * 1e-3);

    LyapunovSolution inner = solve_lyapunov_lowrank(p.A, Bk, eff, opts.max_inner_dim);
    const double d = delta_between_iterates(inner.Z, Zk);
    bound = gamma * d + ((1.0 + gamma) * inner.residual_fro + gamma * Rk) / (2.0 * sigma_min);

    Zk = inner.Z;
    Rk = inner.residual_fro;
    out.iterations = k;
    out.inner_residuals.push_back(Rk);
    out.delta_history.push_back(d);
    out.bound_history.push_back(bound);
    delta_prev = d;

    if (bound < best_bound) {
      best_bound = bound;
      best_Z = Zk;
    }
    if (bound <= tol) {
      out.converged = true;
      break;
    }
    // Anti-stall: certificate barely moving means the inner solves are the
    // bottleneck — ratchet their budget down harder than the schedule would.
    if (bound_prev >= 0.0 && bound > 0.9 * bound_prev)
      stall_cap = std::max(eff * 0.1, 1e-16);
    bound_prev = bound;
  }
  if (out.converged || bound <= best_bound) {
    out.Z = Zk;
    out.error_bound_2 = bound;
  } else {  // non-convergence: hand back the iterate with the best certificate
    out.Z = best_Z;
    out.error_bound_2 = best_bound;
  }
  return out;
}

}  // namespace glemor

#endif
