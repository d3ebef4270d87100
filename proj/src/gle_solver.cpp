#include "glemor/gle_solver.hpp"

#include <Eigen/Eigenvalues>

namespace glemor {

namespace detail {

Dense eigen_convention_factor(const Dense& Z) {
  if (Z.cols() == 0) return Z;
  Eigen::SelfAdjointEigenSolver<Dense> eig(Z.transpose() * Z);
  const Eigen::Index k = Z.cols();
  Dense U(k, k);
  for (Eigen::Index j = 0; j < k; ++j) U.col(j) = eig.eigenvectors().col(k - 1 - j);
  Dense out = Z * U;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    Eigen::Index imax = 0;
    out.col(j).cwiseAbs().maxCoeff(&imax);
    if (out(imax, j) < 0.0) out.col(j) = -out.col(j);
  }
  return out;
}

}  // namespace detail

double delta_between_iterates(const Dense& Zk, const Dense& Zkm1) {
  if (Zk.rows() != Zkm1.rows())
    throw std::invalid_argument("delta_between_iterates: row mismatch");
  Dense Pk = detail::eigen_convention_factor(Zk);
  Dense Pm = detail::eigen_convention_factor(Zkm1);
  const Eigen::Index w = std::max(Pk.cols(), Pm.cols());
  if (w == 0) return 0.0;
  Pk.conservativeResize(Eigen::NoChange, w);
  if (Pk.cols() > 0 && w > Zk.cols()) Pk.rightCols(w - Zk.cols()).setZero();
  Pm.conservativeResize(Eigen::NoChange, w);
  if (Pm.cols() > 0 && w > Zkm1.cols()) Pm.rightCols(w - Zkm1.cols()).setZero();
  const Vector dk = Pk.colwise().norm();  // = Σ_k^{1/2} in the eigen-convention
  const Vector dm = Pm.colwise().norm();
  Dense D = Pk - Pm;
  const double a = (D * dk.asDiagonal()).norm();
  const double b = (D * dm.asDiagonal()).norm();
  return a + b;
}

double estimate_contraction_exact(const Dense& A, const std::vector<Dense>& N_list,
                                  double rtol) {
  const Eigen::Index n = A.rows();
  if (n > 400) throw std::runtime_error("dimension too large for exact contraction");
  bool any = false;
  for (const Dense& N : N_list)
    if (N.norm() != 0.0) any = true;
  if (!any || n == 0) return 0.0;

  SchurLyapunov forward(A);
  SchurLyapunov adjoint(Dense(A.transpose()));
  // λ_max of the self-adjoint operator (L⁻¹Π)ᵀ(L⁻¹Π) on vectorized n×n matrices.
  auto apply = [&](const Vector& x) {
    Dense X = Eigen::Map<const Dense>(x.data(), n, n);
    Dense W = Dense::Zero(n, n);
    for (const Dense& N : N_list) W.noalias() += N * X * N.transpose();
    Dense Y = forward.solve(-W);   // L(Y) = W
    Dense W2 = adjoint.solve(-Y);  // Lᵀ(W2) = Y
    Dense Y2 = Dense::Zero(n, n);
    for (const Dense& N : N_list) Y2.noalias() += N.transpose() * W2 * N;
    return Vector(Eigen::Map<Vector>(Y2.data(), n * n));
  };
  const double lam = lanczos_max_eig(n * n, apply, rtol, "contraction estimate", 200);
  return std::sqrt(std::max(lam, 0.0));
}

}  // namespace glemor
