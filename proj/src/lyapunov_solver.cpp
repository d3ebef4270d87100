#include "glemor/lyapunov_solver.hpp"

#include <Eigen/Eigenvalues>

#include <vector>

namespace glemor {

namespace {

// Block boundaries of a real quasi-triangular Schur factor (1×1 / 2×2 diagonal blocks).
std::vector<int> schur_blocks(const Dense& T) {
  std::vector<int> starts;
  int i = 0;
  const int n = int(T.rows());
  while (i < n) {
    starts.push_back(i);
    i += (i + 1 < n && T(i + 1, i) != 0.0) ? 2 : 1;
  }
  starts.push_back(n);
  return starts;
}

}  // namespace

SchurLyapunov::SchurLyapunov(const Dense& A) {
  Eigen::RealSchur<Dense> schur(A);
  T_ = schur.matrixT();
  U_ = schur.matrixU();
  block_starts_ = schur_blocks(T_);
}

Dense SchurLyapunov::solve(const Dense& W) const {
  const int n = int(T_.rows());
  if (n == 0) return Dense(0, 0);
  const Dense& T = T_;
  const Dense& U = U_;
  Dense C = -(U.transpose() * W * U);  // T·X̃ + X̃·Tᵀ = C
  const std::vector<int>& bs = block_starts_;
  const int nb = int(bs.size()) - 1;
  Dense X(n, n);
  for (int jb = nb - 1; jb >= 0; --jb) {
    const int j0 = bs[jb], jw = bs[jb + 1] - j0, jend = bs[jb + 1];
    Dense Rcol = C.block(0, j0, n, jw);
    if (jend < n)
      Rcol.noalias() -= X.block(0, jend, n, n - jend) * T.block(j0, jend, jw, n - jend).transpose();
    for (int ib = nb - 1; ib >= 0; --ib) {
      const int i0 = bs[ib], iw = bs[ib + 1] - i0, iend = bs[ib + 1];
      Dense rhs = Rcol.block(i0, 0, iw, jw);
      if (iend < n)
        rhs.noalias() -= T.block(i0, iend, iw, n - iend) * X.block(iend, j0, n - iend, jw);
      // (I ⊗ T_II + T_JJ ⊗ I)·vec(X_IJ) = vec(rhs) for the ≤2×≤2 diagonal blocks
      Dense K = Dense::Zero(iw * jw, iw * jw);
      for (int c = 0; c < jw; ++c) K.block(c * iw, c * iw, iw, iw) = T.block(i0, i0, iw, iw);
      for (int c = 0; c < jw; ++c)
        for (int r = 0; r < jw; ++r)
          for (int d = 0; d < iw; ++d) K(c * iw + d, r * iw + d) += T(j0 + c, j0 + r);
      Eigen::Map<Vector> vrhs(rhs.data(), iw * jw);
      Vector sol = K.partialPivLu().solve(vrhs);
      X.block(i0, j0, iw, jw) = Eigen::Map<Dense>(sol.data(), iw, jw);
    }
  }
  Dense out = U * X * U.transpose();
  return (out + out.transpose()) / 2.0;
}

Dense lyap_schur_solve(const Dense& A, const Dense& W) { return SchurLyapunov(A).solve(W); }

Dense solve_lyapunov_dense(const Dense& A, const Dense& W, int dense_cap) {
  if (A.rows() != A.cols() || W.rows() != A.rows() || W.cols() != A.rows())
    throw std::invalid_argument("solve_lyapunov_dense: dimension mismatch");
  if (A.rows() > dense_cap) throw std::runtime_error("solve_lyapunov_dense: dense cap exceeded");
  SchurLyapunov fact(A);
  const Dense& T = fact.matrix_t();
  for (std::vector<int> bs = schur_blocks(T); int b : bs) {
    if (b >= T.rows()) break;
    if (T(b, b) >= 0.0 && (b + 1 >= T.rows() || T(b + 1, b) == 0.0))
      throw std::runtime_error("solve_lyapunov_dense: unstable mode");
    if (b + 1 < T.rows() && T(b + 1, b) != 0.0 && T(b, b) + T(b + 1, b + 1) >= 0.0)
      throw std::runtime_error("solve_lyapunov_dense: unstable mode");
  }
  return fact.solve(W);
}

namespace detail {

Dense orthonormalize_block(const Dense& V, Dense block) {
  const double incoming = block.norm();
  if (incoming == 0.0 || block.cols() == 0) return Dense(block.rows(), 0);
  for (int pass = 0; pass < 4; ++pass) {
    if (V.cols() > 0) block -= V * (V.transpose() * block);
    Eigen::ColPivHouseholderQR<Dense> qr(block);
    const int rmax = int(std::min(block.rows(), block.cols()));
    int keep = 0;
    for (int i = 0; i < rmax; ++i)
      if (std::abs(qr.matrixR()(i, i)) > 1e-12 * incoming) ++keep;
    if (keep == 0) return Dense(block.rows(), 0);
    block = Dense(qr.householderQ() * Dense::Identity(block.rows(), keep));
    if (V.cols() == 0) return block;
    if ((V.transpose() * block).cwiseAbs().maxCoeff() < 5e-15) return block;
  }
  return block;
}

}  // namespace detail

}  // namespace glemor
