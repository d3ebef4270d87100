#include "glemor/matrix_kernel.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>

namespace glemor {

TruncatedEig truncated_eig_psd(const Dense& Z, double drop_tol) {
  TruncatedEig out;
  if (Z.cols() == 0 || Z.rows() == 0) {
    out.U.resize(Z.rows(), 0);
    out.sigma.resize(0);
    return out;
  }
  Dense G = Z.transpose() * Z;
  Eigen::SelfAdjointEigenSolver<Dense> eig(G);
  const Vector& lam = eig.eigenvalues();  // ascending
  Eigen::Index keep = 0;
  for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
    if (lam(i) > drop_tol)
      ++keep;
    else
      break;
  out.U.resize(Z.rows(), keep);
  out.sigma.resize(keep);
  for (Eigen::Index i = 0; i < keep; ++i) {
    Eigen::Index src = lam.size() - 1 - i;
    out.sigma(i) = lam(src);
    out.U.col(i) = Z * eig.eigenvectors().col(src) / std::sqrt(lam(src));
  }
  return out;
}

Dense compress_factor(const Dense& Z, double rel_tol) {
  if (Z.cols() == 0) return Z;
  TruncatedEig te = truncated_eig_psd(Z, 0.0);
  if (te.sigma.size() == 0) return Dense(Z.rows(), 0);
  // floor at round-off scale so exactly-dependent columns collapse even at rel_tol = 0
  const double cut = std::max(rel_tol, 1e-14) * te.sigma(0);
  Eigen::Index keep = 0;
  while (keep < te.sigma.size() && te.sigma(keep) > cut) ++keep;
  return te.U.leftCols(keep) * te.sigma.head(keep).cwiseSqrt().asDiagonal();
}

Dense psd_sqrt_factor(const Dense& X, double drop_tol) {
  Eigen::SelfAdjointEigenSolver<Dense> eig((X + X.transpose()) / 2.0);
  const Vector& lam = eig.eigenvalues();
  Eigen::Index keep = 0;
  for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
    if (lam(i) > drop_tol)
      ++keep;
    else
      break;
  Dense Z(X.rows(), keep);
  for (Eigen::Index i = 0; i < keep; ++i) {
    Eigen::Index src = lam.size() - 1 - i;
    Z.col(i) = eig.eigenvectors().col(src) * std::sqrt(lam(src));
  }
  return Z;
}

double lanczos_max_eig(Eigen::Index n, const std::function<Vector(const Vector&)>& apply,
                       double rtol, const char* what, int max_steps, Vector* eigenvector) {
  if (n == 0) return 0.0;
  Vector v = Vector::Ones(n) / std::sqrt(double(n));
  // deterministic tie-breaking perturbation in case the all-ones vector is orthogonal
  // to the dominant eigenspace
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 1e-4 * double(i + 1) / double(n);
  v.normalize();
  const int cap = int(std::min<Eigen::Index>(n, max_steps));
  std::vector<Vector> basis{v};
  std::vector<double> alpha, beta;
  double lam = 0.0, scale = 0.0, tail_drift = 0.0;
  int stable = 0;
  for (int k = 0; k < cap; ++k) {
    Vector w = apply(basis[size_t(k)]);
    const double a = basis[size_t(k)].dot(w);
    alpha.push_back(a);
    w -= a * basis[size_t(k)];
    if (k > 0) w -= beta[size_t(k) - 1] * basis[size_t(k) - 1];
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& b : basis) w -= b.dot(w) * b;
    scale = std::max(scale, std::abs(a));

    Dense T = Dense::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) T(i, i) = alpha[size_t(i)];
    for (int i = 0; i < k; ++i) T(i, i + 1) = T(i + 1, i) = beta[size_t(i)];
    Eigen::SelfAdjointEigenSolver<Dense> eig(T);
    const double nl = eig.eigenvalues().maxCoeff();
    if (std::abs(nl - lam) < rtol * std::max(std::abs(nl), 1e-300))
      ++stable;
    else
      stable = 0;
    if (k >= cap - std::max(10, cap / 5))
      tail_drift = std::max(tail_drift, std::abs(nl - lam) / std::max(std::abs(nl), 1e-300));
    lam = nl;
    const double nb = w.norm();
    const bool breakdown = nb <= 1e-14 * std::max(scale, 1e-300);  // invariant subspace
    if (stable >= 3 || breakdown) {
      if (eigenvector) {
        const Vector s = eig.eigenvectors().col(k);  // eigenvalues ascend: last is largest
        Vector rv = Vector::Zero(n);
        for (int i = 0; i <= k; ++i) rv += s(i) * basis[size_t(i)];
        rv.normalize();
        *eigenvector = rv;
      }
      return lam;
    }
    beta.push_back(nb);
    basis.push_back(w / nb);
  }
  // Band-edge spectra stagnate algebraically instead of settling to rtol: the
  // top Ritz value is then converged in value but never triggers the counter.
  // Ritz values grow monotonically, so padding by the extrapolated 1/k² tail
  // (step count times the recent drift) keeps the result a usable majorant.
  if (tail_drift <= 1e-6) {
    if (eigenvector) {
      throw std::runtime_error(std::string(what) +
                               ": eigeniteration stalled before the eigenvector converged");
    }
    return lam * (1.0 + double(cap) * tail_drift);
  }
  throw std::runtime_error(std::string(what) + ": eigeniteration did not converge (last " +
                           std::to_string(lam) + ")");
}

double spectral_norm(const Dense& A, double rtol) {
  (void)rtol;  // dense path is exact: all dense callers are small
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  Eigen::BDCSVD<Dense> svd(A);
  return svd.singularValues().maxCoeff();
}

double spectral_norm(const Sparse& A, double rtol) {
  if (A.rows() == 0 || A.cols() == 0 || A.nonZeros() == 0) return 0.0;
  double lam = lanczos_max_eig(
      A.cols(), [&](const Vector& x) { return Vector(A.transpose() * (A * x)); }, rtol,
      "spectral_norm");
  return std::sqrt(std::max(lam, 0.0));
}

double smallest_singular_value(const Dense& A, double rtol) {
  (void)rtol;
  Eigen::BDCSVD<Dense> svd(A);
  double s = svd.singularValues().minCoeff();
  if (s <= 0.0) throw std::runtime_error("smallest_singular_value: singular operator");
  return s;
}

double smallest_singular_value(const Sparse& A, double rtol) {
  Eigen::SparseLU<Sparse> lu, luT;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("smallest_singular_value: singular operator");
  Sparse At = A.transpose();
  luT.compute(At);
  if (luT.info() != Eigen::Success)
    throw std::runtime_error("smallest_singular_value: singular operator");
  double lam = lanczos_max_eig(
      A.rows(), [&](const Vector& x) { return Vector(luT.solve(lu.solve(x))); }, rtol,
      "smallest_singular_value");
  if (!(lam > 0.0)) throw std::runtime_error("smallest_singular_value: singular operator");
  return 1.0 / std::sqrt(lam);
}

double cond_1norm(const Dense& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("cond_1norm: square matrix required");
  Eigen::PartialPivLU<Dense> lu(A);
  Dense Ainv = lu.inverse();
  auto norm1 = [](const Dense& M) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < M.cols(); ++j) best = std::max(best, M.col(j).lpNorm<1>());
    return best;
  };
  return norm1(A) * norm1(Ainv);
}

double cond_1norm(const Sparse& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("cond_1norm: square matrix required");
  const Eigen::Index n = A.rows();
  double norm_a = 0.0;
  {
    Vector colsum = Vector::Zero(n);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Sparse::InnerIterator it(A, k); it; ++it) colsum(it.col()) += std::abs(it.value());
    norm_a = colsum.maxCoeff();
  }
  Eigen::SparseLU<Sparse> lu, luT;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw std::runtime_error("cond_1norm: singular operator");
  Sparse At = A.transpose();
  luT.compute(At);
  if (luT.info() != Eigen::Success) throw std::runtime_error("cond_1norm: singular operator");
  // Hager's ‖A⁻¹‖₁ lower-bound estimator.
  Vector x = Vector::Constant(n, 1.0 / double(n));
  double est = 0.0;
  for (int it = 0; it < 8; ++it) {
    Vector y = lu.solve(x);
    est = std::max(est, y.lpNorm<1>());
    Vector xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    Vector z = luT.solve(xi);
    Eigen::Index j;
    double zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x(j) = 1.0;
  }
  // Alternating-sign safeguard against Hager local maxima; still a lower bound.
  Vector xa(n);
  double sgn = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    xa(i) = sgn * (1.0 + double(i) / double(std::max<Eigen::Index>(n - 1, 1)));
    sgn = -sgn;
  }
  est = std::max(est, 2.0 * lu.solve(xa).lpNorm<1>() / (3.0 * double(n)));
  return norm_a * est;
}

}  // namespace glemor
