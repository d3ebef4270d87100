#ifndef GLEMOR_TEST_SUPPORT_HPP
#define GLEMOR_TEST_SUPPORT_HPP

// Shared oracles for the test suites.  Everything here is deliberately
// independent of the library's fast paths: Kronecker vectorization and dense
// fixed-point iterations only, so library results are checked against a
// second implementation route.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <random>
#include <vector>

namespace testsup {

using Dense = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Two-mode ladder system used across the experiment suite.
struct Synthetic {
  Dense A1, A2, B1, B2, C1, C2;
};

inline Synthetic make_synthetic(int n) {
  Synthetic s;
  s.A1 = -Dense::Identity(n, n);
  s.A2 = -2.0 * Dense::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    s.A1(i + 1, i) = 0.5;
    s.A2(i + 1, i) = 0.8;
    s.A2(i, i + 1) = -0.2;
  }
  s.B1 = Dense::Zero(n, 1);
  s.B1(n - 1, 0) = 1.0;
  s.B2 = Dense::Zero(n, 1);
  s.B2(0, 0) = 1.0;
  s.C1 = s.B1.transpose();
  s.C2 = s.B2.transpose();
  return s;
}

inline Dense random_dense(int r, int c, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dense M(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) M(i, j) = nd(gen);
  return M;
}

inline Dense random_hurwitz(int n, unsigned seed) {
  Dense R = random_dense(n, n, seed);
  return R - (R.norm() + 1.0) * Dense::Identity(n, n);
}

// Exact GLE solution by Kronecker vectorization: feasible for n ≤ ~60.
inline Dense kron_gle_solve(const Dense& A, const std::vector<Dense>& Ns, const Dense& B) {
  const int n = int(A.rows());
  Dense I = Dense::Identity(n, n);
  Dense L = Eigen::kroneckerProduct(I, A) + Eigen::kroneckerProduct(A, I);
  for (const Dense& N : Ns) L += Eigen::kroneckerProduct(N, N);
  Dense W = B * B.transpose();
  Eigen::Map<Vector> w(W.data(), n * n);
  Vector x = L.partialPivLu().solve(Vector(-w));
  return Eigen::Map<Dense>(x.data(), n, n);
}

// Dense residual of the GLE, assembled directly.
inline Dense dense_gle_residual(const Dense& A, const std::vector<Dense>& Ns, const Dense& B,
                                const Dense& X) {
  Dense R = A * X + X * A.transpose() + B * B.transpose();
  for (const Dense& N : Ns) R += N * X * N.transpose();
  return R;
}

// Largest principal angle between column spaces, via orthonormal bases.
inline double max_principal_angle(const Dense& X, const Dense& Y) {
  auto basis = [](const Dense& M) {
    Eigen::ColPivHouseholderQR<Dense> qr(M);
    qr.setThreshold(1e-10);
    return Dense(Dense(qr.householderQ()).leftCols(qr.rank()));
  };
  Dense Qx = basis(X), Qy = basis(Y);
  if (Qx.cols() != Qy.cols()) return 1.57079632679489662;
  if (Qx.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Dense> svd(Qx.transpose() * Qy);
  double c = svd.singularValues().minCoeff();
  if (c > 1.0) c = 1.0;
  return std::acos(c);
}

inline double spec_norm(const Dense& M) {
  Eigen::JacobiSVD<Dense> svd(M);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace testsup

#endif
