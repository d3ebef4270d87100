#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "glemor/gle_solver.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

using glemor::Dense;
using glemor::GleProblem;
using glemor::Vector;

namespace {

// Monolithic two-mode problem: anchor A₁, bilinear term A₂ − A₁, stacked inputs.
GleProblem<Dense> synthetic_reach(int n) {
  auto sys = testsup::make_synthetic(n);
  GleProblem<Dense> p;
  p.A = sys.A1;
  p.N_list = {sys.A2 - sys.A1};
  p.B = Dense(n, 2);
  p.B << sys.B1, sys.B2;
  return p;
}

}  // namespace

TEST_CASE("contraction_upper_bound: closed forms and majorant property") {
  Dense A = -Dense::Identity(5, 5);
  CHECK(glemor::contraction_upper_bound(A, std::vector<Dense>{}) == 0.0);
  CHECK(glemor::contraction_upper_bound(A, {Dense(Dense::Identity(5, 5))}) ==
        doctest::Approx(0.5).epsilon(1e-9));

  auto p = synthetic_reach(50);
  const double beta = glemor::contraction_upper_bound(p.A, p.N_list);
  const double exact = glemor::estimate_contraction_exact(p.A, p.N_list, 1e-10);
  CHECK(beta >= exact);
  CHECK(exact == doctest::Approx(0.809130).epsilon(1e-4));  // frozen n = 50 value
}

TEST_CASE("rescale_bilinear_terms halves entries when beta = 3, delta = 1") {
  Dense A = -Dense::Identity(4, 4);
  Dense N = Dense::Zero(4, 4);
  N(0, 1) = std::sqrt(6.0);  // σ₁² = 6 → β = 6/(2·1) = 3
  GleProblem<Dense> p;
  p.A = A;
  p.N_list = {N};
  p.B = Dense::Identity(4, 1);
  auto q = glemor::rescale_bilinear_terms(p, 1.0);
  CHECK(q.N_list[0](0, 1) == doctest::Approx(0.5 * std::sqrt(6.0)).epsilon(1e-9));
  CHECK(q.scale_applied == doctest::Approx(0.5).epsilon(1e-9));
  // δ = β brings the rescaled contraction bound to 1/2.
  const double beta = glemor::contraction_upper_bound(p.A, p.N_list);
  auto r = glemor::rescale_bilinear_terms(p, beta);
  CHECK(glemor::contraction_upper_bound(r.A, r.N_list) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("estimate_contraction_exact: closed form, frozen value, guard") {
  Dense A = -Dense::Identity(5, 5);
  CHECK(glemor::estimate_contraction_exact(A, {}) == 0.0);
  // L⁻¹Π is −X/2 ∘ Π with Π = id: operator norm 1/2.
  CHECK(glemor::estimate_contraction_exact(A, {Dense(Dense::Identity(5, 5))}, 1e-12) ==
        doctest::Approx(0.5).epsilon(1e-10));

  auto p = synthetic_reach(200);
  const double v = glemor::estimate_contraction_exact(p.A, p.N_list, 1e-10);
  CHECK(v == doctest::Approx(0.8098).epsilon(1.3e-3));      // published digits
  CHECK(v == doctest::Approx(0.80994395).epsilon(1e-6));    // frozen oracle value

  CHECK_THROWS_WITH_AS(
      glemor::estimate_contraction_exact(Dense(-Dense::Identity(401, 401)), {}, 1e-8),
      doctest::Contains("too large"), std::runtime_error);
}

TEST_CASE("delta_between_iterates: trivial values and Prop-3 dominance") {
  Dense Z = testsup::random_dense(12, 3, 7);
  CHECK(glemor::delta_between_iterates(Z, Z) == doctest::Approx(0.0).epsilon(1e-12));

  Dense e1 = Dense::Zero(12, 1);
  e1(0, 0) = 1.0;
  CHECK(glemor::delta_between_iterates(e1, Dense(12, 0)) == doctest::Approx(1.0));

  for (unsigned seed = 0; seed < 8; ++seed) {
    Dense Zk = testsup::random_dense(30, 4, 100 + seed);
    Dense Zm = testsup::random_dense(30, 3, 200 + seed);
    const double delta = glemor::delta_between_iterates(Zk, Zm);
    const double diff =
        (Zk * Zk.transpose() - Zm * Zm.transpose()).norm();  // Frobenius of the difference
    CHECK(delta >= diff * (1.0 - 1e-10));
  }
}

TEST_CASE("solve_gle: degenerate inputs") {
  auto sys = testsup::make_synthetic(20);
  GleProblem<Dense> p;
  p.A = sys.A1;
  p.N_list = {Dense::Zero(20, 20)};
  p.B = sys.B1;
  auto sol = glemor::solve_gle(p, 1e-8);
  CHECK(sol.converged);
  CHECK(sol.iterations == 1);
  CHECK(sol.error_bound_2 ==
        doctest::Approx((1.0 + sol.gamma) * sol.inner_residuals[0] / (2.0 * sol.sigma_min)));
  CHECK(sol.error_bound_2 <= 1e-8);

  p.B = Dense::Zero(20, 1);
  auto z = glemor::solve_gle(p, 1e-8);
  CHECK(z.converged);
  CHECK(z.Z.cols() == 0);
  CHECK(z.error_bound_2 == 0.0);
}

TEST_CASE("solve_gle: certificate sound against Kronecker oracle, small random family") {
  int sound = 0, total = 0;
  for (unsigned seed = 1; seed <= 12; ++seed) {
    const int n = 10 + int(seed % 4);
    GleProblem<Dense> p;
    p.A = testsup::random_hurwitz(n, seed);
    p.N_list = {0.4 * testsup::random_dense(n, n, 50 + seed)};
    p.B = testsup::random_dense(n, 2, 90 + seed);
    auto sol = glemor::solve_gle(p, 1e-6);
    REQUIRE(sol.converged);
    // The solver may have rescaled: the oracle must target the same equation.
    std::vector<Dense> Ns = {p.N_list[0] * sol.scale_applied};
    Dense Xo = testsup::kron_gle_solve(p.A, Ns, p.B);
    const double err = testsup::spec_norm(sol.Z * sol.Z.transpose() - Xo);
    ++total;
    if (err <= sol.error_bound_2 * (1.0 + 1e-9)) ++sound;
    CHECK(err <= 1e-6);
  }
  CHECK(sound == total);
}

TEST_CASE("solve_gle: monotone dominance of the exact solution") {
  GleProblem<Dense> p = synthetic_reach(40);
  auto sol = glemor::solve_gle(p, 1e-9);
  REQUIRE(sol.converged);
  std::vector<Dense> Ns = {p.N_list[0] * sol.scale_applied};
  Dense Xo = testsup::kron_gle_solve(p.A, Ns, p.B);
  Eigen::SelfAdjointEigenSolver<Dense> eig(Xo - sol.Z * sol.Z.transpose());
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("solve_gle: rescaling leaves the solution space invariant") {
  GleProblem<Dense> p = synthetic_reach(40);
  // Unscaled run is admissible here because ‖L⁻¹Π‖ < 1: validate with exact γ.
  const double v = glemor::estimate_contraction_exact(p.A, p.N_list, 1e-12);
  REQUIRE(v < 1.0);
  glemor::GleSolveOptions validation;
  validation.gamma_override = v / (1.0 - v);
  auto unscaled = glemor::solve_gle(p, 1e-10, validation);
  auto scaled = glemor::solve_gle(p, 1e-10);
  REQUIRE(unscaled.converged);
  REQUIRE(scaled.converged);
  CHECK(scaled.scale_applied < 1.0);
  // The exact ranges coincide, but scaling damps deep-Krylov directions below
  // machine floor, so only the scaled-to-unscaled containment is observable in
  // floating point: every well-resolved scaled direction lies in the unscaled span.
  auto contained = [](const Dense& strong, const Dense& span) {
    Eigen::HouseholderQR<Dense> qr(span);
    Dense Q = Dense(qr.householderQ()) * Dense::Identity(span.rows(), span.cols());
    return (strong - Q * (Q.transpose() * strong)).norm() / strong.norm();
  };
  Dense Zs_strong = glemor::compress_factor(scaled.Z, 1e-6);
  CHECK(contained(Zs_strong, unscaled.Z) < 1e-6);
  // Companion ordering that makes the one-sidedness principled: the unscaled
  // solution dominates the scaled one, Π ⪰ Π_scaled ⪰ 0.
  std::vector<Dense> Ns_u = {p.N_list[0]};
  std::vector<Dense> Ns_s = {p.N_list[0] * scaled.scale_applied};
  Dense Xu = testsup::kron_gle_solve(p.A, Ns_u, p.B);
  Dense Xs = testsup::kron_gle_solve(p.A, Ns_s, p.B);
  Eigen::SelfAdjointEigenSolver<Dense> dom(Xu - Xs);
  CHECK(dom.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("solve_gle: stopping identity reproduces the stored bound") {
  GleProblem<Dense> p = synthetic_reach(50);
  auto sol = glemor::solve_gle(p, 1e-8);
  REQUIRE(sol.converged);
  REQUIRE(sol.iterations >= 2);
  const std::size_t k = sol.inner_residuals.size() - 1;
  const double recomputed =
      sol.gamma * sol.delta_history.back() +
      ((1.0 + sol.gamma) * sol.inner_residuals[k] + sol.gamma * sol.inner_residuals[k - 1]) /
          (2.0 * sol.sigma_min);
  CHECK(recomputed == sol.error_bound_2);
  CHECK(sol.bound_history.back() == sol.error_bound_2);
}

TEST_CASE("solve_gle: tolerance sweep is certified and not oversolved") {
  GleProblem<Dense> p = synthetic_reach(50);
  for (double tol : {1e-2, 1e-4, 1e-6, 1e-8}) {
    auto sol = glemor::solve_gle(p, tol);
    REQUIRE(sol.converged);
    std::vector<Dense> Ns = {p.N_list[0] * sol.scale_applied};
    Dense Xo = testsup::kron_gle_solve(p.A, Ns, p.B);
    const double err = testsup::spec_norm(sol.Z * sol.Z.transpose() - Xo);
    CHECK(err <= tol);
    CHECK(err <= sol.error_bound_2 * (1.0 + 1e-9));
  }
}

TEST_CASE("solve_gle: sparse and dense paths agree") {
  GleProblem<Dense> pd = synthetic_reach(60);
  GleProblem<glemor::Sparse> ps;
  ps.A = pd.A.sparseView();
  ps.N_list = {glemor::Sparse(pd.N_list[0].sparseView())};
  ps.B = pd.B;
  auto sd = glemor::solve_gle(pd, 1e-8);
  auto ss = glemor::solve_gle(ps, 1e-8);
  REQUIRE(sd.converged);
  REQUIRE(ss.converged);
  Dense Xd = sd.Z * sd.Z.transpose();
  Dense Xs = ss.Z * ss.Z.transpose();
  CHECK((Xd - Xs).norm() <= 2e-8 * (1.0 + Xd.norm()));
}

TEST_CASE("gle_residual_norm: exact solution, zero input, dense agreement") {
  GleProblem<Dense> p;
  p.A = testsup::random_hurwitz(8, 3);
  p.N_list = {0.3 * testsup::random_dense(8, 8, 33)};
  p.B = testsup::random_dense(8, 2, 44);
  Dense Xo = testsup::kron_gle_solve(p.A, p.N_list, p.B);
  Dense Z = glemor::psd_sqrt_factor(Xo);
  CHECK(glemor::gle_residual_norm(p, Z) < 1e-10);

  GleProblem<Dense> z;
  z.A = p.A;
  z.N_list = p.N_list;
  z.B = Dense::Zero(8, 1);
  CHECK(glemor::gle_residual_norm(z, Dense(Dense::Zero(8, 0))) == 0.0);

  GleProblem<Dense> p50 = synthetic_reach(50);
  auto sol = glemor::solve_gle(p50, 1e-4);
  GleProblem<Dense> scaled = p50;
  scaled.N_list[0] *= sol.scale_applied;
  const double fast = glemor::gle_residual_norm(scaled, sol.Z);
  const double dense =
      testsup::dense_gle_residual(scaled.A, scaled.N_list, scaled.B, sol.Z * sol.Z.transpose())
          .norm();
  CHECK(fast == doctest::Approx(dense).epsilon(1e-8));
}
