#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "glemor/balancing.hpp"
#include "test_support.hpp"

using glemor::Dense;
using glemor::GleProblemDense;
using glemor::LmiSide;
using glemor::LowRankPsd;
using glemor::Vector;

namespace {

glemor::SwitchedSystem two_mode_random(int n, unsigned seed) {
  glemor::Mode m1{testsup::random_hurwitz(n, seed), testsup::random_dense(n, 2, seed + 1),
                  testsup::random_dense(2, n, seed + 2)};
  glemor::Mode m2{testsup::random_hurwitz(n, seed + 3), testsup::random_dense(n, 2, seed + 4),
                  testsup::random_dense(2, n, seed + 5)};
  return glemor::make_switched_system({m1, m2});
}

glemor::SwitchedSystem synthetic_system(int n) {
  testsup::Synthetic s = testsup::make_synthetic(n);
  return glemor::make_switched_system({{s.A1, s.B1, s.C1}, {s.A2, s.B2, s.C2}});
}

double dense_lmi_max(const Dense& A, const Dense& X, const Dense& G, LmiSide side) {
  Dense T = side == LmiSide::reach
                ? Dense(A * X + X * A.transpose() + G * G.transpose())
                : Dense(A.transpose() * X + X * A + G.transpose() * G);
  Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Dense recompose(const LowRankPsd& X) {
  Dense full = X.Z * X.Z.transpose();
  full.diagonal().array() += X.shift;
  return full;
}

}  // namespace

TEST_CASE("balancing: coupled-problem assembly") {
  auto sys = two_mode_random(6, 11);
  const Dense& A1 = sys.modes[0].A;
  const Dense& A2 = sys.modes[1].A;

  GleProblemDense reach = glemor::monolithic_problem(sys, LmiSide::reach);
  CHECK((reach.A - A1).norm() == 0.0);
  REQUIRE(reach.N_list.size() == 1);
  CHECK((reach.N_list[0] - (A2 - A1)).norm() == 0.0);
  REQUIRE(reach.B.cols() == 4);
  CHECK((reach.B.leftCols(2) - sys.modes[0].B).norm() == 0.0);
  CHECK((reach.B.rightCols(2) - sys.modes[1].B).norm() == 0.0);

  GleProblemDense observ = glemor::monolithic_problem(sys, LmiSide::observ);
  CHECK((observ.A - A1.transpose()).norm() == 0.0);
  CHECK((observ.N_list[0] - (A2 - A1).transpose()).norm() == 0.0);
  CHECK((observ.B.leftCols(2) - sys.modes[0].C.transpose()).norm() == 0.0);

  GleProblemDense mode2 = glemor::pbr_mode_problem(sys, 1, LmiSide::reach);
  CHECK((mode2.A - A2).norm() == 0.0);
  REQUIRE(mode2.N_list.size() == 1);
  CHECK((mode2.N_list[0] - (A1 - A2)).norm() == 0.0);

  CHECK_THROWS_WITH_AS(glemor::pbr_mode_problem(sys, 2, LmiSide::reach),
                       doctest::Contains("out of range"), std::invalid_argument);
}

TEST_CASE("balancing: single-mode gramians against the dense oracle") {
  const int n = 30;
  glemor::Mode m{testsup::random_hurwitz(n, 21), testsup::random_dense(n, 2, 22),
                 testsup::random_dense(2, n, 23)};
  auto sys = glemor::make_switched_system({m});
  const double tol = 1e-8;
  auto g = glemor::gramians_monolithic(sys, tol);
  CHECK(g.p_certificate <= tol);
  CHECK(g.q_certificate <= tol);
  // One mode means both coupled equations collapse to plain Lyapunov ones.
  Dense P = testsup::kron_gle_solve(m.A, {}, m.B);
  Dense Q = testsup::kron_gle_solve(m.A.transpose(), {}, m.C.transpose());
  CHECK(testsup::spec_norm(recompose(g.P) - P) <= tol + 1e-10);
  CHECK(testsup::spec_norm(recompose(g.Q) - Q) <= tol + 1e-10);
}

TEST_CASE("balancing: zero input map yields the zero gramian") {
  const int n = 12;
  glemor::Mode m{testsup::random_hurwitz(n, 31), Dense::Zero(n, 1),
                 testsup::random_dense(1, n, 32)};
  auto sys = glemor::make_switched_system({m});
  auto g = glemor::gramians_monolithic(sys, 1e-8);
  CHECK(g.P.Z.norm() == 0.0);
  CHECK(g.Q.Z.norm() > 0.0);
}

TEST_CASE("balancing: full factor recomposition") {
  Dense Z = testsup::random_dense(20, 3, 41);
  SUBCASE("no shift returns the factor unchanged") {
    Dense F = glemor::psd_full_factor({Z, 0.0});
    CHECK((F - Z).norm() == 0.0);
  }
  SUBCASE("dense completion") {
    LowRankPsd X{Z, 0.37};
    Dense F = glemor::psd_full_factor(X);
    CHECK(F.cols() == 20);  // the shift makes the matrix full rank
    CHECK((F * F.transpose() - recompose(X)).norm() <= 1e-12 * recompose(X).norm());
  }
  SUBCASE("algebraic expansion beyond the dense cap") {
    LowRankPsd X{Z, 0.37};
    Dense F = glemor::psd_full_factor(X, 10);
    CHECK(F.cols() == 23);
    CHECK((F * F.transpose() - recompose(X)).norm() <= 1e-12 * recompose(X).norm());
  }
}

TEST_CASE("balancing: cluster edges") {
  Vector s(5);
  s << 4.0, 2.0, 2.0, 2.0, 1.0;
  auto edges = glemor::cluster_edges(s);
  CHECK(edges == std::vector<Eigen::Index>{0, 1, 4, 5});

  Vector t(3);
  t << 1.0, 1.0 - 1e-10, 0.5;
  edges = glemor::cluster_edges(t);
  CHECK(edges == std::vector<Eigen::Index>{0, 2, 3});

  CHECK(glemor::cluster_edges(Vector(0)) == std::vector<Eigen::Index>{0});
}

TEST_CASE("balancing: square-root projectors") {
  SUBCASE("identity gramians form one trailing plateau") {
    LowRankPsd I{Dense::Identity(8, 8), 0.0};
    auto pr = glemor::square_root_projectors(I, I, 3);
    CHECK(pr.r == 3);
    CHECK_FALSE(pr.cluster_moved);
    CHECK((pr.hankel.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((pr.W.transpose() * pr.V - Dense::Identity(3, 3)).norm() <= 1e-12);
  }
  SUBCASE("diagonal example") {
    Dense Z(2, 2);
    Z << 2.0, 0.0, 0.0, 1.0;
    LowRankPsd X{Z, 0.0};
    auto pr = glemor::square_root_projectors(X, X, 1);
    REQUIRE(pr.hankel.size() == 2);
    CHECK(pr.hankel(0) == doctest::Approx(4.0));
    CHECK(pr.hankel(1) == doctest::Approx(1.0));
    CHECK(pr.V.col(0).cwiseAbs()(0) == doctest::Approx(1.0));
    CHECK(pr.V.col(0).cwiseAbs()(1) == doctest::Approx(0.0));
  }
  SUBCASE("interior cluster moves the cut to the nearest edge") {
    Vector d(4);
    d << 2.0, std::sqrt(2.0), std::sqrt(2.0), 1.0;
    LowRankPsd X{Dense(d.asDiagonal()), 0.0};
    auto pr = glemor::square_root_projectors(X, X, 2);
    CHECK(pr.cluster_moved);
    CHECK(pr.r == 1);  // tie between edges 1 and 3 resolves to the smaller model
    CHECK(pr.requested_r == 2);
    auto pr3 = glemor::square_root_projectors(X, X, 3);
    CHECK_FALSE(pr3.cluster_moved);
    CHECK(pr3.r == 3);
  }
  SUBCASE("cut beyond the numerical rank throws") {
    Vector d(3);
    d << 2.0, 1.0, 1e-8;
    LowRankPsd X{Dense(d.asDiagonal()), 0.0};
    CHECK_THROWS_WITH_AS(glemor::square_root_projectors(X, X, 3),
                         doctest::Contains("Hankel rank"), std::invalid_argument);
  }
  SUBCASE("zero size is allowed and empty") {
    LowRankPsd I{Dense::Identity(4, 4), 0.0};
    auto pr = glemor::square_root_projectors(I, I, 0);
    CHECK(pr.V.cols() == 0);
    CHECK(pr.W.cols() == 0);
  }
  SUBCASE("random low-rank pair is biorthogonal and oblique") {
    LowRankPsd P{testsup::random_dense(25, 8, 51), 0.0};
    LowRankPsd Q{testsup::random_dense(25, 8, 52), 0.0};
    auto pr = glemor::square_root_projectors(P, Q, 5);
    REQUIRE(pr.r == 5);
    CHECK((pr.W.transpose() * pr.V - Dense::Identity(5, 5)).norm() <= 1e-8);
    Dense Pi = pr.V * pr.W.transpose();
    CHECK((Pi * Pi - Pi).norm() <= 1e-8 * Pi.norm());
  }
}

TEST_CASE("balancing: petrov-galerkin reduction") {
  auto sys = two_mode_random(7, 61);
  SUBCASE("identity projectors reproduce the system") {
    Dense I = Dense::Identity(7, 7);
    auto rom = glemor::reduce(sys, I, I);
    for (int j = 0; j < 2; ++j) {
      CHECK((rom.modes[j].A - sys.modes[j].A).norm() == 0.0);
      CHECK((rom.modes[j].B - sys.modes[j].B).norm() == 0.0);
      CHECK((rom.modes[j].C - sys.modes[j].C).norm() == 0.0);
    }
  }
  SUBCASE("shape validation") {
    CHECK_THROWS_WITH_AS(glemor::reduce(sys, Dense::Identity(7, 3), Dense::Identity(7, 2)),
                         doctest::Contains("shapes"), std::invalid_argument);
  }
}

TEST_CASE("balancing: lmi extremal eigenvalue") {
  const int n = 30;
  Dense A = testsup::random_hurwitz(n, 71);
  Dense B = testsup::random_dense(n, 2, 72);
  Dense C = testsup::random_dense(2, n, 73);
  SUBCASE("zero state matrix leaves only the forcing term") {
    LowRankPsd zero{Dense::Zero(n, 0), 0.0};
    CHECK(glemor::lmi_max_eig(A, zero, B, LmiSide::reach) ==
          doctest::Approx(testsup::spec_norm(B) * testsup::spec_norm(B)).epsilon(1e-10));
    CHECK(glemor::lmi_max_eig(A, zero, C, LmiSide::observ) ==
          doctest::Approx(testsup::spec_norm(C) * testsup::spec_norm(C)).epsilon(1e-10));
  }
  SUBCASE("dense path matches a direct assembly") {
    LowRankPsd X{testsup::random_dense(n, 4, 74), 0.2};
    const double reach = glemor::lmi_max_eig(A, X, B, LmiSide::reach);
    const double observ = glemor::lmi_max_eig(A, X, C, LmiSide::observ);
    CHECK(reach == doctest::Approx(dense_lmi_max(A, recompose(X), B, LmiSide::reach))
                       .epsilon(1e-10));
    CHECK(observ == doctest::Approx(dense_lmi_max(A, recompose(X), C, LmiSide::observ))
                        .epsilon(1e-10));
  }
  SUBCASE("iterative path agrees with the dense one") {
    LowRankPsd X{testsup::random_dense(n, 4, 75), 0.05};
    for (LmiSide side : {LmiSide::reach, LmiSide::observ}) {
      const Dense& G = side == LmiSide::reach ? B : C;
      const double dense = glemor::lmi_max_eig(A, X, G, side);
      const double iter = glemor::lmi_max_eig(A, X, G, side, /*force_iterative=*/true);
      // The iterative path carries absolute accuracy proportional to its shift.
      const double scale = 2.0 * A.norm() * (X.Z.squaredNorm() + X.shift) + G.squaredNorm();
      CHECK(std::abs(iter - dense) <= 1e-8 * scale);
    }
  }
  SUBCASE("a certified gramian nearly satisfies its own inequality") {
    glemor::Mode m{A, B, C};
    auto sys = glemor::make_switched_system({m});
    auto g = glemor::gramians_monolithic(sys, 1e-8);
    // Single mode: the residual controls the inequality violation exactly.
    GleProblemDense pr = glemor::monolithic_problem(sys, LmiSide::reach);
    const double res = glemor::gle_residual_norm(pr, g.P.Z);
    CHECK(glemor::lmi_max_eig(A, g.P, B, LmiSide::reach) <= res + 1e-12);
  }
}

TEST_CASE("balancing: diagonal shift repair on the ladder system") {
  auto sys = synthetic_system(200);
  const double tol = 1e-4;
  auto g = glemor::gramians_monolithic(sys, tol);
  const Dense& A1 = sys.modes[0].A;
  const Dense& A2 = sys.modes[1].A;

  const double l1 = glemor::lmi_max_eig(A1, g.P, sys.modes[0].B, LmiSide::reach);
  const double l2 = glemor::lmi_max_eig(A2, g.P, sys.modes[1].B, LmiSide::reach);
  // Inequality violations of the computed gramian stay within the residual
  // budget of the certified solve.
  CHECK(l1 <= tol);
  CHECK(l2 <= tol);

  auto shifted = glemor::shift_gramian(g.P, tol, {A1, A2});
  CHECK(shifted.mu == doctest::Approx(3.0 * tol).epsilon(1e-6));  // cond_1(A1) = 3
  const double s1 = glemor::lmi_max_eig(A1, shifted.X, sys.modes[0].B, LmiSide::reach);
  const double s2 = glemor::lmi_max_eig(A2, shifted.X, sys.modes[1].B, LmiSide::reach);
  CHECK(s1 < 0.0);
  CHECK(s2 < 0.0);
  CHECK(s1 >= -10.0 * tol);
  CHECK(s1 <= -0.1 * tol);
  CHECK(s2 >= -30.0 * tol);
  CHECK(s2 <= -0.1 * tol);
}

TEST_CASE("balancing: shift repair requires dissipative modes") {
  Dense bad(2, 2);
  bad << -1.0, 10.0, 0.0, -1.0;  // Hurwitz but not dissipative
  LowRankPsd X{Dense::Identity(2, 2), 0.0};
  CHECK_THROWS_WITH_AS(glemor::shift_gramian(X, 1e-6, {bad}),
                       doctest::Contains("dissipative"), std::invalid_argument);
}

TEST_CASE("balancing: residual eigenpairs match a dense decomposition") {
  const int n = 24;
  Dense A = testsup::random_hurwitz(n, 81);
  Dense N = 0.1 * testsup::random_dense(n, n, 82);
  Dense B = testsup::random_dense(n, 2, 83);
  GleProblemDense p{A, {N}, B, 1.0};

  Dense X = testsup::kron_gle_solve(A, {N}, B);
  Dense Z = glemor::psd_sqrt_factor(X);
  // Perturb one direction upward so the residual has a known positive part.
  Dense Zp(n, Z.cols() + 1);
  Zp.leftCols(Z.cols()) = Z;
  Zp.rightCols(1) = 0.05 * Dense::Identity(n, 1);

  // The residual is a low-rank update plus factorization round-off, so the
  // default relative cut separates genuine eigenvalues from noise crisply.
  Dense R = testsup::dense_gle_residual(A, {N}, B, Zp * Zp.transpose());
  Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (R + R.transpose()));
  const double lead = es.eigenvalues().maxCoeff();
  REQUIRE(lead > 0.0);
  std::vector<double> pos;
  for (int i = n - 1; i >= 0; --i)
    if (es.eigenvalues()(i) >= 1e-3 * lead) pos.push_back(es.eigenvalues()(i));

  auto eig = glemor::residual_positive_eigs(p, Zp, 50);
  REQUIRE(size_t(eig.sigma.size()) == pos.size());
  for (Eigen::Index i = 0; i < eig.sigma.size(); ++i) {
    CHECK(eig.sigma(i) == doctest::Approx(pos[size_t(i)]).epsilon(1e-8));
    // Columns are genuine eigenvectors of the residual.
    Vector ru = R * eig.U.col(i);
    CHECK((ru - eig.sigma(i) * eig.U.col(i)).norm() <= 1e-7 * R.norm());
  }
}

TEST_CASE("balancing: negative-definite residual yields no eigenpairs") {
  const int n = 16;
  Dense A = testsup::random_hurwitz(n, 91);
  Dense B = testsup::random_dense(n, 2, 92);
  Dense X = testsup::kron_gle_solve(A, {}, B);
  // Overshoot along the solution of A P + P Aᵀ + I = 0 to push the residual
  // strictly negative definite.
  Dense P = testsup::kron_gle_solve(A, {}, Dense::Identity(n, n));
  Dense Z = glemor::psd_sqrt_factor(X + 0.01 * P);
  GleProblemDense p{A, {}, B, 1.0};
  auto eig = glemor::residual_positive_eigs(p, Z);
  CHECK(eig.sigma.size() == 0);
  CHECK(glemor::residual_split_perturbation(p, Z, 50, 1e-10).cols() == 0);
}

TEST_CASE("balancing: residual-splitting repair") {
  SUBCASE("scalar oracle") {
    Dense A(1, 1), B(1, 1), Z(1, 1);
    A << -2.0;
    B << 1.0;
    Z << 0.25;  // X = 0.0625, residual = 1 - 4·0.0625 = 0.75 > 0
    GleProblemDense p{A, {}, B, 1.0};
    Dense G = glemor::residual_split_perturbation(p, Z, 10, 1e-12);
    REQUIRE(G.cols() == 1);
    CHECK(G(0, 0) * G(0, 0) == doctest::Approx(0.75 / 4.0).epsilon(1e-9));
  }
  SUBCASE("repaired factor satisfies the anchor inequality") {
    const int n = 40;
    Dense A = testsup::random_hurwitz(n, 101);
    Dense N = 0.1 * testsup::random_dense(n, n, 102);
    Dense B = testsup::random_dense(n, 2, 103);
    GleProblemDense p{A, {N}, B, 1.0};
    Dense X = testsup::kron_gle_solve(A, {N}, B);
    // Truncate the exact factor to mimic an inexact low-rank solution.
    Dense Z = glemor::compress_factor(glemor::psd_sqrt_factor(X), 1e-5);
    const double before = dense_lmi_max(A, Z * Z.transpose(), B, LmiSide::reach);

    const double lyap_tol = 1e-9;
    Dense G = glemor::residual_split_perturbation(p, Z, 50, lyap_tol);
    Dense Xhat = Z * Z.transpose() + G * G.transpose();
    const double after = dense_lmi_max(A, Xhat, B, LmiSide::reach);
    CHECK(after <= std::max(10.0 * lyap_tol, 1e-2 * std::abs(before)));
    // The repair only ever adds state energy.
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("balancing: approximate hankel spectrum stays below the exact one") {
  const int n = 40;
  auto sys = synthetic_system(n);
  GleProblemDense pr = glemor::monolithic_problem(sys, LmiSide::reach);
  GleProblemDense po = glemor::monolithic_problem(sys, LmiSide::observ);
  Dense P = testsup::kron_gle_solve(pr.A, pr.N_list, pr.B);
  Dense Q = testsup::kron_gle_solve(po.A, po.N_list, po.B);

  // Validation mode: the exact contraction number keeps the problem unscaled,
  // so the computed iterates approximate the same solution from below.
  const double v = glemor::estimate_contraction_exact(pr.A, pr.N_list);
  glemor::GleSolveOptions opts;
  opts.gamma_override = v / (1.0 - v);
  const double tol = 1e-6;
  auto g = glemor::gramians_monolithic(sys, tol, opts);

  Eigen::JacobiSVD<Dense> exact(glemor::psd_sqrt_factor(P).transpose() *
                                glemor::psd_sqrt_factor(Q));
  Eigen::JacobiSVD<Dense> approx(g.P.Z.transpose() * g.Q.Z);
  const Vector se = exact.singularValues();
  const Vector sa = approx.singularValues();
  for (Eigen::Index k = 0; k < std::min(se.size(), sa.size()); ++k)
    CHECK(sa(k) <= se(k) + 100.0 * tol);
}

TEST_CASE("balancing: piecewise reduction invariants") {
  const int n = 30;
  auto sys = two_mode_random(n, 111);
  const double tol = 1e-6;
  auto grams = glemor::pbr_gramians(sys, tol);
  auto rom = glemor::pbr_reduce(sys, grams, 6, tol);
  REQUIRE(rom.mode_count() == 2);
  CHECK(rom.r == 6);
  CHECK(rom.full_size() == n);

  for (int j = 0; j < 2; ++j) {
    const Vector& sf = rom.spectra[size_t(j)];
    REQUIRE(sf.size() == n);
    CHECK(sf.minCoeff() >= tol);
    for (Eigen::Index i = 1; i < n; ++i) CHECK(sf(i - 1) >= sf(i) - 1e-14);

    // Biorthogonality of the completed pair.
    const Dense VW = rom.W_full[size_t(j)].transpose() * rom.V_full[size_t(j)];
    CHECK((VW - Dense::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-6);

    // Balanced gramians: both congruences produce the floored spectrum.
    const Dense P = grams[size_t(j)].P.Z * grams[size_t(j)].P.Z.transpose();
    const Dense Q = grams[size_t(j)].Q.Z * grams[size_t(j)].Q.Z.transpose();
    Eigen::Index ns = 0;
    while (ns < n && sf(ns) - tol > 1e-10 * (sf(0) - tol)) ++ns;
    const Dense Pb = rom.W_full[size_t(j)].transpose() * P * rom.W_full[size_t(j)];
    const Dense Qb = rom.V_full[size_t(j)].transpose() * Q * rom.V_full[size_t(j)];
    for (Eigen::Index i = 0; i < ns; ++i) {
      CHECK(Pb(i, i) == doctest::Approx(sf(i) - tol).epsilon(1e-6));
      CHECK(Qb(i, i) == doctest::Approx(sf(i) - tol).epsilon(1e-6));
    }

    // Same-mode jumps are identities.
    CHECK((rom.jump_map(j, j, rom.r) - Dense::Identity(rom.r, rom.r)).cwiseAbs().maxCoeff() <=
          1e-6);
  }

  auto sub = rom.subsystem(3);
  CHECK(sub.n() == 3);
  CHECK((sub.modes[0].A - rom.balanced[0].A.topLeftCorner(3, 3)).norm() == 0.0);

  auto signal = glemor::make_signal(0.0, {1.0}, {0, 1}, 2);
  auto jumps = rom.jump_sequence(signal, rom.r);
  REQUIRE(jumps.size() == 1);
  CHECK((jumps[0] - rom.coupling[1][0].topLeftCorner(rom.r, rom.r)).norm() == 0.0);

  // A cut inside the floored trailing plateau is honored.
  auto deep = glemor::pbr_reduce(sys, grams, n - 2, tol);
  CHECK(deep.r == n - 2);

  CHECK_THROWS_WITH_AS(glemor::pbr_reduce(sys, grams, 0, tol), doctest::Contains("range"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(glemor::pbr_reduce(sys, {grams[0]}, 4, tol),
                       doctest::Contains("per mode"), std::invalid_argument);
}

TEST_CASE("balancing: spectral abscissa") {
  Dense A(2, 2);
  A << -1.0, 0.0, 0.0, -2.0;
  CHECK(glemor::hurwitz_check(A) == doctest::Approx(-1.0));
  Dense J(2, 2);
  J << 0.0, 1.0, 0.0, 0.0;
  CHECK(glemor::hurwitz_check(J) == doctest::Approx(0.0));
}
