#include "glemor/balancing.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace glemor {

namespace {

// Horizontal stack of the per-mode input maps (reach) or transposed output
// maps (observ); the coupled equations carry every mode's forcing term.
Dense stacked_forcing(const SwitchedSystem& sys, LmiSide side) {
  const Eigen::Index n = sys.n();
  const Eigen::Index w = side == LmiSide::reach ? sys.m() : sys.p();
  Dense B(n, Eigen::Index(sys.mode_count()) * w);
  for (int j = 0; j < sys.mode_count(); ++j) {
    if (side == LmiSide::reach)
      B.middleCols(Eigen::Index(j) * w, w) = sys.modes[size_t(j)].B;
    else
      B.middleCols(Eigen::Index(j) * w, w) = sys.modes[size_t(j)].C.transpose();
  }
  return B;
}

GleProblemDense anchored_problem(const SwitchedSystem& sys, int anchor, LmiSide side) {
  assert(anchor >= 0 && anchor < sys.mode_count());
  const Dense& Aa = sys.modes[size_t(anchor)].A;
  GleProblemDense p;
  p.A = side == LmiSide::reach ? Aa : Dense(Aa.transpose());
  p.N_list.reserve(size_t(sys.mode_count()) - 1);
  for (int j = 0; j < sys.mode_count(); ++j) {
    if (j == anchor) continue;  // the anchor's difference term vanishes
    Dense N = sys.modes[size_t(j)].A - Aa;
    p.N_list.push_back(side == LmiSide::reach ? N : Dense(N.transpose()));
  }
  p.B = stacked_forcing(sys, side);
  return p;
}

GramianPair solve_pair(const GleProblemDense& reach, const GleProblemDense& observ, double tol,
                       const GleSolveOptions& opts) {
  CertifiedGleSolution sp = solve_gle(reach, tol, opts);
  CertifiedGleSolution sq = solve_gle(observ, tol, opts);
  if (!sp.converged || !sq.converged)
    throw std::runtime_error("gramian solve did not reach the requested certificate");
  GramianPair g;
  g.P.Z = sp.Z;
  g.Q.Z = sq.Z;
  g.p_certificate = sp.error_bound_2;
  g.q_certificate = sq.error_bound_2;
  g.p_scale = sp.scale_applied;
  g.q_scale = sq.scale_applied;
  return g;
}

// Index of the first entry at or below the numerical-rank cut.
Eigen::Index hankel_rank(const Vector& sg) {
  if (sg.size() == 0 || sg(0) <= 0.0) return 0;
  Eigen::Index nt = 0;
  while (nt < sg.size() && sg(nt) > 1e-13 * sg(0)) ++nt;
  return nt;
}

// True when cutting `r` splits no interior cluster of `descending`; cuts
// inside a trailing plateau (a cluster reaching the end) are admissible.
bool cut_admissible(const Vector& descending, Eigen::Index r,
                    Eigen::Index* lo = nullptr, Eigen::Index* hi = nullptr) {
  const std::vector<Eigen::Index> edges = cluster_edges(descending);
  if (std::binary_search(edges.begin(), edges.end(), r)) return true;
  const auto up = std::upper_bound(edges.begin(), edges.end(), r);
  if (lo) *lo = *(up - 1);
  if (hi) *hi = *up;
  return *up == descending.size();
}

}  // namespace

SwitchedSystem PbrRom::subsystem(Eigen::Index s) const {
  assert(s >= 1 && s <= full_size());
  std::vector<Mode> modes;
  modes.reserve(balanced.size());
  for (const Mode& m : balanced)
    modes.push_back({m.A.topLeftCorner(s, s), m.B.topRows(s), m.C.leftCols(s)});
  return make_switched_system(std::move(modes), false);
}

Dense PbrRom::jump_map(int to, int from, Eigen::Index s) const {
  assert(to >= 0 && to < mode_count() && from >= 0 && from < mode_count());
  assert(s >= 1 && s <= full_size());
  return coupling[size_t(to)][size_t(from)].topLeftCorner(s, s);
}

std::vector<Dense> PbrRom::jump_sequence(const SwitchingSignal& signal, Eigen::Index s) const {
  std::vector<Dense> jumps;
  jumps.reserve(signal.breakpoints.size());
  for (size_t k = 0; k < signal.breakpoints.size(); ++k)
    jumps.push_back(jump_map(signal.mode_path[k + 1], signal.mode_path[k], s));
  return jumps;
}

GleProblemDense monolithic_problem(const SwitchedSystem& sys, LmiSide side) {
  if (sys.mode_count() == 0) throw std::invalid_argument("monolithic_problem: empty system");
  return anchored_problem(sys, 0, side);
}

GleProblemDense pbr_mode_problem(const SwitchedSystem& sys, int j, LmiSide side) {
  if (j < 0 || j >= sys.mode_count())
    throw std::invalid_argument("pbr_mode_problem: mode index out of range");
  return anchored_problem(sys, j, side);
}

GramianPair gramians_monolithic(const SwitchedSystem& sys, double tol,
                                const GleSolveOptions& opts) {
  return solve_pair(monolithic_problem(sys, LmiSide::reach),
                    monolithic_problem(sys, LmiSide::observ), tol, opts);
}

std::vector<GramianPair> pbr_gramians(const SwitchedSystem& sys, double tol,
                                      const GleSolveOptions& opts) {
  std::vector<GramianPair> out;
  out.reserve(size_t(sys.mode_count()));
  for (int j = 0; j < sys.mode_count(); ++j)
    out.push_back(solve_pair(pbr_mode_problem(sys, j, LmiSide::reach),
                             pbr_mode_problem(sys, j, LmiSide::observ), tol, opts));
  return out;
}

Dense psd_full_factor(const LowRankPsd& X, Eigen::Index dense_cap) {
  assert(X.shift >= 0.0);
  if (X.shift == 0.0) return X.Z;
  const Eigen::Index n = X.n();
  if (n <= dense_cap) {
    Dense full = X.Z * X.Z.transpose();
    full.diagonal().array() += X.shift;
    return psd_sqrt_factor(full);
  }
  // Algebraic expansion: [Z, √shift·I] factors Z·Zᵀ + shift·I exactly without
  // an n×n eigensolve.
  Dense F(n, X.Z.cols() + n);
  F.leftCols(X.Z.cols()) = X.Z;
  F.rightCols(n) = std::sqrt(X.shift) * Dense::Identity(n, n);
  return F;
}

std::vector<Eigen::Index> cluster_edges(const Vector& descending, double rel_tol) {
  std::vector<Eigen::Index> edges{0};
  const Eigen::Index n = descending.size();
  if (n == 0) return edges;
  const double scale = std::abs(descending(0));
  for (Eigen::Index r = 1; r < n; ++r)
    if (std::abs(descending(r - 1) - descending(r)) > rel_tol * scale) edges.push_back(r);
  edges.push_back(n);
  return edges;
}

ProjectionPair square_root_projectors(const LowRankPsd& P, const LowRankPsd& Q,
                                      Eigen::Index r) {
  if (P.n() != Q.n()) throw std::invalid_argument("square_root_projectors: size mismatch");
  if (r < 0) throw std::invalid_argument("square_root_projectors: negative truncation size");
  const Dense S = psd_full_factor(P);
  const Dense R = psd_full_factor(Q);
  Eigen::BDCSVD<Dense> svd(S.transpose() * R, Eigen::ComputeThinU | Eigen::ComputeThinV);

  ProjectionPair out;
  out.hankel = svd.singularValues();
  out.requested_r = r;
  const Eigen::Index nt = hankel_rank(out.hankel);
  if (r > nt)
    throw std::invalid_argument(
        "square_root_projectors: requested size exceeds the numerical Hankel rank");

  Eigen::Index lo = 0, hi = nt;
  Eigen::Index eff = r;
  if (!cut_admissible(out.hankel.head(nt), r, &lo, &hi)) {
    eff = (r - lo <= hi - r) ? lo : hi;  // ties resolve to the smaller model
    out.cluster_moved = true;
  }
  out.r = eff;
  if (eff > 0) {
    const Vector inv_sqrt = out.hankel.head(eff).cwiseSqrt().cwiseInverse();
    out.V = S * (svd.matrixU().leftCols(eff) * inv_sqrt.asDiagonal());
    out.W = R * (svd.matrixV().leftCols(eff) * inv_sqrt.asDiagonal());
  } else {
    out.V.resize(P.n(), 0);
    out.W.resize(P.n(), 0);
  }
  return out;
}

SwitchedSystem reduce(const SwitchedSystem& sys, const Dense& V, const Dense& W) {
  if (V.rows() != sys.n() || W.rows() != sys.n() || V.cols() != W.cols())
    throw std::invalid_argument("reduce: projector shapes do not match the system");
  std::vector<Mode> modes;
  modes.reserve(sys.modes.size());
  for (const Mode& m : sys.modes)
    modes.push_back({W.transpose() * m.A * V, W.transpose() * m.B, m.C * V});
  return make_switched_system(std::move(modes), false);
}

double lmi_max_eig(const Dense& A, const LowRankPsd& X, const Dense& G, LmiSide side,
                   bool force_iterative) {
  const Eigen::Index n = A.rows();
  assert(A.cols() == n && X.n() == n);
  assert((side == LmiSide::reach ? G.rows() : G.cols()) == n);
  if (!force_iterative && n <= 400) {
    Dense Xm = X.Z * X.Z.transpose();
    Xm.diagonal().array() += X.shift;
    Dense T = side == LmiSide::reach
                  ? Dense(A * Xm + Xm * A.transpose() + G * G.transpose())
                  : Dense(A.transpose() * Xm + Xm * A + G.transpose() * G);
    Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (T + T.transpose()),
                                            Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  // Shift into the positive cone so the relative Lanczos test applies; the
  // result carries absolute accuracy on the order of rtol times the shift.
  const Dense At = A.transpose();
  const double c = 2.0 * A.norm() * (X.Z.squaredNorm() + X.shift) + G.squaredNorm();
  auto apply = [&](const Vector& v) {
    Vector xv = X.Z * (X.Z.transpose() * v);
    Vector res;
    if (side == LmiSide::reach) {
      res = A * xv + X.Z * (X.Z.transpose() * (At * v)) + G * (G.transpose() * v);
    } else {
      res = At * xv + X.Z * (X.Z.transpose() * (A * v)) + G.transpose() * (G * v);
    }
    if (X.shift != 0.0) res += X.shift * (A * v + At * v);
    res += c * v;
    return res;
  };
  return lanczos_max_eig(n, apply, 1e-12, "lmi_max_eig") - c;
}

ShiftedGramian shift_gramian(const LowRankPsd& X, double tol, const std::vector<Dense>& A_list) {
  if (tol <= 0.0) throw std::invalid_argument("shift_gramian: tol must be > 0");
  if (A_list.empty()) throw std::invalid_argument("shift_gramian: empty mode list");
  double kappa = 0.0;
  for (const Dense& A : A_list) {
    Eigen::SelfAdjointEigenSolver<Dense> es(A + A.transpose(), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() >= 0.0)
      throw std::invalid_argument(
          "diagonal shift repair needs every mode strictly dissipative; "
          "use the piecewise reduction instead");
    kappa = std::max(kappa, cond_1norm(A));
  }
  ShiftedGramian out;
  out.mu = tol * kappa;
  out.X = X;
  out.X.shift += out.mu;
  return out;
}

TruncatedEig residual_positive_eigs(const GleProblemDense& problem, const Dense& Z, int n_pos,
                                    double rel_cut) {
  if (n_pos <= 0) throw std::invalid_argument("residual_positive_eigs: n_pos must be > 0");
  n_pos = std::min(n_pos, 50);
  const Eigen::Index n = problem.A.rows();
  assert(Z.rows() == n);

  TruncatedEig out;
  out.U.resize(n, 0);
  out.sigma.resize(0);
  // The Frobenius norm bounds the residual spectrum; shifting by it keeps the
  // Lanczos target positive and proportionate to the quantities sought.
  const double c = gle_residual_norm(problem, Z);
  if (c == 0.0) return out;

  const Dense At = problem.A.transpose();
  std::vector<Dense> Nt;
  Nt.reserve(problem.N_list.size());
  for (const Dense& N : problem.N_list) Nt.push_back(N.transpose());
  auto apply_residual = [&](const Vector& v) {
    Vector y = problem.A * (Z * (Z.transpose() * v));
    y += Z * (Z.transpose() * (At * v));
    for (size_t j = 0; j < problem.N_list.size(); ++j)
      y += problem.N_list[j] * (Z * (Z.transpose() * (Nt[j] * v)));
    y += problem.B * (problem.B.transpose() * v);
    return y;
  };

  std::vector<Vector> found;
  std::vector<double> vals;
  for (int it = 0; it < n_pos; ++it) {
    auto deflated = [&](const Vector& v) {
      Vector w = v;
      for (const Vector& u : found) w -= u.dot(w) * u;
      Vector y = apply_residual(w);
      for (const Vector& u : found) y -= u.dot(y) * u;
      y += c * v;
      return y;
    };
    Vector u;
    const double lam =
        lanczos_max_eig(n, deflated, 1e-10, "residual_positive_eigs", 400, &u) - c;
    if (lam <= 0.0 || (!vals.empty() && lam < rel_cut * vals.front())) break;
    for (const Vector& u0 : found) u -= u0.dot(u) * u0;
    u.normalize();
    found.push_back(u);
    vals.push_back(lam);
  }

  out.U.resize(n, Eigen::Index(found.size()));
  out.sigma.resize(Eigen::Index(vals.size()));
  for (size_t i = 0; i < found.size(); ++i) {
    out.U.col(Eigen::Index(i)) = found[i];
    out.sigma(Eigen::Index(i)) = vals[i];
  }
  return out;
}

Dense residual_split_perturbation(const GleProblemDense& problem, const Dense& Z, int n_pos,
                                  double lyap_tol) {
  const TruncatedEig pos = residual_positive_eigs(problem, Z, n_pos);
  if (pos.sigma.size() == 0) return Dense(Z.rows(), 0);
  const Dense F = pos.U * pos.sigma.cwiseSqrt().asDiagonal();
  const LyapunovSolution sol = solve_lyapunov_lowrank(problem.A, F, lyap_tol);
  if (!sol.converged)
    throw std::runtime_error("residual_split_perturbation: correction solve stalled");
  return sol.Z;
}

double hurwitz_check(const Dense& A) {
  assert(A.rows() == A.cols());
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Dense> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

PbrRom pbr_reduce(const SwitchedSystem& sys, const std::vector<GramianPair>& gramians,
                  Eigen::Index r, double floor) {
  const int M = sys.mode_count();
  const Eigen::Index n = sys.n();
  if (int(gramians.size()) != M)
    throw std::invalid_argument("pbr_reduce: need one Gramian pair per mode");
  if (r < 1 || r > n) throw std::invalid_argument("pbr_reduce: truncation size out of range");
  if (floor < 0.0) throw std::invalid_argument("pbr_reduce: negative spectrum floor");

  PbrRom rom;
  rom.requested_r = r;
  rom.balanced.resize(size_t(M));
  rom.spectra.resize(size_t(M));
  rom.V_full.resize(size_t(M));
  rom.W_full.resize(size_t(M));
  for (int j = 0; j < M; ++j) {
    const Dense S = psd_full_factor(gramians[size_t(j)].P);
    const Dense R = psd_full_factor(gramians[size_t(j)].Q);
    Eigen::BDCSVD<Dense> svd(S.transpose() * R, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sg = svd.singularValues();
    const Eigen::Index nt = hankel_rank(sg);
    if (nt == 0) throw std::runtime_error("pbr_reduce: degenerate Hankel spectrum");

    const Vector inv_sqrt = sg.head(nt).cwiseSqrt().cwiseInverse();
    const Dense V1 = S * (svd.matrixU().leftCols(nt) * inv_sqrt.asDiagonal());
    const Dense W1 = R * (svd.matrixV().leftCols(nt) * inv_sqrt.asDiagonal());
    Dense Vb(n, n), Wb(n, n);
    if (nt < n) {
      // Full-rank completion: orthonormal kernel directions extend V; the
      // matching W block is the oblique complement keeping the pair
      // biorthogonal (exactly in its first block, to solver accuracy after).
      Eigen::HouseholderQR<Dense> qr(W1);
      const Dense Z2 = Dense(qr.householderQ()).rightCols(n - nt);
      const Dense Pi = Dense::Identity(n, n) - V1 * W1.transpose();
      const Dense Y = (Z2.transpose() * Pi * Z2).partialPivLu().solve(Z2.transpose() * Pi);
      Vb.leftCols(nt) = V1;
      Vb.rightCols(n - nt) = Z2;
      Wb.leftCols(nt) = W1;
      Wb.rightCols(n - nt) = Y.transpose();
    } else {
      Vb = V1;
      Wb = W1;
    }
    const double biorth = (Wb.transpose() * Vb - Dense::Identity(n, n)).cwiseAbs().maxCoeff();
    if (biorth > 1e-3) {
      std::ostringstream msg;
      msg << "mode " << j << " balancing is ill-conditioned (biorthogonality residual "
          << biorth << ")";
      rom.warnings.push_back(msg.str());
    }

    Vector sf = Vector::Zero(n);
    sf.head(nt) = sg.head(nt);
    sf.array() += floor;
    rom.spectra[size_t(j)] = sf;
    rom.V_full[size_t(j)] = Vb;
    rom.W_full[size_t(j)] = Wb;
    rom.balanced[size_t(j)] = {Wb.transpose() * sys.modes[size_t(j)].A * Vb,
                               Wb.transpose() * sys.modes[size_t(j)].B,
                               sys.modes[size_t(j)].C * Vb};
  }

  rom.coupling.assign(size_t(M), std::vector<Dense>(size_t(M)));
  for (int jj = 0; jj < M; ++jj)
    for (int ii = 0; ii < M; ++ii)
      rom.coupling[size_t(jj)][size_t(ii)] =
          rom.W_full[size_t(jj)].transpose() * rom.V_full[size_t(ii)];

  // The cut must respect every mode's clusters at once; an interior cut moves
  // to the nearest size admissible for all modes (ties resolve downward).
  auto admissible = [&](Eigen::Index cand) {
    for (const Vector& s : rom.spectra)
      if (!cut_admissible(s, cand)) return false;
    return true;
  };
  Eigen::Index eff = r;
  if (!admissible(r)) {
    for (Eigen::Index d = 1; d < n; ++d) {
      if (r - d >= 1 && admissible(r - d)) {
        eff = r - d;
        break;
      }
      if (r + d <= n && admissible(r + d)) {
        eff = r + d;
        break;
      }
    }
  }
  rom.r = eff;

  for (int j = 0; j < M; ++j) {
    const double re = hurwitz_check(rom.balanced[size_t(j)].A.topLeftCorner(eff, eff));
    rom.mode_max_re.push_back(re);
    if (re >= 0.0) {
      std::ostringstream msg;
      msg << "reduced mode " << j << " is not Hurwitz (spectral abscissa " << re << ")";
      rom.warnings.push_back(msg.str());
    }
  }
  return rom;
}

}  // namespace glemor
