#include "glemor/experiments.hpp"

#include "glemor/io.hpp"
#include "json.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace glemor {

namespace {

Dense kron(const Dense& A, const Dense& B) {
  Dense K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Dense oracle: vectorized linear solve of the coupled equation. Cubic in n²,
// for cross-checks only.
Dense dense_gle_kron(const Dense& A, const std::vector<Dense>& N_list, const Dense& B) {
  const Eigen::Index n = A.rows();
  const Dense I = Dense::Identity(n, n);
  Dense M = kron(I, A) + kron(A, I);
  for (const Dense& N : N_list) M += kron(N, N);
  const Dense BBt = B * B.transpose();
  Vector rhs = -Eigen::Map<const Vector>(BBt.data(), n * n);
  Vector x = Eigen::PartialPivLU<Dense>(M).solve(rhs);
  Dense X = Eigen::Map<Dense>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

double sym_spectral_norm(const Dense& S) {
  Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

GleProblemDense scaled_problem(GleProblemDense problem, double scale) {
  for (Dense& N : problem.N_list) N *= scale;
  problem.scale_applied *= scale;
  return problem;
}

Vector padded(const Vector& v, Eigen::Index len) {
  Vector out = Vector::Zero(len);
  out.head(v.size()) = v;
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::vector<Eigen::Index> parse_index_list(const std::string& text) {
  std::vector<Eigen::Index> out;
  for (double v : parse_double_list(text)) out.push_back(Eigen::Index(v));
  return out;
}

std::vector<Eigen::Index> even_range(Eigen::Index lo, Eigen::Index hi) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index r = lo; r <= hi; r += 2) out.push_back(r);
  return out;
}

struct StageRunner {
  RunReport& report;

  bool run(const std::string& stage, const std::function<void()>& fn) {
    StageReport sr;
    sr.stage = stage;
    if (!report.ok) {
      sr.ok = false;
      sr.message = "skipped: earlier stage failed";
      report.stages.push_back(sr);
      return false;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      sr.ok = false;
      sr.message = e.what();
    }
    sr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!sr.ok) report.ok = false;
    report.stages.push_back(sr);
    return sr.ok;
  }
};

std::string csv_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

void require_system(const ExperimentConfig& cfg, const std::string& family,
                    const std::string& id) {
  if (cfg.system != family)
    throw std::invalid_argument(id + " runs on the " + family + " system, config says " +
                                cfg.system);
}

}  // namespace

SwitchedSystem gen_synthetic(Eigen::Index n) {
  if (n < 2) throw std::invalid_argument("gen_synthetic: n must be >= 2");
  Dense A1 = -Dense::Identity(n, n);
  Dense A2 = -2.0 * Dense::Identity(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    A1(i + 1, i) = 0.5;
    A2(i + 1, i) = 0.8;
    A2(i, i + 1) = -0.2;
  }
  Dense B1 = Dense::Zero(n, 1), B2 = Dense::Zero(n, 1);
  B1(n - 1, 0) = 1.0;
  B2(0, 0) = 1.0;
  // The family is provably stable (triangular, and diagonally dominant), so
  // skip the eigensolver validation.
  return make_switched_system({{A1, B1, B1.transpose()}, {A2, B2, B2.transpose()}}, false);
}

GleProblemSparse synthetic_sparse_problem(Eigen::Index n, LmiSide side) {
  if (n < 2) throw std::invalid_argument("synthetic_sparse_problem: n must be >= 2");
  std::vector<Eigen::Triplet<double>> t1, t2;
  for (Eigen::Index i = 0; i < n; ++i) {
    t1.emplace_back(i, i, -1.0);
    t2.emplace_back(i, i, -2.0);
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    t1.emplace_back(i + 1, i, 0.5);
    t2.emplace_back(i + 1, i, 0.8);
    t2.emplace_back(i, i + 1, -0.2);
  }
  Sparse A(n, n), A2(n, n);
  A.setFromTriplets(t1.begin(), t1.end());
  A2.setFromTriplets(t2.begin(), t2.end());
  Sparse N = A2 - A;
  // B1 = C1ᵀ = eₙ and B2 = C2ᵀ = e₁, so both sides stack to the same forcing.
  Dense B = Dense::Zero(n, 2);
  B(n - 1, 0) = 1.0;
  B(0, 1) = 1.0;
  if (side == LmiSide::observ) {
    A = Sparse(A.transpose());
    N = Sparse(N.transpose());
  }
  return {A, {N}, B, 1.0};
}

std::vector<BlackScholesSample> black_scholes_default_samples() {
  return {{0.25, 0.001}, {0.05, 0.02}, {0.25, 0.02}, {0.05, 0.001}};
}

BlackScholesSystem gen_black_scholes(const BlackScholesParams& params,
                                     const std::vector<BlackScholesSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("gen_black_scholes: no parameter samples");
  if (params.n < 2) throw std::invalid_argument("gen_black_scholes: n must be >= 2");
  if (!(params.strike > 0.0 && params.strike < params.domain))
    throw std::invalid_argument("gen_black_scholes: need 0 < strike < domain");
  const Eigen::Index n = params.n;
  const double h = params.domain / double(n + 1);

  // Second- and first-derivative stencils on the interior grid s_i = i·h; the
  // identity part of the reaction term folds into G.
  Dense D = Dense::Zero(n, n), G = Dense::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = double(i + 1) * h;
    const double d = s * s / (h * h), g = s / (2.0 * h);
    D(i, i) = -2.0 * d;
    if (i > 0) {
      D(i, i - 1) = d;
      G(i, i - 1) = -g;
    }
    if (i + 1 < n) {
      D(i, i + 1) = d;
      G(i, i + 1) = g;
    }
    G(i, i) = -1.0;
  }

  // Right-boundary value enters the last interior row with the dropped
  // stencil weight; channel 1 carries +domain, channel 2 carries -strike so
  // that u = (1, e^{-rate·t}) reproduces the boundary data.
  Dense C = Dense::Zero(2, n);
  C.row(0).setConstant(1.0 / double(n));
  C(1, n - 1) = 1.0;

  BlackScholesSystem out;
  out.h = h;
  std::vector<Mode> modes;
  for (const BlackScholesSample& mu : samples) {
    if (!(mu.volatility > 0.0) || mu.rate < 0.0)
      throw std::invalid_argument("gen_black_scholes: need volatility > 0 and rate >= 0");
    Mode mode;
    mode.A = 0.5 * mu.volatility * mu.volatility * D + mu.rate * G;
    const double sn = double(n) * h;
    const double w = 0.5 * mu.volatility * mu.volatility * sn * sn / (h * h) +
                     mu.rate * sn / (2.0 * h);
    Dense B = Dense::Zero(n, 2);
    B(n - 1, 0) = params.domain * w;
    B(n - 1, 1) = -params.strike * w;
    const double scale = spectral_norm(B);
    mode.B = B / scale;
    mode.C = C;
    out.input_scales.push_back(scale);
    modes.push_back(std::move(mode));
  }
  out.sys = make_switched_system(std::move(modes), true);
  return out;
}

InputSignal boundary_input(double rate) {
  std::ostringstream name;
  name << "boundary(rate=" << rate << ")";
  return {[rate](double t) {
            Vector u(2);
            u << 1.0, std::exp(-rate * t);
            return u;
          },
          name.str()};
}

InputSignal oscillating_input(Eigen::Index m) {
  return {[m](double t) {
            return Vector::Constant(m, std::sin(2.0 * M_PI * std::exp(0.5 * t)));
          },
          "oscillating"};
}

InputSignal chirp_input(Eigen::Index m) {
  return {[m](double t) { return Vector::Constant(m, std::sin(t * t + t)); }, "chirp"};
}

InputSignal select_input(const std::string& name, const std::string& system, Eigen::Index m) {
  std::string pick = name;
  if (pick == "default") pick = system == "synthetic" ? "chirp" : "u2";
  if (pick == "u1") {
    if (m != 2) throw std::invalid_argument("input u1 needs the two boundary channels");
    return boundary_input();
  }
  if (pick == "u2") return oscillating_input(m);
  if (pick == "chirp") return chirp_input(m);
  if (pick == "zero") return zero_input(m);
  throw std::invalid_argument("unknown input selector: " + name);
}

std::vector<LadderRow> tolerance_ladder_rows(Eigen::Index n, const std::vector<double>& tols) {
  const SwitchedSystem sys = gen_synthetic(n);
  const GleProblemDense pr = monolithic_problem(sys, LmiSide::reach);
  const GleProblemDense po = monolithic_problem(sys, LmiSide::observ);
  // This family contracts without rescaling, so run the iteration on the
  // original problem with the exact constant; the certificate then tracks the
  // true error within one contraction step and one dense oracle per side
  // covers the whole ladder.
  const double v = estimate_contraction_exact(pr.A, pr.N_list);
  if (v >= 1.0) throw std::runtime_error("tolerance ladder: family does not contract");
  GleSolveOptions opts;
  opts.gamma_override = v / (1.0 - v);
  const Dense Xp = dense_gle_kron(pr.A, pr.N_list, pr.B);
  const Dense Xq = dense_gle_kron(po.A, po.N_list, po.B);
  std::vector<LadderRow> rows;
  for (double tol : tols) {
    LadderRow row;
    row.tol = tol;
    const CertifiedGleSolution sp = solve_gle(pr, tol, opts);
    const CertifiedGleSolution sq = solve_gle(po, tol, opts);
    if (!sp.converged || !sq.converged)
      throw std::runtime_error("tolerance ladder: solve did not certify");
    row.err_p = sym_spectral_norm(Xp - sp.Z * sp.Z.transpose());
    row.err_q = sym_spectral_norm(Xq - sq.Z * sq.Z.transpose());
    row.cert_p = sp.error_bound_2;
    row.cert_q = sq.error_bound_2;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ShiftRepairRow> shift_repair_rows(const SwitchedSystem& sys,
                                              const std::vector<double>& tols) {
  const GleProblemDense pr = monolithic_problem(sys, LmiSide::reach);
  std::vector<Dense> A_list;
  for (const Mode& m : sys.modes) A_list.push_back(m.A);
  std::vector<ShiftRepairRow> rows;
  for (double tol : tols) {
    const CertifiedGleSolution sol = solve_gle(pr, tol);
    if (!sol.converged) throw std::runtime_error("shift repair: solve did not certify");
    const LowRankPsd P{sol.Z, 0.0};
    const ShiftedGramian Ph = shift_gramian(P, tol, A_list);
    ShiftRepairRow row;
    row.tol = tol;
    row.mu_hat = Ph.mu;
    row.lam_tilde.resize(Eigen::Index(sys.modes.size()));
    row.lam_hat.resize(Eigen::Index(sys.modes.size()));
    for (size_t j = 0; j < sys.modes.size(); ++j) {
      row.lam_tilde(Eigen::Index(j)) =
          lmi_max_eig(sys.modes[j].A, P, sys.modes[j].B, LmiSide::reach);
      row.lam_hat(Eigen::Index(j)) =
          lmi_max_eig(sys.modes[j].A, Ph.X, sys.modes[j].B, LmiSide::reach);
    }
    rows.push_back(row);
  }
  return rows;
}

HankelCompare hankel_compare(const SwitchedSystem& sys, double tol) {
  const GleProblemDense pr = monolithic_problem(sys, LmiSide::reach);
  const GleProblemDense po = monolithic_problem(sys, LmiSide::observ);
  const Dense S = psd_sqrt_factor(dense_gle_kron(pr.A, pr.N_list, pr.B));
  const Dense R = psd_sqrt_factor(dense_gle_kron(po.A, po.N_list, po.B));
  const CertifiedGleSolution sp = solve_gle(pr, tol);
  const CertifiedGleSolution sq = solve_gle(po, tol);
  if (!sp.converged || !sq.converged)
    throw std::runtime_error("hankel compare: solve did not certify");
  HankelCompare out;
  const Vector exact = Eigen::BDCSVD<Dense>(S.transpose() * R).singularValues();
  const Vector approx = Eigen::BDCSVD<Dense>(sp.Z.transpose() * sq.Z).singularValues();
  const Eigen::Index len = std::max(exact.size(), approx.size());
  out.exact = padded(exact, len);
  out.approx = padded(approx, len);
  return out;
}

ShiftedPair shifted_monolithic(const SwitchedSystem& sys, double tol) {
  const GramianPair grams = gramians_monolithic(sys, tol);
  std::vector<Dense> A_list;
  for (const Mode& m : sys.modes) A_list.push_back(m.A);
  return {shift_gramian(grams.P, tol, A_list), shift_gramian(grams.Q, tol, A_list)};
}

std::vector<BoundSweepRow> bt_bound_sweep(const SwitchedSystem& sys, const ShiftedPair& pair,
                                          const std::vector<Eigen::Index>& r_sweep,
                                          const SwitchingSignal& signal, const InputSignal& u,
                                          double horizon, const IntegrationOptions& opts) {
  const double eta = input_l2_norm(signal, u, horizon, opts);
  if (eta <= 0.0) throw std::invalid_argument("bt_bound_sweep: zero input");
  const Trajectory full = simulate(sys, signal, u, horizon, opts);
  std::vector<BoundSweepRow> rows;
  for (Eigen::Index r : r_sweep) {
    const ProjectionPair proj = square_root_projectors(pair.P.X, pair.Q.X, r);
    const SwitchedSystem rom = reduce(sys, proj.V, proj.W);
    const Trajectory red = simulate(rom, signal, u, horizon, opts);
    BoundSweepRow row;
    row.r = proj.r;
    row.eta = eta;
    row.error = output_error(full, red, eta);
    row.tau = bt_error_bound(proj.hankel, proj.r);
    row.phi = row.tau;
    rows.push_back(row);
  }
  return rows;
}

std::vector<BoundSweepRow> pbr_bound_sweep(const SwitchedSystem& sys,
                                           const std::vector<GramianPair>& gramians,
                                           const std::vector<Eigen::Index>& r_sweep,
                                           double floor, const SwitchingSignal& signal,
                                           const InputSignal& u, double horizon,
                                           const IntegrationOptions& opts) {
  const Trajectory full = simulate(sys, signal, u, horizon, opts);
  LmiEigCache cache;
  std::vector<Vector> cached_spectra;
  std::vector<BoundSweepRow> rows;
  for (Eigen::Index r : r_sweep) {
    const PbrRom rom = pbr_reduce(sys, gramians, r, floor);
    // The inequality-eigenvalue cache carries across the sweep only while the
    // balanced data is byte-identical; the spectra are the cheap witness.
    bool same = cached_spectra.size() == rom.spectra.size();
    for (size_t j = 0; same && j < rom.spectra.size(); ++j)
      same = cached_spectra[j].size() == rom.spectra[j].size() &&
             cached_spectra[j] == rom.spectra[j];
    if (!same) {
      cache = LmiEigCache{};
      cached_spectra = rom.spectra;
    }
    const BoundBreakdown bd = pbr_error_bound(sys, rom, signal, u, horizon, opts, 3, &cache);
    const Trajectory red = simulate(rom.subsystem(rom.r), signal, u, horizon, opts,
                                    rom.jump_sequence(signal, rom.r));
    BoundSweepRow row;
    row.r = rom.r;
    row.eta = bd.eta;
    row.error = output_error(full, red, bd.eta > 0.0 ? bd.eta : 1.0);
    row.tau = bd.tau;
    row.chi = bd.chi;
    row.iota = bd.iota;
    row.phi = bd.phi;
    rows.push_back(row);
  }
  return rows;
}

std::vector<GramianPair> repair_gramians(const SwitchedSystem& sys,
                                         const std::vector<GramianPair>& gramians,
                                         double tol) {
  if (gramians.size() != sys.modes.size())
    throw std::invalid_argument("repair_gramians: one Gramian pair per mode expected");
  const double lyap_tol = tol * 1e-3;
  std::vector<GramianPair> out = gramians;
  for (size_t j = 0; j < gramians.size(); ++j) {
    const GramianPair& g = gramians[j];
    if (g.P.shift != 0.0 || g.Q.shift != 0.0)
      throw std::invalid_argument("repair_gramians: factors must carry no diagonal shift");
    const GleProblemDense pr =
        scaled_problem(pbr_mode_problem(sys, int(j), LmiSide::reach), g.p_scale);
    const GleProblemDense po =
        scaled_problem(pbr_mode_problem(sys, int(j), LmiSide::observ), g.q_scale);
    const Dense Gp = residual_split_perturbation(pr, g.P.Z, 50, lyap_tol);
    const Dense Gq = residual_split_perturbation(po, g.Q.Z, 50, lyap_tol);
    Dense Zp(g.P.Z.rows(), g.P.Z.cols() + Gp.cols());
    Zp << g.P.Z, Gp;
    Dense Zq(g.Q.Z.rows(), g.Q.Z.cols() + Gq.cols());
    Zq << g.Q.Z, Gq;
    out[j].P.Z = Zp;
    out[j].Q.Z = Zq;
  }
  return out;
}

std::vector<RepairRow> observability_repair_rows(const SwitchedSystem& sys,
                                                 const std::vector<GramianPair>& gramians,
                                                 const std::vector<GramianPair>& repaired) {
  if (gramians.size() != sys.modes.size() || repaired.size() != sys.modes.size())
    throw std::invalid_argument("observability_repair_rows: one pair per mode expected");
  std::vector<RepairRow> rows;
  for (size_t j = 0; j < sys.modes.size(); ++j) {
    RepairRow row;
    row.mode = int(j);
    row.lam_before =
        lmi_max_eig(sys.modes[j].A, gramians[j].Q, sys.modes[j].C, LmiSide::observ);
    row.lam_after =
        lmi_max_eig(sys.modes[j].A, repaired[j].Q, sys.modes[j].C, LmiSide::observ);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TimingRow> timing_sweep(const std::vector<Eigen::Index>& n_list, double tol) {
  for (size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      throw std::invalid_argument("timing_sweep: sizes must be ascending");
  std::vector<TimingRow> rows;
  for (Eigen::Index n : n_list) {
    const GleProblemSparse prob = synthetic_sparse_problem(n, LmiSide::reach);
    const auto t0 = std::chrono::steady_clock::now();
    const CertifiedGleSolution sol = solve_gle(prob, tol);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!sol.converged) throw std::runtime_error("timing sweep: solve did not certify");
    rows.push_back({n, seconds});
  }
  return rows;
}

double loglog_slope(const std::vector<TimingRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = double(rows.size());
  for (const TimingRow& row : rows) {
    const double x = std::log(double(row.n)), y = std::log(row.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

void ExperimentConfig::validate() const {
  if (system != "synthetic" && system != "black_scholes" && system != "custom")
    throw std::invalid_argument("config: unknown system " + system);
  if (system == "custom" && custom_dir.empty())
    throw std::invalid_argument("config: custom system needs custom_dir");
  if (n < 2) throw std::invalid_argument("config: n must be >= 2");
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("config: tol must be in (0, 1)");
  for (double t : tol_ladder)
    if (!(t > 0.0 && t < 1.0))
      throw std::invalid_argument("config: ladder tolerances must be in (0, 1)");
  if (spectrum_floor != -1 && spectrum_floor < 0.0)
    throw std::invalid_argument("config: spectrum_floor must be >= 0 (or -1 for tol)");
  for (Eigen::Index r : r_sweep)
    if (r < 1 || r > n) throw std::invalid_argument("config: r sweep must stay within [1, n]");
  if (switches < 0) throw std::invalid_argument("config: switches must be >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("config: horizon must be > 0");
  if (!(integration.abs_tol > 0.0 && integration.rel_tol > 0.0))
    throw std::invalid_argument("config: integrator tolerances must be > 0");
}

ExperimentConfig experiment_defaults(const std::string& id) {
  ExperimentConfig cfg;
  if (id == "table1") {
    cfg.n = 200;
    cfg.tol_ladder = {1e-2, 1e-4, 1e-6, 1e-8};
  } else if (id == "fig1a") {
    cfg.n = 50;
  } else if (id == "fig1b") {
    cfg.n = 200;
  } else if (id == "fig2a") {
    cfg.n = 60;
  } else if (id == "fig2b") {
    cfg.n = 200;
    cfg.r_sweep = even_range(2, 28);
    cfg.horizon = 10.0;
    cfg.seed = 3;
  } else if (id == "table2") {
    cfg.system = "black_scholes";
    cfg.n = 400;
  } else if (id == "fig4") {
    cfg.system = "black_scholes";
    cfg.n = 400;
    cfg.r_sweep = {20};
    cfg.switches = 20;
  } else if (id == "fig5") {
    cfg.system = "black_scholes";
    cfg.n = 400;
    cfg.r_sweep = even_range(2, 40);
  } else {
    throw std::invalid_argument("unknown experiment id: " + id);
  }
  return cfg;
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  const io::Config file = io::Config::parse_file(path);
  cfg.system = file.get("experiment", "system", cfg.system);
  cfg.custom_dir = file.get("experiment", "custom_dir", cfg.custom_dir);
  cfg.n = file.get_int("experiment", "n", cfg.n);
  cfg.tol = file.get_double("experiment", "tol", cfg.tol);
  cfg.spectrum_floor = file.get_double("experiment", "floor", cfg.spectrum_floor);
  cfg.seed = unsigned(file.get_int("experiment", "seed", long(cfg.seed)));
  cfg.switches = int(file.get_int("experiment", "switches", cfg.switches));
  cfg.input = file.get("experiment", "input", cfg.input);
  cfg.horizon = file.get_double("experiment", "horizon", cfg.horizon);
  cfg.out_dir = file.get("experiment", "out_dir", cfg.out_dir);
  if (file.has("sweep", "tols")) cfg.tol_ladder = parse_double_list(file.get("sweep", "tols", ""));
  if (file.has("sweep", "rs")) cfg.r_sweep = parse_index_list(file.get("sweep", "rs", ""));
  if (file.has("sweep", "ns")) cfg.timing_sizes = parse_index_list(file.get("sweep", "ns", ""));
  cfg.integration.abs_tol =
      file.get_double("integration", "abs_tol", cfg.integration.abs_tol);
  cfg.integration.rel_tol =
      file.get_double("integration", "rel_tol", cfg.integration.rel_tol);
  cfg.integration.min_samples_per_segment = int(file.get_int(
      "integration", "min_samples", cfg.integration.min_samples_per_segment));
}

SwitchedSystem load_custom_system(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<Mode> modes;
  for (int j = 1;; ++j) {
    const fs::path a = fs::path(dir) / ("A" + std::to_string(j) + ".mtx");
    if (!fs::exists(a)) break;
    const fs::path b = fs::path(dir) / ("B" + std::to_string(j) + ".mtx");
    const fs::path c = fs::path(dir) / ("C" + std::to_string(j) + ".mtx");
    modes.push_back(
        {io::load_market_auto(a.string()), io::load_market_auto(b.string()),
         io::load_market_auto(c.string())});
  }
  if (modes.empty())
    throw std::runtime_error("load_custom_system: no A1.mtx under " + dir);
  return make_switched_system(std::move(modes), true);
}

SwitchedSystem build_system(const ExperimentConfig& cfg) {
  if (cfg.system == "synthetic") return gen_synthetic(cfg.n);
  if (cfg.system == "black_scholes") {
    BlackScholesParams params;
    params.n = cfg.n;
    return gen_black_scholes(params, black_scholes_default_samples()).sys;
  }
  return load_custom_system(cfg.custom_dir);
}

RunReport run_experiment(const std::string& id, const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  RunReport report;
  report.experiment = id;
  StageRunner stage{report};
  const double floor = cfg.spectrum_floor >= 0.0 ? cfg.spectrum_floor : cfg.tol;

  if (id == "table1") {
    std::vector<ShiftRepairRow> rows;
    stage.run("solve+shift", [&] {
      require_system(cfg, "synthetic", id);
      rows = shift_repair_rows(gen_synthetic(cfg.n), cfg.tol_ladder);
      for (const ShiftRepairRow& row : rows)
        if (row.lam_hat.maxCoeff() >= 0.0)
          throw std::runtime_error("shifted factor violates a mode inequality");
    });
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (const ShiftRepairRow& row : rows) {
        std::vector<double> line = {row.tol, row.mu_hat};
        for (Eigen::Index j = 0; j < row.lam_tilde.size(); ++j) line.push_back(row.lam_tilde(j));
        for (Eigen::Index j = 0; j < row.lam_hat.size(); ++j) line.push_back(row.lam_hat(j));
        csv.push_back(line);
      }
      std::vector<std::string> header = {"tol", "mu_hat"};
      const Eigen::Index M = rows.empty() ? 0 : rows.front().lam_tilde.size();
      for (Eigen::Index j = 0; j < M; ++j)
        header.push_back("lam1_tilde_mode" + std::to_string(j + 1));
      for (Eigen::Index j = 0; j < M; ++j)
        header.push_back("lam1_hat_mode" + std::to_string(j + 1));
      io::write_csv(csv_path(cfg, "table1.csv"), "table1", header, csv);
    });
  } else if (id == "fig1a") {
    std::vector<LadderRow> rows;
    stage.run("ladder", [&] {
      require_system(cfg, "synthetic", id);
      rows = tolerance_ladder_rows(cfg.n, cfg.tol_ladder);
      for (const LadderRow& row : rows)
        if (row.err_p > row.tol || row.err_q > row.tol)
          throw std::runtime_error("oracle error exceeds the certified tolerance");
    });
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (const LadderRow& row : rows)
        csv.push_back({row.tol, row.err_p, row.err_q, row.cert_p, row.cert_q});
      io::write_csv(csv_path(cfg, "fig1a.csv"), "fig1a",
                    {"tol", "err_p", "err_q", "cert_p", "cert_q"}, csv);
    });
  } else if (id == "fig1b") {
    std::vector<TimingRow> rows;
    stage.run("timing", [&] {
      require_system(cfg, "synthetic", id);
      rows = timing_sweep(cfg.timing_sizes, cfg.tol);
    });
    for (StageReport& sr : report.stages)
      if (sr.stage == "timing" && sr.ok) {
        std::ostringstream msg;
        msg << "loglog slope " << loglog_slope(rows);
        sr.message = msg.str();
      }
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (const TimingRow& row : rows) csv.push_back({double(row.n), row.seconds});
      io::write_csv(csv_path(cfg, "fig1b.csv"), "fig1b", {"n", "seconds"}, csv);
    });
  } else if (id == "fig2a") {
    HankelCompare cmp;
    stage.run("hankel", [&] {
      require_system(cfg, "synthetic", id);
      cmp = hankel_compare(gen_synthetic(cfg.n), cfg.tol);
      const double slack = 1e-12 * cmp.exact(0);
      for (Eigen::Index k = 0; k < cmp.exact.size(); ++k)
        if (cmp.approx(k) > cmp.exact(k) + slack)
          throw std::runtime_error("approximate Hankel value exceeds the exact one");
    });
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (Eigen::Index k = 0; k < cmp.exact.size(); ++k)
        csv.push_back({double(k + 1), cmp.exact(k), cmp.approx(k)});
      io::write_csv(csv_path(cfg, "fig2a.csv"), "fig2a", {"k", "sigma_exact", "sigma_approx"},
                    csv);
    });
  } else if (id == "fig2b") {
    std::vector<BoundSweepRow> rows;
    stage.run("sweep", [&] {
      const SwitchedSystem sys = build_system(cfg);
      const ShiftedPair pair = shifted_monolithic(sys, cfg.tol);
      const SwitchingSignal signal = random_signal(int(sys.modes.size()), cfg.switches, 0.0,
                                                   cfg.horizon, cfg.seed);
      const InputSignal u = select_input(cfg.input, cfg.system, sys.m());
      const std::vector<Eigen::Index> rs =
          cfg.r_sweep.empty() ? even_range(2, std::min<Eigen::Index>(28, cfg.n)) : cfg.r_sweep;
      rows = bt_bound_sweep(sys, pair, rs, signal, u, cfg.horizon, cfg.integration);
      for (const BoundSweepRow& row : rows)
        if (row.error > row.tau)
          throw std::runtime_error("measured error exceeds the truncation bound");
    });
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (const BoundSweepRow& row : rows)
        csv.push_back({double(row.r), row.error, row.tau});
      io::write_csv(csv_path(cfg, "fig2b.csv"), "fig2b", {"r", "eps", "tau"}, csv);
    });
  } else if (id == "table2") {
    std::vector<RepairRow> rows;
    stage.run("repair", [&] {
      require_system(cfg, "black_scholes", id);
      const SwitchedSystem sys = build_system(cfg);
      const std::vector<GramianPair> grams = pbr_gramians(sys, cfg.tol);
      const std::vector<GramianPair> fixed = repair_gramians(sys, grams, cfg.tol);
      rows = observability_repair_rows(sys, grams, fixed);
      for (const RepairRow& row : rows)
        if (row.lam_after > 1e-9)
          throw std::runtime_error("repaired inequality eigenvalue above 1e-9");
    });
    stage.run("emit", [&] {
      std::vector<std::vector<double>> csv;
      for (const RepairRow& row : rows)
        csv.push_back({double(row.mode + 1), row.lam_before, row.lam_after});
      io::write_csv(csv_path(cfg, "table2.csv"), "table2",
                    {"mode", "lam1_before", "lam1_after"}, csv);
    });
  } else if (id == "fig4") {
    Trajectory full, red;
    stage.run("simulate", [&] {
      const SwitchedSystem sys = build_system(cfg);
      const std::vector<GramianPair> grams = pbr_gramians(sys, cfg.tol);
      const Eigen::Index r = cfg.r_sweep.empty() ? 20 : cfg.r_sweep.front();
      const PbrRom rom = pbr_reduce(sys, grams, r, floor);
      const SwitchingSignal signal = random_signal(int(sys.modes.size()), cfg.switches, 0.0,
                                                   cfg.horizon, cfg.seed);
      const InputSignal u = select_input(cfg.input, cfg.system, sys.m());
      full = simulate(sys, signal, u, cfg.horizon, cfg.integration);
      red = simulate(rom.subsystem(rom.r), signal, u, cfg.horizon, cfg.integration,
                     rom.jump_sequence(signal, rom.r));
    });
    stage.run("emit", [&] {
      const Vector t = full.grid();
      const Dense yf = full.outputs(), yr = red.outputs();
      if (t.size() != yr.cols())
        throw std::runtime_error("full/reduced sample grids disagree");
      std::vector<std::string> header = {"t"};
      for (Eigen::Index i = 0; i < yf.rows(); ++i)
        header.push_back("y" + std::to_string(i + 1) + "_full");
      for (Eigen::Index i = 0; i < yr.rows(); ++i)
        header.push_back("y" + std::to_string(i + 1) + "_rom");
      std::vector<std::vector<double>> csv;
      for (Eigen::Index k = 0; k < t.size(); ++k) {
        std::vector<double> line = {t(k)};
        for (Eigen::Index i = 0; i < yf.rows(); ++i) line.push_back(yf(i, k));
        for (Eigen::Index i = 0; i < yr.rows(); ++i) line.push_back(yr(i, k));
        csv.push_back(line);
      }
      io::write_csv(csv_path(cfg, "fig4.csv"), "fig4", header, csv);
    });
  } else if (id == "fig5") {
    SwitchedSystem sys;
    std::vector<GramianPair> grams, fixed;
    std::vector<BoundSweepRow> plain, perturbed;
    stage.run("gramians", [&] {
      sys = build_system(cfg);
      grams = pbr_gramians(sys, cfg.tol);
      fixed = repair_gramians(sys, grams, cfg.tol);
    });
    const auto sweep = [&](const std::vector<GramianPair>& g) {
      const SwitchingSignal signal =
          random_signal(int(sys.modes.size()), cfg.switches, 0.0, cfg.horizon, cfg.seed);
      const InputSignal u = select_input(cfg.input, cfg.system, sys.m());
      const std::vector<Eigen::Index> rs =
          cfg.r_sweep.empty() ? even_range(2, std::min<Eigen::Index>(40, cfg.n)) : cfg.r_sweep;
      std::vector<BoundSweepRow> rows =
          pbr_bound_sweep(sys, g, rs, floor, signal, u, cfg.horizon, cfg.integration);
      for (const BoundSweepRow& row : rows)
        if (row.error > row.phi)
          throw std::runtime_error("measured error exceeds the certified bound");
      return rows;
    };
    stage.run("sweep_plain", [&] { plain = sweep(grams); });
    stage.run("sweep_perturbed", [&] { perturbed = sweep(fixed); });
    stage.run("emit", [&] {
      const auto emit = [&](const std::vector<BoundSweepRow>& rows, const std::string& file,
                            const std::string& tag) {
        std::vector<std::vector<double>> csv;
        for (const BoundSweepRow& row : rows)
          csv.push_back({double(row.r), row.error, row.tau, row.chi, row.iota, row.phi});
        io::write_csv(csv_path(cfg, file), tag, {"r", "eps", "tau", "chi", "iota", "phi"},
                      csv);
      };
      emit(plain, "fig5_plain.csv", "fig5a,fig5b (plain factors)");
      emit(perturbed, "fig5_perturbed.csv", "fig5a,fig5b (repaired factors)");
    });
  } else {
    throw std::invalid_argument("unknown experiment id: " + id);
  }

  write_report(report, csv_path(cfg, "run_report.json"));
  return report;
}

void write_report(const RunReport& report, const std::string& path) {
  nlohmann::json j;
  j["experiment"] = report.experiment;
  j["ok"] = report.ok;
  j["stages"] = nlohmann::json::array();
  for (const StageReport& sr : report.stages)
    j["stages"].push_back({{"stage", sr.stage},
                           {"ok", sr.ok},
                           {"seconds", sr.seconds},
                           {"message", sr.message}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace glemor
