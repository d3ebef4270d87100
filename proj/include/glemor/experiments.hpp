#ifndef GLEMOR_EXPERIMENTS_HPP
#define GLEMOR_EXPERIMENTS_HPP

#include "glemor/balancing.hpp"
#include "glemor/error_certificates.hpp"
#include "glemor/gle_solver.hpp"
#include "glemor/sls_core.hpp"

#include <string>
#include <vector>

namespace glemor {

// Two-mode ladder benchmark. A1 is lower bidiagonal (-1 diagonal, 1/2
// subdiagonal), A2 tridiagonal (-2 diagonal, 4/5 subdiagonal, -1/5
// superdiagonal), B1ᵀ = C1 = eₙᵀ and B2ᵀ = C2 = e₁ᵀ.
SwitchedSystem gen_synthetic(Eigen::Index n);

// The monolithic coupled-equation problem of the ladder benchmark assembled
// sparsely, for sizes where dense mode matrices do not fit.
GleProblemSparse synthetic_sparse_problem(Eigen::Index n, LmiSide side);

// Parametric convection-diffusion benchmark: centered differences for
// (v²/2)s²∂²/∂s² + a·s∂/∂s − a on the uniform interior grid s_i = i·h,
// h = domain/(n+1), with the left boundary value 0 and the right boundary
// value supplied through two input channels weighted by +domain and -strike.
struct BlackScholesParams {
  double strike = 80.0;   // K, scales the second boundary channel
  double domain = 200.0;  // S, right end of the spatial interval
  Eigen::Index n = 1000;  // interior grid size
};

struct BlackScholesSample {
  double volatility = 0.0;  // v
  double rate = 0.0;        // a
};

struct BlackScholesSystem {
  SwitchedSystem sys;
  std::vector<double> input_scales;  // spectral norm folded out of each mode's B
  double h = 0.0;                    // grid spacing
};

// The four (volatility, rate) samples the benchmark sweeps.
std::vector<BlackScholesSample> black_scholes_default_samples();

BlackScholesSystem gen_black_scholes(const BlackScholesParams& params,
                                     const std::vector<BlackScholesSample>& samples);

// Canonical test inputs. "u1" reproduces the boundary data S − K·e^{−rate·t}
// through the two boundary channels; "u2" drives every channel with the
// oscillation sin(2π·e^{t/2}); "chirp" with sin(t² + t).
InputSignal boundary_input(double rate = 0.02);
InputSignal oscillating_input(Eigen::Index m);
InputSignal chirp_input(Eigen::Index m);
InputSignal select_input(const std::string& name, const std::string& system, Eigen::Index m);

// --- pipeline building blocks -----------------------------------------------

// Certified solves against a dense Kronecker oracle of the same (rescaled)
// problem; one row per tolerance.
struct LadderRow {
  double tol = 0.0;
  double err_p = 0.0;  // spectral-norm error of the reachability solve
  double err_q = 0.0;
  double cert_p = 0.0;  // certificate reported by the solver
  double cert_q = 0.0;
};
std::vector<LadderRow> tolerance_ladder_rows(Eigen::Index n, const std::vector<double>& tols);

// Diagonal shift repair of the monolithic reachability Gramian; one row per
// tolerance with the per-mode inequality eigenvalues before/after the shift.
struct ShiftRepairRow {
  double tol = 0.0;
  double mu_hat = 0.0;
  Vector lam_tilde;  // per-mode extremal eigenvalue at the raw solution
  Vector lam_hat;    // per-mode extremal eigenvalue after the diagonal shift
};
std::vector<ShiftRepairRow> shift_repair_rows(const SwitchedSystem& sys,
                                              const std::vector<double>& tols);

// Exact (dense Kronecker) versus certified-solver Hankel values of the
// monolithic pair, zero-padded to equal length.
struct HankelCompare {
  Vector exact;
  Vector approx;
};
HankelCompare hankel_compare(const SwitchedSystem& sys, double tol);

// Shifted monolithic Gramian pair ready for stability-preserving truncation.
struct ShiftedPair {
  ShiftedGramian P;
  ShiftedGramian Q;
};
ShiftedPair shifted_monolithic(const SwitchedSystem& sys, double tol);

// One certified-bound sample of a reduction sweep: the measured output error
// (normalized by eta) next to the bound pieces valid for it.
struct BoundSweepRow {
  Eigen::Index r = 0;
  double error = 0.0;
  double tau = 0.0;
  double chi = 0.0;
  double iota = 0.0;
  double phi = 0.0;
  double eta = 0.0;
};

// Monolithic truncation sweep with shared projectors from a shifted pair;
// chi/iota stay zero, the bound is tau alone.
std::vector<BoundSweepRow> bt_bound_sweep(const SwitchedSystem& sys, const ShiftedPair& pair,
                                          const std::vector<Eigen::Index>& r_sweep,
                                          const SwitchingSignal& signal, const InputSignal& u,
                                          double horizon, const IntegrationOptions& opts = {});

// Piecewise sweep: one reduction per r from a fixed Gramian set, full bound
// breakdown per row. The full-order trajectory and the inequality-eigenvalue
// cache are shared across the sweep.
std::vector<BoundSweepRow> pbr_bound_sweep(const SwitchedSystem& sys,
                                           const std::vector<GramianPair>& gramians,
                                           const std::vector<Eigen::Index>& r_sweep,
                                           double floor, const SwitchingSignal& signal,
                                           const InputSignal& u, double horizon,
                                           const IntegrationOptions& opts = {});

// Residual-splitting repair of every per-mode Gramian pair; factors grow by
// the lifted positive residual part, scales and shifts carry over.
std::vector<GramianPair> repair_gramians(const SwitchedSystem& sys,
                                         const std::vector<GramianPair>& gramians, double tol);

// Per-mode observability inequality eigenvalues before and after repair.
struct RepairRow {
  int mode = 0;
  double lam_before = 0.0;
  double lam_after = 0.0;
};
std::vector<RepairRow> observability_repair_rows(const SwitchedSystem& sys,
                                                 const std::vector<GramianPair>& gramians,
                                                 const std::vector<GramianPair>& repaired);

// Wall-clock seconds per certified Gramian solve on the sparse ladder family.
struct TimingRow {
  Eigen::Index n = 0;
  double seconds = 0.0;
};
std::vector<TimingRow> timing_sweep(const std::vector<Eigen::Index>& n_list, double tol);

// Least-squares slope of log(seconds) against log(n).
double loglog_slope(const std::vector<TimingRow>& rows);

// --- orchestration -----------------------------------------------------------

struct ExperimentConfig {
  std::string system = "synthetic";  // synthetic | black_scholes | custom
  std::string custom_dir;            // holds A1.mtx, B1.mtx, C1.mtx, A2.mtx, ... when custom
  Eigen::Index n = 200;
  double tol = 1e-8;           // Gramian tolerance for single-tolerance pipelines
  double spectrum_floor = -1;  // piecewise flooring; -1 means tol
  std::vector<double> tol_ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
  std::vector<Eigen::Index> r_sweep;                        // empty: per-experiment default
  std::vector<Eigen::Index> timing_sizes = {200, 800, 3200, 12800};
  unsigned seed = 7;
  int switches = 10;
  std::string input = "default";  // u1 | u2 | chirp | zero | default
  double horizon = 2.0;
  IntegrationOptions integration;
  std::string out_dir = ".";

  void validate() const;  // throws std::invalid_argument on a broken invariant
};

// Baseline configuration of one experiment id (table1, table2, fig1a, fig1b,
// fig2a, fig2b, fig4, fig5).
ExperimentConfig experiment_defaults(const std::string& id);

// Overlay `path` (sectioned key = value text) onto `cfg`.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

// Directory of A{j}.mtx / B{j}.mtx / C{j}.mtx triples, 1-based, contiguous.
SwitchedSystem load_custom_system(const std::string& dir);
SwitchedSystem build_system(const ExperimentConfig& cfg);

struct StageReport {
  std::string stage;
  bool ok = true;
  double seconds = 0.0;
  std::string message;
};

struct RunReport {
  std::string experiment;
  bool ok = true;
  std::vector<StageReport> stages;
};

// Executes one experiment id, writing CSVs and run_report.json under
// cfg.out_dir. A failed stage marks the report not ok and skips later stages
// of the same experiment; soundness violations count as failures.
RunReport run_experiment(const std::string& id, const ExperimentConfig& cfg);

void write_report(const RunReport& report, const std::string& path);

}  // namespace glemor

#endif  // GLEMOR_EXPERIMENTS_HPP
