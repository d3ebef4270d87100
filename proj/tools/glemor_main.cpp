#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "glemor/experiments.hpp"
#include "glemor/io.hpp"

namespace {

using glemor::Dense;
using glemor::Vector;

// Shared system/selection flags for the mor and sim subcommands; an optional
// config file is applied first, explicit flags override it.
struct SystemFlags {
  std::string config;
  std::string system;
  std::string dir;
  long n = -1;
  double tol = -1.0;
  std::string out = ".";

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "sectioned key = value configuration file");
    cmd->add_option("--system", system, "synthetic | black_scholes | custom");
    cmd->add_option("--dir", dir, "matrix directory for --system custom");
    cmd->add_option("--n", n, "state dimension of the generated system");
    cmd->add_option("--tol", tol, "Gramian solve tolerance");
    cmd->add_option("--out", out, "output directory");
  }

  glemor::ExperimentConfig resolve() const {
    glemor::ExperimentConfig cfg;
    if (!config.empty()) glemor::apply_config_file(cfg, config);
    if (!system.empty()) cfg.system = system;
    if (!dir.empty()) cfg.custom_dir = dir;
    if (n > 0) cfg.n = n;
    if (tol > 0.0) cfg.tol = tol;
    cfg.out_dir = out;
    return cfg;
  }
};

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

bool is_coordinate_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string banner;
  std::getline(in, banner);
  return banner.find("coordinate") != std::string::npos;
}

void save_mode_triple(const std::string& dir, int index, const glemor::Mode& mode) {
  const std::string tag = std::to_string(index + 1);
  glemor::io::save_market_dense(join(dir, "A" + tag + ".mtx"), mode.A);
  glemor::io::save_market_dense(join(dir, "B" + tag + ".mtx"), mode.B);
  glemor::io::save_market_dense(join(dir, "C" + tag + ".mtx"), mode.C);
}

int run_gle_solve(const std::string& a_path, const std::string& b_path,
                  const std::vector<std::string>& n_paths, double tol, double gamma,
                  const std::string& out_dir) {
  glemor::GleSolveOptions opts;
  opts.gamma_override = gamma;
  glemor::CertifiedGleSolution sol;
  if (is_coordinate_market(a_path)) {
    glemor::GleProblemSparse prob;
    prob.A = glemor::io::load_market_sparse(a_path);
    for (const std::string& p : n_paths)
      prob.N_list.push_back(glemor::io::load_market_sparse(p));
    prob.B = glemor::io::load_market_auto(b_path);
    sol = glemor::solve_gle(prob, tol, opts);
  } else {
    glemor::GleProblemDense prob;
    prob.A = glemor::io::load_market_auto(a_path);
    for (const std::string& p : n_paths)
      prob.N_list.push_back(glemor::io::load_market_auto(p));
    prob.B = glemor::io::load_market_auto(b_path);
    sol = glemor::solve_gle(prob, tol, opts);
  }

  std::filesystem::create_directories(out_dir);
  glemor::io::save_factor_blob(join(out_dir, "Z.bin"), sol.Z);
  write_json(join(out_dir, "solve_report.json"),
             {{"converged", sol.converged},
              {"certificate", sol.error_bound_2},
              {"tol", tol},
              {"gamma", sol.gamma},
              {"sigma_min", sol.sigma_min},
              {"bilinear_rescale", sol.scale_applied},
              {"iterations", sol.iterations},
              {"factor_rank", sol.Z.cols()}});

  std::cout << "certified solve: rank " << sol.Z.cols() << ", " << sol.iterations
            << " iterations, certificate " << sol.error_bound_2 << " (tol " << tol << ")\n"
            << "factor written to " << join(out_dir, "Z.bin") << "\n";
  if (!sol.converged) {
    std::cerr << "error: certificate did not reach the requested tolerance\n";
    return 1;
  }
  return 0;
}

int run_mor_bt(const SystemFlags& flags, long r, bool no_shift) {
  glemor::ExperimentConfig cfg = flags.resolve();
  cfg.validate();
  const glemor::SwitchedSystem sys = glemor::build_system(cfg);

  glemor::LowRankPsd P, Q;
  double mu = 0.0;
  if (no_shift) {
    const glemor::GramianPair grams = glemor::gramians_monolithic(sys, cfg.tol);
    P = grams.P;
    Q = grams.Q;
  } else {
    const glemor::ShiftedPair pair = glemor::shifted_monolithic(sys, cfg.tol);
    P = pair.P.X;
    Q = pair.Q.X;
    mu = pair.P.mu;
  }
  const glemor::ProjectionPair proj = glemor::square_root_projectors(P, Q, r);
  const glemor::SwitchedSystem rom = glemor::reduce(sys, proj.V, proj.W);
  const double tau = glemor::bt_error_bound(proj.hankel, proj.r);

  std::filesystem::create_directories(cfg.out_dir);
  glemor::io::save_factor_blob(join(cfg.out_dir, "V.bin"), proj.V);
  glemor::io::save_factor_blob(join(cfg.out_dir, "W.bin"), proj.W);
  std::vector<std::vector<double>> hankel_rows;
  for (Eigen::Index k = 0; k < proj.hankel.size(); ++k)
    hankel_rows.push_back({double(k + 1), proj.hankel(k)});
  glemor::io::write_csv(join(cfg.out_dir, "hankel.csv"), "coupled-pair Hankel values",
                        {"k", "sigma"}, hankel_rows);

  bool stable = true;
  std::vector<double> abscissas;
  for (size_t j = 0; j < rom.modes.size(); ++j) {
    save_mode_triple(cfg.out_dir, int(j), rom.modes[j]);
    abscissas.push_back(glemor::hurwitz_check(rom.modes[j].A));
    stable = stable && abscissas.back() < 0.0;
  }
  write_json(join(cfg.out_dir, "bt_report.json"),
             {{"r", proj.r},
              {"requested_r", proj.requested_r},
              {"cluster_moved", proj.cluster_moved},
              {"shift", mu},
              {"tau", tau},
              {"spectral_abscissa", abscissas},
              {"stable", stable}});

  std::cout << "reduced to r = " << proj.r << " (requested " << r << "), bound tau = " << tau
            << "\nmodes and projectors written to " << cfg.out_dir << "\n";
  if (!stable) {
    std::cerr << "error: a reduced mode is not Hurwitz; see bt_report.json\n";
    return 1;
  }
  return 0;
}

int run_mor_pbr(const SystemFlags& flags, long r, double floor, bool repair) {
  glemor::ExperimentConfig cfg = flags.resolve();
  cfg.validate();
  const glemor::SwitchedSystem sys = glemor::build_system(cfg);

  std::vector<glemor::GramianPair> grams = glemor::pbr_gramians(sys, cfg.tol);
  if (repair) grams = glemor::repair_gramians(sys, grams, cfg.tol);
  const double flr = floor >= 0.0 ? floor : cfg.tol;
  const glemor::PbrRom rom = glemor::pbr_reduce(sys, grams, r, flr);
  const glemor::SwitchedSystem red = rom.subsystem(rom.r);

  std::filesystem::create_directories(cfg.out_dir);
  const int M = rom.mode_count();
  for (int j = 0; j < M; ++j) save_mode_triple(cfg.out_dir, j, red.modes[size_t(j)]);
  for (int to = 0; to < M; ++to)
    for (int from = 0; from < M; ++from)
      if (to != from)
        glemor::io::save_factor_blob(
            join(cfg.out_dir, "J_" + std::to_string(to + 1) + "_" + std::to_string(from + 1) +
                                  ".bin"),
            rom.jump_map(to, from, rom.r));

  std::vector<std::string> header = {"k"};
  for (int j = 0; j < M; ++j) header.push_back("sigma_mode" + std::to_string(j + 1));
  std::vector<std::vector<double>> rows;
  for (Eigen::Index k = 0; k < rom.full_size(); ++k) {
    std::vector<double> row = {double(k + 1)};
    for (int j = 0; j < M; ++j) row.push_back(rom.spectra[size_t(j)](k));
    rows.push_back(row);
  }
  glemor::io::write_csv(join(cfg.out_dir, "spectra.csv"), "per-mode balanced spectra",
                        header, rows);

  const bool stable =
      *std::max_element(rom.mode_max_re.begin(), rom.mode_max_re.end()) < 0.0;
  write_json(join(cfg.out_dir, "pbr_report.json"), {{"r", rom.r},
                                                    {"requested_r", rom.requested_r},
                                                    {"floor", flr},
                                                    {"repaired", repair},
                                                    {"spectral_abscissa", rom.mode_max_re},
                                                    {"warnings", rom.warnings},
                                                    {"stable", stable}});

  std::cout << "piecewise reduction to r = " << rom.r << " (requested " << r << "), " << M
            << " modes\nmatrices, jump maps and spectra written to " << cfg.out_dir << "\n";
  for (const std::string& w : rom.warnings) std::cerr << "warning: " << w << "\n";
  if (!stable) {
    std::cerr << "error: a reduced mode is not Hurwitz; see pbr_report.json\n";
    return 1;
  }
  return 0;
}

int run_sim(const SystemFlags& flags, const std::string& input, double horizon, int switches,
            unsigned seed, const std::vector<double>& breakpoints,
            const std::vector<int>& mode_path) {
  glemor::ExperimentConfig cfg = flags.resolve();
  cfg.validate();
  const glemor::SwitchedSystem sys = glemor::build_system(cfg);
  const int M = int(sys.modes.size());

  glemor::SwitchingSignal signal =
      breakpoints.empty() && mode_path.empty()
          ? glemor::random_signal(M, switches, 0.0, horizon, seed)
          : glemor::make_signal(0.0, breakpoints, mode_path, M);
  const glemor::InputSignal u = glemor::select_input(input, cfg.system, sys.m());
  const glemor::Trajectory traj = glemor::simulate(sys, signal, u, horizon, cfg.integration);

  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> header = {"t", "mode"};
  for (Eigen::Index i = 0; i < sys.p(); ++i) header.push_back("y" + std::to_string(i + 1));
  std::vector<std::vector<double>> rows;
  for (const auto& seg : traj.segments)
    for (Eigen::Index k = 0; k < seg.grid.size(); ++k) {
      std::vector<double> row = {seg.grid(k), double(seg.mode + 1)};
      for (Eigen::Index i = 0; i < seg.outputs.rows(); ++i) row.push_back(seg.outputs(i, k));
      rows.push_back(row);
    }
  glemor::io::write_csv(join(cfg.out_dir, "trajectory.csv"), "simulated output", header,
                        rows);

  std::cout << "simulated " << traj.segments.size() << " segments, "
            << traj.sample_count() << " samples, output L2 norm "
            << std::sqrt(glemor::l2_norm_sq(traj)) << "\n"
            << "trajectory written to " << join(cfg.out_dir, "trajectory.csv") << "\n";
  return 0;
}

int run_experiment_cmd(const std::string& id, const std::string& config,
                       const std::string& out) {
  glemor::ExperimentConfig cfg = glemor::experiment_defaults(id);
  if (!config.empty()) glemor::apply_config_file(cfg, config);
  if (!out.empty()) cfg.out_dir = out;
  const glemor::RunReport report = glemor::run_experiment(id, cfg);
  for (const glemor::StageReport& sr : report.stages) {
    std::cout << (sr.ok ? "  ok   " : "  FAIL ") << sr.stage << "  (" << sr.seconds << " s)";
    if (!sr.message.empty()) std::cout << "  " << sr.message;
    std::cout << "\n";
  }
  std::cout << (report.ok ? "experiment passed" : "experiment FAILED") << "; artifacts in "
            << cfg.out_dir << "\n";
  return report.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified Gramian solves and reduction of switched linear systems"};
  app.require_subcommand(1);

  // gle solve
  auto* gle = app.add_subcommand("gle", "coupled Lyapunov equation tools");
  gle->require_subcommand(1);
  auto* solve = gle->add_subcommand("solve", "certified low-rank solve");
  std::string a_path, b_path, solve_out = ".";
  std::vector<std::string> n_paths;
  double solve_tol = 1e-8, solve_gamma = -1.0;
  solve->add_option("--a", a_path, "Matrix Market file, stable coefficient")->required();
  solve->add_option("--b", b_path, "Matrix Market file, forcing factor")->required();
  solve->add_option("--coupling", n_paths, "Matrix Market files, bilinear coefficients");
  solve->add_option("--tol", solve_tol, "spectral-norm error target");
  solve->add_option("--gamma", solve_gamma,
                    "validation mode: exact contraction ratio, skips the rescale");
  solve->add_option("--out", solve_out, "output directory");

  // mor bt / mor pbr
  auto* mor = app.add_subcommand("mor", "model order reduction");
  mor->require_subcommand(1);
  auto* bt = mor->add_subcommand("bt", "monolithic balanced truncation");
  SystemFlags bt_flags;
  bt_flags.attach(bt);
  long bt_r = 10;
  bool bt_no_shift = false;
  bt->add_option("--r", bt_r, "reduced size");
  bt->add_flag("--no-shift", bt_no_shift, "skip the stabilizing diagonal shift");

  auto* pbr = mor->add_subcommand("pbr", "piecewise balanced reduction");
  SystemFlags pbr_flags;
  pbr_flags.attach(pbr);
  long pbr_r = 10;
  double pbr_floor = -1.0;
  bool pbr_repair = false;
  pbr->add_option("--r", pbr_r, "reduced size");
  pbr->add_option("--floor", pbr_floor, "spectrum floor (default: tol)");
  pbr->add_flag("--repair", pbr_repair, "residual-splitting repair of the Gramians");

  // sim
  auto* sim = app.add_subcommand("sim", "simulate a switched system");
  SystemFlags sim_flags;
  sim_flags.attach(sim);
  std::string sim_input = "default";
  double sim_horizon = 2.0;
  int sim_switches = 10;
  unsigned sim_seed = 7;
  std::vector<double> sim_breaks;
  std::vector<int> sim_modes;
  sim->add_option("--input", sim_input, "u1 | u2 | chirp | zero | default");
  sim->add_option("--horizon", sim_horizon, "end time");
  sim->add_option("--switches", sim_switches, "random switch count");
  sim->add_option("--seed", sim_seed, "random signal seed");
  sim->add_option("--breakpoints", sim_breaks, "explicit switch times");
  sim->add_option("--modes", sim_modes, "explicit mode path (one longer than breakpoints)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a canned study and emit CSV artifacts");
  std::string exp_id, exp_config, exp_out;
  exp->add_option("id", exp_id,
                  "table1 | table2 | fig1a | fig1b | fig2a | fig2b | fig4 | fig5")
      ->required();
  exp->add_option("--config", exp_config, "sectioned key = value configuration file");
  exp->add_option("--out", exp_out, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return run_gle_solve(a_path, b_path, n_paths, solve_tol, solve_gamma, solve_out);
    if (bt->parsed()) return run_mor_bt(bt_flags, bt_r, bt_no_shift);
    if (pbr->parsed()) return run_mor_pbr(pbr_flags, pbr_r, pbr_floor, pbr_repair);
    if (sim->parsed())
      return run_sim(sim_flags, sim_input, sim_horizon, sim_switches, sim_seed, sim_breaks,
                     sim_modes);
    if (exp->parsed()) return run_experiment_cmd(exp_id, exp_config, exp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
