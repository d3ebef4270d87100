#ifndef GLEMOR_SLS_CORE_HPP
#define GLEMOR_SLS_CORE_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "glemor/matrix_kernel.hpp"

namespace glemor {

// One linear mode (dx = A x + B u, y = C x) of a switched system.
struct Mode {
  Dense A;
  Dense B;
  Dense C;
};

// Switched linear system: shared state/input/output dimensions across modes.
struct SwitchedSystem {
  std::vector<Mode> modes;

  Eigen::Index n() const { return modes.empty() ? 0 : modes.front().A.rows(); }
  Eigen::Index m() const { return modes.empty() ? 0 : modes.front().B.cols(); }
  Eigen::Index p() const { return modes.empty() ? 0 : modes.front().C.rows(); }
  int mode_count() const { return static_cast<int>(modes.size()); }
};

// Validating constructor. Dimensional conformity is always enforced; the
// Hurwitz check is optional because reduced models may lose stability.
SwitchedSystem make_switched_system(std::vector<Mode> modes, bool require_hurwitz = true);

// Right-continuous switching signal: mode_path[k] is active on
// [breakpoints[k-1], breakpoints[k]) with breakpoints[-1] := t0.
struct SwitchingSignal {
  double t0 = 0.0;
  std::vector<double> breakpoints;  // strictly increasing switch times > t0
  std::vector<int> mode_path;       // breakpoints.size() + 1 mode indices

  int mode_at(double t) const;
  int switch_count() const { return static_cast<int>(breakpoints.size()); }
};

// Validates ordering/range; collapses consecutive equal modes unless
// allow_repeats (a collapsed repeat removes the breakpoint between them).
SwitchingSignal make_signal(double t0, std::vector<double> breakpoints,
                            std::vector<int> mode_path, int mode_count,
                            bool allow_repeats = false);

// Deterministic random signal: `switches` sorted uniform times in (t0, horizon)
// and a mode path that never repeats consecutively.
SwitchingSignal random_signal(int mode_count, int switches, double t0, double horizon,
                              unsigned seed);

// Analytic input closure.
struct InputSignal {
  std::function<Vector(double)> evaluator;
  std::string description;

  Vector operator()(double t) const { return evaluator(t); }
};

InputSignal zero_input(Eigen::Index m);
InputSignal constant_input(const Vector& value);

struct IntegrationOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int min_samples_per_segment = 400;  // quadrature grid resolution
};

// Samples of one inter-switch segment on a uniform grid.
struct SegmentTrajectory {
  int mode = 0;
  Vector grid;    // sample times, grid(0)/grid(last) are the segment endpoints
  Dense states;   // n x grid.size()
  Dense outputs;  // p x grid.size()
};

struct Trajectory {
  std::vector<SegmentTrajectory> segments;
  std::vector<std::pair<Vector, Vector>> jump_log;  // pre/post state at each switch

  // Flattened views; interior breakpoints appear twice (left/right limits).
  Vector grid() const;
  Dense outputs() const;
  Eigen::Index sample_count() const;
  double horizon() const;
};

// Integrates the active mode with an adaptive embedded Runge-Kutta 5(4) pair,
// restarting hard at every breakpoint. Zero initial state. jump_maps, when
// nonempty, holds one matrix per switch mapping the pre-switch state to the
// post-switch state (identity otherwise).
Trajectory simulate(const SwitchedSystem& sys, const SwitchingSignal& signal,
                    const InputSignal& u, double horizon,
                    const IntegrationOptions& opts = {},
                    const std::vector<Dense>& jump_maps = {});

// Composite Simpson of a signed scalar integrand sampled on a sorted grid
// (3/8 rule absorbs an odd interval count). Needs at least 2 samples.
double simpson(const Vector& grid, const Vector& samples);

// Simpson quadrature of the squared column norms: ∫ ‖samples(t)‖² dt.
double l2_norm_sq(const Vector& grid, const Dense& samples);

// ∫ ‖y‖² over the whole trajectory, segment-wise (never across a jump).
double l2_norm_sq(const Trajectory& traj);

// ∫ ‖u(t)‖² accumulated on the trajectory's quadrature grid.
double input_l2_sq(const Trajectory& traj, const InputSignal& u);

// Relative L2 output error sqrt(∫‖y - y_red‖²) / eta. Grids must coincide.
double output_error(const Trajectory& y_full, const Trajectory& y_red, double eta);

}  // namespace glemor

#endif  // GLEMOR_SLS_CORE_HPP
