#include "glemor/sls_core.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace glemor {

SwitchedSystem make_switched_system(std::vector<Mode> modes, bool require_hurwitz) {
  if (modes.empty()) throw std::invalid_argument("switched system needs at least one mode");
  const Eigen::Index n = modes.front().A.rows();
  const Eigen::Index m = modes.front().B.cols();
  const Eigen::Index p = modes.front().C.rows();
  for (const Mode& md : modes) {
    if (md.A.rows() != n || md.A.cols() != n || md.B.rows() != n || md.B.cols() != m ||
        md.C.rows() != p || md.C.cols() != n) {
      throw std::invalid_argument("switched system modes are not dimensionally conformal");
    }
    if (require_hurwitz) {
      Eigen::EigenSolver<Dense> es(md.A, false);
      if (es.eigenvalues().real().maxCoeff() >= 0.0) {
        throw std::invalid_argument("switched system mode matrix is not Hurwitz");
      }
    }
  }
  SwitchedSystem sys;
  sys.modes = std::move(modes);
  return sys;
}

int SwitchingSignal::mode_at(double t) const {
  assert(t >= t0);
  // Right-continuous: mode_path[k] active on [breakpoints[k-1], breakpoints[k]).
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  return mode_path[static_cast<size_t>(it - breakpoints.begin())];
}

SwitchingSignal make_signal(double t0, std::vector<double> breakpoints,
                            std::vector<int> mode_path, int mode_count,
                            bool allow_repeats) {
  if (mode_path.size() != breakpoints.size() + 1) {
    throw std::invalid_argument("mode path must have one entry more than the breakpoints");
  }
  double prev = t0;
  for (double b : breakpoints) {
    if (!(b > prev)) throw std::invalid_argument("breakpoints must be strictly increasing past t0");
    prev = b;
  }
  for (int q : mode_path) {
    if (q < 0 || q >= mode_count) throw std::invalid_argument("mode index out of range");
  }
  SwitchingSignal sig;
  sig.t0 = t0;
  if (allow_repeats) {
    sig.breakpoints = std::move(breakpoints);
    sig.mode_path = std::move(mode_path);
    return sig;
  }
  // Collapse consecutive repeats: drop the breakpoint separating equal modes.
  sig.mode_path.push_back(mode_path.front());
  for (size_t k = 0; k < breakpoints.size(); ++k) {
    if (mode_path[k + 1] == sig.mode_path.back()) continue;
    sig.breakpoints.push_back(breakpoints[k]);
    sig.mode_path.push_back(mode_path[k + 1]);
  }
  return sig;
}

SwitchingSignal random_signal(int mode_count, int switches, double t0, double horizon,
                              unsigned seed) {
  assert(mode_count >= 2 && switches >= 0 && horizon > t0);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ut(t0, horizon);
  std::vector<double> times(static_cast<size_t>(switches));
  for (double& t : times) t = ut(rng);
  std::sort(times.begin(), times.end());
  std::uniform_int_distribution<int> first(0, mode_count - 1);
  std::uniform_int_distribution<int> step(0, mode_count - 2);
  std::vector<int> path;
  path.push_back(first(rng));
  for (int k = 0; k < switches; ++k) {
    const int draw = step(rng);
    path.push_back(draw < path.back() ? draw : draw + 1);  // skip the current mode
  }
  return make_signal(t0, std::move(times), std::move(path), mode_count, true);
}

InputSignal zero_input(Eigen::Index m) {
  return {[m](double) { return Vector::Zero(m).eval(); }, "zero"};
}

InputSignal constant_input(const Vector& value) {
  Vector v = value;
  return {[v](double) { return v; }, "constant"};
}

Vector Trajectory::grid() const {
  Vector g(sample_count());
  Eigen::Index at = 0;
  for (const SegmentTrajectory& seg : segments) {
    g.segment(at, seg.grid.size()) = seg.grid;
    at += seg.grid.size();
  }
  return g;
}

Dense Trajectory::outputs() const {
  if (segments.empty()) return Dense();
  Dense y(segments.front().outputs.rows(), sample_count());
  Eigen::Index at = 0;
  for (const SegmentTrajectory& seg : segments) {
    y.middleCols(at, seg.grid.size()) = seg.outputs;
    at += seg.grid.size();
  }
  return y;
}

Eigen::Index Trajectory::sample_count() const {
  Eigen::Index total = 0;
  for (const SegmentTrajectory& seg : segments) total += seg.grid.size();
  return total;
}

double Trajectory::horizon() const {
  return segments.empty() ? 0.0 : segments.back().grid(segments.back().grid.size() - 1);
}

namespace {

// Dormand-Prince 5(4) tableau (FSAL).
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kB5[7] = {35.0 / 384,      0.0,          500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784,  11.0 / 84,    0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,          7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

struct StepperState {
  double h = 0.0;   // suggested step
  Vector k1;        // FSAL stage
  bool have_k1 = false;
};

// Advance x from ta to tb under dx = A x + B u(t), adaptive with hard stop at tb.
void advance(const Dense& A, const Dense& B, const InputSignal& u, double ta, double tb,
             Vector& x, StepperState& st, const IntegrationOptions& opts) {
  const Eigen::Index n = x.size();
  auto f = [&](double t, const Vector& y) -> Vector { return A * y + B * u(t); };
  double t = ta;
  if (st.h <= 0.0) st.h = (tb - ta);
  Vector k[7];
  if (!st.have_k1) {
    st.k1 = f(t, x);
    st.have_k1 = true;
  }
  while (t < tb) {
    double h = std::min(st.h, tb - t);
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      std::ostringstream os;
      os << "integrator step size underflow at t = " << t;
      throw std::runtime_error(os.str());
    }
    k[0] = st.k1;
    for (int s = 1; s < 7; ++s) {
      Vector ys = x;
      for (int j = 0; j < s; ++j) {
        if (kA[s][j] != 0.0) ys.noalias() += (h * kA[s][j]) * k[j];
      }
      k[s] = f(t + kC[s] * h, ys);
    }
    Vector x5 = x;
    Vector err = Vector::Zero(n);
    for (int s = 0; s < 7; ++s) {
      if (kB5[s] != 0.0) x5.noalias() += (h * kB5[s]) * k[s];
      const double d = kB5[s] - kB4[s];
      if (d != 0.0) err.noalias() += (h * d) * k[s];
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(x(i)), std::abs(x5(i)));
      acc += (err(i) / sc) * (err(i) / sc);
    }
    const double enorm = std::sqrt(acc / static_cast<double>(n));
    if (enorm <= 1.0) {
      t += h;
      x = x5;
      st.k1 = k[6];  // FSAL: stage 7 is f at the accepted point
      const double grow = enorm == 0.0 ? 5.0 : 0.9 * std::pow(enorm, -0.2);
      st.h = h * std::clamp(grow, 0.2, 5.0);
    } else {
      st.h = h * std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 1.0);
    }
  }
}

}  // namespace

Trajectory simulate(const SwitchedSystem& sys, const SwitchingSignal& signal,
                    const InputSignal& u, double horizon, const IntegrationOptions& opts,
                    const std::vector<Dense>& jump_maps) {
  assert(horizon >= signal.t0);
  assert(opts.min_samples_per_segment >= 2);
  if (!jump_maps.empty() && jump_maps.size() != signal.breakpoints.size()) {
    throw std::invalid_argument("need one jump map per switch");
  }
  // Segment endpoints: breakpoints strictly inside (t0, horizon) delimit segments.
  std::vector<double> ends;
  std::vector<int> active;
  active.push_back(signal.mode_path.front());
  for (size_t k = 0; k < signal.breakpoints.size(); ++k) {
    if (signal.breakpoints[k] >= horizon) break;
    ends.push_back(signal.breakpoints[k]);
    active.push_back(signal.mode_path[k + 1]);
  }
  ends.push_back(horizon);
  for (int q : active) {
    if (q < 0 || q >= sys.mode_count()) throw std::invalid_argument("mode index out of range");
  }

  Trajectory traj;
  Vector x = Vector::Zero(sys.n());  // zero initial state
  double t_left = signal.t0;
  for (size_t seg = 0; seg < ends.size(); ++seg) {
    const Mode& md = sys.modes[static_cast<size_t>(active[seg])];
    const double t_right = ends[seg];
    const Eigen::Index samples =
        t_right > t_left ? opts.min_samples_per_segment + 1 : 1;
    SegmentTrajectory out;
    out.mode = active[seg];
    out.grid = Vector::LinSpaced(samples, t_left, t_right);
    out.states.resize(sys.n(), samples);
    out.outputs.resize(sys.p(), samples);
    StepperState st;
    out.states.col(0) = x;
    for (Eigen::Index i = 1; i < samples; ++i) {
      advance(md.A, md.B, u, out.grid(i - 1), out.grid(i), x, st, opts);
      out.states.col(i) = x;
    }
    out.outputs.noalias() = md.C * out.states;
    traj.segments.push_back(std::move(out));
    if (seg + 1 < ends.size()) {
      const Vector pre = x;
      if (!jump_maps.empty()) {
        const Dense& T = jump_maps[seg];
        if (T.cols() != x.size()) throw std::invalid_argument("jump map dimension mismatch");
        x = T * x;
      }
      traj.jump_log.emplace_back(pre, x);
      t_left = t_right;
    }
  }
  return traj;
}

double simpson(const Vector& grid, const Vector& samples) {
  const Eigen::Index n = grid.size();
  assert(samples.size() == n);
  if (n < 2) throw std::invalid_argument("quadrature needs at least 2 samples");
  if (n == 2) return 0.5 * (grid(1) - grid(0)) * (samples(0) + samples(1));
  double acc = 0.0;
  Eigen::Index i = 0;
  // Pairs of intervals via the unequal-interval Simpson rule.
  while (i + 2 <= n - 1) {
    const double h0 = grid(i + 1) - grid(i);
    const double h1 = grid(i + 2) - grid(i + 1);
    acc += (h0 + h1) / 6.0 *
           ((2.0 - h1 / h0) * samples(i) +
            (h0 + h1) * (h0 + h1) / (h0 * h1) * samples(i + 1) +
            (2.0 - h0 / h1) * samples(i + 2));
    i += 2;
  }
  if (i == n - 2) {
    // Odd interval count: integrate the last interval with the parabola
    // through the final three samples.
    const double h0 = grid(n - 2) - grid(n - 3);
    const double h1 = grid(n - 1) - grid(n - 2);
    acc += h1 * ((2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1)) * samples(n - 1) +
                 (h1 + 3.0 * h0) / (6.0 * h0) * samples(n - 2) -
                 h1 * h1 / (6.0 * h0 * (h0 + h1)) * samples(n - 3));
  }
  return acc;
}

double l2_norm_sq(const Vector& grid, const Dense& samples) {
  assert(samples.cols() == grid.size());
  return simpson(grid, samples.colwise().squaredNorm().transpose());
}

double l2_norm_sq(const Trajectory& traj) {
  double acc = 0.0;
  for (const SegmentTrajectory& seg : traj.segments) {
    if (seg.grid.size() < 2) continue;
    acc += l2_norm_sq(seg.grid, seg.outputs);
  }
  return acc;
}

double input_l2_sq(const Trajectory& traj, const InputSignal& u) {
  double acc = 0.0;
  for (const SegmentTrajectory& seg : traj.segments) {
    if (seg.grid.size() < 2) continue;
    Vector sq(seg.grid.size());
    for (Eigen::Index i = 0; i < seg.grid.size(); ++i) sq(i) = u(seg.grid(i)).squaredNorm();
    acc += simpson(seg.grid, sq);
  }
  return acc;
}

double output_error(const Trajectory& y_full, const Trajectory& y_red, double eta) {
  assert(eta > 0.0);
  if (y_full.segments.size() != y_red.segments.size()) {
    throw std::invalid_argument("trajectories have different segment structure");
  }
  double acc = 0.0;
  for (size_t s = 0; s < y_full.segments.size(); ++s) {
    const SegmentTrajectory& a = y_full.segments[s];
    const SegmentTrajectory& b = y_red.segments[s];
    if (a.grid.size() != b.grid.size() ||
        (a.grid - b.grid).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.grid.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("trajectory grids do not coincide");
    }
    if (a.grid.size() < 2) continue;
    acc += l2_norm_sq(a.grid, Dense(a.outputs - b.outputs));
  }
  return std::sqrt(acc) / eta;
}

}  // namespace glemor
