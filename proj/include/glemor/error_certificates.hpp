#ifndef GLEMOR_ERROR_CERTIFICATES_HPP
#define GLEMOR_ERROR_CERTIFICATES_HPP

#include <map>
#include <tuple>
#include <vector>

#include "glemor/balancing.hpp"
#include "glemor/sls_core.hpp"

namespace glemor {

// Classical truncation bound: twice the sum of the distinct neglected values,
// multiplicities not counted (clusters at relative gap rel_tol merge).
double bt_error_bound(const Vector& hankel, Eigen::Index r, double rel_tol = 1e-8);

// Truncation levels shared by every mode.  cuts[0] = r; each further cut sits
// where at least one mode's adjacent values differ by more than rel_tol
// relative to the pair itself, so plateaus common to all modes merge.
// Level k spans sizes (cuts[k], cuts[k+1]].
struct Levels {
  std::vector<Eigen::Index> cuts;

  int count() const { return static_cast<int>(cuts.size()) - 1; }
};

Levels build_levels(const std::vector<Vector>& spectra, Eigen::Index r,
                    double rel_tol = 1e-8);

// Memo for extremal eigenvalues of the balanced-coordinate inequality
// matrices, keyed by (side, mode, size).  Tied to one reduction; reusable
// across bound evaluations and truncation sweeps of that reduction.
struct LmiEigCache {
  std::vector<Dense> Mc;  // fully assembled per-mode matrices, built lazily
  std::vector<Dense> Mo;
  std::map<std::tuple<int, int, Eigen::Index>, double> values;
};

// Largest eigenvalue of the leading s x s block of the mode's balanced
// inequality matrix A'S + SA'^T + B'B'^T (reach) or A'^T S + SA' + C'^T C'
// (observ), S the floored balanced spectrum.
double balanced_lmi_eig(const PbrRom& rom, LmiSide side, int mode, Eigen::Index s,
                        LmiEigCache& cache);

// Scalar aggregates of one truncation level.
struct LevelQuantities {
  Eigen::Index s_prev = 0;  // the level spans sizes (s_prev, s]
  Eigen::Index s = 0;
  double sigma = 0.0;  // max-over-modes floored value at position s-1
  double H_c = 0.0;    // state energies weighted by the extremal eigenvalues
  double H_o = 0.0;
  double G_o = 0.0;  // endpoint/jump boundary sums
  double G_c = 0.0;
  Vector lambda1_Mc;  // per-mode extremal eigenvalues at size s
  Vector lambda1_Mo;
  bool exact = true;  // simulated at this size, or reused from the deep run
};

// Aggregates of one level from a size-s trajectory (`big`) and a size-s_prev
// trajectory (`small`), both in mode-local balanced coordinates with jump
// bookkeeping.  Passing the same deeper trajectory as both arguments yields
// the reuse shortcut: the combined state doubles and the gap state vanishes.
LevelQuantities level_quantities(const PbrRom& rom, const Trajectory& big,
                                 const Trajectory& small, Eigen::Index s_prev,
                                 Eigen::Index s, LmiEigCache* cache = nullptr);

// The a-posteriori breakdown.  All parts are normalized by the input norm, so
// the certified inequality reads ||y - y_r|| <= phi * eta.
struct BoundBreakdown {
  Eigen::Index r = 0;
  double tau = 0.0;   // truncated-value tail, twice the distinct sum
  double chi = 0.0;   // positive state-energy aggregate
  double iota = 0.0;  // inequality-violation aggregate
  double phi = 0.0;   // tau + chi + iota, stored exactly as that sum
  double eta = 0.0;   // input L2 norm over the horizon
  std::vector<LevelQuantities> levels;
};

// L2 norm of the input over [t0, horizon] on the quadrature grids simulate()
// would use; the eta every relative bound is stated against.
double input_l2_norm(const SwitchingSignal& signal, const InputSignal& u, double horizon,
                     const IntegrationOptions& opts = {});

// Evaluates the bound for one reduced model over one signal/input/horizon.
// The first reuse_depth levels above r are simulated exactly; deeper levels
// reuse the deepest exact trajectory.  `sys` is the full-order system the
// reduction was built from (dimension cross-check only).
BoundBreakdown pbr_error_bound(const SwitchedSystem& sys, const PbrRom& rom,
                               const SwitchingSignal& signal, const InputSignal& u,
                               double horizon, const IntegrationOptions& opts = {},
                               int reuse_depth = 3, LmiEigCache* cache = nullptr);

struct BoundVerification {
  double error = 0.0;  // measured output error, absolute L2
  double bound = 0.0;  // phi * eta, absolute
  double slack = 0.0;
  bool sound = false;

  BoundBreakdown breakdown;
};

// Soundness record from a precomputed breakdown and a measured error.
BoundVerification verify_bound(const BoundBreakdown& breakdown, double error_l2,
                               double slack = 0.0);

// Full pipeline: simulates the original system and the reduced one, measures
// the output error, evaluates the bound, and checks soundness with slack set
// to ten times the combined integration tolerances.
BoundVerification verify_bound(const SwitchedSystem& fom, const PbrRom& rom,
                               const SwitchingSignal& signal, const InputSignal& u,
                               double horizon, const IntegrationOptions& opts = {},
                               int reuse_depth = 3, LmiEigCache* cache = nullptr);

}  // namespace glemor

#endif  // GLEMOR_ERROR_CERTIFICATES_HPP
