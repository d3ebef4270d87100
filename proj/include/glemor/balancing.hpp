#ifndef GLEMOR_BALANCING_HPP
#define GLEMOR_BALANCING_HPP

#include <string>
#include <vector>

#include "glemor/gle_solver.hpp"
#include "glemor/matrix_kernel.hpp"
#include "glemor/sls_core.hpp"

namespace glemor {

// Symmetric PSD matrix in factored form: X = Z Zᵀ + shift·I.
struct LowRankPsd {
  Dense Z;
  double shift = 0.0;

  Eigen::Index n() const { return Z.rows(); }
};

// Certified reachability/observability Gramian pair.  The scale fields record
// the bilinear-term rescale folded into each solved problem (1 = none); they
// let callers rebuild the exact problem a factor satisfies.
struct GramianPair {
  LowRankPsd P;
  LowRankPsd Q;
  double p_certificate = 0.0;
  double q_certificate = 0.0;
  double p_scale = 1.0;
  double q_scale = 1.0;
};

// Petrov-Galerkin projector pair with the full Hankel spectrum retained.
// When the requested truncation index would split a singular-value cluster,
// r is moved to the nearest admissible edge (see square_root_projectors).
struct ProjectionPair {
  Dense V;
  Dense W;
  Vector hankel;                // full singular spectrum of SᵀR, descending
  Eigen::Index r = 0;           // effective truncation index
  Eigen::Index requested_r = 0;
  bool cluster_moved = false;
};

enum class LmiSide { reach, observ };

// Per-mode balanced data of the piecewise reduction: full n-dimensional
// balanced triples, floored spectra, transforms, and all mode-pair coupling
// products. Reduced systems of any size are leading-block slices.
struct PbrRom {
  Eigen::Index r = 0;
  Eigen::Index requested_r = 0;
  std::vector<Mode> balanced;              // per-mode (Ā, B̄, C̄) at full size
  std::vector<Vector> spectra;             // floored balanced spectra, descending
  std::vector<Dense> V_full;               // per-mode n×n balancing transforms
  std::vector<Dense> W_full;
  std::vector<std::vector<Dense>> coupling;  // coupling[j][i] = W̄_jᵀ V̄_i
  std::vector<double> mode_max_re;           // spectral abscissas of the size-r modes
  std::vector<std::string> warnings;

  int mode_count() const { return static_cast<int>(balanced.size()); }
  Eigen::Index full_size() const { return balanced.empty() ? 0 : balanced.front().A.rows(); }
  // Size-s reduced switched system (leading balanced blocks).
  SwitchedSystem subsystem(Eigen::Index s) const;
  SwitchedSystem rom() const { return subsystem(r); }
  // Size-s jump map applied when switching from mode `from` to mode `to`.
  Dense jump_map(int to, int from, Eigen::Index s) const;
  // Per-switch jump maps for a signal, at size s.
  std::vector<Dense> jump_sequence(const SwitchingSignal& signal, Eigen::Index s) const;
};

// The coupled-equation family of the monolithic reduction: anchor mode 1,
// N_j = A_j - A_1, stacked inputs (reach) or stacked output maps on the
// transposed family (observ).
GleProblemDense monolithic_problem(const SwitchedSystem& sys, LmiSide side);

// Mode-j family of the piecewise reduction: anchor A_j, N_i = A_i - A_j.
GleProblemDense pbr_mode_problem(const SwitchedSystem& sys, int j, LmiSide side);

GramianPair gramians_monolithic(const SwitchedSystem& sys, double tol,
                                const GleSolveOptions& opts = {});

std::vector<GramianPair> pbr_gramians(const SwitchedSystem& sys, double tol,
                                      const GleSolveOptions& opts = {});

// Rank-revealing eigen-factor of X = Z Zᵀ + shift·I. For shift > 0 and
// n within the dense cap the factor is completed to full rank explicitly.
Dense psd_full_factor(const LowRankPsd& X, Eigen::Index dense_cap = 600);

// Indices r at which the descending spectrum may be cut without splitting a
// cluster (relative gap >= rel_tol); always contains 0 and the spectrum size.
std::vector<Eigen::Index> cluster_edges(const Vector& descending, double rel_tol = 1e-8);

// Square-root balancing projectors from the Gramian factors. A requested r
// splitting an interior cluster moves to the nearest admissible edge; a cut
// inside a trailing plateau (cluster reaching the end of the spectrum) is
// honored as requested.
ProjectionPair square_root_projectors(const LowRankPsd& P, const LowRankPsd& Q,
                                      Eigen::Index r);

// Petrov-Galerkin reduction of every mode through one shared projector pair.
SwitchedSystem reduce(const SwitchedSystem& sys, const Dense& V, const Dense& W);

// Largest eigenvalue of A X + X Aᵀ + G Gᵀ (reach) or Aᵀ X + X A + Gᵀ G
// (observ), through low-rank-aware matrix-vector products. Dense assembly is
// used for n <= 400 unless force_iterative.
double lmi_max_eig(const Dense& A, const LowRankPsd& X, const Dense& G, LmiSide side,
                   bool force_iterative = false);

struct ShiftedGramian {
  LowRankPsd X;  // original factor with the shift recorded symbolically
  double mu = 0.0;
};

// Diagonal repair X̂ = X̃ + μ̂ I with μ̂ = tol · max_j κ₁(A_j). Requires every
// A_j + A_jᵀ to be negative definite; otherwise throws (caller falls back to
// the piecewise reduction).
ShiftedGramian shift_gramian(const LowRankPsd& X, double tol, const std::vector<Dense>& A_list);

// Largest algebraic eigenpairs of the symmetric residual of problem at Z,
// matrix-free. Stops when the next eigenvalue drops below rel_cut of the
// largest positive one, at n_pos pairs, or when values stop being positive.
TruncatedEig residual_positive_eigs(const GleProblemDense& problem, const Dense& Z,
                                    int n_pos = 50, double rel_cut = 1e-3);

// Residual-splitting repair: appends the factor of the correction solving
// A G Gᵀ + G Gᵀ Aᵀ + V⁺Σ⁺V⁺ᵀ = 0 so that [Z, G][Z, G]ᵀ satisfies the plain
// per-mode inequality up to the correction solve accuracy.
Dense residual_split_perturbation(const GleProblemDense& problem, const Dense& Z,
                                  int n_pos, double lyap_tol);

// Spectral abscissa max Re λ(A); negative certifies stability.
double hurwitz_check(const Dense& A);

// Full piecewise balanced reduction: per-mode balancing with full-rank
// completion, spectrum flooring by adding `floor` to every entry, uniform
// truncation size across modes, and all M² coupling products.
PbrRom pbr_reduce(const SwitchedSystem& sys, const std::vector<GramianPair>& gramians,
                  Eigen::Index r, double floor);

}  // namespace glemor

#endif  // GLEMOR_BALANCING_HPP
