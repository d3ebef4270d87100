#include "glemor/error_certificates.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glemor {

namespace {

void require_descending(const Vector& v) {
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i - 1) < v(i) - 1e-14 * std::abs(v(0)))
      throw std::invalid_argument("spectrum must be descending");
}

// Input L2 norm squared on the exact grids simulate() would use.
double input_norm_sq(const SwitchingSignal& signal, const InputSignal& u, double horizon,
                     const IntegrationOptions& opts) {
  std::vector<double> ends;
  for (double b : signal.breakpoints) {
    if (b >= horizon) break;
    ends.push_back(b);
  }
  ends.push_back(horizon);
  double acc = 0.0;
  double left = signal.t0;
  for (double right : ends) {
    const Eigen::Index samples = right > left ? opts.min_samples_per_segment + 1 : 1;
    if (samples >= 2) {
      const Vector grid = Vector::LinSpaced(samples, left, right);
      Vector vals(samples);
      for (Eigen::Index i = 0; i < samples; ++i) vals(i) = u(grid(i)).squaredNorm();
      acc += simpson(grid, vals);
    }
    left = right;
  }
  return acc;
}

Dense pad_rows(const Dense& X, Eigen::Index rows) {
  if (X.rows() == rows) return X;
  Dense out = Dense::Zero(rows, X.cols());
  out.topRows(X.rows()) = X;
  return out;
}

}  // namespace

double input_l2_norm(const SwitchingSignal& signal, const InputSignal& u, double horizon,
                     const IntegrationOptions& opts) {
  return std::sqrt(input_norm_sq(signal, u, horizon, opts));
}

double bt_error_bound(const Vector& hankel, Eigen::Index r, double rel_tol) {
  if (r < 0 || r > hankel.size())
    throw std::invalid_argument("bt_error_bound: cut outside the spectrum");
  require_descending(hankel);
  const double scale = hankel.size() > 0 ? std::abs(hankel(0)) : 0.0;
  double sum = 0.0;
  for (Eigen::Index i = r; i < hankel.size(); ++i) {
    const bool new_cluster = i == r || std::abs(hankel(i - 1) - hankel(i)) > rel_tol * scale;
    if (new_cluster) sum += hankel(i);
  }
  return 2.0 * sum;
}

Levels build_levels(const std::vector<Vector>& spectra, Eigen::Index r, double rel_tol) {
  if (spectra.empty()) throw std::invalid_argument("build_levels: no spectra");
  const Eigen::Index n = spectra.front().size();
  for (const Vector& s : spectra) {
    if (s.size() != n) throw std::invalid_argument("build_levels: spectra sizes differ");
    require_descending(s);
  }
  if (r < 0 || r > n) throw std::invalid_argument("build_levels: cut outside the spectrum");

  Levels lv;
  lv.cuts.push_back(r);
  Eigen::Index k = r;
  while (k < n) {
    Eigen::Index k2 = k + 1;
    // Merge positions while every mode sees the same value (relative to the
    // adjacent pair itself), so only genuine shared plateaus collapse.
    while (k2 < n) {
      bool plateau = true;
      for (const Vector& s : spectra) {
        const double a = s(k2 - 1), b = s(k2);
        if (std::abs(a - b) > rel_tol * std::max(a, b)) {
          plateau = false;
          break;
        }
      }
      if (!plateau) break;
      ++k2;
    }
    lv.cuts.push_back(k2);
    k = k2;
  }
  return lv;
}

double balanced_lmi_eig(const PbrRom& rom, LmiSide side, int mode, Eigen::Index s,
                        LmiEigCache& cache) {
  const int M = rom.mode_count();
  if (mode < 0 || mode >= M) throw std::invalid_argument("balanced_lmi_eig: bad mode");
  if (s < 1 || s > rom.full_size()) throw std::invalid_argument("balanced_lmi_eig: bad size");
  const auto key = std::make_tuple(side == LmiSide::reach ? 0 : 1, mode, s);
  const auto hit = cache.values.find(key);
  if (hit != cache.values.end()) return hit->second;

  cache.Mc.resize(size_t(M));
  cache.Mo.resize(size_t(M));
  Dense& slot = side == LmiSide::reach ? cache.Mc[size_t(mode)] : cache.Mo[size_t(mode)];
  if (slot.size() == 0) {
    const Mode& md = rom.balanced[size_t(mode)];
    const auto Sig = rom.spectra[size_t(mode)].asDiagonal();
    Dense T = side == LmiSide::reach
                  ? Dense(md.A * Sig + Sig * md.A.transpose() + md.B * md.B.transpose())
                  : Dense(md.A.transpose() * Sig + Sig * md.A + md.C.transpose() * md.C);
    slot = 0.5 * (T + T.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Dense> es(slot.topLeftCorner(s, s), Eigen::EigenvaluesOnly);
  const double lam = es.eigenvalues().maxCoeff();
  cache.values.emplace(key, lam);
  return lam;
}

LevelQuantities level_quantities(const PbrRom& rom, const Trajectory& big,
                                 const Trajectory& small, Eigen::Index s_prev,
                                 Eigen::Index s, LmiEigCache* cache) {
  const int M = rom.mode_count();
  if (!(0 <= s_prev && s_prev < s && s <= rom.full_size()))
    throw std::invalid_argument("level_quantities: invalid level sizes");
  if (big.segments.size() != small.segments.size())
    throw std::invalid_argument("level_quantities: different segment structure");
  for (const Vector& sf : rom.spectra)
    if (sf.minCoeff() <= 0.0)
      throw std::invalid_argument("level_quantities: spectrum floor must be positive");

  LmiEigCache local;
  LmiEigCache& c = cache ? *cache : local;

  LevelQuantities q;
  q.s_prev = s_prev;
  q.s = s;
  q.exact = !big.segments.empty() && big.segments.front().states.rows() == s;
  double sigma = 0.0;
  for (const Vector& sf : rom.spectra) sigma = std::max(sigma, sf(s - 1));
  q.sigma = sigma;
  q.lambda1_Mc.resize(M);
  q.lambda1_Mo.resize(M);
  for (int j = 0; j < M; ++j) {
    q.lambda1_Mc(j) = balanced_lmi_eig(rom, LmiSide::reach, j, s, c);
    q.lambda1_Mo(j) = balanced_lmi_eig(rom, LmiSide::observ, j, s, c);
  }

  for (size_t k = 0; k < big.segments.size(); ++k) {
    const SegmentTrajectory& sb = big.segments[k];
    const SegmentTrajectory& ss = small.segments[k];
    if (sb.mode != ss.mode || sb.grid.size() != ss.grid.size() ||
        (sb.grid - ss.grid).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + std::abs(sb.grid(0)))) {
      std::ostringstream msg;
      msg << "level_quantities: trajectories disagree on segment " << k << " at level ("
          << s_prev << ", " << s << "]";
      throw std::invalid_argument(msg.str());
    }
    if (sb.states.rows() > s || ss.states.rows() > s_prev ||
        ss.states.rows() > sb.states.rows()) {
      std::ostringstream msg;
      msg << "level_quantities: state sizes " << sb.states.rows() << "/" << ss.states.rows()
          << " do not fit level (" << s_prev << ", " << s << "]";
      throw std::invalid_argument(msg.str());
    }
    const int j = sb.mode;
    const Eigen::Index m = std::max(sb.states.rows(), ss.states.rows());
    Dense xc = pad_rows(sb.states, m);
    Dense xo = xc;
    xc.topRows(ss.states.rows()) += ss.states;
    xo.topRows(ss.states.rows()) -= ss.states;

    const Vector d = rom.spectra[size_t(j)].head(m);
    if (sb.grid.size() >= 2) {
      q.H_c += q.lambda1_Mc(j) * simpson(sb.grid, xc.colwise().squaredNorm().transpose());
      q.H_o += q.lambda1_Mo(j) * simpson(sb.grid, xo.colwise().squaredNorm().transpose());
    }
    const Eigen::Index last = xc.cols() - 1;
    q.G_o += xo.col(last).dot(d.cwiseProduct(xo.col(last))) -
             xo.col(0).dot(d.cwiseProduct(xo.col(0)));
    const double sj = rom.spectra[size_t(j)](s - 1);
    q.G_c += sj * sj * (xc.col(last).dot(xc.col(last).cwiseQuotient(d)) -
                        xc.col(0).dot(xc.col(0).cwiseQuotient(d)));
  }
  return q;
}

BoundBreakdown pbr_error_bound(const SwitchedSystem& sys, const PbrRom& rom,
                               const SwitchingSignal& signal, const InputSignal& u,
                               double horizon, const IntegrationOptions& opts,
                               int reuse_depth, LmiEigCache* cache) {
  if (sys.n() != rom.full_size())
    throw std::invalid_argument("pbr_error_bound: system and reduction sizes differ");
  if (sys.mode_count() != rom.mode_count())
    throw std::invalid_argument("pbr_error_bound: system and reduction mode counts differ");
  if (reuse_depth < 1) throw std::invalid_argument("pbr_error_bound: reuse_depth must be >= 1");
  for (const Vector& sf : rom.spectra)
    if (sf.minCoeff() <= 0.0)
      throw std::invalid_argument("pbr_error_bound: spectrum floor must be positive");

  BoundBreakdown out;
  out.r = rom.r;
  out.eta = std::sqrt(input_norm_sq(signal, u, horizon, opts));

  const Levels lv = build_levels(rom.spectra, rom.r);
  const int nlev = lv.count();
  if (nlev == 0) {
    out.phi = 0.0;  // nothing truncated
    return out;
  }

  // Exact trajectories for the first reuse_depth levels; the deepest one is
  // reused (zero-padded implicitly) for every remaining level.
  const int deep_idx = std::min(reuse_depth, nlev);
  std::map<Eigen::Index, Trajectory> sims;
  for (int i = 0; i <= deep_idx; ++i) {
    const Eigen::Index sz = lv.cuts[size_t(i)];
    if (sz > 0 && sims.find(sz) == sims.end())
      sims.emplace(sz, simulate(rom.subsystem(sz), signal, u, horizon, opts,
                                rom.jump_sequence(signal, sz)));
  }
  const Eigen::Index deep = lv.cuts[size_t(deep_idx)];

  LmiEigCache local;
  LmiEigCache& c = cache ? *cache : local;
  double chi = 0.0, iota = 0.0, tau = 0.0;
  for (int li = 0; li < nlev; ++li) {
    const Eigen::Index p0 = lv.cuts[size_t(li)];
    const Eigen::Index s = lv.cuts[size_t(li + 1)];
    const bool exact = li < reuse_depth;
    const Trajectory& traj_s = exact ? sims.at(s) : sims.at(deep);
    const Trajectory& traj_p = exact ? sims.at(p0) : sims.at(deep);

    LevelQuantities q = level_quantities(rom, traj_s, traj_p, p0, s, &c);
    q.exact = exact;
    tau += 2.0 * q.sigma;
    const double h_sum = q.H_c + q.H_o;
    if (h_sum > 0.0) chi += std::sqrt(h_sum);
    const double g_sum = q.G_o + q.G_c;
    if (g_sum < 0.0) iota += std::sqrt(-g_sum);
    out.levels.push_back(std::move(q));
  }
  if (out.eta > 0.0) {
    chi /= out.eta;
    iota /= out.eta;
  } else {
    chi = 0.0;
    iota = 0.0;
  }
  out.tau = tau;
  out.chi = chi;
  out.iota = iota;
  out.phi = tau + chi + iota;
  return out;
}

BoundVerification verify_bound(const BoundBreakdown& breakdown, double error_l2,
                               double slack) {
  BoundVerification v;
  v.error = error_l2;
  v.bound = breakdown.phi * breakdown.eta;
  v.slack = slack;
  v.sound = v.error <= v.bound + v.slack;
  v.breakdown = breakdown;
  return v;
}

BoundVerification verify_bound(const SwitchedSystem& fom, const PbrRom& rom,
                               const SwitchingSignal& signal, const InputSignal& u,
                               double horizon, const IntegrationOptions& opts,
                               int reuse_depth, LmiEigCache* cache) {
  const Trajectory full = simulate(fom, signal, u, horizon, opts);
  const Trajectory red = simulate(rom.subsystem(rom.r), signal, u, horizon, opts,
                                  rom.jump_sequence(signal, rom.r));
  const double err = output_error(full, red, 1.0);  // absolute L2 error
  const BoundBreakdown bd = pbr_error_bound(fom, rom, signal, u, horizon, opts,
                                            reuse_depth, cache);
  const double y_scale = std::sqrt(l2_norm_sq(full));
  const double slack = 10.0 * (opts.abs_tol + opts.rel_tol * y_scale);
  return verify_bound(bd, err, slack);
}

}  // namespace glemor
