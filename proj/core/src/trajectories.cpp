#include "radsync/trajectories.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "radsync/util.hpp"

namespace radsync {

using cd = std::complex<double>;

namespace {
inline int bit_of(int state, int site, int n) { return (state >> (n - 1 - site)) & 1; }
inline int mask_of(int site, int n) { return 1 << (n - 1 - site); }
}  // namespace

PureState all_down_pure(int n) {
  PureState psi = PureState::Zero(1 << n);
  psi[(1 << n) - 1] = 1.0;
  return psi;
}

PureState all_up_pure(int n) {
  PureState psi = PureState::Zero(1 << n);
  psi[0] = 1.0;
  return psi;
}

double ChannelSet::total_rate_bound() const {
  double s = n * repump;
  for (double r : decay_rates) s += r;
  return s;
}

ChannelSet make_channels(const CouplingMatrices& couplings, double repump) {
  ChannelSet ch;
  ch.n = couplings.size();
  ch.repump = repump;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(couplings.f);
  if (es.info() != Eigen::Success) throw std::runtime_error("make_channels: eigensolve failed");
  const auto& ev = es.eigenvalues();
  for (int k = 0; k < ev.size(); ++k) {
    double lam = ev[k];
    if (lam < -1e-9)
      throw std::invalid_argument(
          "make_channels: f matrix has negative eigenvalue " + std::to_string(lam) +
          "; no completely positive unraveling exists for this coupling matrix");
    if (lam <= 1e-12) continue;  // rounding-level channels dropped
    ch.decay_rates.push_back(lam);
    ch.decay_vectors.conservativeResize(ch.n, static_cast<int>(ch.decay_rates.size()));
    ch.decay_vectors.col(static_cast<int>(ch.decay_rates.size()) - 1) = es.eigenvectors().col(k);
  }
  return ch;
}

DriftOperator::DriftOperator(const DipoleArray& array, const CouplingMatrices& couplings,
                             double repump)
    : n_(array.size()), dim_(1 << array.size()) {
  array.validate();
  couplings.validate();
  if (couplings.size() != n_) throw std::invalid_argument("DriftOperator: size mismatch");
  diag_.resize(dim_);
  double diag_bound = 0;
  for (int s = 0; s < dim_; ++s) {
    double h = 0, k = 0;
    for (int a = 0; a < n_; ++a) {
      const int b = bit_of(s, a, n_);
      h += 0.5 * array.detunings[a] * (b == 0 ? 1.0 : -1.0);
      k += b == 0 ? couplings.f(a, a) : repump;
    }
    diag_[s] = cd(-0.5 * k, -h);
    diag_bound = std::max(diag_bound, std::abs(diag_[s]));
  }
  // uniform off-diagonal f with no elastic part: apply the pair sum as
  // J+ J- minus its diagonal, two sweeps instead of N(N-1)
  bool uniform = true;
  const double f01 = n_ > 1 ? couplings.f(0, 1) : 0.0;
  for (int a = 0; a < n_ && uniform; ++a)
    for (int b = 0; b < n_; ++b) {
      if (a == b) continue;
      if (couplings.g(a, b) != 0.0 || couplings.f(a, b) != f01) {
        uniform = false;
        break;
      }
    }
  double pair_bound = 0;
  if (uniform && n_ > 1) {
    collective_coeff_ = cd(-0.5 * f01, 0.0);
    // subtract the a = b part of J+ J- from the stored diagonal
    for (int s = 0; s < dim_; ++s) {
      int nup = 0;
      for (int a = 0; a < n_; ++a)
        if (bit_of(s, a, n_) == 0) ++nup;
      diag_[s] -= collective_coeff_ * static_cast<double>(nup);
    }
    pair_bound = 0.5 * std::abs(f01) * n_ * (n_ - 1) / 2.0;
  } else {
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) {
        if (a == b) continue;
        const double f = couplings.f(a, b), g = couplings.g(a, b);
        if (f == 0.0 && g == 0.0) continue;
        pairs_.push_back({mask_of(a, n_), mask_of(b, n_), cd(-0.5 * f, -0.5 * g)});
        pair_bound += 0.5 * std::hypot(f, g);
      }
  }
  norm_bound_ = diag_bound + pair_bound;
}

void DriftOperator::apply(const PureState& x, PureState& y) const {
  y = diag_.cwiseProduct(x);
  if (collective_coeff_ != cd(0.0, 0.0)) {
    static thread_local PureState scratch_lo_, scratch_hi_;
    scratch_lo_.setZero(dim_);
    scratch_hi_.setZero(dim_);
    for (int a = 0; a < n_; ++a) {
      const int m = mask_of(a, n_);
      for (int s = 0; s < dim_; ++s)
        if ((s & m) == 0) scratch_lo_[s | m] += x[s];  // J- x
    }
    for (int a = 0; a < n_; ++a) {
      const int m = mask_of(a, n_);
      for (int s = 0; s < dim_; ++s)
        if ((s & m) != 0) scratch_hi_[s & ~m] += scratch_lo_[s];  // J+ (J- x)
    }
    y += collective_coeff_ * scratch_hi_;
    return;
  }
  for (const auto& p : pairs_) {
    // sp_a sm_b moves the excitation b -> a: bit_a = 1 (down), bit_b = 0 (up)
    for (int s = 0; s < dim_; ++s)
      if ((s & p.mask_a) != 0 && (s & p.mask_b) == 0) y[(s | p.mask_b) & ~p.mask_a] += p.coeff * x[s];
  }
}

void apply_sigma_minus(int site, const PureState& in, PureState& out, cd scale) {
  const int dim = static_cast<int>(in.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int m = mask_of(site, n);
  for (int s = 0; s < dim; ++s)
    if ((s & m) == 0) out[s | m] += scale * in[s];
}

void apply_sigma_plus(int site, const PureState& in, PureState& out, cd scale) {
  const int dim = static_cast<int>(in.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int m = mask_of(site, n);
  for (int s = 0; s < dim; ++s)
    if ((s & m) != 0) out[s & ~m] += scale * in[s];
}

void apply_channel_lower(const Eigen::VectorXd& weights, const PureState& in, PureState& out) {
  out.setZero(in.size());
  for (int a = 0; a < weights.size(); ++a)
    if (weights[a] != 0.0) apply_sigma_minus(a, in, out, weights[a]);
}

void apply_channel_raise(const Eigen::VectorXd& weights, const PureState& in, PureState& out) {
  out.setZero(in.size());
  for (int a = 0; a < weights.size(); ++a)
    if (weights[a] != 0.0) apply_sigma_plus(a, in, out, weights[a]);
}

cd pure_pair_pm(const PureState& psi, int a, int b) {
  const int dim = static_cast<int>(psi.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int ma = mask_of(a, n), mb = mask_of(b, n);
  cd z = 0;
  // <psi| sp_a sm_b |psi> = sum over states with site a down, site b up
  for (int s = 0; s < dim; ++s)
    if ((s & ma) != 0 && (s & mb) == 0) z += std::conj(psi[(s | mb) & ~ma]) * psi[s];
  return z;
}

double pure_sz(const PureState& psi, int site) {
  const int dim = static_cast<int>(psi.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int m = mask_of(site, n);
  double z = 0;
  for (int s = 0; s < dim; ++s) z += ((s & m) == 0 ? 1.0 : -1.0) * std::norm(psi[s]);
  return z;
}

cd pure_pair_pm_mean(const PureState& psi) {
  const int dim = static_cast<int>(psi.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  cd total = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) total += pure_pair_pm(psi, a, b);
  return total / (static_cast<double>(n) * (n - 1));
}

Eigen::Matrix4cd pure_pair_reduced(const PureState& psi, int a, int b) {
  const int dim = static_cast<int>(psi.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  const int ma = mask_of(a, n), mb = mask_of(b, n);
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (int s = 0; s < dim; ++s) {
    const int u = 2 * ((s & ma) ? 1 : 0) + ((s & mb) ? 1 : 0);
    const int base = s & ~(ma | mb);
    for (int va = 0; va < 2; ++va)
      for (int vb = 0; vb < 2; ++vb) {
        const int s2 = base | (va ? ma : 0) | (vb ? mb : 0);
        rho(u, 2 * va + vb) += psi[s] * std::conj(psi[s2]);
      }
  }
  return rho;
}

Eigen::Matrix4cd pure_pair_reduced_mean(const PureState& psi) {
  const int dim = static_cast<int>(psi.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
  int cnt = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) {
        acc += pure_pair_reduced(psi, a, b);
        ++cnt;
      }
  return acc / cnt;
}

namespace {

void apply_collective_j(int axis, const PureState& in, PureState& out) {
  const int dim = static_cast<int>(in.size());
  int n = 0;
  while ((1 << n) < dim) ++n;
  out.setZero(dim);
  for (int a = 0; a < n; ++a) {
    const int m = mask_of(a, n);
    switch (axis) {
      case 0:  // Jx = sum sigma^x / 2
        for (int s = 0; s < dim; ++s) out[s ^ m] += 0.5 * in[s];
        break;
      case 1:  // Jy
        for (int s = 0; s < dim; ++s) {
          if ((s & m) == 0)
            out[s | m] += cd(0, 0.5) * in[s];   // sigma^y |up> = i |down>
          else
            out[s & ~m] += cd(0, -0.5) * in[s];
        }
        break;
      default:  // Jz
        for (int s = 0; s < dim; ++s) out[s] += ((s & m) == 0 ? 0.5 : -0.5) * in[s];
    }
  }
}

}  // namespace

double conditional_qfi(const PureState& psi) {
  PureState phi(psi.size());
  double fq = 0;
  for (int axis = 0; axis < 3; ++axis) {
    apply_collective_j(axis, psi, phi);
    const double j2 = phi.squaredNorm();
    const double j1 = psi.dot(phi).real();
    fq += 4.0 * (j2 - j1 * j1);
  }
  return fq / 3.0;
}

double ensemble_qfi_mixed(const DensityMatrix& rho, double eps) {
  const int dim = static_cast<int>(rho.rows());
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(0.5 * (rho + rho.adjoint().eval()));
  if (es.info() != Eigen::Success) throw std::runtime_error("ensemble_qfi_mixed: eigensolve");
  const auto& lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-6)
    throw std::invalid_argument("ensemble_qfi_mixed: state not positive within tolerance");
  const auto& U = es.eigenvectors();
  double fq = 0;
  PureState col(dim);
  Eigen::MatrixXcd JU(dim, dim);
  for (int axis = 0; axis < 3; ++axis) {
    for (int c = 0; c < dim; ++c) {
      PureState in = U.col(c);
      apply_collective_j(axis, in, col);
      JU.col(c) = col;
    }
    Eigen::MatrixXcd M = U.adjoint() * JU;
    double f = 0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const double denom = lam[i] + lam[j];
        if (denom > eps) {
          const double diff = lam[i] - lam[j];
          f += 2.0 * diff * diff / denom * std::norm(M(i, j));
        }
      }
    fq += f;
  }
  return fq / 3.0;
}

KrylovPropagator::KrylovPropagator(const DriftOperator& drift, int max_krylov, double tol)
    : drift_(drift), max_m_(max_krylov), tol_(tol) {
  basis_.resize(drift.dim(), max_m_ + 1);
  hess_.resize(max_m_ + 1, max_m_);
}

Eigen::VectorXcd KrylovPropagator::small_col(double theta) {
  if (spectral_ok_) {
    Eigen::VectorXcd phase(m_eff_);
    for (int k = 0; k < m_eff_; ++k) phase[k] = std::exp(eig_[k] * theta) * w0_[k];
    return evec_ * phase;
  }
  if (theta != pade_theta_) {
    Eigen::MatrixXcd h = theta * hess_.topLeftCorner(m_eff_, m_eff_);
    pade_cache_ = h.exp();
    pade_theta_ = theta;
  }
  return pade_cache_.col(0);
}

double KrylovPropagator::start_segment(const PureState& psi, double tau_request) {
  beta_ = psi.norm();
  if (beta_ < 1e-300) throw std::runtime_error("KrylovPropagator: zero state");
  basis_.col(0) = psi / beta_;
  hess_.setZero();
  invariant_ = false;
  m_eff_ = 0;

  // target step: the requested interval, capped so the subspace can hold it
  double tau_target = tau_request;
  const double nb = drift_.norm_bound();
  if (nb > 0) tau_target = std::min(tau_target, 2.0 * max_m_ / nb);

  // grow the subspace only until the a-posteriori estimate at tau_target
  // passes; inter-jump segments typically stop well below max_m
  auto err_at = [&](double tau) {
    Eigen::MatrixXcd h = tau * hess_.topLeftCorner(m_eff_, m_eff_);
    Eigen::MatrixXcd e = h.exp();
    return beta_ * std::abs(hess_(m_eff_, m_eff_ - 1)) * std::abs(e(m_eff_ - 1, 0));
  };

  PureState w(drift_.dim());
  for (int j = 0; j < max_m_; ++j) {
    PureState vj = basis_.col(j);
    drift_.apply(vj, w);
    for (int i = 0; i <= j; ++i) {
      cd h = basis_.col(i).dot(w);
      hess_(i, j) = h;
      w -= h * basis_.col(i);
    }
    // one re-orthogonalization pass controls loss of orthogonality
    for (int i = 0; i <= j; ++i) {
      cd c = basis_.col(i).dot(w);
      hess_(i, j) += c;
      w -= c * basis_.col(i);
    }
    const double hn = w.norm();
    hess_(j + 1, j) = hn;
    m_eff_ = j + 1;
    if (hn < 1e-12 * drift_.norm_bound() + 1e-300) {
      invariant_ = true;
      break;
    }
    basis_.col(j + 1) = w / hn;
    if (m_eff_ >= 4 && (m_eff_ % 2) == 0 && err_at(tau_target) <= tol_ * beta_) break;
  }

  // spectral form of the active block, with a Pade fallback
  pade_theta_ = -1.0;
  spectral_ok_ = false;
  {
    Eigen::MatrixXcd h = hess_.topLeftCorner(m_eff_, m_eff_);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() == Eigen::Success) {
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(es.eigenvectors());
      Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(m_eff_);
      e1[0] = 1.0;
      Eigen::VectorXcd w0 = lu.solve(e1);
      double resid =
          (es.eigenvectors() * (es.eigenvalues().asDiagonal() * w0) - h * (es.eigenvectors() * w0))
              .cwiseAbs()
              .maxCoeff();
      if (resid < 1e-9 * (1.0 + h.cwiseAbs().maxCoeff())) {
        eig_ = es.eigenvalues();
        evec_ = es.eigenvectors();
        w0_ = w0;
        spectral_ok_ = true;
      }
    }
  }

  double tau = tau_target;
  if (!invariant_) {
    const double hlast = std::abs(hess_(m_eff_, m_eff_ - 1));
    for (int halvings = 0; halvings < 60; ++halvings) {
      Eigen::VectorXcd col = small_col(tau);
      const double err = beta_ * hlast * std::abs(col[m_eff_ - 1]);
      if (err <= tol_ * beta_ || tau <= 1e-14 * tau_request) break;
      tau *= 0.5;
    }
  }
  step_ = tau;
  return tau;
}

double KrylovPropagator::norm2_at(double theta) {
  return beta_ * beta_ * small_col(theta).squaredNorm();
}

void KrylovPropagator::eval_at(double theta, PureState& out) {
  out.noalias() = basis_.leftCols(m_eff_) * (beta_ * small_col(theta));
}

namespace {

struct SampleAccumulator {
  TrajectoryRecord rec;
  std::vector<cd> pair_vals;
  std::vector<double> sz_vals, fq_vals;
  bool want_pair_state, want_fq;

  explicit SampleAccumulator(bool pair_state, bool fq) : want_pair_state(pair_state), want_fq(fq) {
    rec.pair_state.setZero();
  }

  void add(const PureState& psi) {
    pair_vals.push_back(pure_pair_pm_mean(psi));
    const int dim = static_cast<int>(psi.size());
    int n = 0;
    while ((1 << n) < dim) ++n;
    double sz = 0;
    for (int a = 0; a < n; ++a) sz += pure_sz(psi, a);
    sz_vals.push_back(sz / n);
    if (want_fq) {
      double fq = conditional_qfi(psi);
      fq_vals.push_back(fq);
      rec.fq_max = std::max(rec.fq_max, fq);
    }
    if (want_pair_state) rec.pair_state += pure_pair_reduced_mean(psi);
  }

  TrajectoryRecord finish() {
    rec.samples = static_cast<int>(pair_vals.size());
    if (rec.samples > 0) {
      rec.pair_pm = pairwise_sum(pair_vals) / static_cast<double>(rec.samples);
      rec.mean_sz = pairwise_sum(sz_vals) / rec.samples;
      if (want_fq) rec.fq = pairwise_sum(fq_vals) / rec.samples;
      if (want_pair_state) rec.pair_state /= rec.samples;
    }
    return rec;
  }
};

std::vector<double> sample_grid(double t_burn, double t_end, double dt) {
  std::vector<double> g;
  for (double t = t_burn; t <= t_end + 1e-12; t += dt) g.push_back(t);
  return g;
}

}  // namespace

TrajectoryRecord run_jump_trajectory(const DriftOperator& drift, const ChannelSet& channels,
                                     const PureState& psi0, const JumpOptions& opt,
                                     std::uint64_t trajectory_seed) {
  std::mt19937_64 rng(trajectory_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = drift.sites();
  const int n_decay = static_cast<int>(channels.decay_rates.size());

  PureState psi = psi0.normalized();
  PureState tmp(drift.dim()), scratch(drift.dim());
  KrylovPropagator prop(drift, opt.max_krylov, opt.krylov_tol);
  SampleAccumulator acc(opt.collect_pair_state, opt.collect_fq);
  const auto samples = sample_grid(opt.t_burn, opt.t_end, opt.sample_dt);
  std::size_t next_sample = 0;

  double t = 0.0;
  double survival = 1.0;                 // norm^2 consumed since the last jump
  double r = unif(rng);
  const double t_total = opt.t_end;

  auto do_jump = [&](const PureState& at) {
    std::vector<double> weights(n_decay + n, 0.0);
    double total = 0;
    for (int k = 0; k < n_decay; ++k) {
      apply_channel_lower(channels.decay_vectors.col(k), at, tmp);
      weights[k] = channels.decay_rates[k] * tmp.squaredNorm();
      total += weights[k];
    }
    for (int a = 0; a < n; ++a) {
      scratch.setZero();
      apply_sigma_plus(a, at, scratch);
      weights[n_decay + a] = channels.repump * scratch.squaredNorm();
      total += weights[n_decay + a];
    }
    if (total <= 0) return false;  // dark state, no jump possible
    double u = unif(rng) * total;
    int pick = 0;
    for (; pick < n_decay + n - 1; ++pick) {
      u -= weights[pick];
      if (u <= 0) break;
    }
    if (pick < n_decay) {
      apply_channel_lower(channels.decay_vectors.col(pick), at, tmp);
    } else {
      tmp.setZero();
      apply_sigma_plus(pick - n_decay, at, tmp);
    }
    psi = tmp.normalized();
    return true;
  };

  while (t < t_total - 1e-12) {
    const double step = prop.start_segment(psi, t_total - t);
    const double beta_sq = prop.norm2_at(0.0);
    // jump when survival * norm2(theta)/beta_sq reaches r
    const double target = (r / survival) * beta_sq;
    bool jump_here = prop.norm2_at(step) <= target;

    double t_seg_end = step;
    if (jump_here) {
      double lo = 0.0, hi = step;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (prop.norm2_at(mid) > target ? lo : hi) = mid;
        if (hi - lo < 1e-9 * step) break;
      }
      t_seg_end = 0.5 * (lo + hi);
    }

    // samples inside [t, t + t_seg_end]
    while (next_sample < samples.size() && samples[next_sample] <= t + t_seg_end + 1e-12) {
      double theta = samples[next_sample] - t;
      if (theta >= 0) {
        prop.eval_at(theta, scratch);
        scratch.normalize();
        acc.add(scratch);
      }
      ++next_sample;
    }

    prop.eval_at(t_seg_end, scratch);
    const double norm2 = scratch.squaredNorm();
    psi = scratch / std::sqrt(norm2);
    t += t_seg_end;
    if (jump_here) {
      // a failed jump (no open channel) restarts the waiting-time clock; it
      // can only arise in fully dark corners with zero outgoing flux
      do_jump(psi);
      survival = 1.0;
      r = unif(rng);
    } else {
      survival *= norm2 / beta_sq;
    }
  }
  return acc.finish();
}

std::vector<TrajectoryRecord> run_jump_ensemble(const DipoleArray& array,
                                                const CouplingMatrices& couplings,
                                                double repump, const JumpOptions& opt) {
  DriftOperator drift(array, couplings, repump);
  ChannelSet channels = make_channels(couplings, repump);
  PureState psi0 = all_down_pure(array.size());
  std::vector<TrajectoryRecord> records(opt.trajectories);
  unsigned workers = opt.workers ? opt.workers : default_workers();
  parallel_for(opt.trajectories, workers, [&](std::size_t i) {
    records[i] = run_jump_trajectory(drift, channels, psi0, opt,
                                     derive_seed(opt.seed, i));
  });
  return records;
}

void qsd_step(PureState& psi, const DriftOperator& drift, const ChannelSet& channels, double dt,
              std::mt19937_64& rng) {
  static thread_local PureState dpsi, phi, accum;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = drift.sites();
  const int n_decay = static_cast<int>(channels.decay_rates.size());
  const double sq_dt_half = std::sqrt(0.5 * dt);

  // deterministic part: (-iH - K/2) psi dt (K/2 already contains the full
  // sum over channel rates)
  drift.apply(psi, dpsi);
  accum = dpsi * dt;

  auto add_channel = [&](const PureState& lpsi) {
    const cd expect = psi.dot(lpsi);  // <L>
    // drift: (<L*> L - |<L>|^2/2) psi dt ; noise: (L - <L>) psi dxi
    const cd dxi = cd(gauss(rng), gauss(rng)) * sq_dt_half;
    accum += std::conj(expect) * dt * lpsi;
    accum -= 0.5 * std::norm(expect) * dt * psi;
    accum += dxi * lpsi;
    accum -= dxi * expect * psi;
  };

  for (int k = 0; k < n_decay; ++k) {
    apply_channel_lower(channels.decay_vectors.col(k) * std::sqrt(channels.decay_rates[k]), psi,
                        phi);
    add_channel(phi);
  }
  const double sw = std::sqrt(channels.repump);
  for (int a = 0; a < n; ++a) {
    phi.setZero(psi.size());
    apply_sigma_plus(a, psi, phi, sw);
    add_channel(phi);
  }

  psi += accum;
  const double norm = psi.norm();
  if (norm < 1e-12) throw std::runtime_error("qsd_step: norm collapse");
  psi /= norm;
}

QsdEnsembleResult run_qsd_ensemble(const DipoleArray& array, const CouplingMatrices& couplings,
                                   double repump, const QsdOptions& opt) {
  DriftOperator drift(array, couplings, repump);
  ChannelSet channels = make_channels(couplings, repump);
  double dt = opt.dt;
  if (dt <= 0) dt = 1e-3 / (array.gamma + repump + couplings.f_eff);
  if (dt * channels.total_rate_bound() >= 1e-2)
    throw std::invalid_argument("run_qsd_ensemble: dt * total rate exceeds 1e-2; reduce dt");

  const auto samples = sample_grid(opt.t_burn, opt.t_end, opt.sample_dt);
  QsdEnsembleResult result;
  result.dt_used = dt;
  result.records.resize(opt.trajectories);
  const int dim = 1 << array.size();

  std::vector<DensityMatrix> rho_parts;
  unsigned workers = opt.workers ? opt.workers : default_workers();
  if (opt.accumulate_rho) rho_parts.assign(opt.trajectories, DensityMatrix::Zero(dim, dim));

  parallel_for(opt.trajectories, workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(opt.seed, i));
    PureState psi = all_down_pure(array.size());
    SampleAccumulator acc(opt.collect_pair_state, opt.collect_fq);
    double t = 0;
    std::size_t next_sample = 0;
    const long total_steps = std::lround(opt.t_end / dt);
    for (long step = 0; step < total_steps; ++step) {
      qsd_step(psi, drift, channels, dt, rng);
      t = (step + 1) * dt;
      if (next_sample < samples.size() && t >= samples[next_sample]) {
        acc.add(psi);
        if (opt.accumulate_rho) rho_parts[i] += psi * psi.adjoint();
        ++next_sample;
      }
    }
    result.records[i] = acc.finish();
  });

  if (opt.accumulate_rho) {
    DensityMatrix sum = DensityMatrix::Zero(dim, dim);
    for (const auto& m : rho_parts) sum += m;  // index order, deterministic
    double tr = sum.trace().real();
    if (tr > 0) sum /= tr;
    result.rho_mean = sum;
  }
  return result;
}

MeanSe reduce_mean_se(std::span<const double> values) {
  MeanSe ms;
  const std::size_t m = values.size();
  if (m == 0) return ms;
  ms.mean = pairwise_sum(values) / static_cast<double>(m);
  if (m > 1) {
    double ss = 0;
    for (double v : values) ss += (v - ms.mean) * (v - ms.mean);
    ms.se = std::sqrt(ss / (static_cast<double>(m) * (m - 1)));
  }
  return ms;
}

}  // namespace radsync
