#include "pfgp/pf_objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/random.hpp"

namespace pfgp {

const char* aux_kind_name(AuxKind kind) {
  switch (kind) {
    case AuxKind::kSubsetOfData: return "subset";
    case AuxKind::kSorLowRank: return "sor";
  }
  return "unknown";
}

AuxKind parse_aux_kind(const std::string& name) {
  if (name == "subset" || name == "subset-of-data") return AuxKind::kSubsetOfData;
  if (name == "sor" || name == "sor-low-rank") return AuxKind::kSorLowRank;
  throw Error(ErrorCode::kAuxKindUnsupported, "unknown aux kind '" + name + "'");
}

namespace {

constexpr Index kRowBlock = 256;

void check_subset(const InputSet& x, const VectorXd& y, const std::vector<Index>& subset,
                  const KernelParams& p) {
  p.validate();
  detail::require_dim(x.points(), p, "aux");
  if (y.size() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "aux: targets and inputs differ in length");
  }
  if (subset.empty()) throw Error(ErrorCode::kInvalidArgument, "aux: subset must be non-empty");
  std::set<Index> seen;
  for (Index i : subset) {
    if (i < 0 || i >= x.size()) {
      std::ostringstream os;
      os << "aux: subset index " << i << " outside [0, " << x.size() << ")";
      throw Error(ErrorCode::kIndexOutOfRange, os.str());
    }
    if (!seen.insert(i).second) throw Error(ErrorCode::kInvalidArgument, "aux: subset indices must be distinct");
  }
}

VectorXd gather(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

}  // namespace

AuxiliaryDistribution build_aux_subset(const InputSet& x, const VectorXd& y,
                                       const std::vector<Index>& subset, const KernelParams& p,
                                       Index validation_cap) {
  check_subset(x, y, subset, p);
  if (x.size() > validation_cap) {
    std::ostringstream os;
    os << "subset-of-data aux needs O(N^2) products; N=" << x.size() << " exceeds cap " << validation_cap;
    throw Error(ErrorCode::kValidationModeRequired, os.str());
  }
  AuxiliaryDistribution a;
  a.kind_ = AuxKind::kSubsetOfData;
  a.params_ = p;
  a.validation_cap_ = validation_cap;
  a.train_points_ = x.points();
  a.indices_ = subset;
  a.aux_points_ = x.subset(subset).points();
  a.aux_targets_ = gather(y, subset);
  MatrixXd c = detail::kernel_self(a.aux_points_, p);
  c.diagonal().array() += p.noise_variance;
  a.aux_solve_ = chol_psd(c);
  a.features_x_ = solve_lower(a.aux_solve_, detail::kernel_cross(a.aux_points_, a.train_points_, p));
  a.mean_coeffs_ = solve_lower(a.aux_solve_, MatrixXd(a.aux_targets_)).col(0);
  a.mu_x_ = a.features_x_.transpose() * a.mean_coeffs_;
  return a;
}

AuxiliaryDistribution build_aux_sor(const InputSet& x, const VectorXd& y,
                                    const std::vector<Index>& subset, const KernelParams& p) {
  check_subset(x, y, subset, p);
  AuxiliaryDistribution a;
  a.kind_ = AuxKind::kSorLowRank;
  a.params_ = p;
  a.train_points_ = x.points();
  a.indices_ = subset;
  a.aux_points_ = x.subset(subset).points();
  a.aux_targets_ = gather(y, subset);
  const MatrixXd k_hx = detail::kernel_cross(a.aux_points_, a.train_points_, p);
  const CholFactor l = chol_psd(detail::kernel_self(a.aux_points_, p));
  const MatrixXd lk = solve_lower(l, k_hx);
  MatrixXd b = MatrixXd::Identity(lk.rows(), lk.rows());
  b.noalias() += (lk * lk.transpose()) / p.noise_variance;
  const CholFactor lb = chol_psd(symmetrize(b));
  a.aux_solve_.lower = l.lower.triangularView<Eigen::Lower>() * lb.lower;
  a.aux_solve_.jitter_used = l.jitter_used;
  a.features_x_ = solve_lower(lb, lk);
  a.mean_coeffs_ = (a.features_x_ * y) / p.noise_variance;
  a.mu_x_ = a.features_x_.transpose() * a.mean_coeffs_;
  return a;
}

MatrixXd AuxiliaryDistribution::features(const MatrixXd& points) const {
  detail::require_dim(points, params_, "aux features");
  return solve_lower(aux_solve_, detail::kernel_cross(aux_points_, points, params_));
}

VectorXd AuxiliaryDistribution::mean_at(const MatrixXd& points) const {
  return features(points).transpose() * mean_coeffs_;
}

MatrixXd AuxiliaryDistribution::cov_cross(const MatrixXd& a, const MatrixXd& b) const {
  const MatrixXd fa = features(a);
  MatrixXd out = beta() * (fa.transpose() * (&a == &b ? fa : features(b)));
  if (kind_ == AuxKind::kSubsetOfData) out += detail::kernel_cross(a, b, params_);
  if (&a == &b) out = symmetrize(out);
  return out;
}

MatrixXd AuxiliaryDistribution::cov_train_cross(const MatrixXd& b) const {
  MatrixXd out = beta() * (features_x_.transpose() * features(b));
  if (kind_ == AuxKind::kSubsetOfData) out += detail::kernel_cross(train_points_, b, params_);
  return out;
}

MatrixXd AuxiliaryDistribution::cov_times(const MatrixXd& v) const {
  if (v.rows() != n()) {
    throw Error(ErrorCode::kDimensionMismatch, "aux cov_times: operand rows must equal N");
  }
  MatrixXd out = beta() * (features_x_.transpose() * (features_x_ * v));
  if (kind_ == AuxKind::kSubsetOfData) {
    if (n() > validation_cap_) {
      throw Error(ErrorCode::kValidationModeRequired, "aux cov_times: subset-of-data aux over the N cap");
    }
    for (Index r0 = 0; r0 < n(); r0 += kRowBlock) {
      const Index rows = std::min(kRowBlock, n() - r0);
      out.middleRows(r0, rows).noalias() +=
          detail::kernel_cross(train_points_.middleRows(r0, rows), train_points_, params_) * v;
    }
  }
  return out;
}

MatrixXd AuxiliaryDistribution::dense_cov_train() const {
  if (n() > validation_cap_) {
    throw Error(ErrorCode::kValidationModeRequired, "dense aux covariance over the N cap");
  }
  return cov_cross(train_points_, train_points_);
}

namespace {

void check_objective_inputs(const NystromCache& cache, const VectorXd& y,
                            const AuxiliaryDistribution& aux, const KernelParams& p) {
  if (y.size() != cache.n() || aux.n() != cache.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "pf objective: cache, targets and aux disagree on N");
  }
  detail::require_dim(cache.inducing, p, "pf objective");
}

// Building blocks of the relative objective in whitened coordinates
// (A = L^{-1} K_MX, L L^T = K_MM + jitter I). All are at most N x M.
//   term I   = -tr(Vw) - |A e|^2
//   term IIa = tr(D Vw) + tr(D R Hw R)
//   term IIb = -2 tr(D R Jw)
//   term III = phi^T D phi
// with R = A A^T, D = B^{-2}, Vw = A Khat A^T, Jw = L^{-1} Khat_MX A^T,
// Hw = L^{-1} Khat_MM L^{-T}, phi = A mu_X - R L^{-1} mu_M.
struct Blocks {
  MatrixXd r;
  MatrixXd binv;
  MatrixXd d;
  MatrixXd t;      // Khat_XX A^T, N x M
  MatrixXd vw;
  VectorXd e;      // mu_X - y
  VectorXd ae;     // A e
  MatrixXd kh_xm;  // Khat(X, Xt)
  MatrixXd jw;
  MatrixXd hw;
  VectorXd mm;     // L^{-1} mu(Xt)
  VectorXd phi;
};

Blocks make_blocks(const NystromCache& cache, const VectorXd& y, const AuxiliaryDistribution& aux) {
  Blocks s;
  const MatrixXd& a = cache.a;
  s.r = symmetrize(a * a.transpose());
  s.binv = inverse_psd(cache.chol_b);
  s.d = symmetrize(s.binv * s.binv);
  s.t = aux.cov_times(a.transpose());
  s.vw = symmetrize(a * s.t);
  s.e = aux.mu_x() - y;
  s.ae = a * s.e;
  s.kh_xm = aux.cov_train_cross(cache.inducing);
  s.jw = solve_lower(cache.chol_mm, MatrixXd(s.kh_xm.transpose() * a.transpose()));
  const MatrixXd h1 = solve_lower(cache.chol_mm, aux.cov_cross(cache.inducing, cache.inducing));
  s.hw = symmetrize(solve_lower(cache.chol_mm, MatrixXd(h1.transpose())));
  s.mm = solve_lower(cache.chol_mm, MatrixXd(aux.mean_at(cache.inducing))).col(0);
  s.phi = a * aux.mu_x() - s.r * s.mm;
  return s;
}

PfTerms terms_from_blocks(const Blocks& s) {
  PfTerms t;
  t.term_I = -s.vw.trace() - s.ae.squaredNorm();
  t.term_IIa = trace_product(s.d, s.vw) + trace_product(s.d * s.r, s.hw * s.r);
  t.term_IIb = -2.0 * trace_product(s.d * s.r, s.jw);
  t.term_III = s.phi.dot(s.d * s.phi);
  t.relative_objective = t.term_I + t.term_IIa + t.term_IIb + t.term_III;
  return t;
}

MatrixXd gradient_from_blocks(const NystromCache& cache, const Blocks& s,
                              const AuxiliaryDistribution& aux, const KernelParams& p) {
  const double s2 = p.noise_variance;
  const MatrixXd& a = cache.a;

  MatrixXd vw_bar = s.d;
  vw_bar.diagonal().array() -= 1.0;
  const VectorXd ae_bar = -2.0 * s.ae;
  const VectorXd phi_bar = 2.0 * s.d * s.phi;
  const MatrixXd rd = s.r * s.d;
  MatrixXd d_bar = s.vw + s.r * s.hw * s.r - 2.0 * (s.r * s.jw).transpose() + s.phi * s.phi.transpose();
  MatrixXd r_bar = (s.hw * s.r * s.d).transpose() + (s.d * s.r * s.hw).transpose() -
                   2.0 * (s.jw * s.d).transpose() - phi_bar * s.mm.transpose();
  const MatrixXd hw_bar = rd * s.r;
  const MatrixXd jw_bar = -2.0 * rd;
  const VectorXd mx_bar = phi_bar;
  const VectorXd mm_bar = -s.r * phi_bar;

  // D = Binv Binv, B = I + R / s2
  const MatrixXd binv_bar = d_bar * s.binv + s.binv * d_bar;
  r_bar -= (s.binv * binv_bar * s.binv) / s2;

  const MatrixXd y_bar = detail::solve_upper(cache.chol_mm, jw_bar);
  MatrixXd a_bar = (r_bar + r_bar.transpose()) * a;
  a_bar.noalias() += (vw_bar + vw_bar.transpose()) * s.t.transpose();
  a_bar.noalias() += ae_bar * s.e.transpose();
  a_bar.noalias() += mx_bar * aux.mu_x().transpose();
  a_bar.noalias() += y_bar.transpose() * s.kh_xm.transpose();

  MatrixXd m_bar = jw_bar * s.jw.transpose();
  m_bar.noalias() += hw_bar * s.hw.transpose() + hw_bar.transpose() * s.hw;
  m_bar.noalias() += mm_bar * s.mm.transpose();

  const MatrixXd khxm_bar = a.transpose() * y_bar.transpose();
  const MatrixXd khmm_bar =
      detail::solve_upper(cache.chol_mm, MatrixXd(detail::solve_upper(cache.chol_mm, hw_bar).transpose()))
          .transpose();
  const VectorXd mum_bar = detail::solve_upper(cache.chol_mm, MatrixXd(mm_bar)).col(0);

  const MatrixXd& xt = cache.inducing;
  MatrixXd grad = MatrixXd::Zero(xt.rows(), xt.cols());
  detail::backprop_whitened(cache, aux.train_points(), a_bar, m_bar, p, grad);

  // Khat(X, Xt) = alpha k_XM + beta F_X^T F_M; Khat(Xt, Xt) = alpha k_MM + beta F_M^T F_M;
  // mu(Xt) = F_M^T u; F_M = Lf^{-1} k_HM.
  const MatrixXd khm = detail::kernel_cross(aux.aux_points(), xt, p);
  const MatrixXd fm = solve_lower(aux.aux_solve(), khm);
  MatrixXd fm_bar = aux.beta() * (aux.features_x() * khxm_bar);
  fm_bar.noalias() += aux.beta() * (fm * (khmm_bar + khmm_bar.transpose()));
  fm_bar.noalias() += aux.mean_coeffs() * mum_bar.transpose();
  const MatrixXd khm_bar = detail::solve_upper(aux.aux_solve(), fm_bar);
  detail::accumulate_input_gradient(xt, aux.aux_points(), khm.transpose(), khm_bar.transpose(), p, grad);
  if (aux.alpha() != 0.0) {
    detail::accumulate_input_gradient(xt, aux.train_points(), cache.k_xm.transpose(),
                                      aux.alpha() * khxm_bar.transpose(), p, grad);
    detail::accumulate_input_gradient(xt, xt, cache.k_mm, aux.alpha() * (khmm_bar + khmm_bar.transpose()), p,
                                      grad);
  }
  return grad;
}

}  // namespace

PfEvaluation pf_dtc_evaluate(const NystromCache& cache, const VectorXd& y,
                             const AuxiliaryDistribution& aux, const KernelParams& p,
                             bool with_gradient) {
  check_objective_inputs(cache, y, aux, p);
  const Blocks s = make_blocks(cache, y, aux);
  PfEvaluation out;
  out.terms = terms_from_blocks(s);
  if (with_gradient) out.gradient = gradient_from_blocks(cache, s, aux, p);
  return out;
}

PfTerms pf_dtc_objective(const NystromCache& cache, const VectorXd& y,
                         const AuxiliaryDistribution& aux, const KernelParams& p) {
  return pf_dtc_evaluate(cache, y, aux, p, false).terms;
}

MatrixXd pf_dtc_gradient(const NystromCache& cache, const VectorXd& y,
                         const AuxiliaryDistribution& aux, const KernelParams& p) {
  return pf_dtc_evaluate(cache, y, aux, p, true).gradient;
}

double pf_dtc_objective_full(const InputSet& x, const VectorXd& y, const InducingSet& xt,
                             const AuxiliaryDistribution& aux, const KernelParams& p) {
  p.validate();
  const Index n = x.size();
  if (n > aux.validation_cap()) {
    std::ostringstream os;
    os << "pf_dtc_objective_full is dense; N=" << n << " exceeds cap " << aux.validation_cap();
    throw Error(ErrorCode::kValidationModeRequired, os.str());
  }
  if (y.size() != n || aux.n() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "pf_dtc_objective_full: inconsistent N");
  }
  const double s2 = p.noise_variance;
  const MatrixXd& xp = x.points();
  const MatrixXd k = detail::kernel_self(xp, p);
  const MatrixXd kxm = detail::kernel_cross(xp, xt.points, p);
  const CholFactor lm = chol_psd(detail::kernel_self(xt.points, p));
  const MatrixXd qbar = solve_psd(lm, MatrixXd(kxm.transpose())).transpose();
  const MatrixXd whitened = solve_lower(lm, MatrixXd(kxm.transpose()));
  const MatrixXd q = symmetrize(whitened.transpose() * whitened);

  MatrixXd q_noise = q;
  q_noise.diagonal().array() += s2;
  const CholFactor lq = chol_psd(q_noise);
  const MatrixXd t = solve_psd(lq, q);
  const MatrixXd s = symmetrize(s2 * s2 * solve_psd(lq, MatrixXd(t.transpose())).transpose());

  const MatrixXd kh_xx = aux.cov_cross(xp, xp);
  const MatrixXd kh_xm = aux.cov_cross(xp, xt.points);
  const MatrixXd kh_mm = aux.cov_cross(xt.points, xt.points);
  const VectorXd mu_x = aux.mean_at(xp);
  const VectorXd mu_m = aux.mean_at(xt.points);

  const VectorXd e = mu_x - y;
  const VectorXd d = mu_x - qbar * mu_m;
  const MatrixXd cross = kh_xm * qbar.transpose();
  const MatrixXd cov_b = kh_xx - cross - cross.transpose() + qbar * kh_mm * qbar.transpose();

  const MatrixXd resid_second = kh_xx + e * e.transpose();
  return trace_product(resid_second, k - q) + trace_product(s, cov_b) + d.dot(s * d);
}

double pf_constant_term(const VectorXd& y, const AuxiliaryDistribution& aux, const KernelParams& p) {
  if (y.size() != aux.n()) throw Error(ErrorCode::kDimensionMismatch, "pf_constant_term: N mismatch");
  const MatrixXd& xp = aux.train_points();
  const VectorXd e = aux.mu_x() - y;
  double total = 0.0;
  for (Index r0 = 0; r0 < aux.n(); r0 += kRowBlock) {
    const Index rows = std::min(kRowBlock, aux.n() - r0);
    const MatrixXd blk = xp.middleRows(r0, rows);
    const MatrixXd k_blk = detail::kernel_cross(blk, xp, p);
    const MatrixXd kh_blk = aux.cov_cross(blk, xp);
    total += k_blk.cwiseProduct(kh_blk).sum();
    total += e.segment(r0, rows).dot(k_blk * e);
  }
  return total;
}

double pf_divergence_from_scaled(double scaled_squared, double noise_variance) {
  return std::sqrt(std::max(scaled_squared, 0.0)) / noise_variance;
}

double subset_log_density_ratio(const InputSet& x, const VectorXd& y, const std::vector<Index>& rows,
                                const KernelParams& p) {
  check_subset(x, y, rows, p);
  const auto n = static_cast<double>(x.size());
  const auto m_aux = static_cast<double>(rows.size());
  const double log_zh = log_marginal_likelihood(x.subset(rows), gather(y, rows), p);
  const double log_z = log_marginal_likelihood(x, y, p);
  return log_zh - 0.5 * (n - m_aux) * std::log(2.0 * std::numbers::pi * p.noise_variance) - log_z;
}

EpsBound eps_bound(const InputSet& x, const VectorXd& y, const AuxiliaryDistribution& aux,
                   const KernelParams& p, double pf_value) {
  if (aux.kind() != AuxKind::kSubsetOfData) {
    throw Error(ErrorCode::kAuxKindUnsupported, "eps_bound needs a subset-of-data aux");
  }
  if (!(pf_value >= 0.0)) throw Error(ErrorCode::kNegativeEps, "eps_bound: pf_value must be >= 0");
  EpsBound out;
  out.pf_value = pf_value;
  out.log_density_ratio_bound = subset_log_density_ratio(x, y, aux.indices(), p);
  out.eps = pf_value == 0.0 ? 0.0 : std::exp(0.5 * out.log_density_ratio_bound) * pf_value;
  return out;
}

PointwiseBounds pointwise_bounds(double eps, const VectorXd& k_diag_star, const VectorXd& k_under_star) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::kNegativeEps, "pointwise_bounds: eps must be >= 0");
  if (k_diag_star.size() != k_under_star.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "pointwise_bounds: vector lengths differ");
  }
  const Eigen::ArrayXd r_sqrt = k_diag_star.array().max(0.0).sqrt();
  PointwiseBounds b;
  b.mean_bound = (r_sqrt * eps).matrix();
  b.std_bound = (std::sqrt(6.0) * r_sqrt * eps).matrix();
  b.var_bound = (3.0 * r_sqrt * k_under_star.array().max(0.0).sqrt() * eps +
                 6.0 * k_diag_star.array().max(0.0) * eps * eps)
                    .matrix();
  return b;
}

ImportanceEstimate eps_importance_estimate(const InputSet& x, const VectorXd& y,
                                           const InducingSet& xt, const AuxiliaryDistribution& aux,
                                           const KernelParams& p, Index n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw Error(ErrorCode::kInvalidArgument, "eps_importance_estimate: need >= 2 samples");
  const Index n = x.size();
  const Index m = xt.size();
  if (y.size() != n || aux.n() != n) throw Error(ErrorCode::kDimensionMismatch, "eps_importance_estimate: N");
  const double s2 = p.noise_variance;

  MatrixXd z(n + m, x.dim());
  z << x.points(), xt.points;
  const bool from_aux = aux.kind() == AuxKind::kSubsetOfData;
  VectorXd mean;
  MatrixXd cov;
  if (from_aux) {
    mean = aux.mean_at(z);
    cov = aux.cov_cross(z, z);
  } else {
    const GaussianPosterior post = predict_exact(fit_exact(x, y, p), InputSet(z));
    mean = post.mean;
    cov = post.cov;
  }
  const CholFactor lz = chol_psd(symmetrize(cov), JitterPolicy{1e-10, 1e-2, 10.0, 1e-8});

  const NystromCache cache = build_nystrom(x, xt, p);
  const MatrixXd a = cache.k_xm * cache.sigma_tilde_matrix();
  MatrixXd pm = cache.k_mm;
  pm.diagonal().array() += cache.chol_mm.jitter_used;
  const MatrixXd s = symmetrize(a * pm * a.transpose());
  const MatrixXd e = detail::kernel_self(x.points(), p) - symmetrize(cache.qbar * cache.k_xm.transpose());

  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  for (Index i : aux.indices()) kept[static_cast<std::size_t>(i)] = true;

  Rng rng(seed);
  std::vector<double> values;
  std::vector<double> log_w;
  values.reserve(static_cast<std::size_t>(n_samples));
  log_w.reserve(static_cast<std::size_t>(n_samples));
  constexpr Index kBatch = 4096;
  for (Index done = 0; done < n_samples; done += kBatch) {
    const Index cols = std::min(kBatch, n_samples - done);
    MatrixXd f = lz.lower.triangularView<Eigen::Lower>() * standard_normal(n + m, cols, rng);
    f.colwise() += mean;
    const MatrixXd resid = f.topRows(n).colwise() - y;
    const MatrixXd bvec = f.topRows(n) - cache.qbar * f.bottomRows(m);
    const MatrixXd e_r = e * resid;
    const MatrixXd s_b = s * bvec;
    for (Index c = 0; c < cols; ++c) {
      values.push_back(resid.col(c).dot(e_r.col(c)) + bvec.col(c).dot(s_b.col(c)));
      double lw = 0.0;
      if (from_aux) {
        for (Index i = 0; i < n; ++i) {
          if (!kept[static_cast<std::size_t>(i)]) lw -= resid(i, c) * resid(i, c) / (2.0 * s2);
        }
      }
      log_w.push_back(lw);
    }
  }
  const double lw_max = *std::max_element(log_w.begin(), log_w.end());
  double w_sum = 0.0;
  for (double& lw : log_w) {
    lw = std::exp(lw - lw_max);
    w_sum += lw;
  }
  double est = 0.0;
  double w2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double wi = log_w[i] / w_sum;
    est += wi * values[i];
    w2 += wi * wi;
  }
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double wi = log_w[i] / w_sum;
    var += wi * wi * (values[i] - est) * (values[i] - est);
  }
  ImportanceEstimate out;
  out.scaled_squared = est;
  out.std_error = std::sqrt(var);
  out.effective_sample_size = 1.0 / w2;
  return out;
}

}  // namespace pfgp
