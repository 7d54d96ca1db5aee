#include "pfgp/sparse_gp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/random.hpp"

namespace pfgp {

InducingSet::InducingSet(MatrixXd pts) : points(std::move(pts)) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "inducing set must have M >= 1 points");
  }
  if (!points.allFinite()) throw Error(ErrorCode::kInvalidArgument, "inducing set contains NaN or Inf");
}

double InducingSet::min_scaled_separation(const KernelParams& p) const {
  double best = std::numeric_limits<double>::infinity();
  const VectorXd inv_l = p.lengthscales.cwiseInverse();
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = i + 1; j < points.rows(); ++j) {
      const double dist = (points.row(i) - points.row(j)).cwiseProduct(inv_l.transpose()).norm();
      best = std::min(best, dist);
    }
  }
  return best;
}

MatrixXd NystromCache::k_mm_inverse() const { return inverse_psd(chol_mm); }

MatrixXd NystromCache::sigma_tilde_matrix() const {
  const MatrixXd t = sigma_tilde.lower.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(m(), m()));
  return symmetrize(t.transpose() * t);
}

NystromCache build_nystrom(const InputSet& x, const InducingSet& xt, const KernelParams& p) {
  p.validate();
  detail::require_dim(x.points(), p, "build_nystrom");
  detail::require_dim(xt.points, p, "build_nystrom");
  NystromCache c;
  c.inducing = xt.points;
  c.noise_variance = p.noise_variance;
  c.m_exceeds_n = xt.size() > x.size();
  if (c.m_exceeds_n) {
    std::clog << "warning: build_nystrom with M=" << xt.size() << " > N=" << x.size() << '\n';
  }
  c.k_xm = detail::kernel_cross(x.points(), xt.points, p);
  c.k_mm = detail::kernel_self(xt.points, p);
  c.chol_mm = chol_psd(c.k_mm);
  const MatrixXd k_mx = c.k_xm.transpose();
  c.qbar = solve_psd(c.chol_mm, k_mx).transpose();
  c.a = solve_lower(c.chol_mm, k_mx);
  MatrixXd b = MatrixXd::Identity(c.m(), c.m());
  b.noalias() += (c.a * c.a.transpose()) / p.noise_variance;
  c.chol_b = chol_psd(symmetrize(b));
  c.sigma_tilde.lower = c.chol_mm.lower.triangularView<Eigen::Lower>() * c.chol_b.lower;
  c.sigma_tilde.jitter_used = c.chol_mm.jitter_used;
  return c;
}

namespace detail {

MatrixXd solve_upper(const CholFactor& factor, const MatrixXd& b) {
  return factor.lower.transpose().triangularView<Eigen::Upper>().solve(b);
}

void backprop_whitened(const NystromCache& cache, const MatrixXd& x_points, const MatrixXd& a_bar,
                       const MatrixXd& m_bar, const KernelParams& p, MatrixXd& grad) {
  const MatrixXd kmx_bar = solve_upper(cache.chol_mm, a_bar);
  const MatrixXd total = a_bar * cache.a.transpose() + m_bar;
  const MatrixXd left = solve_upper(cache.chol_mm, total);
  const MatrixXd p_bar = -0.5 * solve_upper(cache.chol_mm, MatrixXd(left.transpose())).transpose();
  accumulate_input_gradient(cache.inducing, x_points, cache.k_xm.transpose(), kmx_bar, p, grad);
  accumulate_input_gradient(cache.inducing, cache.inducing, cache.k_mm, p_bar + p_bar.transpose(), p, grad);
}

}  // namespace detail

namespace {

void check_cache(const NystromCache& cache, const InputSet& x, const VectorXd& y,
                 const InputSet& xstar, const KernelParams& p, const char* what) {
  if (x.size() != cache.n() || y.size() != cache.n()) {
    std::ostringstream os;
    os << what << ": cache built for N=" << cache.n() << ", got " << x.size() << " inputs and "
       << y.size() << " targets";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  detail::require_dim(xstar.points(), p, what);
}

struct ProjectedTest {
  MatrixXd a;  // L^{-1} k_M*
  MatrixXd c;  // B^{-1/2} a
  VectorXd mean;
};

ProjectedTest project_test(const NystromCache& cache, const VectorXd& y, const InputSet& xstar,
                           const KernelParams& p) {
  ProjectedTest out;
  const MatrixXd k_ms = detail::kernel_cross(cache.inducing, xstar.points(), p);
  out.a = solve_lower(cache.chol_mm, k_ms);
  out.c = solve_lower(cache.chol_b, out.a);
  const VectorXd r = solve_lower(cache.chol_b, solve_lower(cache.chol_mm, cache.k_xm.transpose() * y));
  out.mean = (out.c.transpose() * r) / p.noise_variance;
  return out;
}

}  // namespace

GaussianPosterior dtc_predict(const NystromCache& cache, const InputSet& x, const VectorXd& y,
                              const InputSet& xstar, const KernelParams& p) {
  check_cache(cache, x, y, xstar, p, "dtc_predict");
  const ProjectedTest t = project_test(cache, y, xstar, p);
  GaussianPosterior out;
  out.mean = t.mean;
  out.cov = symmetrize(detail::kernel_self(xstar.points(), p) - t.a.transpose() * t.a +
                       t.c.transpose() * t.c);
  return out;
}

GaussianMarginals dtc_predict_marginals(const NystromCache& cache, const InputSet& x,
                                        const VectorXd& y, const InputSet& xstar,
                                        const KernelParams& p) {
  check_cache(cache, x, y, xstar, p, "dtc_predict_marginals");
  const ProjectedTest t = project_test(cache, y, xstar, p);
  GaussianMarginals out;
  out.mean = t.mean;
  out.var = (p.signal_variance - t.a.colwise().squaredNorm().array() + t.c.colwise().squaredNorm().array())
                .cwiseMax(0.0)
                .matrix()
                .transpose();
  return out;
}

GaussianPosterior sor_predict(const NystromCache& cache, const InputSet& x, const VectorXd& y,
                              const InputSet& xstar, const KernelParams& p) {
  check_cache(cache, x, y, xstar, p, "sor_predict");
  const ProjectedTest t = project_test(cache, y, xstar, p);
  GaussianPosterior out;
  out.mean = t.mean;
  out.cov = symmetrize(t.c.transpose() * t.c);
  return out;
}

GaussianMarginals sor_predict_marginals(const NystromCache& cache, const InputSet& x,
                                        const VectorXd& y, const InputSet& xstar,
                                        const KernelParams& p) {
  check_cache(cache, x, y, xstar, p, "sor_predict_marginals");
  const ProjectedTest t = project_test(cache, y, xstar, p);
  GaussianMarginals out;
  out.mean = t.mean;
  out.var = t.c.colwise().squaredNorm().transpose();
  return out;
}

GaussianPosterior subsample_predict(const InputSet& x, const VectorXd& y,
                                    const std::vector<Index>& subset, const InputSet& xstar,
                                    const KernelParams& p) {
  if (subset.empty()) throw Error(ErrorCode::kIndexOutOfRange, "subsample_predict: empty subset");
  if (y.size() != x.size()) throw Error(ErrorCode::kDimensionMismatch, "subsample_predict: |y| != N");
  std::set<Index> seen;
  VectorXd ys(static_cast<Index>(subset.size()));
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const Index r = subset[i];
    if (r < 0 || r >= x.size() || !seen.insert(r).second) {
      throw Error(ErrorCode::kIndexOutOfRange, "subsample_predict: indices must be distinct and in range");
    }
    ys[static_cast<Index>(i)] = y[r];
  }
  return predict_exact(fit_exact(x.subset(subset), ys, p), xstar);
}

double vfe_elbo(const NystromCache& cache, const VectorXd& y, const KernelParams& p) {
  if (y.size() != cache.n()) throw Error(ErrorCode::kDimensionMismatch, "vfe_elbo: |y| != N");
  const double n = static_cast<double>(cache.n());
  const double s2 = p.noise_variance;
  const MatrixXd a = solve_lower(cache.chol_mm, cache.k_xm.transpose());
  const double trace_q = a.squaredNorm();
  const VectorXd r = solve_lower(cache.chol_b, a * y);
  const double quad = y.squaredNorm() / s2 - r.squaredNorm() / (s2 * s2);
  const double logdet = n * std::log(s2) + log_det(cache.chol_b);
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad) -
         (n * p.signal_variance - trace_q) / (2.0 * s2);
}

double vfe_elbo(const InputSet& x, const VectorXd& y, const InducingSet& xt, const KernelParams& p) {
  if (y.size() != x.size()) throw Error(ErrorCode::kDimensionMismatch, "vfe_elbo: |y| != N");
  return vfe_elbo(build_nystrom(x, xt, p), y, p);
}

ValueAndGradient vfe_elbo_with_gradient(const InputSet& x, const VectorXd& y,
                                        const InducingSet& xt, const KernelParams& p) {
  if (y.size() != x.size()) throw Error(ErrorCode::kDimensionMismatch, "vfe_elbo: |y| != N");
  const NystromCache cache = build_nystrom(x, xt, p);
  ValueAndGradient out;
  out.value = vfe_elbo(cache, y, p);

  // Reverse pass through R = A A^T and r = A y, then the whitening.
  const double s2 = p.noise_variance;
  const MatrixXd binv = inverse_psd(cache.chol_b);
  const VectorXd r = cache.a * y;
  const VectorXd binv_r = binv * r;
  const MatrixXd b_bar = -0.5 * binv - (0.5 / (s2 * s2)) * binv_r * binv_r.transpose();
  MatrixXd r_mat_bar = b_bar / s2;
  r_mat_bar.diagonal().array() += 0.5 / s2;
  const VectorXd r_bar = binv_r / (s2 * s2);
  const MatrixXd a_bar = (r_mat_bar + r_mat_bar.transpose()) * cache.a + r_bar * y.transpose();
  out.gradient = MatrixXd::Zero(xt.size(), p.dim());
  detail::backprop_whitened(cache, x.points(), a_bar, MatrixXd::Zero(cache.m(), cache.m()), p, out.gradient);
  return out;
}

PilotResult fit_hyperparams_pilot(const InputSet& x, const VectorXd& y, const PilotConfig& config) {
  if (y.size() != x.size()) throw Error(ErrorCode::kDimensionMismatch, "pilot: |y| != N");
  if (config.m_pilot < 1 || config.m_pilot > x.size()) {
    throw Error(ErrorCode::kInvalidArgument, "pilot: need 1 <= M_pilot <= N");
  }
  const Index d = x.dim();
  PilotResult out;
  out.inducing_rows = random_subset(x.size(), config.m_pilot, config.seed);
  const InducingSet xt(x.subset(out.inducing_rows).points());

  const double var_y = std::max((y.array() - y.mean()).square().mean(), 1e-12);
  const double noise_floor = config.noise_floor_fraction * var_y;

  auto to_params = [&](const VectorXd& theta) {
    KernelParams p;
    p.lengthscales = theta.head(d).array().max(-30.0).min(30.0).exp().matrix();
    p.signal_variance = std::exp(std::clamp(theta[d], -30.0, 30.0));
    p.noise_variance = std::max(std::exp(std::clamp(theta[d + 1], -30.0, 30.0)), noise_floor);
    return p;
  };

  VectorXd theta0(d + 2);
  for (Index k = 0; k < d; ++k) {
    const auto col = x.points().col(k).array();
    const double sd = std::sqrt((col - col.mean()).square().mean());
    theta0[k] = std::log(sd > 0.0 ? sd : 1.0);
  }
  theta0[d] = std::log(var_y);
  theta0[d + 1] = std::log(std::max(0.1 * var_y, noise_floor));

  auto objective = [&](const VectorXd& theta) { return -vfe_elbo(x, y, xt, to_params(theta)); };
  const double initial = objective(theta0);
  if (!std::isfinite(initial)) {
    throw Error(ErrorCode::kOptimizerDiverged, "pilot: non-finite ELBO at initialization");
  }
  const NelderMeadResult nm = nelder_mead_minimize(objective, theta0, config.simplex);
  if (!std::isfinite(nm.value)) {
    throw Error(ErrorCode::kOptimizerDiverged, "pilot: non-finite ELBO at the optimum");
  }
  out.params = to_params(nm.x);
  out.elbo_initial = -initial;
  out.elbo_final = -nm.value;
  out.evaluations = nm.evaluations;
  return out;
}

}  // namespace pfgp
