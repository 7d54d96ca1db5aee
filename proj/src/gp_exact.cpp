#include "pfgp/gp_exact.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pfgp/error.hpp"

namespace pfgp {

namespace {

void check_training(const InputSet& x, const VectorXd& y, const KernelParams& p, Index max_n) {
  p.validate();
  detail::require_dim(x.points(), p, "fit_exact");
  if (y.size() != x.size()) {
    std::ostringstream os;
    os << "fit_exact: " << x.size() << " inputs but " << y.size() << " targets";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  if (x.size() > max_n) {
    std::ostringstream os;
    os << "fit_exact: N=" << x.size() << " exceeds the exact-GP cap " << max_n;
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
}

CholFactor noisy_gram_factor(const InputSet& x, const KernelParams& p) {
  MatrixXd k = detail::kernel_self(x.points(), p);
  k.diagonal().array() += p.noise_variance;
  return chol_psd(k);
}

}  // namespace

ExactPosterior fit_exact(const InputSet& x, const VectorXd& y, const KernelParams& p,
                         Index max_n) {
  check_training(x, y, p, max_n);
  ExactPosterior post{x, VectorXd(), noisy_gram_factor(x, p), p};
  post.alpha = solve_psd(post.chol, y);
  return post;
}

GaussianPosterior predict_exact(const ExactPosterior& post, const InputSet& xstar) {
  detail::require_dim(xstar.points(), post.params, "predict_exact");
  const MatrixXd k_xs = detail::kernel_cross(post.train_inputs.points(), xstar.points(), post.params);
  const MatrixXd v = solve_lower(post.chol, k_xs);
  GaussianPosterior out;
  out.mean = k_xs.transpose() * post.alpha;
  out.cov = symmetrize(detail::kernel_self(xstar.points(), post.params) - v.transpose() * v);
  return out;
}

GaussianMarginals predict_exact_marginals(const ExactPosterior& post, const InputSet& xstar) {
  detail::require_dim(xstar.points(), post.params, "predict_exact_marginals");
  const MatrixXd k_xs = detail::kernel_cross(post.train_inputs.points(), xstar.points(), post.params);
  const MatrixXd v = solve_lower(post.chol, k_xs);
  GaussianMarginals out;
  out.mean = k_xs.transpose() * post.alpha;
  out.var = (post.params.signal_variance - v.colwise().squaredNorm().array()).cwiseMax(0.0).matrix().transpose();
  return out;
}

double log_marginal_likelihood(const InputSet& x, const VectorXd& y, const KernelParams& p,
                               Index max_n) {
  check_training(x, y, p, max_n);
  const CholFactor f = noisy_gram_factor(x, p);
  const VectorXd alpha = solve_psd(f, y);
  const double n = static_cast<double>(x.size());
  return -0.5 * y.dot(alpha) - 0.5 * log_det(f) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace pfgp
