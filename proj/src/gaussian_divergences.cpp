#include "pfgp/gaussian_divergences.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "pfgp/error.hpp"

namespace pfgp {

namespace {

CholFactor strict_chol(const MatrixXd& cov, const char* what) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance, std::string(what) + ": covariance is not positive definite");
  }
  CholFactor f;
  f.lower = llt.matrixL();
  return f;
}

void check_dims(const GaussianNd& a, const GaussianNd& b, const char* what) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": dimensions differ");
}

}  // namespace

void GaussianNd::validate() const {
  if (mean.size() < 1 || cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "GaussianNd: mean and covariance shapes disagree");
  }
  if (!mean.allFinite() || !cov.allFinite()) throw Error(ErrorCode::kInvalidArgument, "GaussianNd: non-finite entries");
  if (!is_symmetric(cov, 1e-12)) throw Error(ErrorCode::kNotSymmetric, "GaussianNd: covariance not symmetric");
  strict_chol(cov, "GaussianNd");
}

GaussianNd GaussianNd::scalar(double mean, double variance) {
  GaussianNd g;
  g.mean = VectorXd::Constant(1, mean);
  g.cov = MatrixXd::Constant(1, 1, variance);
  return g;
}

double kl_gaussian(const GaussianNd& a, const GaussianNd& b) {
  check_dims(a, b, "kl_gaussian");
  const CholFactor la = strict_chol(a.cov, "kl_gaussian");
  const CholFactor lb = strict_chol(b.cov, "kl_gaussian");
  const auto d = static_cast<double>(a.dim());
  const MatrixXd m = solve_lower(lb, la.lower);
  const VectorXd diff = solve_lower(lb, MatrixXd(b.mean - a.mean)).col(0);
  return 0.5 * (m.squaredNorm() - d + log_det(lb) - log_det(la) + diff.squaredNorm());
}

GaussianNd prop1_construct(double delta, double mu_tilde, double s_tilde2) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kNonPositiveDelta, "prop1_construct: delta must be > 0");
  if (!(s_tilde2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "prop1_construct: variance must be > 0");
  const double s2 = std::exp(2.0 * delta) * s_tilde2;
  const double mu = mu_tilde + std::sqrt(s_tilde2) * std::sqrt(std::expm1(2.0 * delta));
  return GaussianNd::scalar(mu, s2);
}

double w2_gaussian(const GaussianNd& a, const GaussianNd& b) {
  check_dims(a, b, "w2_gaussian");
  const MatrixXd ra = sqrtm_psd(a.cov);
  const MatrixXd cross = sqrtm_psd(symmetrize(ra * b.cov * ra));
  const double bures = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(0.0, (a.mean - b.mean).squaredNorm() + std::max(0.0, bures)));
}

double fisher_distance_gaussian(const GaussianNd& a, const GaussianNd& b, const GaussianNd& nu) {
  check_dims(a, b, "fisher_distance_gaussian");
  check_dims(a, nu, "fisher_distance_gaussian");
  const CholFactor la = strict_chol(a.cov, "fisher_distance_gaussian");
  const CholFactor lb = strict_chol(b.cov, "fisher_distance_gaussian");
  const MatrixXd pa = inverse_psd(la);
  const MatrixXd pb = inverse_psd(lb);
  const MatrixXd dmat = pb - pa;
  const VectorXd h = pa * a.mean - pb * b.mean;
  const double quad = (dmat * nu.mean + h).squaredNorm();
  const double tr = trace_product(dmat * nu.cov, dmat.transpose());
  return std::sqrt(std::max(0.0, quad + tr));
}

Prop3Check prop3_bound_check(const GaussianNd& a, const GaussianNd& b, double c_inflate) {
  if (!(c_inflate > 1.0)) throw Error(ErrorCode::kInflateNotAboveOne, "prop3_bound_check: c_inflate must be > 1");
  check_dims(a, b, "prop3_bound_check");
  GaussianNd nu{a.mean, c_inflate * a.cov};
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(b.cov), Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().cwiseAbs().minCoeff();
  const double lambda_max = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lambda_min > 0.0)) throw Error(ErrorCode::kSingularCovariance, "prop3_bound_check: singular cov_b");
  Prop3Check out;
  out.density_ratio_sup = std::pow(c_inflate, 0.5 * static_cast<double>(a.dim()));
  const double fisher = fisher_distance_gaussian(a, b, nu);
  const double scale = std::sqrt(out.density_ratio_sup) * fisher;
  out.lhs = w2_gaussian(a, b);
  out.rhs = scale / lambda_min;
  out.rhs_lambda_max = scale * lambda_max;
  return out;
}

Example1Forms example1_closed_forms(double t, double t_tilde, double sigma2, double k00, double r00,
                                    double mu_hat0) {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "example1: sigma2 must be > 0");
  if (!(k00 >= 0.0) || !(r00 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "example1: kernel values must be >= 0");
  Example1Forms out;
  const double shrink = 1.0 / (1.0 + sigma2);
  // Gelbrich with equal covariance operators: the mean-function gap.
  out.w2 = std::sqrt(k00) * std::abs(shrink * t - shrink * t_tilde);
  // Expanded score expectations around the auxiliary mean.
  const double u = t - mu_hat0;
  const double v = t_tilde - mu_hat0;
  const double expanded = u * u + v * v - 2.0 * u * v;
  out.fisher = std::sqrt(r00 * std::max(0.0, expanded)) / sigma2;
  out.pf = std::sqrt(shrink * shrink * k00 * std::max(0.0, expanded));
  out.fisher_over_w2 = out.w2 > 0.0 ? out.fisher / out.w2 : 0.0;
  return out;
}

}  // namespace pfgp
