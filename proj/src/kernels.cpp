#include "pfgp/kernels.hpp"

#include <cmath>
#include <sstream>

#include "pfgp/error.hpp"

namespace pfgp {

void KernelParams::validate() const {
  if (lengthscales.size() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "kernel params: need at least one lengthscale");
  }
  for (Index i = 0; i < lengthscales.size(); ++i) {
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i])) {
      throw Error(ErrorCode::kInvalidArgument, "kernel params: lengthscales must be positive");
    }
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel params: signal variance must be positive");
  }
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel params: noise variance must be positive");
  }
}

KernelParams KernelParams::isotropic(Index dim, double lengthscale, double signal_variance,
                                     double noise_variance) {
  KernelParams p;
  p.lengthscales = VectorXd::Constant(dim, lengthscale);
  p.signal_variance = signal_variance;
  p.noise_variance = noise_variance;
  return p;
}

InputSet::InputSet(MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "input set must have N >= 1 rows and d >= 1 columns");
  }
  if (!points_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "input set contains NaN or Inf");
  }
}

InputSet InputSet::subset(const std::vector<Index>& rows) const {
  MatrixXd out(static_cast<Index>(rows.size()), points_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= points_.rows()) {
      std::ostringstream os;
      os << "row index " << rows[i] << " outside [0, " << points_.rows() << ")";
      throw Error(ErrorCode::kIndexOutOfRange, os.str());
    }
    out.row(static_cast<Index>(i)) = points_.row(rows[i]);
  }
  return InputSet(std::move(out));
}

namespace detail {

void require_dim(const MatrixXd& points, const KernelParams& p, const char* what) {
  if (points.cols() != p.dim()) {
    std::ostringstream os;
    os << what << ": points have d=" << points.cols() << " but kernel has " << p.dim()
       << " lengthscales";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
}

MatrixXd kernel_cross(const MatrixXd& a, const MatrixXd& b, const KernelParams& p) {
  const Index d = p.dim();
  const VectorXd inv_l2 = p.lengthscales.array().square().inverse();
  MatrixXd out(a.rows(), b.rows());
  // Column-major output: iterate b in the outer loop.
  for (Index j = 0; j < b.rows(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      double r2 = 0.0;
      for (Index k = 0; k < d; ++k) {
        const double diff = a(i, k) - b(j, k);
        r2 += diff * diff * inv_l2[k];
      }
      out(i, j) = p.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return out;
}

MatrixXd kernel_self(const MatrixXd& a, const KernelParams& p) {
  const MatrixXd k = kernel_cross(a, a, p);
  return 0.5 * (k + k.transpose());
}

void accumulate_input_gradient(const MatrixXd& moving, const MatrixXd& fixed,
                               const MatrixXd& k_mf, const MatrixXd& adjoint,
                               const KernelParams& p, MatrixXd& grad) {
  // d k(m, f) / d m = k(m, f) (f - m) / l^2 per coordinate.
  const MatrixXd w = adjoint.cwiseProduct(k_mf);
  const VectorXd row_sum = w.rowwise().sum();
  MatrixXd g = w * fixed - row_sum.asDiagonal() * moving;
  const VectorXd inv_l2 = p.lengthscales.array().square().inverse();
  grad += g * inv_l2.asDiagonal();
}

}  // namespace detail

MatrixXd kernel_matrix(const InputSet& a, const InputSet& b, const KernelParams& p) {
  p.validate();
  detail::require_dim(a.points(), p, "kernel_matrix");
  detail::require_dim(b.points(), p, "kernel_matrix");
  if (&a == &b) return detail::kernel_self(a.points(), p);
  return detail::kernel_cross(a.points(), b.points(), p);
}

VectorXd kernel_diag(const InputSet& a, const KernelParams& p) {
  p.validate();
  detail::require_dim(a.points(), p, "kernel_diag");
  return VectorXd::Constant(a.size(), p.signal_variance);
}

}  // namespace pfgp
