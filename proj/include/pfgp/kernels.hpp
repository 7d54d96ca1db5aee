#pragma once

// Squared-exponential ARD covariance. The same kernel doubles as the RKHS
// reproducing kernel wherever the pF machinery needs one.

#include <vector>

#include <Eigen/Dense>

namespace pfgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelFamily { kSquaredExponentialArd };

struct KernelParams {
  KernelFamily family = KernelFamily::kSquaredExponentialArd;
  VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1.0;

  [[nodiscard]] Index dim() const { return lengthscales.size(); }

  // Throws InvalidArgument unless every scale/variance is finite and > 0.
  void validate() const;

  static KernelParams isotropic(Index dim, double lengthscale, double signal_variance,
                                double noise_variance);
};

// N x d covariates; finite, N >= 1, d >= 1.
class InputSet {
 public:
  InputSet() = default;
  explicit InputSet(MatrixXd points);

  [[nodiscard]] const MatrixXd& points() const { return points_; }
  [[nodiscard]] Index size() const { return points_.rows(); }
  [[nodiscard]] Index dim() const { return points_.cols(); }

  // Rows picked by index; throws IndexOutOfRange.
  [[nodiscard]] InputSet subset(const std::vector<Index>& rows) const;

 private:
  MatrixXd points_;
};

MatrixXd kernel_matrix(const InputSet& a, const InputSet& b, const KernelParams& p);
VectorXd kernel_diag(const InputSet& a, const KernelParams& p);

namespace detail {

// Unchecked variants on raw row-major point sets.
MatrixXd kernel_cross(const MatrixXd& a, const MatrixXd& b, const KernelParams& p);
MatrixXd kernel_self(const MatrixXd& a, const KernelParams& p);

// Adds d/d(moving) sum_ij adjoint(i,j) * k(moving_i, fixed_j) into grad, where
// k_mf = k(moving, fixed) is the already evaluated kernel block.
void accumulate_input_gradient(const MatrixXd& moving, const MatrixXd& fixed,
                               const MatrixXd& k_mf, const MatrixXd& adjoint,
                               const KernelParams& p, MatrixXd& grad);

void require_dim(const MatrixXd& points, const KernelParams& p, const char* what);

}  // namespace detail

}  // namespace pfgp
