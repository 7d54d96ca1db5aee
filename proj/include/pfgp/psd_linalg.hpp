#pragma once

// Dense linear algebra for symmetric positive (semi)definite matrices.

#include <Eigen/Dense>

namespace pfgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Jitter ladder used when a plain Cholesky factorization fails. Jitter values
// are relative to mean(diag(A)).
struct JitterPolicy {
  double start_relative = 1e-10;
  double cap_relative = 1e-4;
  double growth = 10.0;
  double symmetry_tol = 1e-12;
};

// lower * lower^T == A + jitter_used * I.
struct CholFactor {
  MatrixXd lower;
  double jitter_used = 0.0;

  [[nodiscard]] Index size() const { return lower.rows(); }
};

// Throws NotSymmetric or JitterCapExceeded.
CholFactor chol_psd(const MatrixXd& a, const JitterPolicy& policy = {});

// X with (A + jitter I) X = B.
MatrixXd solve_psd(const CholFactor& factor, const MatrixXd& b);
VectorXd solve_psd(const CholFactor& factor, const VectorXd& b);

// L^{-1} B, a single forward substitution.
MatrixXd solve_lower(const CholFactor& factor, const MatrixXd& b);

// (A + jitter I)^{-1}, symmetric.
MatrixXd inverse_psd(const CholFactor& factor);

// log det(A + jitter I).
double log_det(const CholFactor& factor);

// tr(A B) as sum(A .* B^T); AB is never formed.
double trace_product(const MatrixXd& a, const MatrixXd& b);

// Principal square root via symmetric eigendecomposition, negative
// eigenvalues clamped to zero.
MatrixXd sqrtm_psd(const MatrixXd& a);

// (A + A^T) / 2.
MatrixXd symmetrize(const MatrixXd& a);

bool is_symmetric(const MatrixXd& a, double relative_tol);

}  // namespace pfgp
