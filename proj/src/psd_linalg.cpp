#include "pfgp/psd_linalg.hpp"

#include <cmath>
#include <sstream>

#include "pfgp/error.hpp"

namespace pfgp {

namespace {

void require_square(const MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": matrix is " << a.rows() << "x" << a.cols() << ", expected square";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
}

// min_rcond > 0 also rejects factors with a smaller reciprocal condition estimate.
bool try_llt(const MatrixXd& a, MatrixXd& lower, double min_rcond = 0.0) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i) {
    const double d = lower(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
  }
  return !(min_rcond > 0.0) || llt.rcond() >= min_rcond;
}

}  // namespace

bool is_symmetric(const MatrixXd& a, double relative_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= relative_tol * scale;
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

CholFactor chol_psd(const MatrixXd& a, const JitterPolicy& policy) {
  require_square(a, "chol_psd");
  if (!a.allFinite()) {
    throw Error(ErrorCode::kJitterCapExceeded, "chol_psd: matrix has non-finite entries");
  }
  if (!is_symmetric(a, policy.symmetry_tol)) {
    throw Error(ErrorCode::kNotSymmetric, "chol_psd: input is not symmetric");
  }
  CholFactor out;
  if (a.rows() == 0) return out;
  // plain factor must be as well conditioned as the first jitter rung
  if (try_llt(a, out.lower, policy.start_relative / static_cast<double>(a.rows()))) return out;

  double scale = a.diagonal().cwiseAbs().mean();
  if (!(scale > 0.0)) scale = 1.0;
  const Index n = a.rows();
  for (double rel = policy.start_relative; rel <= policy.cap_relative * (1.0 + 1e-12);
       rel *= policy.growth) {
    const double jitter = rel * scale;
    MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    if (try_llt(shifted, out.lower)) {
      out.jitter_used = jitter;
      return out;
    }
  }
  std::ostringstream os;
  os << "chol_psd: " << n << "x" << n << " matrix not positive definite with jitter up to "
     << policy.cap_relative * scale;
  throw Error(ErrorCode::kJitterCapExceeded, os.str());
}

MatrixXd solve_lower(const CholFactor& factor, const MatrixXd& b) {
  if (b.rows() != factor.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "solve_lower: row count mismatch");
  }
  return factor.lower.triangularView<Eigen::Lower>().solve(b);
}

MatrixXd solve_psd(const CholFactor& factor, const MatrixXd& b) {
  if (b.rows() != factor.size()) {
    std::ostringstream os;
    os << "solve_psd: factor is " << factor.size() << "x" << factor.size() << ", rhs has "
       << b.rows() << " rows";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  MatrixXd x = factor.lower.triangularView<Eigen::Lower>().solve(b);
  factor.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

VectorXd solve_psd(const CholFactor& factor, const VectorXd& b) {
  MatrixXd rhs = b;
  return solve_psd(factor, rhs).col(0);
}

MatrixXd inverse_psd(const CholFactor& factor) {
  const MatrixXd linv =
      factor.lower.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(factor.size(), factor.size()));
  return symmetrize(linv.transpose() * linv);
}

double log_det(const CholFactor& factor) {
  return 2.0 * factor.lower.diagonal().array().log().sum();
}

double trace_product(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.cols() || a.cols() != b.rows()) {
    std::ostringstream os;
    os << "trace_product: " << a.rows() << "x" << a.cols() << " times " << b.rows() << "x"
       << b.cols() << " is not square";
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  return a.cwiseProduct(b.transpose()).sum();
}

MatrixXd sqrtm_psd(const MatrixXd& a) {
  require_square(a, "sqrtm_psd");
  if (!is_symmetric(a, 1e-10)) {
    throw Error(ErrorCode::kNotSymmetric, "sqrtm_psd: input is not symmetric");
  }
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(a));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatrixXd& v = eig.eigenvectors();
  return symmetrize(v * root.asDiagonal() * v.transpose());
}

}  // namespace pfgp
