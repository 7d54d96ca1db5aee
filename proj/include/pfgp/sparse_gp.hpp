#pragma once

// Inducing-point machinery: Nystrom blocks, DTC / SoR / subsample predictive
// posteriors, and the VFE evidence lower bound used both as a baseline and as
// the pilot hyperparameter fitter. Nothing here allocates an N x N matrix.

#include <cstdint>
#include <vector>

#include "pfgp/gp_exact.hpp"
#include "pfgp/kernels.hpp"
#include "pfgp/optimizer.hpp"
#include "pfgp/psd_linalg.hpp"

namespace pfgp {

// M x d inducing locations.
struct InducingSet {
  MatrixXd points;

  InducingSet() = default;
  explicit InducingSet(MatrixXd pts);

  [[nodiscard]] Index size() const { return points.rows(); }

  // Smallest pairwise distance in lengthscale-scaled coordinates (inf for M=1).
  [[nodiscard]] double min_scaled_separation(const KernelParams& p) const;
};

// Everything the DTC family needs, O(NM) memory.
//   Q_XX  = K_XM K_MM^{-1} K_MX        (never formed)
//   G     = K_MM + s^-2 K_MX K_XM      = L B L^T, B = I + s^-2 L^{-1} K_MX K_XM L^{-T}
//   Sigma~ = G^{-1}
// K_MM carries the jitter recorded in chol_mm.
struct NystromCache {
  MatrixXd inducing;       // M x d
  MatrixXd k_xm;           // N x M
  MatrixXd k_mm;           // M x M, without jitter
  CholFactor chol_mm;      // L
  MatrixXd qbar;           // N x M, K_XM K_MM^{-1}
  MatrixXd a;              // M x N, L^{-1} K_MX
  CholFactor chol_b;       // of B
  CholFactor sigma_tilde;  // lower = L * chol(B), factor of G
  double noise_variance = 0.0;
  bool m_exceeds_n = false;

  [[nodiscard]] Index n() const { return k_xm.rows(); }
  [[nodiscard]] Index m() const { return k_xm.cols(); }

  // Explicit M x M (K_MM + jitter I)^{-1} and Sigma~.
  [[nodiscard]] MatrixXd k_mm_inverse() const;
  [[nodiscard]] MatrixXd sigma_tilde_matrix() const;
};

NystromCache build_nystrom(const InputSet& x, const InducingSet& xt, const KernelParams& p);

namespace detail {
// Reverse pass through the whitening A = L^{-1} K_MX, L L^T = K_MM + jitter I.
// a_bar is the adjoint of A; m_bar collects sum Zbar Z^T over every other
// block Z = L^{-1} Y whose Y adjoint has already been propagated. Adds the
// resulting inducing-point gradient into grad.
void backprop_whitened(const NystromCache& cache, const MatrixXd& x_points, const MatrixXd& a_bar,
                       const MatrixXd& m_bar, const KernelParams& p, MatrixXd& grad);
// L^{-T} B for the inducing Cholesky factor.
MatrixXd solve_upper(const CholFactor& factor, const MatrixXd& b);
}  // namespace detail

GaussianPosterior dtc_predict(const NystromCache& cache, const InputSet& x, const VectorXd& y,
                              const InputSet& xstar, const KernelParams& p);
GaussianMarginals dtc_predict_marginals(const NystromCache& cache, const InputSet& x,
                                        const VectorXd& y, const InputSet& xstar,
                                        const KernelParams& p);

// Same mean as DTC; covariance drops the k - Q correction.
GaussianPosterior sor_predict(const NystromCache& cache, const InputSet& x, const VectorXd& y,
                              const InputSet& xstar, const KernelParams& p);
GaussianMarginals sor_predict_marginals(const NystromCache& cache, const InputSet& x,
                                        const VectorXd& y, const InputSet& xstar,
                                        const KernelParams& p);

// Exact GP restricted to the given distinct training rows.
GaussianPosterior subsample_predict(const InputSet& x, const VectorXd& y,
                                    const std::vector<Index>& subset, const InputSet& xstar,
                                    const KernelParams& p);

// log N(y | 0, Q_XX + s2 I) - tr(K_XX - Q_XX) / (2 s2).
double vfe_elbo(const InputSet& x, const VectorXd& y, const InducingSet& xt, const KernelParams& p);
double vfe_elbo(const NystromCache& cache, const VectorXd& y, const KernelParams& p);

struct ValueAndGradient {
  double value = 0.0;
  MatrixXd gradient;  // M x d
};

// ELBO and its gradient with respect to the inducing locations.
ValueAndGradient vfe_elbo_with_gradient(const InputSet& x, const VectorXd& y,
                                        const InducingSet& xt, const KernelParams& p);

struct PilotConfig {
  Index m_pilot = 200;
  std::uint64_t seed = 0;
  NelderMeadConfig simplex{};
  double noise_floor_fraction = 1e-6;  // s2 >= fraction * var(y)
};

struct PilotResult {
  KernelParams params;
  double elbo_initial = 0.0;
  double elbo_final = 0.0;
  int evaluations = 0;
  std::vector<Index> inducing_rows;
};

// Maximizes the VFE ELBO over log-lengthscales, log signal variance and log
// noise variance with inducing points frozen at a seeded random data subset.
PilotResult fit_hyperparams_pilot(const InputSet& x, const VectorXd& y, const PilotConfig& config);

}  // namespace pfgp
