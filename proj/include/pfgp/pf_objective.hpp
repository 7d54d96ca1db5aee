#pragma once

// Preconditioned Fisher (pF) objective for DTC inducing-point approximations.
//
// Scaling convention used throughout: every "full" or "relative" value is the
// sigma^4-scaled squared divergence
//
//   F = sigma^4 * pF^2
//     = E_nu[(f_X - y)^T (K_XX - Q_XX) (f_X - y)]
//     + E_nu[(f_X - Qbar f_M)^T S_XX (f_X - Qbar f_M)],
//   S_XX = K_XM Sigma~ K_MM Sigma~ K_MX,
//
// so the divergence itself is pF = sqrt(F) / sigma^2. The relative objective
// drops C(X) = tr(Khat_XX K_XX) + e^T K_XX e, which does not depend on the
// inducing points.

#include <cstdint>
#include <vector>

#include "pfgp/gp_exact.hpp"
#include "pfgp/kernels.hpp"
#include "pfgp/psd_linalg.hpp"
#include "pfgp/sparse_gp.hpp"

namespace pfgp {

enum class AuxKind { kSubsetOfData, kSorLowRank };

const char* aux_kind_name(AuxKind kind);
AuxKind parse_aux_kind(const std::string& name);

inline constexpr Index kDefaultValidationCap = 2000;

// nu = GP(mu_hat, k_hat) built from a subset Xh of the training data, kept in
// factored form with F(a) = Lf^{-1} k_Ha:
//   mu_hat(a)   = F(a)^T u
//   k_hat(a, b) = alpha k(a, b) + beta F(a)^T F(b)
// subset-of-data: Lf = chol(k_HH + s2 I), alpha = 1, beta = -1, u = Lf^{-1} y_H
// SoR low rank:   Lf Lf^T = k_HH + s^-2 k_HX k_XH, alpha = 0, beta = 1,
//                 u = s^-2 Lf^{-1} k_HX y
class AuxiliaryDistribution {
 public:
  [[nodiscard]] AuxKind kind() const { return kind_; }
  [[nodiscard]] const VectorXd& mu_x() const { return mu_x_; }
  [[nodiscard]] const MatrixXd& aux_points() const { return aux_points_; }
  [[nodiscard]] const VectorXd& aux_targets() const { return aux_targets_; }
  [[nodiscard]] const std::vector<Index>& indices() const { return indices_; }
  [[nodiscard]] const CholFactor& aux_solve() const { return aux_solve_; }
  [[nodiscard]] const MatrixXd& train_points() const { return train_points_; }
  // F(X), M' x N.
  [[nodiscard]] const MatrixXd& features_x() const { return features_x_; }
  [[nodiscard]] const VectorXd& mean_coeffs() const { return mean_coeffs_; }
  [[nodiscard]] double alpha() const { return kind_ == AuxKind::kSubsetOfData ? 1.0 : 0.0; }
  [[nodiscard]] double beta() const { return kind_ == AuxKind::kSubsetOfData ? -1.0 : 1.0; }
  // F(points), M' x rows.
  MatrixXd features(const MatrixXd& points) const;
  [[nodiscard]] const KernelParams& params() const { return params_; }
  [[nodiscard]] Index n() const { return train_points_.rows(); }
  [[nodiscard]] Index validation_cap() const { return validation_cap_; }

  VectorXd mean_at(const MatrixXd& points) const;
  // Khat(a, b) evaluated directly from the kernel.
  MatrixXd cov_cross(const MatrixXd& a, const MatrixXd& b) const;
  // Khat(X, b) reusing the cached F(X).
  MatrixXd cov_train_cross(const MatrixXd& b) const;
  // Khat_XX V. O(N M' cols) for SoR; O(N^2 cols) for subset-of-data, which
  // is only allowed under the validation cap.
  MatrixXd cov_times(const MatrixXd& v) const;
  // Dense N x N Khat_XX; validation only.
  MatrixXd dense_cov_train() const;

  friend AuxiliaryDistribution build_aux_subset(const InputSet&, const VectorXd&,
                                                const std::vector<Index>&, const KernelParams&, Index);
  friend AuxiliaryDistribution build_aux_sor(const InputSet&, const VectorXd&,
                                             const std::vector<Index>&, const KernelParams&);

 private:
  AuxKind kind_ = AuxKind::kSorLowRank;
  KernelParams params_;
  MatrixXd train_points_;
  MatrixXd aux_points_;
  VectorXd aux_targets_;
  std::vector<Index> indices_;
  CholFactor aux_solve_;
  MatrixXd features_x_;
  VectorXd mean_coeffs_;
  VectorXd mu_x_;
  Index validation_cap_ = kDefaultValidationCap;
};

// Throws IndexOutOfRange, or ValidationModeRequired when N > validation_cap.
AuxiliaryDistribution build_aux_subset(const InputSet& x, const VectorXd& y,
                                       const std::vector<Index>& subset, const KernelParams& p,
                                       Index validation_cap = kDefaultValidationCap);
AuxiliaryDistribution build_aux_sor(const InputSet& x, const VectorXd& y,
                                    const std::vector<Index>& subset, const KernelParams& p);

struct PfTerms {
  double term_I = 0.0;    // -tr((Khat + e e^T) Q_XX); the K_XX part lives in C(X)
  double term_IIa = 0.0;  // tr(Khat S) + tr(Khat_MM Qbar^T S Qbar)
  double term_IIb = 0.0;  // -2 tr(Khat_MX S Qbar), stored with its sign
  double term_III = 0.0;  // d^T S d, d = mu_X - Qbar mu_M
  double relative_objective = 0.0;
};

struct PfEvaluation {
  PfTerms terms;
  MatrixXd gradient;  // d relative_objective / d inducing points, M x d
};

PfTerms pf_dtc_objective(const NystromCache& cache, const VectorXd& y,
                         const AuxiliaryDistribution& aux, const KernelParams& p);
MatrixXd pf_dtc_gradient(const NystromCache& cache, const VectorXd& y,
                         const AuxiliaryDistribution& aux, const KernelParams& p);
PfEvaluation pf_dtc_evaluate(const NystromCache& cache, const VectorXd& y,
                             const AuxiliaryDistribution& aux, const KernelParams& p,
                             bool with_gradient);

// Dense reference evaluation of the complete F (including C(X)) through the
// main-text form S = sigma^4 Q (Q + s2 I)^{-2} and the joint nu covariance.
// Throws ValidationModeRequired when N exceeds the aux validation cap.
double pf_dtc_objective_full(const InputSet& x, const VectorXd& y, const InducingSet& xt,
                             const AuxiliaryDistribution& aux, const KernelParams& p);

// C(X), streamed in row blocks: O(N^2 (d + M')) time, O(N) extra memory per row.
double pf_constant_term(const VectorXd& y, const AuxiliaryDistribution& aux, const KernelParams& p);

// pF = sqrt(F) / sigma^2.
double pf_divergence_from_scaled(double scaled_squared, double noise_variance);

struct EpsBound {
  double eps = 0.0;
  double log_density_ratio_bound = 0.0;  // log sup dpi/dnu
  double pf_value = 0.0;
};

// log Z_H - ((N - M') / 2) log(2 pi s2) - log Z_X for the subset-of-data
// measure on the given rows: the log of the bound on sup dpi/dnu.
double subset_log_density_ratio(const InputSet& x, const VectorXd& y, const std::vector<Index>& rows,
                                const KernelParams& p);

// eps = sup(dpi/dnu)^{1/2} * pF. Subset-of-data aux only (AuxKindUnsupported).
EpsBound eps_bound(const InputSet& x, const VectorXd& y, const AuxiliaryDistribution& aux,
                   const KernelParams& p, double pf_value);

struct PointwiseBounds {
  VectorXd mean_bound;  // r^{1/2} eps
  VectorXd std_bound;   // sqrt(6) r^{1/2} eps
  VectorXd var_bound;   // 3 r^{1/2} kmin^{1/2} eps + 6 r eps^2
};

// k_diag_star holds r(x, x) = k(x, x); k_under_star the pointwise minimum of the
// approximate and exact posterior variances. Throws NegativeEps.
PointwiseBounds pointwise_bounds(double eps, const VectorXd& k_diag_star, const VectorXd& k_under_star);

struct ImportanceEstimate {
  double scaled_squared = 0.0;  // estimate of F under the exact posterior
  double std_error = 0.0;
  double effective_sample_size = 0.0;
  [[nodiscard]] double divergence(double noise_variance) const {
    return pf_divergence_from_scaled(scaled_squared, noise_variance);
  }
};

// Monte-Carlo estimate of the exact-posterior-weighted F. With a
// subset-of-data aux, draws come from nu and are self-normalized by
// dpi/dnu, which only depends on the residuals of the discarded points. With
// a SoR aux, draws come from the exact posterior directly.
ImportanceEstimate eps_importance_estimate(const InputSet& x, const VectorXd& y,
                                           const InducingSet& xt, const AuxiliaryDistribution& aux,
                                           const KernelParams& p, Index n_samples, std::uint64_t seed);

}  // namespace pfgp
