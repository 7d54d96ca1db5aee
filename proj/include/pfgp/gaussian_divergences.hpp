#pragma once

// Finite-dimensional Gaussian divergences: KL, 2-Wasserstein (Gelbrich),
// nu-Fisher distance, and the closed forms of the single-datum GP example.

#include "pfgp/psd_linalg.hpp"

namespace pfgp {

struct GaussianNd {
  VectorXd mean;
  MatrixXd cov;
  [[nodiscard]] Index dim() const { return mean.size(); }
  // Throws DimensionMismatch / NotSymmetric / SingularCovariance.
  void validate() const;
  static GaussianNd scalar(double mean, double variance);
};

// KL(a || b).
double kl_gaussian(const GaussianNd& a, const GaussianNd& b);

// eta = N(mu, s2) with KL(N(mu_tilde, s_tilde2) || eta) = delta:
// s2 = exp(2 delta) s_tilde2, mu = mu_tilde + s_tilde sqrt(exp(2 delta) - 1).
GaussianNd prop1_construct(double delta, double mu_tilde, double s_tilde2);

double w2_gaussian(const GaussianNd& a, const GaussianNd& b);

// (E_nu || grad log a - grad log b ||^2)^{1/2}.
double fisher_distance_gaussian(const GaussianNd& a, const GaussianNd& b, const GaussianNd& nu);

struct Prop3Check {
  double lhs = 0.0;              // W2(a, b)
  double rhs = 0.0;              // sigma_min(cov_b)^{-1} ||da/dnu||^{1/2} F_nu(a, b)
  double rhs_lambda_max = 0.0;   // lambda_max(cov_b) ||da/dnu||^{1/2} F_nu(a, b)
  double density_ratio_sup = 0.0;
};

// nu = N(mean_a, c_inflate cov_a), so sup da/dnu = c_inflate^{d/2}.
// Throws InflateNotAboveOne.
Prop3Check prop3_bound_check(const GaussianNd& a, const GaussianNd& b, double c_inflate);

struct Example1Forms {
  double w2 = 0.0;
  double fisher = 0.0;
  double fisher_over_w2 = 0.0;
  double pf = 0.0;
};

// Two GP posteriors on one datum at x = 0 with targets t and t_tilde.
// k00 is the induced-kernel value k'(0, 0), r00 the reproducing-kernel value
// r(0, 0), and mu_hat0 the auxiliary mean at 0 (the result does not depend on it).
Example1Forms example1_closed_forms(double t, double t_tilde, double sigma2, double k00,
                                    double r00 = 1.0, double mu_hat0 = 0.0);

}  // namespace pfgp
