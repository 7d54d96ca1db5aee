#pragma once

// Exact GP regression with a zero prior mean. Serves as ground truth for every
// approximation in the toolkit.

#include "pfgp/kernels.hpp"
#include "pfgp/psd_linalg.hpp"

namespace pfgp {

// Joint Gaussian over a finite set of locations.
struct GaussianPosterior {
  VectorXd mean;
  MatrixXd cov;
};

// Pointwise mean and variance only.
struct GaussianMarginals {
  VectorXd mean;
  VectorXd var;
};

struct ExactPosterior {
  InputSet train_inputs;
  VectorXd alpha;    // [k_XX + s2 I]^{-1} y
  CholFactor chol;   // of k_XX + s2 I
  KernelParams params;
};

inline constexpr Index kDefaultExactCap = 20000;

ExactPosterior fit_exact(const InputSet& x, const VectorXd& y, const KernelParams& p,
                         Index max_n = kDefaultExactCap);

GaussianPosterior predict_exact(const ExactPosterior& post, const InputSet& xstar);
GaussianMarginals predict_exact_marginals(const ExactPosterior& post, const InputSet& xstar);

// log N(y | 0, k_XX + s2 I).
double log_marginal_likelihood(const InputSet& x, const VectorXd& y, const KernelParams& p,
                               Index max_n = kDefaultExactCap);

}  // namespace pfgp
