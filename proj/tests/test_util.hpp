#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pfgp/kernels.hpp"
#include "pfgp/random.hpp"

namespace pfgp::testing {

inline MatrixXd uniform_points(Index n, Index d, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = u(rng);
  return x;
}

inline KernelParams random_params(Index d, Rng& rng) {
  std::uniform_real_distribution<double> l(0.6, 1.6);
  std::uniform_real_distribution<double> sf(0.7, 1.5);
  std::uniform_real_distribution<double> s2(0.05, 0.4);
  KernelParams p;
  p.lengthscales = VectorXd(d);
  for (Index j = 0; j < d; ++j) p.lengthscales(j) = l(rng);
  p.signal_variance = sf(rng);
  p.noise_variance = s2(rng);
  return p;
}

inline VectorXd noisy_targets(const MatrixXd& x, Rng& rng) {
  VectorXd y(x.rows());
  std::normal_distribution<double> n(0.0, 0.2);
  for (Index i = 0; i < x.rows(); ++i) y(i) = std::sin(1.3 * x.row(i).sum()) + n(rng);
  return y;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline std::vector<Index> all_rows(Index n) {
  std::vector<Index> r(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = i;
  return r;
}

}  // namespace pfgp::testing
