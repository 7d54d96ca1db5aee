#pragma once

// Multi-restart first-order minimization over inducing-point locations, plus
// a small Nelder-Mead simplex used for hyperparameter pilots.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pfgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Algorithm { kAdam, kBacktrackingGradientDescent };

Algorithm parse_algorithm(const std::string& name);
const char* algorithm_name(Algorithm a);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::kAdam;
  double step_size = 1e-2;
  int max_iters = 500;
  double grad_tol = 1e-6;
  int restarts = 5;
  std::uint64_t seed = 0;
  bool parallel = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Value at x; writes d value / d x into *grad when grad is non-null. Must be
// safe to call concurrently.
using ObjectiveFn = std::function<double(const MatrixXd& x, MatrixXd* grad)>;
using ValueFn = std::function<double(const MatrixXd& x)>;

struct RestartResult {
  std::vector<double> objective;  // one entry per recorded iterate, index 0 = start
  MatrixXd best;
  double initial_value = 0.0;
  double final_value = 0.0;       // value at `best`
  int iterations = 0;
  bool converged = false;          // gradient norm reached grad_tol
  bool failed = false;             // non-finite objective at the start
  bool aborted = false;            // non-finite objective mid-run; best finite iterate kept
};

struct OptTrace {
  std::vector<RestartResult> restarts;
  int winner = -1;

  [[nodiscard]] const RestartResult& best() const { return restarts.at(static_cast<std::size_t>(winner)); }
  [[nodiscard]] const MatrixXd& final_points() const { return best().best; }
  [[nodiscard]] double final_value() const { return best().final_value; }
  [[nodiscard]] int iterations_used() const { return best().iterations; }
};

// Single run from x0.
RestartResult minimize_from(const ObjectiveFn& fn, const MatrixXd& x0, const OptimizerConfig& config);

// Each restart starts from a distinct seeded random subset of `pool` rows.
// Throws AllRestartsFailed when no restart produced a finite objective.
OptTrace optimize_inducing(const ObjectiveFn& fn, const MatrixXd& pool, Index m,
                           const OptimizerConfig& config);

// Central differences, one coordinate at a time.
MatrixXd finite_diff_gradient(const ValueFn& fn, const MatrixXd& x, double h);

// Writes "iteration,objective,restart" rows.
void write_trace_csv(const OptTrace& trace, const std::string& path);

struct NelderMeadConfig {
  int max_evals = 400;
  double initial_step = 0.5;
  double f_tol = 1e-9;
  double x_tol = 1e-7;
};

struct NelderMeadResult {
  VectorXd x;
  double value = 0.0;
  double initial_value = 0.0;
  int evaluations = 0;
};

// Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead_minimize(const std::function<double(const VectorXd&)>& fn,
                                      const VectorXd& x0, const NelderMeadConfig& config);

}  // namespace pfgp
