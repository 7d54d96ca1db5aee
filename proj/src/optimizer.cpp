#include "pfgp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "pfgp/error.hpp"
#include "pfgp/random.hpp"

namespace pfgp {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "adam") return Algorithm::kAdam;
  if (name == "gd" || name == "gradient-descent-with-backtracking" || name == "backtracking") {
    return Algorithm::kBacktrackingGradientDescent;
  }
  throw Error(ErrorCode::kConfigError, "unknown optimizer algorithm '" + name + "'");
}

const char* algorithm_name(Algorithm a) {
  return a == Algorithm::kAdam ? "adam" : "gradient-descent-with-backtracking";
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw Error(ErrorCode::kConfigError, "optimizer: step_size must be > 0");
  if (max_iters < 1) throw Error(ErrorCode::kConfigError, "optimizer: max_iters must be >= 1");
  if (restarts < 1) throw Error(ErrorCode::kConfigError, "optimizer: restarts must be >= 1");
  if (grad_tol < 0.0) throw Error(ErrorCode::kConfigError, "optimizer: grad_tol must be >= 0");
}

namespace {

double max_abs(const MatrixXd& g) { return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff(); }

void run_adam(const ObjectiveFn& fn, const OptimizerConfig& c, MatrixXd x, MatrixXd g,
              double f, RestartResult& out) {
  MatrixXd m1 = MatrixXd::Zero(x.rows(), x.cols());
  MatrixXd m2 = MatrixXd::Zero(x.rows(), x.cols());
  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 1; t <= c.max_iters; ++t) {
    if (max_abs(g) <= c.grad_tol) {
      out.converged = true;
      break;
    }
    b1t *= c.adam_beta1;
    b2t *= c.adam_beta2;
    m1 = c.adam_beta1 * m1 + (1.0 - c.adam_beta1) * g;
    m2 = c.adam_beta2 * m2 + (1.0 - c.adam_beta2) * g.cwiseProduct(g);
    const MatrixXd m_hat = m1 / (1.0 - b1t);
    const MatrixXd v_hat = m2 / (1.0 - b2t);
    x -= c.step_size * (m_hat.array() / (v_hat.array().sqrt() + c.adam_eps)).matrix();
    f = fn(x, &g);
    out.iterations = t;
    if (!std::isfinite(f) || !g.allFinite()) {
      out.aborted = true;
      break;
    }
    out.objective.push_back(f);
    if (f < out.final_value) {
      out.final_value = f;
      out.best = x;
    }
  }
}

void run_backtracking(const ObjectiveFn& fn, const OptimizerConfig& c, MatrixXd x, MatrixXd g,
                      double f, RestartResult& out) {
  constexpr double kArmijo = 1e-4;
  double step = c.step_size;
  MatrixXd g_new;
  for (int t = 1; t <= c.max_iters; ++t) {
    if (max_abs(g) <= c.grad_tol) {
      out.converged = true;
      break;
    }
    const double g2 = g.squaredNorm();
    bool accepted = false;
    while (step > 1e-20) {
      const MatrixXd x_new = x - step * g;
      const double f_new = fn(x_new, &g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f - kArmijo * step * g2) {
        x = x_new;
        f = f_new;
        g = g_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.iterations = t;
    if (!accepted) break;
    out.objective.push_back(f);
    out.final_value = f;
    out.best = x;
    step *= 2.0;
  }
}

}  // namespace

RestartResult minimize_from(const ObjectiveFn& fn, const MatrixXd& x0, const OptimizerConfig& config) {
  config.validate();
  RestartResult out;
  MatrixXd g;
  double f = std::numeric_limits<double>::quiet_NaN();
  try {
    f = fn(x0, &g);
  } catch (const Error&) {
    f = std::numeric_limits<double>::quiet_NaN();
  }
  out.best = x0;
  out.initial_value = f;
  out.final_value = f;
  if (!std::isfinite(f) || !g.allFinite()) {
    out.failed = true;
    return out;
  }
  out.objective.push_back(f);
  try {
    if (config.algorithm == Algorithm::kAdam) {
      run_adam(fn, config, x0, g, f, out);
    } else {
      run_backtracking(fn, config, x0, g, f, out);
    }
  } catch (const Error&) {
    // A linear-algebra failure mid-run ends the restart like a non-finite value.
    out.aborted = true;
  }
  return out;
}

OptTrace optimize_inducing(const ObjectiveFn& fn, const MatrixXd& pool, Index m,
                           const OptimizerConfig& config) {
  config.validate();
  if (m < 1 || m > pool.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "optimize_inducing: need 1 <= M <= pool size");
  }
  OptTrace trace;
  trace.restarts.resize(static_cast<std::size_t>(config.restarts));
  auto run_one = [&](int r) {
    const auto rows = random_subset(pool.rows(), m, derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    MatrixXd x0(m, pool.cols());
    for (Index i = 0; i < m; ++i) x0.row(i) = pool.row(rows[static_cast<std::size_t>(i)]);
    trace.restarts[static_cast<std::size_t>(r)] = minimize_from(fn, x0, config);
  };
  if (config.parallel && config.restarts > 1) {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(config.restarts));
    for (int r = 0; r < config.restarts; ++r) workers.emplace_back(run_one, r);
    for (auto& w : workers) w.join();
  } else {
    for (int r = 0; r < config.restarts; ++r) run_one(r);
  }
  for (int r = 0; r < config.restarts; ++r) {
    const auto& res = trace.restarts[static_cast<std::size_t>(r)];
    if (res.failed) continue;
    if (trace.winner < 0 || res.final_value < trace.best().final_value) trace.winner = r;
  }
  if (trace.winner < 0) {
    throw Error(ErrorCode::kAllRestartsFailed, "optimize_inducing: every restart had a non-finite objective");
  }
  return trace;
}

MatrixXd finite_diff_gradient(const ValueFn& fn, const MatrixXd& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite_diff_gradient: h must be > 0");
  MatrixXd grad(x.rows(), x.cols());
  MatrixXd probe = x;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = fn(probe);
      probe(i, j) = orig - h;
      const double down = fn(probe);
      probe(i, j) = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error(ErrorCode::kNonFiniteObjective, "finite_diff_gradient: non-finite objective");
      }
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

void write_trace_csv(const OptTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write trace file " + path);
  os.precision(17);
  os << "iteration,objective,restart\n";
  for (std::size_t r = 0; r < trace.restarts.size(); ++r) {
    const auto& obj = trace.restarts[r].objective;
    for (std::size_t i = 0; i < obj.size(); ++i) os << i << ',' << obj[i] << ',' << r << '\n';
  }
}

NelderMeadResult nelder_mead_minimize(const std::function<double(const VectorXd&)>& fn,
                                      const VectorXd& x0, const NelderMeadConfig& config) {
  const Index n = x0.size();
  auto eval = [&](const VectorXd& x, int& count) {
    ++count;
    double v;
    try {
      v = fn(x);
    } catch (const Error&) {
      v = std::numeric_limits<double>::infinity();
    }
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  NelderMeadResult res;
  std::vector<VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  for (Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)][i] += config.initial_step;
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i], res.evaluations);
  res.initial_value = values[0];

  std::vector<std::size_t> order(simplex.size());
  while (res.evaluations < config.max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double spread = 0.0;
    for (const auto& p : simplex) spread = std::max(spread, (p - simplex[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(values[worst]) &&
        std::abs(values[worst] - values[best]) <= config.f_tol * (1.0 + std::abs(values[best])) &&
        spread <= config.x_tol * 1e3) {
      break;
    }
    if (spread <= config.x_tol) break;

    VectorXd centroid = VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_r = eval(reflected, res.evaluations);
    if (f_r < values[best]) {
      const VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_e = eval(expanded, res.evaluations);
      if (f_e < f_r) {
        simplex[worst] = expanded;
        values[worst] = f_e;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_r;
      }
      continue;
    }
    if (f_r < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_r;
      continue;
    }
    const bool outside = f_r < values[worst];
    const VectorXd contracted = outside ? VectorXd(centroid + 0.5 * (reflected - centroid))
                                        : VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_c = eval(contracted, res.evaluations);
    if (f_c < (outside ? f_r : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_c;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i], res.evaluations);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  res.value = *it;
  res.x = simplex[static_cast<std::size_t>(it - values.begin())];
  return res;
}

}  // namespace pfgp
