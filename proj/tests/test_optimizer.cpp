#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/optimizer.hpp"
#include "pfgp/pf_objective.hpp"
#include "pfgp/sparse_gp.hpp"
#include "test_util.hpp"

using namespace pfgp;
using namespace pfgp::testing;

namespace {

ObjectiveFn quadratic(const MatrixXd& target) {
  return [target](const MatrixXd& x, MatrixXd* grad) {
    if (grad) *grad = 2.0 * (x - target);
    return (x - target).squaredNorm();
  };
}

// sum of sin(3 x) + 0.1 x^2 per coordinate, many local minima
ObjectiveFn bumpy() {
  return [](const MatrixXd& x, MatrixXd* grad) {
    if (grad) *grad = (3.0 * (3.0 * x.array()).cos() + 0.2 * x.array()).matrix();
    return ((3.0 * x.array()).sin() + 0.1 * x.array().square()).sum();
  };
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("quadratic converges for both algorithms") {
    Rng rng(1);
    const MatrixXd pool = uniform_points(30, 2, -2, 2, rng);
    MatrixXd target(3, 2);
    target << 0.3, -0.2, 1.0, 0.5, -0.7, 0.1;
    for (Algorithm alg : {Algorithm::kAdam, Algorithm::kBacktrackingGradientDescent}) {
      OptimizerConfig cfg;
      cfg.algorithm = alg;
      cfg.step_size = alg == Algorithm::kAdam ? 0.05 : 0.5;
      cfg.max_iters = 5000;
      cfg.grad_tol = 1e-6;
      cfg.restarts = 2;
      const OptTrace t = optimize_inducing(quadratic(target), pool, 3, cfg);
      CHECK((t.final_points() - target).norm() < 1e-5);
      CHECK(t.iterations_used() <= cfg.max_iters);
      CHECK(t.best().converged);
    }
  }

  TEST_CASE("restarts, winner and determinism") {
    Rng rng(2);
    const MatrixXd pool = uniform_points(50, 1, -4, 4, rng);
    OptimizerConfig cfg;
    cfg.algorithm = Algorithm::kBacktrackingGradientDescent;
    cfg.step_size = 0.1;
    cfg.max_iters = 300;
    cfg.restarts = 6;
    cfg.seed = 9;
    const OptTrace a = optimize_inducing(bumpy(), pool, 2, cfg);
    const OptTrace b = optimize_inducing(bumpy(), pool, 2, cfg);
    REQUIRE(a.restarts.size() == 6);
    std::set<double> finals;
    for (std::size_t r = 0; r < a.restarts.size(); ++r) {
      CHECK(a.restarts[r].objective == b.restarts[r].objective);
      CHECK(a.best().final_value <= a.restarts[r].final_value);
      CHECK(a.restarts[r].final_value <= a.restarts[r].initial_value);
      const auto& obj = a.restarts[r].objective;
      for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1]);
      finals.insert(std::round(a.restarts[r].final_value / 1e-6));
    }
    CHECK(a.winner == b.winner);
    CHECK(finals.size() >= 2);
    // restarts start from distinct subsets
    CHECK(a.restarts[0].objective.front() != a.restarts[1].objective.front());

    cfg.algorithm = Algorithm::kAdam;
    cfg.parallel = true;
    const OptTrace par = optimize_inducing(bumpy(), pool, 2, cfg);
    cfg.parallel = false;
    const OptTrace ser = optimize_inducing(bumpy(), pool, 2, cfg);
    for (std::size_t r = 0; r < par.restarts.size(); ++r) CHECK(par.restarts[r].objective == ser.restarts[r].objective);
  }

  TEST_CASE("non-finite objectives") {
    Rng rng(3);
    const MatrixXd pool = uniform_points(10, 1, -1, 1, rng);
    OptimizerConfig cfg;
    cfg.restarts = 3;
    ObjectiveFn nan_fn = [](const MatrixXd&, MatrixXd* g) {
      if (g) g->setZero(1, 1);
      return std::nan("");
    };
    try {
      optimize_inducing(nan_fn, pool, 1, cfg);
      FAIL("expected AllRestartsFailed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kAllRestartsFailed);
    }
    // finite only inside |x| < 2: the run walks out and aborts, keeping its best iterate
    ObjectiveFn cliff = [](const MatrixXd& x, MatrixXd* g) {
      if (g) *g = -MatrixXd::Ones(x.rows(), x.cols());
      return std::abs(x(0, 0)) < 2.0 ? -x.sum() : std::numeric_limits<double>::infinity();
    };
    cfg.step_size = 0.3;
    const OptTrace t = optimize_inducing(cliff, pool, 1, cfg);
    CHECK(std::isfinite(t.final_value()));
    CHECK(t.best().aborted);
    CHECK(t.final_points()(0, 0) < 2.0);
  }

  TEST_CASE("config validation") {
    OptimizerConfig cfg;
    cfg.step_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.restarts = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(parse_algorithm("adam") == Algorithm::kAdam);
    CHECK(parse_algorithm("gradient-descent-with-backtracking") == Algorithm::kBacktrackingGradientDescent);
    CHECK_THROWS_AS(parse_algorithm("lbfgs"), Error);
    Rng rng(4);
    CHECK_THROWS_AS(optimize_inducing(quadratic(MatrixXd::Zero(5, 1)), uniform_points(3, 1, 0, 1, rng), 5, OptimizerConfig{}),
                    Error);
  }

  TEST_CASE("finite differences") {
    Rng rng(5);
    const MatrixXd x = uniform_points(4, 3, -1, 1, rng);
    const MatrixXd g = finite_diff_gradient([](const MatrixXd& z) { return z.sum(); }, x, 1e-3);
    CHECK((g.array() - 1.0).abs().maxCoeff() < 1e-10);
    const MatrixXd z0 = finite_diff_gradient([](const MatrixXd& z) { return z.squaredNorm(); }, MatrixXd::Zero(3, 2), 1e-4);
    CHECK(z0.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(finite_diff_gradient([](const MatrixXd&) { return std::nan(""); }, x, 1e-3), Error);
    CHECK_THROWS_AS(finite_diff_gradient([](const MatrixXd& z) { return z.sum(); }, x, 0.0), Error);
  }

  TEST_CASE("pF objective descends on every restart") {
    Rng rng(6);
    const MatrixXd pts = uniform_points(200, 1, -3, 3, rng);
    const VectorXd y = noisy_targets(pts, rng);
    const InputSet x(pts);
    const KernelParams p = KernelParams::isotropic(1, 0.6, 1.0, 0.1);
    const AuxiliaryDistribution aux = build_aux_sor(x, y, random_subset(200, 20, 1), p);
    ObjectiveFn fn = [&](const MatrixXd& z, MatrixXd* grad) {
      const PfEvaluation ev = pf_dtc_evaluate(build_nystrom(x, InducingSet(z), p), y, aux, p, grad != nullptr);
      if (grad) *grad = ev.gradient;
      return ev.terms.relative_objective;
    };
    OptimizerConfig cfg;
    cfg.restarts = 3;
    cfg.max_iters = 150;
    const OptTrace t = optimize_inducing(fn, pts, 10, cfg);
    for (const auto& r : t.restarts) CHECK(r.final_value <= r.initial_value);
  }

  TEST_CASE("trace CSV") {
    Rng rng(7);
    OptimizerConfig cfg;
    cfg.restarts = 2;
    cfg.max_iters = 5;
    const OptTrace t = optimize_inducing(quadratic(MatrixXd::Zero(1, 1)), uniform_points(5, 1, -1, 1, rng), 1, cfg);
    const auto path = std::filesystem::temp_directory_path() / "pfgp_trace_test.csv";
    write_trace_csv(t, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,objective,restart");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == t.restarts[0].objective.size() + t.restarts[1].objective.size());
    CHECK_THROWS_AS(write_trace_csv(t, "/nonexistent_dir/x.csv"), Error);
  }

  TEST_CASE("Nelder-Mead") {
    auto rosen = [](const VectorXd& v) { return 100 * std::pow(v(1) - v(0) * v(0), 2) + std::pow(1 - v(0), 2); };
    NelderMeadConfig cfg;
    cfg.max_evals = 4000;
    cfg.f_tol = 1e-14;
    cfg.x_tol = 1e-10;
    const NelderMeadResult r = nelder_mead_minimize(rosen, VectorXd::Constant(2, -1.0), cfg);
    CHECK(r.value < 1e-8);
    CHECK(r.value <= r.initial_value);
    CHECK(r.evaluations <= cfg.max_evals + 3);
    CHECK((r.x - VectorXd::Ones(2)).norm() < 1e-3);
  }
}
