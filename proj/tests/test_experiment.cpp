#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pfgp/error.hpp"
#include "pfgp/experiment.hpp"
#include "test_util.hpp"

using namespace pfgp;
using namespace pfgp::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pfgp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallRun =
    "dataset = synthetic\n"
    "dataset.n_total = 2000\n"
    "methods = pf-dtc, vfe, sor, subsample\n"
    "m_grid = 5, 10\n"
    "seeds = 0, 1\n"
    "optimizer.max_iters = 25\n"
    "optimizer.restarts = 2\n"
    "optimizer.step_size = 0.05\n"
    "pilot.m = 30\n"
    "pilot.max_evals = 60\n"
    "kl_points = 50\n";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parse keys, comments and lists") {
    const ExperimentConfig c = parse_config_text(
        "# comment\n"
        "dataset = synthetic   # trailing\n"
        "\n"
        "methods = pf-dtc,vfe\n"
        "m_grid = 3, 7\n"
        "seed_count = 4\n"
        "aux.kind = subset\n"
        "optimizer.algorithm = gd\n"
        "emit_svg = true\n");
    CHECK(c.dataset.name == "synthetic");
    REQUIRE(c.methods.size() == 2);
    CHECK(c.methods[1] == Method::kVfe);
    CHECK(c.m_grid == std::vector<Index>{3, 7});
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(c.aux_kind == AuxKind::kSubsetOfData);
    CHECK(c.optimizer.algorithm == Algorithm::kBacktrackingGradientDescent);
    CHECK(c.emit_svg);
  }

  TEST_CASE("config errors") {
    CHECK(code_of([] { parse_config_text("bogus = 1\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_text("seeds = 1\nseeds = 2\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_text("dataset synthetic\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_text("m_grid = 10, 5\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_text("methods = pf-dtc, magic\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_text("optimizer.step_size = -1\n"); }) == ErrorCode::kConfigError);
    CHECK(code_of([] { parse_config_file("/nonexistent/run.cfg"); }) == ErrorCode::kFileNotFound);
  }

  TEST_CASE("schema lists every key") {
    const std::string s = config_schema();
    for (const char* key : {"dataset", "m_grid", "seeds", "aux.kind", "optimizer.restarts", "out_dir", "emit_svg",
                            "validation_mode", "bench.n_values"}) {
      CHECK(s.find(std::string(key) + " =") != std::string::npos);
    }
  }
}

TEST_SUITE("results table") {
  TEST_CASE("row round trip") {
    ResultRow r;
    r.dataset = "synthetic";
    r.method = "pf-dtc";
    r.m = 9;
    r.seed = 3;
    r.mean_rmse = 0.125;
    r.std_rmse = 1.0 / 3.0;
    r.pred_rmse = 0.2;
    r.kl_to_exact = 12.5;
    r.objective_final = -30.5;
    r.wall_time_seconds = 0.01;
    const std::string line = format_row(r);
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
    const ResultRow back = parse_row(line);
    CHECK(back.method == r.method);
    CHECK(back.m == 9);
    CHECK(back.std_rmse == doctest::Approx(r.std_rmse).epsilon(1e-11));
    CHECK(back.objective_final.has_value());
    CHECK_FALSE(back.eps_bound.has_value());
    CHECK(back.status == "ok");
    CHECK(code_of([] { parse_row("a,b,c"); }) == ErrorCode::kParseError);
  }

  TEST_CASE("invariants") {
    ResultRow r;
    r.wall_time_seconds = 1.0;
    CHECK(r.satisfies_invariants());
    r.kl_to_exact = -1.0;
    CHECK_FALSE(r.satisfies_invariants());
    r.kl_to_exact = 0.0;
    r.wall_time_seconds = 0.0;
    CHECK_FALSE(r.satisfies_invariants());
    r.status = "error:NonFiniteObjective";
    r.mean_rmse = std::numeric_limits<double>::quiet_NaN();
    CHECK(r.satisfies_invariants());
  }

  TEST_CASE("csv files") {
    const fs::path dir = scratch_dir("csv");
    std::vector<ResultRow> rows(3);
    for (int i = 0; i < 3; ++i) {
      rows[i].dataset = "d";
      rows[i].method = "vfe";
      rows[i].m = 10 * (i + 1);
      rows[i].wall_time_seconds = 1.0;
    }
    write_results_csv(rows, (dir / "r.csv").string());
    const std::string text = slurp(dir / "r.csv");
    CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
    const auto back = read_results_csv((dir / "r.csv").string());
    REQUIRE(back.size() == 3);
    CHECK(back[2].m == 30);
    std::ofstream(dir / "bad_header.csv") << "dataset,method\n";
    CHECK(code_of([&] { read_results_csv((dir / "bad_header.csv").string()); }) == ErrorCode::kParseError);
    std::ofstream(dir / "bad_row.csv") << kResultsHeader << "\n" << format_row(rows[0]) << "\nd,vfe,x\n";
    try {
      read_results_csv((dir / "bad_row.csv").string());
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK(code_of([&] { read_results_csv((dir / "missing.csv").string()); }) == ErrorCode::kFileNotFound);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("kl_to_exact against the closed form") {
    Rng rng(1);
    const MatrixXd a = standard_normal(4, 4, rng);
    GaussianPosterior exact{standard_normal(4, 1, rng).col(0), a * a.transpose() + MatrixXd::Identity(4, 4)};
    CHECK(kl_to_exact(exact, exact) == doctest::Approx(0.0).epsilon(1e-9));
    // shifted mean only: KL = 0.5 d^T C^-1 d
    GaussianPosterior shifted = exact;
    VectorXd d = VectorXd::Constant(4, 0.3);
    shifted.mean += d;
    const double n = 1e-8 * exact.cov.diagonal().mean();
    const MatrixXd c = exact.cov + n * MatrixXd::Identity(4, 4);
    CHECK(kl_to_exact(shifted, exact) == doctest::Approx(0.5 * d.dot(c.inverse() * d)).epsilon(1e-9));
    // scaled covariance in one dimension
    GaussianPosterior e1{VectorXd::Zero(1), MatrixXd::Constant(1, 1, 2.0)};
    GaussianPosterior a1{VectorXd::Zero(1), MatrixXd::Constant(1, 1, 1.0)};
    const double r = (1.0 + 2e-8) / (2.0 + 2e-8);
    CHECK(kl_to_exact(a1, e1) == doctest::Approx(0.5 * (r - 1.0 - std::log(r))).epsilon(1e-9));
  }

  TEST_CASE("compute_metrics") {
    GaussianPosterior exact{VectorXd::Zero(4), MatrixXd::Identity(4, 4)};
    GaussianPosterior approx{VectorXd::Constant(4, 0.5), 4.0 * MatrixXd::Identity(4, 4)};
    const VectorXd y = VectorXd::Constant(4, 1.5);
    const Metrics m = compute_metrics(approx, exact, y);
    CHECK(m.mean_rmse == doctest::Approx(0.5));
    CHECK(m.std_rmse == doctest::Approx(1.0));
    CHECK(m.pred_rmse == doctest::Approx(1.0));
    CHECK(m.kl_to_exact > 0.0);
    CHECK(code_of([&] { compute_metrics(approx, exact, VectorXd::Zero(3)); }) == ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("loglog slope") {
    CHECK(loglog_slope({1000, 2000, 4000, 8000}, {1.0, 2.0, 4.0, 8.0}) == doctest::Approx(1.0));
    CHECK(loglog_slope({10, 100}, {3.0, 300.0}) == doctest::Approx(2.0));
  }
}

TEST_SUITE("drivers") {
  TEST_CASE("small sweep writes every artifact") {
    const fs::path dir = scratch_dir("run");
    ExperimentConfig cfg = parse_config_text(kSmallRun);
    cfg.out_dir = dir.string();
    cfg.emit_svg = true;
    const ExperimentSummary s = run_experiment(cfg);
    CHECK(s.failed_cells == 0);
    REQUIRE(s.rows.size() == 16);
    for (const auto& r : s.rows) {
      CHECK(r.ok());
      CHECK(r.satisfies_invariants());
      CHECK(r.objective_final.has_value() == (r.method == "pf-dtc" || r.method == "vfe"));
    }
    const auto back = read_results_csv((dir / "results.csv").string());
    REQUIRE(back.size() == s.rows.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].mean_rmse == doctest::Approx(s.rows[i].mean_rmse));
    CHECK(fs::exists(dir / "run_summary.json"));
    const auto summary = nlohmann::json::parse(slurp(dir / "run_summary.json"));
    CHECK(summary.is_object());
    int traces = 0;
    for (const auto& e : fs::directory_iterator(dir / "traces")) {
      ++traces;
      CHECK(slurp(e.path()).rfind("iteration,objective,restart\n", 0) == 0);
    }
    CHECK(traces == 8);
    int runs = 0;
    for (const auto& e : fs::directory_iterator(dir / "runs")) {
      ++runs;
      CHECK(nlohmann::json::parse(slurp(e.path())).contains("hyperparameters"));
    }
    CHECK(runs == 16);
    for (const char* f : {"synthetic_mean_rmse.svg", "synthetic_std_rmse.svg", "synthetic_objective.svg"}) {
      const std::string svg = slurp(dir / f);
      CHECK(svg.find("<svg") != std::string::npos);
      CHECK(svg.find("</svg>") != std::string::npos);
    }

    // identical rerun gives identical metrics
    ExperimentConfig again = cfg;
    again.out_dir = (dir / "again").string();
    again.emit_svg = false;
    const ExperimentSummary s2 = run_experiment(again);
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      CHECK(s2.rows[i].mean_rmse == s.rows[i].mean_rmse);
      CHECK(s2.rows[i].kl_to_exact == s.rows[i].kl_to_exact);
    }
  }

  TEST_CASE("subset aux needs validation mode at scale") {
    ExperimentConfig cfg = parse_config_text(kSmallRun);
    cfg.methods = {Method::kPfDtc};
    cfg.m_grid = {5};
    cfg.seeds = {0};
    cfg.aux_kind = AuxKind::kSubsetOfData;
    const PreparedData prep = prepare_data(cfg);
    const CellOutput bad = run_cell(cfg, prep, Method::kPfDtc, 5, 0);
    CHECK(bad.row.status == "error:ValidationModeRequired");
    CHECK(std::isnan(bad.row.mean_rmse));
    CHECK_FALSE(bad.error.empty());
    cfg.validation_mode = true;
    cfg.compute_eps = true;
    const CellOutput good = run_cell(cfg, prep, Method::kPfDtc, 5, 0);
    CHECK(good.row.ok());
    REQUIRE(good.row.eps_bound.has_value());
    CHECK(*good.row.eps_bound >= 0.0);
  }

  TEST_CASE("report rejects an empty table") {
    CHECK(code_of([] { emit_report({}, ReportOptions{}); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("theory check passes") {
    std::ostringstream out;
    const TheoryCheckResult r = theory_check(out, 0);
    CHECK(r.ok());
    CHECK(r.passed >= 8);
    CHECK(out.str().find("[FAIL]") == std::string::npos);
  }
}
