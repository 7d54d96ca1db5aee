#pragma once

// Config-driven sweeps over (method, M, seed) cells with metrics against the
// exact posterior, plus the report, theory-check and scaling drivers.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pfgp/data_io.hpp"
#include "pfgp/gp_exact.hpp"
#include "pfgp/optimizer.hpp"
#include "pfgp/pf_objective.hpp"
#include "pfgp/sparse_gp.hpp"

namespace pfgp {

enum class Method { kPfDtc, kVfe, kSor, kSubsample };

const char* method_name(Method m);
Method parse_method(const std::string& name);

struct BenchConfig {
  std::vector<Index> n_values{1000, 2000, 4000, 8000};
  Index m = 20;
  Index aux_size = 40;
  int repeats = 5;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::uint64_t data_seed = 0;
  std::vector<Method> methods{Method::kPfDtc, Method::kVfe, Method::kSor, Method::kSubsample};
  std::vector<Index> m_grid{10, 20, 50, 100, 200};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  AuxKind aux_kind = AuxKind::kSorLowRank;
  double aux_fraction = 0.1;
  Index aux_size = 0;  // 0: registry value, else ceil(aux_fraction * N_train)
  OptimizerConfig optimizer{};
  PilotConfig pilot{};
  std::string out_dir = "results";
  bool emit_svg = false;
  bool validation_mode = false;
  bool compute_eps = false;
  bool write_runs = true;
  Index kl_points = 200;
  int workers = 1;
  BenchConfig bench{};

  // Throws ConfigError.
  void validate() const;
};

// Flat "key = value" text; '#' starts a comment. Throws ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
// Throws FileNotFound or ConfigError.
ExperimentConfig parse_config_file(const std::string& path);
// Schema as printable text, one key per line.
std::string config_schema();

struct Metrics {
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double pred_rmse = 0.0;
  double kl_to_exact = 0.0;
};

// KL(approx || exact) on the joint Gaussian, both covariances carrying the
// same nugget 1e-8 * mean(diag(exact.cov)).
double kl_to_exact(const GaussianPosterior& approx, const GaussianPosterior& exact);

Metrics compute_metrics(const GaussianPosterior& approx, const GaussianPosterior& exact, const VectorXd& y_test);

inline const char* kResultsHeader =
    "dataset,method,M,seed,mean_rmse,std_rmse,pred_rmse,kl_to_exact,objective_final,eps_bound,"
    "wall_time_seconds,status";

struct ResultRow {
  std::string dataset;
  std::string method;
  Index m = 0;
  std::uint64_t seed = 0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double pred_rmse = 0.0;
  double kl_to_exact = 0.0;
  std::optional<double> objective_final;
  std::optional<double> eps_bound;
  double wall_time_seconds = 0.0;
  std::string status = "ok";

  [[nodiscard]] bool ok() const { return status == "ok"; }
  // Finite, non-negative metrics and positive wall time on ok rows.
  [[nodiscard]] bool satisfies_invariants() const;
};

std::string format_row(const ResultRow& row);
ResultRow parse_row(const std::string& line);
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
// Throws FileNotFound / ParseError.
std::vector<ResultRow> read_results_csv(const std::string& path);

struct ExperimentSummary {
  std::vector<ResultRow> rows;
  int failed_cells = 0;
  std::string results_path;
  KernelParams params;
  std::vector<std::string> artifacts;
};

ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Fitted-once state shared by every cell of a run; exposed so the acceptance
// harness can evaluate single cells.
struct PreparedData {
  Dataset data;
  KernelParams params;
  PilotResult pilot;
  ExactPosterior exact;
  GaussianMarginals exact_test;
  std::vector<Index> kl_rows;
  GaussianPosterior exact_kl;
};

PreparedData prepare_data(const ExperimentConfig& config, std::ostream* log = nullptr);

struct CellOutput {
  ResultRow row;
  std::optional<OptTrace> trace;
  std::map<std::string, double> extras;
  bool eps_heuristic = false;
  std::string error;  // message when the row status is not ok
};

CellOutput run_cell(const ExperimentConfig& config, const PreparedData& prep, Method method, Index m,
                    std::uint64_t seed);

struct ReportOptions {
  std::string out_dir = ".";
};

// Per-dataset SVGs: <dataset>_mean_rmse.svg, <dataset>_std_rmse.svg and
// <dataset>_objective.svg. Returns the written paths. Throws InvalidArgument
// on an empty table, IoError on write failure.
std::vector<std::string> emit_report(const std::vector<ResultRow>& rows, const ReportOptions& options);

struct TheoryCheckResult {
  int passed = 0;
  int failed = 0;
  [[nodiscard]] bool ok() const { return failed == 0; }
};

// Runs the finite-dimensional Gaussian sweeps and prints one line per check.
TheoryCheckResult theory_check(std::ostream& out, std::uint64_t seed = 0);

struct BenchResult {
  std::vector<Index> n_values;
  std::vector<double> seconds;
  double slope = 0.0;
};

// Median wall time of one pf-dtc objective+gradient evaluation (SoR aux) per N
// and the least-squares log-log slope.
BenchResult bench_scaling(const BenchConfig& config, std::uint64_t seed, std::ostream* log = nullptr);

double loglog_slope(const std::vector<Index>& n, const std::vector<double>& t);

}  // namespace pfgp
