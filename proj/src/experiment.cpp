#include "pfgp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pfgp/error.hpp"
#include "pfgp/gaussian_divergences.hpp"

namespace pfgp {

namespace fs = std::filesystem;

double kl_to_exact(const GaussianPosterior& approx, const GaussianPosterior& exact) {
  if (approx.mean.size() != exact.mean.size() || approx.cov.rows() != exact.cov.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "kl_to_exact: posteriors differ in size");
  }
  const double nugget = 1e-8 * exact.cov.diagonal().cwiseAbs().mean();
  GaussianNd a{approx.mean, symmetrize(approx.cov)};
  GaussianNd b{exact.mean, symmetrize(exact.cov)};
  a.cov.diagonal().array() += nugget;
  b.cov.diagonal().array() += nugget;
  return std::max(0.0, kl_gaussian(a, b));
}

namespace {

double rms(const VectorXd& v) { return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

VectorXd safe_sqrt(const VectorXd& v) { return v.cwiseMax(0.0).cwiseSqrt(); }

}  // namespace

Metrics compute_metrics(const GaussianPosterior& approx, const GaussianPosterior& exact, const VectorXd& y_test) {
  if (approx.mean.size() != exact.mean.size() || y_test.size() != exact.mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "compute_metrics: sizes differ");
  }
  Metrics m;
  m.mean_rmse = rms(approx.mean - exact.mean);
  m.std_rmse = rms(safe_sqrt(approx.cov.diagonal()) - safe_sqrt(exact.cov.diagonal()));
  m.pred_rmse = rms(approx.mean - y_test);
  m.kl_to_exact = kl_to_exact(approx, exact);
  return m;
}

bool ResultRow::satisfies_invariants() const {
  if (!ok()) return true;
  for (double v : {mean_rmse, std_rmse, pred_rmse, kl_to_exact}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  if (eps_bound && (!std::isfinite(*eps_bound) || *eps_bound < 0.0)) return false;
  if (objective_final && !std::isfinite(*objective_final)) return false;
  return wall_time_seconds > 0.0;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& field, const char* column) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (field.empty() || end != begin + field.size()) {
    throw Error(ErrorCode::kParseError, std::string("column ") + column + ": '" + field + "' is not a number");
  }
  return v;
}

}  // namespace

std::string format_row(const ResultRow& r) {
  std::ostringstream os;
  os << r.dataset << ',' << r.method << ',' << r.m << ',' << r.seed << ',' << fmt(r.mean_rmse) << ','
     << fmt(r.std_rmse) << ',' << fmt(r.pred_rmse) << ',' << fmt(r.kl_to_exact) << ','
     << fmt_opt(r.objective_final) << ',' << fmt_opt(r.eps_bound) << ',' << fmt(r.wall_time_seconds) << ','
     << r.status;
  return os.str();
}

ResultRow parse_row(const std::string& line) {
  const auto f = split_fields(line);
  if (f.size() != 12) {
    throw Error(ErrorCode::kParseError, "results row has " + std::to_string(f.size()) + " fields, expected 12");
  }
  ResultRow r;
  r.dataset = f[0];
  r.method = f[1];
  r.m = static_cast<Index>(parse_number(f[2], "M"));
  r.seed = static_cast<std::uint64_t>(parse_number(f[3], "seed"));
  r.mean_rmse = parse_number(f[4], "mean_rmse");
  r.std_rmse = parse_number(f[5], "std_rmse");
  r.pred_rmse = parse_number(f[6], "pred_rmse");
  r.kl_to_exact = parse_number(f[7], "kl_to_exact");
  if (!f[8].empty()) r.objective_final = parse_number(f[8], "objective_final");
  if (!f[9].empty()) r.eps_bound = parse_number(f[9], "eps_bound");
  r.wall_time_seconds = parse_number(f[10], "wall_time_seconds");
  r.status = f[11];
  return r;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw Error(ErrorCode::kParseError, "'" + path + "' has an unexpected header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      rows.push_back(parse_row(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

PreparedData prepare_data(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  PreparedData prep;
  prep.data = load_dataset(config.dataset, config.data_seed);
  if (log) {
    *log << "dataset " << prep.data.name << ": N_train=" << prep.data.n_train() << " N_test=" << prep.data.n_test()
         << " d=" << prep.data.dim() << '\n';
  }
  PilotConfig pc = config.pilot;
  pc.m_pilot = std::min(pc.m_pilot, prep.data.n_train());
  pc.seed = derive_seed(config.data_seed, 0x9170);
  prep.pilot = fit_hyperparams_pilot(prep.data.x_train, prep.data.y_train, pc);
  prep.params = prep.pilot.params;
  if (log) {
    *log << "pilot: lengthscales=" << prep.params.lengthscales.transpose() << " signal_variance="
         << prep.params.signal_variance << " noise_variance=" << prep.params.noise_variance << " elbo "
         << prep.pilot.elbo_initial << " -> " << prep.pilot.elbo_final << '\n';
  }
  prep.exact = fit_exact(prep.data.x_train, prep.data.y_train, prep.params);
  prep.exact_test = predict_exact_marginals(prep.exact, prep.data.x_test);
  const Index n_kl = std::min(config.kl_points, prep.data.n_test());
  prep.kl_rows = random_subset(prep.data.n_test(), n_kl, derive_seed(config.data_seed, 0x4b4c));
  std::sort(prep.kl_rows.begin(), prep.kl_rows.end());
  prep.exact_kl = predict_exact(prep.exact, prep.data.x_test.subset(prep.kl_rows));
  return prep;
}

namespace {

Index aux_size_of(const ExperimentConfig& config, const Dataset& data) {
  if (config.aux_size > 0) return std::min(config.aux_size, data.n_train());
  return aux_size_for(data, config.aux_fraction, true);
}

struct Predictions {
  GaussianMarginals test;
  GaussianPosterior kl;
};

}  // namespace

CellOutput run_cell(const ExperimentConfig& config, const PreparedData& prep, Method method, Index m,
                    std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  CellOutput out;
  ResultRow& row = out.row;
  row.dataset = prep.data.name;
  row.method = method_name(method);
  row.m = m;
  row.seed = seed;
  const InputSet& x = prep.data.x_train;
  const VectorXd& y = prep.data.y_train;
  const KernelParams& p = prep.params;
  const InputSet x_kl = prep.data.x_test.subset(prep.kl_rows);
  const Index n = x.size();
  const Index m_eff = std::min(m, n);
  OptimizerConfig opt = config.optimizer;
  opt.seed = derive_seed(seed, static_cast<std::uint64_t>(m) * 8 + static_cast<std::uint64_t>(method));
  try {
    Predictions pred;
    if (method == Method::kPfDtc || method == Method::kVfe) {
      ObjectiveFn fn;
      std::optional<AuxiliaryDistribution> aux;
      if (method == Method::kPfDtc) {
        const auto rows = random_subset(n, aux_size_of(config, prep.data), derive_seed(seed, 0xa0c5));
        if (config.aux_kind == AuxKind::kSubsetOfData) {
          if (!config.validation_mode) {
            throw Error(ErrorCode::kValidationModeRequired, "subset-of-data aux needs validation mode");
          }
          aux = build_aux_subset(x, y, rows, p, kDefaultValidationCap);
        } else {
          aux = build_aux_sor(x, y, rows, p);
        }
        fn = [&](const MatrixXd& z, MatrixXd* grad) {
          const NystromCache cache = build_nystrom(x, InducingSet(z), p);
          PfEvaluation ev = pf_dtc_evaluate(cache, y, *aux, p, grad != nullptr);
          if (grad) *grad = std::move(ev.gradient);
          return ev.terms.relative_objective;
        };
      } else {
        fn = [&](const MatrixXd& z, MatrixXd* grad) {
          if (grad) {
            ValueAndGradient vg = vfe_elbo_with_gradient(x, y, InducingSet(z), p);
            *grad = -vg.gradient;
            return -vg.value;
          }
          return -vfe_elbo(x, y, InducingSet(z), p);
        };
      }
      out.trace = optimize_inducing(fn, x.points(), m_eff, opt);
      const InducingSet xt(out.trace->final_points());
      const NystromCache cache = build_nystrom(x, xt, p);
      pred.test = dtc_predict_marginals(cache, x, y, prep.data.x_test, p);
      pred.kl = dtc_predict(cache, x, y, x_kl, p);
      out.extras["objective_initial"] = out.trace->best().initial_value;
      out.extras["iterations"] = out.trace->iterations_used();
      if (method == Method::kPfDtc) {
        const double relative = out.trace->final_value();
        const double constant = pf_constant_term(y, *aux, p);
        const double full = relative + constant;
        row.objective_final = full;
        out.extras["relative_objective"] = relative;
        out.extras["constant_term"] = constant;
        out.extras["aux_size"] = static_cast<double>(aux->indices().size());
        const double pf_value = pf_divergence_from_scaled(full, p.noise_variance);
        out.extras["pf_divergence"] = pf_value;
        if (config.compute_eps) {
          const double log_ratio = subset_log_density_ratio(x, y, aux->indices(), p);
          row.eps_bound = pf_value == 0.0 ? 0.0 : std::exp(0.5 * log_ratio) * pf_value;
          out.extras["log_density_ratio_bound"] = log_ratio;
          out.eps_heuristic = aux->kind() != AuxKind::kSubsetOfData;
        }
      } else {
        row.objective_final = out.trace->final_value();
      }
    } else if (method == Method::kSor) {
      const auto rows = random_subset(n, m_eff, derive_seed(seed, static_cast<std::uint64_t>(m)));
      const NystromCache cache = build_nystrom(x, InducingSet(x.subset(rows).points()), p);
      pred.test = sor_predict_marginals(cache, x, y, prep.data.x_test, p);
      pred.kl = sor_predict(cache, x, y, x_kl, p);
    } else {
      std::vector<Index> rows;
      if (m_eff == n) {
        rows.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
      } else {
        rows = random_subset(n, m_eff, derive_seed(seed, static_cast<std::uint64_t>(m)));
      }
      VectorXd ys(m_eff);
      for (Index i = 0; i < m_eff; ++i) ys(i) = y(rows[static_cast<std::size_t>(i)]);
      const ExactPosterior sub = fit_exact(x.subset(rows), ys, p);
      pred.test = predict_exact_marginals(sub, prep.data.x_test);
      pred.kl = predict_exact(sub, x_kl);
    }
    row.mean_rmse = rms(pred.test.mean - prep.exact_test.mean);
    row.std_rmse = rms(safe_sqrt(pred.test.var) - safe_sqrt(prep.exact_test.var));
    row.pred_rmse = rms(pred.test.mean - prep.data.y_test);
    row.kl_to_exact = kl_to_exact(pred.kl, prep.exact_kl);
    row.wall_time_seconds = 1.0;  // real value set below
    if (!row.satisfies_invariants()) {
      throw Error(ErrorCode::kNonFiniteObjective, "cell produced non-finite metrics");
    }
  } catch (const Error& e) {
    row.status = std::string("error:") + error_code_name(e.code());
    out.error = e.what();
    out.extras.clear();
    out.extras["error_code"] = static_cast<double>(e.code());
    out.row.objective_final.reset();
    out.row.eps_bound.reset();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean_rmse = row.std_rmse = row.pred_rmse = row.kl_to_exact = nan;
  } catch (const std::exception& e) {
    row.status = "error:Exception";
    out.error = e.what();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean_rmse = row.std_rmse = row.pred_rmse = row.kl_to_exact = nan;
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.wall_time_seconds = std::max(dt, 1e-9);
  return out;
}

namespace {

std::string cell_stem(const ResultRow& r) {
  return r.dataset + "_" + r.method + "_M" + std::to_string(r.m) + "_seed" + std::to_string(r.seed);
}

nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json json_optional(const std::optional<double>& v) {
  return v ? json_number(*v) : nlohmann::json(nullptr);
}

nlohmann::json params_json(const KernelParams& p) {
  std::vector<double> ls(p.lengthscales.data(), p.lengthscales.data() + p.lengthscales.size());
  return {{"kernel", "squared-exponential-ard"},
          {"lengthscales", ls},
          {"signal_variance", p.signal_variance},
          {"noise_variance", p.noise_variance}};
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void write_cell_artifacts(const ExperimentConfig& config, const PreparedData& prep, const CellOutput& cell,
                          const fs::path& runs_dir, const fs::path& traces_dir) {
  const ResultRow& r = cell.row;
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["M"] = r.m;
  j["seed"] = r.seed;
  j["status"] = r.status;
  if (!cell.error.empty()) j["error"] = cell.error;
  j["metrics"] = {{"mean_rmse", json_number(r.mean_rmse)},
                  {"std_rmse", json_number(r.std_rmse)},
                  {"pred_rmse", json_number(r.pred_rmse)},
                  {"kl_to_exact", json_number(r.kl_to_exact)}};
  j["objective_final"] = json_optional(r.objective_final);
  j["objective_units"] = r.method == "pf-dtc" ? "sigma^4-scaled squared pF divergence"
                         : r.method == "vfe" ? "negative ELBO" : "none";
  j["eps_bound"] = json_optional(r.eps_bound);
  if (r.eps_bound) j["eps_bound_heuristic"] = cell.eps_heuristic;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["hyperparameters"] = params_json(prep.params);
  j["aux"] = {{"kind", aux_kind_name(config.aux_kind)}};
  j["optimizer"] = {{"algorithm", algorithm_name(config.optimizer.algorithm)},
                    {"step_size", config.optimizer.step_size},
                    {"max_iters", config.optimizer.max_iters},
                    {"restarts", config.optimizer.restarts}};
  if (cell.trace) {
    j["optimizer"]["winner"] = cell.trace->winner;
    j["optimizer"]["trace_file"] = (traces_dir.filename() / (cell_stem(r) + ".csv")).string();
  }
  nlohmann::json extras = nlohmann::json::object();
  for (const auto& [k, v] : cell.extras) extras[k] = json_number(v);
  j["extras"] = extras;
  j["units"] = "standardized targets";
  write_json(j, runs_dir / (cell_stem(r) + ".json"));
  if (cell.trace) write_trace_csv(*cell.trace, (traces_dir / (cell_stem(r) + ".csv")).string());
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const fs::path out_dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + out_dir.string() + "': " + ec.message());
  const fs::path runs_dir = out_dir / "runs";
  const fs::path traces_dir = out_dir / "traces";
  if (config.write_runs) {
    fs::create_directories(runs_dir, ec);
    fs::create_directories(traces_dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create run directories: " + ec.message());
  }

  const PreparedData prep = prepare_data(config, log);

  struct Cell {
    Method method;
    Index m;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Method method : config.methods)
    for (Index m : config.m_grid)
      for (std::uint64_t s : config.seeds) cells.push_back({method, m, s});

  std::vector<ResultRow> rows(cells.size());
  std::mutex collector;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      CellOutput out = run_cell(config, prep, c.method, c.m, c.seed);
      std::lock_guard<std::mutex> lock(collector);
      if (config.write_runs) write_cell_artifacts(config, prep, out, runs_dir, traces_dir);
      if (log) *log << format_row(out.row) << '\n';
      rows[i] = std::move(out.row);
    }
  };
  const int n_workers = std::max(1, std::min<int>(config.workers, static_cast<int>(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentSummary summary;
  summary.params = prep.params;
  summary.rows = rows;
  for (const auto& r : rows) summary.failed_cells += r.ok() ? 0 : 1;
  summary.results_path = (out_dir / "results.csv").string();
  write_results_csv(rows, summary.results_path);
  summary.artifacts.push_back(summary.results_path);

  nlohmann::json meta;
  meta["dataset"] = prep.data.name;
  meta["n_train"] = prep.data.n_train();
  meta["n_test"] = prep.data.n_test();
  meta["dim"] = prep.data.dim();
  meta["rows_dropped"] = prep.data.rows_dropped;
  meta["data_seed"] = config.data_seed;
  meta["hyperparameters"] = params_json(prep.params);
  meta["pilot"] = {{"m", prep.pilot.inducing_rows.size()},
                   {"elbo_initial", prep.pilot.elbo_initial},
                   {"elbo_final", prep.pilot.elbo_final},
                   {"evaluations", prep.pilot.evaluations}};
  meta["kl_points"] = prep.kl_rows.size();
  meta["failed_cells"] = summary.failed_cells;
  const fs::path meta_path = out_dir / "run_summary.json";
  write_json(meta, meta_path);
  summary.artifacts.push_back(meta_path.string());

  if (config.emit_svg) {
    std::vector<ResultRow> ok_rows;
    for (const auto& r : rows)
      if (r.ok()) ok_rows.push_back(r);
    if (!ok_rows.empty()) {
      for (auto& path : emit_report(ok_rows, ReportOptions{out_dir.string()})) summary.artifacts.push_back(path);
    }
  }
  return summary;
}

}  // namespace pfgp
