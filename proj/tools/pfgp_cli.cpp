// pfgp command-line front end; talks to the library only through pfgp.h.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pfgp/pfgp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitPartial = 2;

int report_error(const char* what, int status) {
  const std::string msg = pfgp_last_error();
  std::cerr << "pfgp " << what << ": " << (msg.empty() ? std::string(pfgp_status_name(status)) : msg) << '\n';
  return kExitIo;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool validation_mode = false;
  bool emit_svg = false;
};

int apply(pfgp_config* cfg, const Overrides& o) {
  int st = PFGP_OK;
  if (o.seed && (st = pfgp_config_set_seed(cfg, *o.seed)) != PFGP_OK) return st;
  if (o.out_dir && (st = pfgp_config_set_out_dir(cfg, o.out_dir->c_str())) != PFGP_OK) return st;
  if (o.validation_mode && (st = pfgp_config_set_validation_mode(cfg, 1)) != PFGP_OK) return st;
  if (o.emit_svg && (st = pfgp_config_set_emit_svg(cfg, 1)) != PFGP_OK) return st;
  return PFGP_OK;
}

int cmd_run(const std::string& config_path, const Overrides& o, bool quiet) {
  pfgp_config* cfg = nullptr;
  int st = pfgp_config_load_file(config_path.c_str(), &cfg);
  if (st != PFGP_OK) return report_error("run", st);
  st = apply(cfg, o);
  if (st != PFGP_OK) {
    pfgp_config_free(cfg);
    return report_error("run", st);
  }
  pfgp_results* res = nullptr;
  st = pfgp_run(cfg, quiet ? 0 : 1, &res);
  pfgp_config_free(cfg);
  if (st != PFGP_OK) return report_error("run", st);
  const size_t n = pfgp_results_count(res);
  const int failed = pfgp_results_failed_cells(res);
  std::printf("%zu cells, %d failed; results in %s\n", n, failed, pfgp_results_path(res));
  for (size_t i = 0; i < n && failed > 0; ++i) {
    pfgp_result_row row;
    if (pfgp_results_row(res, i, &row) == PFGP_OK && std::string(row.status) != "ok") {
      std::printf("  %s M=%lld seed=%llu: %s\n", row.method, static_cast<long long>(row.m),
                  static_cast<unsigned long long>(row.seed), row.status);
    }
  }
  pfgp_results_free(res);
  return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_theory(std::uint64_t seed) {
  int passed = 0, failed = 0;
  const int st = pfgp_theory_check(seed, &passed, &failed);
  if (st != PFGP_OK) return report_error("theory-check", st);
  return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_bench(const std::string& config_path, std::uint64_t seed) {
  pfgp_config* cfg = nullptr;
  int st = pfgp_config_load_file(config_path.c_str(), &cfg);
  if (st != PFGP_OK) return report_error("bench-scaling", st);
  double slope = 0.0;
  st = pfgp_bench_scaling(cfg, seed, &slope);
  pfgp_config_free(cfg);
  if (st != PFGP_OK) return report_error("bench-scaling", st);
  std::printf("slope %.4f (%s 1.3)\n", slope, slope < 1.3 ? "below" : "not below");
  return kExitOk;
}

int cmd_report(const std::string& csv, const std::string& out_dir) {
  pfgp_results* res = nullptr;
  int st = pfgp_results_load(csv.c_str(), &res);
  if (st != PFGP_OK) return report_error("report", st);
  size_t n_files = 0;
  st = pfgp_report(res, out_dir.c_str(), &n_files);
  pfgp_results_free(res);
  if (st != PFGP_OK) return report_error("report", st);
  std::printf("%zu files written to %s\n", n_files, out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse GP inducing-point selection by preconditioned Fisher divergence"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pfgp_version()));

  std::string config_path;
  std::string results_path;
  std::string report_dir;
  std::uint64_t seed = 0;
  Overrides o;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "run the (method, M, seed) sweep described by a config file");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; },
                                          "data seed; cell seeds become seed, seed+1, ...");
  run->add_option_function<std::string>("--out-dir", [&](const std::string& d) { o.out_dir = d; },
                                         "output directory");
  run->add_flag("--validation-mode", o.validation_mode, "allow the subset-of-data auxiliary");
  run->add_flag("--emit-svg", o.emit_svg, "write SVG plots next to results.csv");
  run->add_flag("-q,--quiet", quiet, "no per-cell log");

  auto* theory = app.add_subcommand("theory-check", "finite-dimensional Gaussian divergence checks");
  theory->add_option("--seed", seed, "sweep seed");

  auto* bench = app.add_subcommand("bench-scaling", "objective+gradient wall time against N");
  bench->add_option("--config", config_path, "config file (bench.* keys)")->required()->check(CLI::ExistingFile);
  bench->add_option("--seed", seed, "data seed");

  auto* report = app.add_subcommand("report", "SVG plots from a results CSV");
  report->add_option("--results", results_path, "results.csv")->required();
  report->add_option("--out-dir", report_dir, "output directory (default: next to the CSV)");

  auto* schema = app.add_subcommand("schema", "list config keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitIo;
  }

  if (*run) return cmd_run(config_path, o, quiet);
  if (*theory) return cmd_theory(seed);
  if (*bench) return cmd_bench(config_path, seed);
  if (*report) {
    if (report_dir.empty()) {
      const auto slash = results_path.find_last_of('/');
      report_dir = slash == std::string::npos ? "." : results_path.substr(0, slash);
    }
    return cmd_report(results_path, report_dir);
  }
  if (*schema) {
    std::fputs(pfgp_config_schema(), stdout);
    return kExitOk;
  }
  return kExitIo;
}
