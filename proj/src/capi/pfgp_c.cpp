#include "pfgp/pfgp.h"

#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "pfgp/error.hpp"
#include "pfgp/experiment.hpp"

struct pfgp_config {
  pfgp::ExperimentConfig cfg;
};

struct pfgp_results {
  std::vector<pfgp::ResultRow> rows;
  int failed = 0;
  std::optional<std::string> path;
};

struct pfgp_aux {
  pfgp::InputSet x;
  Eigen::VectorXd y;
  pfgp::KernelParams params;
  std::optional<pfgp::AuxiliaryDistribution> aux;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return PFGP_OK;
  } catch (const pfgp::Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PFGP_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(PFGP_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(PFGP_INTERNAL_ERROR, "unknown exception");
  }
}

#define PFGP_REQUIRE(cond, what) \
  if (!(cond)) throw pfgp::Error(pfgp::ErrorCode::kInvalidArgument, what)

Eigen::MatrixXd row_major(const double* data, size_t n, size_t d) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * d + j];
  return m;
}

pfgp::KernelParams to_params(const pfgp_kernel_params* p) {
  PFGP_REQUIRE(p && p->lengthscales && p->dim > 0, "kernel params need lengthscales");
  pfgp::KernelParams k;
  k.lengthscales = Eigen::Map<const Eigen::VectorXd>(p->lengthscales, static_cast<Eigen::Index>(p->dim));
  k.signal_variance = p->signal_variance;
  k.noise_variance = p->noise_variance;
  k.validate();
  return k;
}

}  // namespace

extern "C" {

const char* pfgp_version(void) { return "0.1.0"; }

const char* pfgp_last_error(void) { return g_last_error.c_str(); }

const char* pfgp_status_name(int status) {
  if (status == PFGP_OK) return "Ok";
  if (status == PFGP_INTERNAL_ERROR) return "InternalError";
  if (status < 0 || status > PFGP_CONFIG_ERROR) return "Unknown";
  return pfgp::error_code_name(static_cast<pfgp::ErrorCode>(status));
}

int pfgp_config_load_file(const char* path, pfgp_config** out) {
  return guarded([&] {
    PFGP_REQUIRE(path && out, "null argument");
    *out = nullptr;
    auto c = std::make_unique<pfgp_config>();
    c->cfg = pfgp::parse_config_file(path);
    *out = c.release();
  });
}

int pfgp_config_parse(const char* text, pfgp_config** out) {
  return guarded([&] {
    PFGP_REQUIRE(text && out, "null argument");
    *out = nullptr;
    auto c = std::make_unique<pfgp_config>();
    c->cfg = pfgp::parse_config_text(text);
    *out = c.release();
  });
}

void pfgp_config_free(pfgp_config* cfg) { delete cfg; }

int pfgp_config_set_seed(pfgp_config* cfg, uint64_t seed) {
  return guarded([&] {
    PFGP_REQUIRE(cfg, "null config");
    // data seed and cell seeds shift together: seeds become seed, seed+1, ...
    cfg->cfg.data_seed = seed;
    for (size_t i = 0; i < cfg->cfg.seeds.size(); ++i) cfg->cfg.seeds[i] = seed + i;
  });
}

int pfgp_config_set_out_dir(pfgp_config* cfg, const char* dir) {
  return guarded([&] {
    PFGP_REQUIRE(cfg && dir && *dir, "null config or empty directory");
    cfg->cfg.out_dir = dir;
  });
}

int pfgp_config_set_validation_mode(pfgp_config* cfg, int enabled) {
  return guarded([&] {
    PFGP_REQUIRE(cfg, "null config");
    cfg->cfg.validation_mode = enabled != 0;
  });
}

int pfgp_config_set_emit_svg(pfgp_config* cfg, int enabled) {
  return guarded([&] {
    PFGP_REQUIRE(cfg, "null config");
    cfg->cfg.emit_svg = enabled != 0;
  });
}

int pfgp_config_get_out_dir(const pfgp_config* cfg, const char** out) {
  return guarded([&] {
    PFGP_REQUIRE(cfg && out, "null argument");
    *out = cfg->cfg.out_dir.c_str();
  });
}

const char* pfgp_config_schema(void) {
  static const std::string schema = pfgp::config_schema();
  return schema.c_str();
}

int pfgp_run(const pfgp_config* cfg, int verbose, pfgp_results** out) {
  return guarded([&] {
    PFGP_REQUIRE(cfg && out, "null argument");
    *out = nullptr;
    pfgp::ExperimentSummary s = pfgp::run_experiment(cfg->cfg, verbose ? &std::cerr : nullptr);
    auto r = std::make_unique<pfgp_results>();
    r->rows = std::move(s.rows);
    r->failed = s.failed_cells;
    r->path = s.results_path;
    *out = r.release();
  });
}

int pfgp_results_load(const char* csv_path, pfgp_results** out) {
  return guarded([&] {
    PFGP_REQUIRE(csv_path && out, "null argument");
    *out = nullptr;
    auto r = std::make_unique<pfgp_results>();
    r->rows = pfgp::read_results_csv(csv_path);
    for (const auto& row : r->rows) r->failed += row.ok() ? 0 : 1;
    *out = r.release();
  });
}

void pfgp_results_free(pfgp_results* res) { delete res; }

size_t pfgp_results_count(const pfgp_results* res) { return res ? res->rows.size() : 0; }

int pfgp_results_failed_cells(const pfgp_results* res) { return res ? res->failed : 0; }

const char* pfgp_results_path(const pfgp_results* res) {
  return res && res->path ? res->path->c_str() : nullptr;
}

int pfgp_results_row(const pfgp_results* res, size_t i, pfgp_result_row* out) {
  return guarded([&] {
    PFGP_REQUIRE(res && out, "null argument");
    if (i >= res->rows.size()) throw pfgp::Error(pfgp::ErrorCode::kIndexOutOfRange, "row index out of range");
    const pfgp::ResultRow& r = res->rows[i];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out->dataset = r.dataset.c_str();
    out->method = r.method.c_str();
    out->m = r.m;
    out->seed = r.seed;
    out->mean_rmse = r.mean_rmse;
    out->std_rmse = r.std_rmse;
    out->pred_rmse = r.pred_rmse;
    out->kl_to_exact = r.kl_to_exact;
    out->objective_final = r.objective_final.value_or(nan);
    out->eps_bound = r.eps_bound.value_or(nan);
    out->wall_time_seconds = r.wall_time_seconds;
    out->status = r.status.c_str();
  });
}

int pfgp_report(const pfgp_results* res, const char* out_dir, size_t* n_files) {
  return guarded([&] {
    PFGP_REQUIRE(res && out_dir, "null argument");
    const auto files = pfgp::emit_report(res->rows, pfgp::ReportOptions{out_dir});
    if (n_files) *n_files = files.size();
  });
}

int pfgp_theory_check(uint64_t seed, int* passed, int* failed) {
  return guarded([&] {
    const pfgp::TheoryCheckResult r = pfgp::theory_check(std::cout, seed);
    if (passed) *passed = r.passed;
    if (failed) *failed = r.failed;
  });
}

int pfgp_bench_scaling(const pfgp_config* cfg, uint64_t seed, double* slope) {
  return guarded([&] {
    PFGP_REQUIRE(cfg, "null config");
    const pfgp::BenchResult r = pfgp::bench_scaling(cfg->cfg.bench, seed, &std::cout);
    if (slope) *slope = r.slope;
  });
}

int pfgp_aux_create(int kind, const double* x, size_t n, size_t d, const double* y, const int64_t* rows,
                    size_t n_rows, const pfgp_kernel_params* params, pfgp_aux** out) {
  return guarded([&] {
    PFGP_REQUIRE(x && y && rows && out && n > 0 && d > 0 && n_rows > 0, "null or empty argument");
    *out = nullptr;
    auto a = std::make_unique<pfgp_aux>();
    a->params = to_params(params);
    if (a->params.dim() != static_cast<Eigen::Index>(d)) {
      throw pfgp::Error(pfgp::ErrorCode::kDimensionMismatch, "lengthscale count differs from d");
    }
    a->x = pfgp::InputSet(row_major(x, n, d));
    a->y = Eigen::Map<const Eigen::VectorXd>(y, static_cast<Eigen::Index>(n));
    std::vector<Eigen::Index> subset(rows, rows + n_rows);
    if (kind == PFGP_AUX_SUBSET) {
      a->aux = pfgp::build_aux_subset(a->x, a->y, subset, a->params);
    } else if (kind == PFGP_AUX_SOR) {
      a->aux = pfgp::build_aux_sor(a->x, a->y, subset, a->params);
    } else {
      throw pfgp::Error(pfgp::ErrorCode::kAuxKindUnsupported, "unknown aux kind " + std::to_string(kind));
    }
    *out = a.release();
  });
}

void pfgp_aux_free(pfgp_aux* aux) { delete aux; }

int pfgp_pf_objective(const pfgp_aux* aux, const double* xt, size_t m, double* value, double* grad) {
  return guarded([&] {
    PFGP_REQUIRE(aux && xt && value && m > 0, "null argument");
    const size_t d = static_cast<size_t>(aux->x.dim());
    const pfgp::InducingSet ind(row_major(xt, m, d));
    const pfgp::NystromCache cache = pfgp::build_nystrom(aux->x, ind, aux->params);
    const pfgp::PfEvaluation ev = pfgp::pf_dtc_evaluate(cache, aux->y, *aux->aux, aux->params, grad != nullptr);
    *value = ev.terms.relative_objective;
    if (grad) {
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < d; ++j)
          grad[i * d + j] = ev.gradient(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  });
}

int pfgp_pf_constant(const pfgp_aux* aux, double* value) {
  return guarded([&] {
    PFGP_REQUIRE(aux && value, "null argument");
    *value = pfgp::pf_constant_term(aux->y, *aux->aux, aux->params);
  });
}

}  // extern "C"
