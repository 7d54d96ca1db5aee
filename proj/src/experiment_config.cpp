#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/experiment.hpp"

namespace pfgp {

const char* method_name(Method m) {
  switch (m) {
    case Method::kPfDtc: return "pf-dtc";
    case Method::kVfe: return "vfe";
    case Method::kSor: return "sor";
    case Method::kSubsample: return "subsample";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "pf-dtc") return Method::kPfDtc;
  if (name == "vfe") return Method::kVfe;
  if (name == "sor") return Method::kSor;
  if (name == "subsample") return Method::kSubsample;
  throw Error(ErrorCode::kConfigError, "unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (methods.empty()) fail("methods must be non-empty");
  if (m_grid.empty()) fail("m_grid must be non-empty");
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    if (m_grid[i] < 1) fail("m_grid entries must be >= 1");
    if (i > 0 && m_grid[i] <= m_grid[i - 1]) fail("m_grid must be strictly ascending");
  }
  if (seeds.empty()) fail("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be distinct");
  if (!(aux_fraction > 0.0) || aux_fraction > 1.0) fail("aux.fraction must lie in (0, 1]");
  if (aux_size < 0) fail("aux.size must be >= 0");
  if (kl_points < 1) fail("kl_points must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (pilot.m_pilot < 1) fail("pilot.m must be >= 1");
  if (dataset.source == DataSource::kCsv && dataset.path.empty()) fail("dataset.path is empty");
  if (dataset.n_total < 2) fail("dataset.n_total must be >= 2");
  if (bench.n_values.size() < 2) fail("bench.n_values needs at least two sizes");
  if (bench.m < 1 || bench.aux_size < 1 || bench.repeats < 1) fail("bench.m, bench.aux_size, bench.repeats must be >= 1");
  try {
    optimizer.validate();
    dataset.gen.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kConfigError, key + ": '" + v + "' is not a number");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kConfigError, key + ": '" + v + "' is not an integer");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::kConfigError, key + ": '" + v + "' is not a boolean");
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  if (i < 0) throw Error(ErrorCode::kConfigError, key + ": seeds must be >= 0");
  return static_cast<std::uint64_t>(i);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, std::pair<std::string, Setter>>>& setters() {
  static const std::vector<std::pair<std::string, std::pair<std::string, Setter>>> table = {
      {"dataset", {"synthetic | registry name for a CSV source",
                   [](ExperimentConfig& c, const std::string&, const std::string& v) { c.dataset.name = v; }}},
      {"dataset.path", {"CSV file; switches the source to CSV",
                        [](ExperimentConfig& c, const std::string&, const std::string& v) {
                          c.dataset.path = v;
                          c.dataset.source = DataSource::kCsv;
                        }}},
      {"dataset.target", {"target column name or 0-based index (default: last)",
                          [](ExperimentConfig& c, const std::string&, const std::string& v) { c.dataset.target = v; }}},
      {"dataset.features", {"comma list of feature columns (default: all others)",
                            [](ExperimentConfig& c, const std::string&, const std::string& v) {
                              c.dataset.features = split_list(v);
                            }}},
      {"dataset.n_total", {"synthetic rows before the split (default 2000)",
                           [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                             c.dataset.n_total = to_int(k, v);
                           }}},
      {"dataset.gen_lengthscale", {"synthetic generator lengthscale (default 0.5)",
                                   [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                     c.dataset.gen.lengthscales.setConstant(to_double(k, v));
                                   }}},
      {"dataset.gen_signal_variance", {"synthetic generator signal variance (default 1)",
                                       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                         c.dataset.gen.signal_variance = to_double(k, v);
                                       }}},
      {"dataset.gen_noise_variance", {"synthetic generator noise variance (default 0.05)",
                                      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                        c.dataset.gen.noise_variance = to_double(k, v);
                                      }}},
      {"data_seed", {"seed of the split, pilot and KL subset (default 0)",
                     [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                       c.data_seed = to_seed(k, v);
                     }}},
      {"methods", {"comma list of pf-dtc, vfe, sor, subsample",
                   [](ExperimentConfig& c, const std::string&, const std::string& v) {
                     c.methods.clear();
                     for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
                   }}},
      {"m_grid", {"ascending comma list of inducing-set sizes",
                  [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                    c.m_grid.clear();
                    for (const auto& m : split_list(v)) c.m_grid.push_back(to_int(k, m));
                  }}},
      {"seeds", {"comma list of cell seeds",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   c.seeds.clear();
                   for (const auto& s : split_list(v)) c.seeds.push_back(to_seed(k, s));
                 }}},
      {"seed_count", {"shorthand for seeds = 0..n-1",
                      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        const long long n = to_int(k, v);
                        if (n < 1) throw Error(ErrorCode::kConfigError, "seed_count must be >= 1");
                        c.seeds.clear();
                        for (long long i = 0; i < n; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
                      }}},
      {"aux.kind", {"sor | subset",
                    [](ExperimentConfig& c, const std::string&, const std::string& v) {
                      try {
                        c.aux_kind = parse_aux_kind(v);
                      } catch (const Error& e) {
                        throw Error(ErrorCode::kConfigError, e.what());
                      }
                    }}},
      {"aux.fraction", {"aux subset fraction of N_train (default 0.1)",
                        [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                          c.aux_fraction = to_double(k, v);
                        }}},
      {"aux.size", {"explicit aux subset size; 0 = registry or fraction",
                    [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                      c.aux_size = to_int(k, v);
                    }}},
      {"optimizer.algorithm", {"adam | gd",
                               [](ExperimentConfig& c, const std::string&, const std::string& v) {
                                 try {
                                   c.optimizer.algorithm = parse_algorithm(v);
                                 } catch (const Error& e) {
                                   throw Error(ErrorCode::kConfigError, e.what());
                                 }
                               }}},
      {"optimizer.step_size", {"initial step / Adam learning rate (default 0.01)",
                               [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 c.optimizer.step_size = to_double(k, v);
                               }}},
      {"optimizer.max_iters", {"iterations per restart (default 500)",
                               [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 c.optimizer.max_iters = static_cast<int>(to_int(k, v));
                               }}},
      {"optimizer.grad_tol", {"gradient-norm stopping tolerance (default 1e-6)",
                              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                c.optimizer.grad_tol = to_double(k, v);
                              }}},
      {"optimizer.restarts", {"random restarts (default 5)",
                              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                c.optimizer.restarts = static_cast<int>(to_int(k, v));
                              }}},
      {"optimizer.parallel", {"run restarts on threads (default false)",
                              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                c.optimizer.parallel = to_bool(k, v);
                              }}},
      {"pilot.m", {"pilot inducing points (default 200)",
                   [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                     c.pilot.m_pilot = to_int(k, v);
                   }}},
      {"pilot.max_evals", {"Nelder-Mead evaluation budget (default 400)",
                           [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                             c.pilot.simplex.max_evals = static_cast<int>(to_int(k, v));
                           }}},
      {"out_dir", {"output directory (default results)",
                   [](ExperimentConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }}},
      {"emit_svg", {"write SVG charts (default false)",
                    [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                      c.emit_svg = to_bool(k, v);
                    }}},
      {"validation_mode", {"allow O(N^2) aux products up to the cap (default false)",
                           [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                             c.validation_mode = to_bool(k, v);
                           }}},
      {"compute_eps", {"report the eps bound for pf-dtc rows (default false)",
                       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                         c.compute_eps = to_bool(k, v);
                       }}},
      {"write_runs", {"write per-run JSON and trace files (default true)",
                      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                        c.write_runs = to_bool(k, v);
                      }}},
      {"kl_points", {"test points in the joint KL (default 200)",
                     [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                       c.kl_points = to_int(k, v);
                     }}},
      {"workers", {"cell worker threads (default 1)",
                   [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                     c.workers = static_cast<int>(to_int(k, v));
                   }}},
      {"bench.n_values", {"bench-scaling training sizes (default 1000,2000,4000,8000)",
                          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                            c.bench.n_values.clear();
                            for (const auto& n : split_list(v)) c.bench.n_values.push_back(to_int(k, n));
                          }}},
      {"bench.m", {"bench-scaling inducing points (default 20)",
                   [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                     c.bench.m = to_int(k, v);
                   }}},
      {"bench.aux_size", {"bench-scaling SoR aux size (default 40)",
                          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                            c.bench.aux_size = to_int(k, v);
                          }}},
      {"bench.repeats", {"timed evaluations per size (default 5)",
                         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                           c.bench.repeats = static_cast<int>(to_int(k, v));
                         }}},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
    if (it == table.end()) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second.second(c, key, value);
  }
  if (c.dataset.gen.dim() != 1) c.dataset.gen.lengthscales = VectorXd::Constant(1, c.dataset.gen.lengthscales(0));
  c.validate();
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_schema() {
  std::ostringstream os;
  for (const auto& [key, entry] : setters()) os << key << " = " << entry.first << '\n';
  return os.str();
}

}  // namespace pfgp
