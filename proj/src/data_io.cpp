#include "pfgp/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/psd_linalg.hpp"

namespace pfgp {

Standardization Standardization::fit(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() < 1 || y.size() != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "Standardization::fit: empty or mismatched data");
  }
  Standardization s;
  const auto n = static_cast<double>(x.rows());
  s.x_mean = x.colwise().mean().transpose();
  s.x_scale = ((x.rowwise() - s.x_mean.transpose()).colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Index j = 0; j < s.x_scale.size(); ++j) {
    if (!(s.x_scale(j) > 0.0)) s.x_scale(j) = 1.0;
  }
  s.y_mean = y.mean();
  s.y_scale = std::sqrt((y.array() - s.y_mean).square().sum() / n);
  if (!(s.y_scale > 0.0)) s.y_scale = 1.0;
  return s;
}

MatrixXd Standardization::apply_x(const MatrixXd& x) const {
  return (x.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
}

VectorXd Standardization::apply_y(const VectorXd& y) const {
  return (y.array() - y_mean) / y_scale;
}

VectorXd Standardization::unstandardize_y(const VectorXd& y) const {
  return (y.array() * y_scale + y_mean).matrix();
}

KernelParams Standardization::to_standardized(const KernelParams& raw) const {
  KernelParams out = raw;
  out.lengthscales = raw.lengthscales.cwiseQuotient(x_scale);
  out.signal_variance = raw.signal_variance / (y_scale * y_scale);
  out.noise_variance = raw.noise_variance / (y_scale * y_scale);
  return out;
}

const std::vector<RegistryEntry>& dataset_registry() {
  static const std::vector<RegistryEntry> entries = {
      {"synthetic", 1000, 1000, 1, 100}, {"delays10k", 8000, 2000, 8, 800},
      {"abalone", 3177, 1000, 8, 300},   {"airfoil", 1103, 400, 5, 100},
      {"ccpp", 7568, 2000, 4, 700},      {"wine", 3898, 1000, 11, 300},
  };
  return entries;
}

std::optional<RegistryEntry> find_registry(const std::string& name) {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& e : dataset_registry()) {
    if (e.name == key) return e;
  }
  return std::nullopt;
}

Index test_size_for(Index n_total) {
  if (n_total < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 rows to split");
  const auto fifth = static_cast<Index>(std::ceil(0.2 * static_cast<double>(n_total)));
  return std::min(std::max<Index>(1000, fifth), n_total - 1);
}

SplitSizes split_sizes(const std::string& name, Index n_total, Index dim) {
  SplitSizes out;
  const auto reg = find_registry(name);
  if (reg && reg->n_train + reg->n_test == n_total) {
    out.n_train = reg->n_train;
    out.n_test = reg->n_test;
    out.from_registry = true;
  } else {
    out.n_test = test_size_for(n_total);
    out.n_train = n_total - out.n_test;
  }
  if (reg && (!out.from_registry || reg->dim != dim)) {
    std::clog << "warning: dataset '" << name << "' has " << n_total << " rows and d=" << dim
              << "; registry expects " << reg->n_train << "+" << reg->n_test << " rows and d=" << reg->dim
              << '\n';
  }
  return out;
}

VectorXd sample_prior(const MatrixXd& points, const KernelParams& p, Rng& rng) {
  const CholFactor l = chol_psd(detail::kernel_self(points, p));
  return l.lower.triangularView<Eigen::Lower>() * standard_normal(points.rows(), 1, rng).col(0);
}

namespace {

Dataset split_and_standardize(const std::string& name, std::uint64_t seed, const MatrixXd& x,
                              const VectorXd& y) {
  const Index n = x.rows();
  const SplitSizes sizes = split_sizes(name, n, x.cols());
  const std::vector<Index> perm = random_subset(n, n, derive_seed(seed, 0x5b17));
  Dataset d;
  d.name = name;
  d.seed = seed;
  d.test_rows.assign(perm.begin(), perm.begin() + sizes.n_test);
  d.train_rows.assign(perm.begin() + sizes.n_test, perm.end());
  MatrixXd xtr(sizes.n_train, x.cols());
  VectorXd ytr(sizes.n_train);
  MatrixXd xte(sizes.n_test, x.cols());
  VectorXd yte(sizes.n_test);
  for (Index i = 0; i < sizes.n_train; ++i) {
    xtr.row(i) = x.row(d.train_rows[static_cast<std::size_t>(i)]);
    ytr(i) = y(d.train_rows[static_cast<std::size_t>(i)]);
  }
  for (Index i = 0; i < sizes.n_test; ++i) {
    xte.row(i) = x.row(d.test_rows[static_cast<std::size_t>(i)]);
    yte(i) = y(d.test_rows[static_cast<std::size_t>(i)]);
  }
  d.standardization = Standardization::fit(xtr, ytr);
  d.x_train = InputSet(d.standardization.apply_x(xtr));
  d.x_test = InputSet(d.standardization.apply_x(xte));
  d.y_train = d.standardization.apply_y(ytr);
  d.y_test = d.standardization.apply_y(yte);
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& s) {
  std::string low = s;
  std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
  return low.empty() || low == "na" || low == "nan" || low == "?" || low == "null";
}

Index resolve_column(const std::vector<std::string>& header, const std::string& key) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == key) return static_cast<Index>(i);
  }
  if (!key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const Index idx = std::stol(key);
    if (idx < static_cast<Index>(header.size())) return idx;
  }
  throw Error(ErrorCode::kParseError, "column '" + key + "' not found in header");
}

}  // namespace

Dataset generate_synthetic(Index n_total, std::uint64_t seed, const KernelParams& gen) {
  if (n_total < 2) throw Error(ErrorCode::kInvalidArgument, "generate_synthetic: n_total must be >= 2");
  gen.validate();
  Rng rng(derive_seed(seed, 0x51a7));
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  MatrixXd x(n_total, gen.dim());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = unif(rng);
  }
  const VectorXd f = sample_prior(x, gen, rng);
  const VectorXd y = f + std::sqrt(gen.noise_variance) * standard_normal(n_total, 1, rng).col(0);
  return split_and_standardize("synthetic", seed, x, y);
}

Dataset load_csv(const DatasetSpec& spec, std::uint64_t seed) {
  std::ifstream in(spec.path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open '" + spec.path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "'" + spec.path + "' has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const std::vector<std::string> header = split_csv_line(line);
  const Index target = spec.target.empty() ? static_cast<Index>(header.size()) - 1
                                           : resolve_column(header, spec.target);
  std::vector<Index> features;
  if (spec.features.empty()) {
    for (Index j = 0; j < static_cast<Index>(header.size()); ++j) {
      if (j != target) features.push_back(j);
    }
  } else {
    for (const auto& f : spec.features) {
      const Index j = resolve_column(header, f);
      if (j == target) throw Error(ErrorCode::kConfigError, "feature list contains the target column");
      features.push_back(j);
    }
  }
  if (features.empty()) throw Error(ErrorCode::kParseError, "no feature columns");

  std::vector<std::vector<double>> rows;
  Index dropped = 0;
  Index row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> vals;
    vals.reserve(features.size() + 1);
    bool missing = false;
    auto read = [&](Index col) {
      if (col >= static_cast<Index>(cells.size()) || is_missing(cells[static_cast<std::size_t>(col)])) {
        missing = true;
        return;
      }
      const std::string& cell = cells[static_cast<std::size_t>(col)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || !std::isfinite(v)) {
        std::ostringstream os;
        os << "row " << row_no << ", column '" << header[static_cast<std::size_t>(col)] << "': '" << cell
           << "' is not a finite number";
        throw Error(ErrorCode::kParseError, os.str());
      }
      vals.push_back(v);
    };
    for (Index j : features) read(j);
    read(target);
    if (missing) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(vals));
  }
  if (dropped > 0) std::clog << "load_csv: dropped " << dropped << " rows with missing values\n";
  if (rows.size() < 2) throw Error(ErrorCode::kEmptyAfterCleaning, "'" + spec.path + "' has fewer than 2 usable rows");
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(features.size());
  MatrixXd x(n, d);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    y(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  }
  Dataset out = split_and_standardize(spec.name, seed, x, y);
  out.rows_dropped = dropped;
  return out;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.source == DataSource::kCsv) return load_csv(spec, seed);
  return generate_synthetic(spec.n_total, seed, spec.gen);
}

Index aux_size_for(const Dataset& data, double fraction, bool use_registry) {
  if (!(fraction > 0.0) || fraction > 1.0) throw Error(ErrorCode::kInvalidArgument, "aux fraction must lie in (0, 1]");
  if (use_registry) {
    if (const auto reg = find_registry(data.name)) return std::min(reg->aux_size, data.n_train());
  }
  const auto k = static_cast<Index>(std::ceil(fraction * static_cast<double>(data.n_train()) - 1e-9));
  return std::clamp<Index>(k, 1, data.n_train());
}

std::vector<Index> draw_aux_subset(const Dataset& data, double fraction, std::uint64_t seed, bool use_registry) {
  return random_subset(data.n_train(), aux_size_for(data, fraction, use_registry), seed);
}

}  // namespace pfgp
