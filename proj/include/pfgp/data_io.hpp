#pragma once

// Datasets: synthetic prior draws, CSV ingestion, standardization and the
// train/test/aux splitting protocol.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfgp/kernels.hpp"
#include "pfgp/random.hpp"

namespace pfgp {

// Affine maps fitted on training data only. Scales use the population
// standard deviation; constant columns get scale 1.
struct Standardization {
  VectorXd x_mean;
  VectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Standardization fit(const MatrixXd& x, const VectorXd& y);
  [[nodiscard]] MatrixXd apply_x(const MatrixXd& x) const;
  [[nodiscard]] VectorXd apply_y(const VectorXd& y) const;
  [[nodiscard]] VectorXd unstandardize_y(const VectorXd& y) const;
  // Kernel hyperparameters re-expressed in standardized units.
  [[nodiscard]] KernelParams to_standardized(const KernelParams& raw) const;
};

struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  InputSet x_train;
  InputSet x_test;
  VectorXd y_train;
  VectorXd y_test;
  Standardization standardization;
  std::vector<Index> train_rows;  // positions in the cleaned source table
  std::vector<Index> test_rows;
  Index rows_dropped = 0;

  [[nodiscard]] Index n_train() const { return x_train.size(); }
  [[nodiscard]] Index n_test() const { return x_test.size(); }
  [[nodiscard]] Index dim() const { return x_train.dim(); }
};

struct RegistryEntry {
  std::string name;
  Index n_train = 0;
  Index n_test = 0;
  Index dim = 0;
  Index aux_size = 0;
};

const std::vector<RegistryEntry>& dataset_registry();
std::optional<RegistryEntry> find_registry(const std::string& name);

enum class DataSource { kSynthetic, kCsv };

struct DatasetSpec {
  DataSource source = DataSource::kSynthetic;
  std::string name = "synthetic";
  std::string path;
  std::string target;                 // column name, or a 0-based index; empty = last column
  std::vector<std::string> features;  // empty = every other column
  Index n_total = 2000;               // synthetic only
  KernelParams gen = KernelParams::isotropic(1, 0.5, 1.0, 0.05);
};

// max(1000, ceil(0.2 n_total)), capped at n_total - 1.
Index test_size_for(Index n_total);

struct SplitSizes {
  Index n_train = 0;
  Index n_test = 0;
  bool from_registry = false;
};

// Registry sizes win when they account for every row; otherwise the
// held-out rule applies and a mismatch warning goes to std::clog.
SplitSizes split_sizes(const std::string& name, Index n_total, Index dim);

// Zero-mean GP prior draw at the given points (jittered Cholesky).
VectorXd sample_prior(const MatrixXd& points, const KernelParams& p, Rng& rng);

// Inputs uniform on [-3, 3]^d, f from the GP prior, y = f + noise.
Dataset generate_synthetic(Index n_total, std::uint64_t seed, const KernelParams& gen);

Dataset load_csv(const DatasetSpec& spec, std::uint64_t seed);

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

// ceil(fraction * N_train) distinct train indices, or the registry aux size
// when one exists and use_registry is set.
Index aux_size_for(const Dataset& data, double fraction, bool use_registry = true);
std::vector<Index> draw_aux_subset(const Dataset& data, double fraction, std::uint64_t seed,
                                   bool use_registry = false);

}  // namespace pfgp
