#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace pfgp {

using Rng = std::mt19937_64;

// Mixes a base seed with a stream index so that independent consumers
// (restarts, cells, splits) get decorrelated generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// k distinct indices drawn uniformly from [0, n), in draw order.
std::vector<Eigen::Index> random_subset(Eigen::Index n, Eigen::Index k, std::uint64_t seed);

// Standard normal matrix.
Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace pfgp
