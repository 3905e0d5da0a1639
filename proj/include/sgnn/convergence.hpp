#pragma once

#include <vector>

#include "sgnn/nnet.hpp"
#include "sgnn/oracle.hpp"

namespace sgnn::convergence {

/// SGNN regression of the diagonal-LDS parameters against the kernel
/// Monte Carlo approximation of the Bayes-optimal predictor, for growing
/// training-set sizes.
struct ConvergenceConfig {
    std::vector<std::size_t> train_sizes{1000, 10000, 100000};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t library_size = 10000;
    std::size_t n_test = 1000;
    double process_sigma = 0.1;
    oracle::BandwidthRule bandwidth = oracle::BandwidthRule::MedianSquaredDistance;
    std::vector<std::size_t> hidden{128, 128};
    nnet::Activation activation = nnet::Activation::GELU;
    nnet::TrainConfig train;

    void validate() const;
};

struct ConvergenceRow {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double mse_to_oracle = 0.0;        ///< mean ||f(x) - kernel(x)||^2
    double mse_to_theta = 0.0;         ///< mean ||f(x) - theta||^2
    double kernel_baseline_mse = 0.0;  ///< mean ||kernel(x) - theta||^2
    double bandwidth = 0.0;
};

/// One row per (seed, N), seeds outermost.
std::vector<ConvergenceRow> run_bayes_convergence(const ConvergenceConfig& cfg);

struct ConvergenceSummary {
    std::size_t n = 0;
    double mse_to_oracle = 0.0;
    double mse_to_theta = 0.0;
    double kernel_baseline_mse = 0.0;
};

/// Per-N medians over seeds, in train_sizes order.
std::vector<ConvergenceSummary> summarize(const std::vector<ConvergenceRow>& rows);

}  // namespace sgnn::convergence
