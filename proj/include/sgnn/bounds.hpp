#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/datagen.hpp"
#include "sgnn/nnet.hpp"
#include "sgnn/rng.hpp"

namespace sgnn::bounds {

struct RiskEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

using Predictor = std::function<std::vector<double>(std::span<const double>)>;

/// Sample mean and standard error of per-example losses.
RiskEstimate estimate_risk(const Predictor& f, const datagen::Dataset& ds, const nnet::LossSpec& loss);
RiskEstimate estimate_risk(const Predictor& f, const Matrix& inputs, const Matrix& targets, const nnet::LossSpec& loss);
/// Summary statistics of an already-computed per-example loss vector.
RiskEstimate summarize_losses(std::span<const double> losses);

/// min(1, delta * sqrt(d) / sigma).
double tv_worst_case(double delta, std::size_t d, double sigma);

/// min(1, mean_x ||(A* - A0) x|| / (2 sigma)) over the rows of `inputs`.
double tv_empirical(const Matrix& a0, const Matrix& a_star, const Matrix& inputs, double sigma);

/// Monte Carlo E_sigma[ max_k (1/n) sum_i sigma_i values(i, k) ] with i.i.d. Rademacher signs.
double rademacher_finite(const Matrix& values, std::size_t trials, RngStream& rng);

/// 4 L R + 6 B sqrt(log(2 / delta) / (2 n)).
double excess_risk_bound(double rademacher, double lipschitz_l, double bound_b, std::size_t n, double delta);

/// syn_excess + 2 l_max tv.
double mismatch_bound(double syn_excess, double l_max, double tv);

struct MismatchRow {
    std::uint64_t seed = 0;
    double delta = 0.0;
    double real_loss = 0.0;
    double real_loss_se = 0.0;
    double syn_loss = 0.0;
    double bayes_risk = 0.0;  ///< d sigma^2, identical under D_syn and D_real
    double real_excess = 0.0;
    double syn_excess = 0.0;
    double tv_worst = 0.0;
    double tv_empirical = 0.0;
    double l_max = 0.0;
    double bound_worst = 0.0;
    double bound_empirical = 0.0;
    double mean_input_norm = 0.0;
};

struct SweepConfig {
    std::size_t d = 2;
    double sigma = 0.5;
    Matrix a0;  ///< empty means diag(0.9, 0.8, ...)
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    std::size_t steps = 10;
    std::size_t n_train = 20000;
    std::size_t n_test = 5000;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<std::size_t> hidden{64, 64};
    nnet::Activation activation = nnet::Activation::GELU;
    nnet::TrainConfig train;
    double l_max_quantile = 0.999;

    void validate() const;
    Matrix resolved_a0() const;
};

/// One row per (seed, delta), seeds outermost.
std::vector<MismatchRow> mismatch_sweep(const SweepConfig& cfg, Exec exec = Exec::Parallel);

/// Per-delta median over seeds of every numeric column; `seed` holds the seed count.
std::vector<MismatchRow> aggregate_medians(const std::vector<MismatchRow>& rows);

}  // namespace sgnn::bounds
