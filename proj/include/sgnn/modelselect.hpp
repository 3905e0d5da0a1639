#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/nnet.hpp"
#include "sgnn/simcore.hpp"

namespace sgnn::modelselect {

using simcore::ModelTag;

struct FitConfig {
    std::size_t multistart = 8;
    std::uint64_t seed = 0;
    simcore::CompartmentalInit init;
    std::size_t max_outer = 200;
    std::size_t max_halvings = 50;
    double rel_tol = 1e-10;
    /// Fit box per model; defaults to the generation prior.
    std::optional<simcore::PriorSpec> box;
};

struct FitResult {
    simcore::ParamVector params;
    double rss = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    /// Best RSS after each multistart candidate (non-increasing).
    std::vector<double> best_rss_trace;
    std::size_t discarded = 0;
};

/// Minimise sum_t (observed_t - I_t(theta))^2 over the box by Gauss-Newton
/// with step halving and a central-difference Jacobian, from Latin-hypercube
/// starts. Throws NumericalError when every start fails.
FitResult fit_least_squares(ModelTag tag, std::span<const double> observed, const FitConfig& cfg);

struct AicScore {
    double value = 0.0;
    bool floored = false;  ///< rss <= 1e-300 was floored
};

/// n log(RSS / n) + 2k.
AicScore aic_score(double rss, std::size_t n, std::size_t k);

enum class Choice { SIR, SEIR, Abstain };

const char* to_string(Choice c);

struct SelectOutcome {
    Choice choice = Choice::Abstain;
    double aic_sir = 0.0;
    double aic_seir = 0.0;
    std::optional<FitResult> fit_sir;
    std::optional<FitResult> fit_seir;
};

/// Fit both models (k = 2 for SIR, 3 for SEIR) and pick the lower AIC; ties
/// within 1e-9 go to SIR.
SelectOutcome aic_select(std::span<const double> observed, const FitConfig& cfg);

/// Row-parallel aic_select over the rows of `series`.
std::vector<SelectOutcome> aic_select_batch(const Matrix& series, const FitConfig& cfg, Exec exec = Exec::Parallel);

struct SelectionConfig {
    std::size_t n_total = 8000;
    double train_fraction = 0.75;
    std::size_t steps = 100;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden{256, 256};
    nnet::Activation activation = nnet::Activation::GELU;
    nnet::TrainConfig train;
    FitConfig fit;

    void validate() const;
};

struct TrajectoryDecision {
    std::size_t index = 0;  ///< position within the held-out set
    Choice truth = Choice::SIR;
    Choice aic = Choice::Abstain;
    Choice sgnn = Choice::Abstain;
    double aic_sir = 0.0;
    double aic_seir = 0.0;
};

struct SelectionReport {
    std::vector<double> sgnn_error;  ///< per epoch, on the held-out set
    double aic_error = 0.0;
    std::size_t aic_abstentions = 0;
    std::vector<TrajectoryDecision> decisions;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

SelectionReport run_model_selection_experiment(const SelectionConfig& cfg);

}  // namespace sgnn::modelselect
