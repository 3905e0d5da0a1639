#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sgnn/common.hpp"
#include "sgnn/simcore.hpp"

namespace sgnn::datagen {

using simcore::ModelTag;

enum class TargetKind {
    Params,      ///< y = theta
    Forecast,    ///< input = first input_len observed steps, target = next horizon steps
    ModelClass,  ///< balanced SIR/SEIR, one-hot target (SIR = 0, SEIR = 1)
    NextState,   ///< LDS one-step prediction: x_t from the A0 chain, x_{t+1} = dynamics() x_t + noise
};

const char* to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& s);

/// Test-time perturbation A* = A0 + delta * U with ||U||_F = 1.
struct Mismatch {
    double delta = 0.0;
    std::uint64_t seed = 0;
};

struct TaskSpec {
    ModelTag model = ModelTag::LDS;  // ignored for ModelClass
    std::size_t steps = 10;
    simcore::ObservationSpec obs{0.0, {0, 1}};
    simcore::PriorSpec prior = simcore::lds_prior();  // ModelClass: the SEIR prior
    TargetKind target = TargetKind::Params;
    std::size_t input_len = 0;
    std::size_t horizon = 0;
    bool noisy_targets = false;

    // LDS knobs.
    double process_sigma = 0.0;
    std::vector<double> x0{1.0, 1.0};
    Matrix a0;  // NextState only
    std::optional<Mismatch> mismatch;

    simcore::CompartmentalInit init;

    void validate() const;
    std::size_t input_dim() const;
    std::size_t target_dim() const;
    /// Transition matrix producing NextState targets (A0, or A0 + delta U).
    Matrix dynamics() const;

    nlohmann::json to_json() const;
    static TaskSpec from_json(const nlohmann::json& j);
    /// SHA-256 of the canonical JSON form.
    std::string digest() const;
};

/// The three canonical desk tasks.
TaskSpec lds_params_task(double process_sigma);
TaskSpec sir_forecast_task(double noise_sigma);
TaskSpec model_class_task(double noise_sigma, std::size_t steps = 100);
TaskSpec next_state_task(const Matrix& a0, double process_sigma, std::size_t steps);

struct Example {
    std::vector<double> input;
    std::vector<double> target;
    simcore::ParamVector theta;
    ModelTag model_tag = ModelTag::LDS;

    bool operator==(const Example&) const = default;
};

/// Everything a single draw produces, including the noiseless input used to
/// build reference libraries.
struct Sample {
    Example example;
    std::vector<double> clean_input;
};

struct Manifest {
    std::uint64_t seed = 0;
    std::string task_digest;
    std::size_t n = 0;
    TaskSpec task;
    /// Reference-library file: target holds the noiseless input instead of the task target.
    bool library = false;
};

struct Dataset {
    std::vector<Example> examples;
    Manifest manifest;

    std::size_t size() const { return examples.size(); }
    std::size_t input_dim() const { return examples.empty() ? 0 : examples.front().input.size(); }
    std::size_t target_dim() const { return examples.empty() ? 0 : examples.front().target.size(); }
    Matrix inputs() const;
    Matrix targets() const;
};

/// Draw example `index` of a task from stream (seed, index); pure function.
Sample draw_sample(const TaskSpec& task, std::uint64_t seed, std::uint64_t index);

Dataset generate_dataset(const TaskSpec& task, std::size_t n, std::uint64_t seed, Exec exec = Exec::Parallel);

/// A0 + delta * U, U a Gaussian matrix normalised to unit Frobenius norm.
Matrix perturb_lds_matrix(const Matrix& a0, double delta, std::uint64_t seed);

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

enum class IoErrorKind { Io, MalformedHeader, ShapeMismatch, Truncated };

class DatasetIoError : public std::runtime_error {
public:
    DatasetIoError(IoErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    IoErrorKind kind() const noexcept { return kind_; }

private:
    IoErrorKind kind_;
};

/// Little-endian binary payload at `path`, JSON manifest at `path` + ".json".
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
/// One example per line; ModelClass targets are written as integer labels.
void export_csv(const Dataset& ds, const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& data_path);

}  // namespace sgnn::datagen
