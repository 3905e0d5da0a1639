#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/rng.hpp"

namespace sgnn::datagen {
struct Dataset;
}

namespace sgnn::nnet {

enum class Activation { ReLU, GELU, Tanh };
enum class Head { Linear, Softmax };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// widths = {input, hidden..., output}; at least one hidden layer.
struct NetworkSpec {
    std::vector<std::size_t> widths;
    Activation activation = Activation::GELU;
    Head head = Head::Linear;

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// weight is stored input-major (rows = fan_in, cols = fan_out) so that the
/// batched forward pass is a sequence of contiguous axpy updates.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;
    bool operator==(const DenseLayer&) const = default;
};

struct ForwardResult {
    std::vector<double> output;
    std::vector<double> embedding;  ///< activations of the last hidden layer
};

class Network {
public:
    Network() = default;
    /// All-zero parameters.
    explicit Network(NetworkSpec spec);
    /// Glorot-uniform weights from stream (seed, Init), zero biases.
    static Network initialized(NetworkSpec spec, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::size_t input_dim() const { return spec_.widths.front(); }
    std::size_t output_dim() const { return spec_.widths.back(); }
    std::size_t embedding_dim() const { return spec_.widths[spec_.widths.size() - 2]; }

    /// Fixed affine input standardisation (x - mean) / scale applied before the first layer.
    void set_input_normalization(std::vector<double> mean, std::vector<double> scale);
    const std::vector<double>& input_mean() const { return input_mean_; }
    const std::vector<double>& input_scale() const { return input_scale_; }

    ForwardResult forward(std::span<const double> input) const;

    std::size_t parameter_count() const;
    /// Flattened layer by layer, weight then bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);
    bool all_finite() const;

    bool operator==(const Network&) const = default;

private:
    NetworkSpec spec_;
    std::vector<DenseLayer> layers_;
    std::vector<double> input_mean_;
    std::vector<double> input_scale_;
};

/// Per-column mean and standard deviation (std floored to 1 when degenerate).
std::pair<std::vector<double>, std::vector<double>> column_moments(const Matrix& x);
/// One mean and standard deviation over all entries, repeated per column.
/// Keeps the relative scale of time-series samples intact.
std::pair<std::vector<double>, std::vector<double>> global_moments(const Matrix& x);

/// Parameter gradients shaped like the network's layers.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    explicit Gradients(const Network& net);
    void zero();
    void scale(double s);
    std::vector<double> flatten() const;
};

/// Batched forward/backward pass. Holds the activations of one batch so that
/// backward() can be called after forward().
class BatchPass {
public:
    void forward(const Network& net, const Matrix& inputs);
    const Matrix& output() const { return acts_.back(); }
    const Matrix& embedding() const { return acts_[acts_.size() - 2]; }
    /// Pre-activations of hidden layer l (0-based).
    const Matrix& preactivation(std::size_t l) const { return pre_[l]; }

    /// Accumulate into `grads` the parameter gradient of
    ///   sum_b <d_output[b], output[b]> + <d_embedding[b], embedding[b]>.
    /// `d_output` is with respect to the head output (post-softmax for a
    /// softmax head); `d_logits_direct` skips the softmax Jacobian when the
    /// caller already holds logit gradients. `d_embedding` may be null.
    void backward(const Network& net, const Matrix& d_output, const Matrix* d_embedding, Gradients& grads,
                  bool d_logits_direct = false);

private:
    std::vector<Matrix> pre_;   // pre-activations per layer (logits for the last)
    std::vector<Matrix> acts_;  // acts_[0] = normalised input, acts_.back() = head output
};

enum class LossKind { MSE, CrossEntropy, L1, Huber };

struct LossSpec {
    LossKind kind = LossKind::MSE;
    double huber_delta = 1.0;

    void validate() const;
};

const char* to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossEval {
    double value = 0.0;
    std::size_t clamped = 0;  ///< CrossEntropy entries floored at 1e-12
};

LossEval evaluate_loss(const LossSpec& spec, std::span<const double> pred, std::span<const double> target);
double loss_value(const LossSpec& spec, std::span<const double> pred, std::span<const double> target);
/// d loss / d pred.
void loss_gradient(const LossSpec& spec, std::span<const double> pred, std::span<const double> target,
                   std::span<double> grad);

/// Extra loss term evaluated on the embeddings of each batch, e.g. the
/// attribution KL alignment. Implementations may run additional forward
/// passes (library atoms) and add their parameter gradients directly.
class AuxiliaryLoss {
public:
    virtual ~AuxiliaryLoss() = default;
    virtual void on_epoch_start(const Network& /*net*/, std::size_t /*epoch*/) {}
    /// Returns the summed auxiliary loss over the batch rows. Writes
    /// grad_scale * d(loss)/d(embedding) into `d_embedding` (batch x emb) and
    /// adds grad_scale-weighted parameter gradients of any extra passes to `grads`.
    virtual double accumulate(const Network& net, const Matrix& batch_inputs, const Matrix& batch_embeddings,
                              double grad_scale, Matrix& d_embedding, Gradients& grads, RngStream& rng) = 0;
};

enum class OptimizerKind { Adam, SGD };

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double aux_weight = 0.0;  ///< lambda
    std::shared_ptr<AuxiliaryLoss> aux;
    std::function<void(std::size_t epoch, const Network&)> on_epoch_end;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double mean_aux = 0.0;
    std::size_t clamped = 0;
};

struct TrainResult {
    Network network;
    std::vector<EpochStats> history;
};

TrainResult train(Network net, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg, const LossSpec& loss);
TrainResult train(Network net, const datagen::Dataset& ds, const TrainConfig& cfg, const LossSpec& loss);

struct GradCheckResult {
    double max_rel_error = 0.0;
    bool skipped = false;
    std::string reason;
    double analytic_norm = 0.0;
};

/// Reverse-mode gradient vs central finite differences (step 1e-5,
/// relative error |g - g_fd| / max(1, |g_fd|)). Skipped at non-smooth points
/// (Huber kink, ReLU at zero).
GradCheckResult grad_check(const Network& net, std::span<const double> input, std::span<const double> target,
                           const LossSpec& loss);

/// Analytic parameter gradient of the loss at one example.
std::vector<double> loss_parameter_gradient(const Network& net, std::span<const double> input,
                                            std::span<const double> target, const LossSpec& loss);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace sgnn::nnet
