#include "sgnn/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sgnn/binio.hpp"
#include "sgnn/datagen.hpp"
#include "sgnn/fileio.hpp"

namespace sgnn::nnet {

namespace {

constexpr double kProbFloor = 1e-12;

double activate(Activation a, double z)
{
    switch (a) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::GELU: return 0.5 * z * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
    case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

double activate_grad(Activation a, double z)
{
    switch (a) {
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::GELU: {
        const double cdf = 0.5 * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * z * z) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
        return cdf + z * pdf;
    }
    case Activation::Tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    }
    return 1.0;
}

void softmax_inplace(std::span<double> z)
{
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        s += v;
    }
    for (auto& v : z) v /= s;
}

// z (B x out) = a (B x in) * w (in x out) + bias
void affine(const Matrix& a, const DenseLayer& layer, Matrix& z)
{
    const std::size_t out = layer.weight.cols;
    z = Matrix(a.rows, out);
    for (std::size_t b = 0; b < a.rows; ++b) {
        double* zr = z.data.data() + b * out;
        std::copy(layer.bias.begin(), layer.bias.end(), zr);
        const double* ar = a.data.data() + b * a.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            const double* wr = layer.weight.data.data() + i * out;
            for (std::size_t o = 0; o < out; ++o) zr[o] += av * wr[o];
        }
    }
}

bool fused_softmax_ce(const Network& net, const LossSpec& loss)
{
    return net.spec().head == Head::Softmax && loss.kind == LossKind::CrossEntropy;
}

}  // namespace

const char* to_string(Activation a)
{
    switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::GELU: return "gelu";
    case Activation::Tanh: return "tanh";
    }
    return "?";
}

Activation activation_from_string(const std::string& s)
{
    if (s == "relu") return Activation::ReLU;
    if (s == "gelu") return Activation::GELU;
    if (s == "tanh") return Activation::Tanh;
    throw ValidationError("unknown activation '" + s + "'");
}

const char* to_string(LossKind k)
{
    switch (k) {
    case LossKind::MSE: return "mse";
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::L1: return "l1";
    case LossKind::Huber: return "huber";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s)
{
    if (s == "mse") return LossKind::MSE;
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    if (s == "l1") return LossKind::L1;
    if (s == "huber") return LossKind::Huber;
    throw ValidationError("unknown loss '" + s + "'");
}

void NetworkSpec::validate() const
{
    require(widths.size() >= 3, "NetworkSpec: need at least one hidden layer");
    for (auto w : widths) require(w >= 1, "NetworkSpec: layer widths must be >= 1");
    if (head == Head::Softmax) require(widths.back() >= 2, "NetworkSpec: softmax head needs >= 2 outputs");
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l)
        layers_.push_back({Matrix(spec_.widths[l], spec_.widths[l + 1]), std::vector<double>(spec_.widths[l + 1], 0.0)});
    input_mean_.assign(spec_.widths.front(), 0.0);
    input_scale_.assign(spec_.widths.front(), 1.0);
}

Network Network::initialized(NetworkSpec spec, std::uint64_t seed)
{
    Network net(std::move(spec));
    RngStream rng(seed, stream_id(StreamPurpose::Init, 0));
    for (auto& layer : net.layers_) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.rows + layer.weight.cols));
        for (auto& w : layer.weight.data) w = rng.uniform(-bound, bound);
    }
    return net;
}

void Network::set_input_normalization(std::vector<double> mean, std::vector<double> scale)
{
    require(mean.size() == input_dim() && scale.size() == input_dim(), "Network: normalisation size mismatch");
    for (double s : scale) require(s > 0.0 && std::isfinite(s), "Network: normalisation scale must be positive");
    input_mean_ = std::move(mean);
    input_scale_ = std::move(scale);
}

ForwardResult Network::forward(std::span<const double> input) const
{
    require(input.size() == input_dim(), "Network::forward: input has length " + std::to_string(input.size()) +
                                             ", expected " + std::to_string(input_dim()));
    Matrix x(1, input.size());
    std::copy(input.begin(), input.end(), x.data.begin());
    BatchPass pass;
    pass.forward(*this, x);
    return {pass.output().data, pass.embedding().data};
}

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.data.size() + l.bias.size();
    return n;
}

std::vector<double> Network::parameters() const
{
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
        p.insert(p.end(), l.weight.data.begin(), l.weight.data.end());
        p.insert(p.end(), l.bias.begin(), l.bias.end());
    }
    return p;
}

void Network::set_parameters(std::span<const double> params)
{
    require(params.size() == parameter_count(), "Network::set_parameters: size mismatch");
    auto it = params.begin();
    for (auto& l : layers_) {
        std::copy(it, it + static_cast<long>(l.weight.data.size()), l.weight.data.begin());
        it += static_cast<long>(l.weight.data.size());
        std::copy(it, it + static_cast<long>(l.bias.size()), l.bias.begin());
        it += static_cast<long>(l.bias.size());
    }
}

bool Network::all_finite() const
{
    for (const auto& l : layers_) {
        for (double v : l.weight.data)
            if (!std::isfinite(v)) return false;
        for (double v : l.bias)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

std::pair<std::vector<double>, std::vector<double>> column_moments(const Matrix& x)
{
    std::vector<double> mean(x.cols, 0.0), sd(x.cols, 0.0);
    if (x.rows == 0) return {mean, std::vector<double>(x.cols, 1.0)};
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x(r, c);
    for (auto& m : mean) m /= static_cast<double>(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double d = x(r, c) - mean[c];
            sd[c] += d * d;
        }
    for (auto& s : sd) {
        s = std::sqrt(s / static_cast<double>(x.rows));
        if (!(s > 1e-12)) s = 1.0;
    }
    return {mean, sd};
}

std::pair<std::vector<double>, std::vector<double>> global_moments(const Matrix& x)
{
    double mean = 0.0, ss = 0.0;
    const auto n = static_cast<double>(x.data.size());
    for (double v : x.data) mean += v;
    mean = x.data.empty() ? 0.0 : mean / n;
    for (double v : x.data) ss += (v - mean) * (v - mean);
    double sd = x.data.empty() ? 1.0 : std::sqrt(ss / n);
    if (!(sd > 1e-12)) sd = 1.0;
    return {std::vector<double>(x.cols, mean), std::vector<double>(x.cols, sd)};
}

Gradients::Gradients(const Network& net)
{
    for (const auto& l : net.layers()) {
        weight.emplace_back(l.weight.rows, l.weight.cols);
        bias.emplace_back(l.bias.size(), 0.0);
    }
}

void Gradients::zero()
{
    for (auto& w : weight) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void Gradients::scale(double s)
{
    for (auto& w : weight)
        for (auto& v : w.data) v *= s;
    for (auto& b : bias)
        for (auto& v : b) v *= s;
}

std::vector<double> Gradients::flatten() const
{
    std::vector<double> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.insert(out.end(), weight[l].data.begin(), weight[l].data.end());
        out.insert(out.end(), bias[l].begin(), bias[l].end());
    }
    return out;
}

void BatchPass::forward(const Network& net, const Matrix& inputs)
{
    require(inputs.cols == net.input_dim(), "BatchPass::forward: input width " + std::to_string(inputs.cols) +
                                                ", expected " + std::to_string(net.input_dim()));
    const auto& layers = net.layers();
    const std::size_t n_layers = layers.size();
    pre_.resize(n_layers);
    acts_.resize(n_layers + 1);

    Matrix& x = acts_[0];
    x = inputs;
    const auto& mean = net.input_mean();
    const auto& scale = net.input_scale();
    for (std::size_t b = 0; b < x.rows; ++b)
        for (std::size_t c = 0; c < x.cols; ++c) x(b, c) = (x(b, c) - mean[c]) / scale[c];

    const Activation act = net.spec().activation;
    for (std::size_t l = 0; l < n_layers; ++l) {
        affine(acts_[l], layers[l], pre_[l]);
        Matrix& a = acts_[l + 1];
        a = pre_[l];
        if (l + 1 < n_layers) {
            for (auto& v : a.data) v = activate(act, v);
        } else if (net.spec().head == Head::Softmax) {
            for (std::size_t b = 0; b < a.rows; ++b) softmax_inplace(a.row(b));
        }
    }
}

void BatchPass::backward(const Network& net, const Matrix& d_output, const Matrix* d_embedding, Gradients& grads,
                         bool d_logits_direct)
{
    const auto& layers = net.layers();
    const std::size_t n_layers = layers.size();
    const std::size_t batch = acts_[0].rows;
    require(d_output.rows == batch && d_output.cols == net.output_dim(), "BatchPass::backward: d_output shape");
    if (d_embedding)
        require(d_embedding->rows == batch && d_embedding->cols == net.embedding_dim(), "BatchPass::backward: d_embedding shape");

    Matrix dz = d_output;
    if (net.spec().head == Head::Softmax && !d_logits_direct) {
        const Matrix& p = acts_.back();
        for (std::size_t b = 0; b < batch; ++b) {
            double dot = 0.0;
            for (std::size_t k = 0; k < p.cols; ++k) dot += d_output(b, k) * p(b, k);
            for (std::size_t k = 0; k < p.cols; ++k) dz(b, k) = p(b, k) * (d_output(b, k) - dot);
        }
    }

    const Activation act = net.spec().activation;
    Matrix da, wt;
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& a = acts_[l];
        const std::size_t in = a.cols, out = dz.cols;
        Matrix& gw = grads.weight[l];
        auto& gb = grads.bias[l];
        for (std::size_t b = 0; b < batch; ++b) {
            const double* dzr = dz.data.data() + b * out;
            for (std::size_t o = 0; o < out; ++o) gb[o] += dzr[o];
            const double* ar = a.data.data() + b * in;
            for (std::size_t i = 0; i < in; ++i) {
                const double av = ar[i];
                if (av == 0.0) continue;
                double* gwr = gw.data.data() + i * out;
                for (std::size_t o = 0; o < out; ++o) gwr[o] += av * dzr[o];
            }
        }
        if (l == 0) break;

        // da = dz * W^T via a transposed copy so the inner loop is contiguous.
        const Matrix& w = layers[l].weight;
        wt = Matrix(out, in);
        for (std::size_t i = 0; i < in; ++i)
            for (std::size_t o = 0; o < out; ++o) wt(o, i) = w(i, o);
        da = Matrix(batch, in);
        for (std::size_t b = 0; b < batch; ++b) {
            double* dar = da.data.data() + b * in;
            const double* dzr = dz.data.data() + b * out;
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dzr[o];
                if (g == 0.0) continue;
                const double* wtr = wt.data.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) dar[i] += g * wtr[i];
            }
        }
        if (l == n_layers - 1 && d_embedding) {
            for (std::size_t k = 0; k < da.data.size(); ++k) da.data[k] += d_embedding->data[k];
        }
        const Matrix& z = pre_[l - 1];
        dz = Matrix(batch, in);
        for (std::size_t k = 0; k < dz.data.size(); ++k) dz.data[k] = da.data[k] * activate_grad(act, z.data[k]);
    }
}

void LossSpec::validate() const
{
    if (kind == LossKind::Huber) require(huber_delta > 0.0, "LossSpec: Huber delta must be > 0");
}

LossEval evaluate_loss(const LossSpec& spec, std::span<const double> pred, std::span<const double> target)
{
    require(pred.size() == target.size(), "loss: prediction and target lengths differ");
    LossEval out;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        switch (spec.kind) {
        case LossKind::MSE: out.value += r * r; break;
        case LossKind::L1: out.value += std::abs(r); break;
        case LossKind::Huber: {
            const double a = std::abs(r);
            out.value += a <= spec.huber_delta ? 0.5 * r * r : spec.huber_delta * (a - 0.5 * spec.huber_delta);
            break;
        }
        case LossKind::CrossEntropy: {
            if (target[i] == 0.0) break;
            double p = pred[i];
            if (!(p > kProbFloor)) {
                p = kProbFloor;
                ++out.clamped;
            }
            out.value -= target[i] * std::log(p);
            break;
        }
        }
    }
    return out;
}

double loss_value(const LossSpec& spec, std::span<const double> pred, std::span<const double> target)
{
    return evaluate_loss(spec, pred, target).value;
}

void loss_gradient(const LossSpec& spec, std::span<const double> pred, std::span<const double> target,
                   std::span<double> grad)
{
    require(pred.size() == target.size() && grad.size() == pred.size(), "loss_gradient: length mismatch");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        switch (spec.kind) {
        case LossKind::MSE: grad[i] = 2.0 * r; break;
        case LossKind::L1: grad[i] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); break;
        case LossKind::Huber:
            grad[i] = std::abs(r) <= spec.huber_delta ? r : (r > 0.0 ? spec.huber_delta : -spec.huber_delta);
            break;
        case LossKind::CrossEntropy: grad[i] = pred[i] > kProbFloor ? -target[i] / pred[i] : 0.0; break;
        }
    }
}

void TrainConfig::validate() const
{
    require(lr > 0.0 && std::isfinite(lr), "TrainConfig: lr must be > 0");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
    require(aux_weight >= 0.0, "TrainConfig: alignment weight must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0, "TrainConfig: invalid Adam constants");
}

namespace {

// Fill d_output for one batch; returns the summed loss. Sets `direct` when
// the gradient is already with respect to the softmax logits.
double batch_output_gradient(const Network& net, const LossSpec& loss, const Matrix& out, const Matrix& targets,
                             double scale, Matrix& d_out, bool& direct, std::size_t& clamped)
{
    double total = 0.0;
    direct = fused_softmax_ce(net, loss);
    d_out = Matrix(out.rows, out.cols);
    for (std::size_t b = 0; b < out.rows; ++b) {
        const auto e = evaluate_loss(loss, out.row(b), targets.row(b));
        total += e.value;
        clamped += e.clamped;
        if (direct) {
            for (std::size_t k = 0; k < out.cols; ++k) d_out(b, k) = scale * (out(b, k) - targets(b, k));
        } else {
            loss_gradient(loss, out.row(b), targets.row(b), d_out.row(b));
            for (auto& v : d_out.row(b)) v *= scale;
        }
    }
    return total;
}

}  // namespace

TrainResult train(Network net, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg, const LossSpec& loss)
{
    cfg.validate();
    loss.validate();
    require(inputs.rows >= 1 && inputs.rows == targets.rows, "train: inputs/targets row mismatch");
    require(inputs.cols == net.input_dim(), "train: dataset input width does not match network");
    require(targets.cols == net.output_dim(), "train: dataset target width does not match network");
    if (loss.kind == LossKind::CrossEntropy) {
        for (std::size_t r = 0; r < targets.rows; ++r) {
            double s = 0.0;
            for (double v : targets.row(r)) s += v;
            require(std::abs(s - 1.0) < 1e-9, "train: cross-entropy targets must be probability vectors");
        }
    }

    const std::size_t n = inputs.rows;
    const std::size_t bs = std::min(cfg.batch_size, n);
    Gradients grads(net), m(net), v(net);
    BatchPass pass;
    Matrix xb, yb, d_out, d_emb;
    std::vector<std::size_t> perm(n);
    std::uint64_t step = 0;
    TrainResult result;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.aux) cfg.aux->on_epoch_start(net, epoch);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        RngStream shuffle(cfg.seed, stream_id(StreamPurpose::Shuffle, epoch));
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[shuffle.below(i + 1)]);

        EpochStats stats;
        stats.epoch = epoch;
        double loss_sum = 0.0, aux_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
            const std::size_t b_n = std::min(bs, n - start);
            xb = Matrix(b_n, inputs.cols);
            yb = Matrix(b_n, targets.cols);
            for (std::size_t b = 0; b < b_n; ++b) {
                std::copy_n(inputs.row(perm[start + b]).begin(), inputs.cols, xb.row(b).begin());
                std::copy_n(targets.row(perm[start + b]).begin(), targets.cols, yb.row(b).begin());
            }
            grads.zero();
            pass.forward(net, xb);
            const double scale = 1.0 / static_cast<double>(b_n);
            bool direct = false;
            const double batch_loss = batch_output_gradient(net, loss, pass.output(), yb, scale, d_out, direct, stats.clamped);

            const Matrix* emb_grad = nullptr;
            double batch_aux = 0.0;
            if (cfg.aux && cfg.aux_weight > 0.0) {
                d_emb = Matrix(b_n, net.embedding_dim());
                RngStream aux_rng(cfg.seed, stream_id(StreamPurpose::Subsample, (epoch << 24) + batch_index));
                batch_aux = cfg.aux->accumulate(net, xb, pass.embedding(), cfg.aux_weight * scale, d_emb, grads, aux_rng);
                emb_grad = &d_emb;
            }
            if (!std::isfinite(batch_loss) || !std::isfinite(batch_aux))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            pass.backward(net, d_out, emb_grad, grads, direct);
            loss_sum += batch_loss;
            aux_sum += batch_aux;

            ++step;
            auto& layers = net.layers();
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& mm,
                              std::vector<double>& vv) {
                if (cfg.optimizer == OptimizerKind::SGD) {
                    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * g[k];
                    return;
                }
                for (std::size_t k = 0; k < p.size(); ++k) {
                    mm[k] = cfg.beta1 * mm[k] + (1.0 - cfg.beta1) * g[k];
                    vv[k] = cfg.beta2 * vv[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                    p[k] -= cfg.lr * (mm[k] / bc1) / (std::sqrt(vv[k] / bc2) + cfg.eps);
                }
            };
            for (std::size_t l = 0; l < layers.size(); ++l) {
                update(layers[l].weight.data, grads.weight[l].data, m.weight[l].data, v.weight[l].data);
                update(layers[l].bias, grads.bias[l], m.bias[l], v.bias[l]);
            }
        }
        stats.mean_loss = loss_sum / static_cast<double>(n);
        stats.mean_aux = aux_sum / static_cast<double>(n);
        if (!net.all_finite())
            throw NumericalError("train: non-finite parameters after epoch " + std::to_string(epoch));
        result.history.push_back(stats);
        if (cfg.on_epoch_end) cfg.on_epoch_end(epoch, net);
    }
    result.network = std::move(net);
    return result;
}

TrainResult train(Network net, const datagen::Dataset& ds, const TrainConfig& cfg, const LossSpec& loss)
{
    require(ds.size() >= 1, "train: empty dataset");
    return train(std::move(net), ds.inputs(), ds.targets(), cfg, loss);
}

std::vector<double> loss_parameter_gradient(const Network& net, std::span<const double> input,
                                            std::span<const double> target, const LossSpec& loss)
{
    Matrix x(1, input.size()), y(1, target.size());
    std::copy(input.begin(), input.end(), x.data.begin());
    std::copy(target.begin(), target.end(), y.data.begin());
    BatchPass pass;
    pass.forward(net, x);
    Matrix d_out;
    bool direct = false;
    std::size_t clamped = 0;
    batch_output_gradient(net, loss, pass.output(), y, 1.0, d_out, direct, clamped);
    Gradients g(net);
    pass.backward(net, d_out, nullptr, g, direct);
    return g.flatten();
}

GradCheckResult grad_check(const Network& net, std::span<const double> input, std::span<const double> target,
                           const LossSpec& loss)
{
    constexpr double kStep = 1e-5;
    constexpr double kKinkTol = 1e-4;
    GradCheckResult res;

    const auto fwd = net.forward(input);
    if (loss.kind == LossKind::Huber || loss.kind == LossKind::L1) {
        const double kink = loss.kind == LossKind::Huber ? loss.huber_delta : 0.0;
        for (std::size_t i = 0; i < fwd.output.size(); ++i) {
            if (std::abs(std::abs(fwd.output[i] - target[i]) - kink) < kKinkTol) {
                res.skipped = true;
                res.reason = "residual at loss kink";
                return res;
            }
        }
    }
    if (net.spec().activation == Activation::ReLU) {
        Matrix x(1, input.size());
        std::copy(input.begin(), input.end(), x.data.begin());
        BatchPass pass;
        pass.forward(net, x);
        for (std::size_t l = 0; l + 1 < net.layers().size(); ++l)
            for (double z : pass.preactivation(l).data)
                if (std::abs(z) < kKinkTol) {
                    res.skipped = true;
                    res.reason = "ReLU pre-activation at zero";
                    return res;
                }
    }

    const auto analytic = loss_parameter_gradient(net, input, target, loss);
    double norm_sq = 0.0;
    for (double g : analytic) norm_sq += g * g;
    res.analytic_norm = std::sqrt(norm_sq);

    Network probe = net;
    auto params = net.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        params[k] = orig + kStep;
        probe.set_parameters(params);
        const double up = loss_value(loss, probe.forward(input).output, target);
        params[k] = orig - kStep;
        probe.set_parameters(params);
        const double down = loss_value(loss, probe.forward(input).output, target);
        params[k] = orig;
        const double fd = (up - down) / (2.0 * kStep);
        res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic[k] - fd) / std::max(1.0, std::abs(fd)));
    }
    return res;
}

namespace {
constexpr char kNetMagic[] = "SGNW";
constexpr std::uint16_t kNetVersion = 1;
}  // namespace

void save_network(const Network& net, const std::filesystem::path& path)
{
    binio::Writer w;
    w.bytes(std::string_view(kNetMagic, 4));
    w.u16(kNetVersion);
    w.u8(static_cast<std::uint8_t>(net.spec().activation));
    w.u8(static_cast<std::uint8_t>(net.spec().head));
    w.u32(static_cast<std::uint32_t>(net.spec().widths.size()));
    for (auto width : net.spec().widths) w.u32(static_cast<std::uint32_t>(width));
    for (double v : net.input_mean()) w.f64(v);
    for (double v : net.input_scale()) w.f64(v);
    for (double v : net.parameters()) w.f64(v);
    write_file_atomic(path, w.str());
}

Network load_network(const std::filesystem::path& path)
{
    const std::string bytes = read_file(path);
    binio::Reader r(bytes);
    if (r.bytes(4) != std::string_view(kNetMagic, 4) || r.u16() != kNetVersion)
        throw ValidationError("load_network: not a network checkpoint: " + path.string());
    NetworkSpec spec;
    const auto act = r.u8();
    const auto head = r.u8();
    require(act <= 2 && head <= 1, "load_network: invalid activation/head code");
    spec.activation = static_cast<Activation>(act);
    spec.head = static_cast<Head>(head);
    const auto n_widths = r.u32();
    require(r.ok() && n_widths >= 3 && n_widths < 64, "load_network: invalid layer count");
    for (std::uint32_t i = 0; i < n_widths; ++i) spec.widths.push_back(r.u32());
    require(r.ok(), "load_network: truncated header");
    Network net(spec);
    std::vector<double> mean(net.input_dim()), scale(net.input_dim());
    for (auto& v : mean) v = r.f64();
    for (auto& v : scale) v = r.f64();
    std::vector<double> params(net.parameter_count());
    for (auto& v : params) v = r.f64();
    require(r.ok() && r.remaining() == 0, "load_network: payload size mismatch");
    net.set_input_normalization(std::move(mean), std::move(scale));
    net.set_parameters(params);
    return net;
}

}  // namespace sgnn::nnet
