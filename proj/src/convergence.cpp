#include "sgnn/convergence.hpp"

#include <algorithm>
#include <map>

#include "sgnn/datagen.hpp"

namespace sgnn::convergence {

void ConvergenceConfig::validate() const
{
    require(!train_sizes.empty(), "bayes_convergence: need at least one training size");
    for (auto n : train_sizes) require(n >= 1, "bayes_convergence: training sizes must be >= 1");
    require(!seeds.empty(), "bayes_convergence: need at least one seed");
    require(library_size >= 2, "bayes_convergence: library size must be >= 2");
    require(n_test >= 1, "bayes_convergence: n_test must be >= 1");
    require(process_sigma >= 0.0, "bayes_convergence: process_sigma must be >= 0");
    require(!hidden.empty(), "bayes_convergence: need at least one hidden layer");
    train.validate();
}

namespace {

double mean_sq_diff(const Matrix& a, const Matrix& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return s / static_cast<double>(a.rows);
}

}  // namespace

std::vector<ConvergenceRow> run_bayes_convergence(const ConvergenceConfig& cfg)
{
    cfg.validate();
    const auto task = datagen::lds_params_task(cfg.process_sigma);
    std::vector<ConvergenceRow> rows;
    for (std::uint64_t seed : cfg.seeds) {
        const auto lib = oracle::build_library(task, cfg.library_size, derive_seed(seed, 1));
        const double bw = oracle::median_sq_bandwidth(lib.inputs, derive_seed(seed, 2), cfg.bandwidth);
        const auto test = datagen::generate_dataset(task, cfg.n_test, derive_seed(seed, 3));
        const Matrix x_test = test.inputs(), theta_test = test.targets();
        const Matrix kernel = oracle::kernel_bayes_batch(x_test, lib, bw);
        const double kernel_mse = mean_sq_diff(kernel, theta_test);

        for (std::size_t n : cfg.train_sizes) {
            // Training sets are nested prefixes of one stream: larger N only adds examples.
            const auto train = datagen::generate_dataset(task, n, derive_seed(seed, 4));
            nnet::NetworkSpec spec;
            spec.widths.push_back(task.input_dim());
            spec.widths.insert(spec.widths.end(), cfg.hidden.begin(), cfg.hidden.end());
            spec.widths.push_back(task.target_dim());
            spec.activation = cfg.activation;
            auto net = nnet::Network::initialized(spec, derive_seed(seed, 5));
            const Matrix x_train = train.inputs();
            auto [mean, scale] = nnet::column_moments(x_train);
            net.set_input_normalization(std::move(mean), std::move(scale));
            nnet::TrainConfig tc = cfg.train;
            tc.seed = derive_seed(seed, 6);
            tc.aux.reset();
            tc.on_epoch_end = nullptr;
            net = nnet::train(std::move(net), x_train, train.targets(), tc, nnet::LossSpec{}).network;

            nnet::BatchPass pass;
            pass.forward(net, x_test);
            ConvergenceRow r;
            r.seed = seed;
            r.n = n;
            r.mse_to_oracle = mean_sq_diff(pass.output(), kernel);
            r.mse_to_theta = mean_sq_diff(pass.output(), theta_test);
            r.kernel_baseline_mse = kernel_mse;
            r.bandwidth = bw;
            rows.push_back(r);
        }
    }
    return rows;
}

std::vector<ConvergenceSummary> summarize(const std::vector<ConvergenceRow>& rows)
{
    std::vector<std::size_t> order;
    std::map<std::size_t, std::vector<const ConvergenceRow*>> groups;
    for (const auto& r : rows) {
        if (!groups.count(r.n)) order.push_back(r.n);
        groups[r.n].push_back(&r);
    }
    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t k = v.size();
        return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    };
    std::vector<ConvergenceSummary> out;
    for (std::size_t n : order) {
        std::vector<double> a, b, c;
        for (const auto* r : groups[n]) {
            a.push_back(r->mse_to_oracle);
            b.push_back(r->mse_to_theta);
            c.push_back(r->kernel_baseline_mse);
        }
        out.push_back({n, med(a), med(b), med(c)});
    }
    return out;
}

}  // namespace sgnn::convergence
