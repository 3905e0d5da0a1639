#include <cmath>

#include "doctest.h"
#include "sgnn/attribution.hpp"

using namespace sgnn;
using namespace sgnn::attribution;

namespace {

AttributionDistribution dist(std::vector<double> w)
{
    AttributionDistribution d;
    for (std::size_t i = 0; i < w.size(); ++i) d.indices.push_back(i);
    d.weights = std::move(w);
    return d;
}

/// Summed KL over the batch recomputed from the public weight functions.
double reference_kl(const nnet::Network& net, const Matrix& batch, const ReferenceLibrary& lib, double obs_sigma,
                    double h_sq, KlDirection dir)
{
    const Matrix atoms = embed(net, lib.observations);
    const Matrix q = embed(net, batch);
    double total = 0.0;
    for (std::size_t b = 0; b < batch.rows; ++b) {
        const auto p = oracle::discrete_posterior(batch.row(b), lib, obs_sigma);
        const auto w = attribution_weights(q.row(b), atoms, h_sq);
        if (dir == KlDirection::TargetFirst) {
            total += kl_alignment_loss(p, w);
        } else {
            for (std::size_t i = 0; i < w.size(); ++i)
                if (w.weights[i] > 0.0) total += w.weights[i] * std::log(w.weights[i] / std::max(p.weights[i], kKlFloor));
        }
    }
    return total;
}

}  // namespace

TEST_CASE("attribution weights concentrate on a matching atom")
{
    Matrix emb(3, 2);
    emb.data = {0.0, 0.0, 1.0, 0.0, 0.0, 1.0};
    const auto w = attribution_weights(emb.row(1), emb, 1e-8);
    CHECK(w.weights[1] == doctest::Approx(1.0));
    const auto u = attribution_weights(std::vector<double>{0.5, 0.5}, emb, 2.0);
    CHECK(u.weights[1] == doctest::Approx(u.weights[2]).epsilon(1e-15));
    CHECK(u.weights[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto v = attribution_weights(std::vector<double>{0.0, 0.0}, emb, 0.5);
    CHECK(v.weights[1] / v.weights[0] == doctest::Approx(std::exp(-1.0 / 0.5)).epsilon(1e-12));
}

TEST_CASE("attribution moments")
{
    ReferenceLibrary lib;
    lib.schema = std::make_shared<const simcore::ParamSchema>(simcore::ParamSchema{{"a"}, {{0.0, 10.0}}});
    lib.thetas = Matrix(2, 1);
    lib.thetas.data = {1.0, 3.0};
    lib.inputs = Matrix(2, 1);
    const auto d = dist({0.5, 0.5});
    CHECK(attribution_moment(d, lib, 0, 1) == 2.0);
    CHECK(attribution_moment(d, lib, 0, 2) == 5.0);
    CHECK(attribution_moment(d, lib, [](std::span<const double> t) { return 2.0 * t[0]; }, 1) == 4.0);
}

TEST_CASE("KL alignment loss on hand examples")
{
    CHECK(kl_alignment_loss(dist({1.0, 0.0}), dist({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    KlDiagnostics diag;
    const double v = kl_alignment_loss(dist({0.5, 0.5}), dist({1.0, 0.0}), &diag);
    CHECK(v == doctest::Approx(0.5 * std::log(0.5) + 0.5 * std::log(0.5 / 1e-12)).epsilon(1e-14));
    CHECK(v == doctest::Approx(13.1224).epsilon(1e-4));
    CHECK(diag.floored == 1);
    CHECK(kl_alignment_loss(dist({0.2, 0.8}), dist({0.2, 0.8})) == 0.0);
}

TEST_CASE("KL alignment gradient matches finite differences")
{
    const auto task = datagen::sir_forecast_task(0.01);
    auto lib = std::make_shared<ReferenceLibrary>(oracle::build_library(task, 8, 3));
    const Matrix batch = datagen::generate_dataset(task, 4, 9).inputs();
    const double obs_sigma = 0.05, h_sq = 1.0;

    for (auto dir : {KlDirection::TargetFirst, KlDirection::AttributionFirst}) {
        auto net = nnet::Network::initialized({{40, 6, 3, 2}, nnet::Activation::Tanh, nnet::Head::Linear}, 4);
        net.set_input_normalization(std::vector<double>(40, 0.05), std::vector<double>(40, 0.05));
        KlAlignment hook(lib, obs_sigma, h_sq, 8, dir, 1);
        hook.on_epoch_start(net, 0);

        nnet::BatchPass pass;
        pass.forward(net, batch);
        Matrix d_emb(batch.rows, net.embedding_dim());
        nnet::Gradients grads(net);
        RngStream rng(2, 0);
        const double loss = hook.accumulate(net, batch, pass.embedding(), 1.0, d_emb, grads, rng);
        CHECK(loss == doctest::Approx(reference_kl(net, batch, *lib, obs_sigma, h_sq, dir)).epsilon(1e-10));
        pass.backward(net, Matrix(batch.rows, net.output_dim()), &d_emb, grads);
        const auto analytic = grads.flatten();

        auto params = net.parameters();
        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t k = 0; k < params.size(); k += 3) {
            const double keep = params[k];
            params[k] = keep + h;
            net.set_parameters(params);
            const double up = reference_kl(net, batch, *lib, obs_sigma, h_sq, dir);
            params[k] = keep - h;
            net.set_parameters(params);
            const double dn = reference_kl(net, batch, *lib, obs_sigma, h_sq, dir);
            params[k] = keep;
            const double fd = (up - dn) / (2 * h);
            worst = std::max(worst, std::abs(analytic[k] - fd) / std::max(1.0, std::abs(fd)));
        }
        net.set_parameters(params);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("median heuristic follows the embeddings")
{
    const auto task = datagen::sir_forecast_task(0.01);
    auto lib = std::make_shared<ReferenceLibrary>(oracle::build_library(task, 50, 3));
    const auto net = nnet::Network::initialized({{40, 8, 2}, nnet::Activation::GELU, nnet::Head::Linear}, 1);
    KlAlignment hook(lib, 0.01, 0.0, 16);
    hook.on_epoch_start(net, 0);
    CHECK(hook.current_h_sq() == doctest::Approx(oracle::median_sq_bandwidth(embed(net, lib->observations), 0)).epsilon(1e-12));
    KlAlignment fixed(lib, 0.01, 0.7, 16);
    fixed.on_epoch_start(net, 0);
    CHECK(fixed.current_h_sq() == 0.7);
}

TEST_CASE("experiment config validation")
{
    AttributionConfig cfg;
    cfg.library_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = AttributionConfig{};
    cfg.n_atom_queries = cfg.library_size + 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK(AttributionConfig{}.resolved_obs_sigma() == AttributionConfig{}.noise_sigma);
}
