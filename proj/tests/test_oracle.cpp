#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sgnn/oracle.hpp"

using namespace sgnn;
using namespace sgnn::oracle;

namespace {

/// Library with 1-D thetas and explicit inputs; observations equal inputs.
ReferenceLibrary toy_library(const std::vector<double>& thetas, const std::vector<std::vector<double>>& inputs)
{
    ReferenceLibrary lib;
    lib.schema = std::make_shared<const simcore::ParamSchema>(
        simcore::ParamSchema{{"t"}, {{-1e9, 1e9}}});
    lib.thetas = Matrix(thetas.size(), 1);
    lib.inputs = Matrix(inputs.size(), inputs.front().size());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        lib.thetas(i, 0) = thetas[i];
        std::copy(inputs[i].begin(), inputs[i].end(), lib.inputs.row(i).begin());
    }
    lib.observations = lib.inputs;
    return lib;
}

Matrix points(const std::vector<std::vector<double>>& rows)
{
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    return m;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("median bandwidth on enumerable sets")
{
    CHECK(median_sq_bandwidth(points({{0.0, 0.0}, {2.0, 0.0}}), 1) == 4.0);
    CHECK(median_sq_bandwidth(points({{0.0}, {1.0}, {2.0}}), 1) == 1.0);
    CHECK(median_sq_bandwidth(points({{0.0}, {0.0}, {1.0}, {1.0}, {2.0}, {2.0}}), 1) ==
          median_sq_bandwidth(points({{0.0}, {1.0}, {2.0}}), 1));
    CHECK(median_sq_bandwidth(points({{0.0}, {2.0}}), 1, BandwidthRule::MedianDistance) == 2.0);
    CHECK_THROWS_AS(median_sq_bandwidth(points({{1.0}, {1.0}}), 1), ValidationError);
}

TEST_CASE("subsampled bandwidth is serial/parallel identical")
{
    RngStream rng(3, 0);
    Matrix x(3000, 4);
    for (auto& v : x.data) v = rng.normal();
    const double s = median_sq_bandwidth(x, 5, BandwidthRule::MedianSquaredDistance, 20000, Exec::Serial);
    const double p = median_sq_bandwidth(x, 5, BandwidthRule::MedianSquaredDistance, 20000, Exec::Parallel);
    CHECK(s == p);
    // E||x - y||^2 = 2 d for standard normals, median slightly below
    CHECK((s > 5.0 && s < 8.0));
}

TEST_CASE("kernel estimate edge cases")
{
    const auto one = toy_library({0.7}, {{5.0, 5.0}});
    CHECK(kernel_bayes_estimate(std::vector<double>{-3.0, 1.0}, one, 0.1)[0] == 0.7);

    const auto two = toy_library({1.0, 3.0}, {{-1.0}, {1.0}});
    CHECK(kernel_bayes_estimate(std::vector<double>{0.0}, two, 0.5)[0] == doctest::Approx(2.0).epsilon(1e-15));

    const auto far = kernel_estimate(std::vector<double>{1e6}, two, 1e-6);
    CHECK(far.fallback);
    CHECK(far.theta[0] == 3.0);

    const auto wide = kernel_bayes_estimate(std::vector<double>{0.3}, two, 1e6 * 4.0);
    CHECK(std::abs(wide[0] - 2.0) < 1e-6);
    CHECK_THROWS_AS(kernel_bayes_estimate(std::vector<double>{0.0}, two, 0.0), ValidationError);
}

TEST_CASE("kernel estimate is invariant to atom order")
{
    const auto a = toy_library({1.0, 2.0, 3.0}, {{0.0}, {0.4}, {1.1}});
    const auto b = toy_library({3.0, 1.0, 2.0}, {{1.1}, {0.0}, {0.4}});
    const std::vector<double> q{0.5};
    CHECK(kernel_bayes_estimate(q, a, 0.2)[0] == doctest::Approx(kernel_bayes_estimate(q, b, 0.2)[0]).epsilon(1e-14));
}

TEST_CASE("kernel estimate approaches the truncated-Gaussian posterior mean")
{
    const double s = 0.1;
    const std::size_t m = 10000;
    RngStream rng(77, 0);
    std::vector<double> thetas(m);
    std::vector<std::vector<double>> inputs(m);
    for (std::size_t i = 0; i < m; ++i) {
        thetas[i] = rng.uniform();
        inputs[i] = {thetas[i] + s * rng.normal()};
    }
    const auto lib = toy_library(thetas, inputs);
    for (double x : {0.05, 0.3, 0.5, 0.8, 1.02}) {
        const double a = (0.0 - x) / s, b = (1.0 - x) / s;
        const double analytic = x + s * (normal_pdf(a) - normal_pdf(b)) / (normal_cdf(b) - normal_cdf(a));
        CHECK(std::abs(kernel_bayes_estimate(std::vector<double>{x}, lib, s * s)[0] - analytic) < 0.05);
    }
}

TEST_CASE("kernel batch is serial/parallel identical")
{
    const auto task = datagen::lds_params_task(0.1);
    const auto lib = build_library(task, 300, 4);
    const auto q = datagen::generate_dataset(task, 50, 9).inputs();
    CHECK(kernel_bayes_batch(q, lib, 10.0, Exec::Serial) == kernel_bayes_batch(q, lib, 10.0, Exec::Parallel));
}

TEST_CASE("discrete posterior weights")
{
    const auto two = toy_library({0.0, 1.0}, {{0.0}, {3.0}});
    const double sigma = 2.0, q = 1.0;
    const auto w = discrete_posterior(std::vector<double>{q}, two, sigma);
    const double d1 = q - 0.0, d2 = q - 3.0;
    CHECK(w.weights[0] / w.weights[1] == doctest::Approx(std::exp((d2 * d2 - d1 * d1) / (2 * sigma * sigma))).epsilon(1e-12));

    const auto same = toy_library({0.0, 1.0, 2.0, 3.0}, {{1.0}, {1.0}, {1.0}, {1.0}});
    for (double v : discrete_posterior(std::vector<double>{0.2}, same, 0.5).weights) CHECK(v == doctest::Approx(0.25));

    const auto sharp = discrete_posterior(std::vector<double>{3.0}, two, 1e-6);
    CHECK(sharp.weights[1] == doctest::Approx(1.0));
}

TEST_CASE("noiseless atom queries concentrate on their atom")
{
    const auto task = datagen::sir_forecast_task(0.01);
    const auto lib = build_library(task, 500, 12);
    RngStream rng(5, 0);
    std::size_t hits = 0;
    for (int t = 0; t < 200; ++t) {
        const auto j = rng.below(lib.size());
        const auto w = discrete_posterior(lib.observations.row(j), lib, 0.01);
        w.validate();
        const auto best = std::max_element(w.weights.begin(), w.weights.end()) - w.weights.begin();
        hits += w.indices.empty() ? static_cast<std::size_t>(best) == j : w.indices[best] == j;
    }
    CHECK(hits >= 190);
}

TEST_CASE("log-weight normalisation falls back on total underflow")
{
    const std::vector<double> lw{-1e6, -2e6, -1.5e6};
    const auto d = normalize_log_weights(lw);
    double s = 0.0;
    for (double v : d.weights) s += v;
    CHECK(s == doctest::Approx(1.0));
    CHECK(d.fallback);
    CHECK(d.weights[0] == 1.0);
}

TEST_CASE("library persistence round trip")
{
    const auto task = datagen::sir_forecast_task(0.01);
    auto lib = build_library(task, 20, 1);
    lib.embeddings = Matrix(20, 3, 0.25);
    const auto path = std::filesystem::temp_directory_path() / "sgnn_test_lib.bin";
    save_library(lib, task, 1, path);
    const auto back = load_library(path);
    CHECK(back.thetas == lib.thetas);
    CHECK(back.inputs == lib.inputs);
    CHECK(back.observations == lib.observations);
    CHECK(back.embeddings == lib.embeddings);
}
