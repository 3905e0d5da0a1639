#include <cmath>

#include "doctest.h"
#include "sgnn/bounds.hpp"

using namespace sgnn;
using namespace sgnn::bounds;

TEST_CASE("formula evaluators on hand examples")
{
    CHECK(std::abs(tv_worst_case(0.1, 4, 0.5) - 0.4) <= 1e-12);
    CHECK(tv_worst_case(1.0, 4, 0.5) == 1.0);
    CHECK(tv_worst_case(0.0, 4, 0.5) == 0.0);

    Matrix a0(2, 2), a1(2, 2), x(1, 2);
    a1(0, 0) = 0.2;
    a1(1, 1) = 0.5;
    x.data = {1.0, 0.0};
    CHECK(tv_empirical(a0, a1, x, 0.1) == 1.0);
    CHECK(std::abs(tv_empirical(a0, a1, x, 1.0) - 0.1) <= 1e-12);

    CHECK(std::abs(excess_risk_bound(0.1, 1.0, 1.0, 200, 0.05) - (0.4 + 6.0 * std::sqrt(std::log(40.0) / 400.0))) <= 1e-12);
    CHECK(excess_risk_bound(0.1, 1.0, 1.0, 200, 0.05) == doctest::Approx(0.9763).epsilon(1e-4));
    CHECK(std::abs(mismatch_bound(0.01, 5.0, 0.4) - 4.01) <= 1e-12);
    CHECK_THROWS_AS(mismatch_bound(0.01, -1.0, 0.4), ValidationError);
    CHECK_THROWS_AS(excess_risk_bound(0.1, 1.0, 1.0, 0, 0.05), ValidationError);
}

TEST_CASE("empirical TV never exceeds the operator-norm envelope")
{
    const Matrix a0 = SweepConfig{}.resolved_a0();
    RngStream rng(6, 0);
    Matrix x(500, 2);
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        x(i, 0) = 2.0 * rng.normal();
        x(i, 1) = 2.0 * rng.normal();
        mean_norm += std::hypot(x(i, 0), x(i, 1)) / x.rows;
    }
    for (double delta : {0.05, 0.2, 0.5}) {
        const auto a_star = datagen::perturb_lds_matrix(a0, delta, 3);
        const double tv = tv_empirical(a0, a_star, x, 0.5);
        CHECK(tv <= std::min(1.0, delta * mean_norm / (2 * 0.5)) + 1e-12);
        CHECK(tv <= tv_worst_case(delta, 2, 0.5) * mean_norm / (2 * std::sqrt(2.0)) + 1e-12);
    }
}

TEST_CASE("rademacher complexity")
{
    Matrix two(1, 2);
    two.data = {1.0, -1.0};
    RngStream rng(1, 0);
    CHECK(std::abs(rademacher_finite(two, 100000, rng) - 1.0) <= 0.02);

    Matrix v(8, 4);
    RngStream fill(2, 0);
    for (auto& e : v.data) e = fill.normal();
    RngStream r1(3, 0), r2(4, 0);
    const double e1 = rademacher_finite(v, 100000, r1), e2 = rademacher_finite(v, 100000, r2);
    CHECK(std::abs(e1 - e2) <= 0.02 * std::abs(e1));
}

TEST_CASE("risk estimates")
{
    Matrix x(10, 1), y(10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        y(i, 0) = 3.0;
        y(i, 1) = 4.0;
    }
    const auto zero = [](std::span<const double>) { return std::vector<double>{0.0, 0.0}; };
    const auto r = estimate_risk(zero, x, y, {nnet::LossKind::MSE});
    CHECK(r.mean == 25.0);
    CHECK(r.stderr_ == 0.0);
    CHECK(r.n == 10);

    RngStream rng(7, 0);
    const std::size_t n = 20000, d = 3;
    const double sigma = 0.3;
    Matrix xs(n, d), ys(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            xs(i, j) = rng.normal();
            ys(i, j) = xs(i, j) + sigma * rng.normal();
        }
    const auto id = [](std::span<const double> q) { return std::vector<double>(q.begin(), q.end()); };
    const auto noisy = estimate_risk(id, xs, ys, {nnet::LossKind::MSE});
    CHECK(std::abs(noisy.mean - d * sigma * sigma) <= 3.0 * noisy.stderr_);
}

TEST_CASE("small mismatch sweep respects the bounds and is deterministic")
{
    SweepConfig cfg;
    cfg.deltas = {0.0, 0.2, 0.4};
    cfg.n_train = 2000;
    cfg.n_test = 1000;
    cfg.seeds = {11};
    cfg.hidden = {16};
    cfg.train.epochs = 5;
    const auto rows = mismatch_sweep(cfg, Exec::Parallel);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].real_loss == rows[0].syn_loss);
    CHECK(rows[0].tv_worst == 0.0);
    for (const auto& r : rows) {
        CHECK(r.bayes_risk == doctest::Approx(2 * 0.25));
        CHECK(r.real_excess <= r.bound_empirical + 1e-12);
        CHECK(r.bound_empirical <= r.bound_worst + 1e-12);
        CHECK(r.tv_worst <= 1.0);
    }
    const auto serial = mismatch_sweep(cfg, Exec::Serial);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(serial[i].real_loss == rows[i].real_loss);

    const auto med = aggregate_medians(rows);
    CHECK(med.size() == 3);
    CHECK(med[0].seed == 1);
}

TEST_CASE("sweep validation")
{
    SweepConfig cfg;
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = SweepConfig{};
    cfg.deltas = {-0.1};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
