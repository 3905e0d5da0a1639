#include <cmath>

#include "doctest.h"
#include "sgnn/modelselect.hpp"

using namespace sgnn;
using namespace sgnn::modelselect;

namespace {

std::vector<double> infected(ModelTag tag, std::vector<double> theta, std::size_t steps)
{
    std::vector<double> out(steps);
    REQUIRE(simcore::simulate_infected(tag, theta, {}, out));
    return out;
}

}  // namespace

TEST_CASE("AIC on hand examples")
{
    const double rss = 100.0 * std::exp(1.0);
    CHECK(std::abs(aic_score(rss, 100, 2).value - 104.0) <= 1e-12);
    CHECK(std::abs(aic_score(rss, 100, 3).value - 106.0) <= 1e-12);
    const auto floored = aic_score(0.0, 10, 2);
    CHECK(floored.floored);
    CHECK(floored.value == doctest::Approx(10.0 * std::log(1e-300 / 10.0) + 4.0));
}

TEST_CASE("noiseless SIR fit recovers the generating parameters")
{
    const auto y = infected(ModelTag::SIR, {0.3, 0.1}, 100);
    FitConfig cfg;
    cfg.seed = 1;
    const auto fit = fit_least_squares(ModelTag::SIR, y, cfg);
    CHECK(fit.converged);
    CHECK(std::abs(fit.params[0] - 0.3) < 1e-3);
    CHECK(std::abs(fit.params[1] - 0.1) < 1e-3);
    CHECK(fit.rss < 1e-10);
    for (std::size_t i = 1; i < fit.best_rss_trace.size(); ++i) CHECK(fit.best_rss_trace[i] <= fit.best_rss_trace[i - 1]);
}

TEST_CASE("AIC prefers SIR on noiseless SIR series")
{
    const auto prior = simcore::epidemic_prior(ModelTag::SIR);
    RngStream rng(31, 0);
    FitConfig cfg;
    cfg.multistart = 4;
    for (int k = 0; k < 10; ++k) {
        const auto th = simcore::sample_prior(prior, rng);
        const auto y = infected(ModelTag::SIR, {th[0], th[1]}, 100);
        cfg.seed = k;
        const auto out = aic_select(y, cfg);
        CHECK(out.choice == Choice::SIR);
        REQUIRE(out.fit_seir);
        CHECK(std::isfinite(out.fit_seir->rss));
    }
}

TEST_CASE("AIC detects slow latency")
{
    RngStream rng(32, 0);
    FitConfig cfg;
    cfg.multistart = 4;
    std::size_t seir = 0;
    for (int k = 0; k < 10; ++k) {
        const double beta = rng.uniform(0.1, 0.5), gamma = rng.uniform(0.05, 0.2);
        const auto y = infected(ModelTag::SEIR, {beta, gamma, 0.1}, 100);
        cfg.seed = k;
        seir += aic_select(y, cfg).choice == Choice::SEIR;
    }
    CHECK(seir >= 9);
}

TEST_CASE("batch selection is deterministic across execution policies")
{
    Matrix series(6, 60);
    RngStream rng(3, 0);
    for (std::size_t r = 0; r < series.rows; ++r) {
        const auto tag = r % 2 ? ModelTag::SEIR : ModelTag::SIR;
        const auto y = tag == ModelTag::SIR ? infected(tag, {rng.uniform(0.1, 0.5), rng.uniform(0.05, 0.2)}, 60)
                                            : infected(tag, {rng.uniform(0.1, 0.5), rng.uniform(0.05, 0.2), 0.2}, 60);
        for (std::size_t t = 0; t < 60; ++t) series(r, t) = y[t] + 0.01 * rng.normal();
    }
    FitConfig cfg;
    cfg.multistart = 2;
    cfg.seed = 5;
    const auto a = aic_select_batch(series, cfg, Exec::Serial);
    const auto b = aic_select_batch(series, cfg, Exec::Parallel);
    for (std::size_t r = 0; r < series.rows; ++r) {
        CHECK(a[r].choice == b[r].choice);
        CHECK(a[r].aic_sir == b[r].aic_sir);
        CHECK(a[r].aic_seir == b[r].aic_seir);
    }
}

TEST_CASE("degenerate inputs")
{
    FitConfig cfg;
    CHECK_THROWS_AS(fit_least_squares(ModelTag::SIR, std::vector<double>(5, 0.01), cfg), ValidationError);
    const auto flat = fit_least_squares(ModelTag::SIR, std::vector<double>(30, 0.5), cfg);
    CHECK_FALSE(flat.converged);
    CHECK(std::string(to_string(Choice::Abstain)) == "abstain");
}
