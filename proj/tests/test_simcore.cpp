#include <cmath>

#include "doctest.h"
#include "sgnn/simcore.hpp"

using namespace sgnn;
using namespace sgnn::simcore;

namespace {

ParamVector make(const PriorSpec& prior, std::vector<double> v)
{
    return ParamVector(prior.schema_ptr(), std::move(v));
}

}  // namespace

TEST_CASE("SIR one step matches hand evaluation")
{
    const auto prior = epidemic_prior(ModelTag::SIR);
    const auto traj = simulate_compartmental(ModelTag::SIR, make(prior, {0.3, 0.1}), 2,
                                             initial_state(ModelTag::SIR, {0.99, 0.01}));
    const double s0 = 0.99, i0 = 0.01, inf = 0.3 * s0 * i0, rec = 0.1 * i0;
    CHECK(traj.states(1, 0) == doctest::Approx(s0 - inf).epsilon(1e-14));
    CHECK(traj.states(1, 1) == doctest::Approx(i0 + inf - rec).epsilon(1e-14));
    CHECK(traj.states(1, 0) == doctest::Approx(0.98703).epsilon(1e-12));
    CHECK(traj.states(1, 1) == doctest::Approx(0.01197).epsilon(1e-12));
}

TEST_CASE("compartments conserve unit population")
{
    for (auto tag : {ModelTag::SIR, ModelTag::SEIR}) {
        const auto prior = epidemic_prior(tag);
        RngStream rng(11, static_cast<std::uint64_t>(tag));
        for (int k = 0; k < 200; ++k) {
            const auto theta = sample_prior(prior, rng);
            const auto traj = simulate_compartmental(tag, theta, 100, initial_state(tag, {}));
            for (std::size_t t = 0; t < traj.steps(); ++t) {
                double s = 0.0;
                for (std::size_t j = 0; j < traj.dim(); ++j) {
                    s += traj.states(t, j);
                    CHECK(traj.states(t, j) >= -1e-12);
                }
                CHECK(std::abs(s - 1.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("infected kernel equals the trajectory column")
{
    for (auto tag : {ModelTag::SIR, ModelTag::SEIR}) {
        const auto prior = epidemic_prior(tag);
        RngStream rng(3, 0);
        const auto theta = sample_prior(prior, rng);
        const auto traj = simulate_compartmental(tag, theta, 60, initial_state(tag, {}));
        std::vector<double> out(60);
        REQUIRE(simulate_infected(tag, theta.values(), {}, out));
        for (std::size_t t = 0; t < 60; ++t) CHECK(out[t] == traj.states(t, infected_index(tag)));
    }
}

TEST_CASE("blowup is reported as a numerical error")
{
    const PriorSpec wide({"beta", "gamma"}, {{0.0, 100.0}, {0.0, 100.0}});
    CHECK_THROWS_AS(simulate_compartmental(ModelTag::SIR, make(wide, {50.0, 0.1}), 10,
                                           initial_state(ModelTag::SIR, {0.5, 0.5})),
                    NumericalError);
    std::vector<double> out(10);
    const double theta[] = {50.0, 0.1};
    CHECK_FALSE(simulate_infected(ModelTag::SIR, theta, {0.5, 0.5}, out));
}

TEST_CASE("noiseless LDS matches the closed form")
{
    const auto prior = lds_prior();
    RngStream rng(9, 0);
    const std::vector<double> x0{1.0, 1.0};
    for (int k = 0; k < 100; ++k) {
        const auto theta = sample_prior(prior, rng);
        RngStream noise(1, k);
        const auto traj = simulate_lds(theta, 10, x0, 0.0, noise);
        REQUIRE(traj.steps() == 11);
        for (std::size_t t = 0; t <= 10; ++t)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(std::abs(traj.states(t, j) - std::pow(theta[j], static_cast<double>(t)) * x0[j]) <= 1e-12);
    }
    RngStream noise(0, 0);
    const auto one = simulate_lds(make(prior, {0.5, 1.5}), 1, x0, 0.0, noise);
    CHECK(one.states(1, 0) == 0.5);
    CHECK(one.states(1, 1) == 1.5);
}

TEST_CASE("matrix LDS reduces to the diagonal one")
{
    const auto prior = lds_prior();
    Matrix a(2, 2);
    a(0, 0) = 0.7;
    a(1, 1) = 1.2;
    RngStream r1(4, 4), r2(4, 4);
    const std::vector<double> x0{1.0, -2.0};
    const auto d = simulate_lds(make(prior, {0.7, 1.2}), 8, x0, 0.3, r1);
    const auto m = simulate_lds_matrix(a, 8, x0, 0.3, r2);
    CHECK(d.states == m.states);
}

TEST_CASE("prior draws stay in bounds")
{
    const auto prior = epidemic_prior(ModelTag::SEIR);
    RngStream rng(2, 2);
    for (int k = 0; k < 1000; ++k) {
        const auto th = sample_prior(prior, rng);
        for (std::size_t j = 0; j < th.size(); ++j) {
            CHECK(th[j] >= prior.schema().bounds[j].lo);
            CHECK(th[j] <= prior.schema().bounds[j].hi);
        }
    }
    CHECK(prior.leading(2) == epidemic_prior(ModelTag::SIR));
    CHECK_THROWS_AS(ParamVector(prior.schema_ptr(), {1.0, 0.1, 0.2}), ValidationError);
}

TEST_CASE("observation noise averages out")
{
    const auto prior = epidemic_prior(ModelTag::SIR);
    const auto traj = simulate_compartmental(ModelTag::SIR, make(prior, {0.3, 0.1}), 20,
                                             initial_state(ModelTag::SIR, {}));
    const ObservationSpec obs{0.01, {1}};
    const int n = 10000;
    std::vector<double> mean(20, 0.0);
    for (int k = 0; k < n; ++k) {
        RngStream rng(8, k);
        const auto y = apply_observation(traj, obs, rng);
        REQUIRE(y.cols == 1);
        for (std::size_t t = 0; t < 20; ++t) mean[t] += y(t, 0) / n;
    }
    for (std::size_t t = 0; t < 20; ++t) CHECK(std::abs(mean[t] - traj.states(t, 1)) <= 3.0 * 0.01 / std::sqrt(n) * 1.5);
    CHECK_THROWS_AS((ObservationSpec{0.01, {5}}.validate(3)), ValidationError);
}
