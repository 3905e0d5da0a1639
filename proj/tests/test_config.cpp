#include "doctest.h"
#include "sgnn/config.hpp"

using namespace sgnn;
using namespace sgnn::config;

namespace {

std::string validation_message(const std::string& text)
{
    try {
        to_experiment(Config::parse(text));
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parsing scalars, lists and comments")
{
    const auto c = Config::parse(R"(# header comment
experiments = mismatch_sweep
seed = 12  # trailing
name = "a # not a comment"

[mismatch_sweep]
deltas = [0, 0.1, 0.2]
hidden = 32, 16
)");
    CHECK(c.get_u64("", "seed") == 12);
    CHECK(c.get_string("", "name") == "a # not a comment");
    CHECK(c.get_doubles("mismatch_sweep", "deltas") == std::vector<double>{0.0, 0.1, 0.2});
    CHECK(c.get_sizes("mismatch_sweep", "hidden") == std::vector<std::size_t>{32, 16});
    CHECK(c.has_section("mismatch_sweep"));
    CHECK_FALSE(c.has("mismatch_sweep", "steps"));
}

TEST_CASE("syntax errors name the line")
{
    CHECK_THROWS_AS(Config::parse("[open\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse("novalue\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse("seed = x").get_u64("", "seed"), ValidationError);
    CHECK_THROWS_AS(Config::parse("seed = -3").get_u64("", "seed"), ValidationError);
}

TEST_CASE("missing and unknown fields are named")
{
    CHECK(validation_message("").find("experiments") != std::string::npos);
    CHECK(validation_message("experiments = attribution\n").find("seed") != std::string::npos);
    CHECK(validation_message("experiments = attribution\nseed = 1\n[attribution]\nlamda = 0.1\n").find("attribution.lamda") !=
          std::string::npos);
    CHECK(validation_message("experiments = figure9\nseed = 1\n").find("figure9") != std::string::npos);
    CHECK(validation_message("experiments = attribution\nseed = 1\n[attribution]\nlibrary_size = 1\n").find("[attribution]") !=
          std::string::npos);
    CHECK(validation_message("experiments = mismatch_sweep\nseed = 1\n[mismatch_sweep]\na0 = [1, 2, 3]\n").find("a0") !=
          std::string::npos);
}

TEST_CASE("translation into module configs")
{
    const auto e = to_experiment(Config::parse(R"(experiments = bayes_convergence, model_selection
seed = 9
output_dir = out/x

[bayes_convergence]
train_sizes = [10, 20]
n_seeds = 2
bandwidth_rule = median_distance
epochs = 3

[model_selection]
multistart = 2
hidden = [8]
activation = tanh
optimizer = sgd
)"));
    CHECK(e.runs(ExperimentKind::BayesConvergence));
    CHECK(e.runs(ExperimentKind::ModelSelection));
    CHECK_FALSE(e.runs(ExperimentKind::Attribution));
    CHECK(e.output_dir == "out/x");
    CHECK(e.convergence.train_sizes == std::vector<std::size_t>{10, 20});
    CHECK(e.convergence.seeds.size() == 2);
    CHECK(e.convergence.bandwidth == oracle::BandwidthRule::MedianDistance);
    CHECK(e.convergence.train.epochs == 3);
    CHECK(e.selection.fit.multistart == 2);
    CHECK(e.selection.activation == nnet::Activation::Tanh);
    CHECK(e.selection.train.optimizer == nnet::OptimizerKind::SGD);
    CHECK(e.selection.hidden == std::vector<std::size_t>{8});
}

TEST_CASE("stage seeds derive from the master seed")
{
    const auto text = std::string("experiments = attribution, mismatch_sweep\nseed = ");
    const auto a = to_experiment(Config::parse(text + "1\n"));
    const auto b = to_experiment(Config::parse(text + "1\n"));
    const auto c = to_experiment(Config::parse(text + "2\n"));
    CHECK(a.attribution.seed == b.attribution.seed);
    CHECK(a.sweep.seeds == b.sweep.seeds);
    CHECK(a.attribution.seed != c.attribution.seed);
    CHECK(a.stage_seed(ExperimentKind::Attribution) != a.stage_seed(ExperimentKind::MismatchSweep));
    CHECK(a.attribution.h_sq == 1.0);
    CHECK(to_experiment(Config::parse(text + "1\n[attribution]\nh_sq = median\n")).attribution.h_sq <= 0.0);
}

TEST_CASE("canonical form ignores layout")
{
    const auto a = Config::parse("seed = 1\nexperiments = attribution\n[attribution]\nlambda = 0.1\n");
    const auto b = Config::parse("# c\nexperiments   =   attribution\nseed=1\n\n[attribution]\n lambda = 0.1  # x\n");
    CHECK(a.canonical() == b.canonical());
}

TEST_CASE("experiment names round trip")
{
    for (auto k : {ExperimentKind::BayesConvergence, ExperimentKind::MismatchSweep, ExperimentKind::Attribution,
                   ExperimentKind::ModelSelection})
        CHECK(experiment_kind_from_string(to_string(k)) == k);
}
