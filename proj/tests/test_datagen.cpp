#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sgnn/datagen.hpp"
#include "sgnn/fileio.hpp"

using namespace sgnn;
using namespace sgnn::datagen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "sgnn_test_datagen";
    fs::create_directories(dir);
    return dir / name;
}

Matrix diag2(double a, double b)
{
    Matrix m(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

}  // namespace

TEST_CASE("canonical task shapes")
{
    CHECK(lds_params_task(0.1).input_dim() == 20);
    CHECK(lds_params_task(0.1).target_dim() == 2);
    CHECK(sir_forecast_task(0.01).input_dim() == 40);
    CHECK(sir_forecast_task(0.01).target_dim() == 10);
    CHECK(model_class_task(0.01).input_dim() == 100);
    CHECK(model_class_task(0.01).target_dim() == 2);
    CHECK(next_state_task(diag2(0.9, 0.8), 0.5, 10).input_dim() == 2);
}

TEST_CASE("generation is deterministic and thread-independent")
{
    const auto task = lds_params_task(0.1);
    const auto a = generate_dataset(task, 300, 17, Exec::Serial);
    const auto b = generate_dataset(task, 300, 17, Exec::Parallel);
    const auto c = generate_dataset(task, 300, 18, Exec::Parallel);
    CHECK(a.examples == b.examples);
    CHECK_FALSE(a.examples == c.examples);
    CHECK(a.manifest.task_digest == task.digest());
    for (std::size_t i = 0; i < 300; i += 37) CHECK(draw_sample(task, 17, i).example == a.examples[i]);
}

TEST_CASE("params targets are the latent theta and lie in the prior box")
{
    const auto ds = generate_dataset(lds_params_task(0.1), 200, 3);
    for (const auto& ex : ds.examples) {
        REQUIRE(ex.target.size() == 2);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(ex.target[j] == ex.theta[j]);
            CHECK((ex.target[j] >= 0.5 && ex.target[j] <= 1.5));
        }
    }
}

TEST_CASE("model-class data is balanced and one-hot")
{
    const auto ds = generate_dataset(model_class_task(0.01, 40), 100, 5);
    std::size_t sir = 0;
    for (const auto& ex : ds.examples) {
        CHECK(ex.target[0] + ex.target[1] == 1.0);
        if (ex.target[0] == 1.0) {
            ++sir;
            CHECK(ex.model_tag == simcore::ModelTag::SIR);
            CHECK(ex.theta.size() == 2);
        } else {
            CHECK(ex.theta.size() == 3);
        }
    }
    CHECK(sir == 50);
}

TEST_CASE("perturbation scales linearly in delta with a unit direction")
{
    const auto a0 = diag2(0.9, 0.8);
    const auto p1 = perturb_lds_matrix(a0, 0.1, 99);
    const auto p2 = perturb_lds_matrix(a0, 0.2, 99);
    double fro = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d1 = p1.data[i] - a0.data[i];
        const double d2 = p2.data[i] - a0.data[i];
        CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-12));
        fro += d1 * d1;
    }
    CHECK(std::sqrt(fro) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(perturb_lds_matrix(a0, 0.0, 99) == a0);
}

TEST_CASE("next-state inputs share noise across mismatch levels")
{
    auto task = next_state_task(diag2(0.9, 0.8), 0.5, 10);
    const auto base = generate_dataset(task, 200, 4);
    task.mismatch = Mismatch{0.0, 1};
    const auto zero = generate_dataset(task, 200, 4);
    CHECK(zero.examples == base.examples);
    task.mismatch = Mismatch{0.3, 1};
    const auto shifted = generate_dataset(task, 200, 4);
    const auto a_star = task.dynamics();
    for (std::size_t i = 0; i < 200; ++i) {
        CHECK(shifted.examples[i].input == base.examples[i].input);
        const auto& x = base.examples[i].input;
        for (std::size_t r = 0; r < 2; ++r) {
            const double mean_shift = (a_star(r, 0) - (r == 0 ? 0.9 : 0.0)) * x[0] + (a_star(r, 1) - (r == 1 ? 0.8 : 0.0)) * x[1];
            CHECK(shifted.examples[i].target[r] - base.examples[i].target[r] == doctest::Approx(mean_shift).epsilon(1e-9));
        }
    }
}

TEST_CASE("split sizes and disjointness")
{
    const auto ds = generate_dataset(lds_params_task(0.1), 100, 1);
    const auto [tr, te] = split_dataset(ds, 0.8, 2);
    CHECK(tr.size() == 80);
    CHECK(te.size() == 20);
    std::size_t matches = 0;
    for (const auto& a : tr.examples)
        for (const auto& b : te.examples) matches += a == b;
    CHECK(matches == 0);
    CHECK_THROWS_AS(split_dataset(ds, 1.0, 2), ValidationError);
}

TEST_CASE("binary round trip and error kinds")
{
    for (const auto& task : {lds_params_task(0.1), model_class_task(0.01, 30), sir_forecast_task(0.01)}) {
        const auto ds = generate_dataset(task, 40, 6);
        const auto path = scratch("roundtrip.bin");
        save_dataset(ds, path);
        const auto back = load_dataset(path);
        CHECK(back.examples == ds.examples);
        CHECK(back.manifest.task_digest == ds.manifest.task_digest);
    }

    const auto ds = generate_dataset(lds_params_task(0.1), 10, 6);
    const auto path = scratch("broken.bin");
    save_dataset(ds, path);
    const std::string bytes = read_file(path);

    auto kind_of = [&] {
        try {
            load_dataset(path);
        } catch (const DatasetIoError& e) {
            return static_cast<int>(e.kind());
        }
        return -1;
    };
    write_file_atomic(path, bytes.substr(0, bytes.size() - 5));
    CHECK(kind_of() == static_cast<int>(IoErrorKind::Truncated));
    std::string bad = bytes;
    bad[0] = 'X';
    write_file_atomic(path, bad);
    CHECK(kind_of() == static_cast<int>(IoErrorKind::MalformedHeader));
    write_file_atomic(path, bytes + "extra");
    CHECK(kind_of() == static_cast<int>(IoErrorKind::ShapeMismatch));
    fs::remove(manifest_path(path));
    CHECK(kind_of() == static_cast<int>(IoErrorKind::Io));
}

TEST_CASE("task json round trip and validation")
{
    const auto t = sir_forecast_task(0.02);
    const auto back = TaskSpec::from_json(t.to_json());
    CHECK(back.digest() == t.digest());
    auto bad = t;
    bad.horizon = 100;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
