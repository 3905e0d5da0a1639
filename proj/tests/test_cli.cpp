#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "sgnn/fileio.hpp"

using namespace sgnn;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "sgnn_test_cli";

struct Outcome {
    int code;
    std::string err;
};

Outcome sgnn_cli(const std::string& args, const std::string& env = "")
{
    fs::create_directories(kWork);
    const auto err = kWork / "stderr.txt";
    const std::string cmd = env + " '" SGNN_CLI_PATH "' " + args + " 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, fs::exists(err) ? read_file(err) : ""};
}

fs::path write_config(const std::string& name, const std::string& text)
{
    fs::create_directories(kWork);
    const auto p = kWork / name;
    write_file_atomic(p, text);
    return p;
}

const std::string kSweep = R"(experiments = mismatch_sweep
seed = 4

[mismatch_sweep]
deltas = [0, 0.2]
n_train = 300
n_test = 100
n_seeds = 1
epochs = 1
hidden = [8]
)";

}  // namespace

TEST_CASE("empty config exits 2 naming the missing field")
{
    const auto cfg = write_config("empty.toml", "");
    const auto out = kWork / "empty_out";
    const auto r = sgnn_cli("run --config '" + cfg.string() + "' --out '" + out.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("experiments") != std::string::npos);
    const auto report = nlohmann::json::parse(read_file(out / "error.json"));
    CHECK(report["error"]["kind"] == "validation");
}

TEST_CASE("usage errors and help")
{
    CHECK(sgnn_cli("--help > /dev/null").code == 0);
    CHECK(sgnn_cli("run --bogus").code == 2);
    CHECK(sgnn_cli("").code == 2);
    CHECK(sgnn_cli("run --config /nonexistent/file.toml").code == 2);
    CHECK(sgnn_cli("export --run /nonexistent/run").code == 1);
}

TEST_CASE("reruns are byte-identical and SGNN_SEED overrides the seed")
{
    const auto cfg = write_config("sweep.toml", kSweep);
    const auto a = kWork / "rerun_a", b = kWork / "rerun_b", c = kWork / "rerun_c";
    for (const auto& d : {a, b, c}) fs::remove_all(d);
    REQUIRE(sgnn_cli("sweep --config '" + cfg.string() + "' --out '" + a.string() + "'").code == 0);
    REQUIRE(sgnn_cli("run --config '" + cfg.string() + "' --out '" + b.string() + "' --threads 1").code == 0);
    CHECK(read_file(a / "sweep.csv") == read_file(b / "sweep.csv"));
    const auto ma = nlohmann::json::parse(read_file(a / "manifest.json"));
    const auto mb = nlohmann::json::parse(read_file(b / "manifest.json"));
    CHECK(ma["artifacts"] == mb["artifacts"]);
    CHECK(ma["config_digest"] == mb["config_digest"]);

    REQUIRE(sgnn_cli("run --config '" + cfg.string() + "' --out '" + c.string() + "'", "SGNN_SEED=99").code == 0);
    const auto mc = nlohmann::json::parse(read_file(c / "manifest.json"));
    CHECK(mc["master_seed"] == 99);
    CHECK(read_file(a / "sweep.csv") != read_file(c / "sweep.csv"));

    CHECK(sgnn_cli("run --config '" + cfg.string() + "'", "SGNN_SEED=abc").code == 2);
}

TEST_CASE("export writes only the figures present")
{
    const auto cfg = write_config("sweep2.toml", kSweep);
    const auto run = kWork / "export_run";
    fs::remove_all(run);
    REQUIRE(sgnn_cli("run --config '" + cfg.string() + "' --out '" + run.string() + "'").code == 0);
    REQUIRE(sgnn_cli("export --run '" + run.string() + "'").code == 0);
    CHECK(fs::exists(run / "fig3.csv"));
    CHECK_FALSE(fs::exists(run / "fig5.csv"));
    const auto m = nlohmann::json::parse(read_file(run / "manifest.json"));
    REQUIRE(m["exports"].size() == 1);
    CHECK(m["exports"][0]["path"] == "fig3.csv");

    write_file_atomic(run / "manifest.json", "[");
    CHECK(sgnn_cli("export --run '" + run.string() + "'").code == 1);
}

TEST_CASE("gen, train and eval compose")
{
    const auto data = kWork / "lds.bin", test = kWork / "lds_test.bin", net = kWork / "net.bin",
               risk = kWork / "risk.json";
    REQUIRE(sgnn_cli("gen --task lds_params --sigma 0.1 -n 400 --seed 1 -o '" + data.string() + "'").code == 0);
    REQUIRE(sgnn_cli("gen --task lds_params --sigma 0.1 -n 100 --seed 2 -o '" + test.string() + "'").code == 0);
    REQUIRE(sgnn_cli("train --data '" + data.string() + "' -o '" + net.string() +
                     "' --hidden 16,16 --epochs 3 --history '" + (kWork / "hist.csv").string() + "'")
                .code == 0);
    REQUIRE(sgnn_cli("eval --net '" + net.string() + "' --data '" + test.string() + "' -o '" + risk.string() + "'").code == 0);
    const auto j = nlohmann::json::parse(read_file(risk));
    CHECK(j["n"] == 100);
    CHECK(j["mean"].get<double>() > 0.0);
    CHECK(sgnn_cli("gen --task nope -o '" + data.string() + "'").code == 2);
    CHECK(sgnn_cli("eval --net '" + data.string() + "' --data '" + test.string() + "' -o x").code == 2);
}
