#include <filesystem>

#include "doctest.h"
#include "sgnn/checksum.hpp"
#include "sgnn/fileio.hpp"
#include "sgnn/report.hpp"

using namespace sgnn;
using namespace sgnn::report;
namespace fs = std::filesystem;

namespace {

config::ExperimentConfig tiny(const std::string& experiments)
{
    return config::to_experiment(config::Config::parse("experiments = " + experiments + R"(
seed = 3

[mismatch_sweep]
deltas = [0, 0.3]
n_train = 300
n_test = 100
n_seeds = 1
epochs = 1
hidden = [8]

[model_selection]
n_total = 100
steps = 20
multistart = 1
max_outer = 20
epochs = 2
hidden = [8]
)"));
}

fs::path fresh_dir(const std::string& name)
{
    const auto d = fs::temp_directory_path() / ("sgnn_test_report_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("CSV writer quotes per RFC 4180 and parses back")
{
    CsvWriter w({"a", "b"});
    w.row({"plain", "with,comma"});
    w.row({"say \"hi\"", "line\nbreak"});
    CHECK(w.str() == "a,b\r\nplain,\"with,comma\"\r\n\"say \"\"hi\"\"\",\"line\nbreak\"\r\n");
    const auto t = parse_csv(w.str());
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "with,comma");
    CHECK(t.rows[1][0] == "say \"hi\"");
    CHECK(t.rows[1][1] == "line\nbreak");
    CHECK(t.column("b") == 1);
    CHECK_THROWS(w.row({"one"}));
}

TEST_CASE("numbers round trip exactly")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) CHECK(std::stod(num(v)) == v);
}

TEST_CASE("run, verify and export")
{
    const auto dir = fresh_dir("run");
    const auto m = run_experiments(tiny("mismatch_sweep, model_selection"), "digest", dir);
    CHECK(m["artifacts"].size() == 4);
    CHECK(m["master_seed"] == 3);
    CHECK(verify_manifest(dir));
    for (const auto& a : m["artifacts"])
        CHECK(sha256_file(dir / a["path"].get<std::string>()) == a["sha256"].get<std::string>());

    const auto written = export_plotdata(dir);
    CHECK(written.size() == 2);
    CHECK(fs::exists(dir / "fig3.csv"));
    CHECK(fs::exists(dir / "fig5.csv"));
    CHECK_FALSE(fs::exists(dir / "fig2.csv"));
    const auto fig5 = parse_csv(read_file(dir / "fig5.csv"));
    CHECK(fig5.header == std::vector<std::string>{"epoch", "sgnn_error", "aic_error"});
    CHECK(fig5.rows.size() == 2);
    CHECK(verify_manifest(dir));

    const auto again = fresh_dir("run2");
    run_experiments(tiny("mismatch_sweep, model_selection"), "digest", again);
    for (const auto* f : {"sweep.csv", "selection.csv", "selection_decisions.csv"})
        CHECK(read_file(dir / f) == read_file(again / f));
}

TEST_CASE("only the sweep yields only fig3")
{
    const auto dir = fresh_dir("sweep_only");
    run_experiments(tiny("mismatch_sweep"), "d", dir);
    const auto written = export_plotdata(dir);
    REQUIRE(written.size() == 1);
    CHECK(written[0].filename() == "fig3.csv");
}

TEST_CASE("tampering and missing manifests are detected")
{
    const auto dir = fresh_dir("tamper");
    run_experiments(tiny("mismatch_sweep"), "d", dir);
    write_file_atomic(dir / "sweep.csv", "seed\r\n1\r\n");
    std::string problem;
    CHECK_FALSE(verify_manifest(dir, &problem));
    CHECK(problem.find("sweep.csv") != std::string::npos);
    CHECK_THROWS_AS(export_plotdata(dir), std::runtime_error);

    write_file_atomic(dir / "manifest.json", "{not json");
    CHECK_THROWS_AS(export_plotdata(dir), std::runtime_error);
    CHECK_THROWS_AS(export_plotdata(fresh_dir("missing")), std::runtime_error);
}
