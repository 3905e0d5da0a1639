#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgnn/bounds.hpp"
#include "sgnn/checksum.hpp"
#include "sgnn/config.hpp"
#include "sgnn/datagen.hpp"
#include "sgnn/fileio.hpp"
#include "sgnn/nnet.hpp"
#include "sgnn/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgnn;

namespace {

std::optional<fs::path> g_error_dir;

void progress(const std::string& s)
{
    std::cerr << "[sgnn] " << s << std::endl;
}

int fail(const char* kind, const std::string& message, int code)
{
    const json report = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << report.dump() << std::endl;
    if (g_error_dir) {
        try {
            fs::create_directories(*g_error_dir);
            write_file_atomic(*g_error_dir / "error.json", report.dump(2) + "\n");
        } catch (...) {
        }
    }
    return code;
}

/// Returns SGNN_SEED when set; rejects anything but a non-negative integer.
std::optional<std::uint64_t> env_seed()
{
    const char* env = std::getenv("SGNN_SEED");
    if (!env) return std::nullopt;
    const std::string s = env;
    if (s.empty() || s.size() > 20 || s.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError("SGNN_SEED must be a non-negative integer, got '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::out_of_range&) {
        throw ValidationError("SGNN_SEED out of range: '" + s + "'");
    }
}

/// Applies the SGNN_SEED override and a forced experiment list, then validates.
config::ExperimentConfig prepare(config::Config& cfg, const std::string& forced_experiment, std::string& digest)
{
    if (!forced_experiment.empty()) {
        cfg.set("", "experiments", forced_experiment);
        if (!cfg.has("", "seed")) cfg.set("", "seed", "0");
    }
    if (const auto s = env_seed()) cfg.set("", "seed", std::to_string(*s));
    auto exp = config::to_experiment(cfg);
    digest = sha256_hex(cfg.canonical());
    return exp;
}

int run_config(const std::string& config_path, const std::string& out_override, const std::string& forced)
{
    if (!out_override.empty()) g_error_dir = out_override;
    auto cfg = config::Config::load(config_path);
    std::string digest;
    auto exp = prepare(cfg, forced, digest);
    fs::path out = !out_override.empty() ? fs::path(out_override)
                   : !exp.output_dir.empty() ? exp.output_dir
                                             : fs::path("sgnn_out");
    g_error_dir = out;
    progress("config digest " + digest.substr(0, 16) + ", output " + out.string());
    const auto manifest = report::run_experiments(exp, digest, out, progress);
    progress("wrote " + std::to_string(manifest["artifacts"].size()) + " artifacts in " +
             report::num(manifest["wall_clock_seconds"].get<double>()) + " s");
    return 0;
}

datagen::TaskSpec make_task(const std::string& name, double sigma, std::size_t steps)
{
    if (name == "lds_params") return datagen::lds_params_task(sigma);
    if (name == "sir_forecast") return datagen::sir_forecast_task(sigma);
    if (name == "model_class") return datagen::model_class_task(sigma, steps);
    if (name == "next_state") {
        Matrix a0(2, 2);
        a0(0, 0) = 0.9;
        a0(1, 1) = 0.8;
        return datagen::next_state_task(a0, sigma, steps);
    }
    throw ValidationError("unknown task '" + name + "'");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulation-grounded neural networks: data generation, training, Bayes oracle, bounds, attribution and model selection"};
    app.set_version_flag("--version", report::kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    std::string task_name = "lds_params", task_json, gen_out, gen_csv;
    double gen_sigma = 0.1;
    std::size_t gen_n = 1000, gen_steps = 100;
    std::uint64_t gen_seed = 0;
    auto* task_opt = gen->add_option("--task", task_name, "lds_params | sir_forecast | model_class | next_state");
    gen->add_option("--task-json", task_json, "Task specification as JSON (overrides --task)")->excludes(task_opt);
    gen->add_option("--sigma", gen_sigma, "Process noise (LDS) or observation noise (epidemic)");
    gen->add_option("--steps", gen_steps, "Trajectory length for model_class and next_state");
    gen->add_option("-n,--n", gen_n, "Number of examples");
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("-o,--out", gen_out, "Binary dataset path (manifest written alongside)")->required();
    gen->add_option("--csv", gen_csv, "Also export as CSV");

    // train
    auto* tr = app.add_subcommand("train", "Train an MLP on a dataset");
    std::string tr_data, tr_out, tr_act = "gelu", tr_loss = "mse", tr_norm = "column", tr_history;
    std::vector<std::size_t> tr_hidden{128, 128};
    nnet::TrainConfig tcfg;
    std::uint64_t tr_seed = 0;
    tr->add_option("--data", tr_data, "Training dataset")->required();
    tr->add_option("-o,--out", tr_out, "Checkpoint path")->required();
    tr->add_option("--hidden", tr_hidden, "Hidden widths")->delimiter(',');
    tr->add_option("--activation", tr_act, "relu | gelu | tanh");
    tr->add_option("--loss", tr_loss, "mse | cross_entropy | l1 | huber");
    tr->add_option("--normalize", tr_norm, "column | global | none")->check(CLI::IsMember({"column", "global", "none"}));
    tr->add_option("--epochs", tcfg.epochs, "Epochs");
    tr->add_option("--lr", tcfg.lr, "Learning rate");
    tr->add_option("--batch-size", tcfg.batch_size, "Minibatch size");
    tr->add_option("--seed", tr_seed, "Initialisation and shuffling seed");
    tr->add_option("--history", tr_history, "Write per-epoch loss CSV");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    std::string ev_net, ev_data, ev_loss = "mse", ev_out;
    ev->add_option("--net", ev_net, "Checkpoint")->required();
    ev->add_option("--data", ev_data, "Dataset")->required();
    ev->add_option("--loss", ev_loss, "mse | cross_entropy | l1 | huber");
    ev->add_option("-o,--out", ev_out, "Write the risk estimate as JSON")->required();

    // experiment subcommands
    std::string cfg_path, run_out;
    auto add_experiment = [&](const char* name, const char* help) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("-c,--config", cfg_path, "Experiment config file")->required();
        sc->add_option("-o,--out", run_out, "Output directory (overrides output_dir)");
        return sc;
    };
    auto* att = add_experiment("attribute", "Attribution alignment experiment");
    auto* sw = add_experiment("sweep", "Mismatch sweep with excess-risk bounds");
    auto* sel = add_experiment("select", "SGNN vs AIC model selection");
    auto* run = add_experiment("run", "Run every experiment listed in a config");

    auto* ex = app.add_subcommand("export", "Write tidy per-figure CSVs from a completed run");
    std::string ex_run, ex_out;
    ex->add_option("--run", ex_run, "Run directory with manifest.json")->required();
    ex->add_option("-o,--out", ex_out, "Destination directory (defaults to the run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (threads > 0) omp_set_num_threads(threads);

        if (gen->parsed()) {
            datagen::TaskSpec task = task_json.empty() ? make_task(task_name, gen_sigma, gen_steps)
                                                       : datagen::TaskSpec::from_json(json::parse(read_file(task_json)));
            task.validate();
            if (const auto s = env_seed()) gen_seed = *s;
            progress("generating " + std::to_string(gen_n) + " examples, task " + task.digest().substr(0, 16));
            const auto ds = datagen::generate_dataset(task, gen_n, gen_seed);
            datagen::save_dataset(ds, gen_out);
            if (!gen_csv.empty()) datagen::export_csv(ds, gen_csv);
            return 0;
        }
        if (tr->parsed()) {
            if (const auto s = env_seed()) tr_seed = *s;
            const auto ds = datagen::load_dataset(tr_data);
            require(ds.size() > 0, "train: empty dataset");
            nnet::NetworkSpec spec;
            spec.widths.push_back(ds.input_dim());
            spec.widths.insert(spec.widths.end(), tr_hidden.begin(), tr_hidden.end());
            spec.widths.push_back(ds.target_dim());
            spec.activation = nnet::activation_from_string(tr_act);
            nnet::LossSpec loss{nnet::loss_kind_from_string(tr_loss)};
            if (loss.kind == nnet::LossKind::CrossEntropy) spec.head = nnet::Head::Softmax;
            auto net = nnet::Network::initialized(spec, derive_seed(tr_seed, 1));
            const Matrix x = ds.inputs();
            if (tr_norm != "none") {
                auto [m, s] = tr_norm == "column" ? nnet::column_moments(x) : nnet::global_moments(x);
                net.set_input_normalization(std::move(m), std::move(s));
            }
            tcfg.seed = derive_seed(tr_seed, 2);
            tcfg.on_epoch_end = [&](std::size_t e, const nnet::Network&) {
                if (e % 5 == 0 || e == tcfg.epochs) progress("epoch " + std::to_string(e) + "/" + std::to_string(tcfg.epochs));
            };
            auto result = nnet::train(std::move(net), x, ds.targets(), tcfg, loss);
            nnet::save_network(result.network, tr_out);
            if (!tr_history.empty()) {
                report::CsvWriter w({"epoch", "mean_loss", "clamped"});
                for (const auto& h : result.history)
                    w.row({std::to_string(h.epoch), report::num(h.mean_loss), std::to_string(h.clamped)});
                write_file_atomic(tr_history, w.str());
            }
            progress("final loss " + report::num(result.history.back().mean_loss));
            return 0;
        }
        if (ev->parsed()) {
            const auto net = nnet::load_network(ev_net);
            const auto ds = datagen::load_dataset(ev_data);
            require(ds.input_dim() == net.input_dim() && ds.target_dim() == net.output_dim(),
                    "eval: dataset shape does not match the network");
            nnet::LossSpec loss{nnet::loss_kind_from_string(ev_loss)};
            const auto r = bounds::estimate_risk([&](std::span<const double> x) { return net.forward(x).output; }, ds, loss);
            const json out = {{"loss", nnet::to_string(loss.kind)}, {"mean", r.mean}, {"stderr", r.stderr_}, {"n", r.n}};
            write_file_atomic(ev_out, out.dump(2) + "\n");
            progress("risk " + report::num(r.mean) + " +- " + report::num(r.stderr_));
            return 0;
        }
        if (att->parsed()) return run_config(cfg_path, run_out, "attribution");
        if (sw->parsed()) return run_config(cfg_path, run_out, "mismatch_sweep");
        if (sel->parsed()) return run_config(cfg_path, run_out, "model_selection");
        if (run->parsed()) return run_config(cfg_path, run_out, "");
        if (ex->parsed()) {
            for (const auto& p : report::export_plotdata(ex_run, ex_out)) progress("wrote " + p.string());
            return 0;
        }
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), 2);
    } catch (const NumericalError& e) {
        return fail("numerical", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
    return 0;
}
