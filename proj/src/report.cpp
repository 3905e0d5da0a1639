#include "sgnn/report.hpp"

#include <omp.h>

#include <chrono>
#include <sstream>
#include <stdexcept>

#include "sgnn/checksum.hpp"
#include "sgnn/fileio.hpp"

namespace sgnn::report {

using nlohmann::json;
namespace fs = std::filesystem;

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size())
{
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    if (fields.size() != width_) throw std::logic_error("CsvWriter: row width does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ += ',';
        const auto& f = fields[i];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            out_ += f;
        } else {
            out_ += '"';
            for (char c : f) {
                if (c == '"') out_ += '"';
                out_ += c;
            }
            out_ += '"';
        }
    }
    out_ += "\r\n";
}

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("csv: missing column " + name);
}

CsvTable parse_csv(const std::string& text)
{
    CsvTable t;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false, any = false;
    auto end_row = [&] {
        fields.push_back(field);
        field.clear();
        if (t.header.empty()) t.header = fields;
        else t.rows.push_back(fields);
        fields.clear();
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
            any = true;
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) end_row();
    for (const auto& r : t.rows)
        if (r.size() != t.header.size()) throw std::runtime_error("csv: ragged row");
    return t;
}

std::string num(double v)
{
    return format_double(v);
}

namespace {

std::string u(std::uint64_t v)
{
    return std::to_string(v);
}

}  // namespace

std::string convergence_csv(const std::vector<convergence::ConvergenceRow>& rows)
{
    CsvWriter w({"seed", "n", "mse_to_oracle", "mse_to_theta", "kernel_baseline_mse", "bandwidth"});
    for (const auto& r : rows)
        w.row({u(r.seed), u(r.n), num(r.mse_to_oracle), num(r.mse_to_theta), num(r.kernel_baseline_mse), num(r.bandwidth)});
    return w.str();
}

std::string convergence_summary_csv(const std::vector<convergence::ConvergenceSummary>& rows)
{
    CsvWriter w({"n", "median_mse_to_oracle", "median_mse_to_theta", "median_kernel_baseline_mse"});
    for (const auto& r : rows) w.row({u(r.n), num(r.mse_to_oracle), num(r.mse_to_theta), num(r.kernel_baseline_mse)});
    return w.str();
}

std::string sweep_csv(const std::vector<bounds::MismatchRow>& rows)
{
    CsvWriter w({"seed", "delta", "real_loss", "real_loss_se", "syn_loss", "bayes_risk", "real_excess", "syn_excess",
                 "tv_worst", "tv_empirical", "l_max", "bound_worst", "bound_empirical", "mean_input_norm"});
    for (const auto& r : rows)
        w.row({u(r.seed), num(r.delta), num(r.real_loss), num(r.real_loss_se), num(r.syn_loss), num(r.bayes_risk),
               num(r.real_excess), num(r.syn_excess), num(r.tv_worst), num(r.tv_empirical), num(r.l_max),
               num(r.bound_worst), num(r.bound_empirical), num(r.mean_input_norm)});
    return w.str();
}

std::string attribution_kl_csv(const attribution::AttributionReport& r)
{
    CsvWriter w({"epoch", "mean_kl", "h_sq"});
    for (std::size_t e = 0; e < r.mean_kl.size(); ++e) w.row({u(e + 1), num(r.mean_kl[e]), num(r.h_sq[e])});
    return w.str();
}

std::string attribution_moments_csv(const attribution::AttributionReport& r)
{
    CsvWriter w({"query", "atom", "component", "k", "attribution", "posterior", "attribution_first_epoch"});
    for (const auto& m : r.moments)
        w.row({u(m.query), u(m.atom), u(m.component), u(m.k), num(m.attribution), num(m.posterior),
               num(m.attribution_first_epoch)});
    return w.str();
}

std::string attribution_summary_csv(const attribution::AttributionReport& r)
{
    CsvWriter w({"metric", "value"});
    w.row({"attribution_theta_mse", num(r.attribution_theta_mse)});
    w.row({"posterior_theta_mse", num(r.posterior_theta_mse)});
    w.row({"prior_mean_theta_mse", num(r.prior_mean_theta_mse)});
    w.row({"fallbacks", u(r.fallbacks)});
    w.row({"floored_terms", u(r.floored_terms)});
    return w.str();
}

std::string selection_csv(const modelselect::SelectionReport& r)
{
    CsvWriter w({"row", "epoch", "sgnn_error", "aic_error"});
    for (std::size_t e = 0; e < r.sgnn_error.size(); ++e) w.row({"epoch", u(e + 1), num(r.sgnn_error[e]), ""});
    w.row({"summary", "", "", num(r.aic_error)});
    return w.str();
}

std::string selection_decisions_csv(const modelselect::SelectionReport& r)
{
    CsvWriter w({"index", "truth", "aic_choice", "sgnn_choice", "aic_sir", "aic_seir"});
    for (const auto& d : r.decisions)
        w.row({u(d.index), to_string(d.truth), to_string(d.aic), to_string(d.sgnn), num(d.aic_sir), num(d.aic_seir)});
    return w.str();
}

namespace {

json artifact_entry(const fs::path& dir, const std::string& name, const std::string& bytes)
{
    write_file_atomic(dir / name, bytes);
    return {{"path", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
}

json seed_list(const std::vector<std::uint64_t>& v)
{
    json a = json::array();
    for (auto s : v) a.push_back(s);
    return a;
}

}  // namespace

json run_experiments(const config::ExperimentConfig& cfg, const std::string& config_digest, const fs::path& out_dir,
                     const Progress& progress)
{
    using config::ExperimentKind;
    const auto t0 = std::chrono::steady_clock::now();
    auto say = [&](const std::string& s) {
        if (progress) progress(s);
    };
    fs::create_directories(out_dir);

    json artifacts = json::array();
    json stages = json::object();
    json experiments = json::array();
    for (auto k : cfg.experiments) experiments.push_back(config::to_string(k));

    if (cfg.runs(ExperimentKind::BayesConvergence)) {
        say("bayes_convergence: training " + std::to_string(cfg.convergence.train_sizes.size() * cfg.convergence.seeds.size()) +
            " networks");
        const auto rows = convergence::run_bayes_convergence(cfg.convergence);
        artifacts.push_back(artifact_entry(out_dir, "convergence.csv", convergence_csv(rows)));
        artifacts.push_back(artifact_entry(out_dir, "convergence_summary.csv", convergence_summary_csv(convergence::summarize(rows))));
        stages["bayes_convergence"] = {{"stage_seed", cfg.stage_seed(ExperimentKind::BayesConvergence)},
                                       {"replicate_seeds", seed_list(cfg.convergence.seeds)}};
    }
    if (cfg.runs(ExperimentKind::MismatchSweep)) {
        say("mismatch_sweep: " + std::to_string(cfg.sweep.seeds.size()) + " seeds x " +
            std::to_string(cfg.sweep.deltas.size()) + " deltas");
        const auto rows = bounds::mismatch_sweep(cfg.sweep);
        artifacts.push_back(artifact_entry(out_dir, "sweep.csv", sweep_csv(rows)));
        artifacts.push_back(artifact_entry(out_dir, "sweep_aggregate.csv", sweep_csv(bounds::aggregate_medians(rows))));
        stages["mismatch_sweep"] = {{"stage_seed", cfg.stage_seed(ExperimentKind::MismatchSweep)},
                                    {"replicate_seeds", seed_list(cfg.sweep.seeds)}};
    }
    if (cfg.runs(ExperimentKind::Attribution)) {
        say("attribution: M = " + std::to_string(cfg.attribution.library_size) + ", " +
            std::to_string(cfg.attribution.train.epochs) + " epochs");
        const auto r = attribution::run_attribution_experiment(cfg.attribution);
        artifacts.push_back(artifact_entry(out_dir, "attribution_kl.csv", attribution_kl_csv(r)));
        artifacts.push_back(artifact_entry(out_dir, "attribution_moments.csv", attribution_moments_csv(r)));
        artifacts.push_back(artifact_entry(out_dir, "attribution_summary.csv", attribution_summary_csv(r)));
        stages["attribution"] = {{"stage_seed", cfg.attribution.seed}};
    }
    if (cfg.runs(ExperimentKind::ModelSelection)) {
        say("model_selection: " + std::to_string(cfg.selection.n_total) + " trajectories, " +
            std::to_string(cfg.selection.train.epochs) + " epochs");
        const auto r = modelselect::run_model_selection_experiment(cfg.selection);
        artifacts.push_back(artifact_entry(out_dir, "selection.csv", selection_csv(r)));
        artifacts.push_back(artifact_entry(out_dir, "selection_decisions.csv", selection_decisions_csv(r)));
        stages["model_selection"] = {{"stage_seed", cfg.selection.seed}};
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = {
        {"tool", "sgnn"},
        {"version", kVersion},
        {"config_digest", config_digest},
        {"master_seed", cfg.seed},
        {"experiments", experiments},
        {"stage_seeds", stages},
        {"artifacts", artifacts},
        {"exports", json::array()},
        {"wall_clock_seconds", wall},
        {"threads", omp_get_max_threads()},
    };
    write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

namespace {

json load_manifest(const fs::path& run_dir)
{
    const auto path = run_dir / "manifest.json";
    if (!fs::exists(path)) throw std::runtime_error("missing manifest: " + path.string());
    try {
        auto m = json::parse(read_file(path));
        if (!m.contains("artifacts") || !m["artifacts"].is_array()) throw std::runtime_error("no artifact list");
        return m;
    } catch (const std::exception& e) {
        throw std::runtime_error("corrupt manifest " + path.string() + ": " + e.what());
    }
}

}  // namespace

bool verify_manifest(const fs::path& run_dir, std::string* problem)
{
    try {
        const auto m = load_manifest(run_dir);
        for (const auto* list : {&m["artifacts"], &m["exports"]}) {
            if (!list->is_array()) continue;
            for (const auto& a : *list) {
                const auto p = run_dir / a.at("path").get<std::string>();
                if (!fs::exists(p)) throw std::runtime_error("missing artifact " + p.string());
                if (sha256_file(p) != a.at("sha256").get<std::string>())
                    throw std::runtime_error("checksum mismatch for " + p.string());
            }
        }
        return true;
    } catch (const std::exception& e) {
        if (problem) *problem = e.what();
        return false;
    }
}

std::vector<fs::path> export_plotdata(const fs::path& run_dir, const fs::path& out_dir_in)
{
    const fs::path out_dir = out_dir_in.empty() ? run_dir : out_dir_in;
    auto manifest = load_manifest(run_dir);
    std::string problem;
    if (!verify_manifest(run_dir, &problem)) throw std::runtime_error(problem);

    auto has = [&](const std::string& name) {
        for (const auto& a : manifest["artifacts"])
            if (a.at("path") == name) return true;
        return false;
    };
    auto table = [&](const std::string& name) { return parse_csv(read_file(run_dir / name)); };

    std::vector<std::pair<std::string, std::string>> figs;
    if (has("convergence.csv")) {
        const auto t = table("convergence.csv");
        CsvWriter w({"seed", "n", "metric", "value"});
        for (const auto& r : t.rows)
            for (const char* m : {"mse_to_oracle", "mse_to_theta", "kernel_baseline_mse"})
                w.row({r[t.column("seed")], r[t.column("n")], m, r[t.column(m)]});
        figs.emplace_back("fig2.csv", w.str());
    }
    if (has("sweep.csv")) {
        const auto t = table("sweep.csv");
        CsvWriter w({"seed", "delta", "quantity", "value"});
        for (const auto& r : t.rows)
            for (const char* q : {"real_loss", "syn_loss", "real_excess", "bound_empirical", "bound_worst", "tv_empirical",
                                  "tv_worst"})
                w.row({r[t.column("seed")], r[t.column("delta")], q, r[t.column(q)]});
        figs.emplace_back("fig3.csv", w.str());
    }
    if (has("attribution_kl.csv")) {
        const auto t = table("attribution_kl.csv");
        CsvWriter w({"epoch", "mean_kl"});
        for (const auto& r : t.rows) w.row({r[t.column("epoch")], r[t.column("mean_kl")]});
        figs.emplace_back("fig4.csv", w.str());
    }
    if (has("selection.csv")) {
        const auto t = table("selection.csv");
        std::string aic;
        for (const auto& r : t.rows)
            if (r[t.column("row")] == "summary") aic = r[t.column("aic_error")];
        if (aic.empty()) throw std::runtime_error("selection.csv lacks the AIC summary row");
        CsvWriter w({"epoch", "sgnn_error", "aic_error"});
        for (const auto& r : t.rows)
            if (r[t.column("row")] == "epoch") w.row({r[t.column("epoch")], r[t.column("sgnn_error")], aic});
        figs.emplace_back("fig5.csv", w.str());
    }

    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    json exports = json::array();
    for (const auto& [name, bytes] : figs) {
        write_file_atomic(out_dir / name, bytes);
        written.push_back(out_dir / name);
        const std::string rel = fs::relative(out_dir / name, run_dir).generic_string();
        exports.push_back({{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }
    manifest["exports"] = exports;
    write_file_atomic(run_dir / "manifest.json", manifest.dump(2) + "\n");
    return written;
}

}  // namespace sgnn::report
