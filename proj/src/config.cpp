#include "sgnn/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

#include "sgnn/fileio.hpp"

namespace sgnn::config {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s)
{
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

std::string strip_comment(const std::string& line)
{
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string field_name(const std::string& section, const std::string& key)
{
    return section.empty() ? key : section + "." + key;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin)
{
    Config cfg;
    std::istringstream in(text);
    std::string raw, section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ValidationError(where + "empty section name");
            cfg.values_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(where + "expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError(where + "missing key before `=`");
        auto& sec = cfg.values_[section];
        if (sec.count(key)) throw ValidationError(where + "duplicate key " + field_name(section, key));
        sec[key] = value;
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ValidationError("cannot read config " + path.string() + ": " + e.what());
    }
    return parse(text, path.string());
}

bool Config::has(const std::string& section, const std::string& key) const
{
    const auto it = values_.find(section);
    return it != values_.end() && it->second.count(key);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value)
{
    values_[section][key] = value;
}

std::string Config::get_string(const std::string& section, const std::string& key) const
{
    if (!has(section, key)) throw ValidationError("missing required field " + field_name(section, key));
    return unquote(values_.at(section).at(key));
}

double Config::get_double(const std::string& section, const std::string& key) const
{
    const std::string s = get_string(section, key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE)
        throw ValidationError("field " + field_name(section, key) + " must be a number, got `" + s + "`");
    return v;
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key) const
{
    const std::string s = get_string(section, key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s.front() == '-' || *end != '\0' || errno == ERANGE)
        throw ValidationError("field " + field_name(section, key) + " must be a non-negative integer, got `" + s + "`");
    return v;
}

std::size_t Config::get_size(const std::string& section, const std::string& key) const
{
    return static_cast<std::size_t>(get_u64(section, key));
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key) const
{
    std::string s = get_string(section, key);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']') throw ValidationError("field " + field_name(section, key) + ": unterminated list");
        s = s.substr(1, s.size() - 2);
    }
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const
{
    std::vector<double> out;
    for (const auto& item : get_list(section, key)) {
        Config tmp;
        tmp.set("", "v", item);
        try {
            out.push_back(tmp.get_double("", "v"));
        } catch (const ValidationError&) {
            throw ValidationError("field " + field_name(section, key) + " must be a list of numbers, got `" + item + "`");
        }
    }
    return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& section, const std::string& key) const
{
    std::vector<std::size_t> out;
    for (const auto& item : get_list(section, key)) {
        Config tmp;
        tmp.set("", "v", item);
        try {
            out.push_back(tmp.get_size("", "v"));
        } catch (const ValidationError&) {
            throw ValidationError("field " + field_name(section, key) + " must be a list of integers, got `" + item + "`");
        }
    }
    return out;
}

void Config::require_known(const std::string& section, const std::vector<std::string>& allowed) const
{
    const auto it = values_.find(section);
    if (it == values_.end()) return;
    for (const auto& [key, value] : it->second)
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("unknown field " + field_name(section, key));
}

std::vector<std::string> Config::sections() const
{
    std::vector<std::string> out;
    for (const auto& [name, body] : values_) out.push_back(name);
    return out;
}

std::string Config::canonical() const
{
    std::string out;
    for (const auto& [section, body] : values_)
        for (const auto& [key, value] : body) out += field_name(section, key) + "=" + value + "\n";
    return out;
}

const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::BayesConvergence: return "bayes_convergence";
    case ExperimentKind::MismatchSweep: return "mismatch_sweep";
    case ExperimentKind::Attribution: return "attribution";
    case ExperimentKind::ModelSelection: return "model_selection";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s)
{
    for (auto k : {ExperimentKind::BayesConvergence, ExperimentKind::MismatchSweep, ExperimentKind::Attribution,
                   ExperimentKind::ModelSelection})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown experiment `" + s +
                          "` (expected bayes_convergence, mismatch_sweep, attribution or model_selection)");
}

bool ExperimentConfig::runs(ExperimentKind k) const
{
    return std::find(experiments.begin(), experiments.end(), k) != experiments.end();
}

std::uint64_t ExperimentConfig::stage_seed(ExperimentKind k) const
{
    return derive_seed(seed, 100 + static_cast<std::uint64_t>(k));
}

void ExperimentConfig::resolve_seeds()
{
    convergence.seeds.clear();
    for (std::size_t i = 0; i < convergence_seeds; ++i)
        convergence.seeds.push_back(derive_seed(stage_seed(ExperimentKind::BayesConvergence), i));
    sweep.seeds.clear();
    for (std::size_t i = 0; i < sweep_seeds; ++i)
        sweep.seeds.push_back(derive_seed(stage_seed(ExperimentKind::MismatchSweep), i));
    attribution.seed = stage_seed(ExperimentKind::Attribution);
    selection.seed = stage_seed(ExperimentKind::ModelSelection);
}

namespace {

const std::vector<std::string> kTrainKeys{"epochs", "lr", "batch_size", "optimizer", "hidden", "activation"};

std::vector<std::string> with_train_keys(std::vector<std::string> keys)
{
    keys.insert(keys.end(), kTrainKeys.begin(), kTrainKeys.end());
    return keys;
}

template <class T>
void read_opt(const Config& c, const std::string& s, const std::string& k, T& out)
{
    if (!c.has(s, k)) return;
    if constexpr (std::is_same_v<T, double>) {
        out = c.get_double(s, k);
    } else if constexpr (std::is_same_v<T, std::size_t>) {
        out = c.get_size(s, k);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        out = c.get_doubles(s, k);
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        out = c.get_sizes(s, k);
    } else {
        static_assert(sizeof(T) == 0, "unsupported type");
    }
}

void read_network(const Config& c, const std::string& s, std::vector<std::size_t>& hidden, nnet::Activation& act,
                  nnet::TrainConfig& train)
{
    read_opt(c, s, "hidden", hidden);
    if (c.has(s, "activation")) {
        try {
            act = nnet::activation_from_string(c.get_string(s, "activation"));
        } catch (const std::exception& e) {
            throw ValidationError("field " + s + ".activation: " + e.what());
        }
    }
    read_opt(c, s, "epochs", train.epochs);
    read_opt(c, s, "lr", train.lr);
    read_opt(c, s, "batch_size", train.batch_size);
    if (c.has(s, "optimizer")) {
        const auto o = c.get_string(s, "optimizer");
        if (o == "adam") train.optimizer = nnet::OptimizerKind::Adam;
        else if (o == "sgd") train.optimizer = nnet::OptimizerKind::SGD;
        else throw ValidationError("field " + s + ".optimizer must be adam or sgd, got `" + o + "`");
    }
}

void validate_in(const std::string& section, const std::function<void()>& f)
{
    try {
        f();
    } catch (const ValidationError& e) {
        throw ValidationError("[" + section + "] " + e.what());
    }
}

}  // namespace

ExperimentConfig to_experiment(const Config& c)
{
    ExperimentConfig ec;
    c.require_known("", {"experiments", "seed", "output_dir"});
    for (const auto& s : c.sections()) {
        if (s.empty()) continue;
        experiment_kind_from_string(s);  // rejects unknown sections
    }

    const auto names = c.get_list("", "experiments");
    if (names.empty()) throw ValidationError("field experiments must list at least one experiment");
    for (const auto& n : names) {
        const auto k = experiment_kind_from_string(n);
        if (!ec.runs(k)) ec.experiments.push_back(k);
    }
    ec.seed = c.get_u64("", "seed");
    if (c.has("", "output_dir")) ec.output_dir = c.get_string("", "output_dir");

    // Desk-scale training schedules; every one can be overridden per section.
    ec.convergence.train.epochs = 20;
    ec.sweep.train.epochs = 20;
    ec.attribution.train.epochs = 40;
    ec.selection.train.epochs = 60;
    ec.selection.train.batch_size = 256;

    {
        const std::string s = "bayes_convergence";
        c.require_known(s, with_train_keys({"train_sizes", "n_seeds", "library_size", "n_test", "process_sigma",
                                            "bandwidth_rule"}));
        auto& cc = ec.convergence;
        read_opt(c, s, "train_sizes", cc.train_sizes);
        read_opt(c, s, "n_seeds", ec.convergence_seeds);
        read_opt(c, s, "library_size", cc.library_size);
        read_opt(c, s, "n_test", cc.n_test);
        read_opt(c, s, "process_sigma", cc.process_sigma);
        if (c.has(s, "bandwidth_rule")) {
            try {
                cc.bandwidth = oracle::bandwidth_rule_from_string(c.get_string(s, "bandwidth_rule"));
            } catch (const std::exception& e) {
                throw ValidationError("field " + s + ".bandwidth_rule: " + e.what());
            }
        }
        read_network(c, s, cc.hidden, cc.activation, cc.train);
    }
    {
        const std::string s = "mismatch_sweep";
        c.require_known(s, with_train_keys({"d", "sigma", "a0", "deltas", "steps", "n_train", "n_test", "n_seeds",
                                            "l_max_quantile"}));
        auto& sc = ec.sweep;
        read_opt(c, s, "d", sc.d);
        read_opt(c, s, "sigma", sc.sigma);
        if (c.has(s, "a0")) {
            const auto v = c.get_doubles(s, "a0");
            if (v.size() != sc.d * sc.d)
                throw ValidationError("field " + s + ".a0 must hold d*d = " + std::to_string(sc.d * sc.d) +
                                      " row-major entries");
            sc.a0 = Matrix(sc.d, sc.d);
            sc.a0.data = v;
        }
        read_opt(c, s, "deltas", sc.deltas);
        read_opt(c, s, "steps", sc.steps);
        read_opt(c, s, "n_train", sc.n_train);
        read_opt(c, s, "n_test", sc.n_test);
        read_opt(c, s, "n_seeds", ec.sweep_seeds);
        read_opt(c, s, "l_max_quantile", sc.l_max_quantile);
        read_network(c, s, sc.hidden, sc.activation, sc.train);
    }
    {
        const std::string s = "attribution";
        c.require_known(s, with_train_keys({"library_size", "n_train", "n_eval", "n_atom_queries", "noise_sigma",
                                            "obs_sigma", "h_sq", "lambda", "atoms_per_batch", "kl_direction"}));
        auto& ac = ec.attribution;
        read_opt(c, s, "library_size", ac.library_size);
        read_opt(c, s, "n_train", ac.n_train);
        read_opt(c, s, "n_eval", ac.n_eval);
        read_opt(c, s, "n_atom_queries", ac.n_atom_queries);
        read_opt(c, s, "noise_sigma", ac.noise_sigma);
        read_opt(c, s, "obs_sigma", ac.obs_sigma);
        if (c.has(s, "h_sq")) {
            const auto v = c.get_string(s, "h_sq");
            ac.h_sq = v == "median" ? 0.0 : c.get_double(s, "h_sq");
            if (v != "median" && !(ac.h_sq > 0.0))
                throw ValidationError("field " + s + ".h_sq must be > 0 or \"median\"");
        }
        read_opt(c, s, "lambda", ac.lambda);
        read_opt(c, s, "atoms_per_batch", ac.atoms_per_batch);
        if (c.has(s, "kl_direction")) {
            const auto v = c.get_string(s, "kl_direction");
            if (v == "target_first") ac.direction = attribution::KlDirection::TargetFirst;
            else if (v == "attribution_first") ac.direction = attribution::KlDirection::AttributionFirst;
            else throw ValidationError("field " + s + ".kl_direction must be target_first or attribution_first");
        }
        read_network(c, s, ac.hidden, ac.activation, ac.train);
    }
    {
        const std::string s = "model_selection";
        c.require_known(s, with_train_keys({"n_total", "train_fraction", "steps", "noise_sigma", "multistart",
                                            "max_outer", "max_halvings", "rel_tol"}));
        auto& mc = ec.selection;
        read_opt(c, s, "n_total", mc.n_total);
        read_opt(c, s, "train_fraction", mc.train_fraction);
        read_opt(c, s, "steps", mc.steps);
        read_opt(c, s, "noise_sigma", mc.noise_sigma);
        read_opt(c, s, "multistart", mc.fit.multistart);
        read_opt(c, s, "max_outer", mc.fit.max_outer);
        read_opt(c, s, "max_halvings", mc.fit.max_halvings);
        read_opt(c, s, "rel_tol", mc.fit.rel_tol);
        read_network(c, s, mc.hidden, mc.activation, mc.train);
    }

    if (ec.convergence_seeds < 1) throw ValidationError("field bayes_convergence.n_seeds must be >= 1");
    if (ec.sweep_seeds < 1) throw ValidationError("field mismatch_sweep.n_seeds must be >= 1");
    ec.resolve_seeds();
    if (ec.runs(ExperimentKind::BayesConvergence)) validate_in("bayes_convergence", [&] { ec.convergence.validate(); });
    if (ec.runs(ExperimentKind::MismatchSweep)) validate_in("mismatch_sweep", [&] { ec.sweep.validate(); });
    if (ec.runs(ExperimentKind::Attribution)) validate_in("attribution", [&] { ec.attribution.validate(); });
    if (ec.runs(ExperimentKind::ModelSelection)) validate_in("model_selection", [&] { ec.selection.validate(); });
    return ec;
}

}  // namespace sgnn::config
