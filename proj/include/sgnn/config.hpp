#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgnn/attribution.hpp"
#include "sgnn/bounds.hpp"
#include "sgnn/common.hpp"
#include "sgnn/convergence.hpp"
#include "sgnn/modelselect.hpp"

namespace sgnn::config {

/// Flat TOML-style text: `key = value` lines grouped under `[section]`
/// headers; `#` starts a comment. Values are bare scalars, quoted strings,
/// or comma-separated lists (optionally in brackets). Keys before the first
/// header belong to the unnamed top-level section "".
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const { return values_.count(section) != 0; }
    void set(const std::string& section, const std::string& key, const std::string& value);

    std::string get_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key) const;
    std::size_t get_size(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& section, const std::string& key) const;

    /// Rejects keys outside `allowed` so that typos fail loudly.
    void require_known(const std::string& section, const std::vector<std::string>& allowed) const;
    std::vector<std::string> sections() const;

    /// Sorted `section.key=value` lines; the config digest hashes this.
    std::string canonical() const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

enum class ExperimentKind { BayesConvergence, MismatchSweep, Attribution, ModelSelection };

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
    std::vector<ExperimentKind> experiments;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    std::size_t convergence_seeds = 3;
    std::size_t sweep_seeds = 3;

    convergence::ConvergenceConfig convergence;
    bounds::SweepConfig sweep;
    attribution::AttributionConfig attribution;
    modelselect::SelectionConfig selection;

    bool runs(ExperimentKind k) const;
    /// Seeds of every stage are pure functions of the master seed.
    std::uint64_t stage_seed(ExperimentKind k) const;
    /// Resolve per-stage and per-replicate seeds from the master seed.
    void resolve_seeds();
};

/// Translate and validate. Missing required fields and module precondition
/// violations raise ValidationError naming the offending field.
ExperimentConfig to_experiment(const Config& cfg);

}  // namespace sgnn::config
