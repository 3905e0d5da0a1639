#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgnn/attribution.hpp"
#include "sgnn/bounds.hpp"
#include "sgnn/config.hpp"
#include "sgnn/convergence.hpp"
#include "sgnn/modelselect.hpp"

namespace sgnn::report {

inline constexpr const char* kVersion = "1.0.0";

/// RFC 4180 CSV built in memory; fields are quoted only when needed.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& fields);
    const std::string& str() const { return out_; }

private:
    std::size_t width_;
    std::string out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

std::string num(double v);

std::string convergence_csv(const std::vector<convergence::ConvergenceRow>& rows);
std::string convergence_summary_csv(const std::vector<convergence::ConvergenceSummary>& rows);
std::string sweep_csv(const std::vector<bounds::MismatchRow>& rows);
std::string attribution_kl_csv(const attribution::AttributionReport& r);
std::string attribution_moments_csv(const attribution::AttributionReport& r);
std::string attribution_summary_csv(const attribution::AttributionReport& r);
std::string selection_csv(const modelselect::SelectionReport& r);
std::string selection_decisions_csv(const modelselect::SelectionReport& r);

using Progress = std::function<void(const std::string&)>;

/// Runs every configured experiment, writes its CSVs into `out_dir`, and
/// finally writes `manifest.json` atomically. Returns the manifest.
nlohmann::json run_experiments(const config::ExperimentConfig& cfg, const std::string& config_digest,
                               const std::filesystem::path& out_dir, const Progress& progress = {});

/// Writes fig2.csv .. fig5.csv for the experiments present in a completed run
/// and records their checksums in the manifest. Throws std::runtime_error on a
/// missing or corrupt manifest or artifact.
std::vector<std::filesystem::path> export_plotdata(const std::filesystem::path& run_dir,
                                                   const std::filesystem::path& out_dir = {});

/// Every manifest artifact exists and matches its checksum.
bool verify_manifest(const std::filesystem::path& run_dir, std::string* problem = nullptr);

}  // namespace sgnn::report
