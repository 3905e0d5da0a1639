#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/datagen.hpp"
#include "sgnn/simcore.hpp"

namespace sgnn::oracle {

/// Simulator runs {(theta_i, x_i)} with the noiseless observation of each
/// run and, once a network is available, its embedding.
struct ReferenceLibrary {
    std::shared_ptr<const simcore::ParamSchema> schema;
    Matrix thetas;        ///< M x p
    Matrix inputs;        ///< M x D, as the network sees them
    Matrix observations;  ///< M x D, noiseless counterpart of `inputs`
    Matrix embeddings;    ///< M x E, or 0 x 0 when absent

    std::size_t size() const { return thetas.rows; }
    simcore::ParamVector theta(std::size_t i) const;
    void validate() const;
};

/// Atoms drawn as examples 0..m-1 of `task` under `seed`.
ReferenceLibrary build_library(const datagen::TaskSpec& task, std::size_t m, std::uint64_t seed,
                               Exec exec = Exec::Parallel);

/// Persisted as a dataset whose target is the noiseless observation, plus an
/// embeddings sidecar at `path` + ".emb" when embeddings are present.
void save_library(const ReferenceLibrary& lib, const datagen::TaskSpec& task, std::uint64_t seed,
                  const std::filesystem::path& path);
ReferenceLibrary load_library(const std::filesystem::path& path);

/// Atom indices into a ReferenceLibrary with weights forming a probability vector.
struct AttributionDistribution {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
    /// Every kernel value underflowed; the distribution is a point mass on the nearest atom.
    bool fallback = false;

    std::size_t size() const { return weights.size(); }
    void validate() const;
};

/// Normalise log-weights with max subtraction. If even the largest raw
/// weight underflows (log w < log DBL_MIN) the result is a point mass on
/// the argmax, flagged as a fallback.
AttributionDistribution normalize_log_weights(std::span<const double> log_weights,
                                              std::vector<std::size_t> indices = {});

enum class BandwidthRule {
    MedianSquaredDistance,  ///< median of ||xi - xj||^2 over nonzero pairs
    MedianDistance,         ///< median of ||xi - xj|| over nonzero pairs
};

BandwidthRule bandwidth_rule_from_string(const std::string& s);

/// Median over all pairs when there are at most `max_pairs`, otherwise over
/// `max_pairs` uniformly sampled pairs. Zero-distance pairs are excluded.
double median_sq_bandwidth(const Matrix& points, std::uint64_t seed,
                           BandwidthRule rule = BandwidthRule::MedianSquaredDistance,
                           std::size_t max_pairs = 1'000'000, Exec exec = Exec::Parallel);

struct KernelEstimate {
    std::vector<double> theta;
    bool fallback = false;
};

/// Nadaraya-Watson mean of the atom thetas, w_i ~ exp(-||x - x_i||^2 / (2 sigma_sq)).
KernelEstimate kernel_estimate(std::span<const double> query, const ReferenceLibrary& lib, double sigma_sq);
simcore::ParamVector kernel_bayes_estimate(std::span<const double> query, const ReferenceLibrary& lib, double sigma_sq);
/// One estimate per query row.
Matrix kernel_bayes_batch(const Matrix& queries, const ReferenceLibrary& lib, double sigma_sq,
                          Exec exec = Exec::Parallel);

/// Likelihood-weighted posterior over library atoms under a Gaussian
/// observation model and uniform prior:
/// w_i ~ exp(-||x - obs_i||^2 / (2 obs_sigma^2)).
AttributionDistribution discrete_posterior(std::span<const double> query, const ReferenceLibrary& lib,
                                           double obs_sigma);
/// Same, restricted to a subset of atoms.
AttributionDistribution discrete_posterior(std::span<const double> query, const ReferenceLibrary& lib,
                                           std::span<const std::size_t> atoms, double obs_sigma);

}  // namespace sgnn::oracle
