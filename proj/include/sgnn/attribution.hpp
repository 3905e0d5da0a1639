#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/nnet.hpp"
#include "sgnn/oracle.hpp"

namespace sgnn::attribution {

using oracle::AttributionDistribution;
using oracle::ReferenceLibrary;

/// w_i ~ exp(-||q - e_i||^2 / h_sq) over every row of `lib_embeddings`.
/// Note the exponent divides by h_sq, not 2 h_sq.
AttributionDistribution attribution_weights(std::span<const double> query_embedding, const Matrix& lib_embeddings,
                                            double h_sq);
/// Same, restricted to the listed rows.
AttributionDistribution attribution_weights(std::span<const double> query_embedding, const Matrix& lib_embeddings,
                                            std::span<const std::size_t> atoms, double h_sq);

/// sum_i w_i theta_i[component]^k.
double attribution_moment(const AttributionDistribution& dist, const ReferenceLibrary& lib, std::size_t component,
                          unsigned k);
/// sum_i w_i T(theta_i)^k for a user map T.
double attribution_moment(const AttributionDistribution& dist, const ReferenceLibrary& lib,
                          const std::function<double(std::span<const double>)>& target_fn, unsigned k);

struct KlDiagnostics {
    std::size_t floored = 0;  ///< terms whose attr_i was raised to the floor
};

inline constexpr double kKlFloor = 1e-12;

/// sum_i target_i log(target_i / max(attr_i, 1e-12)); terms with target_i = 0 contribute 0.
double kl_alignment_loss(const AttributionDistribution& target, const AttributionDistribution& attr,
                         KlDiagnostics* diag = nullptr);

enum class KlDirection {
    TargetFirst,   ///< KL(p(theta|x) || attribution)
    AttributionFirst,
};

/// Training hook: per batch, draws `atoms_per_batch` library atoms, embeds
/// their noiseless observations with the current network, and adds the
/// gradient of the mean KL between the discrete posterior and the
/// attribution weights on that subset.
class KlAlignment : public nnet::AuxiliaryLoss {
public:
    /// h_sq <= 0 selects the median heuristic, recomputed at each epoch start.
    KlAlignment(std::shared_ptr<const ReferenceLibrary> lib, double obs_sigma, double h_sq,
                std::size_t atoms_per_batch, KlDirection direction = KlDirection::TargetFirst,
                std::uint64_t seed = 0);

    void on_epoch_start(const nnet::Network& net, std::size_t epoch) override;
    double accumulate(const nnet::Network& net, const Matrix& batch_inputs, const Matrix& batch_embeddings,
                      double grad_scale, Matrix& d_embedding, nnet::Gradients& grads, RngStream& rng) override;

    double current_h_sq() const { return h_sq_; }

private:
    std::shared_ptr<const ReferenceLibrary> lib_;
    double obs_sigma_;
    double fixed_h_sq_;
    double h_sq_;
    std::size_t atoms_per_batch_;
    KlDirection direction_;
    std::uint64_t seed_;
};

/// Embeddings of every row of `inputs`.
Matrix embed(const nnet::Network& net, const Matrix& inputs);

struct AttributionConfig {
    std::size_t library_size = 2000;  ///< M
    std::size_t n_train = 10000;
    std::size_t n_eval = 500;          ///< held-out noisy queries (KL curve, k = 1 quality)
    std::size_t n_atom_queries = 100;  ///< noiseless library-atom queries (moment agreement)
    double noise_sigma = 0.02;         ///< observation noise on the infected series
    double obs_sigma = 0.0;            ///< KL-target likelihood scale; 0 means noise_sigma
    double h_sq = 1.0;                 ///< <= 0 selects the median heuristic
    double lambda = 0.1;
    std::size_t atoms_per_batch = 256;
    KlDirection direction = KlDirection::TargetFirst;
    std::vector<std::size_t> hidden{128, 128};
    nnet::Activation activation = nnet::Activation::GELU;
    nnet::TrainConfig train;
    std::uint64_t seed = 0;

    void validate() const;
    double resolved_obs_sigma() const { return obs_sigma > 0.0 ? obs_sigma : noise_sigma; }
};

struct MomentRow {
    std::size_t query = 0;
    std::size_t atom = 0;  ///< library atom whose noiseless observation is the query
    std::size_t component = 0;
    unsigned k = 1;
    double attribution = 0.0;
    double posterior = 0.0;
    double attribution_first_epoch = 0.0;
};

struct AttributionReport {
    std::vector<double> mean_kl;  ///< per epoch on the held-out queries, full library
    std::vector<double> h_sq;     ///< bandwidth in force at each epoch end
    std::vector<MomentRow> moments;
    /// Final attribution distributions for the noiseless-atom queries.
    std::vector<AttributionDistribution> query_distributions;
    double attribution_theta_mse = 0.0;  ///< k = 1 estimate vs true theta, held-out queries
    double prior_mean_theta_mse = 0.0;
    double posterior_theta_mse = 0.0;  ///< discrete-posterior mean vs true theta
    std::size_t fallbacks = 0;
    std::size_t floored_terms = 0;  ///< in the final-epoch KL evaluation
};

AttributionReport run_attribution_experiment(const AttributionConfig& cfg);

}  // namespace sgnn::attribution
