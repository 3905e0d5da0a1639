#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgnn/common.hpp"
#include "sgnn/rng.hpp"

namespace sgnn::simcore {

enum class ModelTag : std::uint8_t { LDS = 0, SIR = 1, SEIR = 2 };

const char* to_string(ModelTag tag);
ModelTag model_tag_from_string(const std::string& s);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

/// Names and bounds shared by every ParamVector drawn from the same prior.
struct ParamSchema {
    std::vector<std::string> names;
    std::vector<Interval> bounds;

    std::size_t size() const { return names.size(); }
    bool operator==(const ParamSchema&) const = default;
};

/// Latent simulator parameters with per-dimension bounds.
///
/// Construction validates lo <= value <= hi; the schema is shared so that
/// datasets of millions of examples do not duplicate names.
class ParamVector {
public:
    ParamVector() : schema_(std::make_shared<const ParamSchema>()) {}
    ParamVector(std::shared_ptr<const ParamSchema> schema, std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }
    const ParamSchema& schema() const { return *schema_; }
    const std::shared_ptr<const ParamSchema>& schema_ptr() const { return schema_; }
    const std::string& name(std::size_t i) const { return schema_->names[i]; }
    const Interval& bounds(std::size_t i) const { return schema_->bounds[i]; }

    bool operator==(const ParamVector& o) const { return values_ == o.values_ && *schema_ == *o.schema_; }

private:
    std::shared_ptr<const ParamSchema> schema_;
    std::vector<double> values_;
};

/// Independent uniform prior over a box; lo < hi in every dimension.
class PriorSpec {
public:
    PriorSpec() : schema_(std::make_shared<const ParamSchema>()) {}
    PriorSpec(std::vector<std::string> names, std::vector<Interval> bounds);

    std::size_t size() const { return schema_->size(); }
    const ParamSchema& schema() const { return *schema_; }
    const std::shared_ptr<const ParamSchema>& schema_ptr() const { return schema_; }
    /// Prior restricted to the first `k` dimensions (SIR uses the first two SEIR parameters).
    PriorSpec leading(std::size_t k) const;
    std::vector<double> mean() const;

    bool operator==(const PriorSpec& o) const { return *schema_ == *o.schema_; }

private:
    std::shared_ptr<const ParamSchema> schema_;
};

/// Time-major T x d state matrix.
struct Trajectory {
    Matrix states;
    ModelTag model_tag = ModelTag::LDS;

    std::size_t steps() const { return states.rows; }
    std::size_t dim() const { return states.cols; }
};

struct ObservationSpec {
    double noise_sigma = 0.0;
    std::vector<std::size_t> observed_dims;

    void validate(std::size_t state_dim) const;
};

/// Initial compartment fractions for the epidemic models. R0 = 1 - s0 - i0, E0 = 0.
struct CompartmentalInit {
    double s0 = 1.0 - 1e-2;
    double i0 = 1e-2;
};

std::size_t state_dim(ModelTag tag);
/// Column of the infected compartment (SIR: S,I,R; SEIR: S,E,I,R).
std::size_t infected_index(ModelTag tag);
std::size_t param_count(ModelTag tag);
std::vector<double> initial_state(ModelTag tag, const CompartmentalInit& init);

ParamVector sample_prior(const PriorSpec& prior, RngStream& rng);

/// x_{t+1} = diag(theta) x_t + N(0, sigma^2 I). Returns steps + 1 rows; row 0 is x0.
Trajectory simulate_lds(const ParamVector& theta, std::size_t steps, std::span<const double> x0,
                        double sigma, RngStream& rng);

/// General-matrix variant used by the mismatch experiment.
Trajectory simulate_lds_matrix(const Matrix& a, std::size_t steps, std::span<const double> x0,
                               double sigma, RngStream& rng);

/// Noiseless forward-Euler SIR/SEIR. Returns `steps` rows; row 0 is the
/// initial state. Throws NumericalError naming the step when a compartment
/// leaves [-1e-9, 1 + 1e-9].
Trajectory simulate_compartmental(ModelTag tag, const ParamVector& theta, std::size_t steps,
                                  std::span<const double> init);

/// Allocation-free infected-series kernel used by the least-squares fitter.
/// Returns false on blowup instead of throwing.
bool simulate_infected(ModelTag tag, std::span<const double> theta, const CompartmentalInit& init,
                       std::span<double> out) noexcept;

Matrix apply_observation(const Trajectory& traj, const ObservationSpec& obs, RngStream& rng);

/// The fixed priors used by the epidemic experiments: beta, gamma (and sigma for SEIR).
PriorSpec epidemic_prior(ModelTag tag);
/// theta ~ U([0.5, 1.5]^2) for the diagonal LDS.
PriorSpec lds_prior();

}  // namespace sgnn::simcore
