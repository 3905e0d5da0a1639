#include "sgnn/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sgnn::simcore {

namespace {

constexpr double kBlowupTol = 1e-9;

bool in_unit(double v) { return v >= -kBlowupTol && v <= 1.0 + kBlowupTol; }

}  // namespace

const char* to_string(ModelTag tag)
{
    switch (tag) {
    case ModelTag::LDS: return "LDS";
    case ModelTag::SIR: return "SIR";
    case ModelTag::SEIR: return "SEIR";
    }
    return "?";
}

ModelTag model_tag_from_string(const std::string& s)
{
    if (s == "LDS") return ModelTag::LDS;
    if (s == "SIR") return ModelTag::SIR;
    if (s == "SEIR") return ModelTag::SEIR;
    throw ValidationError("unknown model tag '" + s + "'");
}

ParamVector::ParamVector(std::shared_ptr<const ParamSchema> schema, std::vector<double> values)
    : schema_(std::move(schema)), values_(std::move(values))
{
    require(schema_ && schema_->names.size() == schema_->bounds.size() &&
                schema_->names.size() == values_.size(),
            "ParamVector: names, values and bounds must have equal length");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const auto& b = schema_->bounds[i];
        if (!std::isfinite(values_[i]))
            throw ValidationError("ParamVector: non-finite value for '" + schema_->names[i] + "'");
        if (values_[i] < b.lo || values_[i] > b.hi)
            throw ValidationError("ParamVector: '" + schema_->names[i] + "' = " +
                                  std::to_string(values_[i]) + " outside bounds");
    }
}

PriorSpec::PriorSpec(std::vector<std::string> names, std::vector<Interval> bounds)
{
    require(names.size() == bounds.size(), "PriorSpec: names and bounds differ in length");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        require(std::isfinite(bounds[i].lo) && std::isfinite(bounds[i].hi) && bounds[i].lo < bounds[i].hi,
                "PriorSpec: need lo < hi for '" + names[i] + "'");
    }
    schema_ = std::make_shared<const ParamSchema>(ParamSchema{std::move(names), std::move(bounds)});
}

PriorSpec PriorSpec::leading(std::size_t k) const
{
    require(k <= size(), "PriorSpec::leading: too many dimensions");
    const auto& s = schema();
    return PriorSpec({s.names.begin(), s.names.begin() + static_cast<long>(k)},
                     {s.bounds.begin(), s.bounds.begin() + static_cast<long>(k)});
}

std::vector<double> PriorSpec::mean() const
{
    std::vector<double> m;
    for (const auto& b : schema().bounds) m.push_back(0.5 * (b.lo + b.hi));
    return m;
}

void ObservationSpec::validate(std::size_t state_dim) const
{
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "ObservationSpec: noise_sigma must be >= 0");
    require(!observed_dims.empty(), "ObservationSpec: observed_dims must be nonempty");
    for (auto d : observed_dims)
        require(d < state_dim, "ObservationSpec: observed dim " + std::to_string(d) + " out of range");
}

std::size_t state_dim(ModelTag tag)
{
    switch (tag) {
    case ModelTag::LDS: return 2;
    case ModelTag::SIR: return 3;
    case ModelTag::SEIR: return 4;
    }
    return 0;
}

std::size_t infected_index(ModelTag tag)
{
    require(tag != ModelTag::LDS, "infected_index: LDS has no infected compartment");
    return tag == ModelTag::SIR ? 1 : 2;
}

std::size_t param_count(ModelTag tag) { return tag == ModelTag::SEIR ? 3 : 2; }

std::vector<double> initial_state(ModelTag tag, const CompartmentalInit& init)
{
    const double r0 = 1.0 - init.s0 - init.i0;
    if (tag == ModelTag::SIR) return {init.s0, init.i0, r0};
    if (tag == ModelTag::SEIR) return {init.s0, 0.0, init.i0, r0};
    throw ValidationError("initial_state: not a compartmental model");
}

ParamVector sample_prior(const PriorSpec& prior, RngStream& rng)
{
    std::vector<double> v(prior.size());
    const auto& bounds = prior.schema().bounds;
    for (std::size_t i = 0; i < v.size(); ++i) {
        // lo + (hi-lo)*u with u < 1 can round up to hi but never past it.
        v[i] = std::min(rng.uniform(bounds[i].lo, bounds[i].hi), bounds[i].hi);
    }
    return ParamVector(prior.schema_ptr(), std::move(v));
}

Trajectory simulate_lds_matrix(const Matrix& a, std::size_t steps, std::span<const double> x0,
                               double sigma, RngStream& rng)
{
    const std::size_t d = x0.size();
    require(steps >= 1, "simulate_lds: steps must be >= 1");
    require(sigma >= 0.0, "simulate_lds: sigma must be >= 0");
    require(a.rows == d && a.cols == d, "simulate_lds: matrix/state dimension mismatch");
    for (double v : a.data)
        if (!std::isfinite(v)) throw ValidationError("simulate_lds: non-finite dynamics parameter");

    Trajectory traj{Matrix(steps + 1, d), ModelTag::LDS};
    for (std::size_t j = 0; j < d; ++j) traj.states(0, j) = x0[j];
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += a(i, j) * traj.states(t, j);
            traj.states(t + 1, i) = acc;
        }
        // Noise is drawn even when sigma == 0 so that the stream position
        // does not depend on the noise level.
        for (std::size_t i = 0; i < d; ++i) traj.states(t + 1, i) += sigma * rng.normal();
    }
    return traj;
}

Trajectory simulate_lds(const ParamVector& theta, std::size_t steps, std::span<const double> x0,
                        double sigma, RngStream& rng)
{
    require(theta.size() == x0.size(), "simulate_lds: theta and x0 dimension differ");
    Matrix a(theta.size(), theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) a(i, i) = theta[i];
    return simulate_lds_matrix(a, steps, x0, sigma, rng);
}

namespace {

// One forward-Euler step in place. Returns false if any compartment leaves the unit interval.
inline bool step_sir(double* s, double beta, double gamma)
{
    const double inf = beta * s[0] * s[1];
    const double rec = gamma * s[1];
    s[0] -= inf;
    s[1] += inf - rec;
    s[2] += rec;
    return in_unit(s[0]) && in_unit(s[1]) && in_unit(s[2]);
}

inline bool step_seir(double* s, double beta, double gamma, double sigma)
{
    const double inf = beta * s[0] * s[2];
    const double onset = sigma * s[1];
    const double rec = gamma * s[2];
    s[0] -= inf;
    s[1] += inf - onset;
    s[2] += onset - rec;
    s[3] += rec;
    return in_unit(s[0]) && in_unit(s[1]) && in_unit(s[2]) && in_unit(s[3]);
}

}  // namespace

Trajectory simulate_compartmental(ModelTag tag, const ParamVector& theta, std::size_t steps,
                                  std::span<const double> init)
{
    require(tag == ModelTag::SIR || tag == ModelTag::SEIR, "simulate_compartmental: SIR or SEIR only");
    require(steps >= 1, "simulate_compartmental: steps must be >= 1");
    const std::size_t d = state_dim(tag);
    require(init.size() == d, "simulate_compartmental: init has wrong dimension");
    require(theta.size() == param_count(tag), "simulate_compartmental: wrong parameter count");
    double total = 0.0;
    for (double v : init) {
        require(v >= 0.0, "simulate_compartmental: negative initial compartment");
        total += v;
    }
    require(std::abs(total - 1.0) <= 1e-9, "simulate_compartmental: initial state must sum to 1");

    Trajectory traj{Matrix(steps, d), tag};
    std::vector<double> s(init.begin(), init.end());
    for (std::size_t j = 0; j < d; ++j) traj.states(0, j) = s[j];
    for (std::size_t t = 1; t < steps; ++t) {
        const bool ok = tag == ModelTag::SIR ? step_sir(s.data(), theta[0], theta[1])
                                             : step_seir(s.data(), theta[0], theta[1], theta[2]);
        if (!ok) throw NumericalError("simulate_compartmental: compartment left [0,1] at step " + std::to_string(t));
        for (std::size_t j = 0; j < d; ++j) traj.states(t, j) = s[j];
    }
    return traj;
}

bool simulate_infected(ModelTag tag, std::span<const double> theta, const CompartmentalInit& init,
                       std::span<double> out) noexcept
{
    if (out.empty()) return true;
    double s[4];
    if (tag == ModelTag::SIR) {
        s[0] = init.s0; s[1] = init.i0; s[2] = 1.0 - init.s0 - init.i0;
        out[0] = s[1];
        for (std::size_t t = 1; t < out.size(); ++t) {
            if (!step_sir(s, theta[0], theta[1])) return false;
            out[t] = s[1];
        }
        return true;
    }
    if (tag == ModelTag::SEIR) {
        s[0] = init.s0; s[1] = 0.0; s[2] = init.i0; s[3] = 1.0 - init.s0 - init.i0;
        out[0] = s[2];
        for (std::size_t t = 1; t < out.size(); ++t) {
            if (!step_seir(s, theta[0], theta[1], theta[2])) return false;
            out[t] = s[2];
        }
        return true;
    }
    return false;
}

Matrix apply_observation(const Trajectory& traj, const ObservationSpec& obs, RngStream& rng)
{
    obs.validate(traj.dim());
    Matrix out(traj.steps(), obs.observed_dims.size());
    for (std::size_t t = 0; t < traj.steps(); ++t)
        for (std::size_t k = 0; k < obs.observed_dims.size(); ++k)
            out(t, k) = traj.states(t, obs.observed_dims[k]) + obs.noise_sigma * rng.normal();
    return out;
}

PriorSpec epidemic_prior(ModelTag tag)
{
    if (tag == ModelTag::SIR) return PriorSpec({"beta", "gamma"}, {{0.1, 0.5}, {0.05, 0.2}});
    if (tag == ModelTag::SEIR)
        return PriorSpec({"beta", "gamma", "sigma"}, {{0.1, 0.5}, {0.05, 0.2}, {0.1, 0.3}});
    throw ValidationError("epidemic_prior: SIR or SEIR only");
}

PriorSpec lds_prior() { return PriorSpec({"alpha", "beta"}, {{0.5, 1.5}, {0.5, 1.5}}); }

}  // namespace sgnn::simcore
