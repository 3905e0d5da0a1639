#include "sgnn/oracle.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "sgnn/binio.hpp"
#include "sgnn/fileio.hpp"

namespace sgnn::oracle {

namespace {

const double kLogMin = std::log(DBL_MIN);

std::filesystem::path embeddings_path(const std::filesystem::path& p)
{
    auto e = p;
    e += ".emb";
    return e;
}

double median_of(std::vector<double>& v)
{
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace

simcore::ParamVector ReferenceLibrary::theta(std::size_t i) const
{
    const auto r = thetas.row(i);
    return simcore::ParamVector(schema, std::vector<double>(r.begin(), r.end()));
}

void ReferenceLibrary::validate() const
{
    require(size() >= 1, "ReferenceLibrary: need at least one atom");
    require(schema && thetas.cols == schema->size(), "ReferenceLibrary: theta width does not match schema");
    require(inputs.rows == size(), "ReferenceLibrary: inputs row count mismatch");
    require(observations.rows == 0 || observations.rows == size(), "ReferenceLibrary: observations row count mismatch");
    require(embeddings.rows == 0 || embeddings.rows == size(), "ReferenceLibrary: embeddings row count mismatch");
}

ReferenceLibrary build_library(const datagen::TaskSpec& task, std::size_t m, std::uint64_t seed, Exec exec)
{
    require(m >= 1, "build_library: M must be >= 1");
    task.validate();
    require(task.target != datagen::TargetKind::NextState && task.target != datagen::TargetKind::ModelClass,
            "build_library: task must have a single parameter family");

    ReferenceLibrary lib;
    lib.schema = task.prior.schema_ptr();
    lib.thetas = Matrix(m, task.prior.size());
    lib.inputs = Matrix(m, task.input_dim());
    lib.observations = Matrix(m, task.input_dim());
    const auto count = static_cast<std::int64_t>(m);
    auto fill = [&](std::int64_t i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto s = datagen::draw_sample(task, seed, idx);
        std::copy(s.example.theta.values().begin(), s.example.theta.values().end(), lib.thetas.row(idx).begin());
        std::copy(s.example.input.begin(), s.example.input.end(), lib.inputs.row(idx).begin());
        std::copy(s.clean_input.begin(), s.clean_input.end(), lib.observations.row(idx).begin());
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i) fill(i);
    } else {
        for (std::int64_t i = 0; i < count; ++i) fill(i);
    }
    return lib;
}

void save_library(const ReferenceLibrary& lib, const datagen::TaskSpec& task, std::uint64_t seed,
                  const std::filesystem::path& path)
{
    lib.validate();
    datagen::Dataset ds;
    ds.manifest = {seed, task.digest(), lib.size(), task};
    // The dataset target slot carries the noiseless observation.
    ds.manifest.library = true;
    for (std::size_t i = 0; i < lib.size(); ++i) {
        datagen::Example ex;
        ex.input.assign(lib.inputs.row(i).begin(), lib.inputs.row(i).end());
        ex.target.assign(lib.observations.row(i).begin(), lib.observations.row(i).end());
        ex.theta = lib.theta(i);
        ex.model_tag = task.model;
        ds.examples.push_back(std::move(ex));
    }
    datagen::save_dataset(ds, path);

    if (lib.embeddings.rows > 0) {
        binio::Writer w;
        w.bytes("SGNE");
        w.u64(lib.embeddings.rows);
        w.u64(lib.embeddings.cols);
        for (double v : lib.embeddings.data) w.f64(v);
        write_file_atomic(embeddings_path(path), w.str());
    } else {
        std::filesystem::remove(embeddings_path(path));
    }
}

ReferenceLibrary load_library(const std::filesystem::path& path)
{
    const auto ds = datagen::load_dataset(path);
    ReferenceLibrary lib;
    lib.schema = ds.manifest.task.prior.schema_ptr();
    lib.inputs = ds.inputs();
    lib.observations = ds.targets();
    lib.thetas = Matrix(ds.size(), lib.schema->size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        std::copy(ds.examples[i].theta.values().begin(), ds.examples[i].theta.values().end(), lib.thetas.row(i).begin());

    const auto emb = embeddings_path(path);
    if (std::filesystem::exists(emb)) {
        const auto bytes = read_file(emb);
        binio::Reader r(bytes);
        if (r.bytes(4) != "SGNE")
            throw datagen::DatasetIoError(datagen::IoErrorKind::MalformedHeader, "embeddings: bad magic");
        const auto rows = r.u64(), cols = r.u64();
        if (!r.ok()) throw datagen::DatasetIoError(datagen::IoErrorKind::Truncated, "embeddings: truncated header");
        if (rows != lib.size())
            throw datagen::DatasetIoError(datagen::IoErrorKind::ShapeMismatch, "embeddings: row count differs from library");
        if (r.remaining() != rows * cols * 8)
            throw datagen::DatasetIoError(r.remaining() < rows * cols * 8 ? datagen::IoErrorKind::Truncated
                                                                         : datagen::IoErrorKind::ShapeMismatch,
                                          "embeddings: payload size mismatch");
        lib.embeddings = Matrix(rows, cols);
        for (auto& v : lib.embeddings.data) v = r.f64();
    }
    lib.validate();
    return lib;
}

void AttributionDistribution::validate() const
{
    require(indices.size() == weights.size(), "AttributionDistribution: index/weight length mismatch");
    double s = 0.0;
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), "AttributionDistribution: negative or non-finite weight");
        s += w;
    }
    require(std::abs(s - 1.0) <= 1e-9, "AttributionDistribution: weights do not sum to 1");
}

AttributionDistribution normalize_log_weights(std::span<const double> log_weights, std::vector<std::size_t> indices)
{
    require(!log_weights.empty(), "normalize_log_weights: empty");
    AttributionDistribution d;
    if (indices.empty()) {
        indices.resize(log_weights.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
    }
    require(indices.size() == log_weights.size(), "normalize_log_weights: index count mismatch");
    d.indices = std::move(indices);
    const auto best = std::max_element(log_weights.begin(), log_weights.end());
    d.weights.assign(log_weights.size(), 0.0);
    if (!(*best >= kLogMin)) {
        d.fallback = true;
        d.weights[static_cast<std::size_t>(best - log_weights.begin())] = 1.0;
        return d;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        d.weights[i] = std::exp(log_weights[i] - *best);
        s += d.weights[i];
    }
    for (auto& w : d.weights) w /= s;
    return d;
}

BandwidthRule bandwidth_rule_from_string(const std::string& s)
{
    if (s == "median_squared_distance") return BandwidthRule::MedianSquaredDistance;
    if (s == "median_distance") return BandwidthRule::MedianDistance;
    throw ValidationError("unknown bandwidth rule '" + s + "'");
}

double median_sq_bandwidth(const Matrix& points, std::uint64_t seed, BandwidthRule rule, std::size_t max_pairs, Exec exec)
{
    const std::size_t m = points.rows;
    require(m >= 2, "median_sq_bandwidth: need at least two points");
    require(max_pairs >= 1, "median_sq_bandwidth: max_pairs must be >= 1");

    const std::size_t total = m * (m - 1) / 2;
    const bool exact = total <= max_pairs;
    const std::size_t count = exact ? total : max_pairs;
    std::vector<double> d(count);

    auto sampled_distance = [&](std::size_t k) {
        RngStream rng(seed, stream_id(StreamPurpose::Bandwidth, k));
        const auto i = static_cast<std::size_t>(rng.below(m));
        auto j = static_cast<std::size_t>(rng.below(m - 1));
        if (j >= i) ++j;
        return squared_distance(points.row(i), points.row(j));
    };
    // Row i of the upper triangle starts at offset i*m - i*(i+1)/2.
    auto exact_row = [&](std::size_t i) {
        std::size_t k = i * m - i * (i + 1) / 2;
        for (std::size_t j = i + 1; j < m; ++j) d[k++] = squared_distance(points.row(i), points.row(j));
    };

    const auto rows = static_cast<std::int64_t>(m);
    const auto n = static_cast<std::int64_t>(count);
    if (exec == Exec::Parallel) {
        if (exact) {
#pragma omp parallel for schedule(dynamic, 8)
            for (std::int64_t i = 0; i < rows; ++i) exact_row(static_cast<std::size_t>(i));
        } else {
#pragma omp parallel for schedule(static)
            for (std::int64_t k = 0; k < n; ++k) d[static_cast<std::size_t>(k)] = sampled_distance(static_cast<std::size_t>(k));
        }
    } else if (exact) {
        for (std::int64_t i = 0; i < rows; ++i) exact_row(static_cast<std::size_t>(i));
    } else {
        for (std::int64_t k = 0; k < n; ++k) d[static_cast<std::size_t>(k)] = sampled_distance(static_cast<std::size_t>(k));
    }

    std::erase_if(d, [](double v) { return v == 0.0; });
    if (d.empty()) throw ValidationError("median_sq_bandwidth: degenerate bandwidth (all points identical)");
    if (rule == BandwidthRule::MedianDistance)
        for (auto& v : d) v = std::sqrt(v);
    return median_of(d);
}

KernelEstimate kernel_estimate(std::span<const double> query, const ReferenceLibrary& lib, double sigma_sq)
{
    require(sigma_sq > 0.0 && std::isfinite(sigma_sq), "kernel_bayes_estimate: sigma_sq must be > 0");
    require(lib.size() >= 1 && query.size() == lib.inputs.cols, "kernel_bayes_estimate: query width mismatch");
    std::vector<double> logw(lib.size());
    for (std::size_t i = 0; i < lib.size(); ++i) logw[i] = -squared_distance(query, lib.inputs.row(i)) / (2.0 * sigma_sq);
    const auto w = normalize_log_weights(logw);
    KernelEstimate est{std::vector<double>(lib.thetas.cols, 0.0), w.fallback};
    for (std::size_t i = 0; i < lib.size(); ++i) {
        if (w.weights[i] == 0.0) continue;
        for (std::size_t c = 0; c < lib.thetas.cols; ++c) est.theta[c] += w.weights[i] * lib.thetas(i, c);
    }
    // A convex combination can exceed the box by rounding only.
    for (std::size_t c = 0; c < est.theta.size(); ++c)
        est.theta[c] = std::clamp(est.theta[c], lib.schema->bounds[c].lo, lib.schema->bounds[c].hi);
    return est;
}

simcore::ParamVector kernel_bayes_estimate(std::span<const double> query, const ReferenceLibrary& lib, double sigma_sq)
{
    return simcore::ParamVector(lib.schema, kernel_estimate(query, lib, sigma_sq).theta);
}

Matrix kernel_bayes_batch(const Matrix& queries, const ReferenceLibrary& lib, double sigma_sq, Exec exec)
{
    Matrix out(queries.rows, lib.thetas.cols);
    const auto n = static_cast<std::int64_t>(queries.rows);
    auto one = [&](std::int64_t q) {
        const auto r = static_cast<std::size_t>(q);
        const auto est = kernel_estimate(queries.row(r), lib, sigma_sq);
        std::copy(est.theta.begin(), est.theta.end(), out.row(r).begin());
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::int64_t q = 0; q < n; ++q) one(q);
    } else {
        for (std::int64_t q = 0; q < n; ++q) one(q);
    }
    return out;
}

AttributionDistribution discrete_posterior(std::span<const double> query, const ReferenceLibrary& lib,
                                           std::span<const std::size_t> atoms, double obs_sigma)
{
    require(obs_sigma > 0.0 && std::isfinite(obs_sigma), "discrete_posterior: obs_sigma must be > 0");
    require(lib.observations.rows == lib.size(), "discrete_posterior: library lacks noiseless observations");
    require(query.size() == lib.observations.cols, "discrete_posterior: query width mismatch");
    std::vector<double> logw(atoms.size());
    const double denom = 2.0 * obs_sigma * obs_sigma;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        require(atoms[k] < lib.size(), "discrete_posterior: atom index out of range");
        logw[k] = -squared_distance(query, lib.observations.row(atoms[k])) / denom;
    }
    return normalize_log_weights(logw, std::vector<std::size_t>(atoms.begin(), atoms.end()));
}

AttributionDistribution discrete_posterior(std::span<const double> query, const ReferenceLibrary& lib, double obs_sigma)
{
    std::vector<std::size_t> all(lib.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return discrete_posterior(query, lib, all, obs_sigma);
}

}  // namespace sgnn::oracle
