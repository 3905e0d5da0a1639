#include "sgnn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgnn/binio.hpp"
#include "sgnn/checksum.hpp"
#include "sgnn/fileio.hpp"

namespace sgnn::datagen {

using nlohmann::json;
using simcore::ParamVector;
using simcore::PriorSpec;

namespace {

constexpr char kMagic[] = "SGNN";
constexpr std::uint16_t kVersion = 1;

bool compartmental(ModelTag t) { return t == ModelTag::SIR || t == ModelTag::SEIR; }

// SIR/SEIR tasks always observe the infected compartment of whichever model
// generated the example; the stored observed_dims are ignored for them.
simcore::ObservationSpec observation_for(const TaskSpec& task, ModelTag tag)
{
    if (!compartmental(tag)) return task.obs;
    return {task.obs.noise_sigma, {simcore::infected_index(tag)}};
}

ModelTag tag_for_index(const TaskSpec& task, std::uint64_t index)
{
    if (task.target == TargetKind::ModelClass) return index % 2 == 0 ? ModelTag::SIR : ModelTag::SEIR;
    return task.model;
}

PriorSpec prior_for(const TaskSpec& task, ModelTag tag)
{
    if (task.target == TargetKind::ModelClass && tag == ModelTag::SIR) return task.prior.leading(2);
    return task.prior;
}

std::shared_ptr<const simcore::ParamSchema> empty_schema()
{
    static const auto schema = std::make_shared<const simcore::ParamSchema>();
    return schema;
}

std::size_t theta_dim_for(const TaskSpec& task, ModelTag tag)
{
    if (task.target == TargetKind::NextState) return 0;
    return prior_for(task, tag).size();
}

json matrix_json(const Matrix& m)
{
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j)
{
    Matrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw ValidationError("matrix json: data size mismatch");
    return m;
}

}  // namespace

const char* to_string(TargetKind kind)
{
    switch (kind) {
    case TargetKind::Params: return "params";
    case TargetKind::Forecast: return "forecast";
    case TargetKind::ModelClass: return "model_class";
    case TargetKind::NextState: return "next_state";
    }
    return "?";
}

TargetKind target_kind_from_string(const std::string& s)
{
    if (s == "params") return TargetKind::Params;
    if (s == "forecast") return TargetKind::Forecast;
    if (s == "model_class") return TargetKind::ModelClass;
    if (s == "next_state") return TargetKind::NextState;
    throw ValidationError("unknown target kind '" + s + "'");
}

void TaskSpec::validate() const
{
    require(steps >= 1, "TaskSpec: steps must be >= 1");
    require(process_sigma >= 0.0, "TaskSpec: process_sigma must be >= 0");
    if (mismatch) {
        require(target == TargetKind::NextState, "TaskSpec: mismatch applies to next_state tasks only");
        require(mismatch->delta >= 0.0 && std::isfinite(mismatch->delta), "TaskSpec: mismatch delta must be >= 0");
    }
    switch (target) {
    case TargetKind::NextState:
        require(model == ModelTag::LDS, "TaskSpec: next_state requires the LDS model");
        require(!x0.empty() && a0.rows == x0.size() && a0.cols == x0.size(),
                "TaskSpec: a0 must be square with the dimension of x0");
        obs.validate(x0.size());
        return;
    case TargetKind::ModelClass:
        require(prior.size() == 3, "TaskSpec: model_class needs the 3-parameter SEIR prior");
        observation_for(*this, ModelTag::SEIR).validate(4);
        return;
    case TargetKind::Forecast:
        require(compartmental(model), "TaskSpec: forecast requires SIR or SEIR");
        require(input_len >= 1 && horizon >= 1, "TaskSpec: forecast windows must be nonempty");
        require(input_len + horizon <= steps, "TaskSpec: forecast input_len + horizon exceeds steps");
        break;
    case TargetKind::Params:
        break;
    }
    if (model == ModelTag::LDS) {
        require(prior.size() == x0.size(), "TaskSpec: LDS prior dimension must match x0");
        obs.validate(x0.size());
    } else {
        require(prior.size() == simcore::param_count(model), "TaskSpec: prior dimension does not match model");
        require(init.s0 >= 0 && init.i0 >= 0 && init.s0 + init.i0 <= 1.0, "TaskSpec: invalid initial condition");
        observation_for(*this, model).validate(simcore::state_dim(model));
    }
}

std::size_t TaskSpec::input_dim() const
{
    const std::size_t obs_dims =
        target == TargetKind::ModelClass ? 1 : observation_for(*this, model).observed_dims.size();
    switch (target) {
    case TargetKind::Params: return steps * obs_dims;
    case TargetKind::Forecast: return input_len * obs_dims;
    case TargetKind::ModelClass: return steps;
    case TargetKind::NextState: return x0.size();
    }
    return 0;
}

std::size_t TaskSpec::target_dim() const
{
    switch (target) {
    case TargetKind::Params: return prior.size();
    case TargetKind::Forecast: return horizon * observation_for(*this, model).observed_dims.size();
    case TargetKind::ModelClass: return 2;
    case TargetKind::NextState: return x0.size();
    }
    return 0;
}

Matrix TaskSpec::dynamics() const
{
    if (!mismatch) return a0;
    return perturb_lds_matrix(a0, mismatch->delta, mismatch->seed);
}

json TaskSpec::to_json() const
{
    json prior_j = json::array();
    for (std::size_t i = 0; i < prior.size(); ++i)
        prior_j.push_back({{"name", prior.schema().names[i]},
                           {"lo", prior.schema().bounds[i].lo},
                           {"hi", prior.schema().bounds[i].hi}});
    json j{{"model", simcore::to_string(model)},
           {"steps", steps},
           {"noise_sigma", obs.noise_sigma},
           {"observed_dims", obs.observed_dims},
           {"prior", prior_j},
           {"target", to_string(target)},
           {"input_len", input_len},
           {"horizon", horizon},
           {"noisy_targets", noisy_targets},
           {"process_sigma", process_sigma},
           {"x0", x0},
           {"a0", matrix_json(a0)},
           {"s0", init.s0},
           {"i0", init.i0}};
    if (mismatch) j["mismatch"] = {{"delta", mismatch->delta}, {"seed", mismatch->seed}};
    return j;
}

TaskSpec TaskSpec::from_json(const json& j)
{
    TaskSpec t;
    t.model = simcore::model_tag_from_string(j.at("model").get<std::string>());
    t.steps = j.at("steps").get<std::size_t>();
    t.obs.noise_sigma = j.at("noise_sigma").get<double>();
    t.obs.observed_dims = j.at("observed_dims").get<std::vector<std::size_t>>();
    std::vector<std::string> names;
    std::vector<simcore::Interval> bounds;
    for (const auto& p : j.at("prior")) {
        names.push_back(p.at("name").get<std::string>());
        bounds.push_back({p.at("lo").get<double>(), p.at("hi").get<double>()});
    }
    t.prior = PriorSpec(std::move(names), std::move(bounds));
    t.target = target_kind_from_string(j.at("target").get<std::string>());
    t.input_len = j.at("input_len").get<std::size_t>();
    t.horizon = j.at("horizon").get<std::size_t>();
    t.noisy_targets = j.at("noisy_targets").get<bool>();
    t.process_sigma = j.at("process_sigma").get<double>();
    t.x0 = j.at("x0").get<std::vector<double>>();
    t.a0 = matrix_from_json(j.at("a0"));
    t.init.s0 = j.at("s0").get<double>();
    t.init.i0 = j.at("i0").get<double>();
    if (j.contains("mismatch"))
        t.mismatch = Mismatch{j["mismatch"].at("delta").get<double>(), j["mismatch"].at("seed").get<std::uint64_t>()};
    return t;
}

std::string TaskSpec::digest() const { return sha256_hex(to_json().dump()); }

TaskSpec lds_params_task(double process_sigma)
{
    TaskSpec t;
    t.model = ModelTag::LDS;
    t.steps = 10;
    t.obs = {0.0, {0, 1}};
    t.prior = simcore::lds_prior();
    t.target = TargetKind::Params;
    t.process_sigma = process_sigma;
    t.x0 = {1.0, 1.0};
    return t;
}

TaskSpec sir_forecast_task(double noise_sigma)
{
    TaskSpec t;
    t.model = ModelTag::SIR;
    t.steps = 50;
    t.obs = {noise_sigma, {1}};
    t.prior = simcore::epidemic_prior(ModelTag::SIR);
    t.target = TargetKind::Forecast;
    t.input_len = 40;
    t.horizon = 10;
    return t;
}

TaskSpec model_class_task(double noise_sigma, std::size_t steps)
{
    TaskSpec t;
    t.model = ModelTag::SEIR;
    t.steps = steps;
    t.obs = {noise_sigma, {2}};
    t.prior = simcore::epidemic_prior(ModelTag::SEIR);
    t.target = TargetKind::ModelClass;
    return t;
}

TaskSpec next_state_task(const Matrix& a0, double process_sigma, std::size_t steps)
{
    TaskSpec t;
    t.model = ModelTag::LDS;
    t.steps = steps;
    t.x0.assign(a0.rows, 1.0);
    std::vector<std::size_t> dims(a0.rows);
    std::iota(dims.begin(), dims.end(), std::size_t{0});
    t.obs = {0.0, dims};
    std::vector<std::string> names;
    std::vector<simcore::Interval> bounds;
    t.prior = PriorSpec(names, bounds);
    t.target = TargetKind::NextState;
    t.process_sigma = process_sigma;
    t.a0 = a0;
    return t;
}

Matrix Dataset::inputs() const
{
    Matrix m(size(), input_dim());
    for (std::size_t i = 0; i < size(); ++i) std::copy(examples[i].input.begin(), examples[i].input.end(), m.row(i).begin());
    return m;
}

Matrix Dataset::targets() const
{
    Matrix m(size(), target_dim());
    for (std::size_t i = 0; i < size(); ++i) std::copy(examples[i].target.begin(), examples[i].target.end(), m.row(i).begin());
    return m;
}

namespace {

// History x_0..x_t evolves under A0; only the transition producing the
// target uses `transition` (A0, or A0 + delta U under mismatch). The noise
// draws do not depend on the matrix, so every delta shares them.
Sample draw_next_state(const TaskSpec& task, const Matrix& transition, RngStream& rng)
{
    Sample s;
    Example& ex = s.example;
    const std::size_t d = task.x0.size();
    const auto t = static_cast<std::size_t>(rng.below(task.steps));
    std::vector<double> x(task.x0), next(d);
    auto step = [&](const Matrix& a) {
        for (std::size_t i = 0; i < d; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < d; ++j) v += a(i, j) * x[j];
            next[i] = v;
        }
        for (std::size_t i = 0; i < d; ++i) next[i] += task.process_sigma * rng.normal();
    };
    for (std::size_t k = 0; k < t; ++k) {
        step(task.a0);
        x.swap(next);
    }
    step(transition);
    ex.input = x;
    ex.target = next;
    ex.theta = ParamVector(empty_schema(), {});
    ex.model_tag = ModelTag::LDS;
    s.clean_input = ex.input;
    return s;
}

Sample draw_sample_impl(const TaskSpec& task, std::uint64_t seed, std::uint64_t index, const Matrix* transition)
{
    RngStream rng(seed, stream_id(StreamPurpose::Sample, index));
    if (task.target == TargetKind::NextState) return draw_next_state(task, transition ? *transition : task.dynamics(), rng);

    Sample s;
    Example& ex = s.example;
    const ModelTag tag = tag_for_index(task, index);
    ex.model_tag = tag;
    ex.theta = simcore::sample_prior(prior_for(task, tag), rng);

    simcore::Trajectory traj;
    std::size_t first_row = 0;
    if (tag == ModelTag::LDS) {
        traj = simcore::simulate_lds(ex.theta, task.steps, task.x0, task.process_sigma, rng);
        first_row = 1;  // x0 is fixed and carries no information
    } else {
        traj = simcore::simulate_compartmental(tag, ex.theta, task.steps, simcore::initial_state(tag, task.init));
    }
    const auto obs = observation_for(task, tag);
    const Matrix noisy = simcore::apply_observation(traj, obs, rng);

    std::vector<double> clean, observed;
    for (std::size_t t = first_row; t < traj.steps(); ++t) {
        for (std::size_t k = 0; k < obs.observed_dims.size(); ++k) {
            clean.push_back(traj.states(t, obs.observed_dims[k]));
            observed.push_back(noisy(t, k));
        }
    }

    const std::size_t width = obs.observed_dims.size();
    switch (task.target) {
    case TargetKind::Params:
        ex.input = std::move(observed);
        ex.target.assign(ex.theta.values().begin(), ex.theta.values().end());
        s.clean_input = std::move(clean);
        break;
    case TargetKind::Forecast: {
        const std::size_t split = task.input_len * width;
        const std::size_t end = split + task.horizon * width;
        ex.input.assign(observed.begin(), observed.begin() + static_cast<long>(split));
        const auto& tsrc = task.noisy_targets ? observed : clean;
        ex.target.assign(tsrc.begin() + static_cast<long>(split), tsrc.begin() + static_cast<long>(end));
        s.clean_input.assign(clean.begin(), clean.begin() + static_cast<long>(split));
        break;
    }
    case TargetKind::ModelClass:
        ex.input = std::move(observed);
        ex.target = tag == ModelTag::SIR ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
        s.clean_input = std::move(clean);
        break;
    case TargetKind::NextState:
        break;
    }
    return s;
}

}  // namespace

Sample draw_sample(const TaskSpec& task, std::uint64_t seed, std::uint64_t index)
{
    return draw_sample_impl(task, seed, index, nullptr);
}

Dataset generate_dataset(const TaskSpec& task, std::size_t n, std::uint64_t seed, Exec exec)
{
    require(n >= 1, "generate_dataset: n must be >= 1");
    task.validate();

    // Resolve the perturbed matrix once instead of per sample.
    Matrix transition;
    if (task.target == TargetKind::NextState) transition = task.dynamics();

    Dataset ds;
    ds.examples.resize(n);
    const auto count = static_cast<std::int64_t>(n);
    auto one = [&](std::int64_t i) {
        ds.examples[static_cast<std::size_t>(i)] =
            draw_sample_impl(task, seed, static_cast<std::uint64_t>(i), &transition).example;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i) one(i);
    } else {
        for (std::int64_t i = 0; i < count; ++i) one(i);
    }
    ds.manifest = Manifest{seed, task.digest(), n, task};
    return ds;
}

Matrix perturb_lds_matrix(const Matrix& a0, double delta, std::uint64_t seed)
{
    require(delta >= 0.0 && std::isfinite(delta), "perturb_lds_matrix: delta must be >= 0");
    require(!a0.data.empty(), "perturb_lds_matrix: empty matrix");
    RngStream rng(seed, stream_id(StreamPurpose::Perturbation, 0));
    std::vector<double> u(a0.data.size());
    double norm_sq = 0.0;
    for (auto& v : u) {
        v = rng.normal();
        norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    Matrix out = a0;
    for (std::size_t i = 0; i < u.size(); ++i) out.data[i] += delta * (u[i] * inv);
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed)
{
    require(train_fraction > 0.0 && train_fraction < 1.0, "split_dataset: fraction must lie in (0, 1)");
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    require(n_train >= 1 && n_train < n, "split_dataset: split would leave an empty part");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(seed, stream_id(StreamPurpose::Split, 0));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

    std::pair<Dataset, Dataset> out;
    for (std::size_t k = 0; k < n; ++k) (k < n_train ? out.first : out.second).examples.push_back(ds.examples[perm[k]]);
    out.first.manifest = ds.manifest;
    out.first.manifest.n = out.first.size();
    out.second.manifest = ds.manifest;
    out.second.manifest.n = out.second.size();
    return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& data_path)
{
    auto p = data_path;
    p += ".json";
    return p;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    const auto& task = ds.manifest.task;
    const bool labels = task.target == TargetKind::ModelClass && !ds.manifest.library;
    const std::size_t in_dim = ds.input_dim();
    const std::size_t tgt_dim = labels ? 1 : ds.target_dim();
    std::size_t theta_dim = 0;
    for (const auto& ex : ds.examples) theta_dim = std::max(theta_dim, ex.theta.size());

    binio::Writer w;
    w.bytes(std::string_view(kMagic, 4));
    w.u16(kVersion);
    w.u16(static_cast<std::uint16_t>(task.target));
    w.u64(ds.size());
    w.u32(static_cast<std::uint32_t>(in_dim));
    w.u32(static_cast<std::uint32_t>(tgt_dim));
    w.u32(static_cast<std::uint32_t>(theta_dim));
    for (const auto& ex : ds.examples) w.u8(static_cast<std::uint8_t>(ex.model_tag));
    for (const auto& ex : ds.examples) w.u8(static_cast<std::uint8_t>(ex.theta.size()));
    for (const auto& ex : ds.examples) {
        require(ex.input.size() == in_dim, "save_dataset: inhomogeneous input length");
        for (double v : ex.input) w.f64(v);
        if (labels) {
            w.f64(ex.target.at(1) > ex.target.at(0) ? 1.0 : 0.0);
        } else {
            require(ex.target.size() == tgt_dim, "save_dataset: inhomogeneous target length");
            for (double v : ex.target) w.f64(v);
        }
        for (std::size_t k = 0; k < theta_dim; ++k) w.f64(k < ex.theta.size() ? ex.theta[k] : 0.0);
    }
    write_file_atomic(path, w.str());

    const json manifest{{"format", "SGNN"},
                        {"version", kVersion},
                        {"seed", ds.manifest.seed},
                        {"task_digest", ds.manifest.task_digest},
                        {"n", ds.size()},
                        {"input_dim", in_dim},
                        {"target_dim", tgt_dim},
                        {"library", ds.manifest.library},
                        {"task", task.to_json()}};
    write_file_atomic(manifest_path(path), manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path)
{
    json manifest;
    std::string bytes;
    try {
        manifest = json::parse(read_file(manifest_path(path)));
        bytes = read_file(path);
    } catch (const json::exception& e) {
        throw DatasetIoError(IoErrorKind::MalformedHeader, std::string("dataset manifest: ") + e.what());
    } catch (const std::runtime_error& e) {
        throw DatasetIoError(IoErrorKind::Io, e.what());
    }

    Dataset ds;
    try {
        ds.manifest.seed = manifest.at("seed").get<std::uint64_t>();
        ds.manifest.task_digest = manifest.at("task_digest").get<std::string>();
        ds.manifest.n = manifest.at("n").get<std::size_t>();
        ds.manifest.task = TaskSpec::from_json(manifest.at("task"));
        ds.manifest.library = manifest.value("library", false);
    } catch (const std::exception& e) {
        throw DatasetIoError(IoErrorKind::MalformedHeader, std::string("dataset manifest: ") + e.what());
    }
    const auto& task = ds.manifest.task;

    binio::Reader r(bytes);
    const std::string magic = r.bytes(4);
    const auto version = r.u16();
    const auto kind = r.u16();
    if (!r.ok() && bytes.size() >= 4 && magic == std::string_view(kMagic, 4))
        throw DatasetIoError(IoErrorKind::Truncated, "dataset: truncated header");
    if (magic != std::string_view(kMagic, 4)) throw DatasetIoError(IoErrorKind::MalformedHeader, "dataset: bad magic");
    if (version != kVersion) throw DatasetIoError(IoErrorKind::MalformedHeader, "dataset: unsupported version");
    const auto n = r.u64();
    const auto in_dim = r.u32();
    const auto tgt_dim = r.u32();
    const auto theta_dim = r.u32();
    if (!r.ok()) throw DatasetIoError(IoErrorKind::Truncated, "dataset: truncated header");

    const bool labels = task.target == TargetKind::ModelClass && !ds.manifest.library;
    const std::size_t expected_tgt = ds.manifest.library ? task.input_dim() : (labels ? 1 : task.target_dim());
    if (kind != static_cast<std::uint16_t>(task.target) || n != ds.manifest.n || in_dim != task.input_dim() ||
        tgt_dim != expected_tgt)
        throw DatasetIoError(IoErrorKind::ShapeMismatch, "dataset: header disagrees with manifest");

    const std::size_t row = std::size_t{in_dim} + tgt_dim + theta_dim;
    const std::size_t expected = 2 * n + 8 * row * n;
    if (r.remaining() < expected) throw DatasetIoError(IoErrorKind::Truncated, "dataset: truncated payload");
    if (r.remaining() > expected) throw DatasetIoError(IoErrorKind::ShapeMismatch, "dataset: trailing bytes");

    std::vector<ModelTag> tags(n);
    for (auto& t : tags) {
        const auto v = r.u8();
        if (v > 2) throw DatasetIoError(IoErrorKind::MalformedHeader, "dataset: invalid model tag");
        t = static_cast<ModelTag>(v);
    }
    std::vector<std::size_t> theta_len(n);
    for (std::size_t i = 0; i < n; ++i) {
        theta_len[i] = r.u8();
        if (theta_len[i] != theta_dim_for(task, tags[i]) || theta_len[i] > theta_dim)
            throw DatasetIoError(IoErrorKind::ShapeMismatch, "dataset: theta length disagrees with model tag");
    }

    ds.examples.resize(n);
    const auto full_schema = task.target == TargetKind::NextState ? empty_schema() : task.prior.schema_ptr();
    const auto sir_schema = labels ? task.prior.leading(2).schema_ptr() : full_schema;
    for (std::size_t i = 0; i < n; ++i) {
        auto& ex = ds.examples[i];
        ex.model_tag = tags[i];
        ex.input.resize(in_dim);
        for (auto& v : ex.input) v = r.f64();
        if (labels) {
            const double label = r.f64();
            if (label != 0.0 && label != 1.0) throw DatasetIoError(IoErrorKind::MalformedHeader, "dataset: invalid class label");
            ex.target = label == 0.0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
        } else {
            ex.target.resize(tgt_dim);
            for (auto& v : ex.target) v = r.f64();
        }
        std::vector<double> theta(theta_dim);
        for (auto& v : theta) v = r.f64();
        theta.resize(theta_len[i]);
        try {
            ex.theta = ParamVector(labels && tags[i] == ModelTag::SIR ? sir_schema : full_schema, std::move(theta));
        } catch (const ValidationError& e) {
            throw DatasetIoError(IoErrorKind::ShapeMismatch, std::string("dataset: ") + e.what());
        }
    }
    return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path)
{
    const bool labels = ds.manifest.task.target == TargetKind::ModelClass;
    std::string out;
    for (std::size_t k = 0; k < ds.input_dim(); ++k) out += "x" + std::to_string(k) + ",";
    if (labels) {
        out += "label,";
    } else {
        for (std::size_t k = 0; k < ds.target_dim(); ++k) out += "y" + std::to_string(k) + ",";
    }
    const auto& names = ds.manifest.task.prior.schema().names;
    if (ds.manifest.task.target != TargetKind::NextState)
        for (const auto& name : names) out += "theta_" + name + ",";
    out += "model\n";
    for (const auto& ex : ds.examples) {
        for (double v : ex.input) out += format_double(v) + ",";
        if (labels) {
            out += ex.target.at(1) > ex.target.at(0) ? "1," : "0,";
        } else {
            for (double v : ex.target) out += format_double(v) + ",";
        }
        if (ds.manifest.task.target != TargetKind::NextState)
            for (std::size_t k = 0; k < names.size(); ++k) out += (k < ex.theta.size() ? format_double(ex.theta[k]) : "") + ",";
        out += simcore::to_string(ex.model_tag);
        out += "\n";
    }
    write_file_atomic(path, out);
}

}  // namespace sgnn::datagen
