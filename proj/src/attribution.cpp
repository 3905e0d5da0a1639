#include "sgnn/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgnn/datagen.hpp"

namespace sgnn::attribution {

AttributionDistribution attribution_weights(std::span<const double> query_embedding, const Matrix& lib_embeddings,
                                            std::span<const std::size_t> atoms, double h_sq)
{
    require(h_sq > 0.0 && std::isfinite(h_sq), "attribution_weights: h_sq must be > 0");
    require(query_embedding.size() == lib_embeddings.cols, "attribution_weights: embedding width mismatch");
    require(!atoms.empty(), "attribution_weights: no atoms");
    std::vector<double> logw(atoms.size());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        require(atoms[k] < lib_embeddings.rows, "attribution_weights: atom index out of range");
        logw[k] = -squared_distance(query_embedding, lib_embeddings.row(atoms[k])) / h_sq;
    }
    return oracle::normalize_log_weights(logw, std::vector<std::size_t>(atoms.begin(), atoms.end()));
}

AttributionDistribution attribution_weights(std::span<const double> query_embedding, const Matrix& lib_embeddings,
                                            double h_sq)
{
    std::vector<std::size_t> all(lib_embeddings.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return attribution_weights(query_embedding, lib_embeddings, all, h_sq);
}

double attribution_moment(const AttributionDistribution& dist, const ReferenceLibrary& lib,
                          const std::function<double(std::span<const double>)>& target_fn, unsigned k)
{
    require(k >= 1, "attribution_moment: k must be >= 1");
    require(dist.indices.size() == dist.weights.size(), "attribution_moment: malformed distribution");
    double s = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        require(dist.indices[i] < lib.size(), "attribution_moment: atom index out of range");
        s += dist.weights[i] * std::pow(target_fn(lib.thetas.row(dist.indices[i])), static_cast<double>(k));
    }
    return s;
}

double attribution_moment(const AttributionDistribution& dist, const ReferenceLibrary& lib, std::size_t component,
                          unsigned k)
{
    require(component < lib.thetas.cols, "attribution_moment: component out of range");
    return attribution_moment(dist, lib, [component](std::span<const double> t) { return t[component]; }, k);
}

double kl_alignment_loss(const AttributionDistribution& target, const AttributionDistribution& attr, KlDiagnostics* diag)
{
    require(target.indices == attr.indices && target.size() == attr.size(),
            "kl_alignment_loss: distributions must share the atom index set");
    double kl = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = target.weights[i];
        if (p <= 0.0) continue;
        double q = attr.weights[i];
        if (q < kKlFloor) {
            q = kKlFloor;
            if (diag) ++diag->floored;
        }
        kl += p * std::log(p / q);
    }
    return std::max(0.0, kl);
}

Matrix embed(const nnet::Network& net, const Matrix& inputs)
{
    nnet::BatchPass pass;
    pass.forward(net, inputs);
    return pass.embedding();
}

KlAlignment::KlAlignment(std::shared_ptr<const ReferenceLibrary> lib, double obs_sigma, double h_sq,
                         std::size_t atoms_per_batch, KlDirection direction, std::uint64_t seed)
    : lib_(std::move(lib)),
      obs_sigma_(obs_sigma),
      fixed_h_sq_(h_sq),
      h_sq_(h_sq),
      atoms_per_batch_(atoms_per_batch),
      direction_(direction),
      seed_(seed)
{
    require(lib_ && lib_->size() >= 2, "KlAlignment: library needs at least 2 atoms");
    require(obs_sigma_ > 0.0, "KlAlignment: obs_sigma must be > 0");
    require(atoms_per_batch_ >= 2, "KlAlignment: need at least 2 atoms per batch");
}

void KlAlignment::on_epoch_start(const nnet::Network& net, std::size_t epoch)
{
    if (fixed_h_sq_ > 0.0) return;
    const Matrix emb = embed(net, lib_->observations);
    h_sq_ = oracle::median_sq_bandwidth(emb, derive_seed(seed_, epoch));
}

double KlAlignment::accumulate(const nnet::Network& net, const Matrix& batch_inputs, const Matrix& batch_embeddings,
                               double grad_scale, Matrix& d_embedding, nnet::Gradients& grads, RngStream& rng)
{
    const std::size_t m = lib_->size();
    const std::size_t s = std::min(atoms_per_batch_, m);
    std::vector<std::size_t> atoms(m);
    std::iota(atoms.begin(), atoms.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) std::swap(atoms[i], atoms[i + rng.below(m - i)]);
    atoms.resize(s);

    Matrix atom_inputs(s, lib_->observations.cols);
    for (std::size_t i = 0; i < s; ++i)
        std::copy_n(lib_->observations.row(atoms[i]).begin(), atom_inputs.cols, atom_inputs.row(i).begin());
    nnet::BatchPass atom_pass;
    atom_pass.forward(net, atom_inputs);
    const Matrix& a = atom_pass.embedding();
    const std::size_t e = a.cols;
    Matrix d_atoms(s, e);

    const double inv_h = 1.0 / h_sq_;
    std::vector<double> logw(s), w(s), g(s), logp(s);
    double total = 0.0;
    for (std::size_t b = 0; b < batch_inputs.rows; ++b) {
        const auto target = oracle::discrete_posterior(batch_inputs.row(b), *lib_, atoms, obs_sigma_);
        const auto eb = batch_embeddings.row(b);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s; ++i) {
            logw[i] = -squared_distance(eb, a.row(i)) * inv_h;
            mx = std::max(mx, logw[i]);
        }
        double z = 0.0;
        for (std::size_t i = 0; i < s; ++i) z += (w[i] = std::exp(logw[i] - mx));
        const double log_z = mx + std::log(z);
        for (std::size_t i = 0; i < s; ++i) w[i] /= z;

        // g_i = d loss / d distance_i.
        if (direction_ == KlDirection::TargetFirst) {
            for (std::size_t i = 0; i < s; ++i) {
                const double p = target.weights[i];
                if (p > 0.0) total += p * (std::log(p) - std::max(logw[i] - log_z, std::log(kKlFloor)));
                g[i] = (p - w[i]) * inv_h;
            }
        } else {
            double kl = 0.0;
            for (std::size_t i = 0; i < s; ++i) {
                logp[i] = std::log(std::max(target.weights[i], kKlFloor));
                kl += w[i] * (logw[i] - log_z - logp[i]);
            }
            total += kl;
            for (std::size_t i = 0; i < s; ++i) g[i] = -w[i] * inv_h * ((logw[i] - log_z - logp[i]) - kl);
        }

        auto db = d_embedding.row(b);
        for (std::size_t i = 0; i < s; ++i) {
            const double gi = grad_scale * g[i];
            if (gi == 0.0) continue;
            auto ai = a.row(i);
            auto dai = d_atoms.row(i);
            for (std::size_t c = 0; c < e; ++c) {
                const double diff = 2.0 * gi * (eb[c] - ai[c]);
                db[c] += diff;
                dai[c] -= diff;
            }
        }
    }
    const Matrix zero_out(s, net.output_dim());
    atom_pass.backward(net, zero_out, &d_atoms, grads);
    return total;
}

void AttributionConfig::validate() const
{
    require(library_size >= 2, "attribution: library size M must be >= 2");
    require(n_train >= 1 && n_eval >= 1, "attribution: n_train and n_eval must be >= 1");
    require(n_atom_queries >= 1 && n_atom_queries <= library_size,
            "attribution: n_atom_queries must be in [1, library size]");
    require(noise_sigma > 0.0, "attribution: noise_sigma must be > 0");
    require(obs_sigma >= 0.0, "attribution: obs_sigma must be >= 0");
    require(lambda >= 0.0, "attribution: lambda must be >= 0");
    require(std::isfinite(h_sq), "attribution: h_sq must be finite");
    require(atoms_per_batch >= 2, "attribution: atoms_per_batch must be >= 2");
    require(!hidden.empty(), "attribution: need at least one hidden layer");
    train.validate();
}

namespace {

double theta_mse(const Matrix& est, const Matrix& truth)
{
    double s = 0.0;
    for (std::size_t i = 0; i < est.data.size(); ++i) s += (est.data[i] - truth.data[i]) * (est.data[i] - truth.data[i]);
    return s / static_cast<double>(est.rows);
}

}  // namespace

AttributionReport run_attribution_experiment(const AttributionConfig& cfg)
{
    cfg.validate();
    const double obs_sigma = cfg.resolved_obs_sigma();
    const auto task = datagen::sir_forecast_task(cfg.noise_sigma);
    const std::size_t p = task.prior.size();

    auto lib = std::make_shared<ReferenceLibrary>(oracle::build_library(task, cfg.library_size, derive_seed(cfg.seed, 1)));
    const auto train_ds = datagen::generate_dataset(task, cfg.n_train, derive_seed(cfg.seed, 2));
    const auto eval_ds = datagen::generate_dataset(task, cfg.n_eval, derive_seed(cfg.seed, 3));
    const Matrix x_eval = eval_ds.inputs();
    Matrix theta_eval(cfg.n_eval, p);
    for (std::size_t i = 0; i < cfg.n_eval; ++i)
        std::copy_n(eval_ds.examples[i].theta.values().begin(), p, theta_eval.row(i).begin());

    // Noiseless-atom queries: distinct atoms chosen without replacement.
    std::vector<std::size_t> atom_queries(cfg.library_size);
    std::iota(atom_queries.begin(), atom_queries.end(), std::size_t{0});
    {
        RngStream rng(derive_seed(cfg.seed, 4), stream_id(StreamPurpose::Subsample, 0));
        for (std::size_t i = 0; i < cfg.n_atom_queries; ++i)
            std::swap(atom_queries[i], atom_queries[i + rng.below(cfg.library_size - i)]);
        atom_queries.resize(cfg.n_atom_queries);
    }
    Matrix x_atoms(cfg.n_atom_queries, lib->observations.cols);
    for (std::size_t q = 0; q < cfg.n_atom_queries; ++q)
        std::copy_n(lib->observations.row(atom_queries[q]).begin(), x_atoms.cols, x_atoms.row(q).begin());

    // Targets do not depend on the network: compute once.
    std::vector<AttributionDistribution> eval_post(cfg.n_eval), atom_post(cfg.n_atom_queries);
    const auto n_eval = static_cast<std::int64_t>(cfg.n_eval);
    const auto n_atomq = static_cast<std::int64_t>(cfg.n_atom_queries);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n_eval; ++i)
        eval_post[static_cast<std::size_t>(i)] = oracle::discrete_posterior(x_eval.row(static_cast<std::size_t>(i)), *lib, obs_sigma);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n_atomq; ++i)
        atom_post[static_cast<std::size_t>(i)] = oracle::discrete_posterior(x_atoms.row(static_cast<std::size_t>(i)), *lib, obs_sigma);

    nnet::NetworkSpec spec;
    spec.widths.push_back(task.input_dim());
    spec.widths.insert(spec.widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    spec.widths.push_back(task.target_dim());
    spec.activation = cfg.activation;
    auto net = nnet::Network::initialized(spec, derive_seed(cfg.seed, 5));
    const Matrix x_train = train_ds.inputs();
    auto [mean, scale] = nnet::column_moments(x_train);
    net.set_input_normalization(std::move(mean), std::move(scale));

    auto hook = std::make_shared<KlAlignment>(lib, obs_sigma, cfg.h_sq, cfg.atoms_per_batch, cfg.direction,
                                              derive_seed(cfg.seed, 6));
    AttributionReport report;
    std::vector<AttributionDistribution> atom_attr(cfg.n_atom_queries);
    std::vector<AttributionDistribution> first_epoch_attr;

    auto attribute_all = [&](const nnet::Network& n, const Matrix& queries, const Matrix& lib_emb,
                             std::vector<AttributionDistribution>& out) {
        const Matrix q_emb = embed(n, queries);
        out.resize(queries.rows);
        const auto count = static_cast<std::int64_t>(queries.rows);
        const double h = hook->current_h_sq();
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] = attribution_weights(q_emb.row(static_cast<std::size_t>(i)), lib_emb, h);
    };

    std::vector<AttributionDistribution> eval_attr;
    nnet::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 7);
    tc.aux = hook;
    tc.aux_weight = cfg.lambda;
    tc.on_epoch_end = [&](std::size_t epoch, const nnet::Network& n) {
        const Matrix lib_emb = embed(n, lib->observations);
        attribute_all(n, x_eval, lib_emb, eval_attr);
        double sum = 0.0;
        KlDiagnostics diag;
        for (std::size_t i = 0; i < cfg.n_eval; ++i) sum += kl_alignment_loss(eval_post[i], eval_attr[i], &diag);
        report.mean_kl.push_back(sum / static_cast<double>(cfg.n_eval));
        report.h_sq.push_back(hook->current_h_sq());
        report.floored_terms = diag.floored;
        attribute_all(n, x_atoms, lib_emb, atom_attr);
        if (epoch == 1) first_epoch_attr = atom_attr;
    };
    nnet::train(std::move(net), x_train, train_ds.targets(), tc, nnet::LossSpec{});

    for (std::size_t q = 0; q < cfg.n_atom_queries; ++q) {
        for (std::size_t c = 0; c < p; ++c) {
            for (unsigned k = 1; k <= 2; ++k) {
                MomentRow r;
                r.query = q;
                r.atom = atom_queries[q];
                r.component = c;
                r.k = k;
                r.attribution = attribution_moment(atom_attr[q], *lib, c, k);
                r.posterior = attribution_moment(atom_post[q], *lib, c, k);
                r.attribution_first_epoch = attribution_moment(first_epoch_attr[q], *lib, c, k);
                report.moments.push_back(r);
            }
        }
        if (atom_attr[q].fallback) ++report.fallbacks;
    }
    report.query_distributions = atom_attr;

    Matrix est_attr(cfg.n_eval, p), est_post(cfg.n_eval, p), est_prior(cfg.n_eval, p);
    const auto prior_mean = task.prior.mean();
    for (std::size_t i = 0; i < cfg.n_eval; ++i) {
        for (std::size_t c = 0; c < p; ++c) {
            est_attr(i, c) = attribution_moment(eval_attr[i], *lib, c, 1);
            est_post(i, c) = attribution_moment(eval_post[i], *lib, c, 1);
            est_prior(i, c) = prior_mean[c];
        }
        if (eval_attr[i].fallback) ++report.fallbacks;
    }
    report.attribution_theta_mse = theta_mse(est_attr, theta_eval);
    report.posterior_theta_mse = theta_mse(est_post, theta_eval);
    report.prior_mean_theta_mse = theta_mse(est_prior, theta_eval);
    return report;
}

}  // namespace sgnn::attribution
