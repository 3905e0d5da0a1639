#include "sgnn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sgnn::bounds {

RiskEstimate summarize_losses(std::span<const double> losses)
{
    require(!losses.empty(), "estimate_risk: empty dataset");
    RiskEstimate r;
    r.n = losses.size();
    double sum = 0.0;
    for (double v : losses) sum += v;
    r.mean = sum / static_cast<double>(r.n);
    if (r.n > 1) {
        double ss = 0.0;
        for (double v : losses) ss += (v - r.mean) * (v - r.mean);
        r.stderr_ = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
    }
    return r;
}

RiskEstimate estimate_risk(const Predictor& f, const Matrix& inputs, const Matrix& targets, const nnet::LossSpec& loss)
{
    require(inputs.rows >= 1, "estimate_risk: empty dataset");
    require(inputs.rows == targets.rows, "estimate_risk: inputs/targets row mismatch");
    std::vector<double> losses(inputs.rows);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        const auto pred = f(inputs.row(i));
        require(pred.size() == targets.cols, "estimate_risk: prediction width does not match target width");
        losses[i] = nnet::loss_value(loss, pred, targets.row(i));
    }
    return summarize_losses(losses);
}

RiskEstimate estimate_risk(const Predictor& f, const datagen::Dataset& ds, const nnet::LossSpec& loss)
{
    require(ds.size() >= 1, "estimate_risk: empty dataset");
    return estimate_risk(f, ds.inputs(), ds.targets(), loss);
}

double tv_worst_case(double delta, std::size_t d, double sigma)
{
    require(sigma > 0.0, "tv_worst_case: sigma must be > 0");
    require(delta >= 0.0, "tv_worst_case: delta must be >= 0");
    return std::min(1.0, delta * std::sqrt(static_cast<double>(d)) / sigma);
}

double tv_empirical(const Matrix& a0, const Matrix& a_star, const Matrix& inputs, double sigma)
{
    require(sigma > 0.0, "tv_empirical: sigma must be > 0");
    require(inputs.rows >= 1, "tv_empirical: inputs must be nonempty");
    require(a0.rows == a_star.rows && a0.cols == a_star.cols && a0.cols == inputs.cols,
            "tv_empirical: matrix/input shape mismatch");
    double total = 0.0;
    for (std::size_t n = 0; n < inputs.rows; ++n) {
        double sq = 0.0;
        for (std::size_t i = 0; i < a0.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a0.cols; ++j) s += (a_star(i, j) - a0(i, j)) * inputs(n, j);
            sq += s * s;
        }
        total += std::sqrt(sq);
    }
    return std::min(1.0, total / static_cast<double>(inputs.rows) / (2.0 * sigma));
}

double rademacher_finite(const Matrix& values, std::size_t trials, RngStream& rng)
{
    require(values.rows >= 1 && values.cols >= 1, "rademacher_finite: need n >= 1 and K >= 1");
    require(trials >= 1, "rademacher_finite: trials must be >= 1");
    const std::size_t n = values.rows, k = values.cols;
    std::vector<double> sums(k);
    double acc = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 64 == 0) bits = rng.next_u64();
            const double s = (bits >> (i % 64)) & 1U ? 1.0 : -1.0;
            for (std::size_t c = 0; c < k; ++c) sums[c] += s * values(i, c);
        }
        acc += *std::max_element(sums.begin(), sums.end()) / static_cast<double>(n);
    }
    return acc / static_cast<double>(trials);
}

double excess_risk_bound(double rademacher, double lipschitz_l, double bound_b, std::size_t n, double delta)
{
    require(rademacher >= 0.0 && lipschitz_l > 0.0 && bound_b > 0.0, "excess_risk_bound: arguments must be positive");
    require(n >= 1, "excess_risk_bound: n must be >= 1");
    require(delta > 0.0 && delta < 1.0, "excess_risk_bound: delta must be in (0, 1)");
    return 4.0 * lipschitz_l * rademacher +
           6.0 * bound_b * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

double mismatch_bound(double syn_excess, double l_max, double tv)
{
    require(syn_excess >= 0.0 && l_max >= 0.0 && tv >= 0.0, "mismatch_bound: inputs must be >= 0");
    return syn_excess + 2.0 * l_max * tv;
}

void SweepConfig::validate() const
{
    require(d >= 1, "mismatch_sweep: d must be >= 1");
    require(sigma > 0.0, "mismatch_sweep: sigma must be > 0");
    require(!deltas.empty(), "mismatch_sweep: need at least one delta");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        require(deltas[i] >= 0.0, "mismatch_sweep: deltas must be >= 0");
        if (i > 0) require(deltas[i] >= deltas[i - 1], "mismatch_sweep: deltas must be sorted");
    }
    require(steps >= 1, "mismatch_sweep: steps must be >= 1");
    require(n_train >= 1 && n_test >= 2, "mismatch_sweep: n_train >= 1 and n_test >= 2 required");
    require(!seeds.empty(), "mismatch_sweep: need at least one seed");
    require(!hidden.empty(), "mismatch_sweep: need at least one hidden layer");
    require(l_max_quantile > 0.0 && l_max_quantile <= 1.0, "mismatch_sweep: l_max_quantile must be in (0, 1]");
    if (a0.rows != 0) require(a0.rows == d && a0.cols == d, "mismatch_sweep: a0 must be d x d");
    train.validate();
}

Matrix SweepConfig::resolved_a0() const
{
    if (a0.rows != 0) return a0;
    Matrix a(d, d);
    for (std::size_t i = 0; i < d; ++i) a(i, i) = 0.9 - 0.1 * static_cast<double>(i);
    return a;
}

namespace {

std::vector<double> network_losses(const nnet::Network& net, const Matrix& x, const Matrix& y)
{
    nnet::BatchPass pass;
    pass.forward(net, x);
    const nnet::LossSpec mse{nnet::LossKind::MSE};
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = nnet::loss_value(mse, pass.output().row(i), y.row(i));
    return out;
}

double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_norm(const Matrix& x)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        double sq = 0.0;
        for (double v : x.row(i)) sq += v * v;
        s += std::sqrt(sq);
    }
    return s / static_cast<double>(x.rows);
}

}  // namespace

std::vector<MismatchRow> mismatch_sweep(const SweepConfig& cfg, Exec exec)
{
    cfg.validate();
    const Matrix a0 = cfg.resolved_a0();
    const double bayes = static_cast<double>(cfg.d) * cfg.sigma * cfg.sigma;
    std::vector<MismatchRow> rows;

    for (std::uint64_t seed : cfg.seeds) {
        auto syn_task = datagen::next_state_task(a0, cfg.sigma, cfg.steps);
        const auto train_ds = datagen::generate_dataset(syn_task, cfg.n_train, derive_seed(seed, 1), exec);
        const std::uint64_t test_seed = derive_seed(seed, 2);
        const auto syn_test = datagen::generate_dataset(syn_task, cfg.n_test, test_seed, exec);
        const Matrix x_syn = syn_test.inputs(), y_syn = syn_test.targets();

        nnet::NetworkSpec spec;
        spec.widths.push_back(cfg.d);
        spec.widths.insert(spec.widths.end(), cfg.hidden.begin(), cfg.hidden.end());
        spec.widths.push_back(cfg.d);
        spec.activation = cfg.activation;
        auto net = nnet::Network::initialized(spec, derive_seed(seed, 3));
        const Matrix x_train = train_ds.inputs();
        auto [mean, scale] = nnet::column_moments(x_train);
        net.set_input_normalization(std::move(mean), std::move(scale));
        nnet::TrainConfig tc = cfg.train;
        tc.seed = derive_seed(seed, 4);
        tc.on_epoch_end = nullptr;
        tc.aux.reset();
        net = nnet::train(std::move(net), x_train, train_ds.targets(), tc, nnet::LossSpec{}).network;

        const auto syn_losses = network_losses(net, x_syn, y_syn);
        const auto syn = summarize_losses(syn_losses);
        const double l_max = quantile(syn_losses, cfg.l_max_quantile);
        const double syn_excess = syn.mean - bayes;
        const double norm = mean_norm(x_syn);
        const std::uint64_t u_seed = derive_seed(seed, 5);

        std::vector<MismatchRow> seed_rows(cfg.deltas.size());
        auto eval = [&](std::size_t k) {
            const double delta = cfg.deltas[k];
            auto real_task = syn_task;
            real_task.mismatch = datagen::Mismatch{delta, u_seed};
            // Same sample seed as the synthetic test set: at delta = 0 the data coincide exactly.
            const auto real_test = datagen::generate_dataset(real_task, cfg.n_test, test_seed, Exec::Serial);
            const auto real = summarize_losses(network_losses(net, real_test.inputs(), real_test.targets()));
            const Matrix a_star = datagen::perturb_lds_matrix(a0, delta, u_seed);

            MismatchRow& r = seed_rows[k];
            r.seed = seed;
            r.delta = delta;
            r.real_loss = real.mean;
            r.real_loss_se = real.stderr_;
            r.syn_loss = syn.mean;
            r.bayes_risk = bayes;
            r.real_excess = real.mean - bayes;
            r.syn_excess = syn_excess;
            r.tv_worst = tv_worst_case(delta, cfg.d, cfg.sigma);
            r.tv_empirical = tv_empirical(a0, a_star, x_syn, cfg.sigma);
            r.l_max = l_max;
            // A slightly negative measured synthetic excess is sampling noise; the bound takes it as 0.
            r.bound_worst = mismatch_bound(std::max(0.0, syn_excess), l_max, r.tv_worst);
            r.bound_empirical = mismatch_bound(std::max(0.0, syn_excess), l_max, r.tv_empirical);
            r.mean_input_norm = norm;
        };
        const auto nd = static_cast<std::int64_t>(cfg.deltas.size());
        if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t k = 0; k < nd; ++k) eval(static_cast<std::size_t>(k));
        } else {
            for (std::int64_t k = 0; k < nd; ++k) eval(static_cast<std::size_t>(k));
        }
        rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
    }
    return rows;
}

std::vector<MismatchRow> aggregate_medians(const std::vector<MismatchRow>& rows)
{
    std::vector<double> order;
    std::map<double, std::vector<const MismatchRow*>> groups;
    for (const auto& r : rows) {
        if (!groups.count(r.delta)) order.push_back(r.delta);
        groups[r.delta].push_back(&r);
    }
    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::vector<MismatchRow> out;
    for (double delta : order) {
        const auto& g = groups[delta];
        auto col = [&](double MismatchRow::*field) {
            std::vector<double> v;
            for (const auto* r : g) v.push_back(r->*field);
            return med(v);
        };
        MismatchRow m;
        m.seed = g.size();
        m.delta = delta;
        for (auto field : {&MismatchRow::real_loss, &MismatchRow::real_loss_se, &MismatchRow::syn_loss,
                           &MismatchRow::bayes_risk, &MismatchRow::real_excess, &MismatchRow::syn_excess,
                           &MismatchRow::tv_worst, &MismatchRow::tv_empirical, &MismatchRow::l_max,
                           &MismatchRow::bound_worst, &MismatchRow::bound_empirical, &MismatchRow::mean_input_norm})
            m.*field = col(field);
        out.push_back(m);
    }
    return out;
}

}  // namespace sgnn::bounds
