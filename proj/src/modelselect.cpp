#include "sgnn/modelselect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgnn/datagen.hpp"
#include "sgnn/rng.hpp"

namespace sgnn::modelselect {

namespace {

constexpr std::size_t kMaxParams = 3;
constexpr double kRssFloor = 1e-300;

struct Box {
    std::vector<double> lo, hi;
    std::shared_ptr<const simcore::ParamSchema> schema;
};

Box fit_box(ModelTag tag, const FitConfig& cfg)
{
    simcore::PriorSpec prior = cfg.box ? *cfg.box : simcore::epidemic_prior(ModelTag::SEIR);
    if (tag == ModelTag::SIR) prior = prior.leading(2);
    require(prior.size() == simcore::param_count(tag), "fit_least_squares: fit box has the wrong dimension");
    Box b;
    b.schema = prior.schema_ptr();
    for (const auto& iv : prior.schema().bounds) {
        b.lo.push_back(iv.lo);
        b.hi.push_back(iv.hi);
    }
    return b;
}

class Objective {
public:
    Objective(ModelTag tag, std::span<const double> observed, const simcore::CompartmentalInit& init)
        : tag_(tag), observed_(observed), init_(init), sim_(observed.size()) {}

    /// Returns +inf on simulator blowup.
    double rss(std::span<const double> theta)
    {
        if (!simcore::simulate_infected(tag_, theta, init_, sim_)) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (std::size_t t = 0; t < observed_.size(); ++t) {
            const double r = observed_[t] - sim_[t];
            s += r * r;
        }
        return s;
    }

    /// Residuals r = observed - simulated and the Jacobian of the simulated
    /// series (T x p, central differences). Returns false on blowup.
    bool linearize(std::span<const double> theta, const Box& box, std::vector<double>& r, Matrix& jac)
    {
        const std::size_t n = observed_.size(), p = theta.size();
        if (!simcore::simulate_infected(tag_, theta, init_, sim_)) return false;
        r.resize(n);
        for (std::size_t t = 0; t < n; ++t) r[t] = observed_[t] - sim_[t];
        jac = Matrix(n, p);
        std::vector<double> tp(theta.begin(), theta.end()), plus(n), minus(n);
        for (std::size_t j = 0; j < p; ++j) {
            const double h = 1e-6 * (box.hi[j] - box.lo[j]);
            tp[j] = theta[j] + h;
            if (!simcore::simulate_infected(tag_, tp, init_, plus)) return false;
            tp[j] = theta[j] - h;
            if (!simcore::simulate_infected(tag_, tp, init_, minus)) return false;
            tp[j] = theta[j];
            for (std::size_t t = 0; t < n; ++t) jac(t, j) = (plus[t] - minus[t]) / (2.0 * h);
        }
        return true;
    }

private:
    ModelTag tag_;
    std::span<const double> observed_;
    simcore::CompartmentalInit init_;
    std::vector<double> sim_;
};

// Solve the p x p system a x = b by Gaussian elimination with partial
// pivoting. Returns false if singular.
bool solve_small(std::array<std::array<double, kMaxParams>, kMaxParams> a, std::array<double, kMaxParams> b,
                 std::size_t p, std::array<double, kMaxParams>& x)
{
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (!(std::abs(a[piv][c]) > 0.0)) return false;
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (std::size_t r = c + 1; r < p; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < p; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    for (std::size_t c = p; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < p; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return true;
}

// Solve the Gauss-Newton system with the `fixed` coordinates pinned to a
// zero step. A tiny ridge keeps flat directions solvable.
bool solve_reduced(const std::array<std::array<double, kMaxParams>, kMaxParams>& jtj,
                   const std::array<double, kMaxParams>& jtr, std::size_t p, const std::array<bool, kMaxParams>& fixed,
                   std::array<double, kMaxParams>& step)
{
    std::array<std::size_t, kMaxParams> free_idx{};
    std::size_t q = 0;
    for (std::size_t a = 0; a < p; ++a)
        if (!fixed[a]) free_idx[q++] = a;
    step.fill(0.0);
    if (q == 0) return false;
    std::array<std::array<double, kMaxParams>, kMaxParams> a{};
    std::array<double, kMaxParams> b{}, x{};
    double max_diag = 0.0;
    for (std::size_t i = 0; i < q; ++i) max_diag = std::max(max_diag, jtj[free_idx[i]][free_idx[i]]);
    for (std::size_t i = 0; i < q; ++i) {
        b[i] = jtr[free_idx[i]];
        for (std::size_t j = 0; j < q; ++j) a[i][j] = jtj[free_idx[i]][free_idx[j]];
        a[i][i] += 1e-14 * max_diag + 1e-300;
    }
    if (!solve_small(a, b, q, x)) return false;
    for (std::size_t i = 0; i < q; ++i) step[free_idx[i]] = x[i];
    return true;
}

struct LocalFit {
    std::vector<double> theta;
    double rss = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iterations = 0;
};

LocalFit gauss_newton(Objective& obj, std::vector<double> theta, const Box& box, const FitConfig& cfg)
{
    const std::size_t p = theta.size();
    LocalFit fit;
    double rss = obj.rss(theta);
    if (!std::isfinite(rss)) return fit;

    std::vector<double> r, trial(p);
    Matrix jac;
    std::size_t it = 0;
    bool converged = false;
    for (; it < cfg.max_outer && !converged; ++it) {
        if (rss == 0.0) {
            converged = true;
            break;
        }
        if (!obj.linearize(theta, box, r, jac)) break;
        std::array<std::array<double, kMaxParams>, kMaxParams> jtj{};
        std::array<double, kMaxParams> jtr{}, step{};
        for (std::size_t t = 0; t < jac.rows; ++t) {
            for (std::size_t a = 0; a < p; ++a) {
                jtr[a] += jac(t, a) * r[t];
                for (std::size_t b = 0; b < p; ++b) jtj[a][b] += jac(t, a) * jac(t, b);
            }
        }
        // Parameters sitting on a bound whose step points outward are held
        // fixed and the system is re-solved over the rest.
        std::array<bool, kMaxParams> active{};
        bool solved = false;
        for (std::size_t pass = 0; pass <= p && !solved; ++pass) {
            if (!solve_reduced(jtj, jtr, p, active, step)) break;
            solved = true;
            for (std::size_t a = 0; a < p; ++a) {
                if (active[a]) continue;
                const bool out_lo = theta[a] <= box.lo[a] && step[a] < 0.0;
                const bool out_hi = theta[a] >= box.hi[a] && step[a] > 0.0;
                if (out_lo || out_hi) {
                    active[a] = true;
                    solved = false;
                }
            }
        }
        if (!solved) {
            // Every coordinate pinned outward: a corner stationary point.
            converged = std::all_of(active.begin(), active.begin() + static_cast<long>(p), [](bool b) { return b; });
            break;
        }

        double alpha = 1.0;
        bool improved = false;
        double new_rss = rss;
        for (std::size_t h = 0; h <= cfg.max_halvings; ++h, alpha *= 0.5) {
            for (std::size_t a = 0; a < p; ++a) trial[a] = std::clamp(theta[a] + alpha * step[a], box.lo[a], box.hi[a]);
            new_rss = obj.rss(trial);
            if (new_rss < rss) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            converged = true;  // no descent along the Gauss-Newton direction
            break;
        }
        const double rel = (rss - new_rss) / rss;
        theta = trial;
        rss = new_rss;
        if (rel < cfg.rel_tol) converged = true;
    }
    fit.theta = std::move(theta);
    fit.rss = rss;
    fit.converged = converged;
    fit.iterations = it;
    return fit;
}

bool degenerate_series(std::span<const double> y)
{
    const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    return *mx - *mn <= 1e-14 * std::max(1.0, std::abs(*mx));
}

}  // namespace

FitResult fit_least_squares(ModelTag tag, std::span<const double> observed, const FitConfig& cfg)
{
    require(tag == ModelTag::SIR || tag == ModelTag::SEIR, "fit_least_squares: model must be SIR or SEIR");
    require(observed.size() >= 10, "fit_least_squares: need at least 10 observations");
    require(cfg.multistart >= 1, "fit_least_squares: multistart must be >= 1");
    require(cfg.max_outer >= 1, "fit_least_squares: max_outer must be >= 1");
    for (double v : observed) require(std::isfinite(v), "fit_least_squares: observations must be finite");

    const Box box = fit_box(tag, cfg);
    const std::size_t p = box.lo.size();
    const std::size_t k = cfg.multistart;

    // Latin hypercube: one point per stratum in every dimension.
    RngStream rng(cfg.seed, stream_id(StreamPurpose::Multistart, static_cast<std::uint64_t>(tag)));
    std::vector<std::vector<double>> starts(k, std::vector<double>(p));
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<std::size_t> strata(k);
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        for (std::size_t i = k - 1; i > 0; --i) std::swap(strata[i], strata[rng.below(i + 1)]);
        for (std::size_t i = 0; i < k; ++i) {
            const double u = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(k);
            starts[i][j] = box.lo[j] + u * (box.hi[j] - box.lo[j]);
        }
    }

    Objective obj(tag, observed, cfg.init);
    FitResult best;
    LocalFit best_local;
    std::size_t total_iters = 0;
    for (const auto& s : starts) {
        LocalFit lf = gauss_newton(obj, s, box, cfg);
        total_iters += lf.iterations;
        if (!std::isfinite(lf.rss)) {
            ++best.discarded;
        } else if (lf.rss < best_local.rss) {
            best_local = std::move(lf);
        }
        best.best_rss_trace.push_back(best_local.rss);
    }
    if (!std::isfinite(best_local.rss))
        throw NumericalError(std::string("fit_least_squares: every start failed for ") + simcore::to_string(tag));

    best.params = simcore::ParamVector(box.schema, best_local.theta);
    best.rss = best_local.rss;
    best.converged = best_local.converged && !degenerate_series(observed);
    best.iterations = total_iters;
    return best;
}

AicScore aic_score(double rss, std::size_t n, std::size_t k)
{
    require(n >= 1, "aic_score: n must be >= 1");
    require(rss >= 0.0 && std::isfinite(rss), "aic_score: rss must be finite and >= 0");
    AicScore s;
    if (rss <= kRssFloor) {
        rss = kRssFloor;
        s.floored = true;
    }
    const double nd = static_cast<double>(n);
    s.value = nd * std::log(rss / nd) + 2.0 * static_cast<double>(k);
    return s;
}

const char* to_string(Choice c)
{
    switch (c) {
    case Choice::SIR: return "SIR";
    case Choice::SEIR: return "SEIR";
    case Choice::Abstain: return "abstain";
    }
    return "?";
}

SelectOutcome aic_select(std::span<const double> observed, const FitConfig& cfg)
{
    SelectOutcome out;
    auto try_fit = [&](ModelTag tag) -> std::optional<FitResult> {
        try {
            return fit_least_squares(tag, observed, cfg);
        } catch (const NumericalError&) {
            return std::nullopt;
        }
    };
    out.fit_sir = try_fit(ModelTag::SIR);
    out.fit_seir = try_fit(ModelTag::SEIR);
    const bool sir_ok = out.fit_sir && out.fit_sir->converged;
    const bool seir_ok = out.fit_seir && out.fit_seir->converged;
    if (!sir_ok && !seir_ok) return out;

    const double inf = std::numeric_limits<double>::infinity();
    out.aic_sir = out.fit_sir ? aic_score(out.fit_sir->rss, observed.size(), 2).value : inf;
    out.aic_seir = out.fit_seir ? aic_score(out.fit_seir->rss, observed.size(), 3).value : inf;
    out.choice = (out.aic_seir < out.aic_sir - 1e-9) ? Choice::SEIR : Choice::SIR;
    return out;
}

std::vector<SelectOutcome> aic_select_batch(const Matrix& series, const FitConfig& cfg, Exec exec)
{
    std::vector<SelectOutcome> out(series.rows);
    const auto n = static_cast<std::int64_t>(series.rows);
    auto one = [&](std::int64_t i) {
        FitConfig c = cfg;
        c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] = aic_select(series.row(static_cast<std::size_t>(i)), c);
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
        for (std::int64_t i = 0; i < n; ++i) one(i);
    } else {
        for (std::int64_t i = 0; i < n; ++i) one(i);
    }
    return out;
}

void SelectionConfig::validate() const
{
    require(n_total >= 100, "model_selection: n_total must be >= 100");
    require(n_total % 2 == 0, "model_selection: n_total must be even for balanced classes");
    require(train_fraction > 0.0 && train_fraction < 1.0, "model_selection: train_fraction must be in (0, 1)");
    require(steps >= 10, "model_selection: steps must be >= 10");
    require(noise_sigma >= 0.0, "model_selection: noise_sigma must be >= 0");
    require(!hidden.empty(), "model_selection: need at least one hidden layer");
    require(fit.multistart >= 1, "model_selection: multistart must be >= 1");
    train.validate();
}

SelectionReport run_model_selection_experiment(const SelectionConfig& cfg)
{
    cfg.validate();
    const auto task = datagen::model_class_task(cfg.noise_sigma, cfg.steps);
    const auto data = datagen::generate_dataset(task, cfg.n_total, derive_seed(cfg.seed, 1));
    auto [train_ds, test_ds] = datagen::split_dataset(data, cfg.train_fraction, derive_seed(cfg.seed, 2));
    require(!train_ds.examples.empty() && !test_ds.examples.empty(), "model_selection: empty train or test split");

    SelectionReport report;
    report.n_train = train_ds.size();
    report.n_test = test_ds.size();
    const Matrix x_train = train_ds.inputs(), y_train = train_ds.targets();
    const Matrix x_test = test_ds.inputs();

    std::vector<Choice> truth(test_ds.size());
    for (std::size_t i = 0; i < test_ds.size(); ++i)
        truth[i] = test_ds.examples[i].model_tag == ModelTag::SIR ? Choice::SIR : Choice::SEIR;

    nnet::NetworkSpec spec;
    spec.widths.push_back(cfg.steps);
    spec.widths.insert(spec.widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    spec.widths.push_back(2);
    spec.activation = cfg.activation;
    spec.head = nnet::Head::Softmax;
    auto net = nnet::Network::initialized(spec, derive_seed(cfg.seed, 3));
    auto [mean, scale] = nnet::global_moments(x_train);
    net.set_input_normalization(std::move(mean), std::move(scale));

    std::vector<Choice> sgnn(test_ds.size(), Choice::Abstain);
    auto classify = [&](const nnet::Network& n) {
        nnet::BatchPass pass;
        pass.forward(n, x_test);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < x_test.rows; ++i) {
            sgnn[i] = pass.output()(i, 1) > pass.output()(i, 0) ? Choice::SEIR : Choice::SIR;
            if (sgnn[i] != truth[i]) ++wrong;
        }
        return static_cast<double>(wrong) / static_cast<double>(x_test.rows);
    };

    nnet::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 4);
    tc.on_epoch_end = [&](std::size_t, const nnet::Network& n) { report.sgnn_error.push_back(classify(n)); };
    nnet::train(std::move(net), x_train, y_train, tc, nnet::LossSpec{nnet::LossKind::CrossEntropy});

    FitConfig fc = cfg.fit;
    fc.seed = derive_seed(cfg.seed, 5);
    fc.init = task.init;
    const auto outcomes = aic_select_batch(x_test, fc);
    std::size_t aic_wrong = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        TrajectoryDecision d;
        d.index = i;
        d.truth = truth[i];
        d.aic = outcomes[i].choice;
        d.sgnn = sgnn[i];
        d.aic_sir = outcomes[i].aic_sir;
        d.aic_seir = outcomes[i].aic_seir;
        if (d.aic == Choice::Abstain) ++report.aic_abstentions;
        if (d.aic != d.truth) ++aic_wrong;
        report.decisions.push_back(d);
    }
    report.aic_error = static_cast<double>(aic_wrong) / static_cast<double>(outcomes.size());
    return report;
}

}  // namespace sgnn::modelselect
