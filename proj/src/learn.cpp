#include "lsmc/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lsmc {

double solution_radius(const Space& space) {
    const int ones = space.kind == Space::Kind::topk ? space.ones : space.dim;
    return std::sqrt(static_cast<double>(ones));
}

PcdSchedule::PcdSchedule(const ScheduleParams& params, const Space& space, double t)
    : params_(params) {
    if (!(params.a > 0.0)) throw std::invalid_argument("schedule: a must be positive");
    if (!(params.b > 0.5 && params.b <= 1.0))
        throw std::invalid_argument("schedule: b must lie in (1/2, 1]");
    if (!(params.a_prime > 0.0)) throw std::invalid_argument("schedule: a' must be positive");
    if (!(params.a_dprime > 0.0)) throw std::invalid_argument("schedule: a'' must be positive");
    if (!(params.c > 1.0 - params.b / 2.0))
        throw std::invalid_argument("schedule: c must exceed 1 - b/2");
    if (params.k_floor < 1) throw std::invalid_argument("schedule: k_floor must be at least 1");
    if (params.k_cap < params.k_floor)
        throw std::invalid_argument("schedule: k_cap below k_floor");
    if (!(t > 0.0)) throw std::invalid_argument("schedule: temperature must be positive");
    rate_ = 8.0 * solution_radius(space) / t;
}

PcdSchedule::Step PcdSchedule::next(double theta_norm) {
    n_ += 1;
    const double gamma = params_.a * std::pow(static_cast<double>(n_), -params_.b);
    const double bound = 1.0 + params_.a_prime * std::exp(rate_ * theta_norm);
    if (!(bound < static_cast<double>(params_.k_cap)))
        throw std::length_error("schedule: required chain length exceeds the cap");
    const std::int64_t required = static_cast<std::int64_t>(std::floor(bound)) + 1;
    const std::int64_t k = std::max({required, prev_k_, params_.k_floor});
    if (k > params_.k_cap)
        throw std::length_error("schedule: required chain length exceeds the cap");

    // re-verify the three constraints on the emitted pair
    if (!(k > static_cast<std::int64_t>(std::floor(bound))))
        throw std::logic_error("schedule: chain-length constraint violated");
    if (prev_k_ > 0) {
        const double drift = 1.0 / std::sqrt(static_cast<double>(k)) -
                             1.0 / std::sqrt(static_cast<double>(prev_k_));
        if (drift > params_.a_dprime * std::pow(static_cast<double>(n_), -params_.c))
            throw std::logic_error("schedule: chain-length drift constraint violated");
    }
    prev_k_ = k;
    return Step{n_, gamma, k};
}

std::vector<double> UnconditionalDataset::mean() const {
    std::vector<double> out(space.dim, 0.0);
    if (targets.empty()) return out;
    for (int i = 0; i < space.dim; ++i) {
        KahanSum s;
        for (const auto& y : targets) s.add(y[i]);
        out[i] = s.value() / static_cast<double>(targets.size());
    }
    return out;
}

UnconditionalDataset generate_unconditional(const Space& space,
                                            const std::vector<double>& theta0, double t, int n,
                                            Rng& rng) {
    if (static_cast<int>(theta0.size()) != space.dim)
        throw std::invalid_argument("generate_unconditional: theta0 dimension mismatch");
    const GibbsModel model{theta0, t, StructuralTerm::zero()};
    UnconditionalDataset out{space, {}};
    out.targets.reserve(n);
    for (int i = 0; i < n; ++i) out.targets.push_back(sample_exact(space, model, rng));
    return out;
}

bool mean_interior(const Space& space, const std::vector<double>& mean) {
    if (static_cast<int>(mean.size()) != space.dim) return false;
    for (double m : mean) {
        if (!(m > 0.0 && m < 1.0)) return false;
    }
    if (space.kind == Space::Kind::topk) {
        KahanSum s;
        for (double m : mean) s.add(m);
        if (std::abs(s.value() - static_cast<double>(space.ones)) > 1e-9) return false;
    }
    return true;
}

std::string to_json_line(const StepRecord& r) {
    const std::string distance =
        std::isnan(r.distance_sq) ? std::string("null") : format_double(r.distance_sq);
    std::string out = "{\"step\":" + std::to_string(r.step);
    out += ",\"loss_proxy\":" + format_double(r.loss_proxy);
    out += ",\"distance_sq\":" + distance;
    out += ",\"acceptance_rate\":" + format_double(r.acceptance_rate);
    out += ",\"k_used\":" + std::to_string(r.k_used);
    out += ",\"gamma_used\":" + format_double(r.gamma_used);
    out += "}";
    return out;
}

namespace {

SolutionVector random_state(const Space& space, Rng& rng) {
    if (space.kind == Space::Kind::hypercube) {
        SolutionVector y(space.dim);
        for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        return y;
    }
    // uniform over fixed-ones vectors = exact draw at zero weights
    const GibbsModel flat{std::vector<double>(space.dim, 0.0), 1.0, StructuralTerm::zero()};
    return sample_exact(space, flat, rng);
}

// first-order adaptive-moment state over a flat parameter vector
struct AdamState {
    std::vector<double> m, v;
    std::int64_t steps = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& params, const std::vector<double>& grad,
                const OptimizerSpec& opt) {
        steps += 1;
        const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(steps));
        const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(steps));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
            params[i] -= opt.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt.eps);
        }
    }
};

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

FitResult fit_unconditional(const Space& space, const UnconditionalDataset& dataset,
                            const MixtureProposal& proposal,
                            const UnconditionalFitConfig& config) {
    const int d = space.dim;
    if (config.init == InitKind::ground_truth)
        throw std::invalid_argument("fit_unconditional: ground-truth init is conditional-only");
    if (config.chains < 1) throw std::invalid_argument("fit_unconditional: chains must be >= 1");
    if (!(config.t > 0.0)) throw std::invalid_argument("fit_unconditional: t must be positive");
    if (config.init == InitKind::data_based && dataset.targets.empty())
        throw std::invalid_argument("fit_unconditional: data-based init needs a dataset");

    const auto ybar = dataset.mean();
    if (!mean_interior(space, ybar))
        throw std::invalid_argument(
            "fit_unconditional: dataset mean must be strictly interior to the solution hull");

    std::vector<double> theta = config.theta_init;
    if (theta.empty()) theta.assign(d, 0.0);
    if (static_cast<int>(theta.size()) != d)
        throw std::invalid_argument("fit_unconditional: theta_init dimension mismatch");
    if (!config.theta_ref.empty() && static_cast<int>(config.theta_ref.size()) != d)
        throw std::invalid_argument("fit_unconditional: theta_ref dimension mismatch");

    const bool scheduled = config.optimizer.kind == OptimizerSpec::Kind::sgd_schedule;
    PcdSchedule schedule(scheduled ? config.optimizer.schedule : ScheduleParams{}, space,
                         config.t);
    AdamState adam(d);

    // persistent chain states, filled on each chain's first init call
    std::vector<SolutionVector> persistent(config.chains);
    std::vector<char> bootstrapped(config.chains, 0);

    const Rng master(config.seed);
    FitResult result;
    result.trajectory.reserve(config.n_max + 1);
    result.trajectory.push_back(theta);
    result.records.reserve(config.n_max);

    for (std::int64_t n = 1; n <= config.n_max; ++n) {
        double gamma = config.optimizer.lr;
        std::int64_t k = config.k;
        if (scheduled) {
            const auto step = schedule.next(l2_norm(theta));
            gamma = step.gamma;
            k = step.k;
        }
        if (k < 1) throw std::invalid_argument("fit_unconditional: chain length must be >= 1");

        const GibbsModel model{theta, config.t, StructuralTerm::zero()};
        ChainConfig cc;
        cc.mode = AcceptanceMode::mh;
        cc.iterations = k;
        cc.burn_in = 0;
        cc.chains = config.chains;
        cc.schedule = TemperatureSchedule::constant(config.t);
        cc.init = [&](int chain, Rng& r) -> SolutionVector {
            switch (config.init) {
                case InitKind::random:
                    return random_state(space, r);
                case InitKind::data_based:
                    return dataset.targets[r.below(dataset.targets.size())];
                case InitKind::persistent:
                    if (!bootstrapped[chain]) {
                        persistent[chain] = dataset.targets.empty()
                                                ? random_state(space, r)
                                                : dataset.targets[r.below(dataset.targets.size())];
                        bootstrapped[chain] = 1;
                    }
                    return persistent[chain];
                case InitKind::ground_truth:
                    break;
            }
            throw std::logic_error("fit_unconditional: unreachable init kind");
        };

        const RunResult res = run_mixture(model, proposal, cc, master.derive(n).base_seed());
        if (config.init == InitKind::persistent) persistent = res.final_states;

        std::vector<double> grad(d);
        for (int i = 0; i < d; ++i) grad[i] = res.estimate[i] - ybar[i];

        if (scheduled) {
            for (int i = 0; i < d; ++i) theta[i] -= gamma * grad[i];
        } else {
            adam.update(theta, grad, config.optimizer);
        }

        StepRecord rec;
        rec.step = n;
        rec.loss_proxy = cumulant(space, {theta, config.t, StructuralTerm::zero()}) -
                         dot(theta, ybar);
        rec.distance_sq = config.theta_ref.empty()
                              ? nan_value()
                              : parameter_distance_sq(space, theta, config.theta_ref);
        rec.acceptance_rate = res.acceptance_rate;
        rec.k_used = k;
        rec.gamma_used = gamma;
        result.records.push_back(rec);
        result.trajectory.push_back(theta);
    }
    result.final_theta = theta;
    return result;
}

std::vector<double> project_sum_zero(const std::vector<double>& v) {
    KahanSum s;
    for (double x : v) s.add(x);
    const double mean = v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
    return out;
}

double parameter_distance_sq(const Space& space, const std::vector<double>& a,
                             const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("parameter_distance_sq: size mismatch");
    if (space.kind == Space::Kind::topk)
        return squared_distance(project_sum_zero(a), project_sum_zero(b));
    return squared_distance(a, b);
}

ConditionalDataset generate_conditional(const Space& space, const Matrix& w0, double t, int n,
                                        Rng& rng) {
    if (static_cast<int>(w0.rows()) != space.dim)
        throw std::invalid_argument("generate_conditional: weight rows must match the dimension");
    ConditionalDataset out{space, static_cast<int>(w0.cols()), {}};
    out.samples.reserve(n);
    const LinearModel model{w0};
    for (int i = 0; i < n; ++i) {
        ConditionalSample s;
        s.x.resize(w0.cols());
        for (auto& v : s.x) v = rng.normal();
        const GibbsModel gm{model.predict(s.x), t, StructuralTerm::zero()};
        s.y = sample_exact(space, gm, rng);
        out.samples.push_back(std::move(s));
    }
    return out;
}

std::vector<double> LinearModel::predict(const std::vector<double>& x) const {
    if (x.size() != w.cols()) throw std::invalid_argument("LinearModel: feature size mismatch");
    std::vector<double> theta(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        KahanSum s;
        for (std::size_t j = 0; j < w.cols(); ++j) s.add(w(i, j) * x[j]);
        theta[i] = s.value();
    }
    return theta;
}

ConditionalFitResult fit_conditional(const ConditionalDataset& dataset,
                                     const MixtureProposal& proposal,
                                     const ConditionalFitConfig& config) {
    const Space& space = dataset.space;
    const int d = space.dim;
    const int p = dataset.feature_dim;
    const int n_samples = static_cast<int>(dataset.samples.size());
    if (n_samples == 0) throw std::invalid_argument("fit_conditional: empty dataset");
    if (config.optimizer.kind != OptimizerSpec::Kind::adam)
        throw std::invalid_argument(
            "fit_conditional: the norm-dependent schedule is unconditional-only");
    if (config.batch < 1) throw std::invalid_argument("fit_conditional: batch must be >= 1");
    if (static_cast<int>(config.w_init.rows()) != d ||
        static_cast<int>(config.w_init.cols()) != p)
        throw std::invalid_argument("fit_conditional: w_init must be d x p");
    if (config.w_ref != nullptr &&
        (config.w_ref->rows() != config.w_init.rows() ||
         config.w_ref->cols() != config.w_init.cols()))
        throw std::invalid_argument("fit_conditional: w_ref shape mismatch");

    Matrix w = config.w_init;
    AdamState adam(static_cast<std::size_t>(d) * p);
    const Rng master(config.seed);

    // per-sample persistent states, bootstrapped at the sample's target
    std::vector<SolutionVector> persistent(n_samples);
    std::vector<char> bootstrapped(n_samples, 0);

    const int batch_size = std::min(config.batch, n_samples);
    std::vector<int> order(n_samples);
    std::iota(order.begin(), order.end(), 0);

    auto loss_proxy = [&]() {
        const LinearModel lm{w};
        KahanSum total;
        for (const auto& s : dataset.samples) {
            const std::vector<double> theta = lm.predict(s.x);
            total.add(cumulant(space, {theta, config.t, StructuralTerm::zero()}) -
                      dot(theta, s.y));
        }
        return total.value() / static_cast<double>(n_samples);
    };
    auto distance = [&]() {
        if (config.w_ref == nullptr) return nan_value();
        KahanSum s;
        for (std::size_t i = 0; i < w.data().size(); ++i) {
            const double diff = w.data()[i] - config.w_ref->data()[i];
            s.add(diff * diff);
        }
        return s.value();
    };

    ConditionalFitResult result;
    result.trajectory.reserve(config.n_max + 1);
    result.trajectory.push_back(w);
    result.records.reserve(config.n_max);

    for (std::int64_t n = 1; n <= config.n_max; ++n) {
        Rng step_rng = master.derive(n);
        // mini-batch without replacement via partial shuffle
        for (int i = 0; i < batch_size; ++i) {
            const int j = i + static_cast<int>(step_rng.below(n_samples - i));
            std::swap(order[i], order[j]);
        }

        std::vector<double> grad(static_cast<std::size_t>(d) * p, 0.0);
        double accept_sum = 0.0;
        const LinearModel lm{w};
        for (int bi = 0; bi < batch_size; ++bi) {
            const int idx = order[bi];
            const ConditionalSample& sample = dataset.samples[idx];
            const GibbsModel model{lm.predict(sample.x), config.t, StructuralTerm::zero()};

            ChainConfig cc;
            cc.mode = AcceptanceMode::mh;
            cc.iterations = config.k;
            cc.burn_in = 0;
            cc.chains = config.chains;
            cc.schedule = TemperatureSchedule::constant(config.t);
            cc.init = [&](int, Rng& r) -> SolutionVector {
                switch (config.init) {
                    case InitKind::random:
                        return random_state(space, r);
                    case InitKind::data_based:
                        return dataset.samples[r.below(dataset.samples.size())].y;
                    case InitKind::ground_truth:
                        return sample.y;
                    case InitKind::persistent:
                        if (!bootstrapped[idx]) {
                            persistent[idx] = sample.y;
                            bootstrapped[idx] = 1;
                        }
                        return persistent[idx];
                }
                throw std::logic_error("fit_conditional: unreachable init kind");
            };

            const std::uint64_t seed = master.derive(n).derive(idx + 1).base_seed();
            const RunResult res = run_mixture(model, proposal, cc, seed);
            if (config.init == InitKind::persistent) persistent[idx] = res.final_states[0];
            accept_sum += res.acceptance_rate;

            // d(loss)/dW = (estimate - y) x^T, averaged over the batch
            for (int a = 0; a < d; ++a) {
                const double v = res.estimate[a] - sample.y[a];
                for (int b = 0; b < p; ++b)
                    grad[static_cast<std::size_t>(a) * p + b] +=
                        v * sample.x[b] / static_cast<double>(batch_size);
            }
        }

        std::vector<double> flat(w.data());
        adam.update(flat, grad, config.optimizer);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < p; ++b) w(a, b) = flat[static_cast<std::size_t>(a) * p + b];

        StepRecord rec;
        rec.step = n;
        rec.loss_proxy = loss_proxy();
        rec.distance_sq = distance();
        rec.acceptance_rate = accept_sum / batch_size;
        rec.k_used = config.k;
        rec.gamma_used = config.optimizer.lr;
        result.records.push_back(rec);
        result.trajectory.push_back(w);
    }
    result.final_w = w;
    return result;
}

}  // namespace lsmc
