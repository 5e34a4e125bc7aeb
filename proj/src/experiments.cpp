#include "lsmc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>

#include "lsmc/gibbs.hpp"
#include "lsmc/kernel.hpp"
#include "lsmc/learn.hpp"
#include "lsmc/pcvrp.hpp"
#include "lsmc/util.hpp"

namespace lsmc {

namespace {

InitKind parse_init(const std::string& name) {
    if (name == "random") return InitKind::random;
    if (name == "data-based") return InitKind::data_based;
    if (name == "persistent") return InitKind::persistent;
    if (name == "ground-truth") return InitKind::ground_truth;
    throw std::invalid_argument(
        "unknown init kind \"" + name +
        "\" (expected random, data-based, persistent, or ground-truth)");
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Runs body(0..m-1) on a small worker pool; every instance writes only its own
// output slot, so results do not depend on scheduling.
void parallel_instances(int m, const std::function<void(int)>& body) {
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min({workers, m, 8}));
    if (workers == 1) {
        for (int i = 0; i < m; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= m) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

SolutionVector random_state(const Space& space, Rng& rng) {
    if (space.kind == Space::Kind::hypercube) {
        SolutionVector y(space.dim);
        for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        return y;
    }
    const GibbsModel flat{std::vector<double>(space.dim, 0.0), 1.0, StructuralTerm::zero()};
    return sample_exact(space, flat, rng);
}

std::vector<double> normal_vector(int d, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = rng.normal();
    return v;
}

int checked_int(std::int64_t v, const char* what) {
    if (v < 1 || v > std::numeric_limits<int>::max())
        throw std::invalid_argument(std::string(what) + " out of range");
    return static_cast<int>(v);
}

struct Variant {
    std::string label;
    ExperimentConfig config;
};

std::vector<Variant> gradconv_variants(const ExperimentConfig& config) {
    std::vector<Variant> out;
    if (config.preset == "burnin-sweep") {
        for (std::int64_t k0 : {0ll, 100ll, 500ll}) {
            auto v = config;
            v.k0 = k0;
            v.t0 = k0 > 0 ? v.t / std::pow(v.gamma, static_cast<double>(k0)) : 0.0;
            out.push_back({"K0=" + std::to_string(k0), v});
        }
    } else if (config.preset == "temperature-sweep") {
        for (double t : {0.5, 1.0, 2.0}) {
            auto v = config;
            v.t = t;
            out.push_back({"t=" + format_double(t), v});
        }
    } else if (config.preset == "chains-sweep") {
        for (int c : {1, 10}) {
            auto v = config;
            v.c = c;
            out.push_back({"C=" + std::to_string(c), v});
        }
    } else {
        out.push_back({"mse", config});
    }
    return out;
}

std::vector<Variant> unconditional_variants(const ExperimentConfig& config) {
    std::vector<Variant> out;
    if (config.preset == "chain-length") {
        for (std::int64_t k : {1ll, 10ll, 100ll}) {
            auto v = config;
            v.k = k;
            out.push_back({"K=" + std::to_string(k), v});
        }
    } else if (config.preset == "chain-count") {
        for (int c : {1, 10}) {
            auto v = config;
            v.c = c;
            out.push_back({"C=" + std::to_string(c), v});
        }
    } else if (config.preset == "init-ablation") {
        for (const char* init : {"random", "persistent", "data-based"}) {
            auto v = config;
            v.init = init;
            out.push_back({init, v});
        }
    } else if (config.preset == "dataset-size") {
        for (std::int64_t n : {10ll, 100ll, 1000ll, 10000ll}) {
            auto v = config;
            v.n = n;
            out.push_back({"N=" + std::to_string(n), v});
        }
    } else if (config.preset == "mixture-1236") {
        auto single = config;
        single.mixture = "shell:6";
        out.push_back({"shell-6", single});
        auto mixed = config;
        mixed.mixture = "shell:1,shell:2,shell:3,shell:6";
        out.push_back({"shell-1236", mixed});
    } else {
        out.push_back({"fit", config});
    }
    return out;
}

// Dataset draw conditioned on an interior mean: the fit refuses degenerate
// datasets, which small N produces with noticeable probability.
UnconditionalDataset interior_dataset(const Space& space, const std::vector<double>& theta0,
                                      double t, int n, const Rng& base) {
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        Rng rng = base.derive(attempt);
        auto dataset = generate_unconditional(space, theta0, t, n, rng);
        if (mean_interior(space, dataset.mean())) return dataset;
    }
    throw std::runtime_error("no interior dataset after 1000 draws; increase N");
}

std::vector<StepRecord> average_records(const std::vector<std::vector<StepRecord>>& per_instance) {
    const std::size_t steps = per_instance.at(0).size();
    std::vector<StepRecord> out(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        KahanSum loss, dist, acc, gamma;
        for (const auto& records : per_instance) {
            loss.add(records[s].loss_proxy);
            dist.add(records[s].distance_sq);
            acc.add(records[s].acceptance_rate);
            gamma.add(records[s].gamma_used);
        }
        const double inv = 1.0 / static_cast<double>(per_instance.size());
        out[s].step = per_instance[0][s].step;
        out[s].k_used = per_instance[0][s].k_used;
        out[s].loss_proxy = loss.value() * inv;
        out[s].distance_sq = dist.value() * inv;
        out[s].acceptance_rate = acc.value() * inv;
        out[s].gamma_used = gamma.value() * inv;
    }
    return out;
}

std::string labeled_line(const std::string& label, const StepRecord& record) {
    return "{\"curve\":\"" + json_escape(label) + "\"," + to_json_line(record).substr(1);
}

std::vector<StepRecord> averaged_unconditional(const ExperimentConfig& cfg) {
    const Space space = space_of(cfg);
    const MixtureProposal mixture = mixture_of(cfg);
    const InitKind init = parse_init(cfg.init);
    const int n = checked_int(cfg.n, "dataset size");
    const int m = std::max(1, cfg.m);

    std::vector<std::vector<StepRecord>> per_instance(static_cast<std::size_t>(m));
    parallel_instances(m, [&](int i) {
        const Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(i));
        Rng theta_rng = rng.derive(0);
        const auto theta0 = normal_vector(space.dim, theta_rng);
        const auto dataset = interior_dataset(space, theta0, cfg.t, n, rng.derive(1));

        UnconditionalFitConfig fit;
        fit.init = init;
        fit.n_max = cfg.n_max;
        fit.k = cfg.k;
        fit.chains = cfg.c;
        fit.t = cfg.t;
        fit.seed = rng.derive(2).base_seed();
        fit.theta_ref = theta0;
        const auto result = fit_unconditional(space, dataset, mixture, fit);
        per_instance[static_cast<std::size_t>(i)] = result.records;
    });
    return average_records(per_instance);
}

std::vector<StepRecord> averaged_conditional(const ExperimentConfig& cfg) {
    const Space space = space_of(cfg);
    const MixtureProposal mixture = mixture_of(cfg);
    const InitKind init = parse_init(cfg.init);
    const int n = checked_int(cfg.n, "dataset size");
    const int p = cfg.feature_dim;
    if (p < 1) throw std::invalid_argument("feature_dim must be positive");
    const int m = std::max(1, cfg.m);

    std::vector<std::vector<StepRecord>> per_instance(static_cast<std::size_t>(m));
    parallel_instances(m, [&](int i) {
        const Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(i));
        Rng w_rng = rng.derive(0);
        Matrix w0(static_cast<std::size_t>(space.dim), static_cast<std::size_t>(p));
        for (std::size_t r = 0; r < w0.rows(); ++r)
            for (std::size_t c = 0; c < w0.cols(); ++c) w0(r, c) = w_rng.normal();
        Rng data_rng = rng.derive(1);
        const auto dataset = generate_conditional(space, w0, cfg.t, n, data_rng);

        ConditionalFitConfig fit;
        fit.init = init;
        fit.batch = cfg.batch;
        fit.n_max = cfg.n_max;
        fit.k = cfg.k;
        fit.chains = cfg.c;
        fit.t = cfg.t;
        fit.seed = rng.derive(2).base_seed();
        fit.w_init = Matrix(static_cast<std::size_t>(space.dim), static_cast<std::size_t>(p));
        fit.w_ref = &w0;
        const auto result = fit_conditional(dataset, mixture, fit);
        per_instance[static_cast<std::size_t>(i)] = result.records;
    });
    return average_records(per_instance);
}

PcvrpInstance bundled_triplet() {
    std::vector<RoutingRequest> reqs(3);
    reqs[0] = {10.0, 0.0, {0.0, 60.0}, 5.0, 10.0, 12.0, false};
    reqs[1] = {0.0, 10.0, {20.0, 80.0}, 5.0, 15.0, 15.0, false};
    reqs[2] = {-10.0, 0.0, {40.0, 120.0}, 5.0, 12.0, 14.0, false};
    return make_instance(0.0, 0.0, {0.0, 200.0}, 30.0, std::move(reqs), 2);
}

// Wide-open windows and no binding capacity: every move draw lands on a
// feasible solution, which is the regime where the correction ratios are 1.
PcvrpInstance bundled_ratio_instance() {
    std::vector<RoutingRequest> reqs(4);
    reqs[0] = {8.0, 0.0, {0.0, 1e6}, 1.0, 1.0, 1.0, false};
    reqs[1] = {0.0, 7.0, {0.0, 1e6}, 1.0, 1.0, 1.0, false};
    reqs[2] = {-6.0, 2.0, {0.0, 1e6}, 1.0, 1.0, 1.0, false};
    reqs[3] = {1.0, -9.0, {0.0, 1e6}, 1.0, 1.0, 1.0, false};
    return make_instance(0.0, 0.0, {0.0, 1e6}, 1e6, std::move(reqs), 2);
}

std::string check_json(const RoutingCheck& check) {
    std::string out = "{\"name\":\"" + json_escape(check.name) + "\"";
    out += ",\"pass\":" + std::string(check.pass ? "true" : "false");
    out += ",\"measured\":" + format_double(check.measured);
    out += ",\"threshold\":" + format_double(check.threshold);
    out += ",\"detail\":\"" + json_escape(check.detail) + "\"}";
    return out;
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::gradient_convergence: return "gradconv";
        case ExperimentKind::unconditional: return "fit-uncond";
        case ExperimentKind::conditional: return "fit-cond";
        case ExperimentKind::routing_verify: return "routing-verify";
    }
    throw std::invalid_argument("unknown experiment kind");
}

void apply_preset(ExperimentConfig& config) {
    if (config.preset.empty()) return;
    const std::string& name = config.preset;
    bool known = false;
    if (config.kind == ExperimentKind::gradient_convergence) {
        if (name == "smoke") {
            config.space = "hypercube";
            config.d = 6;
            config.mixture = "ball:1";
            config.t = 1.0;
            config.t0 = 0.0;
            config.k = 200;
            config.k0 = 0;
            config.c = 1;
            config.m = 4;
            known = true;
        } else if (name == "burnin-sweep" || name == "temperature-sweep" ||
                   name == "chains-sweep") {
            config.space = "hypercube";
            config.d = 10;
            config.mixture = "ball:1";
            config.t = 1.0;
            config.t0 = 0.0;
            config.gamma = 0.995;
            config.k = 3000;
            config.k0 = 0;
            config.c = 1;
            config.m = 100;
            known = true;
        }
    } else if (config.kind == ExperimentKind::unconditional) {
        if (name == "smoke") {
            config.space = "hypercube";
            config.d = 6;
            config.mixture = "ball:1";
            config.t = 1.0;
            config.n = 500;
            config.n_max = 20;
            config.k = 20;
            config.c = 1;
            config.m = 2;
            config.init = "persistent";
            known = true;
        } else if (name == "chain-length" || name == "chain-count" || name == "init-ablation" ||
                   name == "dataset-size" || name == "mixture-1236") {
            config.space = "hypercube";
            config.d = 10;
            config.mixture = "ball:1";
            config.t = 1.0;
            config.n = 10000;
            config.n_max = 300;
            config.k = 100;
            config.c = 1;
            config.m = 20;
            config.init = "persistent";
            known = true;
        }
    } else if (config.kind == ExperimentKind::conditional) {
        if (name == "smoke") {
            config.space = "hypercube";
            config.d = 4;
            config.mixture = "ball:1";
            config.feature_dim = 2;
            config.t = 1.0;
            config.n = 60;
            config.batch = 8;
            config.n_max = 10;
            config.k = 15;
            config.c = 1;
            config.m = 2;
            config.init = "ground-truth";
            known = true;
        }
    } else if (config.kind == ExperimentKind::routing_verify) {
        if (name == "smoke") {
            config.k = 50000;
            config.n = 20000;
            config.t = 5.0;
            known = true;
        } else if (name == "full") {
            config.k = 1000000;
            config.n = 100000;
            config.t = 5.0;
            known = true;
        }
    }
    if (!known) {
        std::string names;
        for (const auto& p : preset_names(config.kind)) names += (names.empty() ? "" : ", ") + p;
        throw std::invalid_argument("unknown preset \"" + name + "\" for " +
                                    kind_name(config.kind) + " (available: " + names + ")");
    }
}

std::vector<std::string> preset_names(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::gradient_convergence:
            return {"smoke", "burnin-sweep", "temperature-sweep", "chains-sweep"};
        case ExperimentKind::unconditional:
            return {"smoke", "chain-length", "chain-count", "init-ablation", "dataset-size",
                    "mixture-1236"};
        case ExperimentKind::conditional:
            return {"smoke"};
        case ExperimentKind::routing_verify:
            return {"smoke", "full"};
    }
    return {};
}

std::string config_json(const ExperimentConfig& config) {
    std::string out = "{";
    out += "\"kind\":\"" + std::string(kind_name(config.kind)) + "\"";
    out += ",\"space\":\"" + json_escape(config.space) + "\"";
    out += ",\"d\":" + std::to_string(config.d);
    out += ",\"kappa\":" + std::to_string(config.kappa);
    out += ",\"mixture\":\"" + json_escape(config.mixture) + "\"";
    out += ",\"t\":" + format_double(config.t);
    out += ",\"t0\":" + format_double(config.t0);
    out += ",\"gamma\":" + format_double(config.gamma);
    out += ",\"k\":" + std::to_string(config.k);
    out += ",\"k0\":" + std::to_string(config.k0);
    out += ",\"c\":" + std::to_string(config.c);
    out += ",\"m\":" + std::to_string(config.m);
    out += ",\"n\":" + std::to_string(config.n);
    out += ",\"n_max\":" + std::to_string(config.n_max);
    out += ",\"feature_dim\":" + std::to_string(config.feature_dim);
    out += ",\"batch\":" + std::to_string(config.batch);
    out += ",\"init\":\"" + json_escape(config.init) + "\"";
    out += ",\"seed\":" + std::to_string(config.seed);
    out += ",\"preset\":\"" + json_escape(config.preset) + "\"";
    out += ",\"instance\":\"" + json_escape(config.instance) + "\"";
    out += "}";
    return out;
}

std::string manifest_json(const ExperimentConfig& config) {
    const std::string cfg = config_json(config);
    std::string out = "{\"manifest\":{";
    out += "\"config\":" + cfg;
    out += ",\"config_hash\":\"" + hex64(fnv1a(cfg)) + "\"";
    out += ",\"seed\":" + std::to_string(config.seed);
    out += ",\"version\":\"" + std::string(kLibraryVersion) + "\"";
    out += "}}";
    return out;
}

Space space_of(const ExperimentConfig& config) {
    if (config.space == "hypercube") return Space::hypercube(config.d);
    if (config.space == "topk") return Space::topk(config.d, config.kappa);
    throw std::invalid_argument("unknown space \"" + config.space +
                                "\" (expected hypercube or topk)");
}

MixtureProposal mixture_of(const ExperimentConfig& config) {
    const Space space = space_of(config);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    std::size_t pos = 0;
    while (pos <= config.mixture.size()) {
        const std::size_t comma = std::min(config.mixture.find(',', pos), config.mixture.size());
        const std::string token = config.mixture.substr(pos, comma - pos);
        pos = comma + 1;
        const std::size_t colon = token.find(':');
        if (token.empty() || colon == std::string::npos || colon + 1 >= token.size())
            throw std::invalid_argument("bad mixture member \"" + token +
                                        "\" (expected kind:radius)");
        const std::string kind = token.substr(0, colon);
        int radius = 0;
        try {
            std::size_t used = 0;
            radius = std::stoi(token.substr(colon + 1), &used);
            if (used != token.size() - colon - 1) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw std::invalid_argument("bad mixture radius in \"" + token + "\"");
        }
        Neighborhood nbhd;
        if (kind == "ball") {
            nbhd = Neighborhood::hamming_ball(radius);
        } else if (kind == "shell") {
            nbhd = Neighborhood::hamming_shell(radius);
        } else if (kind == "swap") {
            nbhd = Neighborhood::swap(radius);
        } else {
            throw std::invalid_argument("unknown neighborhood kind \"" + kind +
                                        "\" (expected ball, shell, or swap)");
        }
        members.push_back(std::shared_ptr<ProposalKernel>(uniform_neighbor_proposal(space, nbhd)));
    }
    return MixtureProposal::over(std::move(members));
}

GradConvCurve gradient_convergence_curve(const ExperimentConfig& config,
                                         const std::string& label) {
    const Space space = space_of(config);
    const MixtureProposal mixture = mixture_of(config);
    if (config.k < 1) throw std::invalid_argument("chain length must be positive");
    if (config.k0 < 0 || config.k0 >= config.k)
        throw std::invalid_argument("burn-in must lie in [0, chain length)");
    if (config.c < 1) throw std::invalid_argument("chain count must be positive");
    if (config.m < 1) throw std::invalid_argument("instance count must be positive");
    if (!(config.t > 0.0)) throw std::invalid_argument("temperature must be positive");

    const std::size_t rows = static_cast<std::size_t>(config.k - config.k0);
    const std::size_t d = static_cast<std::size_t>(space.dim);
    if (static_cast<std::uint64_t>(config.k) * d > (1ull << 25))
        throw std::invalid_argument("curve buffer too large; reduce k or d");
    std::vector<std::vector<double>> per_instance(static_cast<std::size_t>(config.m));

    parallel_instances(config.m, [&](int i) {
        const Rng rng = Rng(config.seed).derive(static_cast<std::uint64_t>(i));
        Rng theta_rng = rng.derive(0);
        GibbsModel model{normal_vector(space.dim, theta_rng), config.t, StructuralTerm::zero()};
        const auto exact = marginal(space, model);

        // pooled iterate sums per step, chains accumulated on top of each other
        std::vector<double> sums(static_cast<std::size_t>(config.k) * d, 0.0);
        ChainConfig chain;
        chain.mode = AcceptanceMode::mh;
        chain.iterations = config.k;
        chain.burn_in = config.k0;
        chain.chains = config.c;
        chain.schedule = config.t0 > config.t
                             ? TemperatureSchedule::geometric_truncated(config.t0, config.gamma,
                                                                        config.t)
                             : TemperatureSchedule::constant(config.t);
        chain.init = [&](int, Rng& r) { return random_state(space, r); };
        chain.on_iterate = [&](int, std::int64_t k, const SolutionVector& y, bool) {
            double* row = sums.data() + static_cast<std::size_t>(k - 1) * d;
            for (std::size_t j = 0; j < d; ++j) row[j] += y[j];
        };
        const std::uint64_t chain_seed = rng.derive(1).base_seed();
        if (mixture.members.size() == 1) {
            run(model, *mixture.members[0], chain, chain_seed);
        } else {
            run_mixture(model, mixture, chain, chain_seed);
        }

        // prefix averages over iterates k0+1..T, then distance to the marginal
        std::vector<double> mse(rows, 0.0);
        std::vector<KahanSum> prefix(d);
        for (std::int64_t step = config.k0 + 1; step <= config.k; ++step) {
            const double* row = sums.data() + static_cast<std::size_t>(step - 1) * d;
            for (std::size_t j = 0; j < d; ++j) prefix[j].add(row[j]);
            const double denom =
                static_cast<double>(config.c) * static_cast<double>(step - config.k0);
            KahanSum dist;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = prefix[j].value() / denom - exact[j];
                dist.add(diff * diff);
            }
            mse[static_cast<std::size_t>(step - config.k0 - 1)] = dist.value();
        }
        per_instance[static_cast<std::size_t>(i)] = std::move(mse);
    });

    GradConvCurve curve;
    curve.label = label.empty() ? "mse" : label;
    curve.steps.resize(rows);
    curve.mse.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        curve.steps[r] = config.k0 + 1 + static_cast<std::int64_t>(r);
        KahanSum acc;
        for (const auto& mse : per_instance) acc.add(mse[r]);
        curve.mse[r] = acc.value() / static_cast<double>(config.m);
    }
    return curve;
}

std::string run_gradient_convergence(const ExperimentConfig& config) {
    const auto variants = gradconv_variants(config);
    std::string out = "# " + manifest_json(config) + "\n";
    const bool multi = variants.size() > 1;
    out += multi ? "curve,T,mse\n" : "T,mse\n";
    for (const auto& variant : variants) {
        const auto curve = gradient_convergence_curve(variant.config, variant.label);
        for (std::size_t r = 0; r < curve.steps.size(); ++r) {
            if (multi) out += variant.label + ",";
            out += std::to_string(curve.steps[r]) + "," + format_double(curve.mse[r]) + "\n";
        }
    }
    return out;
}

std::string run_unconditional(const ExperimentConfig& config) {
    std::string out = manifest_json(config) + "\n";
    for (const auto& variant : unconditional_variants(config)) {
        const auto records = averaged_unconditional(variant.config);
        for (const auto& record : records) out += labeled_line(variant.label, record) + "\n";
    }
    return out;
}

std::string run_conditional(const ExperimentConfig& config) {
    std::string out = manifest_json(config) + "\n";
    const auto records = averaged_conditional(config);
    for (const auto& record : records) out += labeled_line("fit", record) + "\n";
    return out;
}

RoutingVerifyReport verify_routing(const ExperimentConfig& config) {
    const PcvrpInstance inst =
        config.instance.empty() ? bundled_triplet() : load_instance(config.instance);
    if (inst.size() > 4)
        throw std::invalid_argument(
            "routing-verify: the stationarity oracle needs at most 4 requests, got " +
            std::to_string(inst.size()));
    if (config.k < 100) throw std::invalid_argument("routing-verify needs k >= 100 chain steps");
    if (config.n < 100) throw std::invalid_argument("routing-verify needs n >= 100 draws");
    if (!(config.t > 0.0)) throw std::invalid_argument("temperature must be positive");

    RoutingVerifyReport report;
    const RoutingProposalParams params;
    const auto states = enumerate_feasible(inst);
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < states.size(); ++i) index[solution_key(states[i])] = i;

    report.checks.push_back({"instance", true, 0.0, 0.0,
                             std::to_string(inst.size()) + " requests, fleet " +
                                 std::to_string(inst.fleet) + ", " +
                                 std::to_string(states.size()) + " feasible states"});

    // every raw draw law must sum to one over feasible targets, and every
    // reachable target must reach back with positive mass
    std::map<std::pair<std::size_t, int>, MoveScan> scans;
    for (std::size_t i = 0; i < states.size(); ++i)
        for (MoveType move : kAllMoves)
            if (move_applicable(inst, states[i], move))
                scans[{i, static_cast<int>(move)}] = scan_move(inst, states[i], move, params);
    std::int64_t violations = 0;
    for (const auto& [key, scan] : scans) {
        double total = scan.invalid_mass;
        for (const auto& [target, mass] : scan.mass) total += mass;
        if (std::abs(total - 1.0) > 1e-9) ++violations;
        const auto self_key = solution_key(states[key.first]);
        for (const auto& [target, mass] : scan.mass) {
            if (mass <= 0.0 || !index.count(target)) {
                ++violations;
                continue;
            }
            if (target == self_key) continue;
            const auto back = scans.find({index.at(target), key.second});
            if (back == scans.end() || !back->second.mass.count(self_key) ||
                back->second.mass.at(self_key) <= 0.0)
                ++violations;
        }
    }
    report.checks.push_back({"support-symmetry", violations == 0,
                             static_cast<double>(violations), 0.0,
                             std::to_string(scans.size()) + " (state, move) laws checked"});

    // Monte-Carlo frequencies against the realized densities on a spread of
    // states; atoms below 5 expected hits are outside the normal-z regime
    double max_z = 0.0;
    std::int64_t atoms = 0;
    std::vector<std::size_t> picks{0, states.size() / 2, states.size() - 1};
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    std::uint64_t pair_id = 0;
    for (std::size_t i : picks) {
        for (MoveType move : kAllMoves) {
            const auto entry = scans.find({i, static_cast<int>(move)});
            if (entry == scans.end()) continue;
            const auto& scan = entry->second;
            const double factor = resample_factor(scan.invalid_mass, params.max_attempts);
            Rng rng = Rng(config.seed).derive(100 + pair_id++);
            std::map<std::vector<int>, std::int64_t> counts;
            for (std::int64_t draw = 0; draw < config.n; ++draw) {
                const auto prop = propose(inst, states[i], move, params, rng);
                if (!prop.exhausted) counts[solution_key(prop.candidate)] += 1;
            }
            const double draws = static_cast<double>(config.n);
            for (const auto& [target, raw] : scan.mass) {
                const double q = raw * factor;
                if (q * draws < 5.0) continue;
                const double freq = static_cast<double>(counts[target]) / draws;
                const double sigma = std::sqrt(q * (1.0 - q) / draws);
                max_z = std::max(max_z, std::abs(freq - q) / sigma);
                ++atoms;
            }
        }
    }
    report.checks.push_back({"density-frequency", max_z <= 3.0, max_z, 3.0,
                             std::to_string(atoms) + " atoms at " + std::to_string(config.n) +
                                 " draws each"});

    // chain occupation against the exact Gibbs law
    const auto theta = inst.prizes();
    const auto pi = routing_gibbs(inst, theta, config.t, states);
    std::vector<std::int64_t> counts(states.size(), 0);
    RoutingChainConfig chain;
    chain.t = config.t;
    chain.iterations = config.k;
    chain.burn_in = config.k / 20;
    chain.params = params;
    chain.observer = [&](std::int64_t k, const RoutingSolution& y, bool) {
        if (k > chain.burn_in) counts[index.at(solution_key(y))] += 1;
    };
    Rng chain_rng = Rng(config.seed).derive(3);
    sample_routing_chain(inst, theta, chain, states.front(), chain_rng);
    const double samples = static_cast<double>(config.k - chain.burn_in);
    double tv = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
        tv += std::abs(static_cast<double>(counts[i]) / samples - pi[i]);
    tv /= 2.0;
    report.checks.push_back({"chain-stationarity", tv <= 0.05, tv, 0.05,
                             std::to_string(config.k) + " steps at t = " + format_double(config.t)});

    // swap and segment-reversal corrections are exactly 1 on the bundled
    // loose instance (identical valid sets and resample factors on both sides)
    const PcvrpInstance loose = bundled_ratio_instance();
    const auto loose_states = enumerate_feasible(loose);
    std::map<std::vector<int>, std::size_t> loose_index;
    for (std::size_t i = 0; i < loose_states.size(); ++i)
        loose_index[solution_key(loose_states[i])] = i;
    for (MoveType move : {MoveType::swap, MoveType::two_opt}) {
        std::vector<MoveScan> move_scans(loose_states.size());
        std::vector<bool> applicable(loose_states.size(), false);
        for (std::size_t i = 0; i < loose_states.size(); ++i) {
            if (!move_applicable(loose, loose_states[i], move)) continue;
            applicable[i] = true;
            move_scans[i] = scan_move(loose, loose_states[i], move, params);
        }
        double max_gap = 0.0;
        std::int64_t pairs = 0;
        for (std::size_t i = 0; i < loose_states.size(); ++i) {
            if (!applicable[i]) continue;
            const auto self_key = solution_key(loose_states[i]);
            const double fwd_factor =
                resample_factor(move_scans[i].invalid_mass, params.max_attempts);
            for (const auto& [target, mass] : move_scans[i].mass) {
                if (target == self_key) continue;
                const std::size_t j = loose_index.at(target);
                if (!applicable[j] || !move_scans[j].mass.count(self_key)) {
                    max_gap = std::max(max_gap, 1.0);  // no reverse path at all
                    ++pairs;
                    continue;
                }
                const double rev_factor =
                    resample_factor(move_scans[j].invalid_mass, params.max_attempts);
                const double ratio = (move_scans[j].mass.at(self_key) * rev_factor) /
                                     (mass * fwd_factor);
                max_gap = std::max(max_gap, std::abs(ratio - 1.0));
                ++pairs;
            }
        }
        report.checks.push_back({std::string(move_name(move)) + "-ratio", max_gap <= 1e-12,
                                 max_gap, 1e-12,
                                 std::to_string(pairs) + " ordered pairs on the loose fixture"});
    }

    report.all_pass = true;
    for (const auto& check : report.checks) report.all_pass = report.all_pass && check.pass;
    return report;
}

std::string routing_report_json(const ExperimentConfig& config,
                                const RoutingVerifyReport& report) {
    std::string out = manifest_json(config);
    out.pop_back();  // reopen the manifest object to append the report fields
    out += ",\"checks\":[\n";
    for (std::size_t i = 0; i < report.checks.size(); ++i) {
        out += check_json(report.checks[i]);
        if (i + 1 < report.checks.size()) out += ",";
        out += "\n";
    }
    out += "],\"all_pass\":";
    out += report.all_pass ? "true" : "false";
    out += "}\n";
    return out;
}

std::string run_routing_verify(const ExperimentConfig& config) {
    return routing_report_json(config, verify_routing(config));
}

std::string run_experiment(const ExperimentConfig& config) {
    switch (config.kind) {
        case ExperimentKind::gradient_convergence: return run_gradient_convergence(config);
        case ExperimentKind::unconditional: return run_unconditional(config);
        case ExperimentKind::conditional: return run_conditional(config);
        case ExperimentKind::routing_verify: return run_routing_verify(config);
    }
    throw std::invalid_argument("unknown experiment kind");
}

void write_output(const ExperimentConfig& config, const std::string& text) {
    if (config.out.empty() || config.out == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream file(config.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open output file " + config.out);
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    file.flush();
    if (!file) throw std::runtime_error("failed writing output file " + config.out);
}

}  // namespace lsmc
