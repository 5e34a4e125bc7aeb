#include "lsmc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace lsmc {
namespace {

std::uint64_t key_of(const SolutionVector& y) {
    std::uint64_t k = 0;
    for (double v : y) k = (k << 1) | (v == 1.0 ? 1u : 0u);
    return k;
}

std::unordered_map<std::uint64_t, std::size_t> index_states(const std::vector<SolutionVector>& all) {
    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) index.emplace(key_of(all[i]), i);
    return index;
}

void validate_config(const ChainConfig& config) {
    if (config.iterations < 1) throw std::invalid_argument("chain needs at least one iteration");
    if (config.burn_in < 0 || config.burn_in >= config.iterations)
        throw std::invalid_argument("burn-in must lie in [0, iterations)");
    if (config.chains < 1) throw std::invalid_argument("need at least one chain");
    if (!config.init) throw std::invalid_argument("chain config has no init");
}

}  // namespace

TemperatureSchedule TemperatureSchedule::constant(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
    return TemperatureSchedule{Kind::constant, t, 1.0, t};
}

TemperatureSchedule TemperatureSchedule::geometric_truncated(double t0, double gamma,
                                                             double t_min) {
    if (!(t0 > 0.0) || !(t_min > 0.0)) throw std::invalid_argument("temperatures must be positive");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must lie in (0, 1]");
    return TemperatureSchedule{Kind::geometric_truncated, t0, gamma, t_min};
}

double TemperatureSchedule::at(std::int64_t k) const {
    if (k < 0) throw std::invalid_argument("schedule index must be >= 0");
    if (kind == Kind::constant) return t0;
    return std::max(t0 * std::pow(gamma, static_cast<double>(k)), t_min);
}

double acceptance_probability(double alpha, double delta, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
    return alpha * std::exp(delta / t);
}

bool step_chain(SolutionVector& y, const GibbsModel& model, const ProposalKernel& proposal,
                double t_k, AcceptanceMode mode, Rng& rng) {
    const SolutionVector candidate = proposal.draw(y, rng);
    double alpha = 1.0;
    if (mode == AcceptanceMode::mh && candidate != y) {
        const double fwd = proposal.density(y, candidate);
        const double rev = proposal.density(candidate, y);
        alpha = rev / fwd;
    }
    const double delta = score(model, candidate) - score(model, y);
    const double p = acceptance_probability(alpha, delta, t_k);
    const double u = rng.uniform();  // always drawn, keeps streams aligned across settings
    if (u <= p) {
        y = candidate;
        return true;
    }
    return false;
}

bool step_chain_mixture(SolutionVector& y, const GibbsModel& model, const MixtureProposal& mix,
                        double t_k, Rng& rng) {
    const auto applicable = mix.applicable_members(y);
    // |Q| == 1 consumes no member draw, so single-member mixtures stay
    // stream-identical to a plain step
    const int s = applicable[static_cast<std::size_t>(rng.index(static_cast<int>(applicable.size())))];
    const SolutionVector candidate = mix.members[static_cast<std::size_t>(s)]->draw(y, rng);
    double alpha = 1.0;
    if (candidate != y) alpha = mixture_correction(mix, s, y, candidate);
    const double delta = score(model, candidate) - score(model, y);
    const double p = acceptance_probability(alpha, delta, t_k);
    const double u = rng.uniform();
    if (u <= p) {
        y = candidate;
        return true;
    }
    return false;
}

namespace {

// shared driver: stepper(y, t_k, rng) performs one transition and reports acceptance
RunResult run_impl(const GibbsModel& model, const ChainConfig& config, std::uint64_t seed,
                   const std::function<bool(SolutionVector&, double, Rng&)>& stepper) {
    validate_config(config);
    RunResult result;
    result.final_states.reserve(static_cast<std::size_t>(config.chains));
    std::vector<double> pooled_sum;
    std::int64_t accepted = 0;
    double best_final_score = 0.0;
    const Rng root(seed);
    for (int c = 0; c < config.chains; ++c) {
        Rng rng = root.derive(static_cast<std::uint64_t>(c));
        SolutionVector y = config.init(c, rng);
        if (pooled_sum.empty()) pooled_sum.assign(y.size(), 0.0);
        for (std::int64_t k = 1; k <= config.iterations; ++k) {
            const double t_k = config.schedule.at(k - 1);
            const bool acc = stepper(y, t_k, rng);
            accepted += acc;
            if (k > config.burn_in)
                for (std::size_t i = 0; i < y.size(); ++i) pooled_sum[i] += y[i];
            if (config.on_iterate) config.on_iterate(c, k, y, acc);
        }
        const double final_score = score(model, y);
        if (c == 0 || final_score > best_final_score) {
            best_final_score = final_score;
            if (config.mode == AcceptanceMode::sa) result.estimate = y;
        }
        result.final_states.push_back(std::move(y));
    }
    result.total_transitions = static_cast<std::int64_t>(config.chains) * config.iterations;
    result.acceptance_rate =
        static_cast<double>(accepted) / static_cast<double>(result.total_transitions);
    if (config.mode == AcceptanceMode::mh) {
        const double n = static_cast<double>(config.chains) *
                         static_cast<double>(config.iterations - config.burn_in);
        result.estimate = pooled_sum;
        for (double& v : result.estimate) v /= n;
    }
    return result;
}

}  // namespace

RunResult run(const GibbsModel& model, const ProposalKernel& proposal, const ChainConfig& config,
              std::uint64_t seed) {
    return run_impl(model, config, seed, [&](SolutionVector& y, double t_k, Rng& rng) {
        return step_chain(y, model, proposal, t_k, config.mode, rng);
    });
}

RunResult run_mixture(const GibbsModel& model, const MixtureProposal& mix,
                      const ChainConfig& config, std::uint64_t seed) {
    if (config.schedule.kind != TemperatureSchedule::Kind::constant)
        throw std::invalid_argument("mixture chains require a constant temperature");
    return run_impl(model, config, seed, [&](SolutionVector& y, double t_k, Rng& rng) {
        return step_chain_mixture(y, model, mix, t_k, rng);
    });
}

Matrix kernel_matrix(const Space& space, const GibbsModel& model, const ProposalKernel& proposal,
                     double t) {
    const auto all = enumerate_space(space);
    const auto index = index_states(all);
    Matrix p(all.size(), all.size(), 0.0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const double score_i = score(model, all[i]);
        double off_diag = 0.0;
        proposal.visit_support(all[i], [&](const SolutionVector& cand, double fwd) {
            const auto it = index.find(key_of(cand));
            if (it == index.end()) throw std::logic_error("proposal left the space");
            const double rev = proposal.density(cand, all[i]);
            const double delta = score(model, cand) - score_i;
            const double accept = std::min(1.0, acceptance_probability(rev / fwd, delta, t));
            p(i, it->second) += fwd * accept;
            off_diag += fwd * accept;
        });
        p(i, i) = std::max(0.0, 1.0 - off_diag);
    }
    return p;
}

Matrix kernel_matrix(const Space& space, const GibbsModel& model, const MixtureProposal& mix,
                     double t) {
    const auto all = enumerate_space(space);
    const auto index = index_states(all);
    Matrix p(all.size(), all.size(), 0.0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const double score_i = score(model, all[i]);
        const auto applicable = mix.applicable_members(all[i]);
        const double q_size = static_cast<double>(applicable.size());
        double off_diag = 0.0;
        for (int s : applicable) {
            mix.members[static_cast<std::size_t>(s)]->visit_support(
                all[i], [&](const SolutionVector& cand, double fwd) {
                    const auto it = index.find(key_of(cand));
                    if (it == index.end()) throw std::logic_error("proposal left the space");
                    const double alpha = mixture_correction(mix, s, all[i], cand);
                    const double delta = score(model, cand) - score_i;
                    const double accept = std::min(1.0, acceptance_probability(alpha, delta, t));
                    p(i, it->second) += (fwd / q_size) * accept;
                    off_diag += (fwd / q_size) * accept;
                });
        }
        p(i, i) = std::max(0.0, 1.0 - off_diag);
    }
    return p;
}

std::vector<double> stationary_of(const Matrix& transition) {
    const std::size_t n = transition.rows();
    if (n == 0 || transition.cols() != n)
        throw std::invalid_argument("stationary_of: matrix must be square and nonempty");
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    std::vector<double> xp(n, 0.0);
    constexpr double kTol = 1e-12;
    constexpr std::int64_t kMaxSweeps = 1000000;
    double residual = 0.0;
    for (std::int64_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        std::fill(xp.begin(), xp.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) xp[j] += xi * transition(i, j);
        }
        residual = 0.0;
        for (std::size_t j = 0; j < n; ++j) residual = std::max(residual, std::abs(xp[j] - x[j]));
        // half step sidesteps period-2 behavior without moving the fixed point
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            x[j] = 0.5 * (x[j] + xp[j]);
            total += x[j];
        }
        for (std::size_t j = 0; j < n; ++j) x[j] /= total;
        if (residual < kTol) return x;
    }
    throw std::runtime_error("stationary_of: no convergence after 1e6 sweeps, residual " +
                             format_double(residual));
}

double detailed_balance_gap(const Matrix& transition, const std::vector<double>& pi) {
    const std::size_t n = transition.rows();
    if (pi.size() != n) throw std::invalid_argument("detailed_balance_gap: size mismatch");
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            gap = std::max(gap, std::abs(pi[i] * transition(i, j) - pi[j] * transition(j, i)));
    return gap;
}

}  // namespace lsmc
