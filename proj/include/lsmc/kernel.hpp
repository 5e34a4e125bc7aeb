#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lsmc/gibbs.hpp"
#include "lsmc/proposals.hpp"
#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"
#include "lsmc/util.hpp"

namespace lsmc {

struct TemperatureSchedule {
    enum class Kind { constant, geometric_truncated };

    Kind kind = Kind::constant;
    double t0 = 1.0;
    double gamma = 1.0;
    double t_min = 1.0;

    static TemperatureSchedule constant(double t);
    // t_k = max(gamma^k * t0, t_min)
    static TemperatureSchedule geometric_truncated(double t0, double gamma, double t_min);
    double at(std::int64_t k) const;
};

// sa accepts on score alone (alpha = 1); mh applies the proposal-ratio
// correction alpha = q(y', y) / q(y, y').
enum class AcceptanceMode { sa, mh };

struct ChainConfig {
    AcceptanceMode mode = AcceptanceMode::mh;
    std::int64_t iterations = 1000;  // K transitions per chain
    std::int64_t burn_in = 0;        // iterates 1..burn_in are dropped from the mean
    int chains = 1;
    TemperatureSchedule schedule = TemperatureSchedule::constant(1.0);
    // starting state per chain; the rng passed in is that chain's own stream
    std::function<SolutionVector(int chain, Rng& rng)> init;
    // optional observer, called once per transition with the new iterate
    std::function<void(int chain, std::int64_t k, const SolutionVector& y, bool accepted)>
        on_iterate;
};

struct RunResult {
    // mh: mean of post-burn-in iterates pooled over chains;
    // sa: final iterate of the best-scoring chain
    std::vector<double> estimate;
    std::vector<SolutionVector> final_states;  // one per chain
    double acceptance_rate = 0.0;
    std::int64_t total_transitions = 0;
};

// alpha * exp(delta / t); may exceed 1, callers compare a uniform draw against it
double acceptance_probability(double alpha, double delta, double t);

// One transition in place. The uniform draw happens even when acceptance is
// certain so that runs with different parameters stay stream-aligned.
bool step_chain(SolutionVector& y, const GibbsModel& model, const ProposalKernel& proposal,
                double t_k, AcceptanceMode mode, Rng& rng);

// One mixture transition (Q(y)-uniform member, single-member correction).
bool step_chain_mixture(SolutionVector& y, const GibbsModel& model, const MixtureProposal& mix,
                        double t_k, Rng& rng);

// Runs config.chains independent chains; chain c draws from Rng(seed).derive(c).
RunResult run(const GibbsModel& model, const ProposalKernel& proposal, const ChainConfig& config,
              std::uint64_t seed);

// Mixture variant; requires a constant temperature schedule.
RunResult run_mixture(const GibbsModel& model, const MixtureProposal& mix,
                      const ChainConfig& config, std::uint64_t seed);

// Exact transition matrix over the enumerated space (rows/cols in enumeration
// order): P(y,y') = q(y,y') min(1, [q(y',y)/q(y,y')] e^{dscore/t}) off-diagonal,
// diagonal takes the remaining mass.
Matrix kernel_matrix(const Space& space, const GibbsModel& model, const ProposalKernel& proposal,
                     double t);
Matrix kernel_matrix(const Space& space, const GibbsModel& model, const MixtureProposal& mix,
                     double t);

// Left fixed point by damped power iteration to 1e-12 infinity-norm residual;
// throws std::runtime_error reporting the residual if 1e6 sweeps do not converge.
std::vector<double> stationary_of(const Matrix& transition);

// max over pairs of |pi_i P_ij - pi_j P_ji|
double detailed_balance_gap(const Matrix& transition, const std::vector<double>& pi);

}  // namespace lsmc
