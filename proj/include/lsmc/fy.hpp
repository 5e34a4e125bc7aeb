#pragma once

#include <cstdint>
#include <vector>

#include "lsmc/gibbs.hpp"
#include "lsmc/kernel.hpp"
#include "lsmc/proposals.hpp"
#include "lsmc/spaces.hpp"
#include "lsmc/util.hpp"

namespace lsmc {

struct EstimatorMeta {
    std::int64_t iterations = 0;
    int chains = 0;
    double acceptance_rate = 0.0;
};

// Sampled loss gradient: grad = estimate - target, where estimate is the layer
// output (a chain mean, hence a point of the marginal polytope).
struct GradientEstimate {
    std::vector<double> grad;
    std::vector<double> estimate;
    EstimatorMeta meta;
};

// t * sum_i [mu_i log mu_i + (1 - mu_i) log(1 - mu_i)], with 0 log 0 = 0.
// The convex conjugate of the per-coordinate hypercube cumulant; vanishes at
// binary vertices.
double hypercube_negentropy(const std::vector<double>& mu, double t);

// cumulant - <theta,y> - phi(y), plus the negentropy constant on the hypercube
// with no structural term. Elsewhere the constant is unknown and the value is
// meaningful up to an additive shift (differences and gradients are exact).
double fy_loss_exact(const Space& space, const GibbsModel& model, const SolutionVector& y);

// marginal(theta) - y
std::vector<double> fy_gradient_exact(const Space& space, const GibbsModel& model,
                                      const SolutionVector& y);

// Chain-mean estimator of the loss gradient. Requires corrected acceptance
// (AcceptanceMode::mh) so the chain mean targets the exact marginal.
GradientEstimate fy_gradient_mcmc(const GibbsModel& model, const ProposalKernel& proposal,
                                  const ChainConfig& config, const SolutionVector& y_target,
                                  std::uint64_t seed);
GradientEstimate fy_gradient_mcmc(const GibbsModel& model, const MixtureProposal& mix,
                                  const ChainConfig& config, const SolutionVector& y_target,
                                  std::uint64_t seed);

// (1/t) * Cov[Y] under the exact distribution; the derivative of the marginal
// map in theta. Symmetric positive semidefinite by construction.
Matrix jacobian_exact(const Space& space, const GibbsModel& model);

// Exact expectation of the first chain iterate started at y:
//   y + sum_{alpha <= 1} q(y',y) e^{dscore/t} (y'-y) + sum_{alpha > 1} q(y,y') (y'-y),
// where alpha = [q(y',y)/q(y,y')] e^{dscore/t} and dscore = score(y') - score(y).
// Throws std::length_error when the neighbor set exceeds the enumeration cap.
std::vector<double> expected_first_iterate(const GibbsModel& model,
                                           const ProposalKernel& proposal,
                                           const SolutionVector& y,
                                           std::uint64_t degree_cap = 100000);

// Convex potential whose theta-gradient is expected_first_iterate:
//   F_y(theta) = <theta,y> + sum_{y' in N(y)} f(theta; y'), with
//   f = t q(y',y) e^{w/t}                      when alpha <= 1,
//   f = t q(y,y') [w/t + 1 - log(q(y,y')/q(y',y))]  when alpha > 1,
// and w = <theta, y'-y> + phi(y') - phi(y). The model supplies t and phi; the
// evaluation point is theta_eval.
double one_step_potential(const GibbsModel& model, const ProposalKernel& proposal,
                          const SolutionVector& y, const std::vector<double>& theta_eval,
                          std::uint64_t degree_cap = 100000);

}  // namespace lsmc
