#include "lsmc/fy.hpp"

#include <cmath>
#include <stdexcept>

namespace lsmc {

double hypercube_negentropy(const std::vector<double>& mu, double t) {
    KahanSum s;
    for (double m : mu) {
        if (m < 0.0 || m > 1.0) throw std::domain_error("hypercube_negentropy: mu outside [0,1]");
        if (m > 0.0) s.add(m * std::log(m));
        if (m < 1.0) s.add((1.0 - m) * std::log(1.0 - m));
    }
    return t * s.value();
}

double fy_loss_exact(const Space& space, const GibbsModel& model, const SolutionVector& y) {
    double loss = cumulant(space, model) - score(model, y);
    if (space.kind == Space::Kind::hypercube && model.phi.is_zero())
        loss += hypercube_negentropy(y, model.t);
    return loss;
}

std::vector<double> fy_gradient_exact(const Space& space, const GibbsModel& model,
                                      const SolutionVector& y) {
    std::vector<double> g = marginal(space, model);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= y[i];
    return g;
}

namespace {

GradientEstimate finish_estimate(RunResult&& res, const SolutionVector& y_target,
                                 const ChainConfig& config) {
    GradientEstimate out;
    out.estimate = std::move(res.estimate);
    out.grad.resize(out.estimate.size());
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] = out.estimate[i] - y_target[i];
    out.meta.iterations = config.iterations;
    out.meta.chains = config.chains;
    out.meta.acceptance_rate = res.acceptance_rate;
    return out;
}

void require_corrected(const ChainConfig& config) {
    if (config.mode != AcceptanceMode::mh)
        throw std::invalid_argument(
            "fy_gradient_mcmc: estimator needs the corrected kernel (AcceptanceMode::mh)");
}

}  // namespace

GradientEstimate fy_gradient_mcmc(const GibbsModel& model, const ProposalKernel& proposal,
                                  const ChainConfig& config, const SolutionVector& y_target,
                                  std::uint64_t seed) {
    require_corrected(config);
    return finish_estimate(run(model, proposal, config, seed), y_target, config);
}

GradientEstimate fy_gradient_mcmc(const GibbsModel& model, const MixtureProposal& mix,
                                  const ChainConfig& config, const SolutionVector& y_target,
                                  std::uint64_t seed) {
    require_corrected(config);
    return finish_estimate(run_mixture(model, mix, config, seed), y_target, config);
}

Matrix jacobian_exact(const Space& space, const GibbsModel& model) {
    const auto table = brute_force_distribution(space, model);
    const int d = space.dim;
    const auto mean = table_expectation(table);
    Matrix cov(d, d, 0.0);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            KahanSum s;
            for (std::size_t k = 0; k < table.support.size(); ++k)
                s.add(table.probs[k] * table.support[k][i] * table.support[k][j]);
            const double c = s.value() - mean[i] * mean[j];
            cov(i, j) = c / model.t;
            cov(j, i) = cov(i, j);
        }
    }
    return cov;
}

namespace {

void check_degree_cap(const ProposalKernel& proposal, std::uint64_t degree_cap) {
    if (degree(proposal.space(), proposal.neighborhood()) > degree_cap)
        throw std::length_error("neighbor set too large to enumerate");
}

}  // namespace

std::vector<double> expected_first_iterate(const GibbsModel& model,
                                           const ProposalKernel& proposal,
                                           const SolutionVector& y, std::uint64_t degree_cap) {
    check_degree_cap(proposal, degree_cap);
    const double base = score(model, y);
    const std::size_t d = y.size();
    std::vector<KahanSum> acc(d);
    proposal.visit_support(y, [&](const SolutionVector& cand, double q_fwd) {
        const double q_rev = proposal.density(cand, y);
        const double delta = score(model, cand) - base;
        const double alpha = (q_rev / q_fwd) * std::exp(delta / model.t);
        // transition mass q_fwd * min(1, alpha), written per branch to match
        // the potential below exactly
        const double mass = alpha <= 1.0 ? q_rev * std::exp(delta / model.t) : q_fwd;
        for (std::size_t i = 0; i < d; ++i) acc[i].add(mass * (cand[i] - y[i]));
    });
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = y[i] + acc[i].value();
    return out;
}

double one_step_potential(const GibbsModel& model, const ProposalKernel& proposal,
                          const SolutionVector& y, const std::vector<double>& theta_eval,
                          std::uint64_t degree_cap) {
    check_degree_cap(proposal, degree_cap);
    if (theta_eval.size() != y.size())
        throw std::invalid_argument("one_step_potential: dimension mismatch");
    const double t = model.t;
    const double phi_y = model.phi(y);
    KahanSum total;
    total.add(dot(theta_eval, y));
    proposal.visit_support(y, [&](const SolutionVector& cand, double q_fwd) {
        const double q_rev = proposal.density(cand, y);
        KahanSum w_acc;  // <theta_eval, cand - y> + phi(cand) - phi(y)
        for (std::size_t i = 0; i < y.size(); ++i) w_acc.add(theta_eval[i] * (cand[i] - y[i]));
        w_acc.add(model.phi(cand) - phi_y);
        const double w = w_acc.value();
        const double alpha = (q_rev / q_fwd) * std::exp(w / t);
        if (alpha <= 1.0) {
            total.add(t * q_rev * std::exp(w / t));
        } else {
            total.add(t * q_fwd * (w / t + 1.0 - std::log(q_fwd / q_rev)));
        }
    });
    return total.value();
}

}  // namespace lsmc
