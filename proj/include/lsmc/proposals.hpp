#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"

namespace lsmc {

enum class SupportKind { neighbors_only, neighbors_plus_self };

// A proposal distribution q(y, .) over one neighborhood system. Densities are
// exact (they are fed into Metropolis corrections), and the whole support can
// be visited for oracle computations.
class ProposalKernel {
  public:
    virtual ~ProposalKernel() = default;

    virtual SolutionVector draw(const SolutionVector& y, Rng& rng) const = 0;
    // q(y, candidate); zero off support. q(y, y) is the self mass (lazy kernels).
    virtual double density(const SolutionVector& y, const SolutionVector& candidate) const = 0;
    virtual SupportKind support() const = 0;
    virtual const Space& space() const = 0;
    virtual const Neighborhood& neighborhood() const = 0;
    // visits (candidate, q(y, candidate)) for every neighbor candidate != y
    virtual void visit_support(const SolutionVector& y,
                               const std::function<void(const SolutionVector&, double)>& fn) const = 0;
};

// Uniform over the neighbor set: q(y, y') = 1/|N(y)|. For a Hamming ball this
// draws a radius with probability proportional to the shell size, then a
// uniform flip set of that size, which is exactly uniform over the ball.
std::unique_ptr<ProposalKernel> uniform_neighbor_proposal(const Space& space,
                                                          const Neighborhood& nbhd);

// Lazy variant: q(y, y') = 1/(2 d*) on neighbors and the rest stays put, where
// d* is the maximum degree. These systems are regular, so the self mass is 1/2.
std::unique_ptr<ProposalKernel> lazy_uniform_proposal(const Space& space,
                                                      const Neighborhood& nbhd);

// Uniform-over-members mixture. applicable(y) must return the indices of the
// members usable from y in increasing order; the default accepts all members
// everywhere (the right choice for the built-in spaces).
struct MixtureProposal {
    std::vector<std::shared_ptr<ProposalKernel>> members;
    std::function<std::vector<int>(const SolutionVector&)> applicable;

    static MixtureProposal over(std::vector<std::shared_ptr<ProposalKernel>> members);
    std::vector<int> applicable_members(const SolutionVector& y) const;
};

// Draws s uniformly from applicable(y), then a candidate from member s.
std::pair<int, SolutionVector> mixture_draw(const MixtureProposal& mix, const SolutionVector& y,
                                            Rng& rng);

// Correction factor for the chosen member only:
// (|Q(y)| / |Q(y')|) * q_s(y', y) / q_s(y, y').
double mixture_correction(const MixtureProposal& mix, int member, const SolutionVector& y,
                          const SolutionVector& candidate);

}  // namespace lsmc
