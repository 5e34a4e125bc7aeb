#include "lsmc/proposals.hpp"

#include <algorithm>
#include <stdexcept>

#include "lsmc/util.hpp"

namespace lsmc {
namespace {

// distance test for "is candidate a neighbor of y under this system"
bool in_neighborhood(const Neighborhood& nbhd, const SolutionVector& y,
                     const SolutionVector& candidate) {
    const int h = hamming_distance(y, candidate);
    switch (nbhd.kind) {
        case Neighborhood::Kind::hamming_ball:
            return h >= 1 && h <= nbhd.radius;
        case Neighborhood::Kind::hamming_shell:
            return h == nbhd.radius;
        case Neighborhood::Kind::swap:
            // both vectors have k ones, so h is even and h/2 positions swapped
            return h == 2 * nbhd.radius;
    }
    return false;
}

class UniformNeighborProposal final : public ProposalKernel {
  public:
    UniformNeighborProposal(const Space& space, const Neighborhood& nbhd)
        : space_(space), nbhd_(nbhd) {
        validate(space, nbhd);
        degree_ = static_cast<double>(lsmc::degree(space, nbhd));
    }

    SolutionVector draw(const SolutionVector& y, Rng& rng) const override {
        return random_neighbor(space_, nbhd_, y, rng);
    }

    double density(const SolutionVector& y, const SolutionVector& candidate) const override {
        if (!space_.contains(candidate)) return 0.0;
        if (!in_neighborhood(nbhd_, y, candidate)) return 0.0;
        return 1.0 / degree_;
    }

    SupportKind support() const override { return SupportKind::neighbors_only; }
    const Space& space() const override { return space_; }
    const Neighborhood& neighborhood() const override { return nbhd_; }

    void visit_support(const SolutionVector& y,
                       const std::function<void(const SolutionVector&, double)>& fn) const override {
        const double q = 1.0 / degree_;
        for_each_neighbor(space_, nbhd_, y, [&](const SolutionVector& n) { fn(n, q); });
    }

  private:
    Space space_;
    Neighborhood nbhd_;
    double degree_;
};

class LazyUniformProposal final : public ProposalKernel {
  public:
    LazyUniformProposal(const Space& space, const Neighborhood& nbhd)
        : space_(space), nbhd_(nbhd) {
        validate(space, nbhd);
        max_degree_ = static_cast<double>(lsmc::degree(space, nbhd));
    }

    SolutionVector draw(const SolutionVector& y, Rng& rng) const override {
        // regular graph: move probability d(y)/(2 d*) = 1/2
        if (rng.bernoulli(0.5)) return random_neighbor(space_, nbhd_, y, rng);
        return y;
    }

    double density(const SolutionVector& y, const SolutionVector& candidate) const override {
        if (!space_.contains(candidate)) return 0.0;
        if (candidate == y) return 0.5;
        if (!in_neighborhood(nbhd_, y, candidate)) return 0.0;
        return 1.0 / (2.0 * max_degree_);
    }

    SupportKind support() const override { return SupportKind::neighbors_plus_self; }
    const Space& space() const override { return space_; }
    const Neighborhood& neighborhood() const override { return nbhd_; }

    void visit_support(const SolutionVector& y,
                       const std::function<void(const SolutionVector&, double)>& fn) const override {
        const double q = 1.0 / (2.0 * max_degree_);
        for_each_neighbor(space_, nbhd_, y, [&](const SolutionVector& n) { fn(n, q); });
    }

  private:
    Space space_;
    Neighborhood nbhd_;
    double max_degree_;
};

}  // namespace

std::unique_ptr<ProposalKernel> uniform_neighbor_proposal(const Space& space,
                                                          const Neighborhood& nbhd) {
    return std::make_unique<UniformNeighborProposal>(space, nbhd);
}

std::unique_ptr<ProposalKernel> lazy_uniform_proposal(const Space& space,
                                                      const Neighborhood& nbhd) {
    return std::make_unique<LazyUniformProposal>(space, nbhd);
}

MixtureProposal MixtureProposal::over(std::vector<std::shared_ptr<ProposalKernel>> members) {
    if (members.empty()) throw std::invalid_argument("mixture needs at least one member");
    MixtureProposal mix;
    mix.members = std::move(members);
    return mix;
}

std::vector<int> MixtureProposal::applicable_members(const SolutionVector& y) const {
    if (applicable) {
        auto q = applicable(y);
        if (q.empty()) throw std::domain_error("no applicable mixture member at this state");
        return q;
    }
    std::vector<int> all(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

std::pair<int, SolutionVector> mixture_draw(const MixtureProposal& mix, const SolutionVector& y,
                                            Rng& rng) {
    const auto q = mix.applicable_members(y);
    const int s = q[static_cast<std::size_t>(rng.index(static_cast<int>(q.size())))];
    return {s, mix.members[static_cast<std::size_t>(s)]->draw(y, rng)};
}

double mixture_correction(const MixtureProposal& mix, int member, const SolutionVector& y,
                          const SolutionVector& candidate) {
    const auto& kernel = *mix.members.at(static_cast<std::size_t>(member));
    const double fwd = kernel.density(y, candidate);
    if (fwd <= 0.0) throw std::domain_error("mixture_correction: candidate off member support");
    const double rev = kernel.density(candidate, y);
    const double size_y = static_cast<double>(mix.applicable_members(y).size());
    const double size_c = static_cast<double>(mix.applicable_members(candidate).size());
    return (size_y / size_c) * (rev / fwd);
}

}  // namespace lsmc
