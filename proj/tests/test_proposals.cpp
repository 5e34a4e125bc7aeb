#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lsmc/proposals.hpp"
#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"

using namespace lsmc;

namespace {

SolutionVector vec(std::initializer_list<double> xs) { return SolutionVector(xs); }

int parity(const SolutionVector& y) {
    int c = 0;
    for (double v : y) c += v == 1.0 ? 1 : 0;
    return c % 2;
}

}  // namespace

TEST_SUITE("proposals") {

TEST_CASE("uniform proposal: density is 1/degree on the neighbor set, zero elsewhere") {
    const Space h4 = Space::hypercube(4);
    const auto prop = uniform_neighbor_proposal(h4, Neighborhood::hamming_ball(2));
    CHECK(prop->support() == SupportKind::neighbors_only);
    CHECK(prop->space().dim == 4);
    CHECK(prop->neighborhood().radius == 2);

    const SolutionVector y = vec({0, 0, 0, 0});
    CHECK(prop->density(y, vec({1, 0, 0, 0})) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(prop->density(y, vec({1, 1, 0, 0})) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(prop->density(y, vec({1, 1, 1, 0})) == 0.0);  // distance 3 > radius
    CHECK(prop->density(y, y) == 0.0);                  // no self mass

    const auto sw = uniform_neighbor_proposal(Space::topk(4, 2), Neighborhood::swap(1));
    const SolutionVector z = vec({1, 1, 0, 0});
    CHECK(sw->density(z, vec({1, 0, 1, 0})) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(sw->density(z, vec({0, 0, 1, 1})) == 0.0);    // distance 4: two swaps away
    CHECK(sw->density(z, vec({1, 1, 1, 0})) == 0.0);    // not in the space
}

TEST_CASE("uniform proposal: visit_support covers the neighbor set and sums to one") {
    const Space t = Space::topk(5, 2);
    const auto prop = uniform_neighbor_proposal(t, Neighborhood::swap(1));
    const SolutionVector y = vec({0, 1, 0, 1, 0});
    int count = 0;
    double total = 0.0;
    prop->visit_support(y, [&](const SolutionVector& cand, double q) {
        CHECK(q == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
        CHECK(prop->density(y, cand) == doctest::Approx(q).epsilon(1e-15));
        ++count;
        total += q;
    });
    CHECK(count == 6);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("uniform proposal draws match their densities") {
    const Space h3 = Space::hypercube(3);
    const auto prop = uniform_neighbor_proposal(h3, Neighborhood::hamming_ball(2));
    const SolutionVector y = vec({0, 1, 0});
    std::map<SolutionVector, int> counts;
    Rng rng(404);
    const int n = 60000;
    for (int i = 0; i < n; ++i) counts[prop->draw(y, rng)] += 1;
    CHECK(counts.size() == 6);
    for (const auto& [cand, c] : counts) {
        const double q = prop->density(y, cand);
        REQUIRE(q > 0.0);
        const double tol = 4.0 * std::sqrt(q * (1 - q) / n);
        CHECK(std::abs(static_cast<double>(c) / n - q) < tol);
    }
}

TEST_CASE("lazy proposal: half the mass stays put, the rest is uniform") {
    const Space h3 = Space::hypercube(3);
    const auto prop = lazy_uniform_proposal(h3, Neighborhood::hamming_ball(1));
    CHECK(prop->support() == SupportKind::neighbors_plus_self);

    const SolutionVector y = vec({1, 0, 1});
    CHECK(prop->density(y, y) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(prop->density(y, vec({0, 0, 1})) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(prop->density(y, vec({0, 1, 0})) == 0.0);  // distance 2

    int count = 0;
    double total = 0.0;
    prop->visit_support(y, [&](const SolutionVector& cand, double q) {
        CHECK(cand != y);  // self mass is reported by density, not the visitor
        total += q;
        ++count;
    });
    CHECK(count == 3);
    CHECK(total + prop->density(y, y) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lazy proposal draws: self frequency one half, neighbors uniform") {
    const Space h3 = Space::hypercube(3);
    const auto prop = lazy_uniform_proposal(h3, Neighborhood::hamming_ball(1));
    const SolutionVector y = vec({0, 0, 0});
    Rng rng(505);
    const int n = 100000;
    std::map<SolutionVector, int> counts;
    for (int i = 0; i < n; ++i) counts[prop->draw(y, rng)] += 1;
    const double self_freq = static_cast<double>(counts[y]) / n;
    CHECK(std::abs(self_freq - 0.5) < 4.0 * std::sqrt(0.25 / n));
    for (const auto& [cand, c] : counts) {
        if (cand == y) continue;
        const double q = 1.0 / 6.0;
        CHECK(std::abs(static_cast<double>(c) / n - q) < 4.0 * std::sqrt(q * (1 - q) / n));
    }
}

TEST_CASE("mixture: default applicability lists every member") {
    const Space h3 = Space::hypercube(3);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(1)));
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(3)));
    const auto mix = MixtureProposal::over(std::move(members));
    CHECK(mix.applicable_members(vec({0, 0, 0})) == std::vector<int>{0, 1});
}

TEST_CASE("mixture draws: uniform member pick, overall candidate frequencies") {
    const Space h3 = Space::hypercube(3);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(1)));
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(3)));
    const auto mix = MixtureProposal::over(std::move(members));

    const SolutionVector y = vec({0, 0, 0});
    Rng rng(606);
    const int n = 100000;
    int member1 = 0;
    std::map<SolutionVector, int> counts;
    for (int i = 0; i < n; ++i) {
        auto [s, cand] = mixture_draw(mix, y, rng);
        if (s == 1) {
            ++member1;
            CHECK(cand == vec({1, 1, 1}));  // the only full flip
        } else {
            CHECK(hamming_distance(y, cand) == 1);
        }
        counts[cand] += 1;
    }
    CHECK(std::abs(static_cast<double>(member1) / n - 0.5) < 4.0 * std::sqrt(0.25 / n));
    // overall: antipode 1/2, each single flip 1/6
    const double q1 = 1.0 / 6.0;
    for (const auto& [cand, c] : counts) {
        const double q = cand == vec({1, 1, 1}) ? 0.5 : q1;
        CHECK(std::abs(static_cast<double>(c) / n - q) < 4.0 * std::sqrt(q * (1 - q) / n));
    }
}

TEST_CASE("mixture correction: symmetric members with constant applicability give one") {
    const Space t = Space::topk(5, 2);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(t, Neighborhood::swap(1)));
    members.push_back(uniform_neighbor_proposal(t, Neighborhood::swap(2)));
    const auto mix = MixtureProposal::over(std::move(members));
    const SolutionVector y = vec({1, 1, 0, 0, 0});
    CHECK(mixture_correction(mix, 0, y, vec({1, 0, 1, 0, 0})) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mixture_correction(mix, 1, y, vec({0, 0, 1, 1, 0})) ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mixture correction: applicability-set sizes enter as |Q(y)|/|Q(y')|") {
    const Space h3 = Space::hypercube(3);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(1)));
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(2)));
    MixtureProposal mix = MixtureProposal::over(std::move(members));
    // member 1 only applies from odd-parity states; member 0 applies everywhere
    mix.applicable = [](const SolutionVector& y) {
        return parity(y) == 1 ? std::vector<int>{0, 1} : std::vector<int>{0};
    };

    const SolutionVector even = vec({0, 0, 0});
    const SolutionVector odd = vec({0, 0, 1});
    // densities are symmetric, so only the set sizes remain
    CHECK(mixture_correction(mix, 0, even, odd) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mixture_correction(mix, 0, odd, even) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("mixture errors: empty applicability and off-support corrections throw") {
    const Space h3 = Space::hypercube(3);
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(h3, Neighborhood::hamming_shell(1)));
    MixtureProposal mix = MixtureProposal::over(std::move(members));

    CHECK_THROWS_AS(mixture_correction(mix, 0, vec({0, 0, 0}), vec({1, 1, 0})),
                    std::domain_error);  // distance 2 is off member 0's support

    mix.applicable = [](const SolutionVector&) { return std::vector<int>{}; };
    Rng rng(7);
    CHECK_THROWS_AS(mixture_draw(mix, vec({0, 0, 0}), rng), std::domain_error);
}

}  // TEST_SUITE
