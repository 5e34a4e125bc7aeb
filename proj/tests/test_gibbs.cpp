#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lsmc/gibbs.hpp"
#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"
#include "lsmc/util.hpp"

using namespace lsmc;

namespace {

SolutionVector vec(std::initializer_list<double> xs) { return SolutionVector(xs); }

std::vector<double> random_theta(int d, Rng& rng, double scale = 2.0) {
    std::vector<double> th(d);
    for (auto& x : th) x = scale * rng.normal();
    return th;
}

// slow reference: direct enumeration with naive accumulation, written
// independently of the library's brute-force path
double reference_cumulant(const Space& space, const GibbsModel& m) {
    std::vector<double> scaled;
    for (const auto& y : enumerate_space(space)) scaled.push_back(score(m, y) / m.t);
    return m.t * log_sum_exp(scaled);
}

std::vector<double> reference_marginal(const Space& space, const GibbsModel& m) {
    const double logz = reference_cumulant(space, m) / m.t;
    std::vector<double> out(space.dim, 0.0);
    for (const auto& y : enumerate_space(space)) {
        const double p = std::exp(score(m, y) / m.t - logz);
        for (int i = 0; i < space.dim; ++i) out[i] += p * y[i];
    }
    return out;
}

}  // namespace

TEST_SUITE("gibbs") {

TEST_CASE("score adds the structural term") {
    const GibbsModel plain{{1.0, 2.0}, 1.0, StructuralTerm::zero()};
    CHECK(score(plain, vec({1, 0})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(score(plain, vec({1, 1})) == doctest::Approx(3.0).epsilon(1e-15));

    const GibbsModel costed{{1.0, 2.0}, 1.0, StructuralTerm::linear_cost({0.5, 2.5})};
    CHECK(score(costed, vec({1, 0})) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(score(costed, vec({0, 1})) == doctest::Approx(-0.5).epsilon(1e-15));

    const GibbsModel tabbed{{0.0, 0.0}, 1.0,
                            StructuralTerm::callback([](const SolutionVector& y) {
                                return y[0] == 1.0 && y[1] == 1.0 ? 7.0 : 0.0;
                            })};
    CHECK(score(tabbed, vec({1, 1})) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(score(tabbed, vec({1, 0})) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cumulant: hand literals on the hypercube") {
    CHECK(cumulant(Space::hypercube(2), {{0.0, 0.0}, 1.0, StructuralTerm::zero()}) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(cumulant(Space::hypercube(1), {{std::log(3.0)}, 1.0, StructuralTerm::zero()}) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(cumulant(Space::hypercube(2), {{1.0, -1.0}, 1.0, StructuralTerm::zero()}) ==
          doctest::Approx(softplus(1.0) + softplus(-1.0)).epsilon(1e-15));
    // temperature enters as t * A_1(theta / t)
    CHECK(cumulant(Space::hypercube(1), {{3.0}, 2.0, StructuralTerm::zero()}) ==
          doctest::Approx(2.0 * softplus(1.5)).epsilon(1e-15));
}

TEST_CASE("cumulant: hand literals on fixed-ones spaces") {
    CHECK(cumulant(Space::topk(2, 1), {{0.0, 0.0}, 1.0, StructuralTerm::zero()}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // support of TopK(3,2): scores 1+2, 1+3, 2+3
    const double want = std::log(std::exp(3.0) + std::exp(4.0) + std::exp(5.0));
    CHECK(cumulant(Space::topk(3, 2), {{1.0, 2.0, 3.0}, 1.0, StructuralTerm::zero()}) ==
          doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("cumulant closed forms agree with enumeration to 1e-12") {
    Rng rng(11);
    for (double t : {0.5, 1.0, 3.0}) {
        const GibbsModel mh{random_theta(6, rng), t, StructuralTerm::zero()};
        CHECK(cumulant(Space::hypercube(6), mh) ==
              doctest::Approx(reference_cumulant(Space::hypercube(6), mh)).epsilon(1e-13));
    }
    for (auto [d, k] : std::vector<std::pair<int, int>>{{5, 1}, {5, 4}, {8, 3}, {10, 5}}) {
        for (double t : {0.5, 1.0, 3.0}) {
            const GibbsModel mt{random_theta(d, rng), t, StructuralTerm::zero()};
            const Space space = Space::topk(d, k);
            CHECK(cumulant(space, mt) ==
                  doctest::Approx(reference_cumulant(space, mt)).epsilon(1e-13));
        }
    }
}

TEST_CASE("marginal: closed form, normalization, finite-difference consistency") {
    Rng rng(12);
    const Space h5 = Space::hypercube(5);
    const GibbsModel m{random_theta(5, rng), 1.7, StructuralTerm::zero()};
    const auto marg = marginal(h5, m);
    const auto ref = reference_marginal(h5, m);
    for (int i = 0; i < 5; ++i) {
        CHECK(marg[i] == doctest::Approx(sigmoid(m.theta[i] / m.t)).epsilon(1e-14));
        CHECK(marg[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }

    // marginal is the theta-gradient of the cumulant
    const double eps = 1e-6;
    for (int i = 0; i < 5; ++i) {
        GibbsModel up = m, dn = m;
        up.theta[i] += eps;
        dn.theta[i] -= eps;
        const double fd = (cumulant(h5, up) - cumulant(h5, dn)) / (2 * eps);
        CHECK(marg[i] == doctest::Approx(fd).epsilon(1e-8));
    }
}

TEST_CASE("marginal on fixed-ones spaces: DP vs enumeration, sums to k") {
    Rng rng(13);
    for (auto [d, k] : std::vector<std::pair<int, int>>{{4, 2}, {7, 3}, {9, 8}, {10, 1}}) {
        const Space space = Space::topk(d, k);
        const GibbsModel m{random_theta(d, rng), 0.8, StructuralTerm::zero()};
        const auto marg = marginal(space, m);
        const auto ref = reference_marginal(space, m);
        KahanSum total;
        for (int i = 0; i < d; ++i) {
            CHECK(std::abs(marg[i] - ref[i]) < 1e-12);
            total.add(marg[i]);
        }
        CHECK(total.value() == doctest::Approx(static_cast<double>(k)).epsilon(1e-12));

        const double eps = 1e-6;
        for (int i = 0; i < d; ++i) {
            GibbsModel up = m, dn = m;
            up.theta[i] += eps;
            dn.theta[i] -= eps;
            const double fd = (cumulant(space, up) - cumulant(space, dn)) / (2 * eps);
            CHECK(marg[i] == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("sample_exact on the hypercube matches the marginal frequencies") {
    const Space h3 = Space::hypercube(3);
    const GibbsModel m{{0.5, -0.3, 1.1}, 1.3, StructuralTerm::zero()};
    const auto marg = marginal(h3, m);
    Rng rng(314);
    const int n = 200000;
    std::vector<double> freq(3, 0.0);
    for (int s = 0; s < n; ++s) {
        const auto y = sample_exact(h3, m, rng);
        REQUIRE(h3.contains(y));
        for (int i = 0; i < 3; ++i) freq[i] += y[i];
    }
    for (int i = 0; i < 3; ++i) {
        const double p = marg[i];
        const double tol = 4.0 * std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(freq[i] / n - p) < tol);
    }
}

TEST_CASE("sample_exact on fixed-ones spaces matches the exact distribution") {
    const Space t52 = Space::topk(5, 2);
    const GibbsModel m{{0.9, -0.4, 0.1, 1.3, -0.8}, 1.0, StructuralTerm::zero()};
    const auto table = brute_force_distribution(t52, m);
    std::map<std::vector<double>, double> want;
    for (std::size_t i = 0; i < table.support.size(); ++i) want[table.support[i]] = table.probs[i];

    Rng rng(2718);
    const int n = 200000;
    std::map<std::vector<double>, int> counts;
    for (int s = 0; s < n; ++s) {
        const auto y = sample_exact(t52, m, rng);
        REQUIRE(t52.contains(y));  // exactly two ones
        counts[y] += 1;
    }
    for (const auto& [y, p] : want) {
        const double freq = static_cast<double>(counts[y]) / n;
        const double tol = 4.0 * std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(freq - p) < tol);
    }
}

TEST_CASE("sample_exact refuses structural terms") {
    const GibbsModel m{{0.0, 0.0}, 1.0,
                       StructuralTerm::callback([](const SolutionVector&) { return 1.0; })};
    Rng rng(1);
    CHECK_THROWS_AS(sample_exact(Space::hypercube(2), m, rng), std::invalid_argument);
}

TEST_CASE("map_solve: literals and tie policy") {
    CHECK(map_solve(Space::hypercube(3), {{1.0, -1.0, 0.0}, 1.0, StructuralTerm::zero()}) ==
          vec({1, 0, 0}));  // a zero coordinate ties and resolves to 0
    CHECK(map_solve(Space::hypercube(2), {{-0.2, -0.1}, 1.0, StructuralTerm::zero()}) ==
          vec({0, 0}));
    CHECK(map_solve(Space::hypercube(2), {{0.2, 0.1}, 1.0, StructuralTerm::zero()}) ==
          vec({1, 1}));
    // tied weights pick the lexicographically smallest maximizer
    CHECK(map_solve(Space::topk(4, 2), {{5.0, 1.0, 1.0, 0.0}, 1.0, StructuralTerm::zero()}) ==
          vec({1, 0, 1, 0}));
    CHECK(map_solve(Space::topk(3, 1), {{2.0, 2.0, 2.0}, 1.0, StructuralTerm::zero()}) ==
          vec({0, 0, 1}));
}

TEST_CASE("map_solve agrees with enumeration under heavy ties") {
    Rng rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        // integer-valued weights force frequent exact ties
        std::vector<double> th(6);
        for (auto& x : th) x = static_cast<double>(rng.index(3) - 1);
        for (const Space& space : {Space::hypercube(6), Space::topk(6, 3)}) {
            const GibbsModel m{th, 1.0, StructuralTerm::zero()};
            const auto got = map_solve(space, m);
            // lexicographically first maximizer over the enumeration
            SolutionVector best;
            double best_score = -1e300;
            for (const auto& y : enumerate_space(space)) {
                const double s = score(m, y);
                if (s > best_score + 1e-12) {
                    best_score = s;
                    best = y;
                }
            }
            CHECK(got == best);
        }
    }
}

TEST_CASE("brute_force_distribution: literal check and normalization") {
    const auto table =
        brute_force_distribution(Space::hypercube(1), {{std::log(3.0)}, 1.0, StructuralTerm::zero()});
    REQUIRE(table.support.size() == 2);
    CHECK(table.support[0] == vec({0}));
    CHECK(table.probs[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(table.probs[1] == doctest::Approx(0.75).epsilon(1e-14));

    Rng rng(31);
    const auto big = brute_force_distribution(Space::topk(8, 3),
                                              {random_theta(8, rng), 0.6, StructuralTerm::zero()});
    KahanSum total;
    for (double p : big.probs) {
        CHECK(p >= 0.0);
        total.add(p);
    }
    CHECK(total.value() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("table_expectation matches hand values") {
    const auto table =
        brute_force_distribution(Space::hypercube(2), {{0.0, 0.0}, 1.0, StructuralTerm::zero()});
    const auto mean = table_expectation(table);
    CHECK(mean[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(mean[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("total_variation") {
    CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.0));
    CHECK(total_variation({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(total_variation({0.5, 0.5}, {0.25, 0.75}) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("linear structural term is equivalent to shifting theta") {
    Rng rng(41);
    const auto th = random_theta(6, rng);
    std::vector<double> cost(6);
    for (auto& c : cost) c = rng.uniform(-1.0, 1.0);
    std::vector<double> shifted(6);
    for (int i = 0; i < 6; ++i) shifted[i] = th[i] - cost[i];

    for (const Space& space : {Space::hypercube(6), Space::topk(6, 2)}) {
        const GibbsModel with_phi{th, 1.4, StructuralTerm::linear_cost(cost)};
        const GibbsModel folded{shifted, 1.4, StructuralTerm::zero()};
        CHECK(cumulant(space, with_phi) ==
              doctest::Approx(cumulant(space, folded)).epsilon(1e-13));
        const auto a = marginal(space, with_phi);
        const auto b = marginal(space, folded);
        for (int i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("callback structural term goes through enumeration correctly") {
    const Space t42 = Space::topk(4, 2);
    const auto phi = StructuralTerm::callback(
        [](const SolutionVector& y) { return 0.7 * y[0] * y[3]; });
    const GibbsModel m{{0.2, -0.1, 0.4, 0.0}, 1.1, phi};
    CHECK(cumulant(t42, m) == doctest::Approx(reference_cumulant(t42, m)).epsilon(1e-13));
    const auto marg = marginal(t42, m);
    const auto ref = reference_marginal(t42, m);
    for (int i = 0; i < 4; ++i) CHECK(marg[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("temperature limits: uniform at high t, concentrated at low t") {
    const Space h4 = Space::hypercube(4);
    const GibbsModel hot{{2.0, -1.0, 0.5, -0.25}, 1e9, StructuralTerm::zero()};
    for (double p : marginal(h4, hot)) CHECK(p == doctest::Approx(0.5).epsilon(1e-9));

    // smallest |theta| is 0.25, so t = 0.01 puts every logit at least 25 out
    const GibbsModel cold{{2.0, -1.0, 0.5, -0.25}, 0.01, StructuralTerm::zero()};
    const auto m = marginal(h4, cold);
    const auto mode = map_solve(h4, cold);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(m[i] - mode[i]) < 1e-4);
}

}  // TEST_SUITE
