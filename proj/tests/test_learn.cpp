#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lsmc/learn.hpp"

using namespace lsmc;

namespace {

SolutionVector vec(std::initializer_list<double> xs) { return SolutionVector(xs); }

MixtureProposal single_member(const Space& space, const Neighborhood& nbhd) {
    std::vector<std::shared_ptr<ProposalKernel>> members;
    members.push_back(uniform_neighbor_proposal(space, nbhd));
    return MixtureProposal::over(std::move(members));
}

std::vector<double> random_theta(int d, Rng& rng, double scale) {
    std::vector<double> th(d);
    for (auto& x : th) x = scale * rng.normal();
    return th;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("solution_radius") {
    CHECK(solution_radius(Space::hypercube(9)) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(solution_radius(Space::topk(9, 4)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("schedule constants are validated at construction") {
    const Space h4 = Space::hypercube(4);
    ScheduleParams p;
    CHECK_NOTHROW(PcdSchedule(p, h4, 1.0));

    ScheduleParams bad = p;
    bad.b = 0.5;  // must exceed 1/2
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    bad = p;
    bad.b = 1.0;
    CHECK_NOTHROW(PcdSchedule(bad, h4, 1.0));
    bad = p;
    bad.c = 1.0 - p.b / 2.0;  // boundary excluded
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    bad = p;
    bad.a = 0.0;
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    bad = p;
    bad.a_prime = -1.0;
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    bad = p;
    bad.k_floor = 0;
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    bad = p;
    bad.k_cap = 0;
    CHECK_THROWS_AS(PcdSchedule(bad, h4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(PcdSchedule(p, h4, 0.0), std::invalid_argument);
}

TEST_CASE("schedule emits the literal step sizes and chain lengths") {
    const Space h4 = Space::hypercube(4);
    ScheduleParams p;
    p.a = 0.1;
    p.b = 0.6;
    PcdSchedule sched(p, h4, 2.0);  // rate = 8 * 2 / 2 = 8

    const auto s1 = sched.next(0.0);  // bound = 1 + e^0 = 2 -> k = 3
    CHECK(s1.n == 1);
    CHECK(s1.gamma == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s1.k == 3);

    const auto s2 = sched.next(0.5);  // bound = 1 + e^4 = 55.598 -> k = 56
    CHECK(s2.gamma == doctest::Approx(0.1 * std::pow(2.0, -0.6)).epsilon(1e-15));
    CHECK(s2.k == 56);

    // a smaller norm cannot shrink the chain length (keeps drift one-sided)
    const auto s3 = sched.next(0.0);
    CHECK(s3.k == 56);
}

TEST_CASE("schedule chain lengths are nondecreasing and capped") {
    const Space h10 = Space::hypercube(10);
    ScheduleParams p;
    p.k_floor = 20;
    PcdSchedule sched(p, h10, 1.0);
    Rng rng(17);
    std::int64_t prev = 0;
    double prev_gamma = 1e9;
    for (int n = 0; n < 100; ++n) {
        const auto s = sched.next(std::abs(rng.normal()) * 0.1);
        CHECK(s.k >= prev);
        CHECK(s.k >= 20);
        CHECK(s.gamma < prev_gamma);
        prev = s.k;
        prev_gamma = s.gamma;
    }

    ScheduleParams capped;
    capped.k_cap = 10;
    PcdSchedule tight(capped, h10, 1.0);
    CHECK_THROWS_AS(tight.next(5.0), std::length_error);  // e^{8*sqrt(10)*5} is astronomical
}

TEST_CASE("unconditional dataset generation matches the exact marginal") {
    const Space h10 = Space::hypercube(10);
    Rng rng(23);
    const auto theta0 = random_theta(10, rng, 1.0);
    const double t = 1.0;

    Rng data_rng(24);
    const auto empty = generate_unconditional(h10, theta0, t, 0, data_rng);
    CHECK(empty.targets.empty());

    const auto ds = generate_unconditional(h10, theta0, t, 100000, data_rng);
    const auto mean = ds.mean();
    const auto marg = marginal(h10, {theta0, t, StructuralTerm::zero()});
    for (int i = 0; i < 10; ++i) CHECK(std::abs(mean[i] - marg[i]) < 0.01);

    Rng topk_rng(25);
    const auto dt = generate_unconditional(Space::topk(6, 2), random_theta(6, rng, 1.0), 0.8, 50,
                                           topk_rng);
    for (const auto& y : dt.targets) CHECK(Space::topk(6, 2).contains(y));
}

TEST_CASE("mean interiority") {
    CHECK(mean_interior(Space::hypercube(2), {0.5, 0.5}));
    CHECK(mean_interior(Space::hypercube(2), {0.01, 0.99}));
    CHECK_FALSE(mean_interior(Space::hypercube(2), {0.0, 0.5}));
    CHECK_FALSE(mean_interior(Space::hypercube(2), {1.0, 0.5}));
    CHECK_FALSE(mean_interior(Space::hypercube(3), {0.5, 0.5}));  // wrong size
    CHECK(mean_interior(Space::topk(4, 2), {0.5, 0.5, 0.5, 0.5}));
    CHECK(mean_interior(Space::topk(4, 2), {0.45, 0.55, 0.5, 0.5}));
    CHECK_FALSE(mean_interior(Space::topk(4, 2), {0.9, 0.9, 0.1, 0.3}));  // sums to 2.2
    CHECK_FALSE(mean_interior(Space::topk(4, 2), {1.0, 0.5, 0.25, 0.25}));
}

TEST_CASE("step records serialize to stable JSON lines") {
    StepRecord r;
    r.step = 3;
    r.loss_proxy = 0.5;
    r.distance_sq = std::nan("");
    r.acceptance_rate = 0.25;
    r.k_used = 7;
    r.gamma_used = 0.1;
    CHECK(to_json_line(r) ==
          "{\"step\":3,\"loss_proxy\":0.5,\"distance_sq\":null,\"acceptance_rate\":0.25,"
          "\"k_used\":7,\"gamma_used\":0.10000000000000001}");
    r.distance_sq = 2.0;
    CHECK(to_json_line(r).find("\"distance_sq\":2,") != std::string::npos);
}

TEST_CASE("sum-zero projection and the parameter metric") {
    const auto proj = project_sum_zero({1.0, 2.0, 3.0});
    CHECK(proj[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(proj[1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(proj[2] == doctest::Approx(1.0).epsilon(1e-14));
    const auto twice = project_sum_zero(proj);
    for (int i = 0; i < 3; ++i) CHECK(twice[i] == doctest::Approx(proj[i]).epsilon(1e-14));

    CHECK(parameter_distance_sq(Space::hypercube(2), {1.0, 0.0}, {0.0, 0.0}) ==
          doctest::Approx(1.0).epsilon(1e-14));

    // on fixed-ones spaces a constant shift is unobservable
    Rng rng(31);
    const Space t52 = Space::topk(5, 2);
    const auto a = random_theta(5, rng, 1.0);
    const auto b = random_theta(5, rng, 1.0);
    std::vector<double> shifted(a);
    for (auto& x : shifted) x += 3.7;
    CHECK(parameter_distance_sq(t52, a, b) ==
          doctest::Approx(parameter_distance_sq(t52, shifted, b)).epsilon(1e-10));
}

TEST_CASE("unconditional fit input validation") {
    const Space h3 = Space::hypercube(3);
    const auto mix = single_member(h3, Neighborhood::hamming_ball(1));

    // a dataset stuck on one vertex has a boundary mean
    UnconditionalDataset vertex{h3, {vec({1, 1, 1}), vec({1, 1, 1})}};
    UnconditionalFitConfig config;
    config.n_max = 1;
    CHECK_THROWS_AS(fit_unconditional(h3, vertex, mix, config), std::invalid_argument);

    Rng rng(41);
    auto ds = generate_unconditional(h3, {0.1, -0.2, 0.3}, 1.0, 500, rng);
    UnconditionalFitConfig bad = config;
    bad.init = InitKind::ground_truth;
    CHECK_THROWS_AS(fit_unconditional(h3, ds, mix, bad), std::invalid_argument);

    UnconditionalDataset empty{h3, {}};
    UnconditionalFitConfig db = config;
    db.init = InitKind::data_based;
    CHECK_THROWS_AS(fit_unconditional(h3, empty, mix, db), std::invalid_argument);

    UnconditionalFitConfig mismatch = config;
    mismatch.theta_init = {1.0, 2.0};
    CHECK_THROWS_AS(fit_unconditional(h3, ds, mix, mismatch), std::invalid_argument);
}

TEST_CASE("adaptive-moment fit recovers ground truth on a small hypercube") {
    const Space h6 = Space::hypercube(6);
    Rng rng(51);
    const auto theta0 = random_theta(6, rng, 0.5);
    Rng data_rng(52);
    const auto ds = generate_unconditional(h6, theta0, 1.0, 2000, data_rng);
    const auto mix = single_member(h6, Neighborhood::hamming_ball(1));

    UnconditionalFitConfig config;
    config.init = InitKind::persistent;
    config.optimizer.kind = OptimizerSpec::Kind::adam;
    config.n_max = 150;
    config.k = 30;
    config.chains = 2;
    config.seed = 9001;
    config.theta_ref = theta0;

    const auto fit = fit_unconditional(h6, ds, mix, config);
    REQUIRE(fit.records.size() == 150);
    REQUIRE(fit.trajectory.size() == 151);
    CHECK(fit.final_theta == fit.trajectory.back());

    const double initial = parameter_distance_sq(h6, std::vector<double>(6, 0.0), theta0);
    CHECK(fit.records.back().distance_sq < initial / 2.0);
    CHECK(fit.records.front().loss_proxy > fit.records.back().loss_proxy);
    for (const auto& r : fit.records) {
        CHECK(r.k_used == 30);
        CHECK(r.gamma_used == doctest::Approx(5e-3).epsilon(1e-15));
        CHECK(r.acceptance_rate > 0.0);
        CHECK(r.acceptance_rate <= 1.0);
    }

    // byte determinism: the same configuration reruns identically
    const auto again = fit_unconditional(h6, ds, mix, config);
    CHECK(again.trajectory == fit.trajectory);
    UnconditionalFitConfig other = config;
    other.seed = 9002;
    CHECK(fit_unconditional(h6, ds, mix, other).final_theta != fit.final_theta);
}

TEST_CASE("scheduled fit respects the constraints it was given") {
    const Space h4 = Space::hypercube(4);
    Rng rng(61);
    const auto theta0 = random_theta(4, rng, 0.3);
    const double t = 4.0;
    Rng data_rng(62);
    const auto ds = generate_unconditional(h4, theta0, t, 5000, data_rng);
    const auto mix = single_member(h4, Neighborhood::hamming_ball(1));

    UnconditionalFitConfig config;
    config.init = InitKind::persistent;
    config.optimizer.kind = OptimizerSpec::Kind::sgd_schedule;
    config.optimizer.schedule.a = 0.3;
    config.optimizer.schedule.b = 0.6;
    config.optimizer.schedule.c = 0.8;
    config.optimizer.schedule.k_floor = 50;
    config.optimizer.schedule.k_cap = 1 << 20;
    config.n_max = 50;
    config.t = t;
    config.seed = 33;
    config.theta_ref = theta0;

    const auto fit = fit_unconditional(h4, ds, mix, config);
    const double rate = 8.0 * solution_radius(h4) / t;
    std::int64_t prev_k = 0;
    for (std::size_t n = 0; n < fit.records.size(); ++n) {
        const auto& r = fit.records[n];
        // step size follows a * n^{-b} exactly
        CHECK(r.gamma_used ==
              doctest::Approx(0.3 * std::pow(static_cast<double>(n + 1), -0.6)).epsilon(1e-12));
        // chain length beats the norm-dependent bound computed from the
        // parameter the step actually saw
        const double norm = l2_norm(fit.trajectory[n]);
        CHECK(static_cast<double>(r.k_used) > std::floor(1.0 + std::exp(rate * norm)));
        CHECK(r.k_used >= 50);
        CHECK(r.k_used >= prev_k);
        prev_k = r.k_used;
        // plain-gradient update moves at most gamma per coordinate
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(fit.trajectory[n + 1][i] - fit.trajectory[n][i]) <=
                  r.gamma_used + 1e-15);
    }
    CHECK(fit.records.back().distance_sq <
          parameter_distance_sq(h4, std::vector<double>(4, 0.0), theta0));
}

TEST_CASE("linear model prediction") {
    Matrix w(3, 2, 0.0);
    w(0, 0) = 1.0;
    w(0, 1) = 2.0;
    w(1, 0) = 3.0;
    w(1, 1) = 4.0;
    w(2, 1) = -1.0;
    const LinearModel lm{w};
    const auto theta = lm.predict({1.0, 1.0});
    CHECK(theta[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(theta[1] == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(theta[2] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(lm.predict({1.0}), std::invalid_argument);
}

TEST_CASE("conditional dataset generation shapes and membership") {
    const Space h4 = Space::hypercube(4);
    Matrix w0(4, 3, 0.0);
    Rng rng(71);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) w0(i, j) = rng.normal();
    Rng gen(72);
    const auto ds = generate_conditional(h4, w0, 1.0, 40, gen);
    CHECK(ds.feature_dim == 3);
    REQUIRE(ds.samples.size() == 40);
    for (const auto& s : ds.samples) {
        CHECK(s.x.size() == 3);
        CHECK(h4.contains(s.y));
    }
}

TEST_CASE("conditional fit: zero features freeze the weights") {
    const Space h3 = Space::hypercube(3);
    ConditionalDataset ds{h3, 2, {}};
    for (int i = 0; i < 8; ++i) ds.samples.push_back({{0.0, 0.0}, vec({1, 0, 1})});
    const auto mix = single_member(h3, Neighborhood::hamming_ball(1));

    ConditionalFitConfig config;
    config.w_init = Matrix(3, 2, 0.4);
    config.n_max = 5;
    config.k = 10;
    config.batch = 4;
    const auto fit = fit_conditional(ds, mix, config);
    CHECK(fit.final_w.data() == config.w_init.data());
}

TEST_CASE("conditional fit: loss and parameter distance decrease") {
    const Space h4 = Space::hypercube(4);
    Matrix w0(4, 2, 0.0);
    Rng rng(81);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) w0(i, j) = 0.8 * rng.normal();
    Rng gen(82);
    const auto ds = generate_conditional(h4, w0, 1.0, 120, gen);
    const auto mix = single_member(h4, Neighborhood::hamming_ball(1));

    ConditionalFitConfig config;
    config.init = InitKind::ground_truth;
    config.w_init = Matrix(4, 2, 0.0);
    config.w_ref = &w0;
    config.n_max = 120;
    config.k = 25;
    config.batch = 16;
    config.seed = 4242;

    const auto fit = fit_conditional(ds, mix, config);
    REQUIRE(fit.records.size() == 120);
    CHECK(fit.records.back().loss_proxy < fit.records.front().loss_proxy);
    double init_dist = 0.0;
    for (double v : w0.data()) init_dist += v * v;
    CHECK(fit.records.back().distance_sq < init_dist);

    // single-sample batches are the same estimator, just noisier: smoke only
    ConditionalFitConfig tiny = config;
    tiny.batch = 1;
    tiny.n_max = 3;
    CHECK_NOTHROW(fit_conditional(ds, mix, tiny));
}

TEST_CASE("conditional fit validation") {
    const Space h3 = Space::hypercube(3);
    const auto mix = single_member(h3, Neighborhood::hamming_ball(1));
    ConditionalDataset empty{h3, 2, {}};
    ConditionalFitConfig config;
    config.w_init = Matrix(3, 2, 0.0);
    CHECK_THROWS_AS(fit_conditional(empty, mix, config), std::invalid_argument);

    ConditionalDataset ds{h3, 2, {{{0.1, 0.2}, vec({1, 0, 0})}}};
    ConditionalFitConfig bad_shape = config;
    bad_shape.w_init = Matrix(2, 2, 0.0);
    CHECK_THROWS_AS(fit_conditional(ds, mix, bad_shape), std::invalid_argument);

    ConditionalFitConfig bad_opt = config;
    bad_opt.optimizer.kind = OptimizerSpec::Kind::sgd_schedule;
    CHECK_THROWS_AS(fit_conditional(ds, mix, bad_opt), std::invalid_argument);
}

}  // TEST_SUITE
