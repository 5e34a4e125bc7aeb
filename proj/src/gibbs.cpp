#include "lsmc/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lsmc/util.hpp"

namespace lsmc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_model(const Space& space, const GibbsModel& model) {
    if (static_cast<int>(model.theta.size()) != space.dim)
        throw std::invalid_argument("model dimension does not match space");
    if (!(model.t > 0.0)) throw std::invalid_argument("temperature must be positive");
}

// forward[i][j]: log sum over assignments of coords 0..i-1 with j ones
std::vector<std::vector<double>> forward_table(const std::vector<double>& theta, double t, int k) {
    const int d = static_cast<int>(theta.size());
    std::vector<std::vector<double>> f(static_cast<std::size_t>(d + 1),
                                       std::vector<double>(static_cast<std::size_t>(k + 1), kNegInf));
    f[0][0] = 0.0;
    for (int i = 1; i <= d; ++i) {
        for (int j = 0; j <= std::min(i, k); ++j) {
            double v = f[i - 1][j];
            if (j > 0) v = log_add_exp(v, f[i - 1][j - 1] + theta[static_cast<std::size_t>(i - 1)] / t);
            f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
        }
    }
    return f;
}

// backward[i][j]: log sum over assignments of coords i..d-1 with j ones
std::vector<std::vector<double>> backward_table(const std::vector<double>& theta, double t, int k) {
    const int d = static_cast<int>(theta.size());
    std::vector<std::vector<double>> b(static_cast<std::size_t>(d + 1),
                                       std::vector<double>(static_cast<std::size_t>(k + 1), kNegInf));
    b[static_cast<std::size_t>(d)][0] = 0.0;
    for (int i = d - 1; i >= 0; --i) {
        for (int j = 0; j <= std::min(d - i, k); ++j) {
            double v = b[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)];
            if (j > 0)
                v = log_add_exp(v, b[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j - 1)] +
                                       theta[static_cast<std::size_t>(i)] / t);
            b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
        }
    }
    return b;
}

}  // namespace

StructuralTerm StructuralTerm::zero() { return StructuralTerm{}; }

StructuralTerm StructuralTerm::linear_cost(std::vector<double> cost) {
    StructuralTerm s;
    s.kind_ = Kind::linear;
    s.cost_ = std::move(cost);
    return s;
}

StructuralTerm StructuralTerm::callback(std::function<double(const SolutionVector&)> f) {
    if (!f) throw std::invalid_argument("StructuralTerm::callback: empty function");
    StructuralTerm s;
    s.kind_ = Kind::tabulated;
    s.fn_ = std::move(f);
    return s;
}

double StructuralTerm::operator()(const SolutionVector& y) const {
    switch (kind_) {
        case Kind::zero:
            return 0.0;
        case Kind::linear:
            return -dot(cost_, y);
        case Kind::tabulated:
            return fn_(y);
    }
    return 0.0;
}

double score(const GibbsModel& model, const SolutionVector& y) {
    if (model.theta.size() != y.size()) throw std::invalid_argument("score: dimension mismatch");
    return dot(model.theta, y) + model.phi(y);
}

double cumulant(const Space& space, const GibbsModel& model) {
    validate_model(space, model);
    const double t = model.t;
    if (model.phi.is_zero() && space.kind == Space::Kind::hypercube) {
        KahanSum s;
        for (double th : model.theta) s.add(softplus(th / t));
        return t * s.value();
    }
    if (model.phi.is_zero() && space.kind == Space::Kind::topk) {
        // knapsack DP in the log-sum-exp semiring, O(d*k)
        std::vector<double> dp(static_cast<std::size_t>(space.ones + 1), kNegInf);
        dp[0] = 0.0;
        for (int i = 0; i < space.dim; ++i) {
            for (int j = std::min(i + 1, space.ones); j >= 1; --j)
                dp[static_cast<std::size_t>(j)] =
                    log_add_exp(dp[static_cast<std::size_t>(j)],
                                dp[static_cast<std::size_t>(j - 1)] +
                                    model.theta[static_cast<std::size_t>(i)] / t);
        }
        return t * dp[static_cast<std::size_t>(space.ones)];
    }
    // brute force on enumerable spaces (the only path that admits phi != 0)
    const auto all = enumerate_space(space);
    std::vector<double> logs;
    logs.reserve(all.size());
    for (const auto& y : all) logs.push_back(score(model, y) / t);
    return t * log_sum_exp(logs);
}

std::vector<double> marginal(const Space& space, const GibbsModel& model) {
    validate_model(space, model);
    const double t = model.t;
    const auto d = static_cast<std::size_t>(space.dim);
    std::vector<double> mu(d, 0.0);
    if (model.phi.is_zero() && space.kind == Space::Kind::hypercube) {
        for (std::size_t i = 0; i < d; ++i) mu[i] = sigmoid(model.theta[i] / t);
        return mu;
    }
    if (model.phi.is_zero() && space.kind == Space::Kind::topk) {
        const int k = space.ones;
        const auto f = forward_table(model.theta, t, k);
        const auto b = backward_table(model.theta, t, k);
        const double log_z = f[d][static_cast<std::size_t>(k)];
        for (int i = 0; i < space.dim; ++i) {
            // ones before coord i = j, coord i = 1, ones after = k-1-j
            std::vector<double> terms;
            for (int j = 0; j <= std::min(i, k - 1); ++j) {
                const int rest = k - 1 - j;
                if (rest > space.dim - i - 1) continue;
                const double v = f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                                 model.theta[static_cast<std::size_t>(i)] / t +
                                 b[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(rest)];
                if (v != kNegInf) terms.push_back(v);
            }
            mu[static_cast<std::size_t>(i)] = terms.empty() ? 0.0 : std::exp(log_sum_exp(terms) - log_z);
        }
        return mu;
    }
    const auto table = brute_force_distribution(space, model);
    return table_expectation(table);
}

SolutionVector sample_exact(const Space& space, const GibbsModel& model, Rng& rng) {
    validate_model(space, model);
    if (!model.phi.is_zero())
        throw std::invalid_argument("sample_exact requires a zero structural term");
    const double t = model.t;
    SolutionVector y(static_cast<std::size_t>(space.dim), 0.0);
    if (space.kind == Space::Kind::hypercube) {
        for (int i = 0; i < space.dim; ++i)
            y[static_cast<std::size_t>(i)] =
                rng.bernoulli(sigmoid(model.theta[static_cast<std::size_t>(i)] / t)) ? 1.0 : 0.0;
        return y;
    }
    // sequential conditionals off the backward table:
    // P(y_i = 1 | j ones still needed) = exp(theta_i/t + B[i+1][j-1] - B[i][j])
    const auto b = backward_table(model.theta, t, space.ones);
    int need = space.ones;
    for (int i = 0; i < space.dim && need > 0; ++i) {
        const int remaining = space.dim - i;
        double p;
        if (remaining == need) {
            p = 1.0;
        } else {
            p = std::exp(model.theta[static_cast<std::size_t>(i)] / t +
                         b[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(need - 1)] -
                         b[static_cast<std::size_t>(i)][static_cast<std::size_t>(need)]);
        }
        if (rng.bernoulli(p)) {
            y[static_cast<std::size_t>(i)] = 1.0;
            --need;
        }
    }
    return y;
}

SolutionVector map_solve(const Space& space, const GibbsModel& model) {
    validate_model(space, model);
    if (model.phi.is_zero() && space.kind == Space::Kind::hypercube) {
        SolutionVector y(static_cast<std::size_t>(space.dim), 0.0);
        for (int i = 0; i < space.dim; ++i)
            if (model.theta[static_cast<std::size_t>(i)] > 0.0) y[static_cast<std::size_t>(i)] = 1.0;
        return y;
    }
    if (model.phi.is_zero() && space.kind == Space::Kind::topk) {
        // k largest entries; among ties prefer the later index, which yields the
        // lexicographically smallest maximizer
        std::vector<int> idx(static_cast<std::size_t>(space.dim));
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            const double ta = model.theta[static_cast<std::size_t>(a)];
            const double tb = model.theta[static_cast<std::size_t>(b)];
            if (ta != tb) return ta > tb;
            return a > b;
        });
        SolutionVector y(static_cast<std::size_t>(space.dim), 0.0);
        for (int i = 0; i < space.ones; ++i) y[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1.0;
        return y;
    }
    const auto all = enumerate_space(space);
    std::size_t best = 0;
    double best_score = score(model, all[0]);
    for (std::size_t i = 1; i < all.size(); ++i) {
        const double s = score(model, all[i]);
        if (s > best_score) {  // strict: enumeration is lexicographic, first max is smallest
            best = i;
            best_score = s;
        }
    }
    return all[best];
}

DistributionTable brute_force_distribution(const Space& space, const GibbsModel& model,
                                           std::uint64_t cap) {
    validate_model(space, model);
    DistributionTable table;
    table.support = enumerate_space(space, cap);
    std::vector<double> logs;
    logs.reserve(table.support.size());
    for (const auto& y : table.support) logs.push_back(score(model, y) / model.t);
    const double lz = log_sum_exp(logs);
    table.probs.reserve(logs.size());
    for (double l : logs) table.probs.push_back(std::exp(l - lz));
    return table;
}

std::vector<double> table_expectation(const DistributionTable& table) {
    if (table.support.empty()) throw std::invalid_argument("table_expectation: empty table");
    const std::size_t d = table.support[0].size();
    std::vector<double> mean(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        KahanSum s;
        for (std::size_t i = 0; i < table.support.size(); ++i)
            s.add(table.probs[i] * table.support[i][j]);
        mean[j] = s.value();
    }
    return mean;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
    KahanSum s;
    for (std::size_t i = 0; i < p.size(); ++i) s.add(std::abs(p[i] - q[i]));
    return 0.5 * s.value();
}

}  // namespace lsmc
