#pragma once

#include <functional>
#include <vector>

#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"

namespace lsmc {

// Structural score term phi(y) added to <theta, y>. Kept explicit (not folded
// into theta) because the closed-form cumulant/marginal paths require phi == 0.
class StructuralTerm {
  public:
    static StructuralTerm zero();
    // phi(y) = -<cost, y>
    static StructuralTerm linear_cost(std::vector<double> cost);
    static StructuralTerm callback(std::function<double(const SolutionVector&)> f);

    bool is_zero() const { return kind_ == Kind::zero; }
    double operator()(const SolutionVector& y) const;

  private:
    enum class Kind { zero, linear, tabulated };
    Kind kind_ = Kind::zero;
    std::vector<double> cost_;
    std::function<double(const SolutionVector&)> fn_;
};

// Parameters of the distribution pi(y) proportional to exp([<theta,y> + phi(y)] / t).
struct GibbsModel {
    std::vector<double> theta;
    double t = 1.0;
    StructuralTerm phi = StructuralTerm::zero();
};

// <theta, y> + phi(y)
double score(const GibbsModel& model, const SolutionVector& y);

// Log-partition scaled by temperature: t * log sum_y exp(score(y)/t).
// Hypercube with phi == 0 uses the per-coordinate closed form, fixed-ones uses
// a log-sum-exp knapsack DP in O(d*k); anything else falls back to enumeration.
double cumulant(const Space& space, const GibbsModel& model);

// Expectation of y under the model; gradient of the cumulant in theta.
std::vector<double> marginal(const Space& space, const GibbsModel& model);

// Exact sampler (phi == 0 only): independent Bernoulli draws on the hypercube,
// sequential conditional draws from the DP tables on fixed-ones spaces.
SolutionVector sample_exact(const Space& space, const GibbsModel& model, Rng& rng);

// Maximizer of score; ties resolved to the lexicographically smallest vector.
SolutionVector map_solve(const Space& space, const GibbsModel& model);

struct DistributionTable {
    std::vector<SolutionVector> support;  // lexicographic order
    std::vector<double> probs;
};

// Exact distribution by enumeration; the reference oracle for every sampler here.
DistributionTable brute_force_distribution(const Space& space, const GibbsModel& model,
                                           std::uint64_t cap = kDefaultEnumerationCap);

// Expectation of an arbitrary vector statistic under an explicit table.
std::vector<double> table_expectation(const DistributionTable& table);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace lsmc
