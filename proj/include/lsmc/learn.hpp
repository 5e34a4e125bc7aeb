#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsmc/gibbs.hpp"
#include "lsmc/kernel.hpp"
#include "lsmc/proposals.hpp"
#include "lsmc/rng.hpp"
#include "lsmc/spaces.hpp"
#include "lsmc/util.hpp"

namespace lsmc {

// Where each outer step's chains start. random and data_based reseed every
// step; persistent carries the previous step's terminal states (bootstrapping
// from the dataset when one exists, else from random states); ground_truth is
// the conditional setting's per-sample start and is rejected elsewhere.
enum class InitKind { random, data_based, persistent, ground_truth };

// Constants of the divergence-minimization step-size/chain-length schedule:
//   (i)   gamma_n = a * n^{-b},          b in (1/2, 1]
//   (ii)  K_{n+1} > floor(1 + a' * exp((8 R_C / t) * ||theta_n||))
//   (iii) 1/sqrt(K_n) - 1/sqrt(K_{n-1}) <= a'' * n^{-c},  c > 1 - b/2
struct ScheduleParams {
    double a = 0.1;
    double b = 0.6;
    double a_prime = 1.0;
    double a_dprime = 1.0;
    double c = 0.8;
    std::int64_t k_floor = 1;                  // never run chains shorter than this
    std::int64_t k_cap = 1ll << 40;            // refuse (throw) rather than exceed
};

// Largest solution norm in the space: sqrt(d) on the hypercube, sqrt(k) on
// fixed-ones spaces. Feeds constraint (ii).
double solution_radius(const Space& space);

// Stateful generator of (gamma_n, K_n) pairs. K is nondecreasing, which makes
// constraint (iii) hold with any positive a''; each emitted pair is re-checked
// against all three constraints.
class PcdSchedule {
  public:
    PcdSchedule(const ScheduleParams& params, const Space& space, double t);

    struct Step {
        std::int64_t n = 0;  // 1-based outer step index
        double gamma = 0.0;
        std::int64_t k = 0;
    };

    // advances to step n+1; theta_norm is ||theta_n|| before the update
    Step next(double theta_norm);
    std::int64_t steps_taken() const { return n_; }

  private:
    ScheduleParams params_;
    double rate_ = 0.0;  // 8 R_C / t
    std::int64_t n_ = 0;
    std::int64_t prev_k_ = 0;
};

struct UnconditionalDataset {
    Space space;
    std::vector<SolutionVector> targets;

    std::vector<double> mean() const;
};

// N i.i.d. exact draws from the distribution with weights theta0 at
// temperature t.
UnconditionalDataset generate_unconditional(const Space& space,
                                            const std::vector<double>& theta0, double t, int n,
                                            Rng& rng);

// Strict interiority of the dataset mean in the solution hull: every
// coordinate inside (0,1), and (fixed-ones spaces) the total equal to k.
bool mean_interior(const Space& space, const std::vector<double>& mean);

struct OptimizerSpec {
    enum class Kind { adam, sgd_schedule };

    Kind kind = Kind::adam;
    // adaptive-moment settings
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // divergence-minimization schedule settings (kind == sgd_schedule)
    ScheduleParams schedule;
};

struct StepRecord {
    std::int64_t step = 0;          // 1-based optimizer step
    double loss_proxy = 0.0;        // cumulant(theta) - <theta, data mean>, up to a constant
    double distance_sq = 0.0;       // squared distance to the reference parameter (NaN if none)
    double acceptance_rate = 0.0;
    std::int64_t k_used = 0;
    double gamma_used = 0.0;        // schedule step size, or the optimizer learning rate
};

// {"step":...,"loss_proxy":...,...} on one line, keys in a fixed order,
// floats via round-trip formatting, NaN encoded as null
std::string to_json_line(const StepRecord& record);

struct UnconditionalFitConfig {
    InitKind init = InitKind::persistent;
    OptimizerSpec optimizer;
    std::int64_t n_max = 1000;   // outer optimizer steps
    std::int64_t k = 100;        // chain length per step (adam; the schedule sets its own)
    int chains = 1;
    double t = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> theta_init;  // empty = zeros
    std::vector<double> theta_ref;   // empty = no distance metric
};

struct FitResult {
    std::vector<std::vector<double>> trajectory;  // theta_0 .. theta_{n_max}
    std::vector<StepRecord> records;              // one per optimizer step
    std::vector<double> final_theta;
};

// Persistent-chain divergence minimization: each step runs K fresh transitions
// per chain, estimates the model mean from all K iterates pooled over chains,
// and updates theta with gamma * (data mean - chain mean) (or the
// adaptive-moment equivalent). Refuses datasets whose mean is not interior.
FitResult fit_unconditional(const Space& space, const UnconditionalDataset& dataset,
                            const MixtureProposal& proposal,
                            const UnconditionalFitConfig& config);

// v minus its coordinate mean; the component of v in the direction of the
// all-ones vector is unobservable on fixed-ones spaces
std::vector<double> project_sum_zero(const std::vector<double>& v);

// ||a - b||^2, after projecting both onto the sum-zero hyperplane on
// fixed-ones spaces
double parameter_distance_sq(const Space& space, const std::vector<double>& a,
                             const std::vector<double>& b);

struct ConditionalSample {
    std::vector<double> x;
    SolutionVector y;
};

struct ConditionalDataset {
    Space space;
    int feature_dim = 0;
    std::vector<ConditionalSample> samples;
};

// x_i ~ standard normal in R^p, y_i an exact draw from the distribution with
// weights W0 x_i at temperature t.
ConditionalDataset generate_conditional(const Space& space, const Matrix& w0, double t, int n,
                                        Rng& rng);

// theta = W x
struct LinearModel {
    Matrix w;  // d x p

    std::vector<double> predict(const std::vector<double>& x) const;
};

struct ConditionalFitConfig {
    InitKind init = InitKind::ground_truth;
    OptimizerSpec optimizer;        // adam only; the norm-dependent schedule is unconditional
    int batch = 32;
    std::int64_t n_max = 200;
    std::int64_t k = 50;            // chain length per sample
    int chains = 1;
    double t = 1.0;
    std::uint64_t seed = 0;
    Matrix w_init;                  // required shape d x p
    const Matrix* w_ref = nullptr;  // optional W0 for the distance metric
};

struct ConditionalFitResult {
    std::vector<Matrix> trajectory;  // W_0 .. W_{n_max}
    std::vector<StepRecord> records;
    Matrix final_w;
};

// Mini-batch risk minimization for the linear model: per sample the chain mean
// minus the target is back-propagated through theta = W x as an outer product
// with x, averaged over the batch.
ConditionalFitResult fit_conditional(const ConditionalDataset& dataset,
                                     const MixtureProposal& proposal,
                                     const ConditionalFitConfig& config);

}  // namespace lsmc
