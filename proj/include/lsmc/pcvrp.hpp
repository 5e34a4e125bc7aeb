#pragma once

// Desk-scale prize-collecting VRPTW sampler: instance/solution model, the
// randomized local-search proposal moves with exact forward/reverse densities,
// and mixture-MCMC chains over feasible routings.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsmc/kernel.hpp"
#include "lsmc/rng.hpp"
#include "lsmc/util.hpp"

namespace lsmc {

struct TimeWindow {
    double open = 0.0;
    double close = 0.0;
};

struct RoutingRequest {
    double x = 0.0;
    double y = 0.0;
    TimeWindow window;
    double service = 0.0;
    double demand = 0.0;
    double prize = 0.0;
    bool must_dispatch = false;
};

// Node 0 is the depot; request i (1-based id) is node i.
struct PcvrpInstance {
    double depot_x = 0.0;
    double depot_y = 0.0;
    TimeWindow depot_window;
    double capacity = 0.0;
    int fleet = 0;
    std::vector<RoutingRequest> requests;
    Matrix cost;       // (n+1) x (n+1) edge costs
    Matrix travel;     // (n+1) x (n+1) travel times
    Matrix proximity;  // n x n symmetric heuristic distance between requests

    int size() const { return static_cast<int>(requests.size()); }
    std::vector<double> prizes() const;
};

// Builds matrices (Euclidean where absent), the proximity measure, and
// validates; fleet <= 0 means one vehicle per request.
PcvrpInstance make_instance(double depot_x, double depot_y, TimeWindow depot_window,
                            double capacity, std::vector<RoutingRequest> requests, int fleet = 0,
                            std::optional<Matrix> cost = std::nullopt,
                            std::optional<Matrix> travel = std::nullopt);

PcvrpInstance instance_from_json(const std::string& text);
PcvrpInstance load_instance(const std::string& path);

// Routes are an ordered list of vehicle slots; stored routes are non-empty
// and unused slots trail implicitly (slot count <= fleet).
struct RoutingSolution {
    std::vector<std::vector<int>> routes;

    bool operator==(const RoutingSolution&) const = default;
};

// Flattened routes with -1 separators; total order for use as a map key.
std::vector<int> solution_key(const RoutingSolution& y);

enum class RoutingViolation { none, structure, fleet, capacity, time_window, must_dispatch };

struct FeasibilityReport {
    bool feasible = false;
    RoutingViolation violation = RoutingViolation::none;
    std::string detail;
};

// Forward time propagation with waiting at early arrivals; service must start
// within its window and the vehicle must return before the depot closes.
FeasibilityReport feasibility_check(const PcvrpInstance& inst, const RoutingSolution& y);

double route_cost(const PcvrpInstance& inst, const std::vector<int>& route);

// Dispatched prize total minus edge costs, theta taken per request.
double routing_score(const PcvrpInstance& inst, const std::vector<double>& theta,
                     const RoutingSolution& y);
// Same with the instance's own prizes.
double objective(const PcvrpInstance& inst, const RoutingSolution& y);

// Score difference computed from the touched vehicle slots only.
double incremental_delta(const PcvrpInstance& inst, const std::vector<double>& theta,
                         const RoutingSolution& from, const RoutingSolution& to);

// Directed segment indicator over (n+1)^2 nodes, row-major.
SolutionVector incidence_vector(const PcvrpInstance& inst, const RoutingSolution& y);

std::string solution_to_json(const PcvrpInstance& inst, const RoutingSolution& y);

enum class MoveType : int {
    relocate,
    relocate_pair,
    swap,
    swap_pair,
    two_opt,
    serve_remove,
};

inline constexpr MoveType kAllMoves[] = {
    MoveType::relocate, MoveType::relocate_pair, MoveType::swap,
    MoveType::swap_pair, MoveType::two_opt,      MoveType::serve_remove,
};

const char* move_name(MoveType move);

struct RoutingProposalParams {
    double beta = 1.0;    // softmax temperature after max-normalization
    int max_attempts = 50;  // total draws before the step becomes a self-transition
};

// Valid anchors i and, per anchor, the softmax candidate set (anchor already
// excluded; 0 denotes the new-route slot available to serve).
struct AnchorSets {
    std::vector<int> v1;
    std::vector<std::vector<int>> v2;
};

// For the five two-client moves only; serve/remove has its own shape below.
AnchorSets valid_sets(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move);

struct ServeRemoveSets {
    std::vector<int> removable;  // clients whose removal keeps the slot structure closed
    std::vector<int> servable;   // undispatched clients
    bool new_route_slot = false;
};

ServeRemoveSets serve_remove_sets(const PcvrpInstance& inst, const RoutingSolution& y);

bool move_applicable(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move);
std::vector<MoveType> applicable_moves(const PcvrpInstance& inst, const RoutingSolution& y,
                                       const std::vector<MoveType>& members);

// Exact law of one raw draw: probability mass per reachable feasible solution
// (keyed by solution_key, self-draws included) plus the invalid mass that
// triggers a resample.
struct MoveScan {
    std::map<std::vector<int>, double> mass;
    double invalid_mass = 0.0;
};

MoveScan scan_move(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
                   const RoutingProposalParams& params);

// sum_{m=0}^{attempts-1} p^m: the factor turning raw draw mass into the
// realized proposal density under resample-on-invalid.
double resample_factor(double invalid_mass, int max_attempts);

struct RoutingProposal {
    RoutingSolution candidate;
    double forward_density = 0.0;  // realized q_s(y, y')
    double reverse_density = 0.0;  // realized q_s(y', y)
    int attempts = 0;
    bool exhausted = false;  // every attempt drew an invalid candidate
};

RoutingProposal propose(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
                        const RoutingProposalParams& params, Rng& rng);

struct RoutingChainConfig {
    std::vector<MoveType> members{std::begin(kAllMoves), std::end(kAllMoves)};
    double t = 1.0;
    long long iterations = 1000;
    long long burn_in = 0;
    RoutingProposalParams params;
    std::function<void(long long, const RoutingSolution&, bool)> observer;
};

struct RoutingChainResult {
    SolutionVector mean_incidence;
    RoutingSolution final_state;
    double acceptance_rate = 0.0;
    long long transitions = 0;
};

RoutingChainResult sample_routing_chain(const PcvrpInstance& inst,
                                        const std::vector<double>& theta,
                                        const RoutingChainConfig& config,
                                        const RoutingSolution& init, Rng& rng);

// All feasible slot-ordered solutions; guarded to tiny instances.
std::vector<RoutingSolution> enumerate_feasible(const PcvrpInstance& inst);

// Gibbs probabilities over an enumerated state list.
std::vector<double> routing_gibbs(const PcvrpInstance& inst, const std::vector<double>& theta,
                                  double t, const std::vector<RoutingSolution>& states);

// Exact one-step transition matrix of the mixture chain over the state list.
Matrix routing_kernel_matrix(const PcvrpInstance& inst, const std::vector<double>& theta,
                             double t, const std::vector<RoutingSolution>& states,
                             const std::vector<MoveType>& members,
                             const RoutingProposalParams& params);

struct RandomInstanceOptions {
    double area = 100.0;
    double window_width = 25.0;   // ignored when loose
    double demand_max = 10.0;
    double capacity_slack = 1.5;  // capacity = slack * mean route demand guess
    bool loose = false;           // wide-open windows, effectively uncapacitated
};

PcvrpInstance random_instance(int n, Rng& rng, const RandomInstanceOptions& opts = {});

}  // namespace lsmc
