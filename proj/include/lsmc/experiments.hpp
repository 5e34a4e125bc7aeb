#pragma once

// Batch experiment drivers behind the CLI: marginal-estimate convergence
// curves, unconditional/conditional fitting runs, and the routing sampler
// verification report. Every emitted file starts with a manifest carrying the
// config hash and seed; equal configs reproduce outputs byte for byte.

#include <cstdint>
#include <string>
#include <vector>

#include "lsmc/proposals.hpp"
#include "lsmc/spaces.hpp"

namespace lsmc {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class ExperimentKind { gradient_convergence, unconditional, conditional, routing_verify };

const char* kind_name(ExperimentKind kind);

// One bag of knobs for all four experiment kinds; each driver reads the
// subset it needs and validates it against the module it feeds.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::gradient_convergence;
    std::string space = "hypercube";  // hypercube | topk
    int d = 10;
    int kappa = 3;
    // comma-separated proposal members, each kind:radius with kind in
    // {ball, shell, swap}; e.g. "shell:1,shell:2,shell:3,shell:6"
    std::string mixture = "ball:1";
    double t = 1.0;
    double t0 = 0.0;       // annealing start; <= t keeps the temperature constant
    double gamma = 0.995;  // annealing decay per step
    std::int64_t k = 3000;   // chain length (routing-verify: stationarity steps)
    std::int64_t k0 = 0;     // burn-in iterations
    int c = 1;               // parallel chains
    int m = 100;             // problem instances, averaged in the outputs
    std::int64_t n = 10000;  // dataset size (routing-verify: draws per frequency check)
    std::int64_t n_max = 1000;  // optimizer steps
    int feature_dim = 3;        // conditional model input dimension
    int batch = 32;             // conditional minibatch size
    std::string init = "persistent";  // random | data-based | persistent | ground-truth
    std::uint64_t seed = 0;
    std::string preset;    // named hyperparameter bundle; empty = use fields as given
    std::string instance;  // routing-verify instance path; empty = bundled fixture
    std::string out = "-";  // output path; "-" writes to stdout
};

// Overwrites the hyperparameter fields with the named bundle for config.kind
// (seed and out are left alone); throws std::invalid_argument on unknown names.
void apply_preset(ExperimentConfig& config);
std::vector<std::string> preset_names(ExperimentKind kind);

// Canonical fixed-key-order encoding, and the manifest JSON derived from it
// (kind, config, 64-bit FNV-1a config hash, seed, library version).
std::string config_json(const ExperimentConfig& config);
std::string manifest_json(const ExperimentConfig& config);

// Solution space / proposal mixture described by the config; throws
// std::invalid_argument on malformed specs or incompatible systems.
Space space_of(const ExperimentConfig& config);
MixtureProposal mixture_of(const ExperimentConfig& config);

struct GradConvCurve {
    std::string label;
    std::vector<std::int64_t> steps;  // T = k0+1 .. k
    std::vector<double> mse;          // instance-averaged squared distance to the marginal
};

// Ergodic-average estimates of the exact marginal on m random instances;
// one curve point per prefix length T.
GradConvCurve gradient_convergence_curve(const ExperimentConfig& config,
                                         const std::string& label = "");

// CSV: manifest comment, header, then one row per T (presets add a curve column).
std::string run_gradient_convergence(const ExperimentConfig& config);

// JSON lines: manifest, then per-step records averaged over the m instances,
// one labeled block per preset variant.
std::string run_unconditional(const ExperimentConfig& config);
std::string run_conditional(const ExperimentConfig& config);

struct RoutingCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;  // pass means measured <= threshold
    std::string detail;
};

struct RoutingVerifyReport {
    std::vector<RoutingCheck> checks;
    bool all_pass = false;
};

// Runs the routing proposal invariants (support symmetry, density/frequency
// agreement, chain stationarity, unit correction ratios) against the
// configured or bundled instance.
RoutingVerifyReport verify_routing(const ExperimentConfig& config);

// JSON report with the manifest and one entry per check.
std::string routing_report_json(const ExperimentConfig& config, const RoutingVerifyReport& report);
std::string run_routing_verify(const ExperimentConfig& config);

// Dispatches on config.kind and returns the emitted text.
std::string run_experiment(const ExperimentConfig& config);

// Writes to config.out ("-" = stdout); throws std::runtime_error on I/O failure.
void write_output(const ExperimentConfig& config, const std::string& text);

}  // namespace lsmc
