#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lsmc/experiments.hpp"

namespace {

void add_flags(CLI::App* cmd, lsmc::ExperimentConfig& config) {
    cmd->add_option("--space", config.space, "solution space: hypercube | topk");
    cmd->add_option("-d,--dim", config.d, "space dimension");
    cmd->add_option("--kappa", config.kappa, "ones count on the topk space");
    cmd->add_option("--mixture", config.mixture,
                    "proposal members, kind:radius[,kind:radius...] with kind in ball|shell|swap");
    cmd->add_option("-t,--temperature", config.t, "final temperature");
    cmd->add_option("--t0", config.t0, "initial temperature; values above t anneal geometrically");
    cmd->add_option("--gamma", config.gamma, "annealing decay per step");
    cmd->add_option("-K,--iterations", config.k, "chain length per estimate");
    cmd->add_option("--K0,--burn-in", config.k0, "burn-in iterations");
    cmd->add_option("-C,--chains", config.c, "parallel chains per estimate");
    cmd->add_option("-M,--instances", config.m, "problem instances to average over");
    cmd->add_option("-N,--samples", config.n, "dataset size (routing-verify: draws per check)");
    cmd->add_option("--n-max", config.n_max, "optimizer steps");
    cmd->add_option("--feature-dim", config.feature_dim, "conditional feature dimension");
    cmd->add_option("--batch", config.batch, "conditional minibatch size");
    cmd->add_option("--init", config.init,
                    "chain initialization: random | data-based | persistent | ground-truth");
    cmd->add_option("--seed", config.seed, "base seed; everything else derives from it");
    cmd->add_option("--preset", config.preset,
                    "named hyperparameter bundle; overrides the flags above, seed and out stay");
    cmd->add_option("--instance", config.instance,
                    "routing instance JSON (default: the bundled 3-request fixture)");
    cmd->add_option("-o,--out", config.out, "output path, - for stdout");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"local-search MCMC experiment runner"};
    app.require_subcommand(1);

    lsmc::ExperimentConfig config;
    auto* gradconv = app.add_subcommand(
        "gradconv", "marginal-estimation error curves over chain length (CSV)");
    auto* fit_uncond = app.add_subcommand(
        "fit-uncond", "unconditional parameter fitting metrics (JSON lines)");
    auto* fit_cond = app.add_subcommand(
        "fit-cond", "conditional linear-model fitting metrics (JSON lines)");
    auto* routing = app.add_subcommand(
        "routing-verify", "routing proposal invariant checks (JSON report)");
    for (auto* cmd : {gradconv, fit_uncond, fit_cond, routing}) add_flags(cmd, config);

    CLI11_PARSE(app, argc, argv);

    if (gradconv->parsed()) config.kind = lsmc::ExperimentKind::gradient_convergence;
    if (fit_uncond->parsed()) config.kind = lsmc::ExperimentKind::unconditional;
    if (fit_cond->parsed()) config.kind = lsmc::ExperimentKind::conditional;
    if (routing->parsed()) config.kind = lsmc::ExperimentKind::routing_verify;

    try {
        lsmc::apply_preset(config);
        if (config.kind == lsmc::ExperimentKind::routing_verify) {
            const auto report = lsmc::verify_routing(config);
            lsmc::write_output(config, lsmc::routing_report_json(config, report));
            if (!report.all_pass) {
                std::cerr << "routing verification failed" << std::endl;
                return 1;
            }
            return 0;
        }
        lsmc::write_output(config, lsmc::run_experiment(config));
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << std::endl;
        return 1;
    }
    return 0;
}
