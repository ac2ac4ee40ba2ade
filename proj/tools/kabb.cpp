// kabb: validate graphs, run regret simulations and sweeps, route one instruction.

#include <iostream>

#include <CLI11.hpp>

#include "kabb/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-aware expert routing toolkit"};
    app.require_subcommand(1);

    std::string graph_path, config_path, text;
    bool strict = false;

    auto* validate = app.add_subcommand("validate", "check a knowledge graph document");
    validate->add_option("graph", graph_path, "graph JSON")->required();
    validate->add_flag("--strict", strict, "reject unknown keys");

    auto* simulate = app.add_subcommand("simulate", "run policies over seeds and write regret CSVs");
    simulate->add_option("config", config_path, "experiment config JSON")->required();

    auto* sweep = app.add_subcommand("sweep", "run a parameter grid and write sweep.csv");
    sweep->add_option("config", config_path, "experiment config JSON")->required();

    kabb::commands::RouteOptions ro;
    std::string lexicon, snapshot, bandit, save;
    double feedback = -1.0;
    auto* route = app.add_subcommand("route", "route one instruction and print the decision trace");
    route->add_option("graph", graph_path, "graph JSON")->required();
    route->add_option("text", text, "instruction")->required();
    route->add_option("--snapshot", snapshot, "posterior snapshot to start from");
    route->add_option("--seed", ro.seed, "random seed")->default_val(0);
    route->add_option("--lexicon", lexicon, "concept lexicon (default: <graph>.lexicon.json)");
    route->add_option("--config", bandit, "bandit config JSON");
    route->add_option("--feedback", feedback, "simulated outcome in [0,1] applied after routing");
    route->add_option("--save-snapshot", save, "write the store after feedback");
    route->add_option("--timeout-ms", ro.timeout_ms, "per-expert dispatch timeout")->default_val(2000);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*validate) return kabb::commands::validate(graph_path, strict, std::cout, std::cerr);
    if (*simulate) return kabb::commands::simulate(config_path, std::cout, std::cerr);
    if (*sweep) return kabb::commands::sweep(config_path, std::cout, std::cerr);

    ro.graph = graph_path;
    ro.text = text;
    if (!lexicon.empty()) ro.lexicon = lexicon;
    if (!snapshot.empty()) ro.snapshot = snapshot;
    if (!bandit.empty()) ro.bandit_config = bandit;
    if (!save.empty()) ro.save_snapshot = save;
    if (route->count("--feedback")) ro.feedback = feedback;
    return kabb::commands::route(ro, std::cout, std::cerr);
}
