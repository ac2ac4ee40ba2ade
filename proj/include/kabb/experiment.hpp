#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kabb/bandit.hpp"
#include "kabb/sim.hpp"

namespace kabb::experiment {

struct SweepAxis {
    std::string parameter;
    std::vector<double> values;
};

// Parameters a sweep may vary.
const std::vector<std::string>& sweep_parameters();

struct ExperimentConfig {
    int version = 1;
    std::filesystem::path graph;
    BanditConfig bandit;
    sim::EnvironmentSpec environment;
    std::optional<Step> drift_every;  // shuffle skills every N steps
    std::vector<sim::PolicySpec> policies;
    Step steps = 1000;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "out";
    double decay_period = 1.0;  // steps over which a decay factor applies: kappa = -ln(gamma) / period
    std::vector<SweepAxis> sweep;
    std::size_t workers = 0;  // 0 = hardware concurrency

    // Fully resolved document; echoed next to every output.
    nlohmann::json to_json() const;
};

// Relative paths resolve against `base_dir`. Every key is checked.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir);
// Reads, parses and validates; honours KABB_OUTPUT_DIR.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Sets one sweep parameter on the config. Throws ConfigError for unknown names.
void apply_parameter(ExperimentConfig& config, const std::string& name, double value);

// Environment for a seed, with the drift schedule expanded.
sim::EnvironmentSpec environment_for(const ExperimentConfig& config);

struct PolicySummary {
    std::string policy;
    std::size_t runs = 0;
    sim::Summary summary;
    std::vector<double> terminal;  // per seed, config order
    std::vector<double> success;
};

// Runs every (policy, seed) pair on a bounded worker pool. Results follow
// config order regardless of scheduling.
struct SimulationResult {
    std::vector<PolicySummary> policies;
    std::vector<std::vector<sim::RegretCurve>> curves;  // [policy][seed]
};
SimulationResult simulate(const ExperimentConfig& config, const KnowledgeGraph& graph,
                          bool keep_curves = true);

inline constexpr const char* kSummaryCsvHeader =
    "policy,runs,steps,terminal_mean,terminal_std,terminal_min,terminal_q25,terminal_median,"
    "terminal_q75,terminal_max,success_rate_mean,success_rate_std,loglog_slope";
void write_summary_csv(std::ostream& out, const SimulationResult& result, Step steps);

struct SweepRow {
    std::size_t point = 0;
    std::vector<double> values;  // one per axis
    std::string policy;
    std::string metric;  // terminal_regret | success_rate
    double mean = 0.0;
    double std = 0.0;
};

std::vector<SweepRow> sweep(const ExperimentConfig& config, const KnowledgeGraph& graph);
void write_sweep_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<SweepRow>& rows);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace kabb::experiment
