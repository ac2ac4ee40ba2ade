#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace kabb::commands {

// Each command reports to `out`/`err` and returns a process exit code.
int validate(const std::filesystem::path& graph, bool strict, std::ostream& out, std::ostream& err);
int simulate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int sweep(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct RouteOptions {
    std::filesystem::path graph;
    std::string text;
    std::optional<std::filesystem::path> lexicon;   // default: <graph stem>.lexicon.json
    std::optional<std::filesystem::path> snapshot;  // fresh priors when absent
    std::optional<std::filesystem::path> bandit_config;
    std::optional<std::filesystem::path> save_snapshot;
    std::optional<double> feedback;  // simulated outcome applied after routing
    std::uint64_t seed = 0;
    int timeout_ms = 2000;
};

// The decision trace as a document; throws kabb::Error on failure.
nlohmann::json route_trace(const RouteOptions& options);
int route(const RouteOptions& options, std::ostream& out, std::ostream& err);

// Lexicon found next to a graph file: foo.json -> foo.lexicon.json.
std::filesystem::path default_lexicon_path(const std::filesystem::path& graph);

}  // namespace kabb::commands
