#include "kabb/commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "kabb/bandit.hpp"
#include "kabb/error.hpp"
#include "kabb/experiment.hpp"
#include "kabb/graph.hpp"
#include "kabb/router.hpp"

namespace kabb::commands {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot read ") + what + " " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int report(const Error& e, std::ostream& err) {
    err << e.what() << '\n';
    return static_cast<int>(e.code());
}

// Shared error funnel: kabb errors carry their exit code, anything else is a
// validation-class failure.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        return report(e, err);
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::io);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::validation);
    }
}

}  // namespace

fs::path default_lexicon_path(const fs::path& graph) {
    fs::path p = graph;
    p.replace_extension();
    p += ".lexicon.json";
    return p;
}

int validate(const fs::path& graph_path, bool strict, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const std::string text = read_text(graph_path, "graph");
        out << "PASS readable " << graph_path.string() << '\n';
        std::vector<std::string> warnings;
        GraphLoadOptions opts;
        opts.strict = strict;
        KnowledgeGraph g = [&] {
            try {
                return load_graph_text(text, opts, &warnings);
            } catch (const Error& e) {
                out << "FAIL " << e.what() << '\n';
                throw;
            }
        }();
        out << "PASS json syntax\n";
        out << "PASS concept ids contiguous (" << g.concept_count() << " concepts)\n";
        out << "PASS edges reference known concepts, no self-loops (" << g.edges().size() << " edges)\n";
        out << "PASS expert capabilities sized and non-negative (" << g.expert_count() << " experts)\n";
        out << "PASS synergy matrix " << (g.synergy_matrix() ? "square, symmetric, unit diagonal" : "absent")
            << '\n';
        out << "PASS depths consistent with roots (max depth " << g.max_depth() << ", diameter cap "
            << g.diameter_cap() << ")\n";
        for (const auto& w : warnings) out << "WARN " << w << '\n';

        const fs::path lex = default_lexicon_path(graph_path);
        if (fs::exists(lex)) {
            try {
                ConceptLexicon l = load_lexicon_file(lex.string());
                l.check_against(g);
                out << "PASS lexicon " << lex.filename().string() << " (" << l.size() << " phrases)\n";
            } catch (const Error& e) {
                out << "FAIL lexicon " << lex.filename().string() << ": " << e.what() << '\n';
                throw;
            }
        }
        out << "valid\n";
        return 0;
    });
}

int simulate(const fs::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = experiment::load_experiment_config(config_path);
        const KnowledgeGraph graph = load_graph_file(cfg.graph.string());
        const auto result = experiment::simulate(cfg, graph, true);

        for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                std::ostringstream csv;
                sim::write_curve_csv(csv, result.curves[p][s]);
                const std::string name = cfg.policies[p].name() + "_seed" + std::to_string(cfg.seeds[s]) + ".csv";
                experiment::write_file_atomic(cfg.output_dir / "curves" / name, csv.str());
            }
        }
        std::ostringstream summary;
        experiment::write_summary_csv(summary, result, cfg.steps);
        experiment::write_file_atomic(cfg.output_dir / "summary.csv", summary.str());
        experiment::write_file_atomic(cfg.output_dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");

        out << "config " << cfg.to_json().dump() << '\n';
        out << summary.str();
        out << "wrote " << cfg.policies.size() * cfg.seeds.size() << " curves and summary.csv to "
            << cfg.output_dir.string() << '\n';
        return 0;
    });
}

int sweep(const fs::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = experiment::load_experiment_config(config_path);
        if (cfg.sweep.empty()) throw ConfigError("config has no sweep axes");
        const KnowledgeGraph graph = load_graph_file(cfg.graph.string());
        const auto rows = experiment::sweep(cfg, graph);
        std::ostringstream csv;
        experiment::write_sweep_csv(csv, cfg, rows);
        experiment::write_file_atomic(cfg.output_dir / "sweep.csv", csv.str());
        experiment::write_file_atomic(cfg.output_dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");
        out << "config " << cfg.to_json().dump() << '\n';
        out << csv.str();
        out << "wrote sweep.csv to " << cfg.output_dir.string() << '\n';
        return 0;
    });
}

nlohmann::json route_trace(const RouteOptions& o) {
    const KnowledgeGraph graph = load_graph_file(o.graph.string());
    const fs::path lex_path = o.lexicon ? *o.lexicon : default_lexicon_path(o.graph);
    if (!fs::exists(lex_path)) throw IoError("lexicon " + lex_path.string() + " not found (use --lexicon)");
    ConceptLexicon lexicon = load_lexicon_file(lex_path.string());

    BanditConfig config;
    if (o.bandit_config) {
        try {
            config = BanditConfig::from_json(nlohmann::json::parse(read_text(*o.bandit_config, "bandit config")));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(o.bandit_config->string() + ": " + e.what());
        }
    }
    PosteriorStore store =
        o.snapshot ? restore_text(read_text(*o.snapshot, "snapshot"), config) : PosteriorStore(config);

    Router router(graph, std::move(lexicon), config, std::move(store));
    Rng rng = make_stream(o.seed, "route");
    const std::string task_id = "route-" + std::to_string(o.seed);
    const RouteDecision d = router.route(o.text, rng, task_id);

    const PosteriorStore before = router.store();
    const auto confidences = expert_confidences(d, before, graph, config, router.synergy());

    std::vector<std::shared_ptr<ExpertAdapter>> adapters;
    for (ExpertId e : d.selection.subset.ids()) {
        adapters.push_back(std::make_shared<MockExpertAdapter>(graph.expert(e), o.seed));
    }
    AdapterRequest request{task_id, o.text, d.selection.concepts};
    const auto responses = dispatch(adapters, request, std::chrono::milliseconds(o.timeout_ms));

    std::vector<FusionInput> fusion;
    nlohmann::json experts = nlohmann::json::array();
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& r = responses[i];
        FusionInput in;
        in.expert_id = r.expert_id;
        in.confidence = confidences[i];
        if (r.response) {
            in.text = r.response->text;
            in.self_score = r.response->self_score;
        }
        fusion.push_back(in);
        experts.push_back({{"expert_id", r.expert_id},
                           {"name", graph.expert(r.expert_id).name},
                           {"confidence", confidences[i]},
                           {"self_score", in.self_score},
                           {"responded", r.response.has_value()},
                           {"error", r.error}});
    }
    const AggregatedAnswer answer = aggregate(fusion);
    for (std::size_t i = 0; i < answer.weights.size(); ++i) experts[i]["weight"] = answer.weights[i];

    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : d.extraction.matches) {
        matches.push_back({{"phrase", m.phrase}, {"concept", m.concept_id}, {"weight", m.weight}});
    }
    nlohmann::json concepts = nlohmann::json::array();
    for (ConceptId c : d.selection.concepts) {
        concepts.push_back({{"id", c},
                            {"name", graph.concept_at(c).name},
                            {"requirement", d.extraction.task.requirement[c]}});
    }
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : d.selection.candidates) {
        candidates.push_back({{"subset", c.key.str()}, {"confidence", c.confidence}});
    }

    nlohmann::json trace;
    trace["task_id"] = task_id;
    trace["seed"] = o.seed;
    trace["text"] = o.text;
    trace["config"] = config.to_json();
    trace["matches"] = matches;
    trace["concepts"] = concepts;
    trace["pool"] = d.selection.pool;
    trace["subset"] = d.selection.subset.str();
    trace["team_confidence"] = d.selection.confidence;
    trace["distance"] = d.selection.distance;
    trace["km"] = d.selection.km;
    trace["filter_fallback"] = d.selection.filter_fallback;
    trace["candidates"] = candidates;
    trace["experts"] = experts;
    trace["uniform_fallback"] = answer.uniform_fallback;
    trace["answer"] = answer.text;

    if (o.feedback) {
        const SubsetPosterior p = router.ingest_feedback(task_id, *o.feedback);
        trace["feedback"] = {{"reward", *o.feedback}, {"alpha", p.alpha}, {"beta", p.beta}};
    }
    if (o.save_snapshot) {
        experiment::write_file_atomic(*o.save_snapshot, snapshot_text(router.store()));
        trace["saved_snapshot"] = o.save_snapshot->string();
    }
    return trace;
}

int route(const RouteOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        out << route_trace(o).dump(2) << '\n';
        return 0;
    });
}

}  // namespace kabb::commands
