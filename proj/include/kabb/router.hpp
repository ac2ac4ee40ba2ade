#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kabb/bandit.hpp"
#include "kabb/distance.hpp"
#include "kabb/graph.hpp"
#include "kabb/random.hpp"

namespace kabb {

struct LexiconEntry {
    ConceptId concept_id = 0;
    double weight = 1.0;  // (0, 1]
};

// Lowercase keyword or phrase -> concept demand.
class ConceptLexicon {
public:
    ConceptLexicon() = default;
    explicit ConceptLexicon(std::map<std::string, LexiconEntry> entries);

    const std::map<std::string, LexiconEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Throws ValidationError when an entry names a concept the graph lacks.
    void check_against(const KnowledgeGraph& graph) const;

    // Phrases ordered longest first, then lexicographically.
    const std::vector<std::string>& phrases() const noexcept { return by_length_; }

    nlohmann::json to_json() const;

private:
    std::map<std::string, LexiconEntry> entries_;
    std::vector<std::string> by_length_;
};

// {"keyword": {"concept": id, "weight": w}, ...}
ConceptLexicon load_lexicon(const nlohmann::json& document);
ConceptLexicon load_lexicon_file(const std::string& path);

struct LexiconMatch {
    std::string phrase;
    std::size_t offset = 0;  // byte offset in the instruction
    ConceptId concept_id = 0;
    double weight = 0.0;
};

struct Extraction {
    TaskSpec task;
    std::vector<LexiconMatch> matches;
    bool unroutable = false;  // no lexicon hit at all
};

// Case-insensitive, longest phrase first, whole words only. The requirement
// vector sums matched weights per concept and is scaled so its maximum is 1.
Extraction extract_concepts(std::string_view text, const ConceptLexicon& lexicon,
                            const KnowledgeGraph& graph, std::string task_id = "task");

// --- expert adapters -------------------------------------------------------

struct AdapterRequest {
    std::string task_id;
    std::string text;
    std::vector<ConceptId> concepts;

    nlohmann::json to_json() const;
    static AdapterRequest from_json(const nlohmann::json& j);
};

struct AdapterResponse {
    std::string text;
    double self_score = 0.0;  // [0,1]

    nlohmann::json to_json() const;
    static AdapterResponse from_json(const nlohmann::json& j);
};

class ExpertAdapter {
public:
    virtual ~ExpertAdapter() = default;
    virtual ExpertId expert_id() const = 0;
    // Mocks must return the same response for the same request.
    virtual bool deterministic() const { return true; }
    virtual AdapterResponse respond(const AdapterRequest& request) = 0;
};

// Canned adapter: self-score is the expert's mean capability on the requested
// concepts, nudged by a seeded hash of the request.
class MockExpertAdapter final : public ExpertAdapter {
public:
    MockExpertAdapter(ExpertProfile profile, std::uint64_t seed,
                      std::chrono::milliseconds latency = std::chrono::milliseconds(0));

    ExpertId expert_id() const override { return profile_.expert_id; }
    AdapterResponse respond(const AdapterRequest& request) override;

private:
    ExpertProfile profile_;
    std::uint64_t seed_;
    std::chrono::milliseconds latency_;
};

struct ExpertResponse {
    ExpertId expert_id = 0;
    std::optional<AdapterResponse> response;  // empty on timeout or adapter failure
    std::string error;
};

// Calls every adapter concurrently; adapters that miss the deadline or throw
// yield an empty response. Results follow the adapter order.
std::vector<ExpertResponse> dispatch(const std::vector<std::shared_ptr<ExpertAdapter>>& adapters,
                                     const AdapterRequest& request,
                                     std::chrono::milliseconds timeout);

struct FusionInput {
    ExpertId expert_id = 0;
    std::string text;
    double self_score = 0.0;
    double confidence = 0.0;  // adjusted confidence of the expert for the task
};

struct AggregatedAnswer {
    std::string text;
    std::vector<ExpertId> experts;  // input order
    std::vector<double> weights;    // parallel to `experts`, sum to 1
    bool uniform_fallback = false;  // every product was zero
};

AggregatedAnswer aggregate(const std::vector<FusionInput>& inputs);

// --- routing ---------------------------------------------------------------

struct RouteDecision {
    Extraction extraction;
    SelectionResult selection;
    Step step = 0;  // decision clock used for the confidence terms
};

// Pure: depends only on its arguments and the rng state.
RouteDecision route(std::string_view text, const PosteriorStore& store, const KnowledgeGraph& graph,
                    const ConceptLexicon& lexicon, const BanditConfig& config,
                    const SynergyModel& synergy, Rng& rng, std::string task_id = "task");

// Per-expert adjusted confidence for fusion (singleton subsets, mean mode).
std::vector<double> expert_confidences(const RouteDecision& decision, const PosteriorStore& store,
                                       const KnowledgeGraph& graph, const BanditConfig& config,
                                       const SynergyModel& synergy);

inline constexpr std::size_t kDefaultTraceCapacity = 10'000;

// Stateful pipeline: owns the store and a bounded log of decisions awaiting
// feedback. All members are safe to call from several threads.
class Router {
public:
    Router(const KnowledgeGraph& graph, ConceptLexicon lexicon, BanditConfig config,
           PosteriorStore store, std::size_t trace_capacity = kDefaultTraceCapacity);

    // Routes and records the decision under `task_id` (or a generated id).
    RouteDecision route(std::string_view text, Rng& rng, std::optional<std::string> task_id = {});

    // Applies the outcome to the logged subset with the match index recorded at
    // selection time. Each task id accepts one outcome.
    SubsetPosterior ingest_feedback(const std::string& task_id, double reward);

    PosteriorStore store() const;
    std::size_t trace_size() const;
    const KnowledgeGraph& graph() const noexcept { return *graph_; }
    const ConceptLexicon& lexicon() const noexcept { return lexicon_; }
    const BanditConfig& config() const noexcept { return config_; }
    const SynergyModel& synergy() const noexcept { return synergy_; }

private:
    struct Trace {
        SubsetKey subset;
        double km = 0.0;
        Step step = 0;
        bool consumed = false;
    };

    const KnowledgeGraph* graph_;
    ConceptLexicon lexicon_;
    BanditConfig config_;
    SynergyModel synergy_;
    std::size_t capacity_;

    mutable std::mutex mu_;
    PosteriorStore store_;
    std::deque<std::string> order_;
    std::map<std::string, Trace> traces_;
    std::uint64_t sequence_ = 0;
};

}  // namespace kabb
