#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace kabb {

using ConceptId = std::uint32_t;
using ExpertId = std::uint32_t;

// Capability/requirement weights strictly above this value activate a concept.
inline constexpr double kDefaultActivationThreshold = 0.5;

// Sorted, duplicate-free set of concept ids.
class ConceptSet {
public:
    ConceptSet() = default;
    explicit ConceptSet(std::vector<ConceptId> ids);

    static ConceptSet from_weights(std::span<const double> weights, double threshold);

    std::span<const ConceptId> ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    bool contains(ConceptId id) const noexcept;

    ConceptSet united(const ConceptSet& other) const;
    ConceptSet minus(const ConceptSet& other) const;
    std::size_t intersection_size(const ConceptSet& other) const noexcept;
    std::size_t union_size(const ConceptSet& other) const noexcept;

    friend bool operator==(const ConceptSet&, const ConceptSet&) = default;

private:
    std::vector<ConceptId> ids_;
};

struct Concept {
    ConceptId id = 0;
    std::string name;
    int depth = 0;
    bool root = false;

    friend bool operator==(const Concept&, const Concept&) = default;
};

struct ExpertProfile {
    ExpertId expert_id = 0;
    std::string name;
    std::vector<double> capability;
    ConceptSet concepts;  // capability > activation threshold

    friend bool operator==(const ExpertProfile&, const ExpertProfile&) = default;
};

struct TaskSpec {
    std::string task_id;
    std::vector<double> requirement;
    ConceptSet concepts;      // requirement > activation threshold
    double difficulty = 0.0;  // mean depth of `concepts`; 0 when empty

    bool routable() const noexcept { return !concepts.empty(); }
};

using ConceptEdge = std::pair<ConceptId, ConceptId>;

struct GraphLoadOptions {
    bool strict = false;  // reject unknown keys instead of warning
    double activation_threshold = kDefaultActivationThreshold;
};

class KnowledgeGraph {
public:
    // Builds and validates a graph. Concepts must carry ids 0..n-1 (any order).
    // Missing depths are filled by BFS from root concepts.
    KnowledgeGraph(std::vector<Concept> concepts,
                   std::vector<ConceptEdge> edges,
                   std::vector<ExpertProfile> experts,
                   std::optional<std::vector<std::vector<double>>> synergy_matrix = std::nullopt,
                   double activation_threshold = kDefaultActivationThreshold);

    std::size_t concept_count() const noexcept { return concepts_.size(); }
    std::size_t expert_count() const noexcept { return experts_.size(); }

    std::span<const Concept> concepts() const noexcept { return concepts_; }
    std::span<const ConceptEdge> edges() const noexcept { return edges_; }
    std::span<const ExpertProfile> experts() const noexcept { return experts_; }

    const Concept& concept_at(ConceptId id) const;
    const ExpertProfile& expert(ExpertId id) const;
    bool has_expert(ExpertId id) const noexcept { return expert_index_.contains(id); }
    // Position of the expert in document order (row index of the synergy matrix).
    std::size_t expert_position(ExpertId id) const;

    double activation_threshold() const noexcept { return activation_threshold_; }

    // Hop count of the shortest path; nullopt when disconnected.
    std::optional<int> shortest_path(ConceptId a, ConceptId b) const;
    // Shortest path with disconnected pairs replaced by diameter_cap().
    int capped_path(ConceptId a, ConceptId b) const;
    // Largest finite component diameter, at least 1.
    int diameter_cap() const noexcept { return diameter_cap_; }
    int max_depth() const noexcept { return max_depth_; }

    const std::optional<std::vector<std::vector<double>>>& synergy_matrix() const noexcept {
        return synergy_matrix_;
    }

    // Experts whose concept set intersects `concepts`, ascending by id.
    std::vector<ExpertId> experts_active_on(std::span<const ConceptId> concepts) const;

    TaskSpec make_task(std::string task_id, std::vector<double> requirement) const;

    nlohmann::json to_json() const;

    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b);
    friend KnowledgeGraph load_graph(const nlohmann::json&, const GraphLoadOptions&,
                                     std::vector<std::string>*);

private:
    std::vector<Concept> concepts_;
    std::vector<ConceptEdge> edges_;
    std::vector<ExpertProfile> experts_;
    std::optional<std::vector<std::vector<double>>> synergy_matrix_;
    double activation_threshold_;

    std::unordered_map<ExpertId, std::size_t> expert_index_;
    std::vector<int> distances_;  // row-major all-pairs hop counts, -1 = disconnected
    std::vector<int> depth_from_roots_;
    int diameter_cap_ = 1;
    int max_depth_ = 0;
};

// Parses a graph document. Warnings about ignored keys are appended to
// `warnings` when non-null (non-strict mode only).
KnowledgeGraph load_graph(const nlohmann::json& document,
                          const GraphLoadOptions& options = {},
                          std::vector<std::string>* warnings = nullptr);
KnowledgeGraph load_graph_text(std::string_view text,
                               const GraphLoadOptions& options = {},
                               std::vector<std::string>* warnings = nullptr);
KnowledgeGraph load_graph_file(const std::string& path,
                               const GraphLoadOptions& options = {},
                               std::vector<std::string>* warnings = nullptr);

// Union of the members' concept sets.
ConceptSet subset_concepts(const KnowledgeGraph& graph, std::span<const ExpertId> subset);

// |A ∩ B| / |A ∪ B|, 0 when the union is empty.
double jaccard(const ConceptSet& a, const ConceptSet& b) noexcept;

double jaccard_overlap(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                       const TaskSpec& task);

// Sum of capped shortest-path lengths over pairs (a, b) with a in A \ B and b in B \ A.
std::size_t dependency_edge_count(const KnowledgeGraph& graph, const ConceptSet& subset_concepts,
                                  const ConceptSet& task_concepts);
std::size_t dependency_edge_count(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                                  const TaskSpec& task);

// Mean hierarchy depth of the concepts.
double mean_depth(const KnowledgeGraph& graph, const ConceptSet& concepts);
double task_difficulty(const KnowledgeGraph& graph, const TaskSpec& task);

}  // namespace kabb
