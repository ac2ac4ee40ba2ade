#include "kabb/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "kabb/error.hpp"

namespace kabb {

// ---------------------------------------------------------------------------
// ConceptSet

ConceptSet::ConceptSet(std::vector<ConceptId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

ConceptSet ConceptSet::from_weights(std::span<const double> weights, double threshold) {
    std::vector<ConceptId> ids;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > threshold) ids.push_back(static_cast<ConceptId>(i));
    }
    ConceptSet out;
    out.ids_ = std::move(ids);
    return out;
}

bool ConceptSet::contains(ConceptId id) const noexcept {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

ConceptSet ConceptSet::united(const ConceptSet& other) const {
    ConceptSet out;
    out.ids_.reserve(ids_.size() + other.ids_.size());
    std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                   std::back_inserter(out.ids_));
    return out;
}

ConceptSet ConceptSet::minus(const ConceptSet& other) const {
    ConceptSet out;
    std::set_difference(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                        std::back_inserter(out.ids_));
    return out;
}

std::size_t ConceptSet::intersection_size(const ConceptSet& other) const noexcept {
    std::size_t n = 0;
    auto a = ids_.begin();
    auto b = other.ids_.begin();
    while (a != ids_.end() && b != other.ids_.end()) {
        if (*a < *b) {
            ++a;
        } else if (*b < *a) {
            ++b;
        } else {
            ++n;
            ++a;
            ++b;
        }
    }
    return n;
}

std::size_t ConceptSet::union_size(const ConceptSet& other) const noexcept {
    return ids_.size() + other.ids_.size() - intersection_size(other);
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

namespace {

std::vector<int> bfs(const std::vector<std::vector<ConceptId>>& adjacency,
                     std::span<const ConceptId> sources) {
    std::vector<int> dist(adjacency.size(), -1);
    std::queue<ConceptId> frontier;
    for (ConceptId s : sources) {
        if (dist[s] != 0) {
            dist[s] = 0;
            frontier.push(s);
        }
    }
    while (!frontier.empty()) {
        ConceptId u = frontier.front();
        frontier.pop();
        for (ConceptId v : adjacency[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                frontier.push(v);
            }
        }
    }
    return dist;
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<Concept> concepts,
                               std::vector<ConceptEdge> edges,
                               std::vector<ExpertProfile> experts,
                               std::optional<std::vector<std::vector<double>>> synergy_matrix,
                               double activation_threshold)
    : concepts_(std::move(concepts)),
      experts_(std::move(experts)),
      synergy_matrix_(std::move(synergy_matrix)),
      activation_threshold_(activation_threshold) {
    const std::size_t n = concepts_.size();
    if (n == 0) throw ValidationError("graph must declare at least one concept");

    std::sort(concepts_.begin(), concepts_.end(),
              [](const Concept& a, const Concept& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < n; ++i) {
        if (concepts_[i].id != i) {
            if (i > 0 && concepts_[i].id == concepts_[i - 1].id)
                throw ValidationError("duplicate concept id " + std::to_string(concepts_[i].id));
            throw ValidationError("concept ids must be 0.." + std::to_string(n - 1) +
                                  "; found " + std::to_string(concepts_[i].id));
        }
        if (concepts_[i].depth < 0)
            throw ValidationError("concept " + std::to_string(i) + " has negative depth");
        if (concepts_[i].root && concepts_[i].depth != 0)
            throw ValidationError("root concept " + std::to_string(i) + " must have depth 0");
    }

    std::set<ConceptEdge> unique_edges;
    for (auto [a, b] : edges) {
        if (a >= n || b >= n) {
            throw ValidationError("edge [" + std::to_string(a) + "," + std::to_string(b) +
                                  "] references a concept outside 0.." + std::to_string(n - 1));
        }
        if (a == b) throw ValidationError("self-loop edge on concept " + std::to_string(a));
        unique_edges.emplace(std::min(a, b), std::max(a, b));
    }
    edges_.assign(unique_edges.begin(), unique_edges.end());

    std::vector<std::vector<ConceptId>> adjacency(n);
    for (auto [a, b] : edges_) {
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }

    distances_.assign(n * n, -1);
    for (ConceptId s = 0; s < n; ++s) {
        const ConceptId src[] = {s};
        auto row = bfs(adjacency, src);
        std::copy(row.begin(), row.end(), distances_.begin() + static_cast<std::ptrdiff_t>(s * n));
        for (ConceptId t = 0; t < n; ++t) {
            if (row[t] >= 0) diameter_cap_ = std::max(diameter_cap_, row[t]);
        }
    }

    // Depths are recomputed from roots for concepts that did not declare one.
    // Components without a flagged root are anchored at their lowest id.
    std::vector<ConceptId> roots;
    for (const auto& c : concepts_) {
        if (c.root) roots.push_back(c.id);
    }
    auto from_roots = bfs(adjacency, roots);
    for (ConceptId c = 0; c < n; ++c) {
        if (from_roots[c] >= 0) continue;
        const ConceptId src[] = {c};
        auto local = bfs(adjacency, src);
        for (ConceptId t = 0; t < n; ++t) {
            if (local[t] >= 0 && from_roots[t] < 0) from_roots[t] = local[t];
        }
    }
    depth_from_roots_ = std::move(from_roots);

    for (const auto& c : concepts_) max_depth_ = std::max(max_depth_, c.depth);

    for (std::size_t i = 0; i < experts_.size(); ++i) {
        auto& e = experts_[i];
        if (!expert_index_.emplace(e.expert_id, i).second)
            throw ValidationError("duplicate expert_id " + std::to_string(e.expert_id));
        if (e.capability.size() != n) {
            throw ValidationError("expert " + std::to_string(e.expert_id) + " capability has " +
                                  std::to_string(e.capability.size()) + " entries, expected " +
                                  std::to_string(n));
        }
        for (double v : e.capability) {
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("expert " + std::to_string(e.expert_id) +
                                      " capability entries must be finite and >= 0");
        }
        e.concepts = ConceptSet::from_weights(e.capability, activation_threshold_);
    }

    if (synergy_matrix_) {
        const auto& m = *synergy_matrix_;
        const std::size_t k = experts_.size();
        if (m.size() != k) throw ValidationError("synergy_matrix must have one row per expert");
        for (std::size_t i = 0; i < k; ++i) {
            if (m[i].size() != k)
                throw ValidationError("synergy_matrix row " + std::to_string(i) + " has wrong length");
            for (std::size_t j = 0; j < k; ++j) {
                double v = m[i][j];
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw ValidationError("synergy_matrix entries must lie in [0,1]");
                if (i == j && v != 1.0)
                    throw ValidationError("synergy_matrix diagonal must be 1");
            }
        }
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                if (m[i][j] != m[j][i]) throw ValidationError("synergy_matrix must be symmetric");
            }
        }
    }
}

const Concept& KnowledgeGraph::concept_at(ConceptId id) const {
    if (id >= concepts_.size()) throw DomainError("unknown concept id " + std::to_string(id));
    return concepts_[id];
}

const ExpertProfile& KnowledgeGraph::expert(ExpertId id) const {
    return experts_[expert_position(id)];
}

std::size_t KnowledgeGraph::expert_position(ExpertId id) const {
    auto it = expert_index_.find(id);
    if (it == expert_index_.end()) throw DomainError("unknown expert id " + std::to_string(id));
    return it->second;
}

std::optional<int> KnowledgeGraph::shortest_path(ConceptId a, ConceptId b) const {
    const std::size_t n = concepts_.size();
    if (a >= n || b >= n) throw DomainError("concept id out of range");
    int d = distances_[a * n + b];
    if (d < 0) return std::nullopt;
    return d;
}

int KnowledgeGraph::capped_path(ConceptId a, ConceptId b) const {
    return shortest_path(a, b).value_or(diameter_cap_);
}

std::vector<ExpertId> KnowledgeGraph::experts_active_on(std::span<const ConceptId> concepts) const {
    std::vector<ExpertId> out;
    for (const auto& e : experts_) {
        bool active = std::any_of(concepts.begin(), concepts.end(),
                                  [&](ConceptId c) { return e.concepts.contains(c); });
        if (active) out.push_back(e.expert_id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

TaskSpec KnowledgeGraph::make_task(std::string task_id, std::vector<double> requirement) const {
    if (requirement.size() != concepts_.size()) {
        throw DomainError("task requirement has " + std::to_string(requirement.size()) +
                          " entries, expected " + std::to_string(concepts_.size()));
    }
    for (double v : requirement) {
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("task requirement entries must be finite and >= 0");
    }
    TaskSpec task;
    task.task_id = std::move(task_id);
    task.concepts = ConceptSet::from_weights(requirement, activation_threshold_);
    task.requirement = std::move(requirement);
    task.difficulty = task.concepts.empty() ? 0.0 : mean_depth(*this, task.concepts);
    return task;
}

nlohmann::json KnowledgeGraph::to_json() const {
    nlohmann::json doc;
    auto& concepts = doc["concepts"] = nlohmann::json::array();
    for (const auto& c : concepts_) {
        nlohmann::json jc = {{"id", c.id}, {"name", c.name}, {"depth", c.depth}};
        if (c.root) jc["root"] = true;
        concepts.push_back(std::move(jc));
    }
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (auto [a, b] : edges_) edges.push_back({a, b});
    auto& experts = doc["experts"] = nlohmann::json::array();
    for (const auto& e : experts_) {
        experts.push_back({{"expert_id", e.expert_id}, {"name", e.name}, {"capability", e.capability}});
    }
    if (synergy_matrix_) doc["synergy_matrix"] = *synergy_matrix_;
    return doc;
}

bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.concepts_ == b.concepts_ && a.edges_ == b.edges_ && a.experts_ == b.experts_ &&
           a.synergy_matrix_ == b.synergy_matrix_ &&
           a.activation_threshold_ == b.activation_threshold_;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

void check_keys(const nlohmann::json& object, std::initializer_list<std::string_view> allowed,
                const std::string& where, const GraphLoadOptions& options,
                std::vector<std::string>* warnings) {
    for (const auto& [key, _] : object.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        std::string msg = "unknown key '" + key + "' in " + where;
        if (options.strict) throw ParseError(msg);
        if (warnings) warnings->push_back(msg);
    }
}

const nlohmann::json& require(const nlohmann::json& object, const char* key, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end()) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    return *it;
}

template <typename T>
T field_as(const nlohmann::json& value, const std::string& where) {
    try {
        return value.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError("field " + where + " has the wrong type");
    }
}

std::uint32_t id_field(const nlohmann::json& value, const std::string& where) {
    if (!value.is_number_integer() || value.get<std::int64_t>() < 0 ||
        value.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        throw ParseError("field " + where + " must be a non-negative integer");
    }
    return value.get<std::uint32_t>();
}

}  // namespace

KnowledgeGraph load_graph(const nlohmann::json& doc, const GraphLoadOptions& options,
                          std::vector<std::string>* warnings) {
    if (!doc.is_object()) throw ParseError("graph document must be a JSON object");
    check_keys(doc, {"concepts", "edges", "experts", "synergy_matrix"}, "graph document", options,
               warnings);

    const auto& jconcepts = require(doc, "concepts", "graph document");
    if (!jconcepts.is_array()) throw ParseError("field 'concepts' must be an array");

    std::vector<Concept> concepts;
    std::vector<bool> has_depth;
    for (std::size_t i = 0; i < jconcepts.size(); ++i) {
        const auto& jc = jconcepts[i];
        const std::string where = "concepts[" + std::to_string(i) + "]";
        if (!jc.is_object()) throw ParseError(where + " must be an object");
        check_keys(jc, {"id", "name", "depth", "root"}, where, options, warnings);
        Concept c;
        c.id = id_field(require(jc, "id", where), where + ".id");
        c.name = field_as<std::string>(require(jc, "name", where), where + ".name");
        if (auto it = jc.find("root"); it != jc.end()) {
            if (!it->is_boolean()) throw ParseError("field " + where + ".root must be a boolean");
            c.root = it->get<bool>();
        }
        if (auto it = jc.find("depth"); it != jc.end()) {
            c.depth = static_cast<int>(id_field(*it, where + ".depth"));
            has_depth.push_back(true);
        } else {
            has_depth.push_back(false);
        }
        concepts.push_back(std::move(c));
    }

    std::vector<ConceptEdge> edges;
    if (auto it = doc.find("edges"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("field 'edges' must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& je = (*it)[i];
            const std::string where = "edges[" + std::to_string(i) + "]";
            if (!je.is_array() || je.size() != 2) throw ParseError(where + " must be a pair [id, id]");
            edges.emplace_back(id_field(je[0], where + "[0]"), id_field(je[1], where + "[1]"));
        }
    } else {
        throw ParseError("missing field 'edges' in graph document");
    }

    std::vector<ExpertProfile> experts;
    const auto& jexperts = require(doc, "experts", "graph document");
    if (!jexperts.is_array()) throw ParseError("field 'experts' must be an array");
    for (std::size_t i = 0; i < jexperts.size(); ++i) {
        const auto& je = jexperts[i];
        const std::string where = "experts[" + std::to_string(i) + "]";
        if (!je.is_object()) throw ParseError(where + " must be an object");
        check_keys(je, {"expert_id", "name", "capability"}, where, options, warnings);
        ExpertProfile e;
        e.expert_id = id_field(require(je, "expert_id", where), where + ".expert_id");
        e.name = field_as<std::string>(require(je, "name", where), where + ".name");
        const auto& cap = require(je, "capability", where);
        if (!cap.is_array()) throw ParseError("field " + where + ".capability must be an array");
        for (std::size_t j = 0; j < cap.size(); ++j) {
            if (!cap[j].is_number())
                throw ParseError("field " + where + ".capability[" + std::to_string(j) +
                                 "] must be a number");
            e.capability.push_back(cap[j].get<double>());
        }
        experts.push_back(std::move(e));
    }

    std::optional<std::vector<std::vector<double>>> synergy;
    if (auto it = doc.find("synergy_matrix"); it != doc.end()) {
        synergy = field_as<std::vector<std::vector<double>>>(*it, "'synergy_matrix'");
    }

    // Fill absent depths by BFS from flagged roots (min over roots).
    const bool any_missing = std::find(has_depth.begin(), has_depth.end(), false) != has_depth.end();
    if (any_missing) {
        // A throwaway graph without experts gives us validated adjacency and BFS depths.
        std::vector<Concept> probe = concepts;
        for (auto& c : probe) c.depth = 0;
        KnowledgeGraph skeleton(std::move(probe), edges, {}, std::nullopt, options.activation_threshold);
        for (std::size_t i = 0; i < concepts.size(); ++i) {
            if (!has_depth[i]) concepts[i].depth = skeleton.depth_from_roots_[concepts[i].id];
        }
    }

    return KnowledgeGraph(std::move(concepts), std::move(edges), std::move(experts),
                          std::move(synergy), options.activation_threshold);
}

KnowledgeGraph load_graph_text(std::string_view text, const GraphLoadOptions& options,
                               std::vector<std::string>* warnings) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    return load_graph(doc, options, warnings);
}

KnowledgeGraph load_graph_file(const std::string& path, const GraphLoadOptions& options,
                               std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read graph file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_graph_text(buffer.str(), options, warnings);
}

// ---------------------------------------------------------------------------
// Set/topology measures

ConceptSet subset_concepts(const KnowledgeGraph& graph, std::span<const ExpertId> subset) {
    ConceptSet out;
    for (ExpertId id : subset) out = out.united(graph.expert(id).concepts);
    return out;
}

double jaccard(const ConceptSet& a, const ConceptSet& b) noexcept {
    const std::size_t u = a.union_size(b);
    if (u == 0) return 0.0;
    return static_cast<double>(a.intersection_size(b)) / static_cast<double>(u);
}

double jaccard_overlap(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                       const TaskSpec& task) {
    if (subset.empty()) throw DomainError("jaccard_overlap requires a non-empty subset");
    return jaccard(subset_concepts(graph, subset), task.concepts);
}

std::size_t dependency_edge_count(const KnowledgeGraph& graph, const ConceptSet& subset_concepts,
                                  const ConceptSet& task_concepts) {
    const ConceptSet only_subset = subset_concepts.minus(task_concepts);
    const ConceptSet only_task = task_concepts.minus(subset_concepts);
    std::size_t total = 0;
    for (ConceptId a : only_subset.ids()) {
        for (ConceptId b : only_task.ids()) total += static_cast<std::size_t>(graph.capped_path(a, b));
    }
    return total;
}

std::size_t dependency_edge_count(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                                  const TaskSpec& task) {
    return dependency_edge_count(graph, subset_concepts(graph, subset), task.concepts);
}

double mean_depth(const KnowledgeGraph& graph, const ConceptSet& concepts) {
    if (concepts.empty()) throw DomainError("mean depth of an empty concept set");
    double sum = 0.0;
    for (ConceptId c : concepts.ids()) sum += graph.concept_at(c).depth;
    return sum / static_cast<double>(concepts.size());
}

double task_difficulty(const KnowledgeGraph& graph, const TaskSpec& task) {
    if (task.concepts.empty()) throw DomainError("task has no active concepts");
    return mean_depth(graph, task.concepts);
}

}  // namespace kabb
