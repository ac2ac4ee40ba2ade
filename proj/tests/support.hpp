#pragma once

#include <string>
#include <vector>

#include "kabb/graph.hpp"

namespace kabb::testing {

inline ExpertProfile make_expert(ExpertId id, std::vector<double> capability) {
    ExpertProfile e;
    e.expert_id = id;
    e.name = "e" + std::to_string(id);
    e.capability = std::move(capability);
    return e;
}

// One-hot-ish capability vector over n concepts.
inline std::vector<double> covering(std::size_t n, std::initializer_list<ConceptId> ids,
                                    double level = 0.9) {
    std::vector<double> v(n, 0.1);
    for (ConceptId c : ids) v[c] = level;
    return v;
}

// Path 0 - 1 - ... - n-1 rooted at 0; depth of concept i is i.
inline KnowledgeGraph path_graph(std::size_t n, std::vector<ExpertProfile> experts,
                                 std::optional<std::vector<std::vector<double>>> synergy = std::nullopt) {
    std::vector<Concept> cs;
    std::vector<ConceptEdge> es;
    for (ConceptId i = 0; i < n; ++i) {
        cs.push_back({i, "c" + std::to_string(i), static_cast<int>(i), i == 0});
        if (i + 1 < n) es.emplace_back(i, i + 1);
    }
    return KnowledgeGraph(std::move(cs), std::move(es), std::move(experts), std::move(synergy));
}

inline std::vector<double> one_hot(std::size_t n, std::initializer_list<ConceptId> ids, double w = 1.0) {
    std::vector<double> v(n, 0.0);
    for (ConceptId c : ids) v[c] = w;
    return v;
}

}  // namespace kabb::testing
