#include "kabb/distance.hpp"

#include <algorithm>
#include <cmath>

#include "kabb/error.hpp"

namespace kabb {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void DistanceWeights::validate() const {
    for (double w : as_array()) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("distance weights must be >= 0");
    }
    const double sum = semantic + dependency + history + synergy;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("distance weights must sum to 1 (got " + std::to_string(sum) + ")");
    }
}

SynergyModel SynergyModel::explicit_matrix(std::vector<std::vector<double>> matrix) {
    const std::size_t n = matrix.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (matrix[i].size() != n) throw ValidationError("synergy matrix must be square");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = matrix[i][j];
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw ValidationError("synergy matrix entries must lie in [0,1]");
            if (j < i && matrix[j][i] != v) throw ValidationError("synergy matrix must be symmetric");
        }
    }
    SynergyModel model;
    model.mode_ = Mode::explicit_matrix;
    model.matrix_ = std::move(matrix);
    return model;
}

SynergyModel SynergyModel::for_graph(const KnowledgeGraph& graph) {
    if (graph.synergy_matrix()) return explicit_matrix(*graph.synergy_matrix());
    return capability_complement();
}

double SynergyModel::coefficient(const KnowledgeGraph& graph, ExpertId a, ExpertId b) const {
    if (mode_ == Mode::explicit_matrix) {
        const std::size_t i = graph.expert_position(a);
        const std::size_t j = graph.expert_position(b);
        if (i >= matrix_.size() || j >= matrix_.size())
            throw DomainError("synergy matrix does not cover expert " + std::to_string(std::max(a, b)));
        return matrix_[i][j];
    }
    const ConceptSet& ca = graph.expert(a).concepts;
    const ConceptSet& cb = graph.expert(b).concepts;
    const double coverage =
        static_cast<double>(ca.union_size(cb)) / static_cast<double>(graph.concept_count());
    return (1.0 - jaccard(ca, cb)) * coverage;
}

double pairwise_synergy(const KnowledgeGraph& graph, ExpertId a, ExpertId b,
                        const SynergyModel& model) {
    if (a == b) throw DomainError("pairwise synergy is undefined for an expert with itself");
    return model.coefficient(graph, a, b);
}

double team_synergy(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                    const SynergyModel& model) {
    if (subset.empty()) throw DomainError("team synergy of an empty subset");
    if (subset.size() == 1) return 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        for (std::size_t j = i + 1; j < subset.size(); ++j) {
            sum += pairwise_synergy(graph, subset[i], subset[j], model);
        }
    }
    // Symmetric coefficients: ordered-pair mean equals the unordered-pair mean.
    const double pairs = static_cast<double>(subset.size() * (subset.size() - 1)) / 2.0;
    return sum / pairs;
}

double mean_history(std::span<const ExpertId> subset, const HistoryView& history) {
    if (subset.empty()) throw DomainError("history of an empty subset");
    double sum = 0.0;
    for (ExpertId e : subset) {
        const double h = history(e);
        if (!(h >= 0.0 && h <= 1.0))
            throw DomainError("history rate for expert " + std::to_string(e) + " outside [0,1]");
        sum += h;
    }
    return sum / static_cast<double>(subset.size());
}

DistanceTerms distance_terms(const DistanceInputs& in, std::span<const ExpertId> subset,
                             const ConceptSet& target, double target_difficulty) {
    if (subset.empty()) throw DomainError("knowledge distance requires a non-empty subset");
    if (target.empty()) throw DomainError("knowledge distance requires a non-empty target concept set");
    const ConceptSet covered = subset_concepts(in.graph, subset);

    DistanceTerms terms;
    terms.difficulty_scale = std::log1p(target_difficulty);
    terms.semantic_mismatch = clamp01(1.0 - jaccard(covered, target));
    const double edges = static_cast<double>(dependency_edge_count(in.graph, covered, target));
    terms.dependency = clamp01(edges / static_cast<double>(in.graph.expert_count()));
    terms.history_gap = clamp01(1.0 - mean_history(subset, in.history));
    terms.synergy_gap = clamp01(1.0 - team_synergy(in.graph, subset, in.synergy));
    return terms;
}

DistanceTerms distance_terms(const DistanceInputs& in, std::span<const ExpertId> subset,
                             const TaskSpec& task) {
    if (task.concepts.empty()) throw DomainError("task has no active concepts");
    return distance_terms(in, subset, task.concepts, task.difficulty);
}

double knowledge_distance(const DistanceInputs& in, std::span<const ExpertId> subset,
                          const TaskSpec& task) {
    return distance_terms(in, subset, task).value(in.weights);
}

double km_index(const KnowledgeGraph& graph, std::span<const ExpertId> subset, const TaskSpec& task,
                const SynergyModel& model) {
    return jaccard_overlap(graph, subset, task) * team_synergy(graph, subset, model);
}

double subset_distance(const DistanceInputs& in, std::span<const ExpertId> from,
                       std::span<const ExpertId> to) {
    if (to.empty()) throw DomainError("subset distance requires a non-empty target subset");
    const ConceptSet target = subset_concepts(in.graph, to);
    if (target.empty()) throw DomainError("target subset covers no concepts");
    return distance_terms(in, from, target, mean_depth(in.graph, target)).value(in.weights);
}

double triangle_constant(const DistanceWeights& w, int diameter, double max_difficulty) {
    const double relaxed = std::max({2.0 * w.semantic, static_cast<double>(diameter) * w.dependency,
                                     1.0 * w.history, 2.0 * w.synergy});
    return relaxed * std::log1p(max_difficulty);
}

}  // namespace kabb
