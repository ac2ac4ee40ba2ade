#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "kabb/graph.hpp"

namespace kabb {

// Weights of the four mismatch terms. Must sum to one.
struct DistanceWeights {
    double semantic = 0.4;
    double dependency = 0.2;
    double history = 0.2;
    double synergy = 0.2;

    void validate() const;
    std::array<double, 4> as_array() const { return {semantic, dependency, history, synergy}; }

    friend bool operator==(const DistanceWeights&, const DistanceWeights&) = default;
};

// Pairwise synergy coefficient between two experts.
//
// capability-complement: (1 - jaccard(C_i, C_j)) * |C_i ∪ C_j| / |C|, i.e. teams
// that cover different ground score high, scaled by how much ground they cover.
// explicit-matrix: a symmetric matrix indexed by expert position in the graph.
class SynergyModel {
public:
    enum class Mode { capability_complement, explicit_matrix };

    static SynergyModel capability_complement() { return SynergyModel{}; }
    static SynergyModel explicit_matrix(std::vector<std::vector<double>> matrix);
    // Explicit mode when the graph carries a synergy matrix, complement otherwise.
    static SynergyModel for_graph(const KnowledgeGraph& graph);

    Mode mode() const noexcept { return mode_; }
    double coefficient(const KnowledgeGraph& graph, ExpertId a, ExpertId b) const;

private:
    Mode mode_ = Mode::capability_complement;
    std::vector<std::vector<double>> matrix_;
};

// Per-expert historical success rate in [0,1]. Callers hand in a frozen view.
using HistoryView = std::function<double(ExpertId)>;

inline HistoryView constant_history(double rate) {
    return [rate](ExpertId) { return rate; };
}

struct DistanceInputs {
    const KnowledgeGraph& graph;
    DistanceWeights weights;
    const SynergyModel& synergy;
    HistoryView history;
};

// Individual terms of the knowledge distance, each already clamped to [0,1].
struct DistanceTerms {
    double difficulty_scale = 0.0;  // log(1 + d)
    double semantic_mismatch = 0.0;
    double dependency = 0.0;
    double history_gap = 0.0;
    double synergy_gap = 0.0;

    double bracket(const DistanceWeights& w) const {
        return w.semantic * semantic_mismatch + w.dependency * dependency +
               w.history * history_gap + w.synergy * synergy_gap;
    }
    double value(const DistanceWeights& w) const { return difficulty_scale * bracket(w); }
};

double pairwise_synergy(const KnowledgeGraph& graph, ExpertId a, ExpertId b,
                        const SynergyModel& model);

// Mean pairwise synergy over ordered pairs; 1.0 for a singleton team.
double team_synergy(const KnowledgeGraph& graph, std::span<const ExpertId> subset,
                    const SynergyModel& model);

double mean_history(std::span<const ExpertId> subset, const HistoryView& history);

// Evaluates the terms of `subset` against an arbitrary target concept set with
// difficulty `target_difficulty`.
DistanceTerms distance_terms(const DistanceInputs& in, std::span<const ExpertId> subset,
                             const ConceptSet& target, double target_difficulty);

DistanceTerms distance_terms(const DistanceInputs& in, std::span<const ExpertId> subset,
                             const TaskSpec& task);

double knowledge_distance(const DistanceInputs& in, std::span<const ExpertId> subset,
                          const TaskSpec& task);

// Knowledge matching index: overlap * synergy.
double km_index(const KnowledgeGraph& graph, std::span<const ExpertId> subset, const TaskSpec& task,
                const SynergyModel& model);

// Distance from `from` to `to`, treating the concept coverage of `to` as the task.
double subset_distance(const DistanceInputs& in, std::span<const ExpertId> from,
                       std::span<const ExpertId> to);

// Relaxation constant of the approximate triangle inequality:
// max(2*w_sem, diam*w_dep, 1*w_hist, 2*w_syn) * log(1 + max_difficulty).
double triangle_constant(const DistanceWeights& weights, int diameter, double max_difficulty);

}  // namespace kabb
