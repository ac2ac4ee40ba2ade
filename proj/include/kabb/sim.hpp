#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kabb/bandit.hpp"
#include "kabb/graph.hpp"
#include "kabb/random.hpp"

namespace kabb::sim {

// Skill reassignment at a scheduled step. With `shuffle`, a seeded random
// permutation is drawn; otherwise new_skill[i] = old_skill[permutation[i]]
// (indices are expert positions in the graph).
struct DriftEvent {
    Step step = 0;
    std::vector<std::size_t> permutation;
    bool shuffle = false;
};

struct EnvironmentSpec {
    double noise_scale = 0.0;  // half-width of the per-(subset, task) perturbation
    double skill_min = 0.3;
    double skill_max = 0.95;
    std::optional<std::vector<double>> base_skill;  // explicit skills, graph order
    std::size_t task_concepts = 2;                  // active concepts per task
    std::size_t task_templates = 0;                 // 0 = draw fresh concept sets every step
    std::vector<DriftEvent> drift;
    std::size_t oracle_pool_cap = 12;

    void validate(const KnowledgeGraph& graph) const;
    nlohmann::json to_json() const;
    static EnvironmentSpec from_json(const nlohmann::json& j);
};

// Ground truth: theta*(S, t) = clamp(jaccard(C_S, C_t) * mean_skill(S) + noise, 0, 1),
// with noise a fixed function of (seed, subset, task concepts).
class Environment {
public:
    Environment(const KnowledgeGraph& graph, EnvironmentSpec spec, std::uint64_t seed);

    const KnowledgeGraph& graph() const noexcept { return *graph_; }
    const EnvironmentSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }

    // Skills in effect at `step`, indexed by expert position.
    const std::vector<double>& skills_at(Step step) const;
    double theta_star(std::span<const ExpertId> subset, const TaskSpec& task, Step step) const;

    TaskSpec draw_task(Step step, Rng& rng) const;

private:
    double noise(std::span<const ExpertId> subset, const ConceptSet& concepts) const;
    std::vector<ConceptId> draw_concepts(Rng& rng) const;

    const KnowledgeGraph* graph_;
    EnvironmentSpec spec_;
    std::uint64_t seed_;
    std::vector<std::pair<Step, std::vector<double>>> phases_;  // ascending start step
    std::vector<ConceptId> coverable_;                          // concepts some expert covers
    std::vector<std::vector<ConceptId>> templates_;
};

Environment generate_environment(const KnowledgeGraph& graph, const EnvironmentSpec& spec,
                                 std::uint64_t seed);

enum class PolicyKind { kabb, vanilla_thompson, ucb1, epsilon_greedy, random, oracle };

struct PolicySpec {
    PolicyKind kind = PolicyKind::kabb;
    double epsilon = 0.1;      // epsilon-greedy, in [0,1]
    double exploration = 2.0;  // ucb1 exploration constant, >= 0

    std::string name() const;
    void validate() const;
    nlohmann::json to_json() const;
    static PolicySpec from_json(const nlohmann::json& j);
};

PolicyKind parse_policy_kind(const std::string& name);
std::string to_string(PolicyKind kind);

struct StepContext {
    const TaskSpec& task;
    std::span<const ExpertId> pool;
    std::size_t team_size;
    Step step;
    const Environment& env;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual SubsetKey select(const StepContext& ctx) = 0;
    virtual void observe(const StepContext& ctx, const SubsetKey& chosen, double reward) = 0;
};

// KABB selector driven through a PosteriorStore.
class KabbPolicy final : public Policy {
public:
    KabbPolicy(const KnowledgeGraph& graph, BanditConfig config, std::uint64_t seed);

    SubsetKey select(const StepContext& ctx) override;
    void observe(const StepContext& ctx, const SubsetKey& chosen, double reward) override;

    const PosteriorStore& store() const noexcept { return store_; }
    const BanditConfig& config() const noexcept { return config_; }

private:
    const KnowledgeGraph* graph_;
    BanditConfig config_;
    SynergyModel synergy_;
    PosteriorStore store_;
    Rng rng_;
    double pending_km_ = 0.0;
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const KnowledgeGraph& graph,
                                    const BanditConfig& config, std::uint64_t seed);

struct StepRecord {
    Step step = 0;
    std::string task_id;
    SubsetKey subset;
    double reward = 0.0;
    double theta_chosen = 0.0;
    double theta_best = 0.0;
    double inst_regret = 0.0;
    double cum_regret = 0.0;
};

struct RegretCurve {
    std::vector<StepRecord> steps;

    std::size_t size() const noexcept { return steps.size(); }
    double terminal() const noexcept { return steps.empty() ? 0.0 : steps.back().cum_regret; }
    double success_rate() const;
    std::vector<double> cumulative() const;
};

struct RunOptions {
    BanditConfig bandit;  // team size and concepts per task apply to every policy
    Step steps = 1000;
    std::uint64_t max_oracle_evaluations = 20'000'000'000ULL;
    // Called after each observe(); used by experiments that inspect policy state.
    std::function<void(Step, const Policy&, const StepRecord&)> on_step;
};

RegretCurve run(const PolicySpec& policy, const Environment& env, const RunOptions& options,
                std::uint64_t seed);
// Runs a caller-owned policy instance.
RegretCurve run(Policy& policy, const Environment& env, const RunOptions& options,
                std::uint64_t seed);

struct Summary {
    std::vector<double> mean_cum;  // per step
    std::vector<double> std_cum;
    double terminal_mean = 0.0;
    double terminal_std = 0.0;
    double terminal_min = 0.0;
    double terminal_q25 = 0.0;
    double terminal_median = 0.0;
    double terminal_q75 = 0.0;
    double terminal_max = 0.0;
    double success_rate_mean = 0.0;
    double success_rate_std = 0.0;
    // log-log slope of the mean cumulative regret over the second half of the run
    double loglog_slope = 0.0;
};

Summary summarize(std::span<const RegretCurve> curves);

// Episode CSV: step,task_id,subset_key,reward,theta_star_chosen,theta_star_best,inst_regret,cum_regret
inline constexpr const char* kEpisodeCsvHeader =
    "step,task_id,subset_key,reward,theta_star_chosen,theta_star_best,inst_regret,cum_regret";
void write_curve_csv(std::ostream& out, const RegretCurve& curve);

// Reals with 9 significant digits.
std::string format_real(double v);

}  // namespace kabb::sim
