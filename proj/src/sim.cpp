#include "kabb/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "kabb/error.hpp"
#include "kabb/stats.hpp"

namespace kabb::sim {

namespace {

// Calls fn(members) for every k-combination of `sorted` in lexicographic order.
template <class Fn>
void for_each_combination(std::span<const ExpertId> sorted, std::size_t k, Fn&& fn) {
    const std::size_t n = sorted.size();
    if (k == 0 || k > n) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<ExpertId> members(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) members[i] = sorted[idx[i]];
        fn(std::span<const ExpertId>(members));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

std::vector<ExpertId> sorted_pool(std::span<const ExpertId> pool) {
    std::vector<ExpertId> p(pool.begin(), pool.end());
    std::sort(p.begin(), p.end());
    return p;
}

std::size_t effective_k(const StepContext& ctx) { return std::min(ctx.team_size, ctx.pool.size()); }

template <class T>
T json_value(const nlohmann::json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; })) {
            throw ConfigError("unknown key '" + k + "' in " + what);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Environment spec

void EnvironmentSpec::validate(const KnowledgeGraph& graph) const {
    if (!(noise_scale >= 0.0 && noise_scale <= 1.0)) throw ConfigError("noise_scale must lie in [0,1]");
    if (!(skill_min >= 0.0 && skill_min <= skill_max && skill_max <= 1.0)) {
        throw ConfigError("skills need 0 <= skill_min <= skill_max <= 1");
    }
    const std::size_t n = graph.expert_count();
    if (base_skill) {
        if (base_skill->size() != n) {
            throw ConfigError("base_skill has " + std::to_string(base_skill->size()) +
                              " entries for " + std::to_string(n) + " experts");
        }
        for (double s : *base_skill) {
            if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("base_skill entries must lie in [0,1]");
        }
    }
    if (task_concepts == 0) throw ConfigError("task_concepts must be at least 1");
    if (oracle_pool_cap == 0) throw ConfigError("oracle_pool_cap must be at least 1");
    Step prev = std::numeric_limits<Step>::min();
    for (const auto& ev : drift) {
        if (ev.step <= prev) throw ConfigError("drift steps must be strictly increasing");
        if (ev.step < 1) throw ConfigError("drift steps start at 1");
        prev = ev.step;
        if (ev.shuffle) {
            if (!ev.permutation.empty()) throw ConfigError("drift event has both shuffle and permutation");
            continue;
        }
        if (ev.permutation.size() != n) throw ConfigError("drift permutation must cover every expert");
        std::vector<std::size_t> check = ev.permutation;
        std::sort(check.begin(), check.end());
        for (std::size_t i = 0; i < n; ++i) {
            if (check[i] != i) throw ConfigError("drift permutation is not a permutation of 0..n-1");
        }
    }
}

nlohmann::json EnvironmentSpec::to_json() const {
    nlohmann::json j;
    j["noise_scale"] = noise_scale;
    j["skill_min"] = skill_min;
    j["skill_max"] = skill_max;
    j["base_skill"] = base_skill ? nlohmann::json(*base_skill) : nlohmann::json(nullptr);
    j["task_concepts"] = task_concepts;
    j["task_templates"] = task_templates;
    j["oracle_pool_cap"] = oracle_pool_cap;
    auto& d = j["drift"] = nlohmann::json::array();
    for (const auto& ev : drift) {
        nlohmann::json e{{"step", ev.step}};
        if (ev.shuffle) {
            e["shuffle"] = true;
        } else {
            e["permutation"] = ev.permutation;
        }
        d.push_back(std::move(e));
    }
    return j;
}

EnvironmentSpec EnvironmentSpec::from_json(const nlohmann::json& j) {
    reject_unknown(j,
                   {"noise_scale", "skill_min", "skill_max", "base_skill", "task_concepts",
                    "task_templates", "oracle_pool_cap", "drift"},
                   "environment");
    EnvironmentSpec s;
    s.noise_scale = json_value(j, "noise_scale", s.noise_scale);
    s.skill_min = json_value(j, "skill_min", s.skill_min);
    s.skill_max = json_value(j, "skill_max", s.skill_max);
    if (auto it = j.find("base_skill"); it != j.end() && !it->is_null()) {
        s.base_skill = json_value<std::vector<double>>(j, "base_skill", {});
    }
    s.task_concepts = json_value(j, "task_concepts", s.task_concepts);
    s.task_templates = json_value(j, "task_templates", s.task_templates);
    s.oracle_pool_cap = json_value(j, "oracle_pool_cap", s.oracle_pool_cap);
    if (auto it = j.find("drift"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("drift must be an array");
        for (const auto& e : *it) {
            reject_unknown(e, {"step", "permutation", "shuffle"}, "drift event");
            DriftEvent ev;
            ev.step = json_value<Step>(e, "step", 0);
            ev.shuffle = json_value(e, "shuffle", false);
            ev.permutation = json_value<std::vector<std::size_t>>(e, "permutation", {});
            s.drift.push_back(std::move(ev));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(const KnowledgeGraph& graph, EnvironmentSpec spec, std::uint64_t seed)
    : graph_(&graph), spec_(std::move(spec)), seed_(seed) {
    spec_.validate(graph);

    std::vector<double> skills;
    if (spec_.base_skill) {
        skills = *spec_.base_skill;
    } else {
        Rng rng = make_stream(seed, "skills");
        std::uniform_real_distribution<double> u(spec_.skill_min, spec_.skill_max);
        skills.resize(graph.expert_count());
        for (double& s : skills) s = u(rng);
    }
    phases_.emplace_back(std::numeric_limits<Step>::min(), skills);
    for (std::size_t i = 0; i < spec_.drift.size(); ++i) {
        const auto& ev = spec_.drift[i];
        std::vector<std::size_t> perm = ev.permutation;
        if (ev.shuffle) {
            perm.resize(skills.size());
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng = make_stream(seed, "drift-" + std::to_string(i));
            std::shuffle(perm.begin(), perm.end(), rng);
        }
        const std::vector<double>& old = phases_.back().second;
        std::vector<double> next(old.size());
        for (std::size_t e = 0; e < old.size(); ++e) next[e] = old[perm[e]];
        phases_.emplace_back(ev.step, std::move(next));
    }

    for (const auto& c : graph.concepts()) {
        const ConceptId id = c.id;
        if (!graph.experts_active_on(std::span<const ConceptId>(&id, 1)).empty()) coverable_.push_back(id);
    }
    std::sort(coverable_.begin(), coverable_.end());
    if (coverable_.size() < spec_.task_concepts) {
        throw ConfigError("only " + std::to_string(coverable_.size()) +
                          " concepts are covered by some expert; task_concepts is " +
                          std::to_string(spec_.task_concepts));
    }
    if (spec_.task_templates > 0) {
        Rng rng = make_stream(seed, "templates");
        for (std::size_t i = 0; i < spec_.task_templates; ++i) templates_.push_back(draw_concepts(rng));
    }
}

const std::vector<double>& Environment::skills_at(Step step) const {
    auto it = std::upper_bound(phases_.begin(), phases_.end(), step,
                               [](Step s, const auto& phase) { return s < phase.first; });
    return std::prev(it)->second;
}

double Environment::noise(std::span<const ExpertId> subset, const ConceptSet& concepts) const {
    if (spec_.noise_scale == 0.0) return 0.0;
    std::uint64_t h = mix64(seed_ ^ 0x6e6f697365ULL);
    for (ExpertId e : subset) h = mix64(h ^ (0x100000000ULL | e));
    for (ConceptId c : concepts.ids()) h = mix64(h ^ (0x200000000ULL | c));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
    return spec_.noise_scale * (2.0 * u - 1.0);
}

double Environment::theta_star(std::span<const ExpertId> subset, const TaskSpec& task, Step step) const {
    if (subset.empty()) throw DomainError("theta* of an empty subset");
    const double coverage = jaccard(subset_concepts(*graph_, subset), task.concepts);
    const auto& skills = skills_at(step);
    double skill = 0.0;
    for (ExpertId e : subset) skill += skills[graph_->expert_position(e)];
    skill /= static_cast<double>(subset.size());
    return std::clamp(coverage * skill + noise(subset, task.concepts), 0.0, 1.0);
}

std::vector<ConceptId> Environment::draw_concepts(Rng& rng) const {
    std::vector<ConceptId> picked;
    std::sample(coverable_.begin(), coverable_.end(), std::back_inserter(picked), spec_.task_concepts, rng);
    return picked;
}

TaskSpec Environment::draw_task(Step step, Rng& rng) const {
    std::vector<ConceptId> active;
    if (!templates_.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, templates_.size() - 1);
        active = templates_[pick(rng)];
    } else {
        active = draw_concepts(rng);
    }
    // Demand weights sit above any sane activation threshold so every drawn
    // concept is active.
    std::vector<double> req(graph_->concept_count(), 0.0);
    std::uniform_real_distribution<double> w(0.6, 1.0);
    for (ConceptId c : active) req[c] = std::max(w(rng), graph_->activation_threshold() + 1e-3);
    return graph_->make_task("t" + std::to_string(step), std::move(req));
}

Environment generate_environment(const KnowledgeGraph& graph, const EnvironmentSpec& spec,
                                 std::uint64_t seed) {
    return Environment(graph, spec, seed);
}

// ---------------------------------------------------------------------------
// Policy specs

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::kabb: return "kabb";
        case PolicyKind::vanilla_thompson: return "vanilla-thompson";
        case PolicyKind::ucb1: return "ucb1";
        case PolicyKind::epsilon_greedy: return "epsilon-greedy";
        case PolicyKind::random: return "random";
        case PolicyKind::oracle: return "oracle";
    }
    return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
    for (auto k : {PolicyKind::kabb, PolicyKind::vanilla_thompson, PolicyKind::ucb1,
                   PolicyKind::epsilon_greedy, PolicyKind::random, PolicyKind::oracle}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown policy '" + name +
                      "' (expected kabb, vanilla-thompson, ucb1, epsilon-greedy, random or oracle)");
}

std::string PolicySpec::name() const { return to_string(kind); }

void PolicySpec::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0,1]");
    if (!(exploration >= 0.0 && std::isfinite(exploration))) {
        throw ConfigError("ucb1 exploration constant must be finite and >= 0");
    }
}

nlohmann::json PolicySpec::to_json() const {
    nlohmann::json j{{"kind", name()}};
    if (kind == PolicyKind::epsilon_greedy) j["epsilon"] = epsilon;
    if (kind == PolicyKind::ucb1) j["exploration"] = exploration;
    return j;
}

PolicySpec PolicySpec::from_json(const nlohmann::json& j) {
    PolicySpec p;
    if (j.is_string()) {
        p.kind = parse_policy_kind(j.get<std::string>());
        return p;
    }
    reject_unknown(j, {"kind", "epsilon", "exploration"}, "policy");
    p.kind = parse_policy_kind(json_value<std::string>(j, "kind", ""));
    p.epsilon = json_value(j, "epsilon", p.epsilon);
    p.exploration = json_value(j, "exploration", p.exploration);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Policies

KabbPolicy::KabbPolicy(const KnowledgeGraph& graph, BanditConfig config, std::uint64_t seed)
    : graph_(&graph),
      config_(std::move(config)),
      synergy_(SynergyModel::for_graph(graph)),
      store_(config_),
      rng_(make_stream(seed, "policy")) {
    config_.validate_for(graph);
}

SubsetKey KabbPolicy::select(const StepContext& ctx) {
    BanditConfig cfg = config_;
    cfg.team_size = ctx.team_size;
    const SelectionInputs inputs{*graph_, synergy_, cfg};
    SelectionResult r = select_subset_from_pool(store_, ctx.task, ctx.pool, inputs, rng_, ctx.step);
    pending_km_ = r.km;
    return r.subset;
}

void KabbPolicy::observe(const StepContext& ctx, const SubsetKey& chosen, double reward) {
    update_posterior(store_, chosen, reward, pending_km_, ctx.step, config_);
}

namespace {

// Classical Thompson sampling over k-subsets of the eligible pool: one
// Beta(alpha, beta) per subset, no context.
class VanillaThompson final : public Policy {
public:
    VanillaThompson(double a0, double b0, std::uint64_t seed)
        : a0_(a0), b0_(b0), rng_(make_stream(seed, "policy")) {}

    SubsetKey select(const StepContext& ctx) override {
        const auto pool = sorted_pool(ctx.pool);
        SubsetKey best;
        double best_score = -1.0;
        for_each_combination(pool, effective_k(ctx), [&](std::span<const ExpertId> m) {
            SubsetKey key(std::vector<ExpertId>(m.begin(), m.end()));
            auto it = post_.find(key);
            const double a = it == post_.end() ? a0_ : it->second.first;
            const double b = it == post_.end() ? b0_ : it->second.second;
            const double draw = sample_beta(rng_, a, b);
            if (best.empty() || draw > best_score) {
                best_score = draw;
                best = std::move(key);
            }
        });
        return best;
    }

    void observe(const StepContext&, const SubsetKey& chosen, double reward) override {
        auto [it, inserted] = post_.try_emplace(chosen, a0_, b0_);
        (void)inserted;
        it->second.first += reward;
        it->second.second += 1.0 - reward;
    }

private:
    double a0_, b0_;
    Rng rng_;
    std::map<SubsetKey, std::pair<double, double>> post_;
};

struct Tally {
    double n = 0.0;
    double sum = 0.0;
};

class Ucb1 final : public Policy {
public:
    explicit Ucb1(double c) : c_(c) {}

    SubsetKey select(const StepContext& ctx) override {
        const auto pool = sorted_pool(ctx.pool);
        SubsetKey best;
        double best_score = -std::numeric_limits<double>::infinity();
        const double log_total = std::log(std::max(total_, 1.0));
        for_each_combination(pool, effective_k(ctx), [&](std::span<const ExpertId> m) {
            SubsetKey key(std::vector<ExpertId>(m.begin(), m.end()));
            auto it = tally_.find(key);
            const double score = it == tally_.end()
                                     ? std::numeric_limits<double>::infinity()
                                     : it->second.sum / it->second.n +
                                           std::sqrt(c_ * log_total / it->second.n);
            if (best.empty() || score > best_score) {
                best_score = score;
                best = std::move(key);
            }
        });
        return best;
    }

    void observe(const StepContext&, const SubsetKey& chosen, double reward) override {
        Tally& t = tally_[chosen];
        t.n += 1.0;
        t.sum += reward;
        total_ += 1.0;
    }

private:
    double c_;
    double total_ = 0.0;
    std::map<SubsetKey, Tally> tally_;
};

class EpsilonGreedy final : public Policy {
public:
    EpsilonGreedy(double eps, std::uint64_t seed) : eps_(eps), rng_(make_stream(seed, "policy")) {}

    SubsetKey select(const StepContext& ctx) override {
        const auto pool = sorted_pool(ctx.pool);
        const std::size_t k = effective_k(ctx);
        if (uniform01(rng_) < eps_) {
            std::vector<ExpertId> pick;
            std::sample(pool.begin(), pool.end(), std::back_inserter(pick), k, rng_);
            return SubsetKey(std::move(pick));
        }
        SubsetKey best;
        double best_score = -1.0;
        for_each_combination(pool, k, [&](std::span<const ExpertId> m) {
            SubsetKey key(std::vector<ExpertId>(m.begin(), m.end()));
            auto it = tally_.find(key);
            // Laplace-smoothed mean so unseen subsets start at 1/2.
            const double score =
                it == tally_.end() ? 0.5 : (it->second.sum + 1.0) / (it->second.n + 2.0);
            if (best.empty() || score > best_score) {
                best_score = score;
                best = std::move(key);
            }
        });
        return best;
    }

    void observe(const StepContext&, const SubsetKey& chosen, double reward) override {
        Tally& t = tally_[chosen];
        t.n += 1.0;
        t.sum += reward;
    }

private:
    double eps_;
    Rng rng_;
    std::map<SubsetKey, Tally> tally_;
};

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(make_stream(seed, "policy")) {}

    SubsetKey select(const StepContext& ctx) override {
        const auto pool = sorted_pool(ctx.pool);
        std::vector<ExpertId> pick;
        std::sample(pool.begin(), pool.end(), std::back_inserter(pick), effective_k(ctx), rng_);
        return SubsetKey(std::move(pick));
    }
    void observe(const StepContext&, const SubsetKey&, double) override {}

private:
    Rng rng_;
};

// Ground-truth argmax by exhaustive search; ties go to the lowest key.
ScoredSubset best_subset(const Environment& env, const TaskSpec& task, std::span<const ExpertId> pool,
                         std::size_t k, Step step) {
    ScoredSubset best;
    best.score = -1.0;
    for_each_combination(pool, k, [&](std::span<const ExpertId> m) {
        const double v = env.theta_star(m, task, step);
        if (v > best.score) {
            best.score = v;
            best.key = SubsetKey(std::vector<ExpertId>(m.begin(), m.end()));
        }
    });
    return best;
}

class OraclePolicy final : public Policy {
public:
    SubsetKey select(const StepContext& ctx) override {
        const auto pool = sorted_pool(ctx.pool);
        return best_subset(ctx.env, ctx.task, pool, effective_k(ctx), ctx.step).key;
    }
    void observe(const StepContext&, const SubsetKey&, double) override {}
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const KnowledgeGraph& graph,
                                    const BanditConfig& config, std::uint64_t seed) {
    spec.validate();
    switch (spec.kind) {
        case PolicyKind::kabb: return std::make_unique<KabbPolicy>(graph, config, seed);
        case PolicyKind::vanilla_thompson:
            return std::make_unique<VanillaThompson>(config.alpha0, config.beta0, seed);
        case PolicyKind::ucb1: return std::make_unique<Ucb1>(spec.exploration);
        case PolicyKind::epsilon_greedy: return std::make_unique<EpsilonGreedy>(spec.epsilon, seed);
        case PolicyKind::random: return std::make_unique<RandomPolicy>(seed);
        case PolicyKind::oracle: return std::make_unique<OraclePolicy>();
    }
    throw ConfigError("unhandled policy kind");
}

// ---------------------------------------------------------------------------
// Episode loop

double RegretCurve::success_rate() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : steps) s += r.reward;
    return s / static_cast<double>(steps.size());
}

std::vector<double> RegretCurve::cumulative() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& r : steps) out.push_back(r.cum_regret);
    return out;
}

RegretCurve run(const PolicySpec& spec, const Environment& env, const RunOptions& options,
                std::uint64_t seed) {
    auto policy = make_policy(spec, env.graph(), options.bandit, seed);
    return run(*policy, env, options, seed);
}

RegretCurve run(Policy& policy, const Environment& env, const RunOptions& options, std::uint64_t seed) {
    if (options.steps < 1) throw ConfigError("run needs at least one step");
    const KnowledgeGraph& graph = env.graph();
    const std::size_t cap = env.spec().oracle_pool_cap;
    const std::size_t k = options.bandit.team_size;
    const std::uint64_t per_step = binomial(cap, std::min(k, cap));
    if (per_step > 0 && static_cast<std::uint64_t>(options.steps) >
                            options.max_oracle_evaluations / per_step) {
        throw BudgetError("oracle would score up to " + std::to_string(options.steps) + " x C(" +
                          std::to_string(cap) + "," + std::to_string(k) +
                          ") subsets, above the budget of " +
                          std::to_string(options.max_oracle_evaluations) +
                          "; lower oracle_pool_cap, team_size or the step count");
    }

    Rng tasks = make_stream(seed, "tasks");
    Rng rewards = make_stream(seed, "rewards");

    RegretCurve curve;
    curve.steps.reserve(static_cast<std::size_t>(options.steps));
    double cum = 0.0;
    for (Step t = 1; t <= options.steps; ++t) {
        const TaskSpec task = env.draw_task(t, tasks);
        const auto concepts = select_concepts(task, options.bandit.concepts_per_task);
        const auto pool = graph.experts_active_on(concepts);
        if (pool.empty()) throw RoutingError("no eligible experts for " + task.task_id);
        if (pool.size() > cap) {
            throw BudgetError("eligible pool of " + std::to_string(pool.size()) + " experts for " +
                              task.task_id + " exceeds the oracle cap of " + std::to_string(cap) +
                              "; reduce concepts_per_task or expert coverage");
        }
        const StepContext ctx{task, pool, k, t, env};
        const SubsetKey chosen = policy.select(ctx);
        const std::size_t keff = std::min(k, pool.size());
        if (chosen.size() != keff ||
            !std::all_of(chosen.ids().begin(), chosen.ids().end(),
                         [&](ExpertId e) { return std::binary_search(pool.begin(), pool.end(), e); })) {
            throw DomainError("policy chose " + chosen.str() + " outside the eligible pool");
        }

        const double theta = env.theta_star(chosen.ids(), task, t);
        const double best = best_subset(env, task, pool, keff, t).score;
        const double reward = uniform01(rewards) < theta ? 1.0 : 0.0;
        policy.observe(ctx, chosen, reward);

        StepRecord rec;
        rec.step = t;
        rec.task_id = task.task_id;
        rec.subset = chosen;
        rec.reward = reward;
        rec.theta_chosen = theta;
        rec.theta_best = best;
        rec.inst_regret = std::max(best - theta, 0.0);
        cum += rec.inst_regret;
        rec.cum_regret = cum;
        if (options.on_step) options.on_step(t, policy, rec);
        curve.steps.push_back(std::move(rec));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Aggregation and export

Summary summarize(std::span<const RegretCurve> curves) {
    if (curves.empty()) throw DomainError("cannot summarize zero curves");
    const std::size_t n = curves.front().size();
    for (const auto& c : curves) {
        if (c.size() != n) throw DomainError("cannot aggregate regret curves of different lengths");
    }
    if (n == 0) throw DomainError("cannot summarize empty curves");

    Summary s;
    s.mean_cum.resize(n);
    s.std_cum.resize(n);
    std::vector<double> column(curves.size());
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < curves.size(); ++i) column[i] = curves[i].steps[t].cum_regret;
        s.mean_cum[t] = stats::mean(column);
        s.std_cum[t] = stats::stddev(column);
    }
    std::vector<double> terminal, success;
    for (const auto& c : curves) {
        terminal.push_back(c.terminal());
        success.push_back(c.success_rate());
    }
    s.terminal_mean = stats::mean(terminal);
    s.terminal_std = stats::stddev(terminal);
    s.terminal_min = stats::quantile(terminal, 0.0);
    s.terminal_q25 = stats::quantile(terminal, 0.25);
    s.terminal_median = stats::quantile(terminal, 0.5);
    s.terminal_q75 = stats::quantile(terminal, 0.75);
    s.terminal_max = stats::quantile(terminal, 1.0);
    s.success_rate_mean = stats::mean(success);
    s.success_rate_std = stats::stddev(success);

    std::vector<double> x, y;
    for (std::size_t t = n / 2; t < n; ++t) {
        x.push_back(static_cast<double>(t + 1));
        y.push_back(s.mean_cum[t]);
    }
    s.loglog_slope = stats::log_log_slope(x, y);
    return s;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_curve_csv(std::ostream& out, const RegretCurve& curve) {
    out << kEpisodeCsvHeader << '\n';
    for (const auto& r : curve.steps) {
        out << r.step << ',' << r.task_id << ',' << r.subset.str() << ',' << format_real(r.reward) << ','
            << format_real(r.theta_chosen) << ',' << format_real(r.theta_best) << ','
            << format_real(r.inst_regret) << ',' << format_real(r.cum_regret) << '\n';
    }
}

}  // namespace kabb::sim
