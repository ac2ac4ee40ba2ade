#include "kabb/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kabb/error.hpp"

namespace kabb {

// ---------------------------------------------------------------------------
// BanditConfig

namespace {

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
        throw ConfigError(std::string(name) + " must be finite and >= 0");
}

SampleMode parse_sample_mode(const std::string& s) {
    if (s == "sampled") return SampleMode::sampled;
    if (s == "mean") return SampleMode::mean;
    throw ConfigError("sample_mode must be 'sampled' or 'mean', got '" + s + "'");
}

SelectionMode parse_selection_mode(const std::string& s) {
    if (s == "greedy") return SelectionMode::greedy;
    if (s == "exhaustive") return SelectionMode::exhaustive;
    throw ConfigError("selection_mode must be 'greedy' or 'exhaustive', got '" + s + "'");
}

}  // namespace

std::string to_string(SampleMode mode) { return mode == SampleMode::sampled ? "sampled" : "mean"; }

std::string to_string(SelectionMode mode) {
    return mode == SelectionMode::greedy ? "greedy" : "exhaustive";
}

void BanditConfig::validate() const {
    require_finite_nonneg(lambda, "lambda");
    require_finite_nonneg(eta, "eta");
    if (std::isnan(kappa) || kappa < 0.0) throw ConfigError("kappa must be >= 0");
    require_finite_nonneg(delta, "delta");
    if (!std::isfinite(alpha0) || alpha0 <= 0.0) throw ConfigError("alpha0 must be > 0");
    if (!std::isfinite(beta0) || beta0 <= 0.0) throw ConfigError("beta0 must be > 0");
    if (window_depth == 0) throw ConfigError("window_depth must be >= 1");
    if (team_size == 0) throw ConfigError("team_size must be >= 1");
    if (concepts_per_task == 0) throw ConfigError("concepts_per_task must be >= 1");
    if (!(match_threshold >= 0.0 && match_threshold <= 1.0))
        throw ConfigError("match_threshold must lie in [0,1]");
    weights.validate();
}

void BanditConfig::validate_for(const KnowledgeGraph& graph) const {
    validate();
    if (team_size > graph.expert_count())
        throw ConfigError("team_size " + std::to_string(team_size) + " exceeds expert count " +
                          std::to_string(graph.expert_count()));
    if (concepts_per_task > graph.concept_count())
        throw ConfigError("concepts_per_task exceeds concept count");
}

nlohmann::json BanditConfig::to_json() const {
    return {
        {"lambda", lambda},
        {"eta", eta},
        {"kappa", kappa},
        {"delta", delta},
        {"alpha0", alpha0},
        {"beta0", beta0},
        {"window_depth", window_depth},
        {"team_size", team_size},
        {"concepts_per_task", concepts_per_task},
        {"sample_mode", to_string(sample_mode)},
        {"selection_mode", to_string(selection_mode)},
        {"match_threshold", match_threshold},
        {"weights", {weights.semantic, weights.dependency, weights.history, weights.synergy}},
    };
}

BanditConfig BanditConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("bandit config must be an object");
    BanditConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "lambda") c.lambda = value.get<double>();
            else if (key == "eta") c.eta = value.get<double>();
            else if (key == "kappa") c.kappa = value.get<double>();
            else if (key == "delta") c.delta = value.get<double>();
            else if (key == "alpha0") c.alpha0 = value.get<double>();
            else if (key == "beta0") c.beta0 = value.get<double>();
            else if (key == "window_depth") c.window_depth = value.get<std::size_t>();
            else if (key == "team_size") c.team_size = value.get<std::size_t>();
            else if (key == "concepts_per_task") c.concepts_per_task = value.get<std::size_t>();
            else if (key == "sample_mode") c.sample_mode = parse_sample_mode(value.get<std::string>());
            else if (key == "selection_mode")
                c.selection_mode = parse_selection_mode(value.get<std::string>());
            else if (key == "match_threshold") c.match_threshold = value.get<double>();
            else if (key == "weights") {
                auto w = value.get<std::vector<double>>();
                if (w.size() != 4) throw ConfigError("weights must have 4 entries");
                c.weights = {w[0], w[1], w[2], w[3]};
            } else {
                throw ConfigError("unknown bandit key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bandit config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

std::string BanditConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(to_json().dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// SubsetKey

SubsetKey::SubsetKey(std::vector<ExpertId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
        throw DomainError("subset contains a duplicate expert");
}

bool SubsetKey::contains(ExpertId id) const noexcept {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

SubsetKey SubsetKey::with(ExpertId id) const {
    std::vector<ExpertId> ids = ids_;
    ids.push_back(id);
    return SubsetKey(std::move(ids));
}

std::string SubsetKey::str() const {
    std::string out;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(ids_[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Posterior store

double decay_factor(Step dt, double kappa) {
    if (dt < 0) throw DomainError("negative elapsed time");
    if (dt == 0 || kappa == 0.0) return 1.0;
    return std::exp(-kappa * static_cast<double>(dt));
}

PosteriorStore::PosteriorStore(const BanditConfig& config)
    : alpha0_(config.alpha0),
      beta0_(config.beta0),
      window_depth_(config.window_depth),
      config_hash_(config.hash()) {}

SubsetPosterior PosteriorStore::posterior(const SubsetKey& key) const {
    if (const auto* p = find(key)) return *p;
    SubsetPosterior prior;
    prior.key = key;
    prior.alpha = alpha0_;
    prior.beta = beta0_;
    return prior;
}

const SubsetPosterior* PosteriorStore::find(const SubsetKey& key) const {
    auto it = subsets_.find(key);
    return it == subsets_.end() ? nullptr : &it->second;
}

double PosteriorStore::expert_success_rate(ExpertId id) const {
    auto it = counters_.find(id);
    if (it == counters_.end()) return 0.5;
    const double total = it->second.successes + it->second.failures;
    if (!(total > 0.0)) return 0.5;
    return it->second.successes / total;
}

HistoryView PosteriorStore::history_view() const {
    return [this](ExpertId id) { return expert_success_rate(id); };
}

SubsetPosterior& PosteriorStore::mutable_entry(const SubsetKey& key) {
    auto it = subsets_.find(key);
    if (it == subsets_.end()) it = subsets_.emplace(key, posterior(key)).first;
    return it->second;
}

ExpertCounter& PosteriorStore::mutable_counter(ExpertId id) { return counters_[id]; }

const SubsetPosterior& update_posterior(PosteriorStore& store, const SubsetKey& subset,
                                        double reward, double km, Step now,
                                        const BanditConfig& config) {
    if (subset.empty()) throw DomainError("cannot update an empty subset");
    if (!(reward >= 0.0 && reward <= 1.0)) throw DomainError("reward must lie in [0,1]");
    if (!(km >= 0.0 && km <= 1.0)) throw DomainError("knowledge match must lie in [0,1]");
    if (const auto* existing = store.find(subset); existing && existing->last_update &&
                                                   *existing->last_update > now) {
        throw DomainError("update at step " + std::to_string(now) + " precedes the last update");
    }

    SubsetPosterior& p = store.mutable_entry(subset);
    const Step dt = p.last_update ? now - *p.last_update : 0;
    const double gamma = decay_factor(dt, config.kappa);
    p.alpha = std::max(gamma * p.alpha, kPosteriorFloor) + reward + config.delta * km;
    p.beta = std::max(gamma * p.beta, kPosteriorFloor) + (1.0 - reward) + config.delta * (1.0 - km);
    p.last_update = now;
    p.window.push_back({reward, km});
    while (p.window.size() > store.window_depth()) p.window.pop_front();

    for (ExpertId id : subset.ids()) {
        ExpertCounter& c = store.mutable_counter(id);
        const double g = decay_factor(std::max<Step>(now - c.last_update, 0), config.kappa);
        c.successes = g * c.successes + reward;
        c.failures = g * c.failures + (1.0 - reward);
        c.last_update = now;
    }
    store.advance_clock(now);
    return p;
}

// ---------------------------------------------------------------------------
// Confidence

ConfidenceTerms confidence_terms(const SubsetPosterior& posterior, std::span<const ExpertId> subset,
                                 const TaskSpec& task, const BanditConfig& config,
                                 const DistanceInputs& inputs, Step now, Rng* rng) {
    ConfidenceTerms t;
    if (config.sample_mode == SampleMode::sampled) {
        if (!rng) throw DomainError("sampled confidence requires a random stream");
        t.posterior = sample_beta(*rng, posterior.alpha, posterior.beta);
    } else {
        t.posterior = posterior.mean();
    }
    const DistanceTerms d = distance_terms(inputs, subset, task);
    t.distance = d.value(inputs.weights);
    t.match = 1.0 - d.bracket(inputs.weights);
    const Step dt = posterior.last_update ? now - *posterior.last_update : 0;
    t.time_decay = decay_factor(dt, config.kappa);
    t.synergy = team_synergy(inputs.graph, subset, inputs.synergy);
    t.value = t.posterior * std::exp(-config.lambda * t.distance) * t.time_decay *
              std::pow(t.synergy, config.eta);
    return t;
}

double confidence(const SubsetPosterior& posterior, std::span<const ExpertId> subset,
                  const TaskSpec& task, const BanditConfig& config, const DistanceInputs& inputs,
                  Step now, Rng* rng) {
    return confidence_terms(posterior, subset, task, config, inputs, now, rng).value;
}

std::vector<ConceptId> select_concepts(const TaskSpec& task, std::size_t m) {
    if (task.concepts.empty()) throw RoutingError("task " + task.task_id + " has no active concepts");
    std::vector<ConceptId> active(task.concepts.ids().begin(), task.concepts.ids().end());
    std::stable_sort(active.begin(), active.end(), [&](ConceptId a, ConceptId b) {
        if (task.requirement[a] != task.requirement[b]) return task.requirement[a] > task.requirement[b];
        return a < b;
    });
    if (active.size() > m) active.resize(m);
    return active;
}

// ---------------------------------------------------------------------------
// Subset search

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

namespace {

// Picks the best admissible entry of evaluated[first..]; falls back to all
// entries when none is admissible.
std::size_t pick_best(const std::vector<ScoredSubset>& evaluated, std::size_t first,
                      const std::vector<char>& admissible, bool& fallback) {
    std::size_t best = evaluated.size();
    bool any = false;
    for (std::size_t i = first; i < evaluated.size(); ++i) any |= admissible[i] != 0;
    if (!any) fallback = true;
    for (std::size_t i = first; i < evaluated.size(); ++i) {
        if (any && !admissible[i]) continue;
        if (best == evaluated.size() || evaluated[i].score > evaluated[best].score) best = i;
    }
    return best;
}

}  // namespace

SearchResult greedy_search(std::span<const ExpertId> pool, std::size_t k, const SubsetScorer& score,
                           const SubsetFilter& admissible) {
    std::vector<ExpertId> sorted(pool.begin(), pool.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty()) throw RoutingError("empty eligible pool");
    k = std::min(k, sorted.size());

    SearchResult result;
    std::vector<char> ok;
    SubsetKey current;
    for (std::size_t round = 0; round < k; ++round) {
        const std::size_t first = result.evaluated.size();
        for (ExpertId e : sorted) {
            if (current.contains(e)) continue;
            SubsetKey cand = current.with(e);
            const double s = score(cand.ids());
            ok.push_back(!admissible || admissible(cand.ids()));
            result.evaluated.push_back({std::move(cand), s});
        }
        const std::size_t best = pick_best(result.evaluated, first, ok, result.filter_fallback);
        current = result.evaluated[best].key;
        result.best = result.evaluated[best];
    }
    return result;
}

SearchResult exhaustive_search(std::span<const ExpertId> pool, std::size_t k,
                               const SubsetScorer& score, const SubsetFilter& admissible) {
    std::vector<ExpertId> sorted(pool.begin(), pool.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty()) throw RoutingError("empty eligible pool");
    k = std::min(k, sorted.size());
    const std::uint64_t total = binomial(sorted.size(), k);
    if (total > kExhaustiveBudget) {
        throw BudgetError("exhaustive search over C(" + std::to_string(sorted.size()) + "," +
                          std::to_string(k) + ") = " + std::to_string(total) +
                          " subsets exceeds the budget; reduce the pool or use greedy selection");
    }

    SearchResult result;
    result.evaluated.reserve(total);
    std::vector<char> ok;
    ok.reserve(total);
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<ExpertId> members(k);
    const std::size_t n = sorted.size();
    while (true) {
        for (std::size_t i = 0; i < k; ++i) members[i] = sorted[idx[i]];
        const double s = score(members);
        ok.push_back(!admissible || admissible(members));
        result.evaluated.push_back({SubsetKey(members), s});

        // Next combination in lexicographic order.
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    const std::size_t best = pick_best(result.evaluated, 0, ok, result.filter_fallback);
    result.best = result.evaluated[best];
    return result;
}

SelectionResult select_subset(const PosteriorStore& store, const TaskSpec& task,
                              const SelectionInputs& inputs, Rng& rng, Step now) {
    if (!task.routable()) throw RoutingError("task " + task.task_id + " has no active concepts");
    auto concepts = select_concepts(task, inputs.config.concepts_per_task);
    auto pool = inputs.graph.experts_active_on(concepts);
    if (pool.empty()) throw RoutingError("no expert covers the selected concepts of task " + task.task_id);
    SelectionResult result = select_subset_from_pool(store, task, pool, inputs, rng, now);
    result.concepts = std::move(concepts);
    return result;
}

SelectionResult select_subset_from_pool(const PosteriorStore& store, const TaskSpec& task,
                                        std::span<const ExpertId> pool,
                                        const SelectionInputs& inputs, Rng& rng, Step now) {
    if (pool.empty()) throw RoutingError("no eligible experts for task " + task.task_id);
    const BanditConfig& config = inputs.config;
    const DistanceInputs dist{inputs.graph, config.weights, inputs.synergy, store.history_view()};

    SelectionResult result;
    result.pool.assign(pool.begin(), pool.end());
    std::sort(result.pool.begin(), result.pool.end());
    result.truncated = result.pool.size() < config.team_size;
    {
        Rng probe = rng;
        result.rng_tag = probe();
    }

    Rng* stream = config.sample_mode == SampleMode::sampled ? &rng : nullptr;
    SubsetScorer scorer = [&](std::span<const ExpertId> members) {
        SubsetKey key(std::vector<ExpertId>(members.begin(), members.end()));
        return confidence(store.posterior(key), members, task, config, dist, now, stream);
    };
    SubsetFilter filter;
    if (config.match_threshold > 0.0) {
        filter = [&](std::span<const ExpertId> members) {
            return 1.0 - distance_terms(dist, members, task).bracket(config.weights) >=
                   config.match_threshold;
        };
    }

    SearchResult search = config.selection_mode == SelectionMode::greedy
                              ? greedy_search(result.pool, config.team_size, scorer, filter)
                              : exhaustive_search(result.pool, config.team_size, scorer, filter);

    result.subset = search.best.key;
    result.confidence = search.best.score;
    result.filter_fallback = search.filter_fallback;
    result.candidates.reserve(search.evaluated.size());
    for (auto& s : search.evaluated) result.candidates.push_back({std::move(s.key), s.score});
    result.distance = knowledge_distance(dist, result.subset.ids(), task);
    result.km = km_index(inputs.graph, result.subset.ids(), task, inputs.synergy);
    return result;
}

// ---------------------------------------------------------------------------
// Snapshot / restore

nlohmann::json snapshot(const PosteriorStore& store) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["config_hash"] = store.config_hash();
    auto& subsets = doc["subsets"] = nlohmann::json::array();
    for (const auto& [key, p] : store.subsets()) {
        nlohmann::json window = nlohmann::json::array();
        for (const auto& w : p.window) window.push_back({w.reward, w.km});
        subsets.push_back({{"key", std::vector<ExpertId>(key.ids().begin(), key.ids().end())},
                           {"alpha", p.alpha},
                           {"beta", p.beta},
                           {"last_update", p.last_update.value_or(0)},
                           {"window", std::move(window)}});
    }
    auto& counters = doc["expert_counters"] = nlohmann::json::array();
    for (const auto& [id, c] : store.expert_counters()) {
        counters.push_back(
            {{"expert_id", id}, {"s", c.successes}, {"f", c.failures}, {"last_update", c.last_update}});
    }
    return doc;
}

std::string snapshot_text(const PosteriorStore& store) { return snapshot(store).dump(2) + "\n"; }

namespace {

const nlohmann::json& restore_field(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw RestoreError("missing '" + std::string(key) + "' in " + where);
    return *it;
}

double restore_positive(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw RestoreError(where + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x <= 0.0) throw RestoreError(where + " must be finite and > 0");
    return x;
}

double restore_unit(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw RestoreError(where + " must be a number");
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) throw RestoreError(where + " must lie in [0,1]");
    return x;
}

Step restore_step(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<Step>() < 0)
        throw RestoreError(where + " must be a non-negative integer");
    return v.get<Step>();
}

}  // namespace

PosteriorStore restore(const nlohmann::json& doc, const BanditConfig& config) {
    if (!doc.is_object()) throw RestoreError("snapshot must be a JSON object");
    PosteriorStore store(config);
    const auto& version = restore_field(doc, "version", "snapshot");
    if (!version.is_number_integer() || version.get<int>() != 1)
        throw RestoreError("unsupported snapshot version");
    const auto& hash = restore_field(doc, "config_hash", "snapshot");
    if (!hash.is_string()) throw RestoreError("config_hash must be a string");
    if (hash.get<std::string>() != store.config_hash())
        throw RestoreError("config_hash " + hash.get<std::string>() +
                           " does not match the active configuration " + store.config_hash());

    const auto& subsets = restore_field(doc, "subsets", "snapshot");
    if (!subsets.is_array()) throw RestoreError("subsets must be an array");
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        const std::string where = "subsets[" + std::to_string(i) + "]";
        const auto& s = subsets[i];
        if (!s.is_object()) throw RestoreError(where + " must be an object");
        const auto& jkey = restore_field(s, "key", where);
        if (!jkey.is_array() || jkey.empty()) throw RestoreError(where + ".key must be a non-empty array");
        std::vector<ExpertId> ids;
        for (const auto& id : jkey) {
            if (!id.is_number_unsigned()) throw RestoreError(where + ".key holds a non-id value");
            ids.push_back(id.get<ExpertId>());
        }
        if (!std::is_sorted(ids.begin(), ids.end()) ||
            std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw RestoreError(where + ".key must be strictly ascending");
        SubsetKey key(ids);
        if (store.find(key)) throw RestoreError(where + ".key duplicates an earlier entry");

        SubsetPosterior& p = store.mutable_entry(key);
        p.alpha = restore_positive(restore_field(s, "alpha", where), where + ".alpha");
        p.beta = restore_positive(restore_field(s, "beta", where), where + ".beta");
        p.last_update = restore_step(restore_field(s, "last_update", where), where + ".last_update");
        const auto& window = restore_field(s, "window", where);
        if (!window.is_array()) throw RestoreError(where + ".window must be an array");
        if (window.size() > store.window_depth())
            throw RestoreError(where + ".window is longer than window_depth");
        for (std::size_t w = 0; w < window.size(); ++w) {
            const std::string ww = where + ".window[" + std::to_string(w) + "]";
            if (!window[w].is_array() || window[w].size() != 2) throw RestoreError(ww + " must be [r, km]");
            p.window.push_back({restore_unit(window[w][0], ww), restore_unit(window[w][1], ww)});
        }
        store.advance_clock(*p.last_update);
    }

    const auto& counters = restore_field(doc, "expert_counters", "snapshot");
    if (!counters.is_array()) throw RestoreError("expert_counters must be an array");
    for (std::size_t i = 0; i < counters.size(); ++i) {
        const std::string where = "expert_counters[" + std::to_string(i) + "]";
        const auto& c = counters[i];
        if (!c.is_object()) throw RestoreError(where + " must be an object");
        const auto& id = restore_field(c, "expert_id", where);
        if (!id.is_number_unsigned()) throw RestoreError(where + ".expert_id must be a non-negative integer");
        if (store.expert_counters().contains(id.get<ExpertId>()))
            throw RestoreError(where + ".expert_id duplicates an earlier entry");
        ExpertCounter& counter = store.mutable_counter(id.get<ExpertId>());
        for (const char* field : {"s", "f"}) {
            const auto& v = restore_field(c, field, where);
            if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0)
                throw RestoreError(where + "." + field + " must be finite and >= 0");
        }
        counter.successes = c["s"].get<double>();
        counter.failures = c["f"].get<double>();
        counter.last_update = restore_step(restore_field(c, "last_update", where), where + ".last_update");
        store.advance_clock(counter.last_update);
    }
    return store;
}

PosteriorStore restore_text(std::string_view text, const BanditConfig& config) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw RestoreError(e.what());
    }
    return restore(doc, config);
}

// ---------------------------------------------------------------------------
// Parameter sharing

std::size_t share_parameters(PosteriorStore& store, const DistanceInputs& inputs, double epsilon) {
    std::vector<SubsetKey> keys;
    for (const auto& [key, _] : store.subsets()) keys.push_back(key);
    const std::size_t n = keys.size();

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dij = subset_distance(inputs, keys[i].ids(), keys[j].ids());
            const double dji = subset_distance(inputs, keys[j].ids(), keys[i].ids());
            if (std::max(dij, dji) < epsilon) parent[root(j)] = root(i);
        }
    }

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[root(i)].push_back(i);

    std::size_t changed = 0;
    for (const auto& [_, members] : groups) {
        if (members.size() < 2) continue;
        double a = 0.0;
        double b = 0.0;
        for (std::size_t i : members) {
            a += store.subsets().at(keys[i]).alpha;
            b += store.subsets().at(keys[i]).beta;
        }
        a /= static_cast<double>(members.size());
        b /= static_cast<double>(members.size());
        for (std::size_t i : members) {
            SubsetPosterior& p = store.mutable_entry(keys[i]);
            if (p.alpha != a || p.beta != b) ++changed;
            p.alpha = a;
            p.beta = b;
        }
    }
    return changed;
}

}  // namespace kabb
