#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kabb/distance.hpp"
#include "kabb/graph.hpp"
#include "kabb/random.hpp"

namespace kabb {

// Discrete decision step. Decay is measured in steps, not wall-clock time.
using Step = std::int64_t;

enum class SampleMode { sampled, mean };
enum class SelectionMode { greedy, exhaustive };

// Floor applied to alpha and beta after decay so Beta draws stay defined.
inline constexpr double kPosteriorFloor = 1e-6;

struct BanditConfig {
    double lambda = 15.0; // knowledge-distance penalty rate
    double eta = 1.0;     // synergy exponent
    double kappa = 1e-4; // decay rate, gamma^dt = exp(-kappa * dt)
    double delta = 0.5;   // prior-correction strength per unit knowledge match
    double alpha0 = 1.0;
    double beta0 = 1.0;
    std::size_t window_depth = 16;
    std::size_t team_size = 3;
    std::size_t concepts_per_task = 2;
    SampleMode sample_mode = SampleMode::sampled;
    SelectionMode selection_mode = SelectionMode::greedy;
    // Candidates whose normalized match (1 - Dist / log(1 + d)) falls below this
    // are skipped, unless that would leave no candidate. 0 disables the filter.
    double match_threshold = 0.0;
    DistanceWeights weights;

    void validate() const;
    void validate_for(const KnowledgeGraph& graph) const;

    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys are rejected.
    static BanditConfig from_json(const nlohmann::json& j);
    // Stable hex digest of to_json().
    std::string hash() const;

    friend bool operator==(const BanditConfig&, const BanditConfig&) = default;
};

std::string to_string(SampleMode mode);
std::string to_string(SelectionMode mode);

// Canonical subset identifier: expert ids sorted ascending, no duplicates.
class SubsetKey {
public:
    SubsetKey() = default;
    explicit SubsetKey(std::vector<ExpertId> ids);

    std::span<const ExpertId> ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    bool contains(ExpertId id) const noexcept;
    SubsetKey with(ExpertId id) const;

    // Dash-separated ids, e.g. "2-5-11".
    std::string str() const;

    auto operator<=>(const SubsetKey&) const = default;

private:
    std::vector<ExpertId> ids_;
};

struct WindowEntry {
    double reward = 0.0;
    double km = 0.0;

    friend bool operator==(const WindowEntry&, const WindowEntry&) = default;
};

struct SubsetPosterior {
    SubsetKey key;
    double alpha = 1.0;
    double beta = 1.0;
    std::optional<Step> last_update;  // empty for a never-updated prior
    std::deque<WindowEntry> window;   // most recent last

    double mean() const noexcept { return alpha / (alpha + beta); }

    friend bool operator==(const SubsetPosterior&, const SubsetPosterior&) = default;
};

struct ExpertCounter {
    double successes = 0.0;
    double failures = 0.0;
    Step last_update = 0;

    friend bool operator==(const ExpertCounter&, const ExpertCounter&) = default;
};

// e^{-kappa * dt}; exactly 1 when dt == 0 or kappa == 0.
double decay_factor(Step dt, double kappa);

// Lazily populated subset posteriors plus per-expert success counters.
// Single writer; concurrent readers need their own copy or external locking.
class PosteriorStore {
public:
    explicit PosteriorStore(const BanditConfig& config = {});

    // Stored posterior, or the (alpha0, beta0) prior when absent.
    SubsetPosterior posterior(const SubsetKey& key) const;
    const SubsetPosterior* find(const SubsetKey& key) const;

    const std::map<SubsetKey, SubsetPosterior>& subsets() const noexcept { return subsets_; }
    const std::map<ExpertId, ExpertCounter>& expert_counters() const noexcept { return counters_; }

    // Decayed success fraction of the expert; 0.5 without history.
    double expert_success_rate(ExpertId id) const;
    // View bound to this store; valid while the store is alive and unmodified.
    HistoryView history_view() const;

    // Latest step at which anything was updated (0 for a fresh store).
    Step clock() const noexcept { return clock_; }

    double alpha0() const noexcept { return alpha0_; }
    double beta0() const noexcept { return beta0_; }
    std::size_t window_depth() const noexcept { return window_depth_; }
    const std::string& config_hash() const noexcept { return config_hash_; }

    // Used by update_posterior and parameter sharing.
    SubsetPosterior& mutable_entry(const SubsetKey& key);
    ExpertCounter& mutable_counter(ExpertId id);
    void advance_clock(Step now) noexcept { clock_ = std::max(clock_, now); }

    friend bool operator==(const PosteriorStore&, const PosteriorStore&) = default;

private:
    double alpha0_;
    double beta0_;
    std::size_t window_depth_;
    std::string config_hash_;
    Step clock_ = 0;
    std::map<SubsetKey, SubsetPosterior> subsets_;
    std::map<ExpertId, ExpertCounter> counters_;
};

// Decayed Beta update of the selected subset with a knowledge-matching bonus.
// Only the entry for `subset` and its members' counters change.
const SubsetPosterior& update_posterior(PosteriorStore& store, const SubsetKey& subset,
                                        double reward, double km, Step now,
                                        const BanditConfig& config);

struct ConfidenceTerms {
    double posterior = 0.0;      // mean or Beta draw
    double distance = 0.0;       // knowledge distance
    double match = 1.0;          // 1 - normalized distance
    double time_decay = 1.0;
    double synergy = 1.0;
    double value = 0.0;
};

// Adjusted confidence of a subset for a task. Sampled mode needs `rng`.
ConfidenceTerms confidence_terms(const SubsetPosterior& posterior, std::span<const ExpertId> subset,
                                 const TaskSpec& task, const BanditConfig& config,
                                 const DistanceInputs& inputs, Step now, Rng* rng);

double confidence(const SubsetPosterior& posterior, std::span<const ExpertId> subset,
                  const TaskSpec& task, const BanditConfig& config, const DistanceInputs& inputs,
                  Step now, Rng* rng = nullptr);

// The m highest-weighted active concepts, ties by ascending id.
std::vector<ConceptId> select_concepts(const TaskSpec& task, std::size_t m);

// Generic subset search over a scoring function.
using SubsetScorer = std::function<double(std::span<const ExpertId>)>;
using SubsetFilter = std::function<bool(std::span<const ExpertId>)>;

struct ScoredSubset {
    SubsetKey key;
    double score = 0.0;
};

struct SearchResult {
    ScoredSubset best;
    std::vector<ScoredSubset> evaluated;  // in evaluation order
    bool filter_fallback = false;          // some round had no admissible candidate
};

// Grows the subset one expert at a time, adding the expert whose extension
// scores highest (ties: lowest id). Every candidate is scored before the
// filter is consulted, so randomness is consumed identically either way.
SearchResult greedy_search(std::span<const ExpertId> pool, std::size_t k, const SubsetScorer& score,
                           const SubsetFilter& admissible = {});

// Scores every k-combination of the pool in ascending key order.
SearchResult exhaustive_search(std::span<const ExpertId> pool, std::size_t k,
                               const SubsetScorer& score, const SubsetFilter& admissible = {});

// Upper bound on the number of combinations exhaustive search will score.
inline constexpr std::uint64_t kExhaustiveBudget = 2'000'000;

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct CandidateScore {
    SubsetKey key;
    double confidence = 0.0;
};

struct SelectionResult {
    SubsetKey subset;
    std::vector<ConceptId> concepts;
    std::vector<ExpertId> pool;
    std::vector<CandidateScore> candidates;
    double confidence = 0.0;  // of the chosen subset
    double distance = 0.0;
    double km = 0.0;          // knowledge matching index at selection time
    bool truncated = false;   // pool smaller than the team size
    bool filter_fallback = false;
    std::uint64_t rng_tag = 0;  // fingerprint of the rng state before selection
};

struct SelectionInputs {
    const KnowledgeGraph& graph;
    const SynergyModel& synergy;
    const BanditConfig& config;
};

// Chooses a team for the task: top concepts -> eligible pool -> subset search.
SelectionResult select_subset(const PosteriorStore& store, const TaskSpec& task,
                              const SelectionInputs& inputs, Rng& rng, Step now);

// Same, with the eligible pool supplied by the caller.
SelectionResult select_subset_from_pool(const PosteriorStore& store, const TaskSpec& task,
                                        std::span<const ExpertId> pool,
                                        const SelectionInputs& inputs, Rng& rng, Step now);

// Snapshot document: {version, config_hash, subsets, expert_counters}.
nlohmann::json snapshot(const PosteriorStore& store);
std::string snapshot_text(const PosteriorStore& store);
PosteriorStore restore(const nlohmann::json& document, const BanditConfig& config);
PosteriorStore restore_text(std::string_view text, const BanditConfig& config);

// Optional parameter sharing: stored subsets whose mutual distance is below
// `epsilon` (both directions) are grouped and receive the group's mean
// (alpha, beta). Returns the number of entries that changed.
std::size_t share_parameters(PosteriorStore& store, const DistanceInputs& inputs, double epsilon);

}  // namespace kabb
