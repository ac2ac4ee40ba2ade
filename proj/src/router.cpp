#include "kabb/router.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "kabb/error.hpp"

namespace kabb {

namespace {

bool is_word(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || u >= 0x80;  // treat UTF-8 bytes as letters
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

ConceptLexicon::ConceptLexicon(std::map<std::string, LexiconEntry> entries) {
    for (auto& [phrase, entry] : entries) {
        const std::string key = lowercase(trim(phrase));
        if (key.empty()) throw ValidationError("lexicon phrase is empty");
        if (!(entry.weight > 0.0 && entry.weight <= 1.0)) {
            throw ValidationError("lexicon weight for '" + key + "' must lie in (0,1]");
        }
        if (!entries_.emplace(key, entry).second) {
            throw ValidationError("lexicon phrase '" + key + "' appears twice (case-insensitive)");
        }
    }
    for (const auto& [k, v] : entries_) {
        (void)v;
        by_length_.push_back(k);
    }
    std::stable_sort(by_length_.begin(), by_length_.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
}

void ConceptLexicon::check_against(const KnowledgeGraph& graph) const {
    for (const auto& [k, v] : entries_) {
        if (v.concept_id >= graph.concept_count()) {
            throw ValidationError("lexicon phrase '" + k + "' maps to unknown concept " +
                                  std::to_string(v.concept_id));
        }
    }
}

nlohmann::json ConceptLexicon::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : entries_) j[k] = {{"concept", v.concept_id}, {"weight", v.weight}};
    return j;
}

ConceptLexicon load_lexicon(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("lexicon must be a JSON object");
    std::map<std::string, LexiconEntry> entries;
    for (const auto& [phrase, value] : doc.items()) {
        if (!value.is_object() || !value.contains("concept")) {
            throw ParseError("lexicon entry '" + phrase + "' needs {\"concept\": id, \"weight\": w}");
        }
        for (const auto& [k, v] : value.items()) {
            (void)v;
            if (k != "concept" && k != "weight") {
                throw ParseError("unknown key '" + k + "' in lexicon entry '" + phrase + "'");
            }
        }
        const auto& c = value.at("concept");
        if (!c.is_number_unsigned()) throw ParseError("concept of '" + phrase + "' must be a non-negative integer");
        LexiconEntry e;
        e.concept_id = c.get<ConceptId>();
        if (value.contains("weight")) {
            if (!value.at("weight").is_number()) throw ParseError("weight of '" + phrase + "' must be a number");
            e.weight = value.at("weight").get<double>();
        }
        if (!entries.emplace(phrase, e).second) throw ParseError("duplicate lexicon phrase '" + phrase + "'");
    }
    return ConceptLexicon(std::move(entries));
}

ConceptLexicon load_lexicon_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read lexicon " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return load_lexicon(doc);
}

Extraction extract_concepts(std::string_view text, const ConceptLexicon& lexicon,
                            const KnowledgeGraph& graph, std::string task_id) {
    if (trim(text).empty()) throw InputError("instruction text is empty");
    lexicon.check_against(graph);

    const std::string lower = lowercase(text);
    const std::size_t n = lower.size();
    Extraction out;
    std::vector<double> req(graph.concept_count(), 0.0);

    std::size_t i = 0;
    while (i < n) {
        const bool word_start = is_word(lower[i]) && (i == 0 || !is_word(lower[i - 1]));
        if (!word_start) {
            ++i;
            continue;
        }
        bool hit = false;
        for (const auto& phrase : lexicon.phrases()) {
            const std::size_t len = phrase.size();
            if (len > n - i || lower.compare(i, len, phrase) != 0) continue;
            if (i + len < n && is_word(lower[i + len]) && is_word(phrase.back())) continue;
            const LexiconEntry& e = lexicon.entries().at(phrase);
            out.matches.push_back({phrase, i, e.concept_id, e.weight});
            req[e.concept_id] += e.weight;
            i += len;
            hit = true;
            break;
        }
        if (!hit) {
            while (i < n && is_word(lower[i])) ++i;
        }
    }

    const double peak = *std::max_element(req.begin(), req.end());
    out.unroutable = out.matches.empty();
    if (peak > 0.0) {
        for (double& r : req) r /= peak;
    }
    out.task = graph.make_task(std::move(task_id), std::move(req));
    return out;
}

// ---------------------------------------------------------------------------
// Adapters

nlohmann::json AdapterRequest::to_json() const {
    return {{"task_id", task_id}, {"text", text}, {"concepts", concepts}};
}

AdapterRequest AdapterRequest::from_json(const nlohmann::json& j) {
    try {
        AdapterRequest r;
        r.task_id = j.at("task_id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.concepts = j.at("concepts").get<std::vector<ConceptId>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("adapter request: ") + e.what());
    }
}

nlohmann::json AdapterResponse::to_json() const { return {{"text", text}, {"self_score", self_score}}; }

AdapterResponse AdapterResponse::from_json(const nlohmann::json& j) {
    AdapterResponse r;
    try {
        r.text = j.at("text").get<std::string>();
        r.self_score = j.at("self_score").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("adapter response: ") + e.what());
    }
    if (!(r.self_score >= 0.0 && r.self_score <= 1.0)) throw ParseError("self_score must lie in [0,1]");
    return r;
}

MockExpertAdapter::MockExpertAdapter(ExpertProfile profile, std::uint64_t seed,
                                     std::chrono::milliseconds latency)
    : profile_(std::move(profile)), seed_(seed), latency_(latency) {}

AdapterResponse MockExpertAdapter::respond(const AdapterRequest& request) {
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    double cap = 0.0;
    for (ConceptId c : request.concepts) {
        if (c < profile_.capability.size()) cap += profile_.capability[c];
    }
    if (!request.concepts.empty()) cap /= static_cast<double>(request.concepts.size());

    const std::uint64_t h = mix64(seed_ ^ mix64(fnv1a(request.task_id) ^ fnv1a(request.text)) ^
                                  (static_cast<std::uint64_t>(profile_.expert_id) << 32));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;

    AdapterResponse r;
    r.self_score = std::clamp(cap * (0.9 + 0.1 * u), 0.0, 1.0);
    std::ostringstream text;
    text << profile_.name << " on \"" << request.text << "\" (concepts";
    for (ConceptId c : request.concepts) text << ' ' << c;
    text << ')';
    r.text = text.str();
    return r;
}

std::vector<ExpertResponse> dispatch(const std::vector<std::shared_ptr<ExpertAdapter>>& adapters,
                                     const AdapterRequest& request, std::chrono::milliseconds timeout) {
    // Workers are detached; everything they touch lives in `state`.
    struct State {
        std::mutex mu;
        std::condition_variable cv;
        std::vector<ExpertResponse> results;
        std::size_t done = 0;
    };
    auto state = std::make_shared<State>();
    state->results.resize(adapters.size());
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        state->results[i].expert_id = adapters[i]->expert_id();
        state->results[i].error = "timed out";
    }

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        std::thread([state, adapter = adapters[i], request, i] {
            std::optional<AdapterResponse> resp;
            std::string err;
            try {
                resp = adapter->respond(request);
                if (!(resp->self_score >= 0.0 && resp->self_score <= 1.0)) {
                    err = "self_score outside [0,1]";
                    resp.reset();
                }
            } catch (const std::exception& e) {
                err = e.what();
            }
            std::lock_guard lock(state->mu);
            state->results[i].response = std::move(resp);
            state->results[i].error = std::move(err);
            ++state->done;
            state->cv.notify_all();
        }).detach();
    }

    std::unique_lock lock(state->mu);
    state->cv.wait_until(lock, deadline, [&] { return state->done == adapters.size(); });
    auto out = state->results;
    // Late finishers must not count: the snapshot above is the answer.
    return out;
}

AggregatedAnswer aggregate(const std::vector<FusionInput>& inputs) {
    if (inputs.empty()) throw InputError("nothing to aggregate");
    AggregatedAnswer a;
    std::vector<double> raw;
    double total = 0.0;
    for (const auto& in : inputs) {
        const double w = std::max(in.confidence, 0.0) * std::max(in.self_score, 0.0);
        raw.push_back(std::isfinite(w) ? w : 0.0);
        total += raw.back();
        a.experts.push_back(in.expert_id);
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        a.uniform_fallback = true;
        a.weights.assign(inputs.size(), 1.0 / static_cast<double>(inputs.size()));
    } else {
        for (double w : raw) a.weights.push_back(w / total);
    }

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (a.weights[l] != a.weights[r]) return a.weights[l] > a.weights[r];
        return inputs[l].expert_id < inputs[r].expert_id;
    });
    std::ostringstream text;
    for (std::size_t j = 0; j < order.size(); ++j) {
        char w[32];
        std::snprintf(w, sizeof w, "%.4f", a.weights[order[j]]);
        if (j) text << '\n';
        text << "[expert " << inputs[order[j]].expert_id << " w=" << w << "] " << inputs[order[j]].text;
    }
    a.text = text.str();
    return a;
}

// ---------------------------------------------------------------------------
// Routing

RouteDecision route(std::string_view text, const PosteriorStore& store, const KnowledgeGraph& graph,
                    const ConceptLexicon& lexicon, const BanditConfig& config,
                    const SynergyModel& synergy, Rng& rng, std::string task_id) {
    RouteDecision d;
    d.extraction = extract_concepts(text, lexicon, graph, std::move(task_id));
    if (d.extraction.unroutable || !d.extraction.task.routable()) {
        throw RoutingError("unroutable instruction: no lexicon phrase matched");
    }
    d.step = store.clock() + 1;
    const SelectionInputs inputs{graph, synergy, config};
    d.selection = select_subset(store, d.extraction.task, inputs, rng, d.step);
    return d;
}

std::vector<double> expert_confidences(const RouteDecision& decision, const PosteriorStore& store,
                                       const KnowledgeGraph& graph, const BanditConfig& config,
                                       const SynergyModel& synergy) {
    BanditConfig mean_cfg = config;
    mean_cfg.sample_mode = SampleMode::mean;
    const DistanceInputs dist{graph, config.weights, synergy, store.history_view()};
    std::vector<double> out;
    for (ExpertId e : decision.selection.subset.ids()) {
        const SubsetKey key({e});
        out.push_back(confidence(store.posterior(key), key.ids(), decision.extraction.task, mean_cfg,
                                 dist, decision.step, nullptr));
    }
    return out;
}

Router::Router(const KnowledgeGraph& graph, ConceptLexicon lexicon, BanditConfig config,
               PosteriorStore store, std::size_t trace_capacity)
    : graph_(&graph),
      lexicon_(std::move(lexicon)),
      config_(std::move(config)),
      synergy_(SynergyModel::for_graph(graph)),
      capacity_(trace_capacity),
      store_(std::move(store)) {
    config_.validate_for(graph);
    lexicon_.check_against(graph);
    if (capacity_ == 0) throw ConfigError("trace capacity must be positive");
}

RouteDecision Router::route(std::string_view text, Rng& rng, std::optional<std::string> task_id) {
    std::lock_guard lock(mu_);
    std::string id = task_id ? *task_id : "task-" + std::to_string(++sequence_);
    if (traces_.contains(id)) throw InputError("task id '" + id + "' is already logged");
    RouteDecision d = kabb::route(text, store_, *graph_, lexicon_, config_, synergy_, rng, id);

    order_.push_back(id);
    traces_.emplace(id, Trace{d.selection.subset, d.selection.km, d.step, false});
    while (order_.size() > capacity_) {
        traces_.erase(order_.front());
        order_.pop_front();
    }
    return d;
}

SubsetPosterior Router::ingest_feedback(const std::string& task_id, double reward) {
    std::lock_guard lock(mu_);
    auto it = traces_.find(task_id);
    if (it == traces_.end()) throw FeedbackError("no logged selection for task '" + task_id + "'");
    if (it->second.consumed) throw FeedbackError("feedback for task '" + task_id + "' was already applied");
    const Step now = std::max(it->second.step, store_.clock());
    const SubsetPosterior p = update_posterior(store_, it->second.subset, reward, it->second.km, now, config_);
    it->second.consumed = true;
    return p;
}

PosteriorStore Router::store() const {
    std::lock_guard lock(mu_);
    return store_;
}

std::size_t Router::trace_size() const {
    std::lock_guard lock(mu_);
    return traces_.size();
}

}  // namespace kabb
