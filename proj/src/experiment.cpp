#include "kabb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "kabb/error.hpp"
#include "kabb/stats.hpp"

namespace kabb::experiment {

namespace fs = std::filesystem;

const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names = {
        "lambda", "eta",    "kappa",  "decay_factor", "delta",
        "omega1", "omega2", "omega3", "omega4",       "match_threshold"};
    return names;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["graph"] = graph.string();
    j["bandit"] = bandit.to_json();
    j["environment"] = environment.to_json();
    j["drift_every"] = drift_every ? nlohmann::json(*drift_every) : nlohmann::json(nullptr);
    auto& p = j["policies"] = nlohmann::json::array();
    for (const auto& spec : policies) p.push_back(spec.to_json());
    j["steps"] = steps;
    j["seeds"] = seeds;
    j["output_dir"] = output_dir.string();
    j["decay_period"] = decay_period;
    auto& s = j["sweep"] = nlohmann::json::array();
    for (const auto& axis : sweep) s.push_back({{"parameter", axis.parameter}, {"values", axis.values}});
    j["workers"] = workers;
    return j;
}

namespace {

std::string valid_parameter_list() {
    std::string out;
    for (const auto& n : sweep_parameters()) out += (out.empty() ? "" : ", ") + n;
    return out;
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("'" + key + "' has a value of the wrong type");
    }
}

}  // namespace

ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    static const std::vector<std::string> known = {
        "version", "graph", "bandit", "environment", "drift_every", "policies", "steps",
        "seeds",   "output_dir", "decay_period", "sweep", "workers"};
    for (const auto& [k, v] : doc.items()) {
        (void)v;
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError("unknown key '" + k + "' in experiment config");
        }
    }
    for (const char* required : {"version", "graph", "policies", "steps", "seeds"}) {
        if (!doc.contains(required)) throw ConfigError(std::string("missing required key '") + required + "'");
    }

    ExperimentConfig c;
    c.version = get_as<int>(doc.at("version"), "version");
    if (c.version != 1) throw ConfigError("unsupported config version " + std::to_string(c.version));

    c.graph = get_as<std::string>(doc.at("graph"), "graph");
    if (c.graph.is_relative()) c.graph = base_dir / c.graph;
    c.graph = c.graph.lexically_normal();
    if (!fs::exists(c.graph)) throw IoError("graph file " + c.graph.string() + " does not exist");

    if (doc.contains("bandit")) c.bandit = BanditConfig::from_json(doc.at("bandit"));
    if (doc.contains("environment")) c.environment = sim::EnvironmentSpec::from_json(doc.at("environment"));
    if (doc.contains("drift_every") && !doc.at("drift_every").is_null()) {
        c.drift_every = get_as<Step>(doc.at("drift_every"), "drift_every");
        if (*c.drift_every < 1) throw ConfigError("drift_every must be >= 1");
        if (!c.environment.drift.empty()) throw ConfigError("use either drift_every or environment.drift");
    }

    const auto& pol = doc.at("policies");
    if (!pol.is_array() || pol.empty()) throw ConfigError("policies must be a non-empty array");
    for (const auto& p : pol) c.policies.push_back(sim::PolicySpec::from_json(p));

    c.steps = get_as<Step>(doc.at("steps"), "steps");
    if (c.steps < 1) throw ConfigError("steps must be >= 1");

    const auto& seeds = doc.at("seeds");
    if (seeds.is_object()) {
        for (const auto& [k, v] : seeds.items()) {
            (void)v;
            if (k != "from" && k != "count") throw ConfigError("seeds range takes 'from' and 'count'");
        }
        const auto from = get_as<std::uint64_t>(seeds.value("from", nlohmann::json(1)), "seeds.from");
        const auto count = get_as<std::uint64_t>(seeds.value("count", nlohmann::json(0)), "seeds.count");
        for (std::uint64_t i = 0; i < count; ++i) c.seeds.push_back(from + i);
    } else {
        c.seeds = get_as<std::vector<std::uint64_t>>(seeds, "seeds");
    }
    if (c.seeds.empty()) throw ConfigError("seeds must not be empty");

    if (doc.contains("output_dir")) c.output_dir = get_as<std::string>(doc.at("output_dir"), "output_dir");
    if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    c.output_dir = c.output_dir.lexically_normal();

    if (doc.contains("decay_period")) c.decay_period = get_as<double>(doc.at("decay_period"), "decay_period");
    if (!(c.decay_period > 0.0 && std::isfinite(c.decay_period))) throw ConfigError("decay_period must be > 0");

    if (doc.contains("sweep")) {
        const auto& sw = doc.at("sweep");
        if (!sw.is_array()) throw ConfigError("sweep must be an array of axes");
        for (const auto& a : sw) {
            if (!a.is_object() || !a.contains("parameter") || !a.contains("values")) {
                throw ConfigError("sweep axes need 'parameter' and 'values'");
            }
            SweepAxis axis{get_as<std::string>(a.at("parameter"), "parameter"),
                           get_as<std::vector<double>>(a.at("values"), "values")};
            const auto& names = sweep_parameters();
            if (std::find(names.begin(), names.end(), axis.parameter) == names.end()) {
                throw ConfigError("unknown sweep parameter '" + axis.parameter + "'; valid: " +
                                  valid_parameter_list());
            }
            if (axis.values.empty()) throw ConfigError("sweep grid for " + axis.parameter + " is empty");
            c.sweep.push_back(std::move(axis));
        }
    }
    if (doc.contains("workers")) c.workers = get_as<std::size_t>(doc.at("workers"), "workers");
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    ExperimentConfig c = parse_experiment_config(doc, path.parent_path());
    if (const char* env = std::getenv("KABB_OUTPUT_DIR"); env && *env) c.output_dir = env;
    return c;
}

void apply_parameter(ExperimentConfig& c, const std::string& name, double v) {
    BanditConfig& b = c.bandit;
    auto omega = [&](int i) {
        auto w = b.weights.as_array();
        const double rest = 1.0 - w[i];
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(name + " must lie in [0,1]");
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            // Other weights keep their proportions and absorb the change.
            w[j] = rest > 0.0 ? w[j] * (1.0 - v) / rest : (1.0 - v) / 3.0;
        }
        w[i] = v;
        b.weights = {w[0], w[1], w[2], w[3]};
    };
    if (name == "lambda") b.lambda = v;
    else if (name == "eta") b.eta = v;
    else if (name == "kappa") b.kappa = v;
    else if (name == "decay_factor") {
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError("decay_factor must lie in (0,1]");
        b.kappa = v == 1.0 ? 0.0 : -std::log(v) / c.decay_period;
    } else if (name == "delta") b.delta = v;
    else if (name == "omega1") omega(0);
    else if (name == "omega2") omega(1);
    else if (name == "omega3") omega(2);
    else if (name == "omega4") omega(3);
    else if (name == "match_threshold") b.match_threshold = v;
    else throw ConfigError("unknown sweep parameter '" + name + "'; valid: " + valid_parameter_list());
    b.validate();
}

sim::EnvironmentSpec environment_for(const ExperimentConfig& c) {
    sim::EnvironmentSpec spec = c.environment;
    if (c.drift_every) {
        for (Step t = *c.drift_every; t <= c.steps; t += *c.drift_every) spec.drift.push_back({t, {}, true});
    }
    return spec;
}

namespace {

// Runs jobs[0..n) on up to `workers` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto loop = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    if (workers <= 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

SimulationResult simulate(const ExperimentConfig& c, const KnowledgeGraph& graph, bool keep_curves) {
    c.bandit.validate_for(graph);
    const auto env_spec = environment_for(c);
    env_spec.validate(graph);
    const std::size_t np = c.policies.size();
    const std::size_t ns = c.seeds.size();

    std::vector<std::vector<sim::RegretCurve>> curves(np, std::vector<sim::RegretCurve>(ns));
    sim::RunOptions options;
    options.bandit = c.bandit;
    options.steps = c.steps;
    parallel_for(np * ns, c.workers, [&](std::size_t job) {
        const std::size_t p = job / ns;
        const std::size_t s = job % ns;
        const sim::Environment env(graph, env_spec, c.seeds[s]);
        curves[p][s] = sim::run(c.policies[p], env, options, c.seeds[s]);
    });

    SimulationResult result;
    for (std::size_t p = 0; p < np; ++p) {
        PolicySummary ps;
        ps.policy = c.policies[p].name();
        ps.runs = ns;
        ps.summary = sim::summarize(curves[p]);
        for (const auto& curve : curves[p]) {
            ps.terminal.push_back(curve.terminal());
            ps.success.push_back(curve.success_rate());
        }
        result.policies.push_back(std::move(ps));
    }
    if (keep_curves) result.curves = std::move(curves);
    return result;
}

void write_summary_csv(std::ostream& out, const SimulationResult& result, Step steps) {
    using sim::format_real;
    out << kSummaryCsvHeader << '\n';
    for (const auto& p : result.policies) {
        const auto& s = p.summary;
        out << p.policy << ',' << p.runs << ',' << steps << ',' << format_real(s.terminal_mean) << ','
            << format_real(s.terminal_std) << ',' << format_real(s.terminal_min) << ','
            << format_real(s.terminal_q25) << ',' << format_real(s.terminal_median) << ','
            << format_real(s.terminal_q75) << ',' << format_real(s.terminal_max) << ','
            << format_real(s.success_rate_mean) << ',' << format_real(s.success_rate_std) << ','
            << format_real(s.loglog_slope) << '\n';
    }
}

std::vector<SweepRow> sweep(const ExperimentConfig& c, const KnowledgeGraph& graph) {
    if (c.sweep.empty()) throw ConfigError("sweep needs at least one axis");
    std::vector<SweepRow> rows;
    std::vector<std::size_t> idx(c.sweep.size(), 0);
    std::size_t point = 0;
    while (true) {
        ExperimentConfig cfg = c;
        std::vector<double> values;
        for (std::size_t a = 0; a < c.sweep.size(); ++a) {
            values.push_back(c.sweep[a].values[idx[a]]);
            apply_parameter(cfg, c.sweep[a].parameter, values.back());
        }
        const SimulationResult r = simulate(cfg, graph, false);
        for (const auto& p : r.policies) {
            rows.push_back({point, values, p.policy, "terminal_regret", p.summary.terminal_mean,
                            p.summary.terminal_std});
            rows.push_back({point, values, p.policy, "success_rate", p.summary.success_rate_mean,
                            p.summary.success_rate_std});
        }
        ++point;
        // Odometer over the axes, last axis fastest.
        std::size_t a = c.sweep.size();
        while (a > 0) {
            --a;
            if (++idx[a] < c.sweep[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) return rows;
        }
    }
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& c, const std::vector<SweepRow>& rows) {
    out << "point";
    for (const auto& axis : c.sweep) out << ',' << axis.parameter;
    out << ",policy,metric,mean,std\n";
    for (const auto& r : rows) {
        out << r.point;
        for (double v : r.values) out << ',' << sim::format_real(v);
        out << ',' << r.policy << ',' << r.metric << ',' << sim::format_real(r.mean) << ','
            << sim::format_real(r.std) << '\n';
    }
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace kabb::experiment
