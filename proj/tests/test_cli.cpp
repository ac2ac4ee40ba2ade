#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "kabb/error.hpp"
#include "kabb/experiment.hpp"

namespace fs = std::filesystem;
using namespace kabb;

namespace {

struct Result {
    int code = -1;
    std::string out;  // stdout and stderr
};

Result kabb_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + KABB_BIN + "\" " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("kabb-test-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kGraph = KABB_DATA_DIR "/default_graph.json";

nlohmann::json small_config(const fs::path& out) {
    return {{"version", 1},
            {"graph", kGraph},
            {"environment", {{"noise_scale", 0.05}, {"task_templates", 8}}},
            {"policies", {"kabb", "vanilla-thompson", "random", "oracle"}},
            {"steps", 60},
            {"seeds", {{"from", 1}, {"count", 20}}},
            {"workers", 2},
            {"output_dir", out.string()}};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');) out.push_back(f);
    return out;
}

}  // namespace

TEST_CASE("validate") {
    auto ok = kabb_cli("validate " + kGraph);
    CHECK(ok.code == 0);
    CHECK(ok.out.find("valid\n") != std::string::npos);

    auto dir = scratch("validate");
    write(dir / "dangling.json", R"({"concepts":[{"id":0,"name":"a"}],"edges":[[0,99]],"experts":[]})");
    auto bad = kabb_cli("validate " + q(dir / "dangling.json"));
    CHECK(bad.code != 0);
    CHECK(bad.out.find("99") != std::string::npos);

    write(dir / "broken.json", "{\n  \"concepts\": [\n    {\"id\": 0,,}\n");
    auto broken = kabb_cli("validate " + q(dir / "broken.json"));
    CHECK(broken.code != 0);
    CHECK(broken.out.find("line 3") != std::string::npos);

    auto missing = kabb_cli("validate " + q(dir / "absent.json"));
    CHECK(missing.code == 2);
    CHECK(kabb_cli("frobnicate").code != 0);
    fs::remove_all(dir);
}

TEST_CASE("simulate writes deterministic curves and a summary") {
    auto dir = scratch("simulate");
    write(dir / "run.json", small_config(dir / "out").dump());
    auto r = kabb_cli("simulate " + q(dir / "run.json"));
    REQUIRE(r.code == 0);
    std::size_t curves = 0;
    for (const auto& e : fs::directory_iterator(dir / "out" / "curves")) curves += e.path().extension() == ".csv";
    CHECK(curves == 80);
    CHECK(fs::exists(dir / "out" / "summary.csv"));
    CHECK(fs::exists(dir / "out" / "resolved_config.json"));

    const std::string curve = slurp(dir / "out" / "curves" / "kabb_seed3.csv");
    CHECK(lines(curve).front() ==
          "step,task_id,subset_key,reward,theta_star_chosen,theta_star_best,inst_regret,cum_regret");
    CHECK(lines(curve).size() == 61);
    const std::string summary = slurp(dir / "out" / "summary.csv");
    auto rows = lines(summary);
    CHECK(rows.front() == experiment::kSummaryCsvHeader);
    REQUIRE(rows.size() == 5);
    auto oracle = fields(rows[4]);
    CHECK(oracle[0] == "oracle");
    CHECK(oracle[3] == "0");
    CHECK(oracle[9] == "0");

    auto again = kabb_cli("simulate " + q(dir / "run.json"));
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "out" / "curves" / "kabb_seed3.csv") == curve);
    CHECK(slurp(dir / "out" / "curves" / "vanilla-thompson_seed17.csv").size() > 0);
    CHECK(slurp(dir / "out" / "summary.csv") == summary);
    fs::remove_all(dir);
}

TEST_CASE("a single-point sweep reproduces the simulate summary") {
    auto dir = scratch("sweep");
    auto cfg = small_config(dir / "sim");
    cfg["seeds"] = {1, 2, 3, 4};
    cfg["policies"] = {"kabb", "random"};
    cfg["decay_period"] = 100;
    cfg["bandit"] = {{"kappa", -std::log(0.6) / 100}};
    write(dir / "sim.json", cfg.dump());
    cfg["output_dir"] = (dir / "sweep").string();
    cfg["bandit"] = nlohmann::json::object();
    cfg["sweep"] = {{{"parameter", "decay_factor"}, {"values", {0.6}}}};
    write(dir / "sweep.json", cfg.dump());
    REQUIRE(kabb_cli("simulate " + q(dir / "sim.json")).code == 0);
    REQUIRE(kabb_cli("sweep " + q(dir / "sweep.json")).code == 0);

    auto summary = lines(slurp(dir / "sim" / "summary.csv"));
    auto sweep = lines(slurp(dir / "sweep" / "sweep.csv"));
    CHECK(sweep.front() == "point,decay_factor,policy,metric,mean,std");
    REQUIRE(sweep.size() == 5);
    for (std::size_t p = 0; p < 2; ++p) {
        auto s = fields(summary[1 + p]);
        auto regret = fields(sweep[1 + 2 * p]);
        auto success = fields(sweep[2 + 2 * p]);
        CHECK(regret[2] == s[0]);
        CHECK(regret[3] == "terminal_regret");
        CHECK(regret[4] == s[3]);
        CHECK(regret[5] == s[4]);
        CHECK(success[3] == "success_rate");
        CHECK(success[4] == s[10]);
    }

    cfg["sweep"] = {{{"parameter", "temperature"}, {"values", {1.0}}}};
    write(dir / "bad.json", cfg.dump());
    auto bad = kabb_cli("sweep " + q(dir / "bad.json"));
    CHECK(bad.code == 1);
    CHECK(bad.out.find("decay_factor") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("budget errors carry their own exit code") {
    auto dir = scratch("budget");
    auto cfg = small_config(dir / "out");
    cfg["environment"]["oracle_pool_cap"] = 2;
    write(dir / "run.json", cfg.dump());
    auto r = kabb_cli("simulate " + q(dir / "run.json"));
    CHECK(r.code == 3);
    CHECK(r.out.find("budget error") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("route") {
    const std::string text = "\"Write a python program using dynamic programming to compute the integral\"";
    auto a = kabb_cli("route " + kGraph + " --seed 7 " + text);
    auto b = kabb_cli("route " + kGraph + " --seed 7 " + text);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    auto trace = nlohmann::json::parse(a.out);
    CHECK(trace.at("concepts").size() == 2);
    CHECK(trace.at("experts").size() == 3);

    auto dir = scratch("route");
    auto fb = kabb_cli("route " + kGraph + " --seed 7 --feedback 1 --save-snapshot " + q(dir / "s.json") + " " + text);
    REQUIRE(fb.code == 0);
    auto t = nlohmann::json::parse(fb.out);
    const double km = t.at("km");
    CHECK(t.at("feedback").at("alpha").get<double>() == doctest::Approx(1.0 + 1.0 + 0.5 * km).epsilon(1e-12));
    auto next = kabb_cli("route " + kGraph + " --seed 7 --snapshot " + q(dir / "s.json") + " " + text);
    CHECK(next.code == 0);
    auto missing = kabb_cli("route " + kGraph + " --snapshot " + q(dir / "none.json") + " " + text);
    CHECK(missing.code == 2);

    auto none = kabb_cli("route " + kGraph + " \"the weather today\"");
    CHECK(none.code == 1);
    CHECK(none.out.find("routing error") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("experiment parameters") {
    experiment::ExperimentConfig c;
    c.decay_period = 1000;
    experiment::apply_parameter(c, "decay_factor", 0.5);
    CHECK(c.bandit.kappa == doctest::Approx(std::log(2.0) / 1000).epsilon(1e-15));
    experiment::apply_parameter(c, "decay_factor", 1.0);
    CHECK(c.bandit.kappa == 0.0);
    experiment::apply_parameter(c, "omega1", 0.7);
    CHECK(c.bandit.weights.semantic == 0.7);
    CHECK(c.bandit.weights.dependency == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(c.bandit.weights.history == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(c.bandit.weights.synergy == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(experiment::apply_parameter(c, "gamma", 1.0), doctest::Contains("match_threshold"),
                         ConfigError);
    CHECK_THROWS_AS(experiment::apply_parameter(c, "decay_factor", 0.0), ConfigError);
}

TEST_CASE("experiment config parsing") {
    auto base = small_config("out");
    auto c = experiment::parse_experiment_config(base, "/configs");
    CHECK(c.seeds.size() == 20);
    CHECK(c.seeds.front() == 1);
    CHECK(c.output_dir == fs::path("/configs/out"));
    auto extra = base;
    extra["stpes"] = 10;
    CHECK_THROWS_AS(experiment::parse_experiment_config(extra, "/"), ConfigError);
    auto missing = base;
    missing.erase("seeds");
    CHECK_THROWS_WITH_AS(experiment::parse_experiment_config(missing, "/"), doctest::Contains("seeds"),
                         ConfigError);
    auto drift = base;
    drift["drift_every"] = 25;
    auto d = experiment::parse_experiment_config(drift, "/");
    CHECK(experiment::environment_for(d).drift.size() == 2);
}
