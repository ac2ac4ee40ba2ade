#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kabb/error.hpp"
#include "kabb/sim.hpp"
#include "kabb/stats.hpp"
#include "support.hpp"

using namespace kabb;
using namespace kabb::sim;
using kabb::testing::covering;
using kabb::testing::make_expert;
using kabb::testing::one_hot;
using kabb::testing::path_graph;

namespace {

const KnowledgeGraph& default_graph() {
    static const KnowledgeGraph g = load_graph_file(KABB_DATA_DIR "/default_graph.json");
    return g;
}

EnvironmentSpec templated() {
    EnvironmentSpec s;
    s.noise_scale = 0.05;
    s.task_templates = 8;
    return s;
}

RegretCurve line(double slope, int n) {
    RegretCurve c;
    for (int t = 1; t <= n; ++t) c.steps.push_back({t, "t", SubsetKey({0}), 0, 0, 0, slope, slope * t});
    return c;
}

}  // namespace

TEST_CASE("perfect expert and empty coverage") {
    auto g = path_graph(2, {make_expert(0, covering(2, {0})), make_expert(1, covering(2, {1}))});
    EnvironmentSpec s;
    s.base_skill = std::vector<double>{1.0, 1.0};
    s.task_concepts = 1;
    Environment env(g, s, 4);
    auto t = g.make_task("t", one_hot(2, {0}));
    const ExpertId hit[] = {0}, miss[] = {1};
    CHECK(env.theta_star(hit, t, 1) == 1.0);
    CHECK(env.theta_star(miss, t, 1) == 0.0);
}

TEST_CASE("truth rule") {
    auto g = path_graph(3, {make_expert(0, covering(3, {0, 1})), make_expert(1, covering(3, {2}))});
    EnvironmentSpec s;
    s.base_skill = std::vector<double>{0.8, 0.4};
    Environment env(g, s, 1);
    const ExpertId both[] = {0, 1};
    // C_S = {0,1,2}, C_t = {1,2}: jaccard 2/3, mean skill 0.6
    CHECK(env.theta_star(both, g.make_task("t", one_hot(3, {1, 2})), 1) ==
          doctest::Approx(2.0 / 3.0 * 0.6).epsilon(1e-15));
}

TEST_CASE("environments are a function of spec and seed") {
    const auto& g = default_graph();
    auto spec = templated();
    spec.drift.push_back({50, {}, true});
    Environment a(g, spec, 9), b(g, spec, 9), c(g, spec, 10);
    CHECK(a.skills_at(1) == b.skills_at(1));
    CHECK(a.skills_at(60) == b.skills_at(60));
    CHECK(a.skills_at(1) != c.skills_at(1));
    CHECK(a.skills_at(1) != a.skills_at(60));
    Rng ra = make_stream(9, "tasks"), rb = make_stream(9, "tasks");
    for (Step t = 1; t < 20; ++t) {
        auto ta = a.draw_task(t, ra), tb = b.draw_task(t, rb);
        CHECK(ta.requirement == tb.requirement);
        const ExpertId s[] = {0, 3, 7};
        CHECK(a.theta_star(s, ta, t) == b.theta_star(s, tb, t));
    }
}

TEST_CASE("explicit drift permutation") {
    auto g = path_graph(1, {make_expert(0, {1}), make_expert(1, {1}), make_expert(2, {1})});
    EnvironmentSpec s;
    s.base_skill = std::vector<double>{0.1, 0.2, 0.3};
    s.task_concepts = 1;
    s.drift.push_back({5, {2, 0, 1}, false});
    Environment env(g, s, 0);
    CHECK(env.skills_at(4) == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(env.skills_at(5) == std::vector<double>{0.3, 0.1, 0.2});
}

TEST_CASE("oracle regret is zero and regret is never negative") {
    const auto& g = default_graph();
    Environment env(g, templated(), 3);
    RunOptions o;
    o.steps = 300;
    auto oracle = run(PolicySpec{PolicyKind::oracle}, env, o, 3);
    CHECK(oracle.terminal() == 0.0);
    for (auto kind : {PolicyKind::kabb, PolicyKind::vanilla_thompson, PolicyKind::ucb1,
                      PolicyKind::epsilon_greedy, PolicyKind::random}) {
        auto c = run(PolicySpec{kind}, env, o, 3);
        REQUIRE(c.size() == 300);
        for (const auto& r : c.steps) CHECK(r.inst_regret >= 0.0);
    }
}

TEST_CASE("random policy on two arms") {
    // one concept, two experts covering it with skills 0.9 and 0.1
    auto g = path_graph(1, {make_expert(0, {1.0}), make_expert(1, {1.0})});
    EnvironmentSpec s;
    s.base_skill = std::vector<double>{0.9, 0.1};
    s.task_concepts = 1;
    RunOptions o;
    o.steps = 200;
    o.bandit.team_size = 1;
    o.bandit.concepts_per_task = 1;
    std::vector<double> terminal;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Environment env(g, s, seed);
        terminal.push_back(run(PolicySpec{PolicyKind::random}, env, o, seed).terminal());
    }
    const double expected = 0.4 * double(o.steps);
    const double se = stats::stddev(terminal) / std::sqrt(double(terminal.size()));
    CHECK(std::abs(stats::mean(terminal) - expected) <= 3.0 * se);
}

TEST_CASE("zeroed KABB reproduces vanilla Thompson sampling") {
    const auto& g = default_graph();
    RunOptions o;
    o.steps = 400;
    o.bandit.lambda = o.bandit.eta = o.bandit.kappa = o.bandit.delta = 0.0;
    o.bandit.selection_mode = SelectionMode::exhaustive;
    for (std::uint64_t seed : {1u, 2u}) {
        Environment env(g, templated(), seed);
        auto a = run(PolicySpec{PolicyKind::kabb}, env, o, seed);
        auto b = run(PolicySpec{PolicyKind::vanilla_thompson}, env, o, seed);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.steps[i].subset == b.steps[i].subset);
            CHECK(a.steps[i].cum_regret == b.steps[i].cum_regret);
        }
    }
}

TEST_CASE("runs are deterministic") {
    const auto& g = default_graph();
    Environment env(g, templated(), 5);
    RunOptions o;
    o.steps = 200;
    std::ostringstream x, y;
    write_curve_csv(x, run(PolicySpec{PolicyKind::kabb}, env, o, 5));
    write_curve_csv(y, run(PolicySpec{PolicyKind::kabb}, env, o, 5));
    CHECK(x.str() == y.str());
}

TEST_CASE("oracle budget") {
    const auto& g = default_graph();
    Environment env(g, templated(), 1);
    RunOptions o;
    o.steps = 100;
    o.max_oracle_evaluations = 1000;
    CHECK_THROWS_AS(run(PolicySpec{PolicyKind::random}, env, o, 1), BudgetError);
    auto small = templated();
    small.oracle_pool_cap = 2;
    Environment capped(g, small, 1);
    RunOptions ok;
    ok.steps = 5;
    CHECK_THROWS_WITH_AS(run(PolicySpec{PolicyKind::random}, capped, ok, 1), doctest::Contains("pool"),
                         BudgetError);
}

TEST_CASE("summaries") {
    auto one = line(0.5, 10);
    auto s1 = summarize(std::span(&one, 1));
    CHECK(s1.mean_cum == one.cumulative());
    for (double v : s1.std_cum) CHECK(v == 0.0);

    std::vector<RegretCurve> twins{one, one};
    for (double v : summarize(twins).std_cum) CHECK(v == 0.0);

    auto lin = line(2.0, 10000);
    CHECK(std::abs(summarize(std::span(&lin, 1)).loglog_slope - 1.0) <= 0.01);

    std::vector<RegretCurve> bad{line(1, 5), line(1, 6)};
    CHECK_THROWS_AS(summarize(bad), DomainError);
    CHECK_THROWS_AS(summarize(std::span<const RegretCurve>{}), DomainError);

    std::vector<RegretCurve> quart{line(1, 4), line(2, 4), line(3, 4), line(4, 4), line(5, 4)};
    auto q = summarize(quart);
    CHECK(q.terminal_median == 12.0);
    CHECK(q.terminal_q25 == 8.0);
    CHECK(q.terminal_min == 4.0);
    CHECK(q.terminal_max == 20.0);
}

TEST_CASE("episode csv format") {
    RegretCurve c;
    c.steps.push_back({1, "t1", SubsetKey({2, 5, 11}), 1.0, 0.25, 0.5, 0.25, 0.25});
    c.steps.push_back({2, "t2", SubsetKey({3}), 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.25});
    std::ostringstream out;
    write_curve_csv(out, c);
    CHECK(out.str() ==
          "step,task_id,subset_key,reward,theta_star_chosen,theta_star_best,inst_regret,cum_regret\n"
          "1,t1,2-5-11,1,0.25,0.5,0.25,0.25\n"
          "2,t2,3,0,0.333333333,0.333333333,0,0.25\n");
}

TEST_CASE("policy specs") {
    CHECK(parse_policy_kind("vanilla-thompson") == PolicyKind::vanilla_thompson);
    CHECK_THROWS_AS(parse_policy_kind("softmax"), ConfigError);
    auto p = PolicySpec::from_json({{"kind", "epsilon-greedy"}, {"epsilon", 0.2}});
    CHECK(p.kind == PolicyKind::epsilon_greedy);
    CHECK(p.epsilon == 0.2);
    CHECK(PolicySpec::from_json("ucb1").kind == PolicyKind::ucb1);
    CHECK_THROWS_AS(PolicySpec::from_json({{"kind", "random"}, {"epsilon", 2.0}}), ConfigError);
}

TEST_CASE("mann-whitney and slope helpers") {
    // fully separated samples of 5: U = 0, exact two-sided p = 2/252; normal approx ~0.012
    const double a[] = {1, 2, 3, 4, 5}, b[] = {6, 7, 8, 9, 10};
    auto mw = stats::mann_whitney(a, b);
    CHECK(mw.u == 0.0);
    CHECK(mw.p_two_sided < 0.05);
    auto same = stats::mann_whitney(a, a);
    CHECK(same.p_two_sided > 0.9);
    const double x[] = {1, 10, 100}, y[] = {3, 300, 30000};
    CHECK(stats::log_log_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(stats::quantile({1, 2, 3, 4}, 0.5) == 2.5);
}
