#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <thread>

#include "kabb/error.hpp"
#include "kabb/router.hpp"
#include "support.hpp"

using namespace kabb;
using kabb::testing::covering;
using kabb::testing::make_expert;
using kabb::testing::path_graph;

namespace {

ConceptLexicon lexicon(std::initializer_list<std::pair<const char*, LexiconEntry>> items) {
    std::map<std::string, LexiconEntry> m;
    for (const auto& [k, v] : items) m.emplace(k, v);
    return ConceptLexicon(std::move(m));
}

const KnowledgeGraph& default_graph() {
    static const KnowledgeGraph g = load_graph_file(KABB_DATA_DIR "/default_graph.json");
    return g;
}

const ConceptLexicon& default_lexicon() {
    static const ConceptLexicon l = load_lexicon_file(KABB_DATA_DIR "/default_graph.lexicon.json");
    return l;
}

class SlowAdapter final : public ExpertAdapter {
public:
    SlowAdapter(ExpertId id, std::chrono::milliseconds wait) : id_(id), wait_(wait) {}
    ExpertId expert_id() const override { return id_; }
    AdapterResponse respond(const AdapterRequest&) override {
        std::this_thread::sleep_for(wait_);
        return {"late", 1.0};
    }

private:
    ExpertId id_;
    std::chrono::milliseconds wait_;
};

class ThrowingAdapter final : public ExpertAdapter {
public:
    ExpertId expert_id() const override { return 7; }
    AdapterResponse respond(const AdapterRequest&) override { throw std::runtime_error("backend down"); }
};

}  // namespace

TEST_CASE("single keyword") {
    auto g = path_graph(3, {});
    auto lex = lexicon({{"integral", {1, 0.8}}});
    auto x = extract_concepts("What is the integral of x?", lex, g);
    CHECK_FALSE(x.unroutable);
    CHECK(x.task.requirement == std::vector<double>{0.0, 1.0, 0.0});
    REQUIRE(x.matches.size() == 1);
    CHECK(x.matches[0].offset == 12);
}

TEST_CASE("no hits and empty input") {
    auto g = path_graph(3, {});
    auto lex = lexicon({{"integral", {1, 0.8}}});
    auto x = extract_concepts("integrals everywhere", lex, g);  // whole words only
    CHECK(x.unroutable);
    CHECK(x.task.requirement == std::vector<double>(3, 0.0));
    CHECK_THROWS_AS(extract_concepts("", lex, g), InputError);
}

TEST_CASE("weights are normalized to a unit maximum") {
    auto g = path_graph(3, {});
    auto lex = lexicon({{"alpha", {0, 0.6}}, {"beta", {2, 0.3}}});
    auto x = extract_concepts("ALPHA then beta", lex, g);
    CHECK(x.task.requirement[0] == 1.0);
    CHECK(x.task.requirement[2] == doctest::Approx(0.3 / 0.6).epsilon(1e-15));
}

TEST_CASE("longest phrase wins") {
    auto g = path_graph(3, {});
    auto lex = lexicon({{"dynamic programming", {2, 1.0}}, {"programming", {1, 1.0}}});
    auto x = extract_concepts("use dynamic programming", lex, g);
    REQUIRE(x.matches.size() == 1);
    CHECK(x.matches[0].concept_id == 2);
}

TEST_CASE("lexicon validation") {
    auto g = path_graph(2, {});
    CHECK_THROWS_AS(lexicon({{"x", {5, 1.0}}}).check_against(g), ValidationError);
    CHECK_THROWS(lexicon({{"x", {0, 0.0}}}));
    CHECK_THROWS(load_lexicon(nlohmann::json::parse(R"({"X": {"concept": 0, "weight": 1}, "x": {"concept": 1, "weight": 1}})")));
    CHECK(default_lexicon().size() > 20);
    CHECK_NOTHROW(default_lexicon().check_against(default_graph()));
}

TEST_CASE("fusion weights") {
    auto one = aggregate({{3, "only", 0.4, 0.9}});
    CHECK(one.weights == std::vector<double>{1.0});

    auto two = aggregate({{1, "a", 1.0, 0.8}, {2, "b", 1.0, 0.2}});
    CHECK(two.weights[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(two.weights[1] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_FALSE(two.uniform_fallback);
    CHECK(two.text.find("a") < two.text.find("b"));

    auto zero = aggregate({{1, "a", 1.0, 0.0}, {2, "b", 0.5, 0.0}, {4, "c", 0.5, 0.0}});
    CHECK(zero.uniform_fallback);
    for (double w : zero.weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS(aggregate({}));
}

TEST_CASE("fusion weights are permutation-equivariant") {
    std::vector<FusionInput> in{{1, "a", 0.9, 0.3}, {2, "b", 0.5, 0.7}, {3, "c", 0.2, 0.6}};
    auto base = aggregate(in);
    CHECK(std::accumulate(base.weights.begin(), base.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    std::vector<std::size_t> order{0, 1, 2};
    while (std::next_permutation(order.begin(), order.end())) {
        std::vector<FusionInput> p;
        for (auto i : order) p.push_back(in[i]);
        auto w = aggregate(p);
        for (std::size_t j = 0; j < 3; ++j) CHECK(w.weights[j] == base.weights[order[j]]);
    }
}

TEST_CASE("adapter wire format") {
    AdapterRequest r{"t1", "hello", {1, 4}};
    CHECK(AdapterRequest::from_json(r.to_json()).concepts == r.concepts);
    AdapterResponse a{"text", 0.25};
    CHECK(AdapterResponse::from_json(a.to_json()).self_score == 0.25);
    CHECK_THROWS(AdapterResponse::from_json({{"text", "x"}, {"self_score", 2.0}}));
}

TEST_CASE("dispatch tolerates slow and failing adapters") {
    std::vector<std::shared_ptr<ExpertAdapter>> adapters{
        std::make_shared<MockExpertAdapter>(default_graph().expert(0), 1),
        std::make_shared<SlowAdapter>(9, std::chrono::milliseconds(400)),
        std::make_shared<ThrowingAdapter>()};
    auto out = dispatch(adapters, {"t", "x", {0}}, std::chrono::milliseconds(50));
    REQUIRE(out.size() == 3);
    CHECK(out[0].response.has_value());
    CHECK_FALSE(out[1].response.has_value());
    CHECK(out[1].expert_id == 9);
    CHECK_FALSE(out[2].response.has_value());
    CHECK(out[2].error.find("backend down") != std::string::npos);
}

TEST_CASE("mock adapters are deterministic") {
    MockExpertAdapter a(default_graph().expert(3), 11), b(default_graph().expert(3), 11);
    AdapterRequest r{"t", "some text", {0, 4}};
    CHECK(a.respond(r).self_score == b.respond(r).self_score);
    CHECK(a.respond(r).text == b.respond(r).text);
}

TEST_CASE("route follows the deployment shape") {
    const auto& g = default_graph();
    BanditConfig c;
    PosteriorStore store(c);
    auto syn = SynergyModel::for_graph(g);
    Rng r1 = make_stream(7, "route"), r2 = make_stream(7, "route");
    const char* text = "Write a python program using dynamic programming to compute the integral";
    auto a = route(text, store, g, default_lexicon(), c, syn, r1);
    auto b = route(text, store, g, default_lexicon(), c, syn, r2);
    CHECK(a.selection.concepts.size() == 2);
    CHECK(a.selection.subset.size() == 3);
    CHECK(a.selection.subset == b.selection.subset);
    CHECK(a.selection.confidence == b.selection.confidence);
    CHECK_THROWS_AS(route("nothing to see", store, g, default_lexicon(), c, syn, r1), RoutingError);
}

TEST_CASE("single-expert graph routes to that expert") {
    auto g = path_graph(2, {make_expert(4, covering(2, {0}))});
    auto lex = lexicon({{"alpha", {0, 1.0}}});
    BanditConfig c;
    c.team_size = 1;
    PosteriorStore store(c);
    Rng rng(3);
    auto d = route("alpha", store, g, lex, c, SynergyModel::for_graph(g), rng);
    CHECK(d.selection.subset == SubsetKey({4}));
}

TEST_CASE("feedback") {
    const auto& g = default_graph();
    BanditConfig c;
    c.delta = 0.3;
    Router router(g, default_lexicon(), c, PosteriorStore(c));
    Rng rng(5);
    auto d = router.route("sort an array with an algorithm in python", rng, "q1");
    const auto before = router.store();

    PosteriorStore expected = before;
    update_posterior(expected, d.selection.subset, 1.0, d.selection.km, d.step, c);

    CHECK_THROWS_AS(router.ingest_feedback("nope", 1.0), FeedbackError);
    CHECK(router.store() == before);

    auto p = router.ingest_feedback("q1", 1.0);
    CHECK(p.alpha == doctest::Approx(c.alpha0 + 1.0 + c.delta * d.selection.km).epsilon(1e-15));
    CHECK(router.store() == expected);

    const auto after = router.store();
    CHECK_THROWS_AS(router.ingest_feedback("q1", 0.0), FeedbackError);
    CHECK(router.store() == after);
    CHECK_THROWS_AS(router.route("python", rng, "q1"), InputError);
}

TEST_CASE("trace log is bounded") {
    const auto& g = default_graph();
    BanditConfig c;
    Router router(g, default_lexicon(), c, PosteriorStore(c), 2);
    Rng rng(1);
    for (int i = 0; i < 3; ++i) router.route("python", rng, "id" + std::to_string(i));
    CHECK(router.trace_size() == 2);
    CHECK_THROWS_AS(router.ingest_feedback("id0", 1.0), FeedbackError);
    CHECK_NOTHROW(router.ingest_feedback("id2", 1.0));
}
