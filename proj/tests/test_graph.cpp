#include <doctest.h>

#include <algorithm>
#include <iterator>
#include <random>
#include <set>

#include "kabb/error.hpp"
#include "kabb/graph.hpp"
#include "support.hpp"

using namespace kabb;
using kabb::testing::covering;
using kabb::testing::make_expert;
using kabb::testing::one_hot;
using kabb::testing::path_graph;

namespace {

// Set arithmetic on std::set, independent of ConceptSet.
double set_jaccard(const std::set<int>& a, const std::set<int>& b) {
    std::vector<int> i, u;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(i));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
    return u.empty() ? 0.0 : double(i.size()) / double(u.size());
}

}  // namespace

TEST_CASE("default graph has the deployment shape") {
    auto g = load_graph_file(KABB_DATA_DIR "/default_graph.json");
    CHECK(g.concept_count() == 12);
    CHECK(g.expert_count() == 24);
}

TEST_CASE("single concept without experts is legal") {
    auto g = load_graph(nlohmann::json::parse(R"({"concepts":[{"id":0,"name":"x"}],"edges":[],"experts":[]})"));
    CHECK(g.concept_count() == 1);
    CHECK(g.expert_count() == 0);
}

TEST_CASE("load errors") {
    const std::string base = R"({"concepts":[{"id":0,"name":"a"},{"id":1,"name":"b"}],)";
    CHECK_THROWS_AS(load_graph_text(base + R"("edges":[[0,99]],"experts":[]})"), ValidationError);
    CHECK_THROWS_AS(load_graph_text(base + R"("edges":[],"experts":[
        {"expert_id":3,"name":"x","capability":[1,0]},{"expert_id":3,"name":"y","capability":[0,1]}]})"),
                    ValidationError);
    CHECK_THROWS_AS(load_graph_text(base + R"("edges":[[0,1]],"experts":[)"), ParseError);
    CHECK_THROWS_AS(load_graph_text(base + R"("edges":[],"experts":[{"expert_id":0,"name":"x","capability":[1]}]})"),
                    ValidationError);
    CHECK_THROWS_AS(load_graph_text(base + R"("edges":"no","experts":[]})"), ParseError);
}

TEST_CASE("depths are filled by BFS from roots") {
    auto g = load_graph_text(R"({"concepts":[{"id":0,"name":"r","root":true},{"id":1,"name":"a"},
        {"id":2,"name":"b"},{"id":3,"name":"c","depth":7}],"edges":[[0,1],[1,2],[2,3]],"experts":[]})");
    CHECK(g.concept_at(1).depth == 1);
    CHECK(g.concept_at(2).depth == 2);
    CHECK(g.concept_at(3).depth == 7);  // declared depth wins
}

TEST_CASE("jaccard examples") {
    ConceptSet ab({0, 1}), bc({1, 2}), c({2});
    CHECK(jaccard(ab, ab) == 1.0);
    CHECK(jaccard(ab, c) == 0.0);
    CHECK(jaccard(ab, bc) == doctest::Approx(set_jaccard({0, 1}, {1, 2})).epsilon(1e-15));
    CHECK(jaccard(ConceptSet{}, ConceptSet{}) == 0.0);
}

TEST_CASE("jaccard matches set arithmetic and is symmetric") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        std::set<int> a, b;
        std::vector<ConceptId> va, vb;
        for (int c = 0; c < 10; ++c) {
            if (rng() % 3 == 0) { a.insert(c); va.push_back(c); }
            if (rng() % 3 == 0) { b.insert(c); vb.push_back(c); }
        }
        ConceptSet sa(va), sb(vb);
        const double j = jaccard(sa, sb);
        CHECK(j == doctest::Approx(set_jaccard(a, b)).epsilon(1e-15));
        CHECK(j == jaccard(sb, sa));
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        if (!a.empty() && !b.empty()) CHECK((j == 1.0) == (a == b));
    }
}

TEST_CASE("jaccard_overlap of an empty subset is a domain error") {
    auto g = path_graph(3, {make_expert(0, covering(3, {0}))});
    auto t = g.make_task("t", one_hot(3, {1}));
    CHECK_THROWS_AS(jaccard_overlap(g, std::span<const ExpertId>{}, t), DomainError);
    const ExpertId s[] = {0};
    CHECK(jaccard_overlap(g, s, t) == 0.0);
}

TEST_CASE("dependency edge count") {
    auto g = path_graph(3, {make_expert(0, covering(3, {0}))});
    CHECK(dependency_edge_count(g, ConceptSet({0}), ConceptSet({2})) == 2);
    CHECK(dependency_edge_count(g, ConceptSet({0, 1}), ConceptSet({0, 1})) == 0);
    // supersets in either direction leave no cross pairs
    CHECK(dependency_edge_count(g, ConceptSet({0, 1, 2}), ConceptSet({1})) == 0);
    CHECK(dependency_edge_count(g, ConceptSet({1}), ConceptSet({0, 1, 2})) == 0);
    // {0,1} vs {1,2}: only the pair (0,2)
    CHECK(dependency_edge_count(g, ConceptSet({0, 1}), ConceptSet({1, 2})) == 2);
}

TEST_CASE("disconnected pairs contribute the diameter cap") {
    // path of 9 concepts (diameter 8) plus two isolated concepts
    std::vector<Concept> cs;
    std::vector<ConceptEdge> es;
    for (ConceptId i = 0; i < 11; ++i) cs.push_back({i, "c", i < 9 ? int(i) : 0, i == 0 || i >= 9});
    for (ConceptId i = 0; i + 1 < 9; ++i) es.emplace_back(i, i + 1);
    KnowledgeGraph g(cs, es, {});
    CHECK(g.diameter_cap() == 8);
    CHECK_FALSE(g.shortest_path(0, 9).has_value());
    CHECK(dependency_edge_count(g, ConceptSet({0}), ConceptSet({9})) == 8);
    CHECK(dependency_edge_count(g, ConceptSet({0, 10}), ConceptSet({9})) == 16);
}

TEST_CASE("shortest paths agree with Floyd-Warshall") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 9;
        std::vector<Concept> cs;
        for (ConceptId i = 0; i < n; ++i) cs.push_back({i, "c", 0, false});
        std::vector<ConceptEdge> es;
        const int inf = 1 << 20;
        std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
        for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
        for (ConceptId a = 0; a < n; ++a) {
            for (ConceptId b = a + 1; b < n; ++b) {
                if (rng() % 4 == 0) {
                    es.emplace_back(rng() % 2 ? a : b, rng() % 2 ? b : a);
                    if (es.back().first == es.back().second) es.back() = {a, b};
                    d[a][b] = d[b][a] = 1;
                }
            }
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
        KnowledgeGraph g(cs, es, {});
        for (ConceptId a = 0; a < n; ++a) {
            for (ConceptId b = 0; b < n; ++b) {
                auto p = g.shortest_path(a, b);
                if (d[a][b] >= inf) CHECK_FALSE(p.has_value());
                else CHECK(p.value_or(-1) == d[a][b]);
            }
        }
    }
}

TEST_CASE("task difficulty is the mean depth") {
    auto g = path_graph(6, {make_expert(0, covering(6, {0}))});
    CHECK(task_difficulty(g, g.make_task("a", one_hot(6, {1, 3}))) == 2.0);
    CHECK(task_difficulty(g, g.make_task("b", one_hot(6, {5}))) == 5.0);
    CHECK(task_difficulty(g, g.make_task("c", one_hot(6, {0}))) == 0.0);
    CHECK_THROWS_AS(task_difficulty(g, g.make_task("d", one_hot(6, {}))), DomainError);
}

TEST_CASE("experts active on concepts and task sets use the activation threshold") {
    auto g = path_graph(3, {make_expert(4, covering(3, {1})), make_expert(2, covering(3, {0, 2})),
                            make_expert(9, {0.5, 0.5, 0.5})});
    const ConceptId c1[] = {1};
    CHECK(g.experts_active_on(c1) == std::vector<ExpertId>{4});
    const ConceptId c02[] = {0, 2};
    CHECK(g.experts_active_on(c02) == std::vector<ExpertId>{2});
    auto t = g.make_task("t", {0.5, 0.51, 0.0});
    CHECK(t.concepts == ConceptSet({1}));
}

TEST_CASE("graph document round trip") {
    auto g = load_graph_file(KABB_DATA_DIR "/default_graph.json");
    auto again = load_graph(g.to_json());
    CHECK(g == again);
}
