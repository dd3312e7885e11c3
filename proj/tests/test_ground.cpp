#include <doctest.h>

#include "gsgraph/errors.hpp"
#include "gsgraph/graph.hpp"
#include "gsgraph/ground.hpp"

using namespace gsgraph;

namespace {

SceneGraph cup_table_graph() {
    SceneGraph graph;
    auto add = [&](int id, const std::string& cat, const Vec3& c) {
        GraphNode n;
        n.cluster_id = id;
        n.category = cat;
        n.centroid = c;
        graph.nodes.push_back(n);
    };
    add(0, "cup", Vec3(0, 0, 1));
    add(1, "cup", Vec3(4, 0, 1));
    add(2, "table", Vec3(0, 0, 0));
    add(3, "chair", Vec3(8, 0, 0));
    graph.edges.push_back({0, "on", 2, 2, true, Verdict::kKept, false});
    graph.edges.push_back({1, "next to", 3, 1, true, Verdict::kKept, false});
    return graph;
}

}  // namespace

TEST_SUITE("ground") {

TEST_CASE("filter keeps only queried categories and their edges") {
    const SceneGraph graph = cup_table_graph();
    GroundingTrace trace;
    const SceneGraph sub = filter_categories(graph, {"cup", "table"}, &trace);
    CHECK(sub.nodes.size() == 3);
    REQUIRE(sub.edges.size() == 1);
    CHECK(sub.edges[0].predicate == "on");
    CHECK(trace.subgraph_nodes == 3);
    // Never invents nodes.
    for (const auto& n : sub.nodes) CHECK(graph.has_node(n.cluster_id));
}

TEST_CASE("filter falls back to the full graph when nothing matches") {
    const SceneGraph graph = cup_table_graph();
    GroundingTrace trace;
    const SceneGraph sub = filter_categories(graph, {"mug"}, &trace);
    CHECK(sub.nodes.size() == graph.nodes.size());
    REQUIRE(!trace.notes.empty());
    CHECK(trace.notes[0].find("full graph") != std::string::npos);
}

TEST_CASE("deterministic extractor finds vocabulary substrings") {
    const SceneGraph graph = cup_table_graph();
    const auto cats = extract_categories_deterministic("Where is the CUP on the table?", graph);
    CHECK(cats == std::vector<std::string>{"cup", "table"});
    CHECK(extract_categories_deterministic("an unrelated sofa", graph).empty());
}

TEST_CASE("resolver ranks the constrained cup first") {
    const SceneGraph graph = cup_table_graph();
    QueryConstraints q;
    q.target_category = "cup";
    q.relations = {{"on", "table"}};
    const GroundingResult result = resolve_deterministic(q, graph);
    REQUIRE(result.ranked.size() == 2);
    CHECK(result.ranked[0] == 0);
    CHECK(result.ranked[1] == 1);
}

TEST_CASE("resolver without constraints lists candidates in id order") {
    const SceneGraph graph = cup_table_graph();
    QueryConstraints q;
    q.target_category = "cup";
    const GroundingResult result = resolve_deterministic(q, graph);
    CHECK(result.ranked == std::vector<int>{0, 1});
}

TEST_CASE("resolver ignores dropped edges") {
    SceneGraph graph = cup_table_graph();
    graph.edges[0].verdict = Verdict::kDroppedContact;
    QueryConstraints q;
    q.target_category = "cup";
    q.relations = {{"on", "table"}};
    const GroundingResult result = resolve_deterministic(q, graph);
    // Neither cup satisfies the constraint now; order falls back to ids.
    CHECK(result.ranked == std::vector<int>{0, 1});
}

TEST_CASE("superlative query picks the nearest chair, matching nearest_of_category") {
    SceneGraph graph;
    auto add = [&](int id, const std::string& cat, const Vec3& c) {
        GraphNode n;
        n.cluster_id = id;
        n.category = cat;
        n.centroid = c;
        graph.nodes.push_back(n);
    };
    add(0, "blackboard", Vec3(0, 0, 0));
    add(1, "chair", Vec3(3, 0, 0));
    add(2, "chair", Vec3(1, 0, 0));
    add(3, "chair", Vec3(2, 0, 0));

    QueryConstraints q;
    q.target_category = "chair";
    q.superlative = Superlative{Superlative::Kind::kNearest, "blackboard"};
    const GroundingResult result = resolve_deterministic(q, graph);
    CHECK(result.ranked[0] == 2);
    CHECK(result.ranked[0] == nearest_of_category("chair", 0, graph));

    q.superlative->kind = Superlative::Kind::kFarthest;
    CHECK(resolve_deterministic(q, graph).ranked[0] == 1);
}

TEST_CASE("resolver throws when the target category is absent") {
    QueryConstraints q;
    q.target_category = "sofa";
    CHECK_THROWS_AS(resolve_deterministic(q, cup_table_graph()), NoCandidateError);
}

TEST_CASE("resolver is a pure function of its inputs") {
    const SceneGraph graph = cup_table_graph();
    QueryConstraints q;
    q.target_category = "cup";
    q.relations = {{"on", "table"}};
    const auto a = resolve_deterministic(q, graph);
    const auto b = resolve_deterministic(q, graph);
    CHECK(a.ranked == b.ranked);
}

TEST_CASE("text parser extracts target, relations and superlatives") {
    const SceneGraph graph = cup_table_graph();
    SUBCASE("relation query") {
        const auto q = parse_query_text("the cup on the table", graph, default_predicate_lexicon());
        REQUIRE(q.has_value());
        CHECK(q->target_category == "cup");
        REQUIRE(q->relations.size() == 1);
        CHECK(q->relations[0] == std::pair<std::string, std::string>{"on", "table"});
    }
    SUBCASE("superlative query") {
        const auto q = parse_query_text("the chair nearest to the cup", graph, default_predicate_lexicon());
        REQUIRE(q.has_value());
        CHECK(q->target_category == "chair");
        REQUIRE(q->superlative.has_value());
        CHECK(q->superlative->anchor_category == "cup");
    }
    SUBCASE("no category") {
        CHECK(!parse_query_text("nothing relevant here", graph, default_predicate_lexicon()).has_value());
    }
}

TEST_CASE("llm flow: scripted transport answers directly") {
    const SceneGraph graph = cup_table_graph();
    ScriptedTransport transport({R"(["cup","table"])", "0"});
    const GroundingResult result = resolve_llm("the cup on the table", graph, transport, builtin_prompts(), 1);
    CHECK(result.ranked == std::vector<int>{0});
    CHECK(result.trace.categories == std::vector<std::string>{"cup", "table"});
    // Stage two saw the filtered serialization.
    REQUIRE(transport.prompts_seen().size() == 2);
    CHECK(transport.prompts_seen()[1].find("Gaussian_id: 0 | category: cup") != std::string::npos);
    CHECK(transport.prompts_seen()[1].find("chair") == std::string::npos);
}

TEST_CASE("llm flow: garbage then a valid id succeeds after one retry") {
    const SceneGraph graph = cup_table_graph();
    ScriptedTransport transport({R"(["cup"])", "the object you want is elusive", "1"});
    const GroundingResult result = resolve_llm("which cup?", graph, transport, builtin_prompts(), 1);
    CHECK(result.ranked == std::vector<int>{1});
    CHECK(transport.prompts_seen().size() == 3);
    CHECK(transport.prompts_seen()[2].find("not a valid") != std::string::npos);
}

TEST_CASE("llm flow: persistent invalid ids raise InvalidClusterIdError") {
    const SceneGraph graph = cup_table_graph();
    ScriptedTransport transport({R"(["cup"])", "99", "99"});
    CHECK_THROWS_AS(resolve_llm("which cup?", graph, transport, builtin_prompts(), 1), InvalidClusterIdError);
}

TEST_CASE("llm category fallback: unknown category means full graph") {
    const SceneGraph graph = cup_table_graph();
    ScriptedTransport transport({R"(["mug"])", "3"});
    const GroundingResult result = resolve_llm("the mug", graph, transport, builtin_prompts(), 0);
    CHECK(result.ranked == std::vector<int>{3});
    CHECK(result.trace.subgraph_nodes == static_cast<int>(graph.nodes.size()));
}

}  // TEST_SUITE
