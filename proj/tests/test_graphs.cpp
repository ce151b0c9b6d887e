#include <doctest.h>

#include <random>
#include <sstream>

#include "iopq/graph.hpp"

using namespace iopq;

namespace {

EdgeList parse(const std::string& text) {
    std::istringstream in(text);
    return load_graph(in);
}

std::string random_graph_text(std::mt19937_64& rng, std::uint64_t max_v, std::uint64_t max_e) {
    const std::uint64_t v = 1 + rng() % max_v;
    const std::uint64_t e = rng() % (max_e + 1);
    std::ostringstream out;
    out << v << ' ' << e << '\n';
    for (std::uint64_t i = 0; i < e; ++i)
        out << rng() % v << ' ' << rng() % v << ' ' << rng() % 1000000 << '\n';
    return out.str();
}

void check_against_oracles(BlockStore& s, const EdgeList& el, std::uint64_t source) {
    Graph g = build_adjacency(s, el);
    TreapParams p(1.0, graph_lambda(g));

    SsspResult got = sssp(s, g, source, p);
    SsspResult want = sssp_oracle(el, source);
    CHECK(got.dist == want.dist);
    // Parent edges may legitimately differ between shortest-path trees; check
    // validity instead: parent settled, and some edge closes the distance.
    for (std::uint64_t v = 0; v < g.node_count; ++v) {
        if (v == source || got.dist[v] == UNREACHABLE) {
            CHECK(got.parent[v] == NO_PARENT);
            continue;
        }
        const std::uint64_t u = got.parent[v];
        REQUIRE(u != NO_PARENT);
        bool closes = false;
        for (const Edge& e : el.edges)
            if (e.src == u && e.dst == v && got.dist[u] != UNREACHABLE &&
                got.dist[u] + e.weight == got.dist[v])
                closes = true;
        CHECK(closes);
    }

    TraversalResult d = dfs(s, g, source, p);
    TraversalResult dw = dfs_oracle(el, source);
    CHECK(d.order == dw.order);
    CHECK(d.level == dw.level);

    TraversalResult b = bfs(s, g, source, p);
    TraversalResult bw = bfs_oracle(el, source);
    CHECK(b.order == bw.order);
    CHECK(b.level == bw.level);

    free_graph(s, g);
}

}  // namespace

TEST_CASE("parses the two-node example") {
    EdgeList el = parse("2 1\n0 1 5\n");
    CHECK(el.node_count == 2);
    REQUIRE(el.edges.size() == 1);
    CHECK(el.edges[0].src == 0);
    CHECK(el.edges[0].dst == 1);
    CHECK(el.edges[0].weight == 5);
}

TEST_CASE("parses an edgeless graph") {
    EdgeList el = parse("1 0\n");
    CHECK(el.node_count == 1);
    CHECK(el.edges.empty());
}

TEST_CASE("parse errors carry line numbers") {
    CHECK_THROWS_AS(parse(""), GraphParseError);
    CHECK_THROWS_AS(parse("2 2\n0 1 5\n"), GraphParseError);      // too few edges
    CHECK_THROWS_AS(parse("2 0\n0 1 5\n"), GraphParseError);      // too many edges
    CHECK_THROWS_AS(parse("2 1\n0 2 5\n"), GraphParseError);      // id out of range
    CHECK_THROWS_AS(parse("2 1\nzero 1 5\n"), GraphParseError);   // malformed
    CHECK_THROWS_AS(parse("0 0\n"), GraphParseError);             // no nodes
    try {
        parse("2 1\n0 1\n");
    } catch (const GraphParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("adjacency holds both directions as multisets") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    // Triangle plus a duplicate edge 0->1.
    EdgeList el = parse("3 4\n0 1 7\n1 2 3\n2 0 9\n0 1 7\n");
    Graph g = build_adjacency(s, el);
    CHECK(g.out_off == std::vector<std::uint64_t>{0, 2, 3, 4});
    CHECK(g.in_off == std::vector<std::uint64_t>{0, 1, 3, 4});
    // Out rows of 0: both copies of 0->1, in input-rank order.
    ElementVec r = s.read_range(g.out_rows, 0, 2);
    CHECK(r[0].key == 1);
    CHECK(r[1].key == 1);
    CHECK(g.ranks[r[0].priority] == 0);
    CHECK(g.ranks[r[1].priority] == 1);
    // In rows of 1: sources of both copies.
    ElementVec ir = s.read_range(g.in_rows, g.in_off[1], 2);
    CHECK(ir[0].key == 0);
    CHECK(ir[1].key == 0);
    free_graph(s, g);
}

TEST_CASE("single node graph") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    EdgeList el = parse("1 0\n");
    Graph g = build_adjacency(s, el);
    TreapParams p(1.0, 4.0);
    SsspResult r = sssp(s, g, 0, p);
    CHECK(r.dist == std::vector<std::uint64_t>{0});
    CHECK(r.parent == std::vector<std::uint64_t>{NO_PARENT});
    TraversalResult t = bfs(s, g, 0, p);
    CHECK(t.order == std::vector<std::uint64_t>{0});
    CHECK(t.level == std::vector<std::uint64_t>{0});
    free_graph(s, g);
}

TEST_CASE("shortest paths on a weighted path with an unreachable node") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    EdgeList el = parse("4 3\n0 1 1\n1 2 2\n3 0 1\n");
    Graph g = build_adjacency(s, el);
    SsspResult r = sssp(s, g, 0, TreapParams(1.0, 4.0));
    CHECK(r.dist == std::vector<std::uint64_t>{0, 1, 3, UNREACHABLE});
    CHECK(r.parent == std::vector<std::uint64_t>{NO_PARENT, 0, 1, NO_PARENT});
    free_graph(s, g);
}

TEST_CASE("dfs follows lowest-rank children first on a diamond") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    EdgeList el = parse("4 5\n0 1 1\n0 2 1\n1 3 1\n2 3 1\n3 1 1\n");
    Graph g = build_adjacency(s, el);
    TraversalResult t = dfs(s, g, 0, TreapParams(1.0, 4.0));
    CHECK(t.order == std::vector<std::uint64_t>{0, 1, 3, 2});
    CHECK(t.level == std::vector<std::uint64_t>{0, 1, 1, 2});
    free_graph(s, g);
}

TEST_CASE("bfs levels on a star") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    EdgeList el = parse("4 3\n0 1 1\n0 2 1\n0 3 1\n");
    Graph g = build_adjacency(s, el);
    TraversalResult t = bfs(s, g, 0, TreapParams(1.0, 4.0));
    CHECK(t.order == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(t.level == std::vector<std::uint64_t>{0, 1, 1, 1});
    free_graph(s, g);
}

TEST_CASE("source out of range throws") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    EdgeList el = parse("2 1\n0 1 5\n");
    Graph g = build_adjacency(s, el);
    CHECK_THROWS_AS(sssp(s, g, 2, TreapParams(1.0, 4.0)), std::out_of_range);
    free_graph(s, g);
}

TEST_CASE("random graphs match the in-memory oracles") {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 25; ++round) {
        BlockStore s = create_store(StoreConfig{64, 65536});
        EdgeList el = parse(random_graph_text(rng, 60, 240));
        check_against_oracles(s, el, rng() % el.node_count);
    }
}

TEST_CASE("self loops and dense multigraphs") {
    std::mt19937_64 rng(1234);
    for (int round = 0; round < 6; ++round) {
        BlockStore s = create_store(StoreConfig{32, 16384});
        // Small node count, many edges: duplicates and self loops abound.
        EdgeList el = parse(random_graph_text(rng, 5, 80));
        check_against_oracles(s, el, rng() % el.node_count);
    }
}
