#include "iopq/graph.hpp"

#include <algorithm>
#include <istream>
#include <queue>
#include <sstream>

#include "iopq/brt.hpp"
#include "iopq/external_ops.hpp"
#include "iopq/pq.hpp"

namespace iopq {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    throw GraphParseError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

EdgeList load_graph(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    EdgeList out;
    std::uint64_t edge_total = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (!have_header) {
            long long v = -1, e = -1;
            if (!(ls >> v >> e) || v < 1 || e < 0) parse_fail(lineno, "expected header `V E`");
            std::string rest;
            if (ls >> rest) parse_fail(lineno, "trailing tokens in header");
            out.node_count = static_cast<std::uint64_t>(v);
            edge_total = static_cast<std::uint64_t>(e);
            have_header = true;
            continue;
        }
        long long u = -1, v = -1, w = -1;
        if (!(ls >> u >> v >> w)) parse_fail(lineno, "expected edge `u v w`");
        std::string rest;
        if (ls >> rest) parse_fail(lineno, "trailing tokens in edge");
        if (u < 0 || v < 0 || static_cast<std::uint64_t>(u) >= out.node_count ||
            static_cast<std::uint64_t>(v) >= out.node_count)
            parse_fail(lineno, "node id out of range");
        if (w < 0) parse_fail(lineno, "negative weight");
        if (out.edges.size() == edge_total) parse_fail(lineno, "more edges than the header declares");
        out.edges.push_back(Edge{static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(v),
                                 static_cast<std::uint64_t>(w)});
    }
    if (!have_header) parse_fail(1, "missing header");
    if (out.edges.size() != edge_total)
        parse_fail(lineno + 1, "fewer edges than the header declares");
    return out;
}

Graph build_adjacency(BlockStore& store, const EdgeList& input) {
    Graph g;
    g.node_count = input.node_count;
    g.edge_count = input.edges.size();
    g.edges = input.edges;
    g.ranks.assign(g.edge_count, 0);
    {
        std::vector<std::uint64_t> deg(g.node_count, 0);
        for (std::size_t i = 0; i < g.edge_count; ++i) g.ranks[i] = deg[g.edges[i].src]++;
    }

    // Sort edge ids by (source, rank), then by target, using external sorts
    // over Element{key: composite, priority: edge id}.
    auto sorted_ids = [&](auto key_of) {
        ArrayRef tmp = store.allocate(g.edge_count);
        ElementVec v;
        v.reserve(g.edge_count);
        for (std::size_t i = 0; i < g.edge_count; ++i)
            v.push_back(Element{key_of(i), static_cast<std::uint64_t>(i)});
        store.write_range(tmp, 0, v);
        ArrayRef sorted = external_sort(store, tmp, Ordering::ByKey);
        ElementVec out = store.read_range(sorted, 0, sorted.length);
        store.free(tmp);
        store.free(sorted);
        return out;
    };

    auto fill_rows = [&](const ElementVec& ids, auto node_of, auto row_item,
                         std::vector<std::uint64_t>& off, ArrayRef& rows) {
        off.assign(g.node_count + 1, 0);
        for (const auto& e : ids) ++off[node_of(e.priority) + 1];
        for (std::size_t i = 1; i <= g.node_count; ++i) off[i] += off[i - 1];
        rows = store.allocate(g.edge_count);
        ElementVec row;
        row.reserve(g.edge_count);
        for (const auto& e : ids) row.push_back(row_item(e.priority));
        store.write_range(rows, 0, row);
    };

    if (g.edge_count == 0) {
        g.out_off.assign(g.node_count + 1, 0);
        g.in_off.assign(g.node_count + 1, 0);
        return g;
    }

    ElementVec out_ids = sorted_ids(
        [&](std::size_t i) { return (g.edges[i].src << 32) | g.ranks[i]; });
    fill_rows(
        out_ids, [&](std::uint64_t id) { return g.edges[id].src; },
        [&](std::uint64_t id) { return Element{g.edges[id].dst, id}; }, g.out_off, g.out_rows);

    ElementVec in_ids = sorted_ids(
        [&](std::size_t i) { return (g.edges[i].dst << 32) | g.ranks[i]; });
    fill_rows(
        in_ids, [&](std::uint64_t id) { return g.edges[id].dst; },
        [&](std::uint64_t id) { return Element{g.edges[id].src, id}; }, g.in_off, g.in_rows);
    return g;
}

void free_graph(BlockStore& store, Graph& g) {
    if (g.out_rows.length) store.free(g.out_rows);
    if (g.in_rows.length) store.free(g.in_rows);
    g.out_rows = g.in_rows = ArrayRef{};
}

double graph_lambda(const Graph& g) {
    if (g.node_count == 0) return 2.0;
    return std::max<double>(2.0, static_cast<double>(g.edge_count) /
                                     static_cast<double>(g.node_count));
}

namespace {

void check_source(const Graph& g, std::uint64_t source) {
    if (source >= g.node_count) throw std::out_of_range("source node out of range");
}

// Stamps every in-edge (u, w) of the freshly visited node w into the BRT
// under key u with the edge's out-rank as the value.
void stamp_visit(BlockStore& store, const Graph& g, BRT& brt, std::uint64_t w) {
    const std::uint64_t b = g.in_off[w], e = g.in_off[w + 1];
    if (b == e) return;
    ElementVec row = store.read_range(g.in_rows, b, e - b);
    for (const auto& it : row) brt.insert(it.key, g.ranks[it.priority]);
}

}  // namespace

SsspResult sssp(BlockStore& store, const Graph& g, std::uint64_t source,
                const TreapParams& params) {
    check_source(g, source);
    SsspResult res;
    res.dist.assign(g.node_count, UNREACHABLE);
    res.parent.assign(g.node_count, NO_PARENT);

    PriorityQueue pq(store, params, std::max<std::uint64_t>(g.node_count, 2));
    BRT brt(store, params, std::max<std::uint64_t>(g.edge_count, 2));
    pq.update(source, 0);
    while (!pq.is_logically_empty()) {
        const Element top = pq.extract_min();
        const std::uint64_t v = top.key, d = top.priority;
        res.dist[v] = d;
        // Relaxation records into v: the parent is any whose edge closes d.
        for (const Element& rec : brt.extract(v)) {
            const Edge& ed = g.edges[rec.priority];
            if (res.parent[v] == NO_PARENT && res.dist[ed.src] != UNREACHABLE &&
                res.dist[ed.src] + ed.weight == d)
                res.parent[v] = ed.src;
        }
        const std::uint64_t b = g.out_off[v], e = g.out_off[v + 1];
        ElementVec row = b == e ? ElementVec{} : store.read_range(g.out_rows, b, e - b);
        for (const Element& it : row) {
            const std::uint64_t w = it.key, id = it.priority;
            if (w == v) continue;  // self-loop
            store.charge_io(1, 0); // settled-set probe
            if (pq.is_extracted(w)) continue;
            pq.update(w, d + g.edges[id].weight);
            brt.insert(w, id);
        }
    }
    return res;
}

TraversalResult dfs(BlockStore& store, const Graph& g, std::uint64_t source,
                    const TreapParams& params) {
    check_source(g, source);
    TraversalResult res;
    res.order.assign(g.node_count, UNVISITED);
    res.level.assign(g.node_count, UNVISITED);

    BRT brt(store, params, std::max<std::uint64_t>(g.edge_count, 2));
    struct Frame {
        std::uint64_t node;
        std::uint64_t next;  // next out-rank to examine
        std::vector<std::uint64_t> skip;  // sorted stale ranks
    };
    auto merge_stale = [&](Frame& f) {
        for (const Element& rec : brt.extract(f.node)) f.skip.push_back(rec.priority);
        std::sort(f.skip.begin(), f.skip.end());
    };

    std::uint64_t counter = 0;
    std::vector<Frame> stack;
    auto visit = [&](std::uint64_t w, std::uint64_t depth) {
        res.order[w] = counter++;
        res.level[w] = depth;
        stamp_visit(store, g, brt, w);
        Frame f{w, 0, {}};
        merge_stale(f);
        stack.push_back(std::move(f));
    };
    visit(source, 0);
    while (!stack.empty()) {
        Frame& f = stack.back();
        const std::uint64_t deg = g.out_off[f.node + 1] - g.out_off[f.node];
        std::uint64_t target = UNVISITED;
        while (f.next < deg) {
            if (std::binary_search(f.skip.begin(), f.skip.end(), f.next)) {
                ++f.next;
                continue;
            }
            const Element it = store.read_element(g.out_rows, g.out_off[f.node] + f.next);
            ++f.next;
            target = it.key;
            break;
        }
        if (target == UNVISITED) {
            stack.pop_back();
            if (!stack.empty()) merge_stale(stack.back());  // resume
            continue;
        }
        // The stamp protocol should make this impossible; guard regardless.
        if (res.order[target] != UNVISITED) continue;
        visit(target, stack.size());
    }
    return res;
}

TraversalResult bfs(BlockStore& store, const Graph& g, std::uint64_t source,
                    const TreapParams& params) {
    check_source(g, source);
    TraversalResult res;
    res.order.assign(g.node_count, UNVISITED);
    res.level.assign(g.node_count, UNVISITED);

    PriorityQueue pq(store, params, std::max<std::uint64_t>(g.node_count, 2));
    BRT brt(store, params, std::max<std::uint64_t>(g.edge_count, 2));
    std::uint64_t seq = 0, counter = 0;
    pq.update(source, 0);  // priority = (level << 32) | seq
    ++seq;
    while (!pq.is_logically_empty()) {
        const Element top = pq.extract_min();
        const std::uint64_t v = top.key, lvl = top.priority >> 32;
        res.order[v] = counter++;
        res.level[v] = lvl;
        stamp_visit(store, g, brt, v);
        std::vector<std::uint64_t> skip;
        for (const Element& rec : brt.extract(v)) skip.push_back(rec.priority);
        std::sort(skip.begin(), skip.end());
        const std::uint64_t b = g.out_off[v], e = g.out_off[v + 1];
        ElementVec row = b == e ? ElementVec{} : store.read_range(g.out_rows, b, e - b);
        for (std::uint64_t r = 0; r < row.size(); ++r) {
            if (std::binary_search(skip.begin(), skip.end(), r)) continue;
            pq.update(row[r].key, ((lvl + 1) << 32) | seq);
            ++seq;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// In-memory oracles.

namespace {

struct Adjacency {
    std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> out;  // (target, weight)
};

Adjacency make_adj(const EdgeList& input) {
    Adjacency a;
    a.out.resize(input.node_count);
    for (const Edge& e : input.edges) a.out[e.src].push_back({e.dst, e.weight});
    return a;
}

}  // namespace

SsspResult sssp_oracle(const EdgeList& input, std::uint64_t source) {
    const Adjacency adj = make_adj(input);
    SsspResult res;
    res.dist.assign(input.node_count, UNREACHABLE);
    res.parent.assign(input.node_count, NO_PARENT);
    using Entry = std::pair<std::uint64_t, std::uint64_t>;  // (dist, node)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    res.dist[source] = 0;
    heap.push({0, source});
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d != res.dist[v]) continue;
        for (auto [w, wt] : adj.out[v]) {
            if (w == v) continue;
            if (res.dist[w] == UNREACHABLE || d + wt < res.dist[w]) {
                res.dist[w] = d + wt;
                res.parent[w] = v;
                heap.push({d + wt, w});
            }
        }
    }
    return res;
}

TraversalResult dfs_oracle(const EdgeList& input, std::uint64_t source) {
    const Adjacency adj = make_adj(input);
    TraversalResult res;
    res.order.assign(input.node_count, UNVISITED);
    res.level.assign(input.node_count, UNVISITED);
    std::uint64_t counter = 0;
    std::vector<std::pair<std::uint64_t, std::size_t>> stack;  // (node, next edge)
    res.order[source] = counter++;
    res.level[source] = 0;
    stack.push_back({source, 0});
    while (!stack.empty()) {
        auto& [v, next] = stack.back();
        if (next == adj.out[v].size()) {
            stack.pop_back();
            continue;
        }
        const std::uint64_t w = adj.out[v][next++].first;
        if (res.order[w] != UNVISITED) continue;
        res.order[w] = counter++;
        res.level[w] = stack.size();
        stack.push_back({w, 0});
    }
    return res;
}

TraversalResult bfs_oracle(const EdgeList& input, std::uint64_t source) {
    const Adjacency adj = make_adj(input);
    TraversalResult res;
    res.order.assign(input.node_count, UNVISITED);
    res.level.assign(input.node_count, UNVISITED);
    std::uint64_t counter = 0;
    std::queue<std::uint64_t> q;
    res.level[source] = 0;
    q.push(source);
    std::vector<bool> seen(input.node_count, false);
    seen[source] = true;
    while (!q.empty()) {
        const std::uint64_t v = q.front();
        q.pop();
        res.order[v] = counter++;
        for (auto [w, wt] : adj.out[v]) {
            (void)wt;
            if (seen[w]) continue;
            seen[w] = true;
            res.level[w] = res.level[v] + 1;
            q.push(w);
        }
    }
    return res;
}

}  // namespace iopq
