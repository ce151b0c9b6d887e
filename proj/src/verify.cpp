#include "iopq/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "iopq/brt.hpp"
#include "iopq/graph.hpp"
#include "iopq/pq.hpp"
#include "iopq/xtreap.hpp"

namespace iopq::verify {

namespace {

std::string elem_str(const Element& e) {
    return "(" + std::to_string(e.key) + "," + std::to_string(e.priority) + ")";
}

/// Reference queue: represented priorities keyed both ways, extraction from
/// an ordered (priority, key) set, uniform key sampling via a swap-remove
/// pool.
class OraclePq {
public:
    void update(std::uint64_t key, std::uint64_t priority) {
        auto [it, fresh] = rep_.try_emplace(key, priority);
        if (fresh) {
            pos_[key] = pool_.size();
            pool_.push_back(key);
        } else if (priority < it->second) {
            byp_.erase({it->second, key});
            it->second = priority;
        } else {
            return;
        }
        byp_.insert({priority, key});
    }
    Element extract_min() {
        auto [p, k] = *byp_.begin();
        remove(k);
        return Element{k, p};
    }
    void erase(std::uint64_t key) {
        if (rep_.count(key)) remove(key);
    }
    bool empty() const { return rep_.empty(); }
    std::size_t size() const { return rep_.size(); }
    std::uint64_t any_key(std::mt19937_64& rng) const { return pool_[rng() % pool_.size()]; }

private:
    void remove(std::uint64_t key) {
        byp_.erase({rep_.at(key), key});
        rep_.erase(key);
        const std::size_t i = pos_.at(key);
        pos_[pool_.back()] = i;
        std::swap(pool_[i], pool_.back());
        pool_.pop_back();
        pos_.erase(key);
    }

    std::unordered_map<std::uint64_t, std::uint64_t> rep_;
    std::set<std::pair<std::uint64_t, std::uint64_t>> byp_;
    std::vector<std::uint64_t> pool_;
    std::unordered_map<std::uint64_t, std::size_t> pos_;
};

}  // namespace

SuiteResult verify_pq(std::uint64_t seed, std::uint64_t ops) {
    SuiteResult res;
    std::mt19937_64 rng(seed);
    BlockStore store = create_store(StoreConfig{64, 16384});
    PriorityQueue pq(store, TreapParams(1.0, 64.0), ops);
    OraclePq oracle;
    std::uint64_t next_key = 1;
    for (std::uint64_t i = 0; i < ops; ++i) {
        const std::uint64_t roll = rng() % 100;
        if (roll < 45 || oracle.empty()) {
            const std::uint64_t k = next_key++;
            const std::uint64_t p = rng() % 1000000;
            pq.update(k, p);
            oracle.update(k, p);
        } else if (roll < 65) {
            const std::uint64_t k = oracle.any_key(rng);
            const std::uint64_t p = rng() % 1000000;
            pq.update(k, p);
            oracle.update(k, p);
        } else if (roll < 92) {
            const Element got = pq.extract_min();
            const Element want = oracle.extract_min();
            ++res.checks;
            if (!(got == want)) {
                res.fail("op " + std::to_string(i) + ": extract_min " + elem_str(got) +
                         " != oracle " + elem_str(want));
                return res;
            }
        } else {
            const std::uint64_t k = oracle.any_key(rng);
            pq.delete_key(k);
            oracle.erase(k);
        }
    }
    while (!oracle.empty()) {
        const Element got = pq.extract_min();
        const Element want = oracle.extract_min();
        ++res.checks;
        if (!(got == want)) {
            res.fail("drain: extract_min " + elem_str(got) + " != oracle " + elem_str(want));
            return res;
        }
    }
    if (!pq.is_logically_empty()) res.fail("queue not logically empty after drain");
    return res;
}

SuiteResult verify_xtreap(std::uint64_t seed, std::uint64_t ops) {
    SuiteResult res;
    std::mt19937_64 rng(seed);
    BlockStore store = create_store(StoreConfig{64, 16384});
    TreapParams params(1.0, 4.0);
    const double x = 64.0;
    XTreap t(store, params, x, 0, ~std::uint64_t{0});
    const std::size_t max_run =
        static_cast<std::size_t>(params.insert_fraction * x);
    const std::size_t count_limit =
        static_cast<std::size_t>(std::pow(x, 1.0 + params.alpha) / 2.0);
    std::unordered_set<std::uint64_t> extracted;
    std::uint64_t extracted_total = 0;

    auto check = [&](const char* where, std::uint64_t i) {
        auto viol = t.check_invariants();
        ++res.checks;
        for (const auto& v : viol)
            res.fail("op " + std::to_string(i) + " after " + where + ": " + v);
        return viol.empty();
    };

    for (std::uint64_t i = 0; i < ops; ++i) {
        const std::uint64_t roll = rng() % 100;
        const bool full = t.count() + max_run >= count_limit;
        if ((roll < 60 && !full) || t.empty()) {
            const std::size_t n = 1 + rng() % max_run;
            std::map<std::uint64_t, std::uint64_t> batch;
            while (batch.size() < n) {
                const std::uint64_t k = rng();
                if (extracted.count(k)) continue;
                const std::uint64_t p = rng() % 1000000;
                auto [it, fresh] = batch.try_emplace(k, p);
                if (!fresh && p < it->second) it->second = p;
            }
            ElementVec run;
            for (auto [k, p] : batch) run.push_back(Element{k, p});
            t.batched_insert(std::move(run));
            if (!check("batched_insert", i)) return res;
        } else if (roll < 90 || full) {
            ElementVec out = t.batched_extract_min();
            for (const Element& e : out) extracted.insert(e.key);
            extracted_total += out.size();
            if (!check("batched_extract_min", i)) return res;
        } else {
            const auto kind = static_cast<XTreap::BufferKind>(rng() % 3);
            t.flush_up(kind);
            if (!check("flush_up", i)) return res;
        }
    }
    const TreapStats& st = t.stats();
    if (st.inserted != st.extracted + t.count() + st.discarded)
        res.fail("conservation: inserted " + std::to_string(st.inserted) + " != extracted " +
                 std::to_string(st.extracted) + " + count " + std::to_string(t.count()) +
                 " + discarded " + std::to_string(st.discarded));
    if (st.extracted != extracted_total) res.fail("extraction counter drift");
    return res;
}

SuiteResult verify_brt(std::uint64_t seed, std::uint64_t inserts, std::uint64_t distinct_keys) {
    SuiteResult res;
    std::mt19937_64 rng(seed);
    BlockStore store = create_store(StoreConfig{64, 16384});
    BRT brt(store, TreapParams(1.0, 64.0), inserts);
    std::multimap<std::uint64_t, std::uint64_t> oracle;
    for (std::uint64_t i = 0; i < inserts; ++i) {
        const std::uint64_t k = rng() % distinct_keys;
        const std::uint64_t v = rng();
        brt.insert(k, v);
        oracle.emplace(k, v);
    }
    if (brt.count() != oracle.size()) res.fail("count mismatch after inserts");
    for (std::uint64_t k = 0; k < distinct_keys; ++k) {
        ElementVec got = brt.extract(k);
        std::multiset<std::uint64_t> got_vals, want_vals;
        for (const Element& e : got) got_vals.insert(e.priority);
        auto [lo, hi] = oracle.equal_range(k);
        for (auto it = lo; it != hi; ++it) want_vals.insert(it->second);
        ++res.checks;
        if (got_vals != want_vals) {
            res.fail("key " + std::to_string(k) + ": multiset mismatch (" +
                     std::to_string(got_vals.size()) + " vs " + std::to_string(want_vals.size()) +
                     " items)");
            return res;
        }
    }
    if (brt.count() != 0) res.fail("nonzero count after full extraction");
    if (!brt.collect_all().empty()) res.fail("residual dump not empty");
    auto viol = brt.check_invariants();
    for (const auto& v : viol) res.fail("invariant: " + v);
    return res;
}

SuiteResult verify_graphs(std::uint64_t seed, std::size_t graphs, std::uint64_t max_v,
                          std::uint64_t max_e, std::uint64_t max_w) {
    SuiteResult res;
    std::mt19937_64 rng(seed);
    for (std::size_t gi = 0; gi < graphs; ++gi) {
        EdgeList el;
        el.node_count = 1 + rng() % max_v;
        const std::uint64_t e = rng() % (max_e + 1);
        for (std::uint64_t i = 0; i < e; ++i)
            el.edges.push_back(Edge{rng() % el.node_count, rng() % el.node_count,
                                    1 + rng() % max_w});
        const std::uint64_t source = rng() % el.node_count;

        BlockStore store = create_store(StoreConfig{64, 65536});
        Graph g = build_adjacency(store, el);
        TreapParams params(1.0, graph_lambda(g));
        const std::string tag =
            "graph " + std::to_string(gi) + " (V=" + std::to_string(el.node_count) +
            " E=" + std::to_string(e) + " s=" + std::to_string(source) + ")";

        SsspResult sp = sssp(store, g, source, params);
        SsspResult sp_want = sssp_oracle(el, source);
        ++res.checks;
        if (sp.dist != sp_want.dist) res.fail(tag + ": sssp distances differ");
        for (std::uint64_t v = 0; v < g.node_count && res.pass(); ++v) {
            if (v == source || sp.dist[v] == UNREACHABLE) {
                if (sp.parent[v] != NO_PARENT) res.fail(tag + ": spurious parent");
                continue;
            }
            const std::uint64_t u = sp.parent[v];
            bool closes = false;
            if (u != NO_PARENT && sp.dist[u] != UNREACHABLE)
                for (const Edge& ed : el.edges)
                    if (ed.src == u && ed.dst == v && sp.dist[u] + ed.weight == sp.dist[v])
                        closes = true;
            if (!closes) res.fail(tag + ": parent edge does not close the distance");
        }

        TraversalResult d = dfs(store, g, source, params);
        TraversalResult dw = dfs_oracle(el, source);
        ++res.checks;
        if (d.order != dw.order || d.level != dw.level) res.fail(tag + ": dfs differs");

        TraversalResult b = bfs(store, g, source, params);
        TraversalResult bw = bfs_oracle(el, source);
        ++res.checks;
        if (b.order != bw.order || b.level != bw.level) res.fail(tag + ": bfs differs");

        free_graph(store, g);
        if (!res.pass()) return res;
    }
    return res;
}

}  // namespace iopq::verify
