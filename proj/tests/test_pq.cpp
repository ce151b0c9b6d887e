#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "iopq/pq.hpp"

using namespace iopq;

namespace {

// Reference queue: min-per-key map with decrease-key and delete.
struct OracleQueue {
    std::map<std::uint64_t, std::uint64_t> live;  // key -> priority

    void update(std::uint64_t k, std::uint64_t p) {
        auto it = live.find(k);
        if (it == live.end())
            live[k] = p;
        else
            it->second = std::min(it->second, p);
    }
    bool empty() const { return live.empty(); }
    Element extract_min() {
        auto best = live.begin();
        for (auto it = live.begin(); it != live.end(); ++it)
            if (priority_less(Element{it->first, it->second}, Element{best->first, best->second}))
                best = it;
        Element e{best->first, best->second};
        live.erase(best);
        return e;
    }
    void delete_key(std::uint64_t k) { live.erase(k); }
};

}  // namespace

TEST_CASE("treap chain sizing") {
    CHECK(pq_treap_count(1.0, 2) == 2);
    CHECK(pq_treap_count(1.0, 1u << 18) == 6);
    // x values are doubly increasing: x_{i+1} = x_i^{1+alpha}.
    BlockStore s = create_store(StoreConfig{64, 65536});
    PriorityQueue pq(s, TreapParams(1.0, 64.0), 1u << 18);
    for (std::size_t i = 0; i + 1 < pq.treap_count(); ++i)
        CHECK(pq.treap_x(i + 1) == doctest::Approx(std::pow(pq.treap_x(i), 2.0)));
    CHECK(pq.treap_x(0) == 2.0);
}

TEST_CASE("singleton round trip and emptiness") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
    CHECK(pq.is_logically_empty());
    pq.update(7, 42);
    CHECK_FALSE(pq.is_logically_empty());
    CHECK(pq.extract_min() == Element{7, 42});
    CHECK(pq.is_logically_empty());
    CHECK_THROWS_AS(pq.extract_min(), std::out_of_range);
}

TEST_CASE("update is insert-or-decrease-key") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    {
        PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
        pq.update(7, 42);
        pq.update(7, 10);
        CHECK(pq.extract_min() == Element{7, 10});
    }
    {
        PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
        pq.update(7, 42);
        pq.update(7, 50);  // stale increase never surfaces
        CHECK(pq.extract_min() == Element{7, 42});
        CHECK(pq.is_logically_empty());
    }
}

TEST_CASE("extraction follows global priority order") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
    pq.update(1, 5);
    pq.update(2, 3);
    pq.update(3, 9);
    CHECK(pq.extract_min() == Element{2, 3});
    CHECK(pq.extract_min() == Element{1, 5});
    CHECK(pq.extract_min() == Element{3, 9});
}

TEST_CASE("reinsertion of an extracted key is rejected") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
    pq.update(4, 1);
    CHECK(pq.extract_min() == Element{4, 1});
    CHECK_THROWS_AS(pq.update(4, 9), ContractViolation);
}

TEST_CASE("delete_key makes ghosts") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    {
        PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
        pq.update(9, 1);
        pq.delete_key(9);
        CHECK(pq.is_logically_empty());
        CHECK_THROWS_AS(pq.extract_min(), std::out_of_range);
    }
    {
        PriorityQueue pq(s, TreapParams(1.0, 64.0), 1000);
        pq.delete_key(123);  // absent key: harmless
        pq.update(1, 1);
        pq.update(2, 2);
        pq.delete_key(1);
        CHECK(pq.extract_min() == Element{2, 2});
        CHECK(pq.is_logically_empty());
    }
}

TEST_CASE("random workloads match the decrease-key oracle") {
    std::mt19937_64 rng(101);
    for (int round = 0; round < 4; ++round) {
        BlockStore s = create_store(StoreConfig{32, 16384});
        TreapParams p(round % 2 ? 0.5 : 1.0, round < 2 ? 4.0 : 64.0);
        PriorityQueue pq(s, p, 20000);
        OracleQueue oracle;
        std::set<std::uint64_t> gone;
        std::uint64_t next_key = 1;
        for (int op = 0; op < 4000; ++op) {
            const int r = static_cast<int>(rng() % 10);
            if (r < 6) {
                // Update: fresh key or decrease/stale-bump an existing one.
                std::uint64_t k;
                if (!oracle.live.empty() && rng() % 3 == 0) {
                    auto it = oracle.live.begin();
                    std::advance(it, static_cast<long>(rng() % oracle.live.size()));
                    k = it->first;
                } else {
                    k = next_key++;
                }
                const std::uint64_t pr = rng() % 1000000;
                pq.update(k, pr);
                oracle.update(k, pr);
            } else if (r < 9) {
                CHECK(pq.is_logically_empty() == oracle.empty());
                if (oracle.empty()) continue;
                const Element got = pq.extract_min();
                const Element want = oracle.extract_min();
                REQUIRE(got == want);
                gone.insert(got.key);
            } else if (!oracle.live.empty()) {
                auto it = oracle.live.begin();
                std::advance(it, static_cast<long>(rng() % oracle.live.size()));
                pq.delete_key(it->first);
                oracle.delete_key(it->first);
            }
            if (op % 500 == 0) {
                auto viol = pq.check_invariants();
                for (auto& v : viol) MESSAGE(v);
                REQUIRE(viol.empty());
            }
        }
        // Drain both completely; sequences must agree throughout.
        while (!oracle.empty()) {
            REQUIRE(pq.extract_min() == oracle.extract_min());
        }
        CHECK(pq.is_logically_empty());
        auto viol = pq.check_invariants();
        REQUIRE(viol.empty());
    }
}

TEST_CASE("no key is returned twice and ghosts stay bounded") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    TreapParams p(1.0, 4.0);
    PriorityQueue pq(s, p, 4000);
    OracleQueue oracle;
    std::mt19937_64 rng(7);
    std::set<std::uint64_t> returned;
    // Decrease-heavy workload to breed ghosts.
    for (std::uint64_t k = 1; k <= 600; ++k) {
        const std::uint64_t pr = 1000 + rng() % 1000000;
        pq.update(k, pr);
        oracle.update(k, pr);
    }
    for (int i = 0; i < 3000; ++i) {
        const std::uint64_t k = 1 + rng() % 600;
        if (!oracle.live.count(k)) continue;
        const std::uint64_t pr = rng() % 1000000;
        pq.update(k, pr);
        oracle.update(k, pr);
        if (i % 5 == 0) {
            const Element got = pq.extract_min();
            CHECK(got == oracle.extract_min());
            CHECK(returned.insert(got.key).second);  // never twice
        }
    }
    while (!oracle.empty()) {
        const Element got = pq.extract_min();
        CHECK(got == oracle.extract_min());
        CHECK(returned.insert(got.key).second);
    }
    // Everything still stored is a ghost of an extracted key.
    CHECK(pq.is_logically_empty());
    std::size_t bound = 0;
    for (std::size_t i = 0; i < pq.treap_count(); ++i)
        if (pq.treap_exists(i))
            bound += static_cast<std::size_t>(
                level_count(pq.treap_x(i), pq.params().lambda, pq.params().alpha));
    CHECK(pq.stats().ghost_discards <= pq.extracted_keys() * std::max<std::size_t>(bound, 1));
}
