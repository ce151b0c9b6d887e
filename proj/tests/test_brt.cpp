#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "iopq/brt.hpp"

using namespace iopq;

namespace {

using Oracle = std::multimap<std::uint64_t, std::uint64_t>;

std::multiset<std::uint64_t> values_of(const ElementVec& v) {
    std::multiset<std::uint64_t> s;
    for (const auto& e : v) s.insert(e.priority);
    return s;
}

std::multiset<std::uint64_t> values_of(const Oracle& o, std::uint64_t key) {
    std::multiset<std::uint64_t> s;
    auto [lo, hi] = o.equal_range(key);
    for (auto it = lo; it != hi; ++it) s.insert(it->second);
    return s;
}

}  // namespace

TEST_CASE("single item round trip") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    BRT brt(s, TreapParams(1.0, 64.0), 1000);
    brt.insert(5, 77);
    CHECK(brt.count() == 1);
    ElementVec got = brt.extract(5);
    REQUIRE(got.size() == 1);
    CHECK(got[0] == Element{5, 77});
    CHECK(brt.count() == 0);
    CHECK(brt.extract(5).empty());      // second call
    CHECK(brt.extract(12345).empty());  // absent key
}

TEST_CASE("duplicate keys keep multiset semantics") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    BRT brt(s, TreapParams(1.0, 64.0), 1000);
    brt.insert(5, 1);
    brt.insert(9, 3);
    brt.insert(5, 2);
    brt.insert(5, 1);  // repeated value as well
    ElementVec got = brt.extract(5);
    CHECK(got.size() == 3);
    CHECK(values_of(got) == std::multiset<std::uint64_t>{1, 1, 2});
    CHECK(brt.count() == 1);
    CHECK(brt.check_invariants().empty());
}

TEST_CASE("inserts past the first box capacity cascade") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    BRT brt(s, TreapParams(1.0, 4.0), 100000);
    for (std::uint64_t i = 0; i < 100; ++i) brt.insert(i % 7, i);
    CHECK(brt.count() == 100);
    std::size_t live_boxes = 0;
    for (std::size_t i = 0; i < brt.box_count(); ++i)
        if (brt.box_exists(i)) ++live_boxes;
    CHECK(live_boxes >= 2);  // box 0 alone holds at most 2 items
    CHECK(brt.check_invariants().empty());
}

TEST_CASE("random multiset round trip against a multimap oracle") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 3; ++round) {
        BlockStore s = create_store(StoreConfig{64, 65536});
        TreapParams p(round == 1 ? 0.5 : 1.0, round == 2 ? 64.0 : 4.0);
        BRT brt(s, p, 20000);
        Oracle oracle;
        for (int i = 0; i < 5000; ++i) {
            if (rng() % 10 < 8 || oracle.empty()) {
                const std::uint64_t k = rng() % 200;
                const std::uint64_t v = rng();
                brt.insert(k, v);
                oracle.emplace(k, v);
            } else {
                const std::uint64_t k = rng() % 200;
                CHECK(values_of(brt.extract(k)) == values_of(oracle, k));
                oracle.erase(k);
            }
            CHECK(brt.count() == oracle.size());
        }
        auto viol = brt.check_invariants();
        for (auto& v : viol) MESSAGE(v);
        REQUIRE(viol.empty());
        // Drain every remaining key; the residual dump must be empty.
        std::set<std::uint64_t> keys;
        for (auto& [k, v] : oracle) keys.insert(k);
        for (std::uint64_t k : keys) CHECK(values_of(brt.extract(k)) == values_of(oracle, k));
        CHECK(brt.count() == 0);
        CHECK(brt.collect_all().empty());
    }
}

TEST_CASE("extraction collects items spread across several boxes") {
    BlockStore s = create_store(StoreConfig{32, 16384});
    BRT brt(s, TreapParams(1.0, 4.0), 100000);
    // Interleave so copies of key 42 end up in different boxes.
    std::mt19937_64 rng(5);
    std::size_t planted = 0;
    for (int i = 0; i < 2000; ++i) {
        if (i % 100 == 0) {
            brt.insert(42, static_cast<std::uint64_t>(i));
            ++planted;
        }
        brt.insert(1000 + rng() % 5000, rng());
    }
    ElementVec got = brt.extract(42);
    CHECK(got.size() == planted);
    CHECK(brt.check_invariants().empty());
}
