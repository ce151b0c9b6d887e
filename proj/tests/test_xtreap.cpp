#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "iopq/xtreap.hpp"

using namespace iopq;

namespace {

ElementVec make_elems(std::initializer_list<std::pair<std::uint64_t, std::uint64_t>> kv) {
    ElementVec v;
    for (auto [k, p] : kv) v.push_back(Element{k, p});
    return v;
}

void put_front(BlockStore& s, Buffer& b, const ElementVec& v) {
    s.write_range(b.region, 0, v);
    b.front_n = v.size();
}

void put_rear(BlockStore& s, Buffer& b, const ElementVec& v) {
    s.write_range(b.region, b.half, v);
    b.rear_n = v.size();
}

constexpr std::uint64_t KEY_LO = 0, KEY_HI = 1ull << 40;

}  // namespace

TEST_CASE("capacity formula") {
    CHECK(capacity(16, 1.0) == 416);
    CHECK(capacity(1, 1.0) == 5);
    CHECK(capacity(16, 1.0) < 512);
}

TEST_CASE("level count recurrence") {
    // lambda = 16, alpha = 1: base threshold 4, so 256 -> 16 -> 4.
    CHECK(level_count(4, 16, 1.0) == 1);
    CHECK(level_count(16, 16, 1.0) == 5);
    CHECK(level_count(256, 16, 1.0) == 13);
    CHECK(level_count(2, 1000, 1.0) == 1);
}

TEST_CASE("resolve separates representatives around the front maximum") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    Buffer b = make_buffer(s, 16, 16);
    put_front(s, b, make_elems({{2, 1}, {5, 9}}));
    put_rear(s, b, make_elems({{2, 7}, {7, 3}}));
    const std::uint64_t discarded = resolve_buffer(s, b);
    CHECK(discarded == 1);  // (2,7) lost to (2,1)
    CHECK(b.front_n == 3);
    CHECK(b.rear_n == 0);
    CHECK(s.read_range(b.region, 0, 3) == make_elems({{2, 1}, {5, 9}, {7, 3}}));
}

TEST_CASE("resolve with an empty front leaves the rear in place") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    Buffer b = make_buffer(s, 16, 16);
    put_rear(s, b, make_elems({{4, 2}, {6, 1}}));
    CHECK(resolve_buffer(s, b) == 0);
    CHECK(b.front_n == 0);
    CHECK(b.rear_n == 2);
}

TEST_CASE("resolve keeps the minimum priority per key") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    Buffer b = make_buffer(s, 16, 16);
    put_front(s, b, make_elems({{1, 5}}));
    put_rear(s, b, make_elems({{1, 2}}));
    CHECK(resolve_buffer(s, b) == 1);
    CHECK(b.front_n == 1);
    CHECK(s.read_range(b.region, 0, 1) == make_elems({{1, 2}}));
}

TEST_CASE("parameter validation") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    CHECK_THROWS_AS(TreapParams(0.0, 64.0), std::invalid_argument);
    CHECK_THROWS_AS(TreapParams(1.5, 64.0), std::invalid_argument);
    CHECK_THROWS_AS(TreapParams(1.0, 1.0), std::invalid_argument);
    TreapParams p(1.0, 64.0);
    CHECK(p.epsilon == doctest::Approx(0.5));
    CHECK_THROWS_AS(XTreap(s, p, 16.0, 5, 5), std::invalid_argument);
}

TEST_CASE("base case handles a tiny treap") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    TreapParams p(1.0, 64.0);  // threshold 16
    XTreap t(s, p, 8.0, KEY_LO, KEY_HI);
    CHECK(t.is_base_case());
    t.batched_insert(make_elems({{3, 30}}));
    t.batched_insert(make_elems({{1, 10}}));
    t.batched_insert(make_elems({{2, 20}}));
    CHECK(t.count() == 3);
    CHECK(t.check_invariants().empty());
    ElementVec out = t.batched_extract_min();
    CHECK(out.size() == 3);
    CHECK(out.front() == Element{1, 10});
    CHECK(t.empty());
}

TEST_CASE("insert contract violations") {
    BlockStore s = create_store(StoreConfig{16, 4096});
    TreapParams p(1.0, 64.0);
    XTreap t(s, p, 64.0, 100, 200);
    CHECK_THROWS_AS(t.batched_insert(make_elems({{5, 1}})), ContractViolation);   // out of range
    CHECK_THROWS_AS(t.batched_insert(make_elems({{150, 1}, {120, 2}})), ContractViolation);
    ElementVec big;
    for (std::uint64_t i = 0; i < 64; ++i) big.push_back(Element{100 + i, i});
    CHECK_THROWS_AS(t.batched_insert(big), ContractViolation);  // > x/3
}

TEST_CASE("a pure drain yields non-decreasing priorities") {
    BlockStore s = create_store(StoreConfig{64, 65536});
    TreapParams p(1.0, 4.0);  // threshold 16: x=64 recurses
    XTreap t(s, p, 64.0, KEY_LO, KEY_HI);
    CHECK_FALSE(t.is_base_case());
    std::mt19937_64 rng(5);
    std::set<std::uint64_t> used;
    for (int i = 0; i < 40; ++i) {
        ElementVec run;
        while (run.size() < 10) {
            std::uint64_t k = rng() % (1 << 30);
            if (used.insert(k).second) run.push_back(Element{k, rng() % 1000000});
        }
        std::sort(run.begin(), run.end(), key_less);
        t.batched_insert(run);
    }
    CHECK(t.count() == 400);
    CHECK(t.check_invariants().empty());

    ElementVec drained;
    while (!t.empty()) {
        ElementVec batch = t.batched_extract_min();
        CHECK(!batch.empty());
        CHECK(batch.size() <= 16);  // floor(x/4)
        drained.insert(drained.end(), batch.begin(), batch.end());
        CHECK(t.check_invariants().empty());
    }
    CHECK(drained.size() == 400);
    CHECK(std::is_sorted(drained.begin(), drained.end(), priority_less));
}

TEST_CASE("random operations keep every invariant and match the oracle") {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 3; ++round) {
        BlockStore s = create_store(StoreConfig{32, 32768});
        TreapParams p(round == 1 ? 0.5 : 1.0, round == 2 ? 16.0 : 4.0);
        const double x = round == 0 ? 100.0 : 300.0;
        XTreap t(s, p, x, KEY_LO, KEY_HI);
        std::map<std::uint64_t, std::uint64_t> oracle;  // key -> min priority
        std::set<std::uint64_t> used;
        const std::size_t max_run =
            std::max<std::size_t>(1, static_cast<std::size_t>(p.insert_fraction * x));

        for (int op = 0; op < 400; ++op) {
            if (rng() % 3 != 0 && t.count() + max_run < capacity(x, p.alpha)) {
                ElementVec run;
                const std::size_t n = 1 + rng() % max_run;
                while (run.size() < n) {
                    std::uint64_t k = rng() % (1 << 30);
                    if (used.insert(k).second) run.push_back(Element{k, rng() % 1000000});
                }
                std::sort(run.begin(), run.end(), key_less);
                for (const auto& e : run) oracle[e.key] = e.priority;
                t.batched_insert(run);
            } else {
                ElementVec batch = t.batched_extract_min();
                if (oracle.empty()) {
                    CHECK(batch.empty());
                } else {
                    CHECK(!batch.empty());
                    // Each returned element is a correct representative and no
                    // remaining priority is smaller.
                    std::uint64_t batch_max = 0;
                    for (const auto& e : batch) {
                        REQUIRE(oracle.count(e.key) == 1);
                        CHECK(oracle[e.key] == e.priority);
                        batch_max = std::max(batch_max, e.priority);
                        oracle.erase(e.key);
                    }
                    for (const auto& [k, pr] : oracle) {
                        (void)k;
                        CHECK(pr >= batch_max);
                    }
                }
            }
            auto viol = t.check_invariants();
            if (!viol.empty()) {
                for (const auto& v : viol) MESSAGE(v);
            }
            REQUIRE(viol.empty());
            CHECK(t.count() == oracle.size());
            const TreapStats& st = t.stats();
            CHECK(st.inserted == st.extracted + t.count() + st.discarded);
        }
    }
}

TEST_CASE("updates keep the minimum priority as the representative") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    XTreap t(s, p, 64.0, KEY_LO, KEY_HI);
    t.batched_insert(make_elems({{42, 500}}));
    t.batched_insert(make_elems({{42, 100}}));  // decrease
    t.batched_insert(make_elems({{42, 900}}));  // stale increase, ignored
    CHECK(t.check_invariants().empty());
    ElementVec out = t.batched_extract_min();
    REQUIRE(!out.empty());
    CHECK(out[0] == Element{42, 100});
}

TEST_CASE("initialize validates its input and distributes the runs") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    ElementVec front, rear;
    for (std::uint64_t i = 0; i < 40; ++i) front.push_back(Element{i * 10, i});
    for (std::uint64_t i = 0; i < 40; ++i) rear.push_back(Element{i * 10 + 5, 1000 + i});

    CHECK_THROWS_AS(XTreap::initialize(s, p, 64.0, KEY_LO, KEY_HI, {}, {}), ContractViolation);
    {
        // Front priorities must all sit below rear priorities.
        ElementVec bad_rear = rear;
        bad_rear[0].priority = 0;
        CHECK_THROWS_AS(XTreap::initialize(s, p, 64.0, KEY_LO, KEY_HI, front, bad_rear),
                        ContractViolation);
    }
    XTreap t = XTreap::initialize(s, p, 64.0, KEY_LO, KEY_HI, front, rear);
    CHECK(t.count() == 80);
    auto viol = t.check_invariants();
    for (const auto& v : viol) MESSAGE(v);
    CHECK(viol.empty());

    ElementVec all = t.collect_all();
    CHECK(all.size() == 80);
    ElementVec drained;
    while (!t.empty()) {
        ElementVec b = t.batched_extract_min();
        drained.insert(drained.end(), b.begin(), b.end());
    }
    CHECK(std::is_sorted(drained.begin(), drained.end(), priority_less));
    CHECK(drained.size() == 80);
}

TEST_CASE("flush_down enforces its precondition and drains the largest keys' priorities") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    XTreap t(s, p, 16.0, KEY_LO, KEY_HI);
    t.batched_insert(make_elems({{1, 1}}));
    CHECK_THROWS_AS(t.flush_down(), ContractViolation);  // bottom nearly empty

    // Fill beyond half of x^{1+a} = 256 and flush.
    std::mt19937_64 rng(9);
    std::set<std::uint64_t> used;
    while (t.count() < 200) {
        ElementVec run;
        const std::size_t n = 1 + rng() % 5;
        while (run.size() < n) {
            std::uint64_t k = rng() % (1 << 20);
            if (used.insert(k).second) run.push_back(Element{k, rng() % 100000});
        }
        std::sort(run.begin(), run.end(), key_less);
        t.batched_insert(run);
    }
    const std::size_t before = t.count();
    ElementVec out = t.flush_down_for_chain();
    CHECK(!out.empty());
    CHECK(std::is_sorted(out.begin(), out.end(), key_less));
    CHECK(t.count() + out.size() <= before);
    CHECK(t.check_invariants().empty());
}

TEST_CASE("split moves the key-largest third out and shrinks the range") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    XTreap t(s, p, 16.0, KEY_LO, 1000);
    std::set<std::uint64_t> used;
    std::mt19937_64 rng(13);
    std::map<std::uint64_t, std::uint64_t> oracle;
    while (t.count() < 180) {
        std::uint64_t k = rng() % 1000;
        if (!used.insert(k).second) continue;
        std::uint64_t pr = rng() % 100000;
        oracle[k] = pr;
        t.batched_insert(make_elems({{k, pr}}));
    }
    auto res = t.split();
    CHECK(t.k_max() == res.split_key);
    CHECK(res.front_run.size() + res.rear_run.size() > 0);
    for (const auto& e : res.front_run) CHECK(e.key >= res.split_key);
    for (const auto& e : res.rear_run) CHECK(e.key >= res.split_key);
    if (!res.front_run.empty() && !res.rear_run.empty()) {
        auto fmax = *std::max_element(res.front_run.begin(), res.front_run.end(), priority_less);
        auto rmin = *std::min_element(res.rear_run.begin(), res.rear_run.end(), priority_less);
        CHECK(priority_less(fmax, rmin));
    }
    CHECK(t.check_invariants().empty());

    // Multiset preservation.
    std::map<std::uint64_t, std::uint64_t> seen;
    for (const auto& e : t.collect_all())
        if (!seen.count(e.key) || seen[e.key] > e.priority) seen[e.key] = e.priority;
    for (const auto& e : res.front_run) seen[e.key] = std::min(seen.count(e.key) ? seen[e.key] : ~std::uint64_t{0}, e.priority);
    for (const auto& e : res.rear_run) seen[e.key] = std::min(seen.count(e.key) ? seen[e.key] : ~std::uint64_t{0}, e.priority);
    CHECK(seen == oracle);
}

TEST_CASE("refill places a batch into an empty treap") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    XTreap t(s, p, 64.0, KEY_LO, KEY_HI);
    ElementVec run = make_elems({{10, 7}, {20, 3}, {30, 9}});
    t.refill(run);
    CHECK(t.count() == 3);
    CHECK(t.check_invariants().empty());
    t.batched_insert(make_elems({{15, 1}}));
    ElementVec out = t.batched_extract_min();
    REQUIRE(!out.empty());
    CHECK(out[0] == Element{15, 1});
    t.batched_insert(make_elems({{99, 99}}));  // ensure non-empty
    CHECK_THROWS_AS(t.refill(make_elems({{5, 5}})), ContractViolation);
}

TEST_CASE("debug dump lists one line per buffer") {
    BlockStore s = create_store(StoreConfig{32, 32768});
    TreapParams p(1.0, 4.0);
    XTreap t(s, p, 64.0, KEY_LO, KEY_HI);
    t.batched_insert(make_elems({{7, 70}, {8, 80}}));
    std::ostringstream os;
    t.dump(os);
    const std::string text = os.str();
    CHECK(text.find("/top 1 front=") != std::string::npos);
    CHECK(text.find("7:70") != std::string::npos);
    CHECK(text.find("/bot") != std::string::npos);
    // Every line carries a front= and rear= list.
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        CHECK(line.find("front=[") != std::string::npos);
        CHECK(line.find("rear=[") != std::string::npos);
    }
}
