// Acceptance gate: one line per criterion, exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <set>
#include <vector>

#include "iopq/bench.hpp"
#include "iopq/pq.hpp"
#include "iopq/verify.hpp"
#include "iopq/xtreap.hpp"

using namespace iopq;

namespace {

int failures = 0;

void line(int num, const char* name, bool ok, const std::string& detail) {
    std::cout << "criterion " << num << " (" << name << "): " << (ok ? "pass" : "FAIL");
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << "\n" << std::flush;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// Criteria 1-4: randomized oracle suites at full scale, within time budget.
template <class F>
void oracle_criterion(int num, const char* name, double budget_s, F&& run) {
    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t checks = 0;
    std::vector<std::string> fails;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        verify::SuiteResult r = run(seed);
        checks += r.checks;
        fails.insert(fails.end(), r.failures.begin(), r.failures.end());
    }
    const double wall = seconds_since(t0);
    std::string detail = std::to_string(checks) + " checks, " + fmt(wall) + "s";
    if (!fails.empty()) detail += "; first: " + fails.front();
    line(num, name, fails.empty() && wall < budget_s, detail);
}

void criterion_scan() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t n : {std::uint64_t{1000}, std::uint64_t{100000}}) {
        for (std::size_t b : {std::size_t{16}, std::size_t{64}, std::size_t{256}}) {
            StoreConfig cfg;
            cfg.block_size = b;
            cfg.memory_capacity = std::max<std::size_t>(b * b, 4096);
            BlockStore store = create_store(cfg);
            ArrayRef arr = store.allocate(n);
            ElementVec data(n);
            for (std::uint64_t i = 0; i < n; ++i) data[i] = Element{i, i};
            store.write_range(arr, 0, data);
            store.flush();
            store.reset_counters();
            (void)store.read_range(arr, 0, n);
            const IoCounters c = store.snapshot_counters();
            const std::uint64_t want = (n + b - 1) / b;
            if (c.reads != want || c.writes != 0) {
                ok = false;
                detail = "n=" + std::to_string(n) + " B=" + std::to_string(b) + ": reads=" +
                         std::to_string(c.reads) + " want=" + std::to_string(want) +
                         " writes=" + std::to_string(c.writes);
            }
        }
    }
    line(5, "scan-cost exactness", ok, ok ? "6 configurations exact" : detail);
}

void criterion_update_scaling() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> per_update;
    for (std::size_t b : {std::size_t{32}, std::size_t{64}, std::size_t{128}}) {
        StoreConfig cfg;
        cfg.block_size = b;
        cfg.memory_capacity = 1 << 14;
        bench::BenchRecord rec = bench::run_pq_workload(
            cfg, 1.0, static_cast<double>(cfg.memory_capacity), bench::Workload::Mixed,
            std::uint64_t{1} << 18, 7);
        per_update.push_back(rec.reads_per_update());
    }
    const double wall = seconds_since(t0);
    const bool monotone = per_update[0] >= per_update[1] && per_update[1] >= per_update[2];
    const bool ratio_ok = per_update[2] <= 0.75 * per_update[0];
    line(6, "update-cost scaling", monotone && ratio_ok && wall < 300.0,
         "reads/update B=32:" + fmt(per_update[0]) + " B=64:" + fmt(per_update[1]) +
             " B=128:" + fmt(per_update[2]) + ", " + fmt(wall) + "s");
}

void criterion_extract_asymmetry() {
    StoreConfig cfg;
    cfg.block_size = 64;
    cfg.memory_capacity = 1 << 14;
    bench::BenchRecord rec = bench::run_pq_workload(
        cfg, 1.0, static_cast<double>(cfg.memory_capacity), bench::Workload::DecreaseHeavy,
        std::uint64_t{1} << 18, 7);
    const double u = rec.reads_per_update(), e = rec.reads_per_extract();
    line(7, "extract vs update asymmetry", e >= 2.0 * u,
         "reads/extract=" + fmt(e) + " reads/update=" + fmt(u));
}

// Recurrences restated from their definitions, kept independent of the
// library implementation.
std::uint64_t capacity_recurrence(double x, double a) {
    const double top = std::ceil(x);
    const double mid = std::ceil(1.25 * std::pow(x, 1.0 + a / 2.0));
    const double bot = std::ceil(1.25 * std::pow(x, 1.0 + a));
    return static_cast<std::uint64_t>(top) + static_cast<std::uint64_t>(mid) +
           static_cast<std::uint64_t>(bot);
}

// T(x) = 1 at or below the base threshold, else 3 + 2 T(sqrt x).
int level_count_recurrence(double x, double lambda, double a) {
    auto rec = [&](auto&& self, double v) -> int {
        if (v <= std::pow(lambda, 1.0 / (1.0 + a))) return 1;
        return 3 + 2 * self(self, std::sqrt(v));
    };
    return rec(rec, x);
}

void criterion_formulas() {
    bool ok = true;
    std::string detail;
    int triples = 0;
    for (double a : {0.5, 1.0}) {
        for (double lambda : {4.0, 16.0, 64.0, 256.0, 1024.0}) {
            for (double x : {2.0, 5.0, 16.0, 64.0, 257.0}) {
                ++triples;
                if (capacity(x, a) != capacity_recurrence(x, a) ||
                    level_count(x, lambda, a) != level_count_recurrence(x, lambda, a)) {
                    ok = false;
                    detail = "mismatch at x=" + fmt(x) + " lambda=" + fmt(lambda) +
                             " alpha=" + fmt(a);
                }
            }
        }
    }

    // High-water space of a filled-then-drained queue.
    const std::uint64_t n = std::uint64_t{1} << 16;
    StoreConfig cfg;
    cfg.block_size = 64;
    cfg.memory_capacity = 1 << 14;
    BlockStore store = create_store(cfg);
    TreapParams params(1.0, static_cast<double>(cfg.memory_capacity));
    PriorityQueue pq(store, params, n);
    std::uint64_t x = 88172645463325252ull;
    auto rng = [&] { x ^= x << 13; x ^= x >> 7; x ^= x << 17; return x; };
    for (std::uint64_t k = 1; k <= n; ++k) pq.update(k, rng() % (1u << 30));
    while (!pq.is_logically_empty()) (void)pq.extract_min();
    const double nb = static_cast<double>(n) / static_cast<double>(cfg.block_size);
    const double base = static_cast<double>(cfg.memory_capacity) /
                        static_cast<double>(cfg.block_size);
    const double bound = 8.0 * nb * (std::log(nb) / std::log(base));
    const std::uint64_t hw = store.high_water_materialized_blocks();
    if (static_cast<double>(hw) > bound) {
        ok = false;
        detail = "high-water " + std::to_string(hw) + " blocks > bound " + fmt(bound);
    }
    line(8, "level/space formulas", ok,
         ok ? std::to_string(triples) + " triples exact, high-water " + std::to_string(hw) +
                  " <= " + fmt(bound) + " blocks"
            : detail);
}

void criterion_ghosts() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t u : {std::uint64_t{1}, std::uint64_t{4}, std::uint64_t{16}}) {
        const std::uint64_t n = std::uint64_t{1} << 12;
        const std::uint64_t keys = n / u;
        StoreConfig cfg;
        cfg.block_size = 16;
        cfg.memory_capacity = 256;
        BlockStore store = create_store(cfg);
        TreapParams params(1.0, 64.0);
        PriorityQueue pq(store, params, n);
        std::uint64_t x = 2463534242u + u;
        auto rng = [&] { x ^= x << 13; x ^= x >> 7; x ^= x << 17; return x; };
        for (std::uint64_t round = 0; round < u; ++round)
            for (std::uint64_t k = 1; k <= keys; ++k)
                pq.update(k, (u - round) * 1000000 + rng() % 1000000);
        std::set<std::uint64_t> seen;
        while (!pq.is_logically_empty()) {
            const Element e = pq.extract_min();
            if (!seen.insert(e.key).second) {
                ok = false;
                detail = "u=" + std::to_string(u) + ": key " + std::to_string(e.key) +
                         " returned twice";
            }
        }
        if (seen.size() != keys) {
            ok = false;
            detail = "u=" + std::to_string(u) + ": " + std::to_string(seen.size()) + " of " +
                     std::to_string(keys) + " keys returned";
        }
        int max_levels = 1;
        for (std::size_t i = 0; i < pq.treap_count(); ++i)
            if (pq.treap_exists(i))
                max_levels = std::max(
                    max_levels, level_count(pq.treap_x(i), params.lambda, params.alpha));
        const std::uint64_t bound =
            static_cast<std::uint64_t>(max_levels) * pq.extracted_keys();
        if (pq.stats().ghost_discards > bound) {
            ok = false;
            detail = "u=" + std::to_string(u) + ": " +
                     std::to_string(pq.stats().ghost_discards) + " discards > bound " +
                     std::to_string(bound);
        }
    }
    line(9, "ghost filtering", ok, ok ? "u in {1,4,16}: no repeats, discards bounded" : detail);
}

}  // namespace

int main() {
    oracle_criterion(1, "pq oracle equivalence", 60.0,
                     [](std::uint64_t s) { return verify::verify_pq(s, 100000); });
    oracle_criterion(2, "x-treap invariants", 120.0,
                     [](std::uint64_t s) { return verify::verify_xtreap(s, 10000); });
    oracle_criterion(3, "brt multiset round-trip", 30.0,
                     [](std::uint64_t s) { return verify::verify_brt(s, 100000, 1000); });
    {
        const auto t0 = std::chrono::steady_clock::now();
        verify::SuiteResult r = verify::verify_graphs(7, 200, 2000, 20000, 1000000);
        const double wall = seconds_since(t0);
        std::string detail = std::to_string(r.checks) + " checks, " + fmt(wall) + "s";
        if (!r.pass()) detail += "; first: " + r.failures.front();
        line(4, "graph correctness", r.pass() && wall < 120.0, detail);
    }
    criterion_scan();
    criterion_update_scaling();
    criterion_extract_asymmetry();
    criterion_formulas();
    criterion_ghosts();
    if (failures == 0) {
        std::cout << "all 9 criteria pass\n";
        return 0;
    }
    std::cout << failures << " criteria FAILED\n";
    return 1;
}
