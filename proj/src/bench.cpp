#include "iopq/bench.hpp"

#include <chrono>
#include <random>
#include <sstream>
#include <stdexcept>

#include "iopq/brt.hpp"
#include "iopq/pq.hpp"

namespace iopq::bench {

const char* BenchRecord::csv_header() {
    return "structure,workload,n,block_size,memory_size,lambda,alpha,"
           "updates,extractions,deletions,reads,writes,"
           "reads_per_update,reads_per_extract,wall_seconds";
}

std::string BenchRecord::csv_row() const {
    std::ostringstream os;
    os << structure << ',' << workload << ',' << n << ',' << block_size << ',' << memory_size
       << ',' << lambda << ',' << alpha << ',' << updates << ',' << extractions << ','
       << deletions << ',' << reads << ',' << writes << ',' << reads_per_update() << ','
       << reads_per_extract() << ',' << wall_seconds;
    return os.str();
}

Workload parse_workload(const std::string& name) {
    if (name == "insert-heavy") return Workload::InsertHeavy;
    if (name == "mixed") return Workload::Mixed;
    if (name == "sawtooth") return Workload::Sawtooth;
    if (name == "decrease-heavy") return Workload::DecreaseHeavy;
    throw std::invalid_argument("unknown workload: " + name);
}

const char* workload_name(Workload w) {
    switch (w) {
        case Workload::InsertHeavy: return "insert-heavy";
        case Workload::Mixed: return "mixed";
        case Workload::Sawtooth: return "sawtooth";
        case Workload::DecreaseHeavy: return "decrease-heavy";
    }
    return "?";
}

namespace {

using clock_type = std::chrono::steady_clock;

struct Meter {
    BlockStore& store;
    BenchRecord& rec;

    template <class F>
    auto update_op(F&& f) {
        const IoCounters before = store.snapshot_counters();
        ++rec.updates;
        auto r = f();
        rec.update_reads += store.snapshot_counters().reads - before.reads;
        return r;
    }
    template <class F>
    auto extract_op(F&& f) {
        const IoCounters before = store.snapshot_counters();
        ++rec.extractions;
        auto r = f();
        rec.extract_reads += store.snapshot_counters().reads - before.reads;
        return r;
    }
};

BenchRecord make_record(const char* structure, const StoreConfig& config, double alpha,
                        double lambda, Workload w, std::uint64_t n) {
    BenchRecord rec;
    rec.structure = structure;
    rec.workload = workload_name(w);
    rec.n = n;
    rec.block_size = config.block_size;
    rec.memory_size = config.memory_capacity;
    rec.lambda = lambda;
    rec.alpha = alpha;
    return rec;
}

}  // namespace

BenchRecord run_pq_workload(const StoreConfig& config, double alpha, double lambda, Workload w,
                            std::uint64_t n, std::uint64_t seed) {
    BenchRecord rec = make_record("pq", config, alpha, lambda, w, n);
    BlockStore store = create_store(config);
    TreapParams params(alpha, lambda);
    PriorityQueue pq(store, params, n);
    Meter m{store, rec};
    std::mt19937_64 rng(seed);
    std::uint64_t next_key = 1;
    const auto t0 = clock_type::now();

    auto fresh_update = [&] {
        const std::uint64_t k = next_key++;
        m.update_op([&] {
            pq.update(k, rng() % (1u << 30));
            return 0;
        });
    };
    auto drain_one = [&] {
        m.extract_op([&] { return pq.extract_min(); });
    };
    switch (w) {
        case Workload::InsertHeavy: {
            for (std::uint64_t i = 0; i < n; ++i) fresh_update();
            for (std::uint64_t i = 0; i < n / 16 && !pq.is_logically_empty(); ++i) drain_one();
            break;
        }
        case Workload::Mixed: {
            for (std::uint64_t i = 0; i < n; ++i) {
                if (rng() % 3 != 0 || pq.is_logically_empty())
                    fresh_update();
                else
                    drain_one();
            }
            break;
        }
        case Workload::Sawtooth: {
            const std::uint64_t cycle = std::max<std::uint64_t>(1, n / 8);
            std::uint64_t done = 0;
            while (done < n) {
                const std::uint64_t fill = std::min(cycle, n - done);
                for (std::uint64_t i = 0; i < fill; ++i) fresh_update();
                done += fill;
                while (!pq.is_logically_empty()) drain_one();
            }
            break;
        }
        case Workload::DecreaseHeavy: {
            const std::uint64_t keys = std::max<std::uint64_t>(1, n / 16);
            for (std::uint64_t i = 0; i < n; ++i) {
                const std::uint64_t k = 1 + rng() % keys;
                // Priorities fall over time so most updates are decreases.
                const std::uint64_t p = (n - i) * 4 + rng() % 4;
                m.update_op([&] {
                    pq.update(k, p);
                    return 0;
                });
            }
            while (!pq.is_logically_empty()) drain_one();
            break;
        }
    }
    rec.deletions = pq.stats().deletions;
    const IoCounters c = store.snapshot_counters();
    rec.reads = c.reads;
    rec.writes = c.writes;
    rec.wall_seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    return rec;
}

BenchRecord run_brt_workload(const StoreConfig& config, double alpha, double lambda, Workload w,
                             std::uint64_t n, std::uint64_t seed) {
    BenchRecord rec = make_record("brt", config, alpha, lambda, w, n);
    BlockStore store = create_store(config);
    TreapParams params(alpha, lambda);
    BRT brt(store, params, n);
    Meter m{store, rec};
    std::mt19937_64 rng(seed);
    const std::uint64_t key_space = std::max<std::uint64_t>(1, n / 8);
    const auto t0 = clock_type::now();

    auto insert_one = [&](std::uint64_t k) {
        m.update_op([&] {
            brt.insert(k, rng());
            return 0;
        });
    };
    auto extract_key = [&](std::uint64_t k) {
        m.extract_op([&] { return brt.extract(k); });
    };
    switch (w) {
        case Workload::InsertHeavy: {
            for (std::uint64_t i = 0; i < n; ++i) insert_one(rng() % key_space);
            for (std::uint64_t i = 0; i < n / 16; ++i) extract_key(rng() % key_space);
            break;
        }
        case Workload::Mixed: {
            for (std::uint64_t i = 0; i < n; ++i) {
                if (rng() % 3 != 0 || brt.count() == 0)
                    insert_one(rng() % key_space);
                else
                    extract_key(rng() % key_space);
            }
            break;
        }
        case Workload::Sawtooth: {
            const std::uint64_t cycle = std::max<std::uint64_t>(1, n / 8);
            std::uint64_t done = 0;
            while (done < n) {
                const std::uint64_t fill = std::min(cycle, n - done);
                for (std::uint64_t i = 0; i < fill; ++i) insert_one(rng() % key_space);
                done += fill;
                for (std::uint64_t k = 0; k < key_space && brt.count() > 0; ++k) extract_key(k);
            }
            break;
        }
        case Workload::DecreaseHeavy: {
            // Duplicate-heavy for a multiset: few keys, many values each.
            const std::uint64_t keys = std::max<std::uint64_t>(1, n / 64);
            for (std::uint64_t i = 0; i < n; ++i) insert_one(rng() % keys);
            for (std::uint64_t k = 0; k < keys; ++k) extract_key(k);
            break;
        }
    }
    const IoCounters c = store.snapshot_counters();
    rec.reads = c.reads;
    rec.writes = c.writes;
    rec.wall_seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
    return rec;
}

}  // namespace iopq::bench
