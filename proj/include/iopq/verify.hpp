#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iopq::verify {

/// Outcome of one randomized suite run: pass iff no failure was recorded.
struct SuiteResult {
    std::vector<std::string> failures;
    std::uint64_t checks = 0;

    bool pass() const { return failures.empty(); }
    void fail(std::string what) { failures.push_back(std::move(what)); }
};

/// Mixed update/extract_min/delete workload against an in-memory
/// decrease-key heap; extraction sequences must match exactly.
SuiteResult verify_pq(std::uint64_t seed, std::uint64_t ops);

/// Random interface operations on one x-treap with a full invariant check
/// after every operation, plus element conservation at the end.
SuiteResult verify_xtreap(std::uint64_t seed, std::uint64_t ops);

/// `inserts` items over `distinct_keys` keys, then one extract per key:
/// multisets must round-trip exactly and the residual dump must be empty.
SuiteResult verify_brt(std::uint64_t seed, std::uint64_t inserts, std::uint64_t distinct_keys);

/// `graphs` random instances checked against in-memory Dijkstra/DFS/BFS.
SuiteResult verify_graphs(std::uint64_t seed, std::size_t graphs, std::uint64_t max_v,
                          std::uint64_t max_e, std::uint64_t max_w);

}  // namespace iopq::verify
