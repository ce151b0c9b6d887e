#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "iopq/xtreap.hpp"

namespace iopq {

/// Chain length for a queue sized for n keys: 1 + ceil(log_{1+a} log2 n),
/// floored so even tiny n get a two-treap chain.
std::size_t pq_treap_count(double alpha, std::uint64_t n);

struct PqStats {
    std::uint64_t updates = 0;
    std::uint64_t extractions = 0;
    std::uint64_t deletions = 0;
    std::uint64_t ghost_discards = 0;   // extracted-key copies filtered out
    std::uint64_t corrective_pulls = 0; // lower-bound-triggered treap drains
};

/// Priority queue with Insert-or-DecreaseKey semantics over a chain of
/// x-treaps D_0..D_m with D_i.x = 2^{(1+alpha)^i}.  A key returned by
/// extract_min (or passed to delete_key) joins the extracted set and may
/// never be updated again; its remaining stored copies are ghosts, filtered
/// on extraction.  Treaps are materialized lazily, so oversized chain tails
/// cost nothing until reached.
class PriorityQueue {
public:
    PriorityQueue(BlockStore& store, const TreapParams& params, std::uint64_t capacity_hint);

    /// Sets the represented priority of `key` to min(previous, priority).
    /// Updating an extracted key is an error.
    void update(std::uint64_t key, std::uint64_t priority);

    /// Removes and returns the element with the smallest represented
    /// priority among non-extracted keys.  Logically empty queue is an error.
    Element extract_min();

    /// Marks the key extracted without returning it; idempotent.
    void delete_key(std::uint64_t key);

    /// True iff every stored element's key is in the extracted set.
    bool is_logically_empty() const { return active_keys_.empty(); }

    /// Read-only extracted-set probe (callers charge I/O as appropriate).
    bool is_extracted(std::uint64_t key) const { return extracted_.count(key) > 0; }

    std::size_t treap_count() const { return xs_.size(); }
    double treap_x(std::size_t i) const { return xs_[i]; }
    bool treap_exists(std::size_t i) const { return static_cast<bool>(treaps_[i]); }
    const XTreap& treap(std::size_t i) const { return *treaps_[i]; }

    /// Live stored copies, ghosts included.
    std::size_t stored_elements() const;
    std::size_t active_keys() const { return active_keys_.size(); }
    std::size_t extracted_keys() const { return extracted_.size(); }
    const PqStats& stats() const { return stats_; }
    const TreapParams& params() const { return params_; }

    /// Per-treap invariant check plus queue-level lower-bound soundness.
    std::vector<std::string> check_invariants() const;

private:
    void ensure_treap(std::size_t i);
    double overflow_trigger(std::size_t i) const;
    void overflow_cascade();
    void push_run(std::size_t i, ElementVec run);
    bool cascade_fill();
    void corrective_pull(std::size_t i);
    void settle_head();
    void note_extracted_bound(std::size_t i, const ElementVec& batch);

    BlockStore* store_;
    TreapParams params_;
    std::vector<double> xs_;
    std::vector<std::optional<XTreap>> treaps_;
    std::vector<std::optional<Element>> bound_;  // L_i: lower bound on D_i's min
    ElementVec head_;                            // in-memory staging above D_0
    std::unordered_set<std::uint64_t> extracted_;
    std::unordered_set<std::uint64_t> active_keys_;
    PqStats stats_;
};

}  // namespace iopq
