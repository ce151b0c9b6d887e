#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iopq/block_store.hpp"
#include "iopq/element.hpp"

namespace iopq {

/// Tunables of the recursive structure.  `epsilon` is derived as
/// alpha/(1+alpha) and kept in sync by the constructor.
struct TreapParams {
    double alpha = 1.0;             // buffer-size exponent, in (0,1]
    double lambda = 64.0;           // recursion-depth parameter, in [2, N]
    double base_coeff = 1.0;        // c': base-case threshold coefficient
    double insert_fraction = 1.0 / 3.0;   // c for Batched-Insert, (0,1/3]
    double extract_fraction = 1.0 / 4.0;  // c for Batched-ExtractMin, (0,1/4]
    double epsilon = 0.5;           // alpha/(1+alpha)

    TreapParams() = default;
    TreapParams(double alpha_, double lambda_);

    void validate() const;

    /// Below this x the structure degenerates to a flat array.  The floor of
    /// 16 guarantees a treap always has room for at least one subtreap per
    /// level.
    double base_threshold() const {
        return std::max(base_coeff * std::pow(lambda, 1.0 / (1.0 + alpha)), 16.0);
    }
};

/// Maximum number of elements an x-treap can contain:
/// ceil(x) + ceil((5/4) x^{1+a/2}) + ceil((5/4) x^{1+a}).
std::uint64_t capacity(double x, double alpha);

/// Levels of the recursive structure: L(x) = 3 + 2 L(x^{1/2}) with
/// L(x) = 1 for x <= lambda^{1/(1+alpha)}.
int level_count(double x, double lambda, double alpha);

/// A buffer split in the middle into a key-sorted, left-justified front half
/// and rear half.  `half` is the physical capacity of each half; `logical`
/// the nominal |b| the structure's formulas refer to.
struct Buffer {
    ArrayRef region;
    std::size_t half = 0;
    std::uint64_t logical = 0;
    std::size_t front_n = 0;
    std::size_t rear_n = 0;

    std::size_t total() const { return front_n + rear_n; }
};

Buffer make_buffer(BlockStore& store, std::size_t half, std::uint64_t logical);

/// Normalizes a buffer: one element per represented key (minimum priority
/// kept), front/rear partitioned around the front's previous maximum
/// priority.  Returns the number of duplicates discarded.  With
/// `force_rebalance` (used for bottom buffers and the base case, which have
/// no ordering obligation toward buffers below), an overfull rear half
/// spills its smallest priorities into the front half.
std::uint64_t resolve_buffer(BlockStore& store, Buffer& buf, ElementVec extra = {},
                             bool force_rebalance = false);

struct TreapStats {
    std::uint64_t inserted = 0;
    std::uint64_t extracted = 0;
    std::uint64_t discarded = 0;  // duplicates dropped by resolution
};

namespace detail {
class Node;
struct Sizer;
}  // namespace detail

/// The recursive cache-oblivious container: three front/rear buffers, two
/// levels of subtreaps, keys ordered horizontally and priorities vertically.
/// Stores (key, priority) elements; represents each key at its minimum
/// stored priority.  A key extracted once must not be inserted again.
class XTreap {
public:
    XTreap(BlockStore& store, const TreapParams& params, double x,
           std::uint64_t k_min, std::uint64_t k_max);
    ~XTreap();
    XTreap(XTreap&&) noexcept;
    XTreap& operator=(XTreap&&) noexcept;

    /// Builds a treap from a key-sorted temporary array split into a front
    /// and a rear run (every front priority below every rear priority).
    /// Element count must lie in [x/4, x^{1+alpha}/2].
    static XTreap initialize(BlockStore& store, const TreapParams& params, double x,
                             std::uint64_t k_min, std::uint64_t k_max,
                             ElementVec front_run, ElementVec rear_run);

    /// Inserts at most insert_fraction*x key-sorted elements with keys in
    /// range.  Duplicate keys within the run are pre-resolved (minimum
    /// priority wins).
    void batched_insert(ElementVec run);

    /// Removes and returns the at most extract_fraction*x elements with the
    /// smallest represented priorities.  Empty treap yields an empty list.
    ElementVec batched_extract_min();

    /// Drains the largest-priority elements out of the bottom buffer.
    /// Requires the bottom to hold between x^{1+alpha}/2 and x^{1+alpha}
    /// elements; returns a key-sorted run.
    ElementVec flush_down();

    /// Variant for the priority-queue chain: migrates elements toward the
    /// bottom until flush_down's precondition holds, then flushes.
    ElementVec flush_down_for_chain();

    struct SplitResult {
        ElementVec front_run;
        ElementVec rear_run;
        std::uint64_t split_key = 0;  // moved elements have key >= split_key
    };

    /// Moves the key-largest third of the elements out into a front/rear run
    /// pair and shrinks this treap's key range to [k_min, split_key).
    /// Requires count > x^{1+alpha}/2.
    SplitResult split();

    /// Places a key-sorted batch into the bottom front buffer of an empty
    /// treap (the priority-queue refill path).
    void refill(ElementVec run);

    enum class BufferKind { Top, Middle, Bottom };

    /// Restores the front of the given buffer to hold the smallest
    /// represented priorities stored at-or-below it.  No-op on the base
    /// case beyond a resolve.
    void flush_up(BufferKind kind);

    std::size_t count() const;
    bool empty() const { return count() == 0; }
    double x() const { return x_; }
    std::uint64_t k_min() const;
    std::uint64_t k_max() const;
    bool is_base_case() const;
    const TreapParams& params() const { return params_; }
    const TreapStats& stats() const { return *stats_; }

    /// Walks the recursive structure and reports every violated invariant
    /// with a path to the offending buffer.  Uses uncounted reads.
    std::vector<std::string> check_invariants() const;

    /// Text dump, one line per buffer: `path level front=[k:p,...] rear=[...]`.
    void dump(std::ostream& os) const;

    /// All stored elements, via uncounted reads.
    ElementVec collect_all() const;

    detail::Node* root() { return root_.get(); }

private:
    BlockStore* store_;
    TreapParams params_;
    double x_;
    std::unique_ptr<TreapStats> stats_;  // nodes keep a pointer; must not move
    std::unique_ptr<detail::Sizer> sizer_;
    std::unique_ptr<detail::Node> root_;
    ArrayRef arena_;
};

}  // namespace iopq
