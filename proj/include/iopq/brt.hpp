#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "iopq/xtreap.hpp"

namespace iopq {

namespace detail {
class BoxNode;
struct BoxSizer;
}  // namespace detail

/// Buffered repository tree: a chain of x-boxes of doubly increasing size
/// storing a key multiset of (key, value) items.  Supports insert and
/// remove-all-by-key.  Items reuse Element with the priority field carrying
/// the opaque value.
class BRT {
public:
    BRT(BlockStore& store, const TreapParams& params, std::uint64_t capacity_hint);
    ~BRT();
    BRT(BRT&&) noexcept;
    BRT& operator=(BRT&&) noexcept;

    void insert(std::uint64_t key, std::uint64_t value);

    /// Removes and returns every stored item with the key, in no particular
    /// value order.
    ElementVec extract(std::uint64_t key);

    std::size_t count() const { return count_; }
    std::size_t box_count() const { return xs_.size(); }
    bool box_exists(std::size_t i) const;
    double box_x(std::size_t i) const { return xs_[i]; }

    /// All stored items, via uncounted reads.
    ElementVec collect_all() const;

    /// Sortedness, tiling, and occupancy checks on every box.
    std::vector<std::string> check_invariants() const;

private:
    void ensure_box(std::size_t i);
    void cascade();

    BlockStore* store_;
    TreapParams params_;
    std::vector<double> xs_;
    std::vector<std::unique_ptr<detail::BoxNode>> boxes_;
    std::vector<ArrayRef> arenas_;
    std::unique_ptr<detail::BoxSizer> sizer_;
    std::size_t count_ = 0;
};

}  // namespace iopq
