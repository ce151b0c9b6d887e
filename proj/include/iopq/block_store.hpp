#pragma once

#include <cstddef>
#include <cstdint>
#include <list>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "iopq/element.hpp"

namespace iopq {

enum class EvictionPolicy { LRU };

/// B and M of the simulated memory hierarchy, both counted in elements.
struct StoreConfig {
    std::size_t block_size = 64;       // elements per block (B)
    std::size_t memory_capacity = 4096;  // elements resident in cache (M)
    EvictionPolicy policy = EvictionPolicy::LRU;

    std::size_t cache_slots() const { return memory_capacity / block_size; }
    bool tall_cache() const { return memory_capacity >= block_size * block_size; }
};

struct IoCounters {
    std::uint64_t reads = 0;   // block transfers into the cache
    std::uint64_t writes = 0;  // dirty blocks written back out

    friend bool operator==(const IoCounters& a, const IoCounters& b) {
        return a.reads == b.reads && a.writes == b.writes;
    }
};

/// A block-aligned region of a BlockStore's address space.
struct ArrayRef {
    std::uint64_t base = 0;   // element index, multiple of block_size
    std::uint64_t length = 0; // elements

    ArrayRef subrange(std::uint64_t offset, std::uint64_t len) const {
        if (offset + len > length) throw std::out_of_range("ArrayRef::subrange");
        return ArrayRef{base + offset, len};
    }
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Simulated external memory: an unbounded, sparsely materialized address
/// space of elements grouped into blocks of B, fronted by an M-element LRU
/// cache.  Reads and writes of elements fault blocks in and out; the
/// counters record every transfer across the cache boundary.
///
/// Single-threaded.  A store and all ArrayRefs into it move between threads
/// only as a unit.
class BlockStore {
public:
    explicit BlockStore(StoreConfig config);

    const StoreConfig& config() const { return config_; }

    /// Reserves a block-aligned region.  The store's external capacity is
    /// unbounded; allocation never fails.
    ArrayRef allocate(std::uint64_t length);

    /// Releases a region: drops its materialized blocks without write-back.
    void free(const ArrayRef& ref);

    Element read_element(const ArrayRef& ref, std::uint64_t index);
    void write_element(const ArrayRef& ref, std::uint64_t index, const Element& value);

    /// Bulk helpers; cost identical to element-at-a-time access.
    ElementVec read_range(const ArrayRef& ref, std::uint64_t offset, std::uint64_t count);
    void write_range(const ArrayRef& ref, std::uint64_t offset, const ElementVec& values);

    /// Uncounted access for invariant checkers and debug dumps; does not
    /// touch the cache or the counters.
    Element peek_element(const ArrayRef& ref, std::uint64_t index) const;

    /// Charges block transfers directly, for structures (hash tables,
    /// in-memory scratch modelled as external scans) whose cost is
    /// accounted analytically rather than through the cache.
    void charge_io(std::uint64_t reads, std::uint64_t writes);

    /// Writes back every dirty resident block and empties the cache, so the
    /// next accesses start cold.
    void flush();

    IoCounters snapshot_counters() const { return counters_; }
    void reset_counters() { counters_ = IoCounters{}; }

    std::size_t resident_blocks() const { return lru_.size(); }

    // Space accounting.
    std::uint64_t allocated_blocks_live() const { return allocated_blocks_live_; }
    std::uint64_t materialized_blocks_live() const { return blocks_.size(); }
    std::uint64_t high_water_materialized_blocks() const { return high_water_materialized_; }

private:
    std::vector<Element>& materialize(std::uint64_t block_id);
    void touch(std::uint64_t block_id, bool dirty);
    void evict_one();
    std::uint64_t block_of(const ArrayRef& ref, std::uint64_t index) const;

    StoreConfig config_;
    IoCounters counters_;
    std::uint64_t next_base_ = 0;
    std::uint64_t allocated_blocks_live_ = 0;
    std::uint64_t high_water_materialized_ = 0;

    std::unordered_map<std::uint64_t, std::vector<Element>> blocks_;

    // LRU order: front = most recent.
    std::list<std::uint64_t> lru_;
    struct Residency {
        std::list<std::uint64_t>::iterator pos;
        bool dirty = false;
    };
    std::unordered_map<std::uint64_t, Residency> resident_;
};

BlockStore create_store(const StoreConfig& config);

}  // namespace iopq
