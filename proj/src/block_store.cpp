#include "iopq/block_store.hpp"

namespace iopq {

BlockStore::BlockStore(StoreConfig config) : config_(config) {
    if (config_.block_size < 1) throw std::invalid_argument("block_size must be >= 1");
    if (config_.memory_capacity < config_.block_size)
        throw std::invalid_argument("memory_capacity must be >= block_size");
}

BlockStore create_store(const StoreConfig& config) { return BlockStore(config); }

ArrayRef BlockStore::allocate(std::uint64_t length) {
    const std::uint64_t b = config_.block_size;
    ArrayRef ref{next_base_, length};
    const std::uint64_t blocks = (length + b - 1) / b;
    next_base_ += blocks * b;
    allocated_blocks_live_ += blocks;
    return ref;
}

void BlockStore::free(const ArrayRef& ref) {
    const std::uint64_t b = config_.block_size;
    if (ref.length == 0) return;
    const std::uint64_t first = ref.base / b;
    const std::uint64_t last = (ref.base + ref.length - 1) / b;
    for (std::uint64_t id = first; id <= last; ++id) {
        auto res = resident_.find(id);
        if (res != resident_.end()) {
            lru_.erase(res->second.pos);
            resident_.erase(res);
        }
        blocks_.erase(id);
    }
    const std::uint64_t blocks = (ref.length + b - 1) / b;
    allocated_blocks_live_ -= std::min<std::uint64_t>(allocated_blocks_live_, blocks);
}

std::uint64_t BlockStore::block_of(const ArrayRef& ref, std::uint64_t index) const {
    if (index >= ref.length) throw std::out_of_range("element index out of range");
    return (ref.base + index) / config_.block_size;
}

std::vector<Element>& BlockStore::materialize(std::uint64_t block_id) {
    auto [it, inserted] = blocks_.try_emplace(block_id);
    if (inserted) {
        it->second.assign(config_.block_size, Element{});
        high_water_materialized_ = std::max<std::uint64_t>(high_water_materialized_, blocks_.size());
    }
    return it->second;
}

void BlockStore::evict_one() {
    const std::uint64_t victim = lru_.back();
    lru_.pop_back();
    auto it = resident_.find(victim);
    if (it->second.dirty) counters_.writes++;
    resident_.erase(it);
}

void BlockStore::touch(std::uint64_t block_id, bool dirty) {
    auto it = resident_.find(block_id);
    if (it != resident_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.pos);
        it->second.dirty = it->second.dirty || dirty;
        return;
    }
    if (lru_.size() >= config_.cache_slots()) evict_one();
    // Faulting in a never-written block transfers nothing; a materialized
    // block costs one read.
    if (blocks_.count(block_id)) counters_.reads++;
    lru_.push_front(block_id);
    resident_.emplace(block_id, Residency{lru_.begin(), dirty});
}

Element BlockStore::read_element(const ArrayRef& ref, std::uint64_t index) {
    const std::uint64_t id = block_of(ref, index);
    touch(id, false);
    const auto& blk = materialize(id);
    return blk[(ref.base + index) % config_.block_size];
}

void BlockStore::write_element(const ArrayRef& ref, std::uint64_t index, const Element& value) {
    const std::uint64_t id = block_of(ref, index);
    touch(id, true);
    auto& blk = materialize(id);
    blk[(ref.base + index) % config_.block_size] = value;
}

ElementVec BlockStore::read_range(const ArrayRef& ref, std::uint64_t offset, std::uint64_t count) {
    ElementVec out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(read_element(ref, offset + i));
    return out;
}

void BlockStore::write_range(const ArrayRef& ref, std::uint64_t offset, const ElementVec& values) {
    for (std::uint64_t i = 0; i < values.size(); ++i)
        write_element(ref, offset + i, values[i]);
}

Element BlockStore::peek_element(const ArrayRef& ref, std::uint64_t index) const {
    if (index >= ref.length) throw std::out_of_range("element index out of range");
    const std::uint64_t id = (ref.base + index) / config_.block_size;
    auto it = blocks_.find(id);
    if (it == blocks_.end()) return Element{};
    return it->second[(ref.base + index) % config_.block_size];
}

void BlockStore::charge_io(std::uint64_t reads, std::uint64_t writes) {
    counters_.reads += reads;
    counters_.writes += writes;
}

void BlockStore::flush() {
    while (!lru_.empty()) evict_one();
}

}  // namespace iopq
