#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace iopq {

/// The unit stored by every structure in this library: a 64-bit key
/// identifying the item and a 64-bit priority from a total order.
/// The BRT reuses the same layout with `priority` holding an opaque value.
struct Element {
    std::uint64_t key = 0;
    std::uint64_t priority = 0;

    friend bool operator==(const Element& a, const Element& b) {
        return a.key == b.key && a.priority == b.priority;
    }
};

/// Priority comparisons break ties by ascending key so the order is total.
inline bool priority_less(const Element& a, const Element& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.key < b.key;
}

inline bool key_less(const Element& a, const Element& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.priority < b.priority;
}

enum class Ordering { ByKey, ByPriority };

inline bool element_less(const Element& a, const Element& b, Ordering ord) {
    return ord == Ordering::ByKey ? key_less(a, b) : priority_less(a, b);
}

using ElementVec = std::vector<Element>;

}  // namespace iopq
