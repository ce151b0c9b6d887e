#include "iopq/external_ops.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace iopq {

namespace {

struct MergeCursor {
    ArrayRef run;
    std::uint64_t pos = 0;
    std::size_t order = 0;  // input run index, for stability
    Element head;
};

ArrayRef merge_runs(BlockStore& store, const std::vector<ArrayRef>& runs, Ordering ord,
                    bool check_sorted) {
    std::uint64_t total = 0;
    for (const auto& r : runs) total += r.length;
    ArrayRef out = store.allocate(total);

    auto greater = [ord](const MergeCursor& a, const MergeCursor& b) {
        if (element_less(a.head, b.head, ord)) return false;
        if (element_less(b.head, a.head, ord)) return true;
        if (a.order != b.order) return a.order > b.order;
        return a.pos > b.pos;
    };
    std::vector<MergeCursor> heap;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].length == 0) continue;
        heap.push_back(MergeCursor{runs[i], 0, i, store.read_element(runs[i], 0)});
    }
    std::make_heap(heap.begin(), heap.end(), greater);

    std::uint64_t written = 0;
    while (!heap.empty()) {
        std::pop_heap(heap.begin(), heap.end(), greater);
        MergeCursor cur = heap.back();
        heap.pop_back();
        store.write_element(out, written++, cur.head);
        if (++cur.pos < cur.run.length) {
            Element next = store.read_element(cur.run, cur.pos);
            if (check_sorted && element_less(next, cur.head, ord))
                throw ContractViolation("kway_merge: input run not sorted");
            cur.head = next;
            heap.push_back(cur);
            std::push_heap(heap.begin(), heap.end(), greater);
        }
    }
    return out;
}

}  // namespace

ArrayRef external_sort(BlockStore& store, const ArrayRef& array, Ordering ordering) {
    const std::uint64_t m = store.config().memory_capacity;
    const std::uint64_t b = store.config().block_size;
    const std::uint64_t n = array.length;

    // Run formation: memory-sized chunks sorted in cache.
    std::vector<ArrayRef> runs;
    for (std::uint64_t off = 0; off < n; off += m) {
        const std::uint64_t len = std::min(m, n - off);
        ElementVec buf = store.read_range(array, off, len);
        std::stable_sort(buf.begin(), buf.end(), [ordering](const Element& a, const Element& b) {
            return element_less(a, b, ordering);
        });
        ArrayRef run = store.allocate(len);
        store.write_range(run, 0, buf);
        runs.push_back(run);
    }
    if (runs.empty()) return store.allocate(0);

    const std::size_t fanout = std::max<std::size_t>(2, m / b > 1 ? m / b - 1 : 2);
    while (runs.size() > 1) {
        std::vector<ArrayRef> next;
        for (std::size_t i = 0; i < runs.size(); i += fanout) {
            std::vector<ArrayRef> group(runs.begin() + i,
                                        runs.begin() + std::min(runs.size(), i + fanout));
            ArrayRef merged = merge_runs(store, group, ordering, false);
            for (const auto& r : group) store.free(r);
            next.push_back(merged);
        }
        runs = std::move(next);
    }
    return runs.front();
}

ArrayRef kway_merge(BlockStore& store, const std::vector<ArrayRef>& runs, Ordering ordering) {
    return merge_runs(store, runs, ordering, true);
}

namespace {

// Deterministic median-of-medians on an in-memory scratch copy, charging a
// scan per recursion level.
Element select_scratch(BlockStore& store, ElementVec v, std::uint64_t rank, Ordering ord) {
    const std::uint64_t b = store.config().block_size;
    auto less = [ord](const Element& x, const Element& y) { return element_less(x, y, ord); };
    while (true) {
        store.charge_io((v.size() + b - 1) / b, 0);
        if (v.size() <= std::max<std::uint64_t>(b, 32)) {
            std::sort(v.begin(), v.end(), less);
            return v[rank - 1];
        }
        // Median of each block-sized chunk.
        ElementVec medians;
        for (std::size_t off = 0; off < v.size(); off += b) {
            std::size_t len = std::min<std::size_t>(b, v.size() - off);
            std::sort(v.begin() + off, v.begin() + off + len, less);
            medians.push_back(v[off + len / 2]);
        }
        const std::uint64_t mid = (medians.size() + 1) / 2;
        Element pivot = select_scratch(store, std::move(medians), mid, ord);
        ElementVec lo, eq, hi;
        for (const auto& e : v) {
            if (less(e, pivot)) lo.push_back(e);
            else if (less(pivot, e)) hi.push_back(e);
            else eq.push_back(e);
        }
        if (rank <= lo.size()) {
            v = std::move(lo);
        } else if (rank <= lo.size() + eq.size()) {
            return pivot;
        } else {
            rank -= lo.size() + eq.size();
            v = std::move(hi);
        }
    }
}

}  // namespace

Element external_select(BlockStore& store, const ArrayRef& array, std::uint64_t rank,
                        Ordering ordering) {
    if (rank < 1 || rank > array.length) throw std::out_of_range("external_select: rank");
    ElementVec scratch = store.read_range(array, 0, array.length);
    return select_scratch(store, std::move(scratch), rank, ordering);
}

}  // namespace iopq
