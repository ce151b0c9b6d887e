#pragma once

#include "iopq/block_store.hpp"
#include "iopq/element.hpp"

namespace iopq {

/// Stable multiway-merge sort: forms memory-sized runs, then merges them
/// (M/B)-way.  Returns a freshly allocated array; the input is untouched.
ArrayRef external_sort(BlockStore& store, const ArrayRef& array, Ordering ordering);

/// Merges already-sorted runs into one sorted run, stable across runs in
/// list order.  Unsorted inputs are a contract violation (checked in debug
/// builds).
ArrayRef kway_merge(BlockStore& store, const std::vector<ArrayRef>& runs, Ordering ordering);

/// Deterministic median-of-medians selection over block-sized chunks of a
/// scratch copy; the source array is not reordered.  `rank` is 1-based.
Element external_select(BlockStore& store, const ArrayRef& array, std::uint64_t rank,
                        Ordering ordering);

}  // namespace iopq
