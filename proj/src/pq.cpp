#include "iopq/pq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iopq {

namespace {

// Conservative lower bound below every element of priority >= p.
Element bound_at(std::uint64_t p) { return Element{0, p}; }

}  // namespace

std::size_t pq_treap_count(double alpha, std::uint64_t n) {
    const double lg = std::max(1.0, std::log2(static_cast<double>(std::max<std::uint64_t>(n, 2))));
    const double m = std::log(lg) / std::log(1.0 + alpha);
    return 1 + static_cast<std::size_t>(std::max(1.0, std::ceil(m)));
}

PriorityQueue::PriorityQueue(BlockStore& store, const TreapParams& params,
                             std::uint64_t capacity_hint)
    : store_(&store), params_(params) {
    params_.validate();
    if (capacity_hint < 1) throw std::invalid_argument("capacity_hint must be >= 1");
    const std::size_t m = pq_treap_count(params_.alpha, capacity_hint);
    for (std::size_t i = 0; i < m; ++i)
        xs_.push_back(std::pow(2.0, std::min(62.0, std::pow(1.0 + params_.alpha,
                                                            static_cast<double>(i)))));
    treaps_.resize(m);
    bound_.resize(m);
}

void PriorityQueue::ensure_treap(std::size_t i) {
    if (i >= xs_.size()) {
        // The hint was exceeded; extend the chain.
        xs_.push_back(std::pow(2.0, std::min(62.0, std::pow(1.0 + params_.alpha,
                                                            static_cast<double>(i)))));
        treaps_.resize(xs_.size());
        bound_.resize(xs_.size());
    }
    if (!treaps_[i])
        treaps_[i].emplace(*store_, params_, xs_[i], 0, ~std::uint64_t{0});
}

double PriorityQueue::overflow_trigger(std::size_t i) const {
    return std::pow(xs_[i], 1.0 + params_.alpha);
}

void PriorityQueue::update(std::uint64_t key, std::uint64_t priority) {
    if (extracted_.count(key))
        throw ContractViolation("update: key was already extracted");
    active_keys_.insert(key);
    ++stats_.updates;
    ensure_treap(0);
    treaps_[0]->batched_insert({Element{key, priority}});
    const Element e{key, priority};
    if (!bound_[0] || priority_less(e, *bound_[0])) bound_[0] = e;
    overflow_cascade();
}

void PriorityQueue::overflow_cascade() {
    for (std::size_t i = 0; i < treaps_.size(); ++i) {
        if (!treaps_[i]) continue;
        while (static_cast<double>(treaps_[i]->count()) >= overflow_trigger(i)) {
            ElementVec run = treaps_[i]->flush_down_for_chain();
            if (run.empty()) break;
            push_run(i + 1, std::move(run));
            if (treaps_[i]->empty()) bound_[i].reset();
        }
    }
}

void PriorityQueue::push_run(std::size_t i, ElementVec run) {
    ensure_treap(i);
    XTreap& t = *treaps_[i];
    const Element rmin = *std::min_element(run.begin(), run.end(), priority_less);
    if (!bound_[i] || priority_less(rmin, *bound_[i])) bound_[i] = rmin;
    const std::size_t chunk = std::max<std::size_t>(
        1, static_cast<std::size_t>(params_.insert_fraction * xs_[i]));
    for (std::size_t pos = 0; pos < run.size(); pos += chunk) {
        const std::size_t end = std::min(run.size(), pos + chunk);
        t.batched_insert(ElementVec(run.begin() + static_cast<std::ptrdiff_t>(pos),
                                    run.begin() + static_cast<std::ptrdiff_t>(end)));
    }
}

void PriorityQueue::note_extracted_bound(std::size_t i, const ElementVec& batch) {
    if (treaps_[i]->empty())
        bound_[i].reset();
    else if (!batch.empty())
        bound_[i] = bound_at(batch.back().priority);  // batch is priority-sorted
}

bool PriorityQueue::cascade_fill() {
    std::size_t i = 0;
    for (; i < treaps_.size(); ++i)
        if (treaps_[i] && !treaps_[i]->empty()) break;
    if (i == treaps_.size()) return false;
    while (true) {
        ElementVec batch = treaps_[i]->batched_extract_min();
        note_extracted_bound(i, batch);
        if (batch.empty()) return false;
        if (i == 0) {
            head_.insert(head_.end(), batch.begin(), batch.end());
            return true;
        }
        // The previous treap is empty by choice of i or by the prior round's
        // full drain, so the batch seeds its bottom front.
        bound_[i - 1] = batch.front();
        treaps_[i - 1]->refill(std::move(batch));
        --i;
    }
}

void PriorityQueue::settle_head() {
    // The staging buffer must stay a constant number of blocks; reinsert the
    // largest-priority excess into D_0 and let the overflow cascade move it.
    const std::size_t cap = std::max<std::size_t>(4 * store_->config().block_size, 64);
    if (head_.size() <= cap) return;
    const std::size_t keep = cap / 2;
    std::nth_element(head_.begin(), head_.begin() + static_cast<std::ptrdiff_t>(keep),
                     head_.end(), priority_less);
    ElementVec spill(head_.begin() + static_cast<std::ptrdiff_t>(keep), head_.end());
    head_.resize(keep);
    // One run per key, minimum priority first; ghosts are filtered here
    // rather than at extraction.
    std::sort(spill.begin(), spill.end(), key_less);
    ensure_treap(0);
    for (std::size_t i = 0; i < spill.size(); ++i) {
        const Element e = spill[i];
        if (i > 0 && spill[i - 1].key == e.key) continue;  // min kept by sort order
        if (extracted_.count(e.key)) {
            ++stats_.ghost_discards;
            continue;
        }
        treaps_[0]->batched_insert({e});
        if (!bound_[0] || priority_less(e, *bound_[0])) bound_[0] = e;
        overflow_cascade();
    }
}

void PriorityQueue::corrective_pull(std::size_t i) {
    ElementVec batch = treaps_[i]->batched_extract_min();
    note_extracted_bound(i, batch);
    head_.insert(head_.end(), batch.begin(), batch.end());
    ++stats_.corrective_pulls;
}

Element PriorityQueue::extract_min() {
    while (true) {
        if (head_.empty() && !cascade_fill())
            throw std::out_of_range("extract_min: priority queue is empty");
        auto it = std::min_element(head_.begin(), head_.end(), priority_less);
        const Element c = *it;
        bool pulled = false;
        for (std::size_t i = 0; i < treaps_.size(); ++i) {
            if (!treaps_[i] || treaps_[i]->empty()) continue;
            if (bound_[i] && priority_less(*bound_[i], c)) {
                corrective_pull(i);
                pulled = true;
            }
        }
        if (pulled) {
            settle_head();
            continue;  // the candidate may have changed
        }
        head_.erase(it);
        if (extracted_.count(c.key)) {
            ++stats_.ghost_discards;
            continue;
        }
        extracted_.insert(c.key);
        active_keys_.erase(c.key);
        ++stats_.extractions;
        return c;
    }
}

void PriorityQueue::delete_key(std::uint64_t key) {
    ++stats_.deletions;
    extracted_.insert(key);
    active_keys_.erase(key);
}

std::size_t PriorityQueue::stored_elements() const {
    std::size_t n = head_.size();
    for (const auto& t : treaps_)
        if (t) n += t->count();
    return n;
}

std::vector<std::string> PriorityQueue::check_invariants() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < treaps_.size(); ++i) {
        if (!treaps_[i]) continue;
        for (auto& v : treaps_[i]->check_invariants())
            out.push_back("D" + std::to_string(i) + v);
        if (treaps_[i]->count() > capacity(xs_[i], params_.alpha))
            out.push_back("D" + std::to_string(i) + ": over capacity");
        if (bound_[i] && !treaps_[i]->empty()) {
            ElementVec all = treaps_[i]->collect_all();
            const Element m = *std::min_element(all.begin(), all.end(), priority_less);
            if (priority_less(m, *bound_[i]))
                out.push_back("D" + std::to_string(i) + ": lower bound above true minimum");
        }
    }
    return out;
}

}  // namespace iopq
