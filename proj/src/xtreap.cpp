#include "iopq/xtreap.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <ostream>
#include <sstream>

namespace iopq {

TreapParams::TreapParams(double alpha_, double lambda_) {
    alpha = alpha_;
    lambda = lambda_;
    epsilon = alpha / (1.0 + alpha);
    validate();
}

void TreapParams::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must be in (0,1]");
    if (!(lambda >= 2.0)) throw std::invalid_argument("lambda must be >= 2");
    if (!(base_coeff > 0.0)) throw std::invalid_argument("base_coeff must be positive");
    if (!(insert_fraction > 0.0) || insert_fraction > 1.0 / 3.0)
        throw std::invalid_argument("insert_fraction must be in (0,1/3]");
    if (!(extract_fraction > 0.0) || extract_fraction > 1.0 / 4.0)
        throw std::invalid_argument("extract_fraction must be in (0,1/4]");
}

std::uint64_t capacity(double x, double alpha) {
    auto up = [](double v) { return static_cast<std::uint64_t>(std::ceil(v)); };
    return up(x) + up(1.25 * std::pow(x, 1.0 + alpha / 2.0)) + up(1.25 * std::pow(x, 1.0 + alpha));
}

int level_count(double x, double lambda, double alpha) {
    const double threshold = std::pow(lambda, 1.0 / (1.0 + alpha));
    if (x <= threshold) return 1;
    return 3 + 2 * level_count(std::sqrt(x), lambda, alpha);
}

// ---------------------------------------------------------------------------
// In-memory run helpers.

namespace {

void sort_by_key(ElementVec& v) { std::sort(v.begin(), v.end(), key_less); }
void sort_by_priority(ElementVec& v) { std::sort(v.begin(), v.end(), priority_less); }

// Pre: sorted by key_less (ties broken by priority).  Keeps the
// minimum-priority element of each key; returns how many were dropped.
std::uint64_t dedup_by_key(ElementVec& v) {
    std::uint64_t dropped = 0;
    std::size_t w = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (w > 0 && v[w - 1].key == v[i].key) {
            ++dropped;
        } else {
            v[w++] = v[i];
        }
    }
    v.resize(w);
    return dropped;
}

std::uint64_t merge_dedup(std::vector<ElementVec> runs, ElementVec& out) {
    out.clear();
    for (auto& r : runs) out.insert(out.end(), r.begin(), r.end());
    sort_by_key(out);
    return dedup_by_key(out);
}

// [first, last) positions of keys in [lo, hi) in a key-sorted vector.
std::pair<std::size_t, std::size_t> key_span(const ElementVec& v, std::uint64_t lo,
                                             std::uint64_t hi) {
    auto kcmp = [](const Element& e, std::uint64_t k) { return e.key < k; };
    auto first = std::lower_bound(v.begin(), v.end(), lo, kcmp);
    auto last = std::lower_bound(v.begin(), v.end(), hi, kcmp);
    return {static_cast<std::size_t>(first - v.begin()),
            static_cast<std::size_t>(last - v.begin())};
}

// Removes the n largest-priority elements among the keys in [lo, hi) from the
// two key-sorted halves, returning them key-sorted.
ElementVec remove_largest_in_range(ElementVec& front, ElementVec& rear, std::uint64_t lo,
                                   std::uint64_t hi, std::size_t n) {
    struct Ref {
        int half;
        std::size_t idx;
        Element e;
    };
    std::vector<Ref> refs;
    auto [f0, f1] = key_span(front, lo, hi);
    for (std::size_t i = f0; i < f1; ++i) refs.push_back({0, i, front[i]});
    auto [r0, r1] = key_span(rear, lo, hi);
    for (std::size_t i = r0; i < r1; ++i) refs.push_back({1, i, rear[i]});
    n = std::min(n, refs.size());
    if (n == 0) return {};
    std::nth_element(refs.begin(), refs.begin() + (refs.size() - n), refs.end(),
                     [](const Ref& a, const Ref& b) { return priority_less(a.e, b.e); });
    std::vector<Ref> taken(refs.end() - static_cast<std::ptrdiff_t>(n), refs.end());

    std::vector<std::size_t> del_front, del_rear;
    ElementVec out;
    for (const auto& t : taken) {
        out.push_back(t.e);
        (t.half == 0 ? del_front : del_rear).push_back(t.idx);
    }
    auto erase_at = [](ElementVec& v, std::vector<std::size_t>& idx) {
        std::sort(idx.begin(), idx.end());
        for (auto it = idx.rbegin(); it != idx.rend(); ++it) v.erase(v.begin() + *it);
    };
    erase_at(front, del_front);
    erase_at(rear, del_rear);
    sort_by_key(out);
    return out;
}

// Takes the k smallest-priority elements out of a key-sorted vector,
// preserving key order in both parts.
ElementVec remove_smallest(ElementVec& key_sorted, std::size_t k) {
    k = std::min(k, key_sorted.size());
    if (k == 0) return {};
    ElementVec tmp = key_sorted;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k) - 1, tmp.end(),
                     priority_less);
    const Element bound = tmp[k - 1];
    ElementVec taken, rest;
    for (const auto& e : key_sorted) (!priority_less(bound, e) ? taken : rest).push_back(e);
    key_sorted = std::move(rest);
    return taken;
}

}  // namespace

// ---------------------------------------------------------------------------
// Buffer primitives.

Buffer make_buffer(BlockStore& store, std::size_t half, std::uint64_t logical) {
    Buffer b;
    b.region = store.allocate(2 * half);
    b.half = half;
    b.logical = logical;
    return b;
}

namespace {

Buffer buffer_view(const ArrayRef& region, std::uint64_t offset, std::size_t half,
                   std::uint64_t logical) {
    Buffer b;
    b.region = region.subrange(offset, 2 * half);
    b.half = half;
    b.logical = logical;
    return b;
}

ElementVec load_front(BlockStore& s, const Buffer& b) {
    return s.read_range(b.region, 0, b.front_n);
}
ElementVec load_rear(BlockStore& s, const Buffer& b) {
    return s.read_range(b.region, b.half, b.rear_n);
}

void store_front(BlockStore& s, Buffer& b, const ElementVec& v) {
    if (v.size() > b.half) throw ContractViolation("buffer front half overflow");
    s.write_range(b.region, 0, v);
    b.front_n = v.size();
}

void store_rear(BlockStore& s, Buffer& b, const ElementVec& v) {
    if (v.size() > b.half) throw ContractViolation("buffer rear half overflow");
    s.write_range(b.region, b.half, v);
    b.rear_n = v.size();
}

}  // namespace

std::uint64_t resolve_buffer(BlockStore& store, Buffer& buf, ElementVec extra,
                             bool force_rebalance) {
    ElementVec front = load_front(store, buf);
    ElementVec rear = load_rear(store, buf);
    const bool front_was_empty = front.empty();
    if (front_was_empty && extra.empty() && !force_rebalance) return 0;
    if (!front_was_empty && extra.empty() && rear.empty()) return 0;

    Element p_max{};
    if (!front_was_empty) p_max = *std::max_element(front.begin(), front.end(), priority_less);

    ElementVec merged;
    std::uint64_t discarded =
        merge_dedup({std::move(front), std::move(rear), std::move(extra)}, merged);

    ElementVec new_front, new_rear;
    for (const auto& e : merged) {
        if (!front_was_empty && !priority_less(p_max, e))
            new_front.push_back(e);
        else
            new_rear.push_back(e);
    }
    if (force_rebalance && new_rear.size() > buf.half) {
        // Spill the smallest rear priorities forward; legal only for buffers
        // with nothing below them.
        ElementVec spilled = remove_smallest(new_rear, new_rear.size() - buf.half);
        new_front.insert(new_front.end(), spilled.begin(), spilled.end());
        sort_by_key(new_front);
    }
    store_front(store, buf, new_front);
    store_rear(store, buf, new_rear);
    return discarded;
}

// ---------------------------------------------------------------------------
// Recursive nodes.

namespace detail {

struct Ctx {
    BlockStore* store;
    const TreapParams* params;
    TreapStats* stats;
    double threshold;  // effective base-case cutoff
};

struct Layout {
    double child_x = 0;
    std::size_t n_upper = 0, n_lower = 0;
    std::uint64_t top_half = 0, mid_half = 0, bot_half = 0;
    std::uint64_t slot_elems = 0;
    std::uint64_t top_off = 0, mid_off = 0, bot_off = 0, upper_off = 0, lower_off = 0, total = 0;
};

struct Sizer {
    const TreapParams* params = nullptr;
    double threshold = 0;
    std::map<double, std::uint64_t> memo;

    std::uint64_t base_half() const {
        return static_cast<std::uint64_t>(std::ceil(std::pow(threshold, 1.0 + params->alpha))) + 8;
    }

    Layout layout(double x) {
        const double a = params->alpha;
        auto up = [](double v) { return static_cast<std::uint64_t>(std::ceil(v)); };
        Layout l;
        l.child_x = std::ceil(std::sqrt(x));
        l.n_upper = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(x) / 4.0));
        l.n_lower =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::pow(x, (1.0 + a) / 2.0) / 4.0));
        l.top_half = 2 * up(x) + 16;
        l.mid_half = 2 * up(std::pow(x, 1.0 + a / 2.0)) + up(x) + 16;
        l.bot_half =
            2 * up(std::pow(x, 1.0 + a)) + 2 * up(std::pow(x, 1.0 + a / 2.0)) + 2 * up(x) + 16;
        l.slot_elems = size(l.child_x);
        l.top_off = 0;
        l.mid_off = l.top_off + 2 * l.top_half;
        l.bot_off = l.mid_off + 2 * l.mid_half;
        l.upper_off = l.bot_off + 2 * l.bot_half;
        l.lower_off = l.upper_off + l.n_upper * l.slot_elems;
        l.total = l.lower_off + l.n_lower * l.slot_elems;
        return l;
    }

    std::uint64_t size(double x) {
        auto it = memo.find(x);
        if (it != memo.end()) return it->second;
        std::uint64_t s = x <= threshold ? 2 * base_half() : layout(x).total;
        memo[x] = s;
        return s;
    }
};

// Elements gathered from a subtree, with their half of origin preserved:
// front-half elements may be redistributed into front positions (they are
// already known to sit below nothing larger), rear-half elements may not.
struct Drained {
    ElementVec front;  // key-sorted, unique against rear
    ElementVec rear;   // key-sorted
    std::uint64_t discarded = 0;
};

class Node {
public:
    Node(Ctx ctx, Sizer* sizer, double x, std::uint64_t lo, std::uint64_t hi, ArrayRef region)
        : ctx_(ctx), sizer_(sizer), x_(x), k_min_(lo), k_max_(hi), region_(region) {}
    virtual ~Node() = default;

    virtual void insert_batch(ElementVec run) = 0;           // key-sorted, unique, in range
    virtual ElementVec extract_min_batch() = 0;              // priority-sorted out
    virtual void ensure_front_top() = 0;
    virtual ElementVec take_front_top() = 0;                 // priority-sorted out
    virtual void give_back_front_top(ElementVec batch) = 0;  // any order in
    virtual ElementVec flush_down_lenient() = 0;             // key-sorted out
    virtual void refill_front(ElementVec run) = 0;           // key-sorted, unique
    virtual void collect(ElementVec& out) const = 0;         // uncounted reads
    virtual void collect_split(ElementVec& fronts, ElementVec& rears) const = 0;
    virtual std::size_t bottom_total() const = 0;
    virtual int span() const = 0;
    virtual std::optional<Element> check(const std::string& path, std::vector<std::string>& out,
                                         std::optional<Element> below_bound) const = 0;
    virtual void dump(std::ostream& os, const std::string& path, int level) const = 0;

    double x() const { return x_; }
    std::uint64_t k_min() const { return k_min_; }
    std::uint64_t k_max() const { return k_max_; }
    virtual void set_range(std::uint64_t lo, std::uint64_t hi) {
        k_min_ = lo;
        k_max_ = hi;
    }
    std::size_t count = 0;
    const ArrayRef& region() const { return region_; }

    // Gathers everything for a rebuild, charging one scan.  Keys are
    // deduplicated globally; front elements whose priorities reach into the
    // rear set are demoted so that front < rear holds for the pair.
    Drained drain_for_rebuild() {
        ElementVec fronts, rears;
        collect_split(fronts, rears);
        const std::uint64_t b = ctx_.store->config().block_size;
        ctx_.store->charge_io((count + b - 1) / b, 0);

        struct Tagged {
            Element e;
            bool is_front;
        };
        std::vector<Tagged> all;
        for (const auto& e : fronts) all.push_back({e, true});
        for (const auto& e : rears) all.push_back({e, false});
        std::sort(all.begin(), all.end(),
                  [](const Tagged& a, const Tagged& b2) { return key_less(a.e, b2.e); });
        Drained d;
        std::size_t w = 0;
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (w > 0 && all[w - 1].e.key == all[i].e.key) {
                ++d.discarded;
            } else {
                all[w++] = all[i];
            }
        }
        all.resize(w);
        std::optional<Element> rear_min;
        for (const auto& t : all)
            if (!t.is_front && (!rear_min || priority_less(t.e, *rear_min))) rear_min = t.e;
        for (const auto& t : all) {
            const bool frontish = t.is_front && (!rear_min || priority_less(t.e, *rear_min));
            (frontish ? d.front : d.rear).push_back(t.e);
        }
        ctx_.stats->discarded += d.discarded;
        return d;
    }

protected:
    Ctx ctx_;
    Sizer* sizer_;
    double x_;
    std::uint64_t k_min_, k_max_;
    ArrayRef region_;
};

std::unique_ptr<Node> initialize_node(Ctx ctx, Sizer* sizer, double x, std::uint64_t lo,
                                      std::uint64_t hi, ElementVec front_run, ElementVec rear_run,
                                      ArrayRef region);

// --------------------------------------------------------------------------
// Base case: one flat front/rear array, invariants 1 and 2 only.

class BaseNode : public Node {
public:
    BaseNode(Ctx ctx, Sizer* sizer, double x, std::uint64_t lo, std::uint64_t hi, ArrayRef region,
             ElementVec front_run, ElementVec rear_run)
        : Node(ctx, sizer, x, lo, hi, region) {
        buf_ = buffer_view(
            region, 0, sizer->base_half(),
            static_cast<std::uint64_t>(std::ceil(std::pow(x, 1.0 + ctx.params->alpha))));
        count = front_run.size() + rear_run.size();
        store_front(*ctx_.store, buf_, front_run);
        store_rear(*ctx_.store, buf_, rear_run);
    }

    void insert_batch(ElementVec run) override {
        count += run.size();
        // Resolve rather than blind rear-merge: new elements at or below the
        // front's maximum belong in the front.
        std::uint64_t disc = resolve_buffer(*ctx_.store, buf_, std::move(run), true);
        count -= disc;
        ctx_.stats->discarded += disc;
    }

    void ensure_front_top() override {
        if (count == 0) return;
        if (buf_.front_n == 0) {
            // Nothing lives below a base case: promote everything.
            ElementVec rear = load_rear(*ctx_.store, buf_);
            std::uint64_t disc = dedup_by_key(rear);
            count -= disc;
            ctx_.stats->discarded += disc;
            store_rear(*ctx_.store, buf_, {});
            store_front(*ctx_.store, buf_, rear);
        } else {
            std::uint64_t disc = resolve_buffer(*ctx_.store, buf_);
            count -= disc;
            ctx_.stats->discarded += disc;
        }
    }

    ElementVec extract_min_batch() override { return take_front_top(); }

    ElementVec take_front_top() override {
        ensure_front_top();
        ElementVec front = load_front(*ctx_.store, buf_);
        store_front(*ctx_.store, buf_, {});
        count -= front.size();
        sort_by_priority(front);
        return front;
    }

    void give_back_front_top(ElementVec batch) override {
        if (batch.empty()) return;
        count += batch.size();
        sort_by_key(batch);
        std::uint64_t d0 = dedup_by_key(batch);
        count -= d0;
        ctx_.stats->discarded += d0;
        merge_into_rear(std::move(batch));
    }

    ElementVec flush_down_lenient() override {
        std::uint64_t disc = resolve_buffer(*ctx_.store, buf_);
        count -= disc;
        ctx_.stats->discarded += disc;
        const std::uint64_t cap =
            static_cast<std::uint64_t>(std::ceil(std::pow(x_, 1.0 + ctx_.params->alpha)));
        ElementVec moved = load_rear(*ctx_.store, buf_);
        store_rear(*ctx_.store, buf_, {});
        if (moved.size() < std::max<std::uint64_t>(1, cap / 6) && buf_.front_n > 0) {
            ElementVec front = load_front(*ctx_.store, buf_);
            const std::size_t rank = static_cast<std::size_t>(cap / 3);
            if (front.size() > rank) {
                ElementVec dummy;
                ElementVec extra =
                    remove_largest_in_range(front, dummy, k_min_, k_max_, front.size() - rank);
                store_front(*ctx_.store, buf_, front);
                moved.insert(moved.end(), extra.begin(), extra.end());
            }
        }
        sort_by_key(moved);
        std::uint64_t d2 = dedup_by_key(moved);
        ctx_.stats->discarded += d2;
        count -= moved.size() + d2;
        return moved;
    }

    void refill_front(ElementVec run) override {
        if (count != 0) throw ContractViolation("refill on non-empty structure");
        count = run.size();
        store_front(*ctx_.store, buf_, run);
    }

    void collect(ElementVec& out) const override {
        ElementVec f, r;
        collect_split(f, r);
        out.insert(out.end(), f.begin(), f.end());
        out.insert(out.end(), r.begin(), r.end());
    }

    void collect_split(ElementVec& fronts, ElementVec& rears) const override {
        for (std::size_t i = 0; i < buf_.front_n; ++i)
            fronts.push_back(ctx_.store->peek_element(buf_.region, i));
        for (std::size_t i = 0; i < buf_.rear_n; ++i)
            rears.push_back(ctx_.store->peek_element(buf_.region, buf_.half + i));
    }

    std::size_t bottom_total() const override { return count; }
    int span() const override { return 1; }

    std::optional<Element> check(const std::string& path, std::vector<std::string>& out,
                                 std::optional<Element> below_bound) const override;
    void dump(std::ostream& os, const std::string& path, int level) const override;

private:
    void merge_into_rear(ElementVec run) {
        ElementVec rear = load_rear(*ctx_.store, buf_);
        ElementVec merged;
        std::uint64_t disc = merge_dedup({std::move(rear), std::move(run)}, merged);
        count -= disc;
        ctx_.stats->discarded += disc;
        if (merged.size() > buf_.half) {
            store_rear(*ctx_.store, buf_, {});
            std::uint64_t d2 = resolve_buffer(*ctx_.store, buf_, std::move(merged), true);
            count -= d2;
            ctx_.stats->discarded += d2;
        } else {
            store_rear(*ctx_.store, buf_, merged);
        }
    }

    Buffer buf_;
};

// --------------------------------------------------------------------------
// Recursive case.

class TreapNode : public Node {
public:
    static constexpr int K_TOP = 0, K_MID = 1, K_BOT = 2;

    TreapNode(Ctx ctx, Sizer* sizer, double x, std::uint64_t lo, std::uint64_t hi, ArrayRef region)
        : Node(ctx, sizer, x, lo, hi, region), lay_(sizer->layout(x)) {
        top_ = buffer_view(region, lay_.top_off, lay_.top_half,
                           static_cast<std::uint64_t>(std::ceil(x)));
        mid_ = buffer_view(
            region, lay_.mid_off, lay_.mid_half,
            static_cast<std::uint64_t>(std::ceil(std::pow(x, 1.0 + ctx.params->alpha / 2.0))));
        bot_ = buffer_view(
            region, lay_.bot_off, lay_.bot_half,
            static_cast<std::uint64_t>(std::ceil(std::pow(x, 1.0 + ctx.params->alpha))));
        for (std::size_t i = 0; i < lay_.n_upper; ++i) free_upper_.push_back(i);
        for (std::size_t i = 0; i < lay_.n_lower; ++i) free_lower_.push_back(i);
    }

    // ---- interface ops ----

    void insert_batch(ElementVec run) override {
        if (run.empty()) return;
        deposit(K_TOP, std::move(run));
    }

    ElementVec extract_min_batch() override {
        if (count == 0) return {};
        ensure_front_top();
        const std::uint64_t cap = std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(ctx_.params->extract_fraction * x_));
        ElementVec front = load_front(*ctx_.store, top_);
        ElementVec taken;
        if (front.size() <= cap) {
            taken = std::move(front);
            front.clear();
        } else {
            taken = remove_smallest(front, cap);
        }
        store_front(*ctx_.store, top_, front);
        count -= taken.size();
        sort_by_priority(taken);
        return taken;
    }

    void ensure_front_top() override {
        if (count == 0) return;
        const std::uint64_t target = front_target(top_);
        if (top_.front_n >= std::min<std::uint64_t>(target, count)) return;
        flush_up_buffer(K_TOP);
    }

    ElementVec take_front_top() override {
        ensure_front_top();
        ElementVec front = load_front(*ctx_.store, top_);
        store_front(*ctx_.store, top_, {});
        count -= front.size();
        sort_by_priority(front);
        return front;
    }

    void give_back_front_top(ElementVec batch) override {
        if (batch.empty()) return;
        count += batch.size();
        sort_by_key(batch);
        std::uint64_t d0 = dedup_by_key(batch);
        count -= d0;
        ctx_.stats->discarded += d0;
        ElementVec rear = load_rear(*ctx_.store, top_);
        ElementVec merged;
        std::uint64_t disc = merge_dedup({std::move(rear), std::move(batch)}, merged);
        count -= disc;
        ctx_.stats->discarded += disc;
        store_rear(*ctx_.store, top_, merged);
    }

    ElementVec flush_down_lenient() override {
        const std::uint64_t cap =
            static_cast<std::uint64_t>(std::ceil(std::pow(x_, 1.0 + ctx_.params->alpha)));
        force_bottom_fill(std::min<std::uint64_t>(count, (cap + 1) / 2));
        std::uint64_t disc = resolve_buffer(*ctx_.store, bot_, {}, true);
        count -= disc;
        ctx_.stats->discarded += disc;

        ElementVec moved = load_rear(*ctx_.store, bot_);
        store_rear(*ctx_.store, bot_, {});
        if (moved.size() < std::max<std::uint64_t>(1, cap / 6) && bot_.front_n > 0) {
            ElementVec front = load_front(*ctx_.store, bot_);
            const std::size_t rank = static_cast<std::size_t>(cap / 3);
            if (front.size() > rank) {
                ElementVec dummy;
                ElementVec extra =
                    remove_largest_in_range(front, dummy, k_min_, k_max_, front.size() - rank);
                store_front(*ctx_.store, bot_, front);
                moved.insert(moved.end(), extra.begin(), extra.end());
            }
        }
        sort_by_key(moved);
        std::uint64_t d2 = dedup_by_key(moved);
        ctx_.stats->discarded += d2;
        count -= moved.size() + d2;
        return moved;
    }

    void refill_front(ElementVec run) override {
        if (count != 0) throw ContractViolation("refill on non-empty structure");
        if (run.size() > bot_.half) throw ContractViolation("refill batch too large");
        store_front(*ctx_.store, bot_, run);
        count = run.size();
        ensure_level_nonempty(K_MID);
    }

    void force_bottom_fill(std::uint64_t target) {
        for (int round = 0; round < 64; ++round) {
            if (bot_.total() >= target) return;
            const std::size_t before = bot_.total();
            if (top_.total() > 0 || live_children(upper_) > 0) level_dump(K_TOP, {});
            if (mid_.total() > 0 || live_children(lower_) > 0) level_dump(K_MID, {});
            if (bot_.total() == before) return;  // nothing left to migrate
        }
    }

    // ---- flush-up: refills a front with the globally smallest priorities
    // stored at-or-below its buffer. ----

    void flush_up_buffer(int kind) {
        Buffer& b = buffer(kind);
        {
            std::uint64_t disc = resolve_buffer(*ctx_.store, b, {}, kind == K_BOT);
            count -= disc;
            ctx_.stats->discarded += disc;
        }
        if (kind == K_BOT) {
            if (b.front_n == 0 && b.rear_n > 0) {
                ElementVec rear = load_rear(*ctx_.store, b);
                store_rear(*ctx_.store, b, {});
                store_front(*ctx_.store, b, rear);
            }
            return;
        }

        const std::uint64_t target = front_target(b);
        if (b.front_n >= target) return;
        const std::size_t need = target - b.front_n;

        auto& level = kind == K_TOP ? upper_ : lower_;
        const int below_kind = kind + 1;
        Buffer& bb = buffer(below_kind);

        struct Source {
            enum Kind { Child, Below, Rear } kind;
            Node* child = nullptr;
            ElementVec batch;  // priority-sorted
            std::size_t pos = 0;
            bool dead = false;
        };
        std::vector<Source> sources;

        for (auto& cptr : level) {
            Source s;
            s.kind = Source::Child;
            s.child = cptr.get();
            const std::size_t before = s.child->count;
            s.batch = s.child->take_front_top();
            count -= (before - s.child->count) - s.batch.size();  // internal discards
            if (s.batch.empty()) s.dead = true;
            sources.push_back(std::move(s));
        }
        {
            Source s;
            s.kind = Source::Below;
            s.batch = load_front(*ctx_.store, bb);
            store_front(*ctx_.store, bb, {});
            sort_by_priority(s.batch);
            sources.push_back(std::move(s));
        }
        {
            Source s;
            s.kind = Source::Rear;
            s.batch = load_rear(*ctx_.store, b);
            store_rear(*ctx_.store, b, {});
            sort_by_priority(s.batch);
            if (s.batch.empty()) s.dead = true;
            sources.push_back(std::move(s));
        }

        auto reload = [&](Source& s) {
            if (s.kind == Source::Child) {
                const std::size_t before = s.child->count;
                s.batch = s.child->take_front_top();
                count -= (before - s.child->count) - s.batch.size();
            } else if (s.kind == Source::Below) {
                flush_up_buffer(below_kind);
                s.batch = load_front(*ctx_.store, bb);
                store_front(*ctx_.store, bb, {});
                sort_by_priority(s.batch);
            } else {
                s.batch.clear();
            }
            s.pos = 0;
            if (s.batch.empty()) s.dead = true;
        };
        for (auto& s : sources)
            if (s.kind == Source::Below && s.batch.empty()) reload(s);

        ElementVec chosen;
        while (chosen.size() < need) {
            Source* best = nullptr;
            for (auto& s : sources) {
                if (s.dead || s.pos >= s.batch.size()) continue;
                if (!best || priority_less(s.batch[s.pos], best->batch[best->pos])) best = &s;
            }
            if (!best) break;
            chosen.push_back(best->batch[best->pos++]);
            if (best->pos >= best->batch.size()) reload(*best);
        }

        {
            sort_by_key(chosen);
            ElementVec front = load_front(*ctx_.store, b);
            ElementVec merged;
            std::uint64_t disc = merge_dedup({std::move(front), std::move(chosen)}, merged);
            count -= disc;
            ctx_.stats->discarded += disc;
            store_front(*ctx_.store, b, merged);
        }
        // Leftovers return to rear halves only: fronts must keep the
        // global ordering guarantee.
        for (auto& s : sources) {
            ElementVec rest(s.batch.begin() + static_cast<std::ptrdiff_t>(s.pos), s.batch.end());
            if (rest.empty()) continue;
            if (s.kind == Source::Child) {
                const std::size_t before = s.child->count;
                const std::size_t n = rest.size();
                s.child->give_back_front_top(std::move(rest));
                count -= n - (s.child->count - before);
            } else if (s.kind == Source::Below) {
                sort_by_key(rest);
                std::uint64_t d0 = dedup_by_key(rest);
                count -= d0;
                ctx_.stats->discarded += d0;
                ElementVec cur = load_rear(*ctx_.store, bb);
                ElementVec merged;
                std::uint64_t disc = merge_dedup({std::move(cur), std::move(rest)}, merged);
                count -= disc;
                ctx_.stats->discarded += disc;
                store_rear(*ctx_.store, bb, merged);
            } else {
                sort_by_key(rest);
                std::uint64_t disc = dedup_by_key(rest);
                count -= disc;
                ctx_.stats->discarded += disc;
                store_rear(*ctx_.store, b, rest);
            }
        }
        prune_empty_children(kind);
        ensure_level_nonempty(kind);
    }

    // Top-level flush-up entry: safe to reseed the upper level here, unlike
    // inside flush_up_buffer, whose recursion holds child pointers.
    void flush_up_entry(int kind) {
        flush_up_buffer(kind);
        if (kind == K_MID) {
            // Filling the middle buffer from below may have made it nonempty
            // while the upper level sits empty.
            prune_empty_children(K_TOP);
            ensure_level_nonempty(K_TOP);
        }
    }

    // ---- queries ----

    std::size_t bottom_total() const override { return bot_.total(); }

    void collect(ElementVec& out) const override {
        ElementVec f, r;
        collect_split(f, r);
        out.insert(out.end(), f.begin(), f.end());
        out.insert(out.end(), r.begin(), r.end());
    }

    void collect_split(ElementVec& fronts, ElementVec& rears) const override {
        auto grab = [&](const Buffer& b) {
            for (std::size_t i = 0; i < b.front_n; ++i)
                fronts.push_back(ctx_.store->peek_element(b.region, i));
            for (std::size_t i = 0; i < b.rear_n; ++i)
                rears.push_back(ctx_.store->peek_element(b.region, b.half + i));
        };
        grab(top_);
        grab(mid_);
        grab(bot_);
        for (const auto& c : upper_) c->collect_split(fronts, rears);
        for (const auto& c : lower_) c->collect_split(fronts, rears);
    }

    int span() const override { return 3 + 2 * child_span(); }

    std::optional<Element> check(const std::string& path, std::vector<std::string>& out,
                                 std::optional<Element> below_bound) const override;
    void dump(std::ostream& os, const std::string& path, int level) const override;

private:
    int child_span() const {
        double cx = lay_.child_x;
        int s = 1;
        // span(x) = 3 + 2 span(sqrt(x)), iteratively from the base upward.
        std::vector<double> chain;
        while (cx > ctx_.threshold) {
            chain.push_back(cx);
            cx = std::ceil(std::sqrt(cx));
        }
        for (std::size_t i = chain.size(); i > 0; --i) s = 3 + 2 * s;
        return s;
    }

    Buffer& buffer(int kind) { return kind == K_TOP ? top_ : kind == K_MID ? mid_ : bot_; }
    const Buffer& buffer(int kind) const {
        return kind == K_TOP ? top_ : kind == K_MID ? mid_ : bot_;
    }

    std::uint64_t front_target(const Buffer& b) const {
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(b.logical / 4.0)));
    }

    static std::size_t live_children(const std::vector<std::unique_ptr<Node>>& level) {
        std::size_t n = 0;
        for (const auto& c : level)
            if (c->count > 0) ++n;
        return n;
    }

    std::uint64_t child_cap() const {
        return static_cast<std::uint64_t>(
            std::ceil(std::pow(lay_.child_x, 1.0 + ctx_.params->alpha)));
    }

    // Deposits a key-sorted unique-key run into a buffer and restores the
    // size constraints on the subtreap level below it.
    void deposit(int kind, ElementVec run) {
        count += run.size();
        std::uint64_t disc =
            resolve_buffer(*ctx_.store, buffer(kind), std::move(run), kind == K_BOT);
        count -= disc;
        ctx_.stats->discarded += disc;
        if (kind != K_BOT) rebalance(kind);
    }

    void rebalance(int kind) {
        Buffer& b = buffer(kind);
        auto& level = kind == K_TOP ? upper_ : lower_;
        const std::uint64_t keep =
            std::max<std::uint64_t>(1, static_cast<std::uint64_t>(2.0 * lay_.child_x / 3.0));
        const std::uint64_t push_cap =
            std::max<std::uint64_t>(1, static_cast<std::uint64_t>(lay_.child_x / 3.0));

        bool restart = true;
        while (restart) {
            restart = false;
            if (level.empty()) {
                spawn_level(kind);
                return;
            }
            ElementVec front = load_front(*ctx_.store, b);
            ElementVec rear = load_rear(*ctx_.store, b);
            for (std::size_t ci = 0; ci < level.size() && !restart; ++ci) {
                const std::uint64_t lo = level[ci]->k_min(), hi = level[ci]->k_max();
                while (true) {
                    auto [f0, f1] = key_span(front, lo, hi);
                    auto [r0, r1] = key_span(rear, lo, hi);
                    const std::size_t cnt = (f1 - f0) + (r1 - r0);
                    if (cnt <= keep) break;
                    const std::size_t move_n = std::min<std::size_t>(cnt - keep, push_cap);
                    ElementVec aux = remove_largest_in_range(front, rear, lo, hi, move_n);
                    std::uint64_t d0 = dedup_by_key(aux);
                    count -= d0;
                    ctx_.stats->discarded += d0;
                    if (!aux.empty()) {
                        // Everything left in the front must stay below what
                        // goes deeper; demote the rest to the rear.
                        const Element aux_min = *std::min_element(aux.begin(), aux.end(),
                                                                  priority_less);
                        ElementVec keep_front;
                        bool demoted = false;
                        for (const Element& e : front) {
                            if (priority_less(aux_min, e)) {
                                rear.push_back(e);
                                demoted = true;
                            } else {
                                keep_front.push_back(e);
                            }
                        }
                        if (demoted) {
                            front = std::move(keep_front);
                            sort_by_key(rear);
                        }
                    }
                    store_front(*ctx_.store, b, front);
                    store_rear(*ctx_.store, b, rear);
                    const int outcome = push_into_child(kind, ci, std::move(aux));
                    if (outcome == 2) return;  // level dumped below; b is empty
                    if (outcome == 1) {        // split changed the ranges
                        restart = true;
                        break;
                    }
                    front = load_front(*ctx_.store, b);
                    rear = load_rear(*ctx_.store, b);
                }
            }
        }
    }

    // Routes a batch into one child.  Returns 0 = inserted, 1 = child split
    // (level ranges changed), 2 = the whole level was dumped downward.
    int push_into_child(int kind, std::size_t ci, ElementVec aux) {
        auto& level = kind == K_TOP ? upper_ : lower_;
        auto& free_slots = kind == K_TOP ? free_upper_ : free_lower_;
        const std::size_t max_children = kind == K_TOP ? lay_.n_upper : lay_.n_lower;
        Node* child = level[ci].get();

        if (child->count + aux.size() <= child_cap()) {
            const std::size_t before = child->count;
            const std::size_t n = aux.size();
            child->insert_batch(std::move(aux));
            // The batch moved within this node; only discards inside the
            // child change the ledger.
            count -= n - (child->count - before);
            return 0;
        }
        if (level.size() < max_children && !free_slots.empty()) {
            const std::size_t before_subtree = child->count;
            Drained d = child->drain_for_rebuild();
            const std::size_t live = d.front.size() + d.rear.size();
            // Split point: the key at two-thirds of the combined multiset.
            ElementVec keys;
            keys.reserve(live);
            std::merge(d.front.begin(), d.front.end(), d.rear.begin(), d.rear.end(),
                       std::back_inserter(keys), key_less);
            std::size_t cut = live - live / 3;
            while (cut > 0 && cut < live && keys[cut].key == keys[cut - 1].key) --cut;
            const std::uint64_t s = cut < live ? keys[cut].key : child->k_max();
            if (cut > 0 && cut < live && s > child->k_min()) {
                auto split_at = [s](const ElementVec& v, ElementVec& lo_out, ElementVec& hi_out) {
                    for (const auto& e : v) (e.key < s ? lo_out : hi_out).push_back(e);
                };
                ElementVec f_lo, f_hi, r_lo, r_hi;
                split_at(d.front, f_lo, f_hi);
                split_at(d.rear, r_lo, r_hi);
                const std::uint64_t lo = child->k_min(), old_hi = child->k_max();
                ArrayRef slot_region = child->region();
                const std::size_t child_slot = slot_of_.at(child);
                slot_of_.erase(child);
                count -= before_subtree;
                level[ci] = initialize_node(ctx_, sizer_, lay_.child_x, lo, s, std::move(f_lo),
                                            std::move(r_lo), slot_region);
                slot_of_[level[ci].get()] = child_slot;
                const std::size_t slot = free_slots.back();
                free_slots.pop_back();
                auto fresh = initialize_node(ctx_, sizer_, lay_.child_x, s, old_hi, std::move(f_hi),
                                             std::move(r_hi), slot_region_for(kind, slot));
                slot_of_[fresh.get()] = slot;
                level.insert(level.begin() + static_cast<std::ptrdiff_t>(ci) + 1, std::move(fresh));
                count += level[ci]->count + level[ci + 1]->count;
                // Route the pending batch to the two halves.
                ElementVec aux_lo, aux_hi;
                for (const auto& e : aux) (e.key < s ? aux_lo : aux_hi).push_back(e);
                for (int side = 0; side < 2; ++side) {
                    ElementVec& part = side == 0 ? aux_lo : aux_hi;
                    if (part.empty()) continue;
                    Node* dst = level[ci + side].get();
                    const std::size_t b0 = dst->count;
                    const std::size_t n = part.size();
                    dst->insert_batch(std::move(part));
                    count -= n - (dst->count - b0);  // internal discards
                }
                return 1;
            }
            // Degenerate key distribution: rebuild in place, then dump.
            ArrayRef slot_region = child->region();
            const std::uint64_t clo = child->k_min(), chi = child->k_max();
            const std::size_t child_slot = slot_of_.at(child);
            slot_of_.erase(child);
            count -= before_subtree;
            level[ci] = initialize_node(ctx_, sizer_, lay_.child_x, clo, chi, std::move(d.front),
                                        std::move(d.rear), slot_region);
            slot_of_[level[ci].get()] = child_slot;
            count += level[ci]->count;
        }
        level_dump(kind, std::move(aux));
        return 2;
    }

    // Moves everything in the buffer plus the level below it into the next
    // buffer down, with `extra` folded in.
    void level_dump(int kind, ElementVec extra) {
        Buffer& b = buffer(kind);
        auto& level = kind == K_TOP ? upper_ : lower_;
        std::vector<ElementVec> runs;
        runs.push_back(load_front(*ctx_.store, b));
        runs.push_back(load_rear(*ctx_.store, b));
        runs.push_back(std::move(extra));
        store_front(*ctx_.store, b, {});
        store_rear(*ctx_.store, b, {});
        std::size_t gathered = runs[0].size() + runs[1].size() + runs[2].size();
        // Children must empty out completely: any front residue left behind
        // would sit above the smaller priorities this dump pushes past it.
        for (auto& c : level) {
            const std::size_t before = c->count;
            Drained d = c->drain_for_rebuild();
            const std::size_t live = d.front.size() + d.rear.size();
            count -= before - live;  // duplicates discarded inside the child
            gathered += live;
            runs.push_back(std::move(d.front));
            runs.push_back(std::move(d.rear));
        }
        auto& free_slots = kind == K_TOP ? free_upper_ : free_lower_;
        for (auto& c : level) {
            free_slots.push_back(slot_of_.at(c.get()));
            slot_of_.erase(c.get());
        }
        level.clear();
        ElementVec merged;
        std::uint64_t disc = merge_dedup(std::move(runs), merged);
        ctx_.stats->discarded += disc;
        count -= gathered;  // everything in hand leaves the ledger...
        deposit(kind + 1, std::move(merged));  // ...and re-enters minus duplicates
        ensure_level_nonempty(kind);
    }

    // When a level is empty but its buffer overflows, carve children out of
    // the largest-priority excess.
    void spawn_level(int kind) {
        Buffer& b = buffer(kind);
        auto& level = kind == K_TOP ? upper_ : lower_;
        if (!level.empty()) return;
        const std::size_t max_children = kind == K_TOP ? lay_.n_upper : lay_.n_lower;
        const std::uint64_t keep =
            std::max<std::uint64_t>(1, static_cast<std::uint64_t>(2.0 * lay_.child_x / 3.0));
        ElementVec front = load_front(*ctx_.store, b);
        ElementVec rear = load_rear(*ctx_.store, b);
        const std::size_t total = front.size() + rear.size();
        const std::size_t spawn_min =
            std::max<std::size_t>(1, static_cast<std::size_t>(lay_.child_x / 4.0));
        if (total <= keep || total - keep < spawn_min) return;
        ElementVec pool = remove_largest_in_range(front, rear, k_min_, k_max_, total - keep);
        store_front(*ctx_.store, b, front);
        store_rear(*ctx_.store, b, rear);
        std::uint64_t d0 = dedup_by_key(pool);
        count -= d0;
        ctx_.stats->discarded += d0;
        count -= make_children_from_pool(kind, std::move(pool), max_children, &level);
    }

    // Splits a key-sorted unique pool into range-tiling children initialized
    // with rear runs (the pool carries no priority guarantee against the
    // buffers below).  Returns discards absorbed inside the new children.
    std::uint64_t make_children_from_pool(int kind, ElementVec pool, std::size_t max_children,
                                          std::vector<std::unique_ptr<Node>>* level) {
        if (pool.empty()) return 0;
        auto& free_slots = kind == K_TOP ? free_upper_ : free_lower_;
        const std::uint64_t chunk_cap = std::max<std::uint64_t>(1, child_cap() / 2);
        std::size_t n_chunks = (pool.size() + chunk_cap - 1) / chunk_cap;
        n_chunks = std::min(n_chunks, std::min(max_children, free_slots.size()));
        if (n_chunks == 0) return 0;
        const std::size_t per = (pool.size() + n_chunks - 1) / n_chunks;
        std::uint64_t disc = 0;
        std::size_t pos = 0;
        std::uint64_t lo = k_min_;
        for (std::size_t i = 0; i < n_chunks && pos < pool.size(); ++i) {
            std::size_t end = std::min(pool.size(), pos + per);
            ElementVec chunk(pool.begin() + static_cast<std::ptrdiff_t>(pos),
                             pool.begin() + static_cast<std::ptrdiff_t>(end));
            const std::uint64_t hi =
                (i + 1 == n_chunks || end >= pool.size()) ? k_max_ : pool[end].key;
            const std::size_t slot = free_slots.back();
            free_slots.pop_back();
            auto node = initialize_node(ctx_, sizer_, lay_.child_x, lo, hi, {}, std::move(chunk),
                                        slot_region_for(kind, slot));
            slot_of_[node.get()] = slot;
            level->push_back(std::move(node));
            lo = hi;
            pos = end;
        }
        if (pos < pool.size()) {
            // Rounding leftovers join the last child.
            ElementVec rest(pool.begin() + static_cast<std::ptrdiff_t>(pos), pool.end());
            Node* last = level->back().get();
            const std::size_t b0 = last->count;
            const std::size_t n = rest.size();
            last->give_back_front_top(std::move(rest));
            disc += n - (last->count - b0);
        }
        return disc;
    }

    // Invariant 5: a nonempty buffer below an empty level seeds one child.
    void ensure_level_nonempty(int kind) {
        auto& level = kind == K_TOP ? upper_ : lower_;
        if (!level.empty()) return;
        Buffer& bb = buffer(kind + 1);
        if (bb.total() == 0) return;
        auto& free_slots = kind == K_TOP ? free_upper_ : free_lower_;
        if (free_slots.empty()) throw ContractViolation("no free subtreap slot");
        const std::uint64_t chunk_cap = std::max<std::uint64_t>(1, child_cap() / 2);
        const std::size_t slot = free_slots.back();

        std::unique_ptr<Node> node;
        if (bb.front_n > 0) {
            ElementVec front = load_front(*ctx_.store, bb);
            ElementVec chunk = remove_smallest(front, std::min<std::size_t>(front.size(), chunk_cap));
            store_front(*ctx_.store, bb, front);
            node = initialize_node(ctx_, sizer_, lay_.child_x, k_min_, k_max_, std::move(chunk), {},
                                   slot_region_for(kind, slot));
        } else {
            std::uint64_t disc = resolve_buffer(*ctx_.store, bb, {}, kind + 1 == K_BOT);
            count -= disc;
            ctx_.stats->discarded += disc;
            ElementVec rear = load_rear(*ctx_.store, bb);
            if (rear.empty()) {
                ensure_level_nonempty(kind);  // the resolve surfaced a front
                return;
            }
            const std::size_t k = std::min<std::size_t>(rear.size(), chunk_cap);
            ElementVec chunk(rear.begin(), rear.begin() + static_cast<std::ptrdiff_t>(k));
            rear.erase(rear.begin(), rear.begin() + static_cast<std::ptrdiff_t>(k));
            store_rear(*ctx_.store, bb, rear);
            node = initialize_node(ctx_, sizer_, lay_.child_x, k_min_, k_max_, {}, std::move(chunk),
                                   slot_region_for(kind, slot));
        }
        free_slots.pop_back();
        slot_of_[node.get()] = slot;
        level.push_back(std::move(node));
    }

    void prune_empty_children(int kind) {
        auto& level = kind == K_TOP ? upper_ : lower_;
        auto& free_slots = kind == K_TOP ? free_upper_ : free_lower_;
        for (std::size_t i = 0; i < level.size();) {
            if (level[i]->count > 0) {
                ++i;
                continue;
            }
            const std::uint64_t lo = level[i]->k_min(), hi = level[i]->k_max();
            free_slots.push_back(slot_of_.at(level[i].get()));
            slot_of_.erase(level[i].get());
            level.erase(level.begin() + static_cast<std::ptrdiff_t>(i));
            if (level.empty()) break;
            if (i > 0)
                level[i - 1]->set_range(level[i - 1]->k_min(), hi);
            else
                level[0]->set_range(lo, level[0]->k_max());
        }
    }

    ArrayRef slot_region_for(int kind, std::size_t slot) const {
        const std::uint64_t base = kind == K_TOP ? lay_.upper_off : lay_.lower_off;
        return region_.subrange(base + slot * lay_.slot_elems, lay_.slot_elems);
    }

public:
    // Widened bounds must reach the edge children of both levels, or their
    // tilings stop spanning this node's range.
    void set_range(std::uint64_t lo, std::uint64_t hi) override {
        Node::set_range(lo, hi);
        for (auto* level : {&upper_, &lower_}) {
            if (level->empty()) continue;
            Node* first = level->front().get();
            if (first->k_min() != lo) first->set_range(lo, first->k_max());
            Node* last = level->back().get();
            if (last->k_max() != hi) last->set_range(last->k_min(), hi);
        }
    }

private:

    Layout lay_;
    Buffer top_, mid_, bot_;
    std::vector<std::unique_ptr<Node>> upper_, lower_;
    std::vector<std::size_t> free_upper_, free_lower_;
    std::map<const Node*, std::size_t> slot_of_;

    friend std::unique_ptr<Node> initialize_node(Ctx, Sizer*, double, std::uint64_t, std::uint64_t,
                                                 ElementVec, ElementVec, ArrayRef);
};

// --------------------------------------------------------------------------
// Initialization: distributes a front run (smallest priorities upward) and a
// rear run (into the bottom rear), then restores invariant 5.

std::unique_ptr<Node> initialize_node(Ctx ctx, Sizer* sizer, double x, std::uint64_t lo,
                                      std::uint64_t hi, ElementVec front_run, ElementVec rear_run,
                                      ArrayRef region) {
    if (x <= ctx.threshold) {
        sort_by_key(front_run);
        sort_by_key(rear_run);
        return std::make_unique<BaseNode>(ctx, sizer, x, lo, hi, region, std::move(front_run),
                                          std::move(rear_run));
    }
    auto node = std::make_unique<TreapNode>(ctx, sizer, x, lo, hi, region);
    TreapNode& t = *node;
    const double a = ctx.params->alpha;
    BlockStore& store = *ctx.store;

    sort_by_priority(front_run);
    std::size_t pos = 0;
    auto next_chunk = [&](std::size_t n) {
        const std::size_t take = std::min(n, front_run.size() - pos);
        ElementVec c(front_run.begin() + static_cast<std::ptrdiff_t>(pos),
                     front_run.begin() + static_cast<std::ptrdiff_t>(pos + take));
        pos += take;
        return c;
    };

    // Top front: the x/2 smallest priorities.
    {
        ElementVec c = next_chunk(std::max<std::size_t>(1, static_cast<std::size_t>(x / 2.0)));
        sort_by_key(c);
        store_front(store, t.top_, c);
    }
    const std::uint64_t child_cap_half = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::pow(t.lay_.child_x, 1.0 + a) / 2.0));
    {
        ElementVec c = next_chunk(child_cap_half * t.lay_.n_upper);
        sort_by_key(c);
        t.make_children_from_pool(TreapNode::K_TOP, std::move(c), t.lay_.n_upper, &t.upper_);
    }
    {
        ElementVec c = next_chunk(
            std::max<std::size_t>(1, static_cast<std::size_t>(std::pow(x, 1.0 + a / 2.0) / 2.0)));
        sort_by_key(c);
        store_front(store, t.mid_, c);
    }
    {
        ElementVec c = next_chunk(child_cap_half * t.lay_.n_lower);
        sort_by_key(c);
        t.make_children_from_pool(TreapNode::K_MID, std::move(c), t.lay_.n_lower, &t.lower_);
    }
    {
        ElementVec c = next_chunk(front_run.size());
        sort_by_key(c);
        store_front(store, t.bot_, c);
        sort_by_key(rear_run);
        store_rear(store, t.bot_, rear_run);
    }
    std::size_t total = t.top_.total() + t.mid_.total() + t.bot_.total();
    for (const auto& c : t.upper_) total += c->count;
    for (const auto& c : t.lower_) total += c->count;
    t.count = total;

    t.ensure_level_nonempty(TreapNode::K_MID);
    t.ensure_level_nonempty(TreapNode::K_TOP);
    return node;
}

// --------------------------------------------------------------------------
// Invariant checking and dumps (uncounted reads throughout).

namespace {

ElementVec peek_half(const BlockStore& store, const Buffer& b, bool front) {
    ElementVec v;
    const std::size_t n = front ? b.front_n : b.rear_n;
    const std::size_t off = front ? 0 : b.half;
    for (std::size_t i = 0; i < n; ++i) v.push_back(store.peek_element(b.region, off + i));
    return v;
}

std::optional<Element> min_of(const ElementVec& v) {
    if (v.empty()) return std::nullopt;
    return *std::min_element(v.begin(), v.end(), priority_less);
}

std::optional<Element> max_of(const ElementVec& v) {
    if (v.empty()) return std::nullopt;
    return *std::max_element(v.begin(), v.end(), priority_less);
}

std::optional<Element> opt_min(std::optional<Element> a, std::optional<Element> b) {
    if (!a) return b;
    if (!b) return a;
    return priority_less(*a, *b) ? a : b;
}

void check_half(const ElementVec& v, const std::string& path, const char* which, std::uint64_t lo,
                std::uint64_t hi, std::vector<std::string>& out) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i].key < v[i - 1].key) {
            out.push_back(path + " " + which + ": not key-sorted");
            break;
        }
    for (const auto& e : v)
        if (e.key < lo || e.key >= hi) {
            out.push_back(path + " " + which + ": key out of range");
            break;
        }
}

std::string fmt_elems(const ElementVec& v) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i].key << ":" << v[i].priority;
    }
    os << "]";
    return os.str();
}

}  // namespace

std::optional<Element> BaseNode::check(const std::string& path, std::vector<std::string>& out,
                                       std::optional<Element> below_bound) const {
    ElementVec front = peek_half(*ctx_.store, buf_, true);
    ElementVec rear = peek_half(*ctx_.store, buf_, false);
    check_half(front, path, "front", k_min_, k_max_, out);
    check_half(rear, path, "rear", k_min_, k_max_, out);
    if (buf_.front_n > buf_.half || buf_.rear_n > buf_.half)
        out.push_back(path + ": half occupancy exceeded");
    auto fmax = max_of(front);
    auto rmin = min_of(rear);
    if (fmax && rmin && !priority_less(*fmax, *rmin))
        out.push_back(path + ": front/rear priority order violated (inv 2)");
    if (fmax && below_bound && !priority_less(*fmax, *below_bound))
        out.push_back(path + ": front not below deeper buffers (inv 3)");
    if (count != front.size() + rear.size()) out.push_back(path + ": count mismatch");
    return opt_min(min_of(front), min_of(rear));
}

void BaseNode::dump(std::ostream& os, const std::string& path, int level) const {
    os << (path.empty() ? "/" : path) << " " << level
       << " front=" << fmt_elems(peek_half(*ctx_.store, buf_, true))
       << " rear=" << fmt_elems(peek_half(*ctx_.store, buf_, false)) << "\n";
}

std::optional<Element> TreapNode::check(const std::string& path, std::vector<std::string>& out,
                                        std::optional<Element> below_bound) const {
    ElementVec tf = peek_half(*ctx_.store, top_, true), tr = peek_half(*ctx_.store, top_, false);
    ElementVec mf = peek_half(*ctx_.store, mid_, true), mr = peek_half(*ctx_.store, mid_, false);
    ElementVec bf = peek_half(*ctx_.store, bot_, true), br = peek_half(*ctx_.store, bot_, false);
    check_half(tf, path, "top.front", k_min_, k_max_, out);
    check_half(tr, path, "top.rear", k_min_, k_max_, out);
    check_half(mf, path, "mid.front", k_min_, k_max_, out);
    check_half(mr, path, "mid.rear", k_min_, k_max_, out);
    check_half(bf, path, "bot.front", k_min_, k_max_, out);
    check_half(br, path, "bot.rear", k_min_, k_max_, out);
    for (const Buffer* b : {&top_, &mid_, &bot_})
        if (b->front_n > b->half || b->rear_n > b->half)
            out.push_back(path + ": half occupancy exceeded");

    // Invariant 4: each level tiles the key range.
    auto check_tiling = [&](const std::vector<std::unique_ptr<Node>>& level, const char* name) {
        if (level.empty()) return;
        if (level.front()->k_min() != k_min_ || level.back()->k_max() != k_max_)
            out.push_back(path + ": " + name + " level does not span the key range (inv 4)");
        for (std::size_t i = 1; i < level.size(); ++i)
            if (level[i]->k_min() != level[i - 1]->k_max())
                out.push_back(path + ": " + name + " level ranges not contiguous (inv 4)");
    };
    check_tiling(upper_, "upper");
    check_tiling(lower_, "lower");
    if (upper_.size() > lay_.n_upper || lower_.size() > lay_.n_lower)
        out.push_back(path + ": too many subtreaps");

    // Invariant 5.
    if (mid_.total() > 0 && live_children(upper_) == 0)
        out.push_back(path + ": nonempty middle with empty upper level (inv 5)");
    if (bot_.total() > 0 && live_children(lower_) == 0)
        out.push_back(path + ": nonempty bottom with empty lower level (inv 5)");

    // Bottom-up minimum computation; children receive the bound that applies
    // to their own fronts.
    auto bot_min = opt_min(min_of(bf), min_of(br));
    auto below_lower = opt_min(bot_min, below_bound);
    std::optional<Element> lower_min;
    for (std::size_t i = 0; i < lower_.size(); ++i) {
        auto m = lower_[i]->check(path + "/l" + std::to_string(i), out, below_lower);
        lower_min = opt_min(lower_min, m);
    }
    auto mid_min = opt_min(min_of(mf), min_of(mr));
    auto below_mid = opt_min(opt_min(lower_min, bot_min), below_bound);
    auto below_upper = opt_min(mid_min, below_mid);
    std::optional<Element> upper_min;
    for (std::size_t i = 0; i < upper_.size(); ++i) {
        auto m = upper_[i]->check(path + "/u" + std::to_string(i), out, below_upper);
        upper_min = opt_min(upper_min, m);
    }

    auto inv3 = [&](const ElementVec& front, std::optional<Element> below, const char* which) {
        auto fm = max_of(front);
        if (fm && below && !priority_less(*fm, *below))
            out.push_back(path + ": " + std::string(which) +
                          " front not below deeper buffers (inv 3)");
    };
    inv3(tf, opt_min(upper_min, below_upper), "top");
    inv3(mf, below_mid, "mid");
    inv3(bf, below_bound, "bot");
    auto inv2 = [&](const ElementVec& f, const ElementVec& r, const char* which) {
        auto fm = max_of(f);
        auto rm = min_of(r);
        if (fm && rm && !priority_less(*fm, *rm))
            out.push_back(path + ": " + std::string(which) +
                          " front/rear priority order violated (inv 2)");
    };
    inv2(tf, tr, "top");
    inv2(mf, mr, "mid");
    inv2(bf, br, "bot");

    std::size_t total = tf.size() + tr.size() + mf.size() + mr.size() + bf.size() + br.size();
    for (const auto& c : upper_) total += c->count;
    for (const auto& c : lower_) total += c->count;
    if (total != count) out.push_back(path + ": count mismatch");

    return opt_min(opt_min(opt_min(min_of(tf), min_of(tr)), opt_min(mid_min, bot_min)),
                   opt_min(upper_min, lower_min));
}

void TreapNode::dump(std::ostream& os, const std::string& path, int level) const {
    const int cs = child_span();
    os << path << "/top " << level << " front=" << fmt_elems(peek_half(*ctx_.store, top_, true))
       << " rear=" << fmt_elems(peek_half(*ctx_.store, top_, false)) << "\n";
    for (std::size_t i = 0; i < upper_.size(); ++i)
        upper_[i]->dump(os, path + "/u" + std::to_string(i), level + 1);
    os << path << "/mid " << level + 1 + cs
       << " front=" << fmt_elems(peek_half(*ctx_.store, mid_, true))
       << " rear=" << fmt_elems(peek_half(*ctx_.store, mid_, false)) << "\n";
    for (std::size_t i = 0; i < lower_.size(); ++i)
        lower_[i]->dump(os, path + "/l" + std::to_string(i), level + 2 + cs);
    os << path << "/bot " << level + 2 + 2 * cs
       << " front=" << fmt_elems(peek_half(*ctx_.store, bot_, true))
       << " rear=" << fmt_elems(peek_half(*ctx_.store, bot_, false)) << "\n";
}

}  // namespace detail

// --------------------------------------------------------------------------
// Facade.

XTreap::XTreap(BlockStore& store, const TreapParams& params, double x, std::uint64_t k_min,
               std::uint64_t k_max)
    : store_(&store), params_(params), x_(x), stats_(std::make_unique<TreapStats>()) {
    params_.validate();
    params_.epsilon = params_.alpha / (1.0 + params_.alpha);
    if (!(x >= 1.0)) throw std::invalid_argument("x must be >= 1");
    if (k_min >= k_max) throw std::invalid_argument("empty key range");
    sizer_ = std::make_unique<detail::Sizer>();
    sizer_->params = &params_;
    sizer_->threshold = params_.base_threshold();
    arena_ = store.allocate(sizer_->size(x));
    detail::Ctx ctx{store_, &params_, stats_.get(), sizer_->threshold};
    root_ = detail::initialize_node(ctx, sizer_.get(), x, k_min, k_max, {}, {}, arena_);
}

XTreap XTreap::initialize(BlockStore& store, const TreapParams& params, double x,
                          std::uint64_t k_min, std::uint64_t k_max, ElementVec front_run,
                          ElementVec rear_run) {
    const double n = static_cast<double>(front_run.size() + rear_run.size());
    if (n < x / 4.0 || n > std::pow(x, 1.0 + params.alpha) / 2.0)
        throw ContractViolation("initialize: element count outside [x/4, x^{1+a}/2]");
    for (const auto& e : front_run)
        if (e.key < k_min || e.key >= k_max) throw ContractViolation("initialize: key out of range");
    for (const auto& e : rear_run)
        if (e.key < k_min || e.key >= k_max) throw ContractViolation("initialize: key out of range");
    if (!front_run.empty() && !rear_run.empty()) {
        const Element fmax = *std::max_element(front_run.begin(), front_run.end(), priority_less);
        const Element rmin = *std::min_element(rear_run.begin(), rear_run.end(), priority_less);
        if (!priority_less(fmax, rmin))
            throw ContractViolation("initialize: front run not below rear run");
    }
    XTreap t(store, params, x, k_min, k_max);
    t.stats_->inserted += front_run.size() + rear_run.size();
    sort_by_key(front_run);
    t.stats_->discarded += dedup_by_key(front_run);
    sort_by_key(rear_run);
    t.stats_->discarded += dedup_by_key(rear_run);
    detail::Ctx ctx{&store, &t.params_, t.stats_.get(), t.sizer_->threshold};
    t.root_ = detail::initialize_node(ctx, t.sizer_.get(), x, k_min, k_max, std::move(front_run),
                                      std::move(rear_run), t.arena_);
    return t;
}

XTreap::~XTreap() {
    if (store_ && arena_.length) store_->free(arena_);
}

XTreap::XTreap(XTreap&& other) noexcept
    : store_(other.store_),
      params_(other.params_),
      x_(other.x_),
      stats_(std::move(other.stats_)),
      sizer_(std::move(other.sizer_)),
      root_(std::move(other.root_)),
      arena_(other.arena_) {
    other.store_ = nullptr;
    other.arena_ = ArrayRef{};
}

XTreap& XTreap::operator=(XTreap&& other) noexcept {
    if (this != &other) {
        if (store_ && arena_.length) store_->free(arena_);
        store_ = other.store_;
        params_ = other.params_;
        x_ = other.x_;
        stats_ = std::move(other.stats_);
        sizer_ = std::move(other.sizer_);
        root_ = std::move(other.root_);
        arena_ = other.arena_;
        other.store_ = nullptr;
        other.arena_ = ArrayRef{};
    }
    return *this;
}

void XTreap::batched_insert(ElementVec run) {
    if (run.empty()) return;
    const std::uint64_t limit =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(params_.insert_fraction * x_));
    if (run.size() > limit) throw ContractViolation("batched_insert: run too large");
    for (std::size_t i = 1; i < run.size(); ++i)
        if (run[i].key < run[i - 1].key)
            throw ContractViolation("batched_insert: run not key-sorted");
    for (const auto& e : run)
        if (e.key < k_min() || e.key >= k_max())
            throw ContractViolation("batched_insert: key out of range");
    if (count() + run.size() > capacity(x_, params_.alpha))
        throw ContractViolation("batched_insert: structure full");
    stats_->inserted += run.size();
    sort_by_key(run);
    stats_->discarded += dedup_by_key(run);
    root_->insert_batch(std::move(run));
}

ElementVec XTreap::batched_extract_min() {
    ElementVec out = root_->extract_min_batch();
    stats_->extracted += out.size();
    return out;
}

ElementVec XTreap::flush_down() {
    const std::uint64_t cap =
        static_cast<std::uint64_t>(std::ceil(std::pow(x_, 1.0 + params_.alpha)));
    const std::size_t bt = root_->bottom_total();
    if (bt < (cap + 1) / 2 || bt > cap)
        throw ContractViolation("flush_down: bottom occupancy outside [x^{1+a}/2, x^{1+a}]");
    return root_->flush_down_lenient();
}

ElementVec XTreap::flush_down_for_chain() { return root_->flush_down_lenient(); }

XTreap::SplitResult XTreap::split() {
    const std::uint64_t cap =
        static_cast<std::uint64_t>(std::ceil(std::pow(x_, 1.0 + params_.alpha)));
    if (count() <= (cap + 1) / 2) throw ContractViolation("split: structure not half full");
    detail::Drained d = root_->drain_for_rebuild();
    const std::size_t live = d.front.size() + d.rear.size();
    ElementVec keys;
    keys.reserve(live);
    std::merge(d.front.begin(), d.front.end(), d.rear.begin(), d.rear.end(),
               std::back_inserter(keys), key_less);
    std::size_t cut = live - live / 3;
    while (cut > 0 && cut < live && keys[cut].key == keys[cut - 1].key) --cut;
    if (cut == 0 || cut >= live) throw ContractViolation("split: degenerate key distribution");
    const std::uint64_t s = keys[cut].key;

    SplitResult res;
    res.split_key = s;
    ElementVec f_lo, r_lo;
    for (const auto& e : d.front) (e.key < s ? f_lo : res.front_run).push_back(e);
    for (const auto& e : d.rear) (e.key < s ? r_lo : res.rear_run).push_back(e);

    const std::uint64_t lo = root_->k_min();
    detail::Ctx ctx{store_, &params_, stats_.get(), sizer_->threshold};
    root_ = detail::initialize_node(ctx, sizer_.get(), x_, lo, s, std::move(f_lo), std::move(r_lo),
                                    arena_);
    return res;
}

void XTreap::refill(ElementVec run) {
    if (run.empty()) return;
    stats_->inserted += run.size();
    sort_by_key(run);
    stats_->discarded += dedup_by_key(run);
    root_->refill_front(std::move(run));
}

void XTreap::flush_up(BufferKind kind) {
    if (auto* t = dynamic_cast<detail::TreapNode*>(root_.get())) {
        t->flush_up_entry(kind == BufferKind::Top      ? detail::TreapNode::K_TOP
                          : kind == BufferKind::Middle ? detail::TreapNode::K_MID
                                                       : detail::TreapNode::K_BOT);
    } else {
        root_->ensure_front_top();
    }
}

std::size_t XTreap::count() const { return root_->count; }
std::uint64_t XTreap::k_min() const { return root_->k_min(); }
std::uint64_t XTreap::k_max() const { return root_->k_max(); }
bool XTreap::is_base_case() const {
    return dynamic_cast<detail::TreapNode*>(root_.get()) == nullptr;
}

std::vector<std::string> XTreap::check_invariants() const {
    std::vector<std::string> out;
    root_->check("/", out, std::nullopt);
    return out;
}

void XTreap::dump(std::ostream& os) const { root_->dump(os, "", 1); }

ElementVec XTreap::collect_all() const {
    ElementVec out;
    root_->collect(out);
    return out;
}

}  // namespace iopq
