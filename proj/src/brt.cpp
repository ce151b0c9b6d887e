#include "iopq/brt.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "iopq/pq.hpp"  // pq_treap_count: the box chain has the same shape

namespace iopq {
namespace detail {

namespace {

void sort_items(ElementVec& v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const Element& a, const Element& b) { return a.key < b.key; });
}

// Merges two key-sorted multisets, stable within equal keys.
ElementVec merge_items(const ElementVec& a, const ElementVec& b) {
    ElementVec out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
               [](const Element& x, const Element& y) { return x.key < y.key; });
    return out;
}

}  // namespace

struct BoxCtx {
    BlockStore* store;
    const TreapParams* params;
    double threshold;
};

struct BoxLayout {
    double child_x = 0;
    std::size_t n_upper = 0, n_lower = 0;
    std::uint64_t top_cap = 0, mid_cap = 0;
    std::uint64_t top_phys = 0, mid_phys = 0, bot_phys = 0, slot_elems = 0;
    std::uint64_t top_off = 0, mid_off = 0, bot_off = 0, upper_off = 0, lower_off = 0, total = 0;
};

struct BoxSizer {
    const TreapParams* params = nullptr;
    double threshold = 0;
    std::map<double, std::uint64_t> memo;

    std::uint64_t base_phys() const {
        return static_cast<std::uint64_t>(std::ceil(std::pow(threshold, 1.0 + params->alpha))) + 32;
    }

    BoxLayout layout(double x) {
        const double a = params->alpha;
        auto up = [](double v) { return static_cast<std::uint64_t>(std::ceil(v)); };
        BoxLayout l;
        l.child_x = std::ceil(std::sqrt(x));
        l.n_upper = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(x) / 4.0));
        l.n_lower =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::pow(x, (1.0 + a) / 2.0) / 4.0));
        l.top_cap = up(x);
        l.mid_cap = up(std::pow(x, 1.0 + a / 2.0));
        l.top_phys = 2 * l.top_cap + 16;
        l.mid_phys = 2 * l.mid_cap + 2 * l.top_cap + 16;
        l.bot_phys = up(std::pow(x, 1.0 + a)) + 2 * l.mid_cap + 2 * l.top_cap + 32;
        l.slot_elems = size(l.child_x);
        l.top_off = 0;
        l.mid_off = l.top_off + l.top_phys;
        l.bot_off = l.mid_off + l.mid_phys;
        l.upper_off = l.bot_off + l.bot_phys;
        l.lower_off = l.upper_off + l.n_upper * l.slot_elems;
        l.total = l.lower_off + l.n_lower * l.slot_elems;
        return l;
    }

    std::uint64_t size(double x) {
        auto it = memo.find(x);
        if (it != memo.end()) return it->second;
        std::uint64_t s = x <= threshold ? base_phys() : layout(x).total;
        memo[x] = s;
        return s;
    }
};

/// One x-box: three key-sorted item arrays and two levels of subboxes whose
/// key ranges tile this box's range.  No priorities; duplicates permitted.
class BoxNode {
public:
    BoxNode(BoxCtx ctx, BoxSizer* sizer, double x, std::uint64_t lo, std::uint64_t hi,
            ArrayRef region)
        : ctx_(ctx), sizer_(sizer), x_(x), lo_(lo), hi_(hi), region_(region) {
        base_ = x <= ctx.threshold;
        if (base_) {
            top_ = region;
        } else {
            lay_ = sizer->layout(x);
            top_ = region.subrange(lay_.top_off, lay_.top_phys);
            mid_ = region.subrange(lay_.mid_off, lay_.mid_phys);
            bot_ = region.subrange(lay_.bot_off, lay_.bot_phys);
        }
    }

    std::size_t count() const { return count_; }
    double x() const { return x_; }
    std::uint64_t k_min() const { return lo_; }
    std::uint64_t k_max() const { return hi_; }

    // Key-sorted multiset insert of any internal size; public batch limits
    // are the chain's concern.
    void insert(ElementVec run) {
        if (run.empty()) return;
        if (!base_ && run.size() > lay_.top_cap) {
            // Feed the physical top array in cap-sized pieces; overflow_top
            // relieves it between pieces.  Slices of a sorted run stay sorted.
            for (std::size_t pos = 0; pos < run.size(); pos += lay_.top_cap) {
                const std::size_t end = std::min(run.size(), pos + lay_.top_cap);
                insert(ElementVec(run.begin() + static_cast<std::ptrdiff_t>(pos),
                                  run.begin() + static_cast<std::ptrdiff_t>(end)));
            }
            return;
        }
        count_ += run.size();
        ElementVec top = load(top_, top_n_);
        store(top_, top_n_, merge_items(top, run));
        if (!base_ && top_n_ > lay_.top_cap) overflow_top();
    }

    ElementVec extract(std::uint64_t key) {
        ElementVec out = extract_from(top_, top_n_, key);
        if (!base_) {
            append(out, extract_from(mid_, mid_n_, key));
            append(out, extract_from(bot_, bot_n_, key));
            for (auto& c : upper_)
                if (c->k_min() <= key && key < c->k_max()) append(out, c->extract(key));
            for (auto& c : lower_)
                if (c->k_min() <= key && key < c->k_max()) append(out, c->extract(key));
        }
        count_ -= out.size();
        return out;
    }

    // Empties the whole box, charging one scan, and returns its key-sorted
    // contents.
    ElementVec drain() {
        ElementVec all;
        collect(all);
        const std::uint64_t b = ctx_.store->config().block_size;
        ctx_.store->charge_io((count_ + b - 1) / b, (count_ + b - 1) / b);
        sort_items(all);
        top_n_ = mid_n_ = bot_n_ = 0;
        upper_.clear();
        lower_.clear();
        count_ = 0;
        return all;
    }

    void collect(ElementVec& out) const {
        peek(top_, top_n_, out);
        if (!base_) {
            peek(mid_, mid_n_, out);
            peek(bot_, bot_n_, out);
            for (const auto& c : upper_) c->collect(out);
            for (const auto& c : lower_) c->collect(out);
        }
    }

    void check(const std::string& path, std::vector<std::string>& out) const {
        auto sortedness = [&](const ArrayRef& r, std::size_t n, const char* name) {
            std::uint64_t prev = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const Element e = ctx_.store->peek_element(r, i);
                if (e.key < lo_ || e.key >= hi_) {
                    out.push_back(path + " " + name + ": key out of range");
                    return;
                }
                if (i && e.key < prev) {
                    out.push_back(path + " " + name + ": not key-sorted");
                    return;
                }
                prev = e.key;
            }
        };
        sortedness(top_, top_n_, "top");
        std::size_t total = top_n_;
        if (!base_) {
            sortedness(mid_, mid_n_, "mid");
            sortedness(bot_, bot_n_, "bot");
            total += mid_n_ + bot_n_;
            auto tiling = [&](const std::vector<std::unique_ptr<BoxNode>>& level,
                              const char* name) {
                if (level.empty()) return;
                if (level.front()->k_min() != lo_ || level.back()->k_max() != hi_)
                    out.push_back(path + ": " + name + " level does not span the range");
                for (std::size_t i = 1; i < level.size(); ++i)
                    if (level[i]->k_min() != level[i - 1]->k_max())
                        out.push_back(path + ": " + name + " level not contiguous");
            };
            tiling(upper_, "upper");
            tiling(lower_, "lower");
            for (std::size_t i = 0; i < upper_.size(); ++i) {
                upper_[i]->check(path + "/u" + std::to_string(i), out);
                total += upper_[i]->count();
            }
            for (std::size_t i = 0; i < lower_.size(); ++i) {
                lower_[i]->check(path + "/l" + std::to_string(i), out);
                total += lower_[i]->count();
            }
        }
        if (total != count_) out.push_back(path + ": count mismatch");
    }

private:
    static void append(ElementVec& a, ElementVec b) {
        a.insert(a.end(), b.begin(), b.end());
    }

    ElementVec load(const ArrayRef& r, std::size_t n) {
        return ctx_.store->read_range(r, 0, n);
    }
    void store(const ArrayRef& r, std::size_t& n, const ElementVec& v) {
        if (v.size() > r.length) throw ContractViolation("x-box array overflow");
        ctx_.store->write_range(r, 0, v);
        n = v.size();
    }
    void peek(const ArrayRef& r, std::size_t n, ElementVec& out) const {
        for (std::size_t i = 0; i < n; ++i) out.push_back(ctx_.store->peek_element(r, i));
    }

    // Binary search the key's span, remove it, and shift the tail left.
    ElementVec extract_from(const ArrayRef& r, std::size_t& n, std::uint64_t key) {
        if (n == 0) return {};
        auto key_at = [&](std::size_t i) { return ctx_.store->read_element(r, i).key; };
        std::size_t lo = 0, hi = n;
        while (lo < hi) {  // first index with key_at >= key
            const std::size_t m = (lo + hi) / 2;
            if (key_at(m) < key)
                lo = m + 1;
            else
                hi = m;
        }
        std::size_t end = lo;
        while (end < n && key_at(end) == key) ++end;
        if (end == lo) return {};
        ElementVec out = ctx_.store->read_range(r, lo, end - lo);
        ElementVec tail = ctx_.store->read_range(r, end, n - end);
        ctx_.store->write_range(r, lo, tail);
        n -= out.size();
        return out;
    }

    std::uint64_t child_count_cap() const {
        return std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(std::pow(lay_.child_x, 1.0 + ctx_.params->alpha) / 2.0));
    }

    ArrayRef slot_region(bool upper, std::size_t i) const {
        const std::uint64_t base = upper ? lay_.upper_off : lay_.lower_off;
        return region_.subrange(base + i * lay_.slot_elems, lay_.slot_elems);
    }

    void overflow_top() {
        ElementVec items = load(top_, top_n_);
        store(top_, top_n_, {});
        if (!push_level(true, items)) {
            // The level could not absorb the spill: dump it and retry below.
            dump_level(true, std::move(items));
        }
    }

    void overflow_mid() {
        if (mid_n_ <= lay_.mid_cap) return;
        ElementVec items = load(mid_, mid_n_);
        store(mid_, mid_n_, {});
        if (!push_level(false, items)) dump_level(false, std::move(items));
    }

    // Routes a key-sorted multiset into the level's subboxes.  Returns false
    // (leaving the structure untouched) if the level is missing and cannot be
    // created, or if some chunk would overflow its subbox.
    bool push_level(bool upper, const ElementVec& items) {
        auto& level = upper ? upper_ : lower_;
        const std::size_t max_children = upper ? lay_.n_upper : lay_.n_lower;
        const std::uint64_t cap = child_count_cap();
        if (level.empty()) {
            // Partition into children, never splitting an equal-key group.
            const std::uint64_t half = std::max<std::uint64_t>(1, cap / 2);
            std::size_t n_chunks = static_cast<std::size_t>((items.size() + half - 1) / half);
            n_chunks = std::max<std::size_t>(1, std::min(n_chunks, max_children));
            const std::size_t per = (items.size() + n_chunks - 1) / n_chunks;
            std::vector<std::pair<std::size_t, std::size_t>> chunks;
            std::size_t pos = 0;
            while (pos < items.size()) {
                std::size_t end = std::min(items.size(), pos + per);
                while (end < items.size() && items[end].key == items[end - 1].key) ++end;
                if (end - pos > cap) return false;  // one key group too large
                chunks.push_back({pos, end});
                pos = end;
            }
            if (chunks.size() > max_children) return false;
            std::uint64_t lo = lo_;
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                auto [b, e] = chunks[i];
                const std::uint64_t hi = i + 1 == chunks.size() ? hi_ : items[e].key;
                auto node = std::make_unique<BoxNode>(ctx_, sizer_, lay_.child_x, lo, hi,
                                                      slot_region(upper, i));
                node->insert(ElementVec(items.begin() + static_cast<std::ptrdiff_t>(b),
                                        items.begin() + static_cast<std::ptrdiff_t>(e)));
                level.push_back(std::move(node));
                lo = hi;
            }
            return true;
        }
        // Existing children: verify every routed chunk fits before moving.
        std::size_t pos = 0;
        for (const auto& c : level) {
            std::size_t end = pos;
            while (end < items.size() && items[end].key < c->k_max()) ++end;
            if (c->count() + (end - pos) > cap) return false;
            pos = end;
        }
        pos = 0;
        for (const auto& c : level) {
            std::size_t end = pos;
            while (end < items.size() && items[end].key < c->k_max()) ++end;
            if (end > pos)
                c->insert(ElementVec(items.begin() + static_cast<std::ptrdiff_t>(pos),
                                     items.begin() + static_cast<std::ptrdiff_t>(end)));
            pos = end;
        }
        return true;
    }

    // Gathers the level's subboxes plus the pending items into the next
    // buffer down.
    void dump_level(bool upper, ElementVec pending) {
        auto& level = upper ? upper_ : lower_;
        ElementVec all = std::move(pending);
        for (auto& c : level) append(all, c->drain());
        level.clear();
        sort_items(all);
        if (upper) {
            ElementVec mid = load(mid_, mid_n_);
            store(mid_, mid_n_, merge_items(mid, all));
            overflow_mid();
        } else {
            ElementVec bot = load(bot_, bot_n_);
            store(bot_, bot_n_, merge_items(bot, all));
        }
    }

    BoxCtx ctx_;
    BoxSizer* sizer_;
    double x_;
    std::uint64_t lo_, hi_;
    ArrayRef region_;
    bool base_ = false;
    BoxLayout lay_;
    ArrayRef top_, mid_, bot_;
    std::size_t top_n_ = 0, mid_n_ = 0, bot_n_ = 0;
    std::vector<std::unique_ptr<BoxNode>> upper_, lower_;
    std::size_t count_ = 0;
};

}  // namespace detail

BRT::BRT(BlockStore& store, const TreapParams& params, std::uint64_t capacity_hint)
    : store_(&store), params_(params) {
    params_.validate();
    const std::size_t m = pq_treap_count(params_.alpha, std::max<std::uint64_t>(capacity_hint, 1));
    for (std::size_t i = 0; i < m; ++i)
        xs_.push_back(std::pow(2.0, std::min(62.0, std::pow(1.0 + params_.alpha,
                                                            static_cast<double>(i)))));
    boxes_.resize(m);
    arenas_.resize(m);
    sizer_ = std::make_unique<detail::BoxSizer>();
    sizer_->params = &params_;
    sizer_->threshold = params_.base_threshold();
}

BRT::~BRT() {
    if (!store_) return;
    for (const auto& a : arenas_)
        if (a.length) store_->free(a);
}

BRT::BRT(BRT&&) noexcept = default;
BRT& BRT::operator=(BRT&&) noexcept = default;

bool BRT::box_exists(std::size_t i) const { return static_cast<bool>(boxes_[i]); }

void BRT::ensure_box(std::size_t i) {
    if (i >= xs_.size()) {
        xs_.push_back(std::pow(2.0, std::min(62.0, std::pow(1.0 + params_.alpha,
                                                            static_cast<double>(i)))));
        boxes_.resize(xs_.size());
        arenas_.resize(xs_.size());
    }
    if (!boxes_[i]) {
        arenas_[i] = store_->allocate(sizer_->size(xs_[i]));
        detail::BoxCtx ctx{store_, &params_, sizer_->threshold};
        boxes_[i] = std::make_unique<detail::BoxNode>(ctx, sizer_.get(), xs_[i], 0,
                                                      ~std::uint64_t{0}, arenas_[i]);
    }
}

void BRT::insert(std::uint64_t key, std::uint64_t value) {
    ensure_box(0);
    boxes_[0]->insert({Element{key, value}});
    ++count_;
    cascade();
}

void BRT::cascade() {
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
        if (!boxes_[i]) continue;
        const double cap = std::pow(xs_[i], 1.0 + params_.alpha) / 2.0;
        if (static_cast<double>(boxes_[i]->count()) <= cap) continue;
        ElementVec run = boxes_[i]->drain();
        ensure_box(i + 1);
        const std::size_t chunk =
            std::max<std::size_t>(1, static_cast<std::size_t>(xs_[i + 1] / 2.0));
        for (std::size_t pos = 0; pos < run.size(); pos += chunk) {
            const std::size_t end = std::min(run.size(), pos + chunk);
            boxes_[i + 1]->insert(ElementVec(run.begin() + static_cast<std::ptrdiff_t>(pos),
                                             run.begin() + static_cast<std::ptrdiff_t>(end)));
        }
    }
}

ElementVec BRT::extract(std::uint64_t key) {
    ElementVec out;
    for (auto& b : boxes_) {
        if (!b) continue;
        ElementVec part = b->extract(key);
        out.insert(out.end(), part.begin(), part.end());
    }
    count_ -= out.size();
    return out;
}

ElementVec BRT::collect_all() const {
    ElementVec out;
    for (const auto& b : boxes_)
        if (b) b->collect(out);
    return out;
}

std::vector<std::string> BRT::check_invariants() const {
    std::vector<std::string> out;
    std::size_t total = 0;
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
        if (!boxes_[i]) continue;
        boxes_[i]->check("B" + std::to_string(i), out);
        total += boxes_[i]->count();
        const double cap = std::pow(xs_[i], 1.0 + params_.alpha) / 2.0 + xs_[i];
        if (static_cast<double>(boxes_[i]->count()) > cap)
            out.push_back("B" + std::to_string(i) + ": over count cap");
    }
    if (total != count_) out.push_back("BRT: count mismatch");
    return out;
}

}  // namespace iopq
