#include "idss/cachesim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <list>
#include <set>
#include <thread>
#include <unordered_map>
#include <vector>

namespace idss::sim {

std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::LRU: return "LRU";
        case PolicyKind::LFU: return "LFU";
        case PolicyKind::FIFO: return "FIFO";
        case PolicyKind::ARC: return "ARC";
        case PolicyKind::LeCaR: return "LeCaR";
        case PolicyKind::Cacheus: return "Cacheus";
    }
    throw Error("bad policy kind");
}

PolicyKind parse_policy(std::string_view s) {
    std::string k = lower(s);
    for (PolicyKind p : kAllPolicies)
        if (k == lower(to_string(p))) return p;
    throw Error("unknown policy: " + std::string(s));
}

namespace {

void check_hyperparams(PolicyKind kind, const Hyperparams& hp) {
    auto allow = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : hp) {
            bool ok = false;
            for (const char* a : keys)
                if (k == a) ok = true;
            if (!ok)
                throw Error("unknown hyperparameter '" + k + "' for policy " + to_string(kind));
        }
    };
    switch (kind) {
        case PolicyKind::LeCaR: allow({"learning_rate", "discount_base", "seed"}); break;
        case PolicyKind::Cacheus: allow({"seed"}); break;
        default: allow({});
    }
    auto it = hp.find("learning_rate");
    if (it != hp.end() && it->second <= 0.0) throw Error("learning_rate must be positive");
    it = hp.find("discount_base");
    if (it != hp.end() && (it->second <= 0.0 || it->second >= 1.0))
        throw Error("discount_base must be in (0,1)");
    it = hp.find("seed");
    if (it != hp.end() && (it->second < 0.0 || it->second != std::floor(it->second)))
        throw Error("seed must be a non-negative integer");
}

double hp_get(const Hyperparams& hp, const std::string& key, double dflt) {
    auto it = hp.find(key);
    return it == hp.end() ? dflt : it->second;
}

/* ---------------- LRU ---------------- */

class LruPolicy : public PolicyEngine {
public:
    explicit LruPolicy(std::size_t cap) : cap_(cap) {}

    bool access(std::uint64_t block) override {
        auto it = map_.find(block);
        if (it != map_.end()) {
            list_.splice(list_.begin(), list_, it->second);
            return true;
        }
        if (map_.size() == cap_) {
            map_.erase(list_.back());
            list_.pop_back();
        }
        list_.push_front(block);
        map_[block] = list_.begin();
        return false;
    }

    std::size_t resident() const override { return map_.size(); }
    bool contains(std::uint64_t block) const override { return map_.count(block) != 0; }

private:
    std::size_t cap_;
    std::list<std::uint64_t> list_;  // MRU at front
    std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> map_;
};

/* ---------------- FIFO ---------------- */

class FifoPolicy : public PolicyEngine {
public:
    explicit FifoPolicy(std::size_t cap) : cap_(cap) {}

    bool access(std::uint64_t block) override {
        if (set_.count(block)) return true;  // hits do not reorder
        if (set_.size() == cap_) {
            set_.erase(queue_.back());
            queue_.pop_back();
        }
        queue_.push_front(block);
        set_.insert(block);
        return false;
    }

    std::size_t resident() const override { return set_.size(); }
    bool contains(std::uint64_t block) const override { return set_.count(block) != 0; }

private:
    std::size_t cap_;
    std::list<std::uint64_t> queue_;  // newest at front
    std::set<std::uint64_t> set_;
};

/* ---------------- LFU ----------------
 * Frequency counts accesses while resident (reset on re-admission).
 * Eviction: minimum frequency, ties broken toward the least recently
 * used block. */

class LfuPolicy : public PolicyEngine {
public:
    explicit LfuPolicy(std::size_t cap) : cap_(cap) {}

    bool access(std::uint64_t block) override {
        ++tick_;
        auto it = meta_.find(block);
        if (it != meta_.end()) {
            order_.erase({it->second.freq, it->second.tick});
            ++it->second.freq;
            it->second.tick = tick_;
            order_[{it->second.freq, it->second.tick}] = block;
            return true;
        }
        if (meta_.size() == cap_) {
            auto victim = order_.begin();  // (min freq, oldest tick)
            meta_.erase(victim->second);
            order_.erase(victim);
        }
        meta_[block] = {1, tick_};
        order_[{1, tick_}] = block;
        return false;
    }

    std::size_t resident() const override { return meta_.size(); }
    bool contains(std::uint64_t block) const override { return meta_.count(block) != 0; }

private:
    struct Meta {
        std::uint64_t freq;
        std::uint64_t tick;
    };
    std::size_t cap_;
    std::uint64_t tick_ = 0;
    std::unordered_map<std::uint64_t, Meta> meta_;
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> order_;
};

/* ---------------- ARC ----------------
 * Megiddo & Modha's adaptive replacement cache: resident lists T1/T2,
 * ghost lists B1/B2, adaptive target p for |T1|. */

class ArcPolicy : public PolicyEngine {
public:
    explicit ArcPolicy(std::size_t cap) : c_(cap) {}

    bool access(std::uint64_t block) override {
        auto it = where_.find(block);
        if (it != where_.end()) {
            switch (it->second.list) {
                case ListId::T1:
                case ListId::T2:
                    move(block, it->second, ListId::T2);
                    return true;
                case ListId::B1: {
                    const Loc loc = it->second;  // copy: replace() may rehash where_
                    double delta = std::max(static_cast<double>(b2_.size()) /
                                                static_cast<double>(b1_.size()),
                                            1.0);
                    p_ = std::min(p_ + delta, static_cast<double>(c_));
                    replace(false);
                    move(block, loc, ListId::T2);
                    return false;
                }
                case ListId::B2: {
                    const Loc loc = it->second;
                    double delta = std::max(static_cast<double>(b1_.size()) /
                                                static_cast<double>(b2_.size()),
                                            1.0);
                    p_ = std::max(p_ - delta, 0.0);
                    replace(true);
                    move(block, loc, ListId::T2);
                    return false;
                }
            }
        }
        // brand-new block
        const std::size_t l1 = t1_.size() + b1_.size();
        const std::size_t l2 = t2_.size() + b2_.size();
        if (l1 == c_) {
            if (t1_.size() < c_) {
                drop_lru(b1_, ListId::B1);
                replace(false);
            } else {
                drop_lru(t1_, ListId::T1);  // cache eviction without ghost entry
            }
        } else if (l1 < c_ && l1 + l2 >= c_) {
            if (l1 + l2 == 2 * c_) drop_lru(b2_, ListId::B2);
            replace(false);
        }
        push_mru(block, ListId::T1);
        return false;
    }

    std::size_t resident() const override { return t1_.size() + t2_.size(); }
    bool contains(std::uint64_t block) const override {
        auto it = where_.find(block);
        return it != where_.end() &&
               (it->second.list == ListId::T1 || it->second.list == ListId::T2);
    }

private:
    enum class ListId { T1, T2, B1, B2 };
    struct Loc {
        ListId list;
        std::list<std::uint64_t>::iterator it;
    };

    std::list<std::uint64_t>& get(ListId id) {
        switch (id) {
            case ListId::T1: return t1_;
            case ListId::T2: return t2_;
            case ListId::B1: return b1_;
            default: return b2_;
        }
    }

    void push_mru(std::uint64_t block, ListId id) {
        auto& l = get(id);
        l.push_front(block);
        where_[block] = {id, l.begin()};
    }

    void move(std::uint64_t block, Loc loc, ListId to) {
        get(loc.list).erase(loc.it);
        push_mru(block, to);
    }

    void drop_lru(std::list<std::uint64_t>& l, ListId) {
        where_.erase(l.back());
        l.pop_back();
    }

    /* Evicts one resident block into the matching ghost list. */
    void replace(bool hit_in_b2) {
        if (!t1_.empty() && (static_cast<double>(t1_.size()) > p_ ||
                             (hit_in_b2 && static_cast<double>(t1_.size()) == p_))) {
            std::uint64_t victim = t1_.back();
            t1_.pop_back();
            where_.erase(victim);
            push_mru(victim, ListId::B1);
        } else if (!t2_.empty()) {
            std::uint64_t victim = t2_.back();
            t2_.pop_back();
            where_.erase(victim);
            push_mru(victim, ListId::B2);
        }
    }

    std::size_t c_;
    double p_ = 0.0;
    std::list<std::uint64_t> t1_, t2_, b1_, b2_;
    std::unordered_map<std::uint64_t, Loc> where_;
};

/* ---------------- LeCaR ----------------
 * Vietri et al.: LRU and LFU experts arbitrated by multiplicative-weight
 * regret updates.  Evictions decided by the losing expert land in that
 * expert's history; re-encountering such a block shifts weight away from
 * the expert that evicted it. */

class LeCarPolicy : public PolicyEngine {
public:
    LeCarPolicy(std::size_t cap, const Hyperparams& hp)
        : cap_(cap),
          lr_(hp_get(hp, "learning_rate", 0.45)),
          discount_(std::pow(hp_get(hp, "discount_base", 0.005),
                             1.0 / static_cast<double>(cap))),
          rng_(static_cast<std::uint64_t>(hp_get(hp, "seed", 0.0))) {}

    bool access(std::uint64_t block) override {
        ++time_;
        auto it = entries_.find(block);
        if (it != entries_.end()) {
            touch(it->second, block);
            return true;
        }

        std::uint64_t freq = 1;
        if (auto h = lru_hist_.find(block); h != lru_hist_.end()) {
            freq = h->second.freq + 1;
            reward(0, h->second.evicted_time);
            erase_hist(lru_hist_, lru_hist_order_, block);
        } else if (auto h2 = lfu_hist_.find(block); h2 != lfu_hist_.end()) {
            freq = h2->second.freq + 1;
            reward(1, h2->second.evicted_time);
            erase_hist(lfu_hist_, lfu_hist_order_, block);
        }

        if (entries_.size() == cap_) evict();
        admit(block, freq);
        return false;
    }

    std::size_t resident() const override { return entries_.size(); }
    bool contains(std::uint64_t block) const override { return entries_.count(block) != 0; }

    const std::array<double, 2>& weights() const { return w_; }

private:
    struct Entry {
        std::uint64_t freq;
        std::uint64_t tick;
        std::list<std::uint64_t>::iterator lru_it;
    };
    struct HistEntry {
        std::uint64_t freq;
        std::uint64_t evicted_time;
    };
    using Hist = std::unordered_map<std::uint64_t, HistEntry>;

    void touch(Entry& e, std::uint64_t block) {
        lru_list_.erase(e.lru_it);
        lru_list_.push_front(block);
        e.lru_it = lru_list_.begin();
        freq_order_.erase({e.freq, e.tick});
        ++e.freq;
        e.tick = time_;
        freq_order_[{e.freq, e.tick}] = block;
    }

    void admit(std::uint64_t block, std::uint64_t freq) {
        lru_list_.push_front(block);
        entries_[block] = {freq, time_, lru_list_.begin()};
        freq_order_[{freq, time_}] = block;
    }

    void reward(int expert, std::uint64_t evicted_time) {
        const double r =
            -std::pow(discount_, static_cast<double>(time_ - evicted_time));
        w_[static_cast<std::size_t>(expert)] *= std::exp(lr_ * r);
        const double sum = w_[0] + w_[1];
        w_[0] /= sum;
        w_[1] /= sum;
        if (w_[0] >= 0.99) w_ = {0.99, 0.01};
        else if (w_[1] >= 0.99) w_ = {0.01, 0.99};
    }

    void evict() {
        const std::uint64_t lru_victim = lru_list_.back();
        const std::uint64_t lfu_victim = freq_order_.begin()->second;
        int policy;  // 0 = LRU expert, 1 = LFU expert, -1 = unanimous
        std::uint64_t victim;
        if (lru_victim == lfu_victim) {
            policy = -1;
            victim = lru_victim;
        } else {
            policy = rng_.unit() < w_[0] ? 0 : 1;
            victim = policy == 0 ? lru_victim : lfu_victim;
        }
        auto it = entries_.find(victim);
        if (policy == 0) {
            push_hist(lru_hist_, lru_hist_order_, victim, it->second.freq);
        } else if (policy == 1) {
            push_hist(lfu_hist_, lfu_hist_order_, victim, it->second.freq);
        }
        lru_list_.erase(it->second.lru_it);
        freq_order_.erase({it->second.freq, it->second.tick});
        entries_.erase(it);
    }

    void push_hist(Hist& h, std::list<std::uint64_t>& order, std::uint64_t block,
                   std::uint64_t freq) {
        if (h.size() == cap_) {
            h.erase(order.back());
            order.pop_back();
        }
        h[block] = {freq, time_};
        order.push_front(block);
    }

    void erase_hist(Hist& h, std::list<std::uint64_t>& order, std::uint64_t block) {
        h.erase(block);
        order.remove(block);
    }

    std::size_t cap_;
    double lr_;
    double discount_;
    Rng rng_;
    std::uint64_t time_ = 0;
    std::array<double, 2> w_ = {0.5, 0.5};

    std::list<std::uint64_t> lru_list_;  // MRU at front
    std::unordered_map<std::uint64_t, Entry> entries_;
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> freq_order_;

    Hist lru_hist_, lfu_hist_;
    std::list<std::uint64_t> lru_hist_order_, lfu_hist_order_;  // newest at front
};

/* ---------------- Cacheus ----------------
 * Rodriguez et al.: LeCaR-style arbitration between a scan-resistant LRU
 * (probation list Q for new/demoted blocks, protected list S for reused
 * ones, with an adaptive split) and a churn-resistant LFU (ties among
 * minimum-frequency blocks evict the most recently used), plus an
 * adaptive learning rate that follows hit-rate gradients and perturbs
 * itself randomly when progress stalls. */

class CacheusPolicy : public PolicyEngine {
public:
    CacheusPolicy(std::size_t cap, const Hyperparams& hp)
        : cap_(cap),
          hist_cap_(std::max<std::size_t>(1, cap / 2)),
          q_limit_(std::max<std::size_t>(1, (cap + 5) / 10)),  // ~10% probation to start
          s_limit_(cap - q_limit_),
          discount_(std::pow(0.005, 1.0 / static_cast<double>(cap))),
          rng_(static_cast<std::uint64_t>(hp_get(hp, "seed", 0.0))) {
        lr_init_ = std::clamp(std::sqrt(2.0 * std::log(2.0) / static_cast<double>(cap)),
                              0.001, 1.0);
        lr_ = lr_curr_ = lr_init_;
    }

    bool access(std::uint64_t block) override {
        ++time_;
        update_learning_rate();
        auto it = entries_.find(block);
        if (it != entries_.end()) {
            hit(block, it->second);
            ++period_hits_;
            return true;
        }
        miss(block);
        return false;
    }

    std::size_t resident() const override { return entries_.size(); }
    bool contains(std::uint64_t block) const override { return entries_.count(block) != 0; }

private:
    struct Entry {
        std::uint64_t freq;
        std::uint64_t tick;
        bool in_q;
        bool is_new;
        bool is_demoted;
        std::list<std::uint64_t>::iterator list_it;
    };
    struct HistEntry {
        std::uint64_t freq;
        std::uint64_t evicted_time;
    };
    using Hist = std::unordered_map<std::uint64_t, HistEntry>;

    void hit(std::uint64_t block, Entry& e) {
        if (e.in_q) {
            if (e.is_demoted) {
                adjust_split(true);
                e.is_demoted = false;
                --dem_count_;
            } else if (e.is_new) {
                adjust_split(false);
                e.is_new = false;
                --nor_count_;
            }
            q_.erase(e.list_it);
            s_.push_front(block);
            e.list_it = s_.begin();
            e.in_q = false;
            enforce_s_limit();
        } else {
            s_.erase(e.list_it);
            s_.push_front(block);
            e.list_it = s_.begin();
        }
        freq_order_.erase({e.freq, e.tick});
        ++e.freq;
        e.tick = time_;
        freq_order_[{e.freq, e.tick}] = block;
    }

    void miss(std::uint64_t block) {
        std::uint64_t freq = 1;
        if (auto h = lru_hist_.find(block); h != lru_hist_.end()) {
            freq = h->second.freq + 1;
            reward(0, h->second.evicted_time);
            erase_hist(lru_hist_, lru_order_, block);
        } else if (auto h2 = lfu_hist_.find(block); h2 != lfu_hist_.end()) {
            freq = h2->second.freq + 1;
            reward(1, h2->second.evicted_time);
            erase_hist(lfu_hist_, lfu_order_, block);
        }

        if (entries_.size() == cap_) evict();

        Entry e;
        e.freq = freq;
        e.tick = time_;
        if (freq > 1 && s_limit_ > 0) {  // block has proven reuse: protect it
            s_.push_front(block);
            e.list_it = s_.begin();
            e.in_q = false;
            e.is_new = false;
            e.is_demoted = false;
            entries_[block] = e;
            freq_order_[{e.freq, e.tick}] = block;
            enforce_s_limit();
        } else {
            q_.push_front(block);
            e.list_it = q_.begin();
            e.in_q = true;
            e.is_new = true;
            e.is_demoted = false;
            ++nor_count_;
            entries_[block] = e;
            freq_order_[{e.freq, e.tick}] = block;
        }
    }

    void enforce_s_limit() {
        while (s_.size() > s_limit_ && !s_.empty()) {
            std::uint64_t demoted = s_.back();
            s_.pop_back();
            Entry& d = entries_[demoted];
            q_.push_front(demoted);
            d.list_it = q_.begin();
            d.in_q = true;
            d.is_demoted = true;
            ++dem_count_;
        }
    }

    void evict() {
        const std::uint64_t sr_victim = !q_.empty() ? q_.back() : s_.back();
        // churn-resistant LFU: among minimum-frequency blocks pick the MRU one
        const std::uint64_t min_freq = freq_order_.begin()->first.first;
        auto last = freq_order_.upper_bound({min_freq, UINT64_MAX});
        --last;
        const std::uint64_t cr_victim = last->second;

        int policy;
        std::uint64_t victim;
        if (sr_victim == cr_victim) {
            policy = -1;
            victim = sr_victim;
        } else {
            policy = rng_.unit() < w_[0] ? 0 : 1;
            victim = policy == 0 ? sr_victim : cr_victim;
        }

        auto it = entries_.find(victim);
        Entry& e = it->second;
        if (e.in_q) {
            if (e.is_new) --nor_count_;
            if (e.is_demoted) --dem_count_;
            q_.erase(e.list_it);
        } else {
            s_.erase(e.list_it);
        }
        freq_order_.erase({e.freq, e.tick});
        if (policy == 0) push_hist(lru_hist_, lru_order_, victim, e.freq);
        else if (policy == 1) push_hist(lfu_hist_, lfu_order_, victim, e.freq);
        entries_.erase(it);
    }

    void reward(int expert, std::uint64_t evicted_time) {
        const double r =
            -std::pow(discount_, static_cast<double>(time_ - evicted_time));
        w_[static_cast<std::size_t>(expert)] *= std::exp(lr_ * r);
        const double sum = w_[0] + w_[1];
        w_[0] /= sum;
        w_[1] /= sum;
        if (w_[0] >= 0.99) w_ = {0.99, 0.01};
        else if (w_[1] >= 0.99) w_ = {0.01, 0.99};
    }

    /* Grow the protected (grow_s) or probation side by a step proportional
     * to how lopsided the demoted/new hit evidence is. */
    void adjust_split(bool grow_s) {
        if (cap_ <= 1) return;
        if (grow_s) {
            std::size_t step = std::max<std::size_t>(
                1, nor_count_ / std::max<std::size_t>(1, dem_count_));
            s_limit_ = std::min(cap_ - 1, s_limit_ + step);
            q_limit_ = cap_ - s_limit_;
        } else {
            std::size_t step = std::max<std::size_t>(
                1, dem_count_ / std::max<std::size_t>(1, nor_count_));
            q_limit_ = std::min(cap_ - 1, q_limit_ + step);
            s_limit_ = cap_ - q_limit_;
        }
    }

    void update_learning_rate() {
        const std::uint64_t period = cap_;
        if (time_ % period != 0) return;
        const double hr_curr =
            static_cast<double>(period_hits_) / static_cast<double>(period);
        const double hr_delta = hr_curr - hr_prev_;
        const double lr_delta = lr_curr_ - lr_prev_;
        const double grad = lr_delta * hr_delta;

        if (grad > 0) {
            lr_ = std::min(lr_ + std::abs(lr_ * lr_delta), 1.0);
            nega_count_ = 0;
            zero_count_ = 0;
        } else if (grad < 0) {
            lr_ = std::max(lr_ - std::abs(lr_ * lr_delta), 0.001);
            nega_count_ = 0;
            zero_count_ = 0;
        } else if (hr_delta <= 0) {
            if (hr_curr <= 0 && hr_delta == 0) ++zero_count_;
            if (hr_delta < 0) {
                ++nega_count_;
                ++zero_count_;
            }
            if (zero_count_ >= 10) {
                lr_ = lr_init_;
                zero_count_ = 0;
            } else if (hr_delta < 0) {
                if (nega_count_ >= 10) {
                    lr_ = lr_init_;
                    nega_count_ = 0;
                } else {
                    perturb_learning_rate();
                }
            }
        }
        lr_prev_ = lr_curr_;
        lr_curr_ = lr_;
        hr_prev_ = hr_curr;
        period_hits_ = 0;
    }

    void perturb_learning_rate() {
        if (lr_ >= 1.0) lr_ = 0.9;
        else if (lr_ <= 0.001) lr_ = 0.005;
        else if (rng_.unit() < 0.5) lr_ = std::min(lr_ * 1.25, 1.0);
        else lr_ = std::max(lr_ * 0.75, 0.001);
    }

    void push_hist(Hist& h, std::list<std::uint64_t>& order, std::uint64_t block,
                   std::uint64_t freq) {
        if (h.size() == hist_cap_) {
            h.erase(order.back());
            order.pop_back();
        }
        h[block] = {freq, time_};
        order.push_front(block);
    }

    void erase_hist(Hist& h, std::list<std::uint64_t>& order, std::uint64_t block) {
        h.erase(block);
        order.remove(block);
    }

    std::size_t cap_;
    std::size_t hist_cap_;
    std::size_t q_limit_, s_limit_;
    double discount_;
    Rng rng_;

    double lr_init_, lr_, lr_curr_, lr_prev_ = 0.0;
    double hr_prev_ = 0.0;
    std::uint64_t period_hits_ = 0;
    int zero_count_ = 0, nega_count_ = 0;

    std::uint64_t time_ = 0;
    std::array<double, 2> w_ = {0.5, 0.5};

    std::list<std::uint64_t> s_, q_;  // MRU at front
    std::unordered_map<std::uint64_t, Entry> entries_;
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> freq_order_;
    std::size_t dem_count_ = 0, nor_count_ = 0;

    Hist lru_hist_, lfu_hist_;
    std::list<std::uint64_t> lru_order_, lfu_order_;
};

}  // namespace

std::unique_ptr<PolicyEngine> make_policy(PolicyKind kind, std::size_t capacity,
                                          const Hyperparams& hp) {
    if (capacity == 0) throw Error("cache capacity must be >= 1");
    check_hyperparams(kind, hp);
    switch (kind) {
        case PolicyKind::LRU: return std::make_unique<LruPolicy>(capacity);
        case PolicyKind::LFU: return std::make_unique<LfuPolicy>(capacity);
        case PolicyKind::FIFO: return std::make_unique<FifoPolicy>(capacity);
        case PolicyKind::ARC: return std::make_unique<ArcPolicy>(capacity);
        case PolicyKind::LeCaR: return std::make_unique<LeCarPolicy>(capacity, hp);
        case PolicyKind::Cacheus: return std::make_unique<CacheusPolicy>(capacity, hp);
    }
    throw Error("bad policy kind");
}

SimResult simulate(const trace::AccessTrace& t, PolicyKind kind, std::size_t capacity,
                   const Hyperparams& hp) {
    if (t.requests.empty()) throw Error("simulate: empty trace");
    auto engine = make_policy(kind, capacity, hp);
    SimResult r;
    r.policy = kind;
    r.capacity = capacity;
    for (const trace::Request& req : t.requests) {
        if (engine->access(req.block)) ++r.hits;
        else ++r.misses;
    }
    r.hit_rate = static_cast<double>(r.hits) / static_cast<double>(t.requests.size());
    return r;
}

SweepReport sweep(const trace::AccessTrace& t, std::size_t capacity, const Hyperparams& hp,
                  unsigned parallel) {
    SweepReport rep;
    rep.trace_label = t.label;
    rep.capacity = capacity;

    std::array<SimResult, kAllPolicies.size()> results;
    if (parallel <= 1) {
        for (std::size_t i = 0; i < kAllPolicies.size(); ++i)
            results[i] = simulate(t, kAllPolicies[i], capacity, hp);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= kAllPolicies.size()) return;
                results[i] = simulate(t, kAllPolicies[i], capacity, hp);
            }
        };
        std::vector<std::future<void>> futs;
        unsigned n = std::min<unsigned>(parallel, kAllPolicies.size());
        for (unsigned i = 0; i < n; ++i)
            futs.push_back(std::async(std::launch::async, worker));
        for (auto& f : futs) f.get();  // propagates worker exceptions
    }
    for (std::size_t i = 0; i < kAllPolicies.size(); ++i)
        rep.results[kAllPolicies[i]] = results[i];
    rep.best = best_policy(rep).first;
    return rep;
}

std::pair<PolicyKind, double> best_policy(const SweepReport& report) {
    if (report.results.empty()) throw Error("best_policy: empty sweep");
    PolicyKind best = PolicyKind::LRU;
    double best_hr = -1.0;
    for (PolicyKind k : kAllPolicies) {
        auto it = report.results.find(k);
        if (it == report.results.end()) continue;
        if (it->second.hit_rate > best_hr) {  // strict: ties keep earlier order
            best = k;
            best_hr = it->second.hit_rate;
        }
    }
    return {best, best_hr};
}

std::size_t capacity_for(const trace::TraceStats& stats, double fraction) {
    if (fraction <= 0.0) throw Error("capacity_for: fraction must be positive");
    const double raw = fraction * static_cast<double>(stats.unique_blocks);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw)));
}

std::string sweep_to_csv(const SweepReport& report) {
    std::string out = "trace,policy,capacity,hits,misses,hit_rate\n";
    char buf[64];
    for (PolicyKind k : kAllPolicies) {
        auto it = report.results.find(k);
        if (it == report.results.end()) continue;
        const SimResult& r = it->second;
        std::snprintf(buf, sizeof buf, "%.6f", r.hit_rate);
        out += report.trace_label + "," + to_string(k) + "," + std::to_string(r.capacity) + "," +
               std::to_string(r.hits) + "," + std::to_string(r.misses) + "," + buf + "\n";
    }
    return out;
}

}  // namespace idss::sim
