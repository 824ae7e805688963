#include "rgram/repair.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <new>
#include <utility>
#include <unordered_map>

#include "rgram/error.hpp"

#if defined(__linux__)
#include <sys/mman.h>
#endif

namespace rgram {

namespace {

constexpr std::uint32_t kNil = 0xffffffffu;

std::uint64_t pair_key(SymbolId left, SymbolId right) {
    return (static_cast<std::uint64_t>(left) << 32) | right;
}

// Open addressing with linear probing and backward-shift deletion. Keys are
// packed pairs; kEmpty never occurs as a key since SymbolId kNoSymbol is
// never paired.
template <typename V>
class PairTable {
public:
    static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

    explicit PairTable(std::size_t expected = 16) { rehash(std::bit_ceil(std::max<std::size_t>(16, expected * 2))); }

    V* find(std::uint64_t key) {
        for (std::size_t i = slot(key);; i = (i + 1) & mask_) {
            if (keys_[i] == key) return &values_[i];
            if (keys_[i] == kEmpty) return nullptr;
        }
    }
    const V* find(std::uint64_t key) const { return const_cast<PairTable*>(this)->find(key); }

    V& operator[](std::uint64_t key) {
        if ((size_ + 1) * 2 > keys_.size()) rehash(keys_.size() * 2);
        std::size_t i = slot(key);
        for (; keys_[i] != kEmpty; i = (i + 1) & mask_)
            if (keys_[i] == key) return values_[i];
        keys_[i] = key;
        values_[i] = V{};
        ++size_;
        return values_[i];
    }

    void erase(std::uint64_t key) {
        std::size_t i = slot(key);
        while (keys_[i] != key) {
            if (keys_[i] == kEmpty) return;
            i = (i + 1) & mask_;
        }
        for (std::size_t j = (i + 1) & mask_; keys_[j] != kEmpty; j = (j + 1) & mask_) {
            const std::size_t home = slot(keys_[j]);
            // Move j back into the hole unless its home lies cyclically in (i, j].
            if (((j - home) & mask_) >= ((j - i) & mask_)) {
                keys_[i] = keys_[j];
                values_[i] = values_[j];
                i = j;
            }
        }
        keys_[i] = kEmpty;
        --size_;
    }

    std::size_t size() const noexcept { return size_; }

    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t i = 0; i < keys_.size(); ++i)
            if (keys_[i] != kEmpty) f(keys_[i], values_[i]);
    }

private:
    std::size_t slot(std::uint64_t key) const {
        key ^= key >> 31;
        key *= 0x9E3779B97F4A7C15ull;
        return static_cast<std::size_t>(key >> 20) & mask_;
    }

    void rehash(std::size_t capacity) {
        std::vector<std::uint64_t> old_keys(capacity, kEmpty);
        std::vector<V> old_values(capacity);
        old_keys.swap(keys_);
        old_values.swap(values_);
        mask_ = capacity - 1;
        size_ = 0;
        for (std::size_t i = 0; i < old_keys.size(); ++i)
            if (old_keys[i] != kEmpty) (*this)[old_keys[i]] = old_values[i];
    }

    std::vector<std::uint64_t> keys_;
    std::vector<V> values_;
    std::size_t mask_ = 0;
    std::size_t size_ = 0;
};

// Fixed-size array on 2 MB-aligned storage, advised for huge pages.
template <typename T>
class SlotArray {
public:
    SlotArray() = default;
    SlotArray(const SlotArray&) = delete;
    SlotArray& operator=(const SlotArray&) = delete;
    SlotArray(SlotArray&& o) noexcept : data_(std::exchange(o.data_, nullptr)), size_(std::exchange(o.size_, 0)) {}
    SlotArray& operator=(SlotArray&& o) noexcept {
        std::swap(data_, o.data_);
        std::swap(size_, o.size_);
        return *this;
    }
    ~SlotArray() { std::free(data_); }

    void resize(std::size_t n) {
        std::free(data_);
        data_ = nullptr;
        size_ = n;
        if (n == 0) return;
        constexpr std::size_t kHuge = std::size_t{2} << 20;
        const std::size_t bytes = (n * sizeof(T) + kHuge - 1) / kHuge * kHuge;
        data_ = static_cast<T*>(std::aligned_alloc(kHuge, bytes));
        if (!data_) throw std::bad_alloc();
#ifdef MADV_HUGEPAGE
        ::madvise(data_, bytes, MADV_HUGEPAGE);
#endif
        std::uninitialized_value_construct_n(data_, n);
    }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }
    std::size_t size() const noexcept { return size_; }

private:
    T* data_ = nullptr;
    std::size_t size_ = 0;
};

bool vocabulary_full(const StopCriteria& stop, std::size_t symbols) {
    return stop.max_vocabulary && symbols + 1 > *stop.max_vocabulary;
}

bool merges_exhausted(const StopCriteria& stop, std::size_t merges) {
    return stop.max_merges && merges >= *stop.max_merges;
}

}  // namespace

void StopCriteria::validate() const {
    if (min_frequency < 2) throw DomainError("min_frequency must be at least 2");
}

std::uint64_t pair_count(const BoundedSequence& seq, SymbolId left, SymbolId right) {
    std::uint64_t count = 0;
    for (auto [begin, end] : seq.segments()) {
        for (std::size_t i = begin; i + 1 < end;) {
            if (seq.symbols[i] == left && seq.symbols[i + 1] == right) {
                ++count;
                i += 2;
            } else {
                ++i;
            }
        }
    }
    return count;
}

// ---------------------------------------------------------------------------
// MergeEngine
//
// The sequence lives in slot arrays indexed by original position; removed
// slots are unlinked from a doubly linked list whose links are cut at
// boundaries. Every tracked pair keeps its occurrences in a position-sorted
// list threaded through per-slot links, so the list head is the earliest
// occurrence. For a pair (a, a) only the left-to-right non-overlapping
// occurrences of each run are listed (even offsets from the run start).
//
// Tracked pairs sit in a bucket queue: one heap per count below
// `bucket_limit_`, ordered by earliest occurrence, and a single overflow
// heap ordered by (count desc, earliest occurrence) for larger counts.
// ---------------------------------------------------------------------------

struct MergeEngine::State {
    struct Pair {
        SymbolId left = 0;
        SymbolId right = 0;
        std::uint64_t count = 0;
        std::uint32_t head = kNil;
        std::uint32_t tail = kNil;
        std::uint64_t queued_count = 0;  // 0 when not queued
        std::uint32_t heap_pos = kNil;
        bool alive = false;
    };

    std::size_t terminals = 0;
    std::uint64_t min_frequency = 2;
    std::size_t live = 0;

    // Everything known about one original position.
    struct Slot {
        SymbolId sym;
        std::uint32_t nxt = kNil, prv = kNil;
        std::uint32_t occ_next = kNil, occ_prev = kNil, pair_at = kNil;
    };
    SlotArray<Slot> slots;
    std::vector<std::size_t> boundaries;
    std::vector<std::uint32_t> doc_ids;

    std::vector<Pair> pairs;
    std::vector<std::uint32_t> free_pairs;
    PairTable<std::uint32_t> index;
    PairTable<std::uint64_t> fresh_counts;

    std::uint64_t bucket_limit = 2;
    std::vector<std::vector<std::uint32_t>> buckets;
    std::vector<std::uint32_t> overflow;
    mutable std::uint64_t top = 0;

    std::vector<std::uint64_t> symbol_counts;
    std::vector<MergeEvent> log;

    // --- heaps ---------------------------------------------------------------

    bool better(std::uint32_t a, std::uint32_t b, bool by_count) const {
        const Pair& pa = pairs[a];
        const Pair& pb = pairs[b];
        if (by_count && pa.count != pb.count) return pa.count > pb.count;
        return pa.head < pb.head;
    }

    void heap_place(std::vector<std::uint32_t>& h, std::size_t pos, std::uint32_t id) {
        h[pos] = id;
        pairs[id].heap_pos = static_cast<std::uint32_t>(pos);
    }

    void sift_up(std::vector<std::uint32_t>& h, std::size_t pos, bool by_count) {
        const std::uint32_t id = h[pos];
        while (pos > 0) {
            const std::size_t parent = (pos - 1) / 2;
            if (!better(id, h[parent], by_count)) break;
            heap_place(h, pos, h[parent]);
            pos = parent;
        }
        heap_place(h, pos, id);
    }

    void sift_down(std::vector<std::uint32_t>& h, std::size_t pos, bool by_count) {
        const std::uint32_t id = h[pos];
        const std::size_t n = h.size();
        while (true) {
            std::size_t child = 2 * pos + 1;
            if (child >= n) break;
            if (child + 1 < n && better(h[child + 1], h[child], by_count)) ++child;
            if (!better(h[child], id, by_count)) break;
            heap_place(h, pos, h[child]);
            pos = child;
        }
        heap_place(h, pos, id);
    }

    std::vector<std::uint32_t>& heap_for(std::uint64_t count) {
        return count >= bucket_limit ? overflow : buckets[count];
    }

    void enqueue(std::uint32_t id) {
        Pair& p = pairs[id];
        p.queued_count = p.count;
        auto& h = heap_for(p.count);
        h.push_back(id);
        sift_up(h, h.size() - 1, &h == &overflow);
        if (p.count < bucket_limit && p.count > top) top = p.count;
    }

    void dequeue(std::uint32_t id) {
        Pair& p = pairs[id];
        if (p.queued_count == 0) return;
        auto& h = heap_for(p.queued_count);
        const bool by_count = &h == &overflow;
        const std::size_t pos = p.heap_pos;
        const std::uint32_t last = h.back();
        h.pop_back();
        if (pos < h.size()) {
            heap_place(h, pos, last);
            sift_up(h, pos, by_count);
            sift_down(h, pairs[last].heap_pos, by_count);
        }
        p.queued_count = 0;
        p.heap_pos = kNil;
    }

    std::optional<std::uint32_t> top_pair() const {
        if (!overflow.empty()) return overflow.front();
        while (top >= min_frequency && buckets[top].empty()) --top;
        if (top < min_frequency) return std::nullopt;
        return buckets[top].front();
    }

    // --- pair records ----------------------------------------------------------

    std::uint32_t new_pair(SymbolId left, SymbolId right) {
        std::uint32_t id;
        if (!free_pairs.empty()) {
            id = free_pairs.back();
            free_pairs.pop_back();
        } else {
            id = static_cast<std::uint32_t>(pairs.size());
            pairs.emplace_back();
        }
        pairs[id] = Pair{left, right, 0, kNil, kNil, 0, kNil, true};
        index[pair_key(left, right)] = id;
        return id;
    }

    std::uint32_t find_pair(SymbolId left, SymbolId right) const {
        const std::uint32_t* id = index.find(pair_key(left, right));
        return id ? *id : kNil;
    }

    void release(std::uint32_t id) {
        Pair& p = pairs[id];
        dequeue(id);
        index.erase(pair_key(p.left, p.right));
        p.alive = false;
        free_pairs.push_back(id);
    }

    // Pair counts never increase again, so a pair below min_frequency can
    // never be selected and is forgotten.
    void drop(std::uint32_t id) {
        for (std::uint32_t s = pairs[id].head; s != kNil; s = slots[s].occ_next) slots[s].pair_at = kNil;
        release(id);
    }

    void append(std::uint32_t id, std::uint32_t slot) {
        Pair& p = pairs[id];
        slots[slot].occ_prev = p.tail;
        slots[slot].occ_next = kNil;
        if (p.tail != kNil) slots[p.tail].occ_next = slot;
        else p.head = slot;
        p.tail = slot;
        slots[slot].pair_at = id;
        ++p.count;
    }

    void insert_after(std::uint32_t id, std::uint32_t pred, std::uint32_t slot) {
        Pair& p = pairs[id];
        const std::uint32_t succ = pred == kNil ? p.head : slots[pred].occ_next;
        slots[slot].occ_prev = pred;
        slots[slot].occ_next = succ;
        if (pred != kNil) slots[pred].occ_next = slot;
        else p.head = slot;
        if (succ != kNil) slots[succ].occ_prev = slot;
        else p.tail = slot;
        slots[slot].pair_at = id;
        ++p.count;
    }

    void unlink(std::uint32_t slot) {
        const std::uint32_t id = slots[slot].pair_at;
        Pair& p = pairs[id];
        const std::uint32_t before = slots[slot].occ_prev;
        const std::uint32_t after = slots[slot].occ_next;
        if (before != kNil) slots[before].occ_next = after;
        else p.head = after;
        if (after != kNil) slots[after].occ_prev = before;
        else p.tail = before;
        slots[slot].pair_at = kNil;
        --p.count;
    }

    // Requeues after a count or head change, dropping the pair if it fell
    // below the threshold.
    void settle(std::uint32_t id) {
        if (pairs[id].count < min_frequency) {
            drop(id);
            return;
        }
        dequeue(id);
        enqueue(id);
    }

    void forget_occurrence(std::uint32_t slot) {
        const std::uint32_t id = slots[slot].pair_at;
        if (id == kNil) return;
        unlink(slot);
        settle(id);
    }

    bool same_pair_next(std::uint32_t s, SymbolId a) const {
        return s != kNil && slots[s].sym == a && slots[s].nxt != kNil && slots[slots[s].nxt].sym == a;
    }

    // --- construction ------------------------------------------------------------

    void build(const BoundedSequence& seq) {
        const std::size_t n = seq.symbols.size();
        if (n >= kNil) throw DomainError("sequence too long for 32-bit positions");
        for (SymbolId s : seq.symbols)
            if (s >= terminals) throw DomainError("input symbol " + std::to_string(s) + " is not a terminal");
        slots.resize(n);
        for (std::size_t i = 0; i < n; ++i) slots[i].sym = seq.symbols[i];
        live = n;
        boundaries = seq.boundaries;
        doc_ids = seq.doc_ids;
        std::size_t b = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            while (b < boundaries.size() && boundaries[b] <= i) ++b;
            if (b < boundaries.size() && boundaries[b] == i + 1) continue;
            slots[i].nxt = static_cast<std::uint32_t>(i + 1);
            slots[i + 1].prv = static_cast<std::uint32_t>(i);
        }

        symbol_counts.assign(terminals, 0);
        for (SymbolId s : seq.symbols) ++symbol_counts[s];

        bucket_limit = std::max<std::uint64_t>(
            {min_frequency + 1, 64, static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)))});
        buckets.assign(bucket_limit, {});

        // Counted occurrences: every adjacent pair, except that inside a run
        // of equal symbols only even offsets count.
        auto for_each_counted = [&](auto&& fn) {
            std::size_t run_offset = 0;
            for (std::uint32_t i = 0; i < n; ++i) {
                if (slots[i].prv != kNil && slots[slots[i].prv].sym == slots[i].sym) ++run_offset;
                else run_offset = 0;
                if (slots[i].nxt == kNil) continue;
                const SymbolId l = slots[i].sym;
                const SymbolId r = slots[slots[i].nxt].sym;
                if (l == r && run_offset % 2 == 1) continue;
                fn(i, l, r);
            }
        };
        PairTable<std::uint64_t> counts(std::min<std::size_t>(n, 1 << 16));
        for_each_counted([&](std::uint32_t, SymbolId l, SymbolId r) { ++counts[pair_key(l, r)]; });
        for_each_counted([&](std::uint32_t i, SymbolId l, SymbolId r) {
            const std::uint64_t key = pair_key(l, r);
            if (*counts.find(key) < min_frequency) return;
            std::uint32_t id = find_pair(l, r);
            if (id == kNil) id = new_pair(l, r);
            append(id, i);
        });
        for (std::uint32_t id = 0; id < pairs.size(); ++id)
            if (pairs[id].alive) enqueue(id);
    }

    // --- merge -------------------------------------------------------------------

    MergeEvent merge(std::uint32_t chosen) {
        const SymbolId x = pairs[chosen].left;
        const SymbolId y = pairs[chosen].right;
        const auto z = static_cast<SymbolId>(symbol_counts.size());

        std::vector<std::uint32_t> occurrences;
        occurrences.reserve(pairs[chosen].count);
        for (std::uint32_t s = pairs[chosen].head; s != kNil; s = slots[s].occ_next) occurrences.push_back(s);
        for (std::uint32_t s : occurrences) slots[s].pair_at = kNil;
        release(chosen);

        std::vector<std::uint32_t> touched;
        touched.reserve(occurrences.size() * 2);
        std::vector<std::uint32_t> run;

        for (std::uint32_t i : occurrences) {
            const std::uint32_t j = slots[i].nxt;
            const std::uint32_t p = slots[i].prv;
            const std::uint32_t q = slots[j].nxt;

            if (p != kNil) forget_occurrence(p);

            // Removing j shifts the start of a run of y's that begins there,
            // which moves every non-overlapping (y, y) occurrence inside it.
            std::uint32_t run_pair = kNil;
            std::uint32_t run_pred = kNil;
            if (x != y && q != kNil && slots[q].sym == y) {
                run_pair = find_pair(y, y);
                if (run_pair != kNil) {
                    run_pred = slots[j].occ_prev;
                    run.clear();
                    for (std::uint32_t s = j; same_pair_next(s, y); s = slots[slots[s].nxt].nxt)
                        if (slots[s].pair_at == run_pair) run.push_back(s);
                    for (std::uint32_t s : run) unlink(s);
                }
            } else if (q != kNil) {
                forget_occurrence(j);
            }

            slots[i].sym = z;
            slots[j].sym = kNoSymbol;
            slots[i].nxt = q;
            if (q != kNil) slots[q].prv = i;
            slots[j].nxt = slots[j].prv = kNil;
            --live;

            if (run_pair != kNil) {
                std::uint32_t pred = run_pred;
                for (std::uint32_t s = q; same_pair_next(s, y); s = slots[slots[s].nxt].nxt) {
                    insert_after(run_pair, pred, s);
                    pred = s;
                }
                settle(run_pair);
            }

            if (p != kNil) touched.push_back(p);
            touched.push_back(i);
        }

        // Index the pairs that contain the new symbol, in position order.
        std::vector<std::pair<std::uint64_t, std::uint32_t>> fresh;
        fresh.reserve(touched.size());
        std::uint32_t last = kNil;
        for (std::uint32_t c : touched) {
            if (c == last) continue;
            last = c;
            const std::uint32_t d = slots[c].nxt;
            if (d == kNil) continue;
            const SymbolId s = slots[c].sym;
            const SymbolId t = slots[d].sym;
            if (s != z && t != z) continue;
            if (s == z && t == z) {
                if (slots[c].prv != kNil && slots[slots[c].prv].sym == z) continue;  // walked from the run start
                for (std::uint32_t u = c; same_pair_next(u, z); u = slots[slots[u].nxt].nxt)
                    fresh.emplace_back(pair_key(z, z), u);
                continue;
            }
            fresh.emplace_back(pair_key(s, t), c);
        }
        for (const auto& [key, slot] : fresh) ++fresh_counts[key];
        for (const auto& [key, slot] : fresh) {
            if (*fresh_counts.find(key) < min_frequency) continue;
            const auto l = static_cast<SymbolId>(key >> 32);
            const auto r = static_cast<SymbolId>(key & 0xffffffffu);
            std::uint32_t id = find_pair(l, r);
            if (id == kNil) id = new_pair(l, r);
            append(id, slot);
        }
        // Enqueue in position order so equal keys are queued once.
        for (const auto& [key, slot] : fresh) {
            std::uint64_t* count = fresh_counts.find(key);
            if (*count < min_frequency) continue;
            *count = 0;
            enqueue(find_pair(static_cast<SymbolId>(key >> 32), static_cast<SymbolId>(key & 0xffffffffu)));
        }
        for (const auto& [key, slot] : fresh) fresh_counts.erase(key);

        const std::uint64_t replaced = occurrences.size();
        symbol_counts[x] -= replaced;
        symbol_counts[y] -= replaced;
        symbol_counts.push_back(replaced);
        MergeEvent event{z, x, y, replaced};
        log.push_back(event);
        return event;
    }
};

MergeEngine::MergeEngine(const BoundedSequence& seq, std::size_t terminal_count, std::uint64_t min_frequency)
    : state_(std::make_unique<State>()) {
    if (min_frequency < 2) throw DomainError("min_frequency must be at least 2");
    state_->terminals = terminal_count;
    state_->min_frequency = min_frequency;
    state_->build(seq);
}

MergeEngine::~MergeEngine() = default;
MergeEngine::MergeEngine(MergeEngine&&) noexcept = default;
MergeEngine& MergeEngine::operator=(MergeEngine&&) noexcept = default;

std::optional<PairRecord> MergeEngine::best() const {
    const auto id = state_->top_pair();
    if (!id) return std::nullopt;
    const auto& p = state_->pairs[*id];
    return PairRecord{p.left, p.right, p.count, p.head};
}

std::optional<MergeEvent> MergeEngine::step(const StopCriteria& stop) {
    if (merges_exhausted(stop, merges()) || vocabulary_full(stop, symbol_count())) return std::nullopt;
    const auto id = state_->top_pair();
    if (!id || state_->pairs[*id].count < stop.min_frequency) return std::nullopt;
    return state_->merge(*id);
}

std::size_t MergeEngine::run(const StopCriteria& stop) {
    std::size_t done = 0;
    while (step(stop)) ++done;
    return done;
}

std::size_t MergeEngine::merges() const noexcept { return state_->log.size(); }
std::size_t MergeEngine::terminal_count() const noexcept { return state_->terminals; }
const std::vector<MergeEvent>& MergeEngine::log() const noexcept { return state_->log; }
std::size_t MergeEngine::length() const noexcept { return state_->live; }

std::span<const std::uint64_t> MergeEngine::symbol_counts() const noexcept { return state_->symbol_counts; }

BoundedSequence MergeEngine::sequence() const {
    const State& s = *state_;
    BoundedSequence out;
    out.symbols.reserve(s.live);
    out.doc_ids = s.doc_ids;
    std::size_t b = 0;
    for (std::size_t i = 0; i <= s.slots.size(); ++i) {
        while (b < s.boundaries.size() && s.boundaries[b] == i) {
            out.boundaries.push_back(out.symbols.size());
            ++b;
        }
        if (i < s.slots.size() && s.slots[i].sym != kNoSymbol) out.symbols.push_back(s.slots[i].sym);
    }
    return out;
}

std::vector<PairRecord> MergeEngine::tracked_pairs() const {
    std::vector<PairRecord> out;
    for (const auto& p : state_->pairs)
        if (p.alive) out.push_back(PairRecord{p.left, p.right, p.count, p.head});
    return out;
}

namespace {

TrainResult finish(const TerminalTable& terminals, BoundedSequence compressed, std::vector<MergeEvent> log) {
    TrainResult out{Grammar(terminals), std::move(compressed), std::move(log)};
    for (const MergeEvent& e : out.log) out.grammar.add_rule(e.left, e.right, e.count);
    return out;
}

}  // namespace

TrainResult train(const BoundedSequence& seq, const TerminalTable& terminals, const StopCriteria& stop) {
    stop.validate();
    MergeEngine engine(seq, terminals.size(), stop.min_frequency);
    engine.run(stop);
    return finish(terminals, engine.sequence(), engine.log());
}

TrainResult train_naive(const BoundedSequence& seq, const TerminalTable& terminals, const StopCriteria& stop) {
    stop.validate();
    for (SymbolId s : seq.symbols)
        if (s >= terminals.size()) throw DomainError("input symbol " + std::to_string(s) + " is not a terminal");

    std::vector<std::vector<SymbolId>> segments;
    for (auto [begin, end] : seq.segments())
        segments.emplace_back(seq.symbols.begin() + static_cast<std::ptrdiff_t>(begin),
                              seq.symbols.begin() + static_cast<std::ptrdiff_t>(end));

    struct Tally {
        std::uint64_t count = 0;
        std::size_t first = 0;
        std::size_t last_counted = 0;
    };
    std::vector<MergeEvent> log;
    SymbolId next_id = static_cast<SymbolId>(terminals.size());
    while (!merges_exhausted(stop, log.size()) && !vocabulary_full(stop, next_id)) {
        std::unordered_map<std::uint64_t, Tally> tallies;
        std::size_t pos = 0;
        for (const auto& segment : segments) {
            for (std::size_t i = 0; i + 1 < segment.size(); ++i, ++pos) {
                auto [it, inserted] = tallies.try_emplace(pair_key(segment[i], segment[i + 1]));
                Tally& t = it->second;
                if (inserted) {
                    t = Tally{1, pos, pos};
                } else if (t.last_counted + 1 != pos) {
                    ++t.count;
                    t.last_counted = pos;
                }
            }
            pos += segment.empty() ? 0 : 1;
        }
        std::uint64_t best_key = 0;
        const Tally* best = nullptr;
        for (const auto& [key, t] : tallies) {
            if (!best || t.count > best->count ||
                (t.count == best->count && (t.first < best->first || (t.first == best->first && key < best_key)))) {
                best = &t;
                best_key = key;
            }
        }
        if (!best || best->count < stop.min_frequency) break;

        const auto left = static_cast<SymbolId>(best_key >> 32);
        const auto right = static_cast<SymbolId>(best_key & 0xffffffffu);
        std::uint64_t replaced = 0;
        for (auto& segment : segments) {
            std::vector<SymbolId> rewritten;
            rewritten.reserve(segment.size());
            for (std::size_t i = 0; i < segment.size();) {
                if (i + 1 < segment.size() && segment[i] == left && segment[i + 1] == right) {
                    rewritten.push_back(next_id);
                    ++replaced;
                    i += 2;
                } else {
                    rewritten.push_back(segment[i++]);
                }
            }
            segment = std::move(rewritten);
        }
        log.push_back(MergeEvent{next_id, left, right, replaced});
        ++next_id;
    }

    BoundedSequence compressed;
    compressed.doc_ids = seq.doc_ids;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        if (k > 0) compressed.boundaries.push_back(compressed.symbols.size());
        compressed.symbols.insert(compressed.symbols.end(), segments[k].begin(), segments[k].end());
    }
    return finish(terminals, std::move(compressed), std::move(log));
}

}  // namespace rgram
