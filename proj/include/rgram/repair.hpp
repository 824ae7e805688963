#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rgram/corpus.hpp"
#include "rgram/grammar.hpp"

namespace rgram {

/// Training stops at the first criterion that would be violated by the next
/// merge.
struct StopCriteria {
    std::uint64_t min_frequency = 2;
    std::optional<std::uint64_t> max_vocabulary;  // |terminals| + |rules|
    std::optional<std::uint64_t> max_merges;

    /// Throws DomainError when min_frequency < 2.
    void validate() const;
};

struct MergeEvent {
    SymbolId id = 0;
    SymbolId left = 0;
    SymbolId right = 0;
    std::uint64_t count = 0;

    bool operator==(const MergeEvent&) const = default;
};

/// A candidate pair. `count` is the number of non-overlapping left-to-right
/// occurrences (what merging it would replace); `first_pos` is the original
/// position of its earliest occurrence.
struct PairRecord {
    SymbolId left = 0;
    SymbolId right = 0;
    std::uint64_t count = 0;
    std::size_t first_pos = 0;

    bool operator==(const PairRecord&) const = default;
};

struct TrainResult {
    Grammar grammar;
    BoundedSequence compressed;
    std::vector<MergeEvent> log;
};

/// Number of non-overlapping occurrences of (left, right) found scanning left
/// to right, never spanning a boundary.
std::uint64_t pair_count(const BoundedSequence& seq, SymbolId left, SymbolId right);

/// Incremental Re-Pair engine. Each merge costs time proportional to the
/// number of occurrences it touches; pairs whose count falls below the
/// minimum frequency are dropped for good, since counts never grow back.
///
/// Pair selection: highest count, then leftmost earliest occurrence.
///
/// Memory: about 24 bytes per input symbol plus the tracked pair table.
class MergeEngine {
public:
    /// `terminal_count` is |alphabet|; every input symbol must be below it.
    MergeEngine(const BoundedSequence& seq, std::size_t terminal_count, std::uint64_t min_frequency = 2);
    ~MergeEngine();
    MergeEngine(MergeEngine&&) noexcept;
    MergeEngine& operator=(MergeEngine&&) noexcept;

    /// The pair the next merge would replace, if any reaches min_frequency.
    std::optional<PairRecord> best() const;

    /// Performs one merge unless `stop` forbids it.
    std::optional<MergeEvent> step(const StopCriteria& stop);

    /// Merges until a criterion fires; returns the number of merges done.
    std::size_t run(const StopCriteria& stop);

    std::size_t merges() const noexcept;
    std::size_t terminal_count() const noexcept;
    std::size_t symbol_count() const noexcept { return terminal_count() + merges(); }
    const std::vector<MergeEvent>& log() const noexcept;

    /// Current compressed sequence with boundaries remapped.
    BoundedSequence sequence() const;
    /// Live length of the compressed sequence.
    std::size_t length() const noexcept;
    /// Occurrences of each symbol id in the current sequence.
    std::span<const std::uint64_t> symbol_counts() const noexcept;

    /// Every tracked pair (count >= min_frequency), in no particular order.
    std::vector<PairRecord> tracked_pairs() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

TrainResult train(const BoundedSequence& seq, const TerminalTable& terminals, const StopCriteria& stop);

/// Quadratic reference: rescans, counts and replaces on every iteration.
TrainResult train_naive(const BoundedSequence& seq, const TerminalTable& terminals, const StopCriteria& stop);

}  // namespace rgram
