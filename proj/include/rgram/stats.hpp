#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rgram/corpus.hpp"
#include "rgram/repair.hpp"

namespace rgram {

struct RankedEntry {
    SymbolId token = 0;
    std::uint64_t count = 0;

    bool operator==(const RankedEntry&) const = default;
};

/// Sorted by count descending, ties by token id ascending.
struct RankedDistribution {
    std::vector<RankedEntry> entries;
    std::uint64_t total = 0;

    bool operator==(const RankedDistribution&) const = default;
};

struct FlatnessReport {
    double top1_share = 0.0;
    double top1_over_median = 0.0;  // lower median for even support sizes
    double normalized_entropy = 0.0;  // H / ln|support|, 0 when |support| == 1
    std::size_t vocab_size = 0;
    std::uint64_t token_count = 0;
};

/// Counts with per-thread shards merged at the end (OpenMP when available).
RankedDistribution rank_frequency(std::span<const SymbolId> tokens);
/// Single-threaded reference for rank_frequency().
RankedDistribution rank_frequency_serial(std::span<const SymbolId> tokens);

/// Throws DomainError on an empty distribution.
FlatnessReport flatness(const RankedDistribution& d);

struct CompressionRatio {
    double sequence_ratio = 0.0;
    double net_ratio = 0.0;  // counts two symbols of storage per rule
};

CompressionRatio compression_ratio(std::uint64_t original_len, std::uint64_t compressed_len,
                                   std::uint64_t rules_added);

struct CurvePoint {
    std::uint64_t checkpoint = 0;
    std::size_t rank = 0;  // 1-based
    SymbolId token = 0;
    std::uint64_t count = 0;
};

struct CheckpointSummary {
    std::uint64_t checkpoint = 0;  // requested merge count
    std::size_t merges = 0;        // merges actually performed
    bool exhausted = false;        // training stopped before the checkpoint
    FlatnessReport flatness;
};

struct CheckpointCurves {
    Grammar grammar;  // rules up to the last checkpoint
    std::vector<CurvePoint> points;
    std::vector<CheckpointSummary> summaries;
};

/// Trains once, pausing at each checkpoint (ascending merge counts) to take
/// the top-`top_k` of the ranked distribution.
CheckpointCurves checkpoint_curves(const EncodedCorpus& corpus, std::span<const std::uint64_t> checkpoints,
                                   std::uint64_t min_frequency = 2, std::size_t top_k = 100);

/// `checkpoint<TAB>rank<TAB>token<TAB>count` with escaped token text.
void write_curves_tsv(std::ostream& out, const CheckpointCurves& curves);
void write_summary_tsv(std::ostream& out, const CheckpointCurves& curves);

}  // namespace rgram
