#include "rgram/stats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rgram/error.hpp"

#ifdef RGRAM_HAVE_OPENMP
#include <omp.h>
#endif

namespace rgram {

namespace {

RankedDistribution from_dense(const std::vector<std::uint64_t>& counts) {
    RankedDistribution d;
    for (std::size_t id = 0; id < counts.size(); ++id) {
        if (counts[id] == 0) continue;
        d.entries.push_back({static_cast<SymbolId>(id), counts[id]});
        d.total += counts[id];
    }
    std::sort(d.entries.begin(), d.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return a.count != b.count ? a.count > b.count : a.token < b.token;
    });
    return d;
}

}  // namespace

RankedDistribution rank_frequency_serial(std::span<const SymbolId> tokens) {
    if (tokens.empty()) return {};
    const SymbolId max_id = *std::max_element(tokens.begin(), tokens.end());
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(max_id) + 1, 0);
    for (SymbolId t : tokens) ++counts[t];
    return from_dense(counts);
}

RankedDistribution rank_frequency(std::span<const SymbolId> tokens) {
#ifdef RGRAM_HAVE_OPENMP
    if (tokens.size() < (1u << 16) || omp_get_max_threads() == 1) return rank_frequency_serial(tokens);
    SymbolId max_id = 0;
    const auto n = static_cast<std::ptrdiff_t>(tokens.size());
#pragma omp parallel for reduction(max : max_id)
    for (std::ptrdiff_t i = 0; i < n; ++i) max_id = std::max(max_id, tokens[static_cast<std::size_t>(i)]);

    const std::size_t width = static_cast<std::size_t>(max_id) + 1;
    std::vector<std::uint64_t> counts(width, 0);
#pragma omp parallel
    {
        std::vector<std::uint64_t> shard(width, 0);
#pragma omp for nowait
        for (std::ptrdiff_t i = 0; i < n; ++i) ++shard[tokens[static_cast<std::size_t>(i)]];
#pragma omp critical
        for (std::size_t k = 0; k < width; ++k) counts[k] += shard[k];
    }
    return from_dense(counts);
#else
    return rank_frequency_serial(tokens);
#endif
}

FlatnessReport flatness(const RankedDistribution& d) {
    if (d.entries.empty() || d.total == 0) throw DomainError("flatness of an empty distribution");
    FlatnessReport r;
    r.vocab_size = d.entries.size();
    r.token_count = d.total;
    const double total = static_cast<double>(d.total);
    const double top = static_cast<double>(d.entries.front().count);
    r.top1_share = top / total;
    // Entries are descending; the lower of the two middle values sits at n/2.
    const double median = static_cast<double>(d.entries[d.entries.size() / 2].count);
    r.top1_over_median = top / median;
    if (d.entries.size() > 1) {
        double h = 0.0;
        for (const RankedEntry& e : d.entries) {
            const double p = static_cast<double>(e.count) / total;
            h -= p * std::log(p);
        }
        r.normalized_entropy = std::clamp(h / std::log(static_cast<double>(d.entries.size())), 0.0, 1.0);
    }
    return r;
}

CompressionRatio compression_ratio(std::uint64_t original_len, std::uint64_t compressed_len,
                                   std::uint64_t rules_added) {
    if (original_len == 0) throw DomainError("compression ratio of an empty sequence");
    const double n = static_cast<double>(original_len);
    return {static_cast<double>(compressed_len) / n,
            static_cast<double>(compressed_len + 2 * rules_added) / n};
}

CheckpointCurves checkpoint_curves(const EncodedCorpus& corpus, std::span<const std::uint64_t> checkpoints,
                                   std::uint64_t min_frequency, std::size_t top_k) {
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
        throw DomainError("checkpoints must be ascending");
    MergeEngine engine(corpus.sequence, corpus.terminals.size(), min_frequency);
    StopCriteria stop;
    stop.min_frequency = min_frequency;

    CheckpointCurves out;
    for (std::uint64_t checkpoint : checkpoints) {
        stop.max_merges = checkpoint;
        engine.run(stop);
        const BoundedSequence seq = engine.sequence();
        const RankedDistribution d = rank_frequency(seq.symbols);
        const std::size_t shown = std::min(top_k, d.entries.size());
        for (std::size_t k = 0; k < shown; ++k)
            out.points.push_back({checkpoint, k + 1, d.entries[k].token, d.entries[k].count});
        CheckpointSummary summary;
        summary.checkpoint = checkpoint;
        summary.merges = engine.merges();
        summary.exhausted = engine.merges() < checkpoint;
        if (!d.entries.empty()) summary.flatness = flatness(d);
        out.summaries.push_back(summary);
    }
    out.grammar = Grammar(corpus.terminals);
    for (const MergeEvent& e : engine.log()) out.grammar.add_rule(e.left, e.right, e.count);
    return out;
}

void write_curves_tsv(std::ostream& out, const CheckpointCurves& curves) {
    std::unordered_map<SymbolId, std::string> rendered;
    out << "checkpoint\trank\ttoken\tcount\n";
    for (const CurvePoint& p : curves.points) {
        auto it = rendered.find(p.token);
        if (it == rendered.end()) it = rendered.emplace(p.token, escape_token(curves.grammar.expand32(p.token))).first;
        out << p.checkpoint << '\t' << p.rank << '\t' << it->second << '\t' << p.count << '\n';
    }
}

void write_summary_tsv(std::ostream& out, const CheckpointCurves& curves) {
    out << "checkpoint\tmerges\texhausted\tvocab_size\ttoken_count\ttop1_share\ttop1_over_median\tnormalized_entropy\n";
    for (const CheckpointSummary& s : curves.summaries) {
        out << s.checkpoint << '\t' << s.merges << '\t' << (s.exhausted ? 1 : 0) << '\t' << s.flatness.vocab_size
            << '\t' << s.flatness.token_count << '\t' << s.flatness.top1_share << '\t' << s.flatness.top1_over_median
            << '\t' << s.flatness.normalized_entropy << '\n';
    }
}

}  // namespace rgram
