// Serial references against their parallel kernels, and the incremental
// engine against the quadratic one. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "rgram/embed.hpp"
#include "rgram/eval.hpp"
#include "rgram/grammar.hpp"
#include "rgram/repair.hpp"
#include "rgram/stats.hpp"

using namespace rgram;

namespace {

// Zipf-ish text over a small alphabet with short segments.
EncodedCorpus synthetic(std::size_t length, std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    std::geometric_distribution<int> letter(0.25);
    std::bernoulli_distribution cut(0.01);
    std::string text;
    text.reserve(length);
    for (std::size_t i = 0; i < length; ++i) text += cut(rng) ? '\n' : static_cast<char>('a' + letter(rng) % 26);
    return encode(text);
}

std::vector<SymbolId> zipf_tokens(std::size_t n) {
    std::mt19937_64 rng(13);
    std::geometric_distribution<SymbolId> geo(0.001);
    std::vector<SymbolId> out(n);
    for (auto& t : out) t = geo(rng);
    return out;
}

void BM_RankFrequency(benchmark::State& state) {
    const auto tokens = zipf_tokens(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(rank_frequency(tokens));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankFrequency)->Arg(1 << 20)->Arg(1 << 23);

void BM_RankFrequencySerial(benchmark::State& state) {
    const auto tokens = zipf_tokens(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(rank_frequency_serial(tokens));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankFrequencySerial)->Arg(1 << 20)->Arg(1 << 23);

struct ApplyFixture {
    Grammar grammar;
    BoundedSequence text;
    ApplyFixture() {
        const EncodedCorpus train_on = synthetic(1 << 20);
        StopCriteria stop;
        stop.max_merges = 5000;
        grammar = train(train_on.sequence, train_on.terminals, stop).grammar;
        const EncodedCorpus other = synthetic(1 << 20, 17);
        TerminalTable table = grammar.terminals();
        text = encode(decode_terminals(other.sequence, other.terminals), SeparatorSet{}, table);
    }
};

const ApplyFixture& apply_fixture() {
    static const ApplyFixture f;
    return f;
}

void BM_Apply(benchmark::State& state) {
    const auto& f = apply_fixture();
    for (auto _ : state) benchmark::DoNotOptimize(apply(f.grammar, f.text));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.text.size()));
}
BENCHMARK(BM_Apply)->Unit(benchmark::kMillisecond);

void BM_ApplySerial(benchmark::State& state) {
    const auto& f = apply_fixture();
    for (auto _ : state) benchmark::DoNotOptimize(apply_serial(f.grammar, f.text));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.text.size()));
}
BENCHMARK(BM_ApplySerial)->Unit(benchmark::kMillisecond);

WordVectors random_vectors(std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(19);
    std::normal_distribution<float> gauss;
    WordVectors v(dim);
    std::vector<float> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (float& x : row) x = gauss(rng);
        v.add("w" + std::to_string(i), row);
    }
    return v;
}

void BM_RankByCosine(benchmark::State& state) {
    static const WordVectors v = random_vectors(100000, 100);
    static const NormalizedVectors nv(v);
    const auto target = nv.row(0);
    for (auto _ : state) benchmark::DoNotOptimize(rank_by_cosine(nv, target, 10, {}));
}
BENCHMARK(BM_RankByCosine)->Unit(benchmark::kMillisecond);

void BM_RankByCosineSerial(benchmark::State& state) {
    static const WordVectors v = random_vectors(100000, 100);
    static const NormalizedVectors nv(v);
    const auto target = nv.row(0);
    for (auto _ : state) benchmark::DoNotOptimize(rank_by_cosine_serial(nv, target, 10, {}));
}
BENCHMARK(BM_RankByCosineSerial)->Unit(benchmark::kMillisecond);

void BM_Train(benchmark::State& state) {
    const EncodedCorpus c = synthetic(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(train(c.sequence, c.terminals, StopCriteria{}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Train)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20)->Arg(1 << 22)->Unit(benchmark::kMillisecond);

void BM_TrainNaive(benchmark::State& state) {
    const EncodedCorpus c = synthetic(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(train_naive(c.sequence, c.terminals, StopCriteria{}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainNaive)->Arg(1 << 12)->Arg(1 << 14)->Unit(benchmark::kMillisecond);

void BM_SkipgramEpoch(benchmark::State& state) {
    const EncodedCorpus c = synthetic(1 << 18);
    StopCriteria stop;
    stop.max_merges = 2000;
    const TrainResult r = train(c.sequence, c.terminals, stop);
    std::stringstream ss;
    write_segmented(ss, r.grammar, r.compressed);
    const SegmentedCorpus corpus = read_segmented(ss);
    TrainConfig config;
    config.dim = 50;
    config.epochs = 1;
    config.threads = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(train_skipgram(corpus, config));
}
BENCHMARK(BM_SkipgramEpoch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
