// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance --sample english_sample.txt --work DIR
//
// RGRAM_ENGLISH_SAMPLE overrides --sample. Artifacts of the English runs
// (grammar, segmentation, vectors, neighbor lists) are left in DIR.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "rgram/corpus.hpp"
#include "rgram/embed.hpp"
#include "rgram/error.hpp"
#include "rgram/eval.hpp"
#include "rgram/grammar.hpp"
#include "rgram/repair.hpp"
#include "rgram/stats.hpp"

namespace fs = std::filesystem;
using namespace rgram;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int n, const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << n << ' ' << name;
    if (!v.detail.empty()) std::cout << " (" << v.detail << ')';
    std::cout << std::endl;
    if (!v.pass) ++failures;
}

void run_criterion(int n, const std::string& name, const std::function<Verdict()>& body) {
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    report(n, name, v);
}

template <typename F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string collapse_runs(const std::string& s, char sep = '\n') {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!(c == sep && !out.empty() && out.back() == sep)) out.push_back(c);
    return out;
}

// Prefix of at least `bytes` bytes, extended to the next newline.
std::string prefix_lines(const std::string& text, std::size_t bytes) {
    if (bytes >= text.size()) return text;
    const std::size_t nl = text.find('\n', bytes);
    return text.substr(0, nl == std::string::npos ? text.size() : nl + 1);
}

std::string random_text(std::mt19937_64& rng, std::size_t length) {
    static const char32_t pool[] = {U'a', U'b', U'c', U'A', U'Q', U' ', U' ', U'_', U'\\', U'\n', U'\n', U'\t',
                                    U'\r', U'é', U'É', U'ß', U'β', U'Σ', U'α', U'中', U'😀', U'𝔸', U'Ж', U'0', U'7'};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
    std::u32string s;
    for (std::size_t i = 0; i < length; ++i) s.push_back(pool[pick(rng)]);
    return to_utf8(s);
}

// --- 1 ----------------------------------------------------------------------

Verdict two_merge_fixture() {
    const EncodedCorpus c = encode("βββαβββαβββ");
    StopCriteria stop;
    stop.max_merges = 2;
    const TrainResult r = train(c.sequence, c.terminals, stop);
    const SymbolId beta = *c.terminals.find(U'β'), alpha = *c.terminals.find(U'α');
    const std::vector<Rule> want_rules{{2, beta, beta, 3}, {3, 2, beta, 3}};
    const std::vector<SymbolId> want_seq{3, alpha, 3, alpha, 3};
    const bool ok = r.grammar.rules() == want_rules && r.compressed.symbols == want_seq &&
                    decode(r.grammar, r.compressed) == "βββαβββαβββ" && r.grammar.expand(3) == "βββ";
    std::ostringstream seq;
    for (SymbolId s : r.compressed.symbols) seq << s << ' ';
    return {ok, "rules " + std::to_string(r.grammar.rules().size()) + ", sequence " + seq.str()};
}

// --- 2 ----------------------------------------------------------------------

Verdict engine_matches_naive() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> alpha(2, 16), len(0, 2000);
    const std::uint64_t mins[] = {2, 3, 4};
    int trials = 0, mismatches = 0;
    for (int t = 0; t < 240; ++t) {
        const std::size_t a = alpha(rng), n = len(rng);
        // Skewed symbol draws give long runs and many ties.
        std::uniform_int_distribution<std::size_t> sym(0, a - 1);
        std::bernoulli_distribution repeat(t % 3 == 0 ? 0.5 : 0.0), cut(t % 4 == 0 ? 0.02 : 0.0);
        BoundedSequence seq;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0 && cut(rng)) seq.mark_boundary();
            seq.symbols.push_back(i > 0 && repeat(rng) ? seq.symbols.back() : static_cast<SymbolId>(sym(rng)));
        }
        std::vector<char32_t> cps;
        for (std::size_t k = 0; k < a; ++k) cps.push_back(U'a' + static_cast<char32_t>(k));
        const TerminalTable table(cps);
        StopCriteria stop;
        stop.min_frequency = mins[t % 3];
        const TrainResult fast = train(seq, table, stop);
        const TrainResult slow = train_naive(seq, table, stop);
        ++trials;
        if (fast.log != slow.log || !(fast.grammar == slow.grammar) || !(fast.compressed == slow.compressed))
            ++mismatches;
    }
    return {trials >= 200 && mismatches == 0,
            std::to_string(trials) + " inputs, " + std::to_string(mismatches) + " mismatches"};
}

// --- 3 ----------------------------------------------------------------------

Verdict round_trips(const std::string* sample) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(0, 300);
    const NormalizationOptions opts;
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string s = normalize(random_text(rng, len(rng)), opts);
        const EncodedCorpus c = encode(s);
        const TrainResult r = train(c.sequence, c.terminals, StopCriteria{});
        if (decode(r.grammar, r.compressed) != collapse_runs(s)) ++bad;
        const std::string t = collapse_runs(normalize(random_text(rng, len(rng)), opts));
        const Segmentation seg = apply_text(r.grammar, t);
        if (decode(r.grammar, seg.sequence, U'\n', seg.unknown) != t) ++bad;
    }
    std::string detail = "1000 random strings, " + std::to_string(bad) + " failures";
    if (!sample) return {false, detail + "; no English sample"};

    const std::string text = collapse_runs(normalize(prefix_lines(*sample, 1 << 20), opts));
    const EncodedCorpus c = encode(text);
    const TrainResult r = train(c.sequence, c.terminals, StopCriteria{});
    const bool file_ok = decode(r.grammar, r.compressed) == text;
    const std::string other =
        collapse_runs(normalize(prefix_lines(sample->substr(std::min(sample->size(), std::size_t{5} << 20)), 1 << 20), opts));
    const Segmentation seg = apply_text(r.grammar, other);
    const bool apply_ok = decode(r.grammar, seg.sequence, U'\n', seg.unknown) == other;
    detail += "; " + std::to_string(text.size()) + "-byte file train " + (file_ok ? "ok" : "MISMATCH") + ", apply to " +
              std::to_string(other.size()) + " bytes " + (apply_ok ? "ok" : "MISMATCH");
    return {bad == 0 && file_ok && apply_ok && text.size() >= (1u << 20), detail};
}

// --- 4 ----------------------------------------------------------------------

Verdict scaling(const std::string& sample) {
    const NormalizationOptions opts;
    auto best_time = [&](std::size_t bytes) {
        const EncodedCorpus c = encode(normalize(prefix_lines(sample, bytes), opts));
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep)
            best = std::min(best, seconds([&] { train(c.sequence, c.terminals, StopCriteria{}); }));
        return best;
    };
    const double t1 = best_time(1'000'000), t4 = best_time(4'000'000);
    const double ratio = t4 / t1;
    return {ratio <= 6.0, "1 MB " + fmt("%.3f", t1) + " s, 4 MB " + fmt("%.3f", t4) + " s, ratio " + fmt("%.2f", ratio)};
}

// --- 5, 6, 9: one training run on the full sample ------------------------------

struct EnglishRun {
    Grammar grammar20k;
    BoundedSequence compressed20k;
    std::size_t total_merges = 0;
    std::size_t increases = 0;
    std::size_t checkpoint_mismatches = 0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> rank1;  // checkpoint, rank-1 count
    double seconds = 0.0;
};

EnglishRun train_sample(const std::string& path) {
    EnglishRun out;
    const std::vector<std::string> paths{path};
    const EncodedCorpus corpus = read_corpus(paths, NormalizationOptions{});
    const std::set<std::uint64_t> checkpoints{0, 100, 1000, 10000};
    out.seconds = seconds([&] {
        MergeEngine engine(corpus.sequence, corpus.terminals.size(), 2);
        StopCriteria stop;
        // Counts only change for the three symbols a merge touches, so a lazy
        // max-heap tracks the maximum exactly.
        using Entry = std::pair<std::uint64_t, SymbolId>;
        std::priority_queue<Entry> heap;
        auto counts = engine.symbol_counts();
        for (SymbolId s = 0; s < counts.size(); ++s) heap.push({counts[s], s});
        auto current_max = [&] {
            auto c = engine.symbol_counts();
            while (!heap.empty() && heap.top().first != c[heap.top().second]) heap.pop();
            return heap.empty() ? 0 : heap.top().first;
        };
        std::uint64_t previous = current_max();
        auto at_checkpoint = [&] {
            const std::uint64_t m = current_max();
            const BoundedSequence seq = engine.sequence();
            const RankedDistribution d = rank_frequency(seq.symbols);
            if (d.entries.empty() || d.entries.front().count != m) ++out.checkpoint_mismatches;
            out.rank1.emplace_back(engine.merges(), d.entries.empty() ? 0 : d.entries.front().count);
        };
        at_checkpoint();
        while (auto e = engine.step(stop)) {
            auto c = engine.symbol_counts();
            heap.push({c[e->left], e->left});
            heap.push({c[e->right], e->right});
            heap.push({c[e->id], e->id});
            const std::uint64_t m = current_max();
            if (m > previous) ++out.increases;
            previous = m;
            if (checkpoints.count(engine.merges())) at_checkpoint();
            if (engine.merges() == 20000) {
                out.compressed20k = engine.sequence();
                out.grammar20k = Grammar(corpus.terminals);
                for (const MergeEvent& ev : engine.log()) out.grammar20k.add_rule(ev.left, ev.right, ev.count);
            }
        }
        out.total_merges = engine.merges();
    });
    return out;
}

Verdict monotone(const EnglishRun& run) {
    bool strict = run.rank1.size() == 4;
    std::string curve;
    for (std::size_t i = 0; i < run.rank1.size(); ++i) {
        if (i > 0 && run.rank1[i].second >= run.rank1[i - 1].second) strict = false;
        curve += (i ? ", " : "") + std::to_string(run.rank1[i].first) + ":" + std::to_string(run.rank1[i].second);
    }
    return {run.increases == 0 && strict && run.checkpoint_mismatches == 0,
            std::to_string(run.total_merges) + " merges, " + std::to_string(run.increases) +
                " increases, rank-1 counts " + curve};
}

bool internal_space(const std::string& s) {
    const std::size_t first = s.find_first_not_of(' ');
    if (first == std::string::npos) return false;
    const std::size_t last = s.find_last_not_of(' ');
    return s.find(' ', first) < last;
}

Verdict multiword(const EnglishRun& run) {
    const Grammar& g = run.grammar20k;
    if (g.rules().size() != 20000) return {false, "training stopped after " + std::to_string(run.total_merges) + " merges"};
    std::size_t multi = 0;
    std::vector<std::string> examples;
    for (const Rule& r : g.rules()) {
        const std::string s = g.expand(r.id);
        if (!internal_space(s)) continue;
        ++multi;
        if (examples.size() < 5) examples.push_back(escape_token(std::string_view(s)));
    }
    const double share = static_cast<double>(multi) / static_cast<double>(g.rules().size());
    std::string ex;
    for (const std::string& e : examples) ex += " " + e;
    return {share >= 0.01, std::to_string(multi) + " of 20000 rules (" + fmt("%.2f", 100 * share) + "%), first:" + ex};
}

// --- 7 ----------------------------------------------------------------------

SegmentedCorpus toy_corpus() {
    std::stringstream ss("the_\ncat\n_sat\nthe_\ndog\n_sat\nthe_\ncat\n_ran\n\na_\ndog\n_ran\nthe_\ncat\n_sat\n");
    return read_segmented(ss);
}

Verdict gradient_check() {
    const SegmentedCorpus corpus = toy_corpus();
    const EmbedVocab vocab = build_vocab(corpus);
    double worst = 0.0;
    for (bool subwords : {false, true}) {
        TrainConfig c;
        c.dim = 6;
        c.negatives = 4;
        c.subsample_threshold = 0;
        if (subwords) {
            c.subword_ngrams = SubwordRange{2, 4};
            c.buckets = 17;
        }
        BasicEmbeddingMatrix<double> m(vocab, c);
        std::mt19937_64 rng(subwords ? 5 : 3);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (double& x : m.output_data()) x = u(rng);
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(vocab.size() - 1));
        for (int trial = 0; trial < 20; ++trial) {
            const std::uint32_t center = pick(rng), context = pick(rng);
            std::vector<std::uint32_t> negs;
            for (std::size_t k = 0; k < c.negatives; ++k) negs.push_back(pick(rng));
            const PairGradient g = pair_gradient(m, center, context, negs);
            const double h = 1e-5;
            auto check = [&](std::vector<double>& data, std::size_t row, const std::vector<double>& analytic) {
                for (std::size_t d = 0; d < m.dim(); ++d) {
                    double& x = data[row * m.dim() + d];
                    const double saved = x;
                    x = saved + h;
                    const double up = pair_loss(m, center, context, negs);
                    x = saved - h;
                    const double down = pair_loss(m, center, context, negs);
                    x = saved;
                    const double numeric = (up - down) / (2 * h);
                    const double scale = std::max({std::abs(numeric), std::abs(analytic[d]), 1e-6});
                    worst = std::max(worst, std::abs(numeric - analytic[d]) / scale);
                }
            };
            for (const auto& [row, grad] : g.input) check(m.input_data(), row, grad);
            for (const auto& [row, grad] : g.output) check(m.output_data(), row, grad);
        }
    }

    TrainConfig c;
    c.negatives = 5;
    const BasicEmbeddingMatrix<double> fresh(vocab, c);
    const double want = 6 * std::numbers::ln2;
    double loss_error = 0.0;
    const std::vector<std::uint32_t> negs{0, 1, 2, 3, 4};
    for (std::uint32_t center = 0; center < vocab.size(); ++center)
        loss_error = std::max(loss_error, std::abs(pair_loss(fresh, center, (center + 1) % vocab.size(), negs) - want));
    return {worst < 1e-4 && loss_error < 1e-9,
            "max relative gradient error " + fmt("%.2e", worst) + ", initial loss error " + fmt("%.1e", loss_error)};
}

// --- 8 ----------------------------------------------------------------------

double oracle_cos(std::span<const float> u, std::span<const float> v) {
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += double(u[i]) * v[i];
        uu += double(u[i]) * u[i];
        vv += double(v[i]) * v[i];
    }
    return uv / std::sqrt(uu * vv);
}

std::vector<Neighbor> oracle_rank(const WordVectors& v, const std::vector<double>& target,
                                  const std::set<std::string>& exclude, std::size_t k) {
    std::vector<float> t(target.begin(), target.end());
    std::vector<Neighbor> all;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (exclude.count(v.token(i))) continue;
        double uv = 0, tt = 0, rr = 0;
        for (std::size_t d = 0; d < v.dim(); ++d) {
            uv += target[d] * v.row(i)[d];
            tt += target[d] * target[d];
            rr += double(v.row(i)[d]) * v.row(i)[d];
        }
        all.push_back({v.token(i), uv / std::sqrt(tt * rr)});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.cosine != b.cosine ? a.cosine > b.cosine : a.token < b.token;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                less += w < v[i];
                equal += w == v[i];
            }
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Verdict eval_oracles() {
    std::mt19937_64 rng(31);
    std::normal_distribution<float> gauss;
    std::size_t neighbor_bad = 0, analogy_bad = 0, queries = 0;
    double spearman_err = 0.0;
    for (std::size_t n : {10, 200, 1000}) {
        WordVectors v(16);
        std::vector<float> row(16);
        for (std::size_t i = 0; i < n; ++i) {
            for (float& x : row) x = gauss(rng);
            v.add("w" + std::to_string(i), row);
        }
        const NormalizedVectors nv(v);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int q = 0; q < 50; ++q, ++queries) {
            const std::string query = v.token(pick(rng));
            const std::span<const float> qrow = v.row(*v.find(query));
            const std::vector<double> target(qrow.begin(), qrow.end());
            const auto want = oracle_rank(v, target, {query}, 10);
            const auto got = nearest_neighbors(nv, query, 10).neighbors;
            bool same = want.size() == got.size();
            for (std::size_t i = 0; same && i < got.size(); ++i)
                same = want[i].token == got[i].token && std::abs(want[i].cosine - got[i].cosine) < 1e-12;
            neighbor_bad += !same;

            AnalogyQuery aq{v.token(pick(rng)), v.token(pick(rng)), v.token(pick(rng)), "", ""};
            std::vector<double> t(16, 0.0);
            for (const auto& [tok, sign] : {std::pair{aq.a, -1.0}, {aq.b, 1.0}, {aq.c, 1.0}}) {
                const std::span<const float> r = v.row(*v.find(tok));
                double norm = 0;
                for (float x : r) norm += double(x) * x;
                norm = std::sqrt(norm);
                for (std::size_t d = 0; d < 16; ++d) t[d] += sign * r[d] / norm;
            }
            const auto want_a = oracle_rank(v, t, {aq.a, aq.b, aq.c}, 5);
            const auto got_a = analogy(nv, aq, 5).neighbors;
            same = want_a.size() == got_a.size();
            for (std::size_t i = 0; same && i < got_a.size(); ++i)
                same = want_a[i].token == got_a[i].token && std::abs(want_a[i].cosine - got_a[i].cosine) < 1e-12;
            analogy_bad += !same;
        }

        std::vector<SimilarityPair> pairs;
        std::vector<double> gold, cos;
        std::uniform_int_distribution<int> score(0, 9);  // coarse scores force ties
        for (int p = 0; p < 300; ++p) {
            const std::size_t i = pick(rng), j = pick(rng);
            pairs.push_back({v.token(i), v.token(j), static_cast<double>(score(rng))});
            gold.push_back(pairs.back().gold);
            cos.push_back(oracle_cos(v.row(i), v.row(j)));
        }
        pairs.push_back({"missing", v.token(0), 3.0});
        const SimilarityResult r = similarity_suite(v, pairs);
        spearman_err = std::max(spearman_err, std::abs(r.spearman - oracle_spearman(cos, gold)));
        if (r.scored != 300 || r.total != 301) spearman_err = 1.0;
    }
    return {neighbor_bad == 0 && analogy_bad == 0 && spearman_err < 1e-12,
            std::to_string(queries) + " neighbor and analogy queries, " + std::to_string(neighbor_bad + analogy_bad) +
                " mismatches, spearman error " + fmt("%.1e", spearman_err)};
}

// --- 9 ----------------------------------------------------------------------

struct SmokeRun {
    WordVectors vectors;
    std::string neighbors;
    double seconds = 0.0;
};

SmokeRun smoke_embed(const SegmentedCorpus& corpus) {
    TrainConfig c;
    c.dim = 100;
    c.window = 2;
    c.negatives = 5;
    c.epochs = 5;
    c.seed = 7;
    c.threads = 1;
    SmokeRun out;
    EmbeddingMatrix m;
    out.seconds = seconds([&] { m = train_skipgram(corpus, c); });
    out.vectors = m.word_vectors();

    // Five most frequent tokens that contain a letter.
    std::vector<std::uint32_t> order(m.vocab().size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return m.vocab().count(a) > m.vocab().count(b); });
    const NormalizedVectors nv(out.vectors);
    std::ostringstream lists;
    int taken = 0;
    for (std::uint32_t i : order) {
        const std::string& tok = m.vocab().token(i);
        if (std::none_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isalpha(ch); })) continue;
        lists << escape_token(std::string_view(tok)) << ':';
        for (const Neighbor& nb : nearest_neighbors(nv, tok, 5).neighbors)
            lists << ' ' << escape_token(std::string_view(nb.token)) << ' ' << fmt("%.4f", nb.cosine);
        lists << '\n';
        if (++taken == 5) break;
    }
    out.neighbors = lists.str();
    return out;
}

Verdict smoke(const EnglishRun& run, std::size_t sample_bytes, const fs::path& work, WordVectors* keep) {
    if (run.grammar20k.rules().size() != 20000) return {false, "no 20000-merge segmentation"};
    const fs::path seg_path = work / "english_20k.seg";
    {
        std::ofstream out(seg_path, std::ios::binary);
        write_segmented(out, run.grammar20k, run.compressed20k);
    }
    const SegmentedCorpus corpus = read_segmented(seg_path.string());
    const SmokeRun first = smoke_embed(corpus);
    const SmokeRun second = smoke_embed(corpus);
    bool same_vectors = first.vectors.tokens() == second.vectors.tokens();
    for (std::size_t i = 0; same_vectors && i < first.vectors.size(); ++i)
        same_vectors = std::equal(first.vectors.row(i).begin(), first.vectors.row(i).end(), second.vectors.row(i).begin());
    write_file((work / "neighbors.txt").string(), first.neighbors);
    export_vectors(first.vectors, (work / "english_20k.vec").string());
    std::cout << first.neighbors;
    *keep = first.vectors;
    const bool lists = std::count(first.neighbors.begin(), first.neighbors.end(), '\n') == 5;
    return {sample_bytes >= 10'000'000 && same_vectors && first.neighbors == second.neighbors && lists,
            std::to_string(sample_bytes) + "-byte sample, " + std::to_string(corpus.tokens.size()) + " tokens, embed " +
                fmt("%.1f", first.seconds) + " s per run, runs " + (same_vectors ? "identical" : "DIFFER")};
}

// --- 10 ---------------------------------------------------------------------

Verdict file_round_trips(const Grammar& g, const WordVectors& v, const fs::path& work) {
    const fs::path gp = work / "english_20k.grammar";
    save_grammar(g, gp.string());
    const Grammar loaded = load_grammar(gp.string());
    std::ostringstream a, b;
    save_grammar(g, a);
    save_grammar(loaded, b);
    const bool grammar_ok = loaded == g && a.str() == b.str();

    // Random vectors cover magnitudes and signs the trained ones may not.
    WordVectors extra(7);
    std::mt19937_64 rng(41);
    std::normal_distribution<float> gauss;
    std::vector<float> row(7);
    for (int i = 0; i < 500; ++i) {
        for (float& x : row) x = gauss(rng) * std::pow(10.0f, static_cast<float>(static_cast<int>(rng() % 13) - 6));
        extra.add(to_utf8(std::u32string{U'w', static_cast<char32_t>(U'α' + i % 20), U' ', U'_'}) + std::to_string(i), row);
    }
    double worst = 0.0;
    for (const WordVectors* src : {&v, static_cast<const WordVectors*>(&extra)}) {
        std::stringstream ss;
        export_vectors(*src, ss);
        const WordVectors back = import_vectors(ss);
        if (back.tokens() != src->tokens() || back.dim() != src->dim()) return {false, "vector tokens differ"};
        for (std::size_t i = 0; i < src->size(); ++i)
            for (std::size_t d = 0; d < src->dim(); ++d) {
                const double x = src->row(i)[d], y = back.row(i)[d];
                worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(x)));
            }
    }
    return {grammar_ok && worst <= 1e-8, std::to_string(g.rules().size()) + "-rule grammar " +
                                             (grammar_ok ? "equal" : "DIFFERS") + ", max vector error " +
                                             fmt("%.1e", worst)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string sample_path;
    std::string work = "acceptance_work";
    app.add_option("--sample", sample_path, "English sample (at least 10 MB)");
    app.add_option("--work", work, "Directory for artifacts");
    CLI11_PARSE(app, argc, argv);
    if (const char* env = std::getenv("RGRAM_ENGLISH_SAMPLE"); env && *env) sample_path = env;
    fs::create_directories(work);

    std::optional<std::string> sample;
    if (!sample_path.empty() && fs::exists(sample_path)) sample = read_file(sample_path);

    run_criterion(1, "two-merge fixture", two_merge_fixture);
    run_criterion(2, "engine matches naive reference", engine_matches_naive);
    run_criterion(3, "round trips", [&] { return round_trips(sample ? &*sample : nullptr); });
    run_criterion(4, "near-linear scaling", [&]() -> Verdict {
        if (!sample) return {false, "no English sample"};
        return scaling(*sample);
    });

    EnglishRun english;
    std::string train_error;
    if (sample) {
        try {
            english = train_sample(sample_path);
            std::cout << "English sample: " << english.total_merges << " merges to exhaustion in "
                      << fmt("%.1f", english.seconds) << " s" << std::endl;
        } catch (const std::exception& e) {
            train_error = e.what();
        }
    }
    auto needs_sample = [&](const std::function<Verdict()>& body) {
        return [&, body]() -> Verdict {
            if (!sample) return {false, "no English sample at '" + sample_path + "'"};
            if (!train_error.empty()) return {false, "training failed: " + train_error};
            return body();
        };
    };
    run_criterion(5, "monotone max frequency", needs_sample([&] { return monotone(english); }));
    run_criterion(6, "multi-word r-grams", needs_sample([&] { return multiword(english); }));
    run_criterion(7, "skipgram gradient check", gradient_check);
    run_criterion(8, "evaluation matches brute force", eval_oracles);
    WordVectors vectors;
    run_criterion(9, "fixed-seed smoke run",
                  needs_sample([&] { return smoke(english, sample->size(), work, &vectors); }));
    run_criterion(10, "grammar and vector file round trips", [&] {
        return file_round_trips(english.grammar20k, vectors, work);
    });
    return failures ? 1 : 0;
}
