// rgram: learn r-gram segmentations, apply and invert them, measure the
// frequency flattening, and train and evaluate embeddings on the result.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "rgram/corpus.hpp"
#include "rgram/embed.hpp"
#include "rgram/error.hpp"
#include "rgram/eval.hpp"
#include "rgram/grammar.hpp"
#include "rgram/repair.hpp"
#include "rgram/stats.hpp"

namespace {

using namespace rgram;

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kData = 3 };

struct Normalization {
    std::string separators = "\\n";
    bool no_lowercase = false;
    bool digits_to_n = false;

    NormalizationOptions options() const {
        NormalizationOptions o;
        o.lowercase = !no_lowercase;
        o.digits_to_N = digits_to_n;
        return o;
    }

    SeparatorSet separator_set() const {
        const std::u32string raw = decode_utf8(unescape_separators(separators));
        if (raw.empty()) throw DomainError("--separators must name at least one character");
        return SeparatorSet(raw);
    }

    static std::string unescape_separators(const std::string& s) {
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '\\' || i + 1 == s.size()) {
                out += s[i];
                continue;
            }
            switch (s[++i]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '\\': out += '\\'; break;
                default: throw DomainError(std::string("unknown escape in --separators: \\") + s[i]);
            }
        }
        return out;
    }

    void add_to(CLI::App* app) {
        app->add_option("--separators", separators,
                        "Characters that end a segment; \\n, \\t, \\r and \\\\ are understood")
            ->capture_default_str();
        app->add_flag("--no-lowercase", no_lowercase, "Keep letter case");
        app->add_flag("--digits-to-n", digits_to_n, "Replace the digits 0-9 with N");
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::uint64_t> parse_checkpoints(const std::string& list) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.front() == '-') throw DomainError("bad checkpoint '" + item + "'");
        out.push_back(v);
    }
    if (!std::is_sorted(out.begin(), out.end())) throw DomainError("checkpoints must be ascending");
    return out;
}

// Tokens covering the first `chars` characters, in the display style of a
// merge table: tokens separated by spaces, spaces inside tokens as `_`.
std::string preview(const Grammar& g, const BoundedSequence& seq, std::size_t chars) {
    std::string out;
    std::size_t shown = 0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < seq.size() && shown < chars; ++i) {
        while (next < seq.boundaries.size() && seq.boundaries[next] == i) {
            if (i > 0) {
                out += out.empty() ? "\\n" : " \\n";
                ++shown;
            }
            ++next;
        }
        if (!out.empty()) out += ' ';
        const std::u32string text = g.expand32(seq.symbols[i]);
        shown += text.size();
        out += escape_token(text);
    }
    return out;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> inputs;
    std::string grammar_out;
    std::string segmented_out;
    std::string ids_out;
    std::uint64_t min_freq = 2;
    std::uint64_t max_vocab = 0;
    std::uint64_t max_merges = 0;
    std::string checkpoints;
    std::string checkpoint_dump;
    std::string merge_log;
    std::size_t preview_chars = 80;
    Normalization norm;
};

int cmd_train(const TrainArgs& a, bool has_max_vocab, bool has_max_merges) {
    StopCriteria stop;
    stop.min_frequency = a.min_freq;
    if (has_max_vocab) stop.max_vocabulary = a.max_vocab;
    if (has_max_merges) stop.max_merges = a.max_merges;
    stop.validate();
    const std::vector<std::uint64_t> checkpoints = parse_checkpoints(a.checkpoints);
    if (!a.checkpoint_dump.empty() && checkpoints.empty())
        throw DomainError("--checkpoint-dump needs --checkpoints");
    const SeparatorSet seps = a.norm.separator_set();

    const EncodedCorpus corpus = read_corpus(a.inputs, a.norm.options(), seps);
    std::cerr << "read " << corpus.sequence.size() << " symbols, " << corpus.terminals.size() << " terminals, "
              << corpus.sequence.boundaries.size() << " boundaries\n";

    MergeEngine engine(corpus.sequence, corpus.terminals.size(), stop.min_frequency);
    Grammar grammar(corpus.terminals);
    auto sync = [&] {
        for (std::size_t k = grammar.rules().size(); k < engine.log().size(); ++k) {
            const MergeEvent& e = engine.log()[k];
            grammar.add_rule(e.left, e.right, e.count);
        }
    };

    std::ofstream dump;
    if (!a.checkpoint_dump.empty()) dump = open_out(a.checkpoint_dump);
    for (std::uint64_t cp : checkpoints) {
        StopCriteria until = stop;
        until.max_merges = stop.max_merges ? std::min(*stop.max_merges, cp) : cp;
        engine.run(until);
        sync();
        if (dump.is_open())
            dump << cp << '\t' << engine.merges() << '\t' << preview(grammar, engine.sequence(), a.preview_chars)
                 << '\n';
    }
    engine.run(stop);
    sync();
    if (dump.is_open()) finish_out(dump, a.checkpoint_dump);

    const BoundedSequence compressed = engine.sequence();
    save_grammar(grammar, a.grammar_out);
    if (!a.segmented_out.empty()) {
        std::ofstream out = open_out(a.segmented_out);
        write_segmented(out, grammar, compressed);
        finish_out(out, a.segmented_out);
    }
    if (!a.ids_out.empty()) {
        std::ofstream out = open_out(a.ids_out);
        write_ids(out, compressed);
        finish_out(out, a.ids_out);
    }
    if (!a.merge_log.empty()) {
        std::ofstream out = open_out(a.merge_log);
        out << "id\tleft\tright\tcount\ttoken\n";
        for (const Rule& r : grammar.rules())
            out << r.id << '\t' << r.left << '\t' << r.right << '\t' << r.freq_at_merge << '\t'
                << escape_token(grammar.expand32(r.id)) << '\n';
        finish_out(out, a.merge_log);
    }
    if (!corpus.sequence.empty()) {
        const CompressionRatio ratio =
            compression_ratio(corpus.sequence.size(), compressed.size(), grammar.rules().size());
        std::cerr << "merges " << grammar.rules().size() << ", vocabulary " << grammar.symbol_count()
                  << ", length " << corpus.sequence.size() << " -> " << compressed.size() << " (ratio "
                  << ratio.sequence_ratio << ", net " << ratio.net_ratio << ")\n";
    }
    return kOk;
}

// --- apply / decode -----------------------------------------------------------

struct ApplyArgs {
    std::string grammar;
    std::string input;
    std::string output;
    std::string format = "tokens";
    bool strict = false;
    Normalization norm;
};

// Streams the input through the grammar in batches of whole segments. A run
// of k separator characters becomes k blank lines, so decode restores the
// text exactly when the separator set is a single character.
int cmd_apply(const ApplyArgs& a) {
    const bool ids = a.format == "ids";
    const Grammar g = load_grammar(a.grammar);
    const SeparatorSet seps = a.norm.separator_set();
    const NormalizationOptions opts = a.norm.options();

    std::ifstream in(a.input, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.input);
    std::ofstream out = open_out(a.output);

    std::unordered_map<char32_t, SymbolId> unknown_ids;
    std::vector<char32_t> unknown;
    std::uint64_t unknown_occurrences = 0;
    std::unordered_map<SymbolId, std::string> rendered;

    // The batch holds whole segments; separator runs are remembered as
    // (position, length) so they can be written back in place.
    BoundedSequence batch;
    std::vector<std::size_t> run_lengths;
    std::size_t pending_run = 0;
    auto flush_batch = [&](bool final) {
        if (batch.empty() && run_lengths.empty() && !(final && pending_run)) return;
        const BoundedSequence done = apply(g, batch);
        std::size_t next = 0;
        auto write_runs = [&](std::size_t pos) {
            while (next < done.boundaries.size() && done.boundaries[next] == pos) {
                for (std::size_t k = 0; k < run_lengths[next]; ++k) out << '\n';
                ++next;
            }
        };
        for (std::size_t i = 0; i < done.size(); ++i) {
            write_runs(i);
            const SymbolId id = done.symbols[i];
            if (ids) {
                out << id << '\n';
                continue;
            }
            auto it = rendered.find(id);
            if (it == rendered.end()) {
                const std::u32string text =
                    g.contains(id) ? g.expand32(id) : std::u32string(1, unknown[id - g.symbol_count()]);
                it = rendered.emplace(id, escape_token(text)).first;
            }
            out << it->second << '\n';
        }
        write_runs(done.size());
        if (final)
            for (std::size_t k = 0; k < pending_run; ++k) out << '\n';
        batch = {};
        run_lengths.clear();
    };

    std::string buffer(kDefaultChunkBytes, '\0');
    std::string carry;
    std::size_t offset = 0;
    std::u32string decoded;
    auto consume = [&](char32_t cp) {
        cp = normalize(std::u32string_view(&cp, 1), opts)[0];
        if (seps.contains(cp)) {
            ++pending_run;
            return;
        }
        if (pending_run) {
            batch.boundaries.push_back(batch.size());
            run_lengths.push_back(pending_run);
            pending_run = 0;
            if (batch.size() >= (1u << 20)) {
                // Close the batch at this boundary; the run is written before the next token.
                const std::size_t run = run_lengths.back();
                batch.boundaries.pop_back();
                run_lengths.pop_back();
                flush_batch(false);
                batch.boundaries.push_back(0);
                run_lengths.push_back(run);
            }
        }
        SymbolId id;
        if (auto t = g.terminals().find(cp)) {
            id = *t;
        } else {
            if (a.strict) throw DataError("character U+" + [&] {
                char hex[16];
                std::snprintf(hex, sizeof hex, "%04X", static_cast<unsigned>(cp));
                return std::string(hex);
            }() + " is not in the grammar (--strict)");
            auto [it, inserted] = unknown_ids.try_emplace(cp, static_cast<SymbolId>(g.symbol_count() + unknown.size()));
            if (inserted) unknown.push_back(cp);
            ++unknown_occurrences;
            if (ids) throw DataError("the ids format cannot carry characters outside the grammar; use --format tokens");
            id = it->second;
        }
        batch.symbols.push_back(id);
    };
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        carry.append(buffer.data(), got);
        decoded = decode_utf8(std::string_view(carry).substr(0, [&] {
            // Hold back an incomplete trailing sequence for the next read.
            std::size_t end = carry.size();
            std::size_t back = 0;
            while (back < 3 && end > back && (static_cast<unsigned char>(carry[end - 1 - back]) & 0xC0) == 0x80) ++back;
            if (end > back) {
                const auto lead = static_cast<unsigned char>(carry[end - 1 - back]);
                const std::size_t need = lead >= 0xF0 ? 4 : lead >= 0xE0 ? 3 : lead >= 0xC0 ? 2 : 1;
                if (need > back + 1 && lead >= 0xC0) return end - 1 - back;
            }
            return end;
        }()), offset);
        const std::size_t used = to_utf8(decoded).size();
        offset += used;
        carry.erase(0, used);
        for (char32_t cp : decoded) consume(cp);
    }
    if (in.bad()) throw IoError("read failed: " + a.input);
    if (!carry.empty()) decode_utf8(carry, offset);
    flush_batch(true);
    finish_out(out, a.output);
    if (unknown_occurrences)
        std::cerr << unknown_occurrences << " occurrences of " << unknown.size()
                  << " characters outside the grammar passed through\n";
    return kOk;
}

struct DecodeArgs {
    std::string grammar;
    std::string input;
    std::string output;
    std::string format = "tokens";
    std::string separator = "\\n";
};

int cmd_decode(const DecodeArgs& a) {
    const std::u32string sep32 = decode_utf8(Normalization::unescape_separators(a.separator));
    if (sep32.size() != 1) throw DomainError("--separator must be exactly one character");
    std::string sep;
    append_utf8(sep, sep32[0]);

    std::ifstream in(a.input, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.input);
    std::ofstream out = open_out(a.output);
    std::string line;
    std::size_t number = 0;
    if (a.format == "tokens") {
        while (std::getline(in, line)) {
            ++number;
            if (line.empty())
                out << sep;
            else
                out << unescape_token(line, number);
        }
    } else {
        if (a.grammar.empty()) throw DomainError("--format ids needs --grammar");
        const Grammar g = load_grammar(a.grammar);
        std::unordered_map<SymbolId, std::string> cache;
        while (std::getline(in, line)) {
            ++number;
            if (line.empty()) {
                out << sep;
                continue;
            }
            SymbolId id = 0;
            const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
            if (ec != std::errc() || ptr != line.data() + line.size()) throw ParseError(number, "bad symbol id");
            auto it = cache.find(id);
            if (it == cache.end()) it = cache.emplace(id, g.expand(id)).first;
            out << it->second;
        }
    }
    if (in.bad()) throw IoError("read failed: " + a.input);
    finish_out(out, a.output);
    return kOk;
}

// --- stats --------------------------------------------------------------------

struct StatsArgs {
    std::vector<std::string> inputs;
    std::string grammar;
    bool segmented = false;
    std::string checkpoints = "0";
    std::uint64_t min_freq = 2;
    std::size_t top_k = 100;
    std::string output;
    std::string summary;
    Normalization norm;
};

void emit(const StatsArgs& a, const CheckpointCurves& curves,
          const std::function<void(std::ostream&)>& write_curves) {
    if (a.output.empty()) {
        write_curves(std::cout);
    } else {
        std::ofstream out = open_out(a.output);
        write_curves(out);
        finish_out(out, a.output);
    }
    if (a.summary.empty()) {
        write_summary_tsv(std::cerr, curves);
    } else {
        std::ofstream out = open_out(a.summary);
        write_summary_tsv(out, curves);
        finish_out(out, a.summary);
    }
}

int cmd_stats(const StatsArgs& a) {
    if (a.segmented) {
        if (a.inputs.size() != 1) throw DomainError("--segmented takes exactly one input file");
        const SegmentedCorpus s = read_segmented(a.inputs[0]);
        const RankedDistribution d = rank_frequency(s.tokens);
        CheckpointCurves curves;
        CheckpointSummary summary;
        if (!d.entries.empty()) summary.flatness = flatness(d);
        curves.summaries.push_back(summary);
        emit(a, curves, [&](std::ostream& out) {
            out << "checkpoint\trank\ttoken\tcount\n";
            for (std::size_t k = 0; k < std::min(a.top_k, d.entries.size()); ++k)
                out << "final\t" << k + 1 << '\t' << escape_token(std::string_view(s.types[d.entries[k].token]))
                    << '\t' << d.entries[k].count << '\n';
        });
        return kOk;
    }

    const std::vector<std::uint64_t> checkpoints = parse_checkpoints(a.checkpoints);
    if (checkpoints.empty()) throw DomainError("--checkpoints is empty");
    const EncodedCorpus corpus = read_corpus(a.inputs, a.norm.options(), a.norm.separator_set());
    if (a.grammar.empty()) {
        const CheckpointCurves curves = checkpoint_curves(corpus, checkpoints, a.min_freq, a.top_k);
        emit(a, curves, [&](std::ostream& out) { write_curves_tsv(out, curves); });
        return kOk;
    }

    // With a grammar, checkpoint k replays its first k rules on the input.
    const Grammar full = load_grammar(a.grammar);
    CheckpointCurves curves;
    curves.grammar = Grammar(full.terminals());
    BoundedSequence seq;
    seq.boundaries = corpus.sequence.boundaries;
    seq.doc_ids = corpus.sequence.doc_ids;
    seq.symbols.reserve(corpus.sequence.size());
    std::vector<char32_t> unknown;
    std::unordered_map<SymbolId, SymbolId> unknown_of;
    for (SymbolId t : corpus.sequence.symbols) {
        const char32_t cp = corpus.terminals.code_point(t);
        if (auto id = full.terminals().find(cp)) {
            seq.symbols.push_back(*id);
            continue;
        }
        auto [it, inserted] = unknown_of.try_emplace(t, static_cast<SymbolId>(full.symbol_count() + unknown.size()));
        if (inserted) unknown.push_back(cp);
        seq.symbols.push_back(it->second);
    }
    std::vector<std::string> rendered;
    for (std::uint64_t cp : checkpoints) {
        const std::size_t k = std::min<std::size_t>(cp, full.rules().size());
        for (std::size_t r = curves.grammar.rules().size(); r < k; ++r) {
            const Rule& rule = full.rules()[r];
            curves.grammar.add_rule(rule.left, rule.right, rule.freq_at_merge);
        }
        // Unknown ids sit past every rule, so shift them onto the truncated grammar.
        const std::size_t limit = curves.grammar.symbol_count();
        BoundedSequence shifted = seq;
        for (SymbolId& s : shifted.symbols)
            if (s >= full.symbol_count()) s = static_cast<SymbolId>(s - full.symbol_count() + limit);
        const BoundedSequence applied = apply(curves.grammar, shifted);
        const RankedDistribution d = rank_frequency(applied.symbols);
        for (std::size_t i = 0; i < std::min(a.top_k, d.entries.size()); ++i) {
            const SymbolId t = d.entries[i].token;
            curves.points.push_back({cp, i + 1, t, d.entries[i].count});
            rendered.push_back(escape_token(t < limit ? curves.grammar.expand32(t)
                                                      : std::u32string(1, unknown[t - limit])));
        }
        CheckpointSummary s;
        s.checkpoint = cp;
        s.merges = k;
        s.exhausted = k < cp;
        if (!d.entries.empty()) s.flatness = flatness(d);
        curves.summaries.push_back(s);
    }
    emit(a, curves, [&](std::ostream& out) {
        out << "checkpoint\trank\ttoken\tcount\n";
        for (std::size_t i = 0; i < curves.points.size(); ++i) {
            const CurvePoint& p = curves.points[i];
            out << p.checkpoint << '\t' << p.rank << '\t' << rendered[i] << '\t' << p.count << '\n';
        }
    });
    return kOk;
}

// --- embed --------------------------------------------------------------------

struct EmbedArgs {
    std::string input;
    std::string output;
    TrainConfig config;
    std::string subwords;
};

int cmd_embed(EmbedArgs a) {
    if (!a.subwords.empty()) {
        unsigned lo = 0, hi = 0;
        char comma = 0;
        std::istringstream ss(a.subwords);
        if (!(ss >> lo >> comma >> hi) || comma != ',' || !ss.eof())
            throw DomainError("--subwords expects MIN,MAX");
        a.config.subword_ngrams = SubwordRange{lo, hi};
    }
    a.config.validate();
    const SegmentedCorpus corpus = read_segmented(a.input);
    TrainReport report;
    const EmbeddingMatrix m = train_skipgram(corpus, a.config, &std::cerr, &report);
    export_vectors(m.word_vectors(), a.output);
    std::cerr << "vocabulary " << m.vocab().size() << ", pairs " << report.pairs << '\n';
    return kOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
    std::string vectors;
    std::vector<std::string> queries;
    std::size_t k = 5;
    std::string suite;
    std::string pairs;
    bool no_lowercase = false;
};

std::string query_form(const std::string& raw, bool lowercase) {
    std::string t = unescape_token(raw);
    if (lowercase) {
        NormalizationOptions o;
        t = normalize(t, o);
    }
    return embedding_form(t);
}

int cmd_neighbors(const EvalArgs& a) {
    const WordVectors v = import_vectors(a.vectors);
    const NormalizedVectors nv(v);
    std::cout << "query\trank\ttoken\tcosine\n";
    for (const std::string& raw : a.queries) {
        const std::string q = query_form(raw, !a.no_lowercase);
        const NeighborResult r = nearest_neighbors(nv, q, a.k);
        if (!r.found()) {
            std::cout << escape_token(std::string_view(q)) << "\tOOV\t\t\n";
            continue;
        }
        for (std::size_t i = 0; i < r.neighbors.size(); ++i)
            std::cout << escape_token(std::string_view(q)) << '\t' << i + 1 << '\t'
                      << escape_token(std::string_view(r.neighbors[i].token)) << '\t' << std::fixed
                      << std::setprecision(4) << r.neighbors[i].cosine << std::defaultfloat << '\n';
    }
    return kOk;
}

int cmd_analogy(const EvalArgs& a) {
    const WordVectors v = import_vectors(a.vectors);
    std::vector<AnalogyQuery> queries = read_analogies(a.suite);
    for (AnalogyQuery& q : queries)
        for (std::string* t : {&q.a, &q.b, &q.c, &q.gold}) *t = query_form(escape_token(std::string_view(*t)), !a.no_lowercase);
    const SuiteResult r = analogy_suite(v, queries);

    struct Section {
        std::size_t total = 0, attempted = 0, correct = 0;
    };
    std::vector<std::pair<std::string, Section>> sections;
    for (const AnalogyOutcome& o : r.outcomes) {
        if (sections.empty() || sections.back().first != o.query.section) sections.push_back({o.query.section, {}});
        Section& s = sections.back().second;
        ++s.total;
        s.attempted += o.attempted;
        s.correct += o.correct;
    }
    std::cout << "section\ttotal\tattempted\tcorrect\tscore\tcoverage\n";
    auto line = [](const std::string& name, std::size_t total, std::size_t attempted, std::size_t correct) {
        std::cout << (name.empty() ? "-" : name) << '\t' << total << '\t' << attempted << '\t' << correct << '\t'
                  << (attempted ? static_cast<double>(correct) / static_cast<double>(attempted) : 0.0) << '\t'
                  << static_cast<double>(attempted) / static_cast<double>(total) << '\n';
    };
    for (const auto& [name, s] : sections) line(name, s.total, s.attempted, s.correct);
    line("all", r.total, r.attempted, r.correct);
    std::size_t near = 0;
    for (const AnalogyOutcome& o : r.outcomes)
        if (o.near_synonym) {
            if (near++ == 0) std::cout << "\nnear-synonym top-1 answers (gold inside the candidate)\n";
            std::cout << escape_token(std::string_view(o.query.a)) << ' ' << escape_token(std::string_view(o.query.b))
                      << ' ' << escape_token(std::string_view(o.query.c)) << '\t'
                      << escape_token(std::string_view(o.query.gold)) << '\t'
                      << escape_token(std::string_view(o.top1)) << '\n';
        }
    return kOk;
}

int cmd_similarity(const EvalArgs& a) {
    const WordVectors v = import_vectors(a.vectors);
    std::vector<SimilarityPair> pairs = read_similarity(a.pairs);
    for (SimilarityPair& p : pairs) {
        p.t1 = query_form(escape_token(std::string_view(p.t1)), !a.no_lowercase);
        p.t2 = query_form(escape_token(std::string_view(p.t2)), !a.no_lowercase);
    }
    const SimilarityResult r = similarity_suite(v, pairs);
    std::cout << "spearman\t" << std::setprecision(12) << r.spearman << "\ncoverage\t" << r.coverage << "\nscored\t"
              << r.scored << "\ntotal\t" << r.total << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"r-gram segmentation, statistics and embeddings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rgram 1.0");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Learn a grammar from UTF-8 text");
    train->add_option("inputs", train_args.inputs, "Input text files (a boundary separates files)")
        ->required();
    train->add_option("-g,--grammar-out", train_args.grammar_out, "Grammar file to write")->required();
    train->add_option("-s,--segmented-out", train_args.segmented_out, "Segmented corpus to write");
    train->add_option("--ids-out", train_args.ids_out, "Compressed sequence as one symbol id per line");
    train->add_option("--min-freq", train_args.min_freq, "Stop when the best pair occurs fewer times")
        ->capture_default_str();
    auto* max_vocab = train->add_option("--max-vocab", train_args.max_vocab, "Stop at this many symbols (terminals + rules)");
    auto* max_merges = train->add_option("--max-merges", train_args.max_merges, "Stop after this many merges");
    train->add_option("--checkpoints", train_args.checkpoints, "Comma-separated merge counts to report, ascending");
    train->add_option("--checkpoint-dump", train_args.checkpoint_dump,
                      "Write the segmentation of the first characters at each checkpoint");
    train->add_option("--preview-chars", train_args.preview_chars, "Characters shown per checkpoint")
        ->capture_default_str();
    train->add_option("--merge-log", train_args.merge_log, "Write every merge as TSV");
    train_args.norm.add_to(train);

    ApplyArgs apply_args;
    auto* apply_cmd = app.add_subcommand("apply", "Segment text with a learned grammar");
    apply_cmd->add_option("-g,--grammar", apply_args.grammar, "Grammar file")->required();
    apply_cmd->add_option("input", apply_args.input, "Input text")->required();
    apply_cmd->add_option("-o,--output", apply_args.output, "Segmented output")->required();
    apply_cmd->add_option("--format", apply_args.format, "tokens or ids")
        ->check(CLI::IsMember({"tokens", "ids"}))
        ->capture_default_str();
    apply_cmd->add_flag("--strict", apply_args.strict, "Fail on characters outside the grammar");
    apply_args.norm.add_to(apply_cmd);

    DecodeArgs decode_args;
    auto* decode_cmd = app.add_subcommand("decode", "Restore text from a segmented file");
    decode_cmd->add_option("-g,--grammar", decode_args.grammar, "Grammar file (needed for --format ids)");
    decode_cmd->add_option("input", decode_args.input, "Segmented input")->required();
    decode_cmd->add_option("-o,--output", decode_args.output, "Text output")->required();
    decode_cmd->add_option("--format", decode_args.format, "tokens or ids")
        ->check(CLI::IsMember({"tokens", "ids"}))
        ->capture_default_str();
    decode_cmd->add_option("--separator", decode_args.separator, "Character written for each boundary")
        ->capture_default_str();

    StatsArgs stats_args;
    auto* stats = app.add_subcommand("stats", "Rank-frequency curves and flatness");
    stats->add_option("inputs", stats_args.inputs, "Raw text files, or one segmented file with --segmented")
        ->required();
    stats->add_flag("--segmented", stats_args.segmented, "Input is a segmented corpus");
    stats->add_option("-g,--grammar", stats_args.grammar, "Replay this grammar instead of training");
    stats->add_option("--checkpoints", stats_args.checkpoints, "Comma-separated merge counts, ascending")
        ->capture_default_str();
    stats->add_option("--min-freq", stats_args.min_freq, "Minimum pair frequency when training")
        ->capture_default_str();
    stats->add_option("--top-k", stats_args.top_k, "Ranks reported per checkpoint")->capture_default_str();
    stats->add_option("-o,--output", stats_args.output, "Curve TSV (default: stdout)");
    stats->add_option("--summary", stats_args.summary, "Flatness TSV (default: stderr)");
    stats_args.norm.add_to(stats);

    EmbedArgs embed_args;
    auto* embed = app.add_subcommand("embed", "Train skipgram embeddings on a segmented corpus");
    embed->add_option("input", embed_args.input, "Segmented corpus")->required();
    embed->add_option("-o,--output", embed_args.output, "Vector file")->required();
    embed->add_option("--dim", embed_args.config.dim, "Vector dimension")->capture_default_str();
    embed->add_option("--window", embed_args.config.window, "Context window on each side")->capture_default_str();
    embed->add_option("--negatives", embed_args.config.negatives, "Negative samples per pair")->capture_default_str();
    embed->add_option("--epochs", embed_args.config.epochs, "Passes over the corpus")->capture_default_str();
    embed->add_option("--lr", embed_args.config.initial_lr, "Initial learning rate")->capture_default_str();
    embed->add_option("--subsample", embed_args.config.subsample_threshold, "Subsampling threshold, 0 disables")
        ->capture_default_str();
    embed->add_option("--subwords", embed_args.subwords, "Character n-gram range MIN,MAX (off by default)");
    embed->add_option("--buckets", embed_args.config.buckets, "Subword hash buckets")->capture_default_str();
    embed->add_option("--min-count", embed_args.config.min_token_count, "Drop rarer tokens")->capture_default_str();
    embed->add_option("--threads", embed_args.config.threads, "Worker threads; above 1 results vary run to run")
        ->capture_default_str();
    embed->add_option("--seed", embed_args.config.seed, "Random seed")->capture_default_str();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate vectors");
    eval->require_subcommand(1);
    auto* neighbors = eval->add_subcommand("neighbors", "Nearest neighbors of query tokens");
    neighbors->add_option("-v,--vectors", eval_args.vectors, "Vector file")->required();
    neighbors->add_option("queries", eval_args.queries, "Query tokens (`_` for space)")->required();
    neighbors->add_option("-k", eval_args.k, "Neighbors per query")->capture_default_str();
    neighbors->add_flag("--no-lowercase", eval_args.no_lowercase, "Do not lowercase queries");
    auto* analogy_cmd = eval->add_subcommand("analogy", "Score an analogy suite");
    analogy_cmd->add_option("-v,--vectors", eval_args.vectors, "Vector file")->required();
    analogy_cmd->add_option("suite", eval_args.suite, "Analogy file")->required();
    analogy_cmd->add_flag("--no-lowercase", eval_args.no_lowercase, "Do not lowercase suite tokens");
    auto* similarity = eval->add_subcommand("similarity", "Spearman correlation with similarity judgements");
    similarity->add_option("-v,--vectors", eval_args.vectors, "Vector file")->required();
    similarity->add_option("pairs", eval_args.pairs, "t1<TAB>t2<TAB>score file")->required();
    similarity->add_flag("--no-lowercase", eval_args.no_lowercase, "Do not lowercase tokens");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train) return cmd_train(train_args, max_vocab->count() > 0, max_merges->count() > 0);
        if (*apply_cmd) return cmd_apply(apply_args);
        if (*decode_cmd) return cmd_decode(decode_args);
        if (*stats) return cmd_stats(stats_args);
        if (*embed) return cmd_embed(embed_args);
        if (*neighbors) return cmd_neighbors(eval_args);
        if (*analogy_cmd) return cmd_analogy(eval_args);
        if (*similarity) return cmd_similarity(eval_args);
    } catch (const IoError& e) {
        std::cerr << "rgram: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        std::cerr << "rgram: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "rgram: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
