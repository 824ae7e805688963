#include "rgram/grammar.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "rgram/error.hpp"

#ifdef RGRAM_HAVE_OPENMP
#include <omp.h>
#endif

namespace rgram {

namespace {

constexpr std::uint32_t kNil = 0xffffffffu;

std::uint64_t pair_key(SymbolId left, SymbolId right) {
    return (static_cast<std::uint64_t>(left) << 32) | right;
}

using PairToRule = std::unordered_map<std::uint64_t, std::uint32_t>;

PairToRule index_rules(const Grammar& g) {
    PairToRule out;
    out.reserve(g.rules().size() * 2);
    for (std::uint32_t k = 0; k < g.rules().size(); ++k) {
        const Rule& r = g.rules()[k];
        out.emplace(pair_key(r.left, r.right), k);  // a repeated pair can never fire twice
    }
    return out;
}

struct ChunkOutput {
    std::vector<SymbolId> symbols;
    std::vector<std::size_t> boundary_positions;  // local, one per boundary in the chunk
};

// Applies all rules to symbols[begin, end) whose interior boundaries are
// boundaries[b_first, b_last). Rules fire in order; each rule visits the
// positions where its pair was created, left to right, and skips stale ones.
ChunkOutput apply_chunk(const Grammar& g, const PairToRule& rule_of, const BoundedSequence& seq,
                        std::size_t begin, std::size_t end, std::size_t b_first, std::size_t b_last) {
    const std::size_t n = end - begin;
    std::vector<SymbolId> sym(seq.symbols.begin() + static_cast<std::ptrdiff_t>(begin),
                              seq.symbols.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::uint32_t> nxt(n, kNil), prv(n, kNil);
    {
        std::size_t b = b_first;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            while (b < b_last && seq.boundaries[b] - begin <= i) ++b;
            if (b < b_last && seq.boundaries[b] - begin == i + 1) continue;
            nxt[i] = static_cast<std::uint32_t>(i + 1);
            prv[i + 1] = static_cast<std::uint32_t>(i);
        }
    }

    std::vector<std::vector<std::uint32_t>> positions(g.rules().size());
    auto note = [&](std::uint32_t at) {
        if (at == kNil || nxt[at] == kNil) return;
        auto it = rule_of.find(pair_key(sym[at], sym[nxt[at]]));
        if (it != rule_of.end()) positions[it->second].push_back(at);
    };
    for (std::uint32_t i = 0; i < n; ++i) note(i);

    const SymbolId first_rule = static_cast<SymbolId>(g.terminal_count());
    for (std::uint32_t k = 0; k < positions.size(); ++k) {
        if (positions[k].empty()) continue;
        const Rule& r = g.rules()[k];
        const SymbolId z = first_rule + k;
        std::vector<std::uint32_t> list = std::move(positions[k]);
        positions[k] = {};
        // Later rules append out of order; left-to-right matters for runs like xxx.
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        for (std::uint32_t p : list) {
            const std::uint32_t q = nxt[p];
            if (sym[p] != r.left || q == kNil || sym[q] != r.right) continue;
            sym[p] = z;
            sym[q] = kNoSymbol;
            const std::uint32_t after = nxt[q];
            nxt[p] = after;
            if (after != kNil) prv[after] = p;
            note(prv[p]);
            note(p);
        }
    }

    ChunkOutput out;
    out.symbols.reserve(n);
    std::size_t b = b_first;
    for (std::size_t i = 0; i <= n; ++i) {
        while (b < b_last && seq.boundaries[b] - begin == i) {
            out.boundary_positions.push_back(out.symbols.size());
            ++b;
        }
        if (i < n && sym[i] != kNoSymbol) out.symbols.push_back(sym[i]);
    }
    return out;
}

// Chunk edges sit on boundaries so chunks can be processed independently.
std::vector<std::size_t> chunk_boundary_indices(const BoundedSequence& seq, std::size_t chunks) {
    std::vector<std::size_t> cuts{0};
    if (chunks > 1 && !seq.boundaries.empty()) {
        const std::size_t target = seq.size() / chunks + 1;
        std::size_t last = 0;
        for (std::size_t b = 0; b < seq.boundaries.size(); ++b) {
            if (seq.boundaries[b] - last >= target) {
                cuts.push_back(b);
                last = seq.boundaries[b];
            }
        }
    }
    return cuts;
}

BoundedSequence apply_chunked(const Grammar& g, const BoundedSequence& seq, std::size_t chunks) {
    const PairToRule rule_of = index_rules(g);
    // cut c starts at boundary index cuts[c] (position boundaries[cuts[c]]).
    const std::vector<std::size_t> cuts = chunk_boundary_indices(seq, chunks);
    const std::size_t nb = seq.boundaries.size();
    std::vector<ChunkOutput> parts(cuts.size());

    auto run = [&](std::size_t c) {
        const std::size_t begin = c == 0 ? 0 : seq.boundaries[cuts[c]];
        const std::size_t end = c + 1 < cuts.size() ? seq.boundaries[cuts[c + 1]] : seq.size();
        const std::size_t b_last = c + 1 < cuts.size() ? cuts[c + 1] : nb;
        parts[c] = apply_chunk(g, rule_of, seq, begin, end, cuts[c], b_last);
    };

#ifdef RGRAM_HAVE_OPENMP
    if (parts.size() > 1) {
        const auto count = static_cast<std::ptrdiff_t>(parts.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t c = 0; c < count; ++c) run(static_cast<std::size_t>(c));
    } else {
        run(0);
    }
#else
    for (std::size_t c = 0; c < parts.size(); ++c) run(c);
#endif

    BoundedSequence out;
    out.doc_ids = seq.doc_ids;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.symbols.size();
    out.symbols.reserve(total);
    for (const auto& p : parts) {
        for (std::size_t local : p.boundary_positions) out.boundaries.push_back(out.symbols.size() + local);
        out.symbols.insert(out.symbols.end(), p.symbols.begin(), p.symbols.end());
    }
    return out;
}

std::size_t worker_count() {
#ifdef RGRAM_HAVE_OPENMP
    return static_cast<std::size_t>(omp_get_max_threads());
#else
    return 1;
#endif
}

template <typename Int>
Int parse_int(std::string_view field, std::size_t line, const char* what) {
    Int value{};
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last)
        throw ParseError(line, std::string("bad ") + what + " '" + std::string(field) + "'");
    return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

// Line reader that insists on a trailing newline, so a file cut mid-line is
// reported instead of silently yielding a shorter number.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++number_;
        if (in_.eof()) throw ParseError(number_, "truncated line (missing newline)");
        return true;
    }

    std::size_t number() const noexcept { return number_; }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

}  // namespace

Grammar::Grammar(TerminalTable terminals) : terminals_(std::move(terminals)) {}

Grammar::Grammar(TerminalTable terminals, std::vector<Rule> rules) : terminals_(std::move(terminals)) {
    rules_.reserve(rules.size());
    lengths_.reserve(rules.size());
    depths_.reserve(rules.size());
    for (const Rule& r : rules) {
        if (r.id != symbol_count())
            throw ValidationError("rule id " + std::to_string(r.id) + " out of sequence (expected " +
                                  std::to_string(symbol_count()) + ")");
        if (r.left >= r.id || r.right >= r.id)
            throw ValidationError("rule " + std::to_string(r.id) + " references id not defined before it");
        add_rule(r.left, r.right, r.freq_at_merge);
    }
}

SymbolId Grammar::add_rule(SymbolId left, SymbolId right, std::uint64_t freq_at_merge) {
    check(left);
    check(right);
    const auto id = static_cast<SymbolId>(symbol_count());
    rules_.push_back(Rule{id, left, right, freq_at_merge});
    lengths_.push_back(length(left) + length(right));
    depths_.push_back(1 + std::max(depth(left), depth(right)));
    return id;
}

void Grammar::check(SymbolId id) const {
    if (!contains(id)) throw LookupError("unknown symbol id " + std::to_string(id));
}

const Rule& Grammar::rule(SymbolId id) const {
    check(id);
    if (is_terminal(id)) throw LookupError("symbol " + std::to_string(id) + " is a terminal");
    return rules_[id - terminal_count()];
}

void Grammar::expand_into(SymbolId id, std::u32string& out) const {
    check(id);
    std::vector<SymbolId> stack{id};
    while (!stack.empty()) {
        const SymbolId s = stack.back();
        stack.pop_back();
        if (is_terminal(s)) {
            out.push_back(terminals_.code_point(s));
        } else {
            const Rule& r = rules_[s - terminal_count()];
            stack.push_back(r.right);
            stack.push_back(r.left);
        }
    }
}

std::u32string Grammar::expand32(SymbolId id) const {
    std::u32string out;
    expand_into(id, out);
    return out;
}

std::string Grammar::expand(SymbolId id) const { return to_utf8(expand32(id)); }

std::uint64_t Grammar::length(SymbolId id) const {
    check(id);
    return is_terminal(id) ? 1 : lengths_[id - terminal_count()];
}

std::uint32_t Grammar::depth(SymbolId id) const {
    check(id);
    return is_terminal(id) ? 0 : depths_[id - terminal_count()];
}

BoundedSequence apply(const Grammar& g, const BoundedSequence& seq) {
    const std::size_t workers = worker_count();
    return apply_chunked(g, seq, workers > 1 ? workers * 4 : 1);
}

BoundedSequence apply_serial(const Grammar& g, const BoundedSequence& seq) { return apply_chunked(g, seq, 1); }

Segmentation apply_text(const Grammar& g, std::string_view normalized_text, const SeparatorSet& separators) {
    Segmentation out;
    BoundedSequence encoded;
    std::unordered_map<char32_t, SymbolId> unknown_ids;
    bool in_run = false;
    for (char32_t cp : decode_utf8(normalized_text)) {
        if (separators.contains(cp)) {
            if (!in_run) encoded.mark_boundary();
            in_run = true;
            continue;
        }
        in_run = false;
        if (auto id = g.terminals().find(cp)) {
            encoded.symbols.push_back(*id);
            continue;
        }
        auto [it, inserted] =
            unknown_ids.try_emplace(cp, static_cast<SymbolId>(g.symbol_count() + out.unknown.size()));
        if (inserted) out.unknown.push_back(cp);
        ++out.unknown_occurrences;
        encoded.symbols.push_back(it->second);
    }
    out.sequence = apply(g, encoded);
    return out;
}

std::string decode(const Grammar& g, const BoundedSequence& seq, char32_t separator,
                   const std::vector<char32_t>& unknown) {
    std::u32string text;
    text.reserve(seq.size() * 2);
    std::size_t next = 0;
    for (std::size_t i = 0; i <= seq.size(); ++i) {
        while (next < seq.boundaries.size() && seq.boundaries[next] == i) {
            text.push_back(separator);
            ++next;
        }
        if (i == seq.size()) break;
        const SymbolId id = seq.symbols[i];
        if (g.contains(id)) {
            g.expand_into(id, text);
        } else if (id - g.symbol_count() < unknown.size()) {
            text.push_back(unknown[id - g.symbol_count()]);
        } else {
            throw LookupError("unknown symbol id " + std::to_string(id));
        }
    }
    return to_utf8(text);
}

void save_grammar(const Grammar& g, std::ostream& out) {
    out << "RGRAM\t" << kGrammarFormatVersion << '\n';
    out << "T\t" << g.terminal_count() << '\n';
    for (std::size_t i = 0; i < g.terminal_count(); ++i)
        out << "t\t" << i << '\t' << static_cast<std::uint32_t>(g.terminals().code_point(static_cast<SymbolId>(i)))
            << '\n';
    for (const Rule& r : g.rules())
        out << "r\t" << r.id << '\t' << r.left << '\t' << r.right << '\t' << r.freq_at_merge << '\n';
    if (!out) throw IoError("failed to write grammar");
}

void save_grammar(const Grammar& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_grammar(g, out);
}

Grammar load_grammar(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "empty grammar file");
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0] != "RGRAM") throw ParseError(reader.number(), "missing RGRAM header");
    const int version = parse_int<int>(fields[1], reader.number(), "version");
    if (version != kGrammarFormatVersion)
        throw VersionError("unsupported grammar format version " + std::to_string(version) + " (expected " +
                           std::to_string(kGrammarFormatVersion) + ")");

    if (!reader.next(line)) throw ParseError(reader.number() + 1, "missing terminal count");
    fields = split_tabs(line);
    if (fields.size() != 2 || fields[0] != "T") throw ParseError(reader.number(), "expected 'T<TAB>count'");
    const auto terminal_count = parse_int<std::uint32_t>(fields[1], reader.number(), "terminal count");

    std::vector<char32_t> code_points;
    code_points.reserve(terminal_count);
    for (std::uint32_t i = 0; i < terminal_count; ++i) {
        if (!reader.next(line))
            throw ParseError(reader.number() + 1, "expected " + std::to_string(terminal_count) + " terminal lines, got " +
                                                      std::to_string(i));
        fields = split_tabs(line);
        if (fields.size() != 3 || fields[0] != "t") throw ParseError(reader.number(), "expected terminal line");
        const auto id = parse_int<std::uint32_t>(fields[1], reader.number(), "terminal id");
        if (id != i) throw ParseError(reader.number(), "terminal ids must be consecutive from 0");
        const auto cp = parse_int<std::uint32_t>(fields[2], reader.number(), "code point");
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw ParseError(reader.number(), "not a Unicode scalar value: " + std::to_string(cp));
        code_points.push_back(static_cast<char32_t>(cp));
    }

    TerminalTable terminals;
    try {
        terminals = TerminalTable(std::move(code_points));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("grammar terminals: ") + e.what());
    }

    std::vector<Rule> rules;
    while (reader.next(line)) {
        fields = split_tabs(line);
        if (fields.size() != 5 || fields[0] != "r") throw ParseError(reader.number(), "expected rule line");
        Rule r;
        r.id = parse_int<SymbolId>(fields[1], reader.number(), "rule id");
        r.left = parse_int<SymbolId>(fields[2], reader.number(), "left id");
        r.right = parse_int<SymbolId>(fields[3], reader.number(), "right id");
        r.freq_at_merge = parse_int<std::uint64_t>(fields[4], reader.number(), "frequency");
        if (r.left >= r.id || r.right >= r.id)
            throw ValidationError("line " + std::to_string(reader.number()) + ": rule " + std::to_string(r.id) +
                                  " references an id not defined before it");
        rules.push_back(r);
    }
    if (in.bad()) throw IoError("failed to read grammar");
    return Grammar(std::move(terminals), std::move(rules));
}

Grammar load_grammar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_grammar(in);
}

std::string escape_token(std::u32string_view token) {
    std::string out;
    out.reserve(token.size());
    for (char32_t cp : token) {
        switch (cp) {
            case U' ': out += '_'; break;
            case U'_': out += "\\_"; break;
            case U'\\': out += "\\\\"; break;
            case U'\n': out += "\\n"; break;
            case U'\t': out += "\\t"; break;
            case U'\r': out += "\\r"; break;
            default: append_utf8(out, cp);
        }
    }
    return out;
}

std::string escape_token(std::string_view utf8_token) { return escape_token(decode_utf8(utf8_token)); }

std::string unescape_token(std::string_view escaped, std::size_t line) {
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        const char c = escaped[i];
        if (c == '_') {
            out += ' ';
        } else if (c == '\\') {
            if (i + 1 == escaped.size()) throw ParseError(line, "dangling escape");
            switch (escaped[++i]) {
                case '_': out += '_'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                default: throw ParseError(line, std::string("unknown escape '\\") + escaped[i] + "'");
            }
        } else {
            out += c;
        }
    }
    return out;
}

void write_segmented(std::ostream& out, const Grammar& g, const BoundedSequence& seq,
                     const std::vector<char32_t>& unknown) {
    std::unordered_map<SymbolId, std::string> rendered;
    std::size_t next = 0;
    std::u32string scratch;
    for (std::size_t i = 0; i <= seq.size(); ++i) {
        while (next < seq.boundaries.size() && seq.boundaries[next] == i) {
            out << '\n';
            ++next;
        }
        if (i == seq.size()) break;
        const SymbolId id = seq.symbols[i];
        auto it = rendered.find(id);
        if (it == rendered.end()) {
            scratch.clear();
            if (g.contains(id)) {
                g.expand_into(id, scratch);
            } else if (id - g.symbol_count() < unknown.size()) {
                scratch.push_back(unknown[id - g.symbol_count()]);
            } else {
                throw LookupError("unknown symbol id " + std::to_string(id));
            }
            it = rendered.emplace(id, escape_token(scratch)).first;
        }
        out << it->second << '\n';
    }
    if (!out) throw IoError("failed to write segmented corpus");
}

std::string SegmentedCorpus::text(char32_t separator) const {
    std::string sep;
    append_utf8(sep, separator);
    std::string out;
    std::size_t next = 0;
    for (std::size_t i = 0; i <= tokens.size(); ++i) {
        while (next < boundaries.size() && boundaries[next] == i) {
            out += sep;
            ++next;
        }
        if (i < tokens.size()) out += types[tokens[i]];
    }
    return out;
}

SegmentedCorpus read_segmented(std::istream& in) {
    SegmentedCorpus out;
    std::unordered_map<std::string, std::uint32_t> index;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
            out.boundaries.push_back(out.tokens.size());
            continue;
        }
        std::string token = unescape_token(line, number);
        auto [it, inserted] = index.try_emplace(token, static_cast<std::uint32_t>(out.types.size()));
        if (inserted) out.types.push_back(std::move(token));
        out.tokens.push_back(it->second);
    }
    if (in.bad()) throw IoError("failed to read segmented corpus");
    return out;
}

SegmentedCorpus read_segmented(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_segmented(in);
}

void write_ids(std::ostream& out, const BoundedSequence& seq) {
    std::size_t next = 0;
    for (std::size_t i = 0; i <= seq.size(); ++i) {
        while (next < seq.boundaries.size() && seq.boundaries[next] == i) {
            out << '\n';
            ++next;
        }
        if (i < seq.size()) out << seq.symbols[i] << '\n';
    }
    if (!out) throw IoError("failed to write id sequence");
}

BoundedSequence read_ids(std::istream& in) {
    BoundedSequence out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
            out.boundaries.push_back(out.symbols.size());
            out.doc_ids.push_back(0);
            continue;
        }
        out.symbols.push_back(parse_int<SymbolId>(line, number, "symbol id"));
    }
    if (in.bad()) throw IoError("failed to read id sequence");
    return out;
}

}  // namespace rgram
