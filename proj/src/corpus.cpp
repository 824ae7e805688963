#include "rgram/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include "rgram/error.hpp"

namespace rgram {

namespace {

struct CaseEntry {
    char32_t upper;
    char32_t lower;
};

constexpr CaseEntry kLowercase[] = {
#include "case_table.inc"
};

// Decodes every complete sequence in `bytes`. Stops in front of a truncated
// trailing sequence when `allow_partial` and returns the bytes consumed.
std::size_t decode_into(std::string_view bytes, std::size_t base, bool allow_partial,
                        std::u32string& out) {
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(bytes[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        std::size_t len;
        char32_t cp;
        char32_t min;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2, cp = b0 & 0x1F, min = 0x80;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3, cp = b0 & 0x0F, min = 0x800;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4, cp = b0 & 0x07, min = 0x10000;
        } else {
            throw DecodeError(base + i, "invalid lead byte");
        }
        for (std::size_t k = 1; k < len; ++k) {
            if (i + k >= n) {
                if (allow_partial) return i;
                throw DecodeError(base + i, "truncated sequence");
            }
            const auto b = static_cast<unsigned char>(bytes[i + k]);
            if ((b & 0xC0) != 0x80) throw DecodeError(base + i, "invalid continuation byte");
            cp = (cp << 6) | (b & 0x3F);
        }
        if (cp < min) throw DecodeError(base + i, "overlong encoding");
        if (cp > 0x10FFFF) throw DecodeError(base + i, "code point out of range");
        if (cp >= 0xD800 && cp <= 0xDFFF) throw DecodeError(base + i, "surrogate code point");
        out.push_back(cp);
        i += len;
    }
    return i;
}

char32_t normalize_char(char32_t cp, const NormalizationOptions& opts) noexcept {
    if (opts.lowercase) cp = simple_lowercase(cp);
    if (opts.digits_to_N && cp >= U'0' && cp <= U'9') cp = U'N';
    return cp;
}

}  // namespace

TerminalTable::TerminalTable(std::vector<char32_t> code_points) {
    for (char32_t cp : code_points) {
        if (index_.count(cp)) throw ValidationError("duplicate terminal code point " + std::to_string(cp));
        intern(cp);
    }
}

SymbolId TerminalTable::intern(char32_t cp) {
    auto [it, inserted] = index_.try_emplace(cp, static_cast<SymbolId>(code_points_.size()));
    if (inserted) code_points_.push_back(cp);
    return it->second;
}

std::optional<SymbolId> TerminalTable::find(char32_t cp) const {
    auto it = index_.find(cp);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void BoundedSequence::mark_boundary(std::uint32_t doc_id) {
    if (!boundaries.empty() && boundaries.back() == symbols.size()) return;
    boundaries.push_back(symbols.size());
    doc_ids.push_back(doc_id);
}

std::vector<std::pair<std::size_t, std::size_t>> BoundedSequence::segments() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(boundaries.size() + 1);
    std::size_t begin = 0;
    for (std::size_t b : boundaries) {
        out.emplace_back(begin, b);
        begin = b;
    }
    out.emplace_back(begin, symbols.size());
    return out;
}

std::u32string decode_utf8(std::string_view bytes, std::size_t base_offset) {
    std::u32string out;
    out.reserve(bytes.size());
    decode_into(bytes, base_offset, false, out);
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string to_utf8(std::u32string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t cp : text) append_utf8(out, cp);
    return out;
}

char32_t simple_lowercase(char32_t cp) noexcept {
    if (cp < 0x80) return (cp >= U'A' && cp <= U'Z') ? cp + 32 : cp;
    auto it = std::lower_bound(std::begin(kLowercase), std::end(kLowercase), cp,
                               [](const CaseEntry& e, char32_t c) { return e.upper < c; });
    if (it != std::end(kLowercase) && it->upper == cp) return it->lower;
    return cp;
}

std::u32string normalize(std::u32string_view text, const NormalizationOptions& opts) {
    std::u32string out(text);
    for (char32_t& cp : out) cp = normalize_char(cp, opts);
    return out;
}

std::string normalize(std::string_view text, const NormalizationOptions& opts) {
    return to_utf8(normalize(decode_utf8(text), opts));
}

BoundedSequence encode(std::u32string_view text, const SeparatorSet& separators, TerminalTable& table) {
    BoundedSequence seq;
    seq.symbols.reserve(text.size());
    bool in_run = false;
    for (char32_t cp : text) {
        if (separators.contains(cp)) {
            if (!in_run) seq.mark_boundary();
            in_run = true;
            continue;
        }
        in_run = false;
        seq.symbols.push_back(table.intern(cp));
    }
    return seq;
}

BoundedSequence encode(std::string_view text, const SeparatorSet& separators, TerminalTable& table) {
    return encode(std::u32string_view(decode_utf8(text)), separators, table);
}

EncodedCorpus encode(std::string_view text, const SeparatorSet& separators) {
    EncodedCorpus out;
    out.sequence = encode(text, separators, out.terminals);
    return out;
}

std::string decode_terminals(const BoundedSequence& seq, const TerminalTable& table, char32_t separator) {
    std::string out;
    out.reserve(seq.symbols.size() + seq.boundaries.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i <= seq.symbols.size(); ++i) {
        while (next < seq.boundaries.size() && seq.boundaries[next] == i) {
            append_utf8(out, separator);
            ++next;
        }
        if (i == seq.symbols.size()) break;
        const SymbolId id = seq.symbols[i];
        if (id >= table.size()) throw DomainError("symbol " + std::to_string(id) + " is not a terminal");
        append_utf8(out, table.code_point(id));
    }
    return out;
}

CorpusEncoder::CorpusEncoder(NormalizationOptions opts, SeparatorSet separators)
    : opts_(opts), separators_(std::move(separators)) {}

void CorpusEncoder::push(char32_t cp) {
    cp = normalize_char(cp, opts_);
    if (separators_.contains(cp)) {
        if (!in_separator_run_) out_.sequence.mark_boundary(doc_);
        in_separator_run_ = true;
        return;
    }
    in_separator_run_ = false;
    out_.sequence.symbols.push_back(out_.terminals.intern(cp));
}

void CorpusEncoder::feed(std::string_view chunk) {
    std::string data = std::move(carry_);
    const std::size_t base = offset_ - data.size();
    data.append(chunk);
    std::u32string decoded;
    const std::size_t used = decode_into(data, base, true, decoded);
    carry_.assign(data, used);
    offset_ += chunk.size();
    for (char32_t cp : decoded) push(cp);
}

void CorpusEncoder::end_document() {
    if (!carry_.empty()) {
        std::u32string scratch;
        decode_into(carry_, offset_ - carry_.size(), false, scratch);
    }
    out_.sequence.mark_boundary(doc_);
    ++doc_;
    in_separator_run_ = true;
}

EncodedCorpus CorpusEncoder::finish() {
    if (!carry_.empty()) {
        std::u32string scratch;
        decode_into(carry_, offset_ - carry_.size(), false, scratch);
    }
    EncodedCorpus out = std::move(out_);
    out_ = {};
    return out;
}

EncodedCorpus read_corpus(std::span<const std::string> paths, const NormalizationOptions& opts,
                          const SeparatorSet& separators, std::size_t chunk_bytes) {
    CorpusEncoder encoder(opts, separators);
    std::string buffer(std::max<std::size_t>(chunk_bytes, 1), '\0');
    for (std::size_t d = 0; d < paths.size(); ++d) {
        std::ifstream in(paths[d], std::ios::binary);
        if (!in) throw IoError("cannot open " + paths[d]);
        while (in) {
            in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
            const auto got = static_cast<std::size_t>(in.gcount());
            if (got == 0) break;
            encoder.feed(std::string_view(buffer.data(), got));
        }
        if (in.bad()) throw IoError("read failed: " + paths[d]);
        if (d + 1 < paths.size()) encoder.end_document();
    }
    return encoder.finish();
}

void normalize_stream(std::istream& in, std::ostream& out, const NormalizationOptions& opts,
                      std::size_t chunk_bytes) {
    std::string buffer(std::max<std::size_t>(chunk_bytes, 1), '\0');
    std::string carry;
    std::size_t offset = 0;
    std::u32string decoded;
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        carry.append(buffer.data(), got);
        decoded.clear();
        const std::size_t used = decode_into(carry, offset, true, decoded);
        offset += used;
        carry.erase(0, used);
        out << to_utf8(normalize(decoded, opts));
    }
    if (!carry.empty()) decode_into(carry, offset, false, decoded);
    if (!out) throw IoError("write failed");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace rgram
