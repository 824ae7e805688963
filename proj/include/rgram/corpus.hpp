#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rgram {

/// Terminals occupy [0, T); merge-created nonterminals follow in creation order.
using SymbolId = std::uint32_t;

inline constexpr SymbolId kNoSymbol = 0xffffffffu;

struct NormalizationOptions {
    bool lowercase = true;
    bool digits_to_N = false;
};

/// Bijection between terminal ids and Unicode scalar values. Ids are handed
/// out in order of first appearance.
class TerminalTable {
public:
    TerminalTable() = default;
    explicit TerminalTable(std::vector<char32_t> code_points);

    SymbolId intern(char32_t cp);
    std::optional<SymbolId> find(char32_t cp) const;
    char32_t code_point(SymbolId id) const { return code_points_.at(id); }
    std::size_t size() const noexcept { return code_points_.size(); }
    const std::vector<char32_t>& code_points() const noexcept { return code_points_; }

    bool operator==(const TerminalTable& other) const { return code_points_ == other.code_points_; }

private:
    std::vector<char32_t> code_points_;
    std::unordered_map<char32_t, SymbolId> index_;
};

/// A symbol sequence with positions that no merge may span. Boundary `b`
/// sits between symbols[b-1] and symbols[b]; `doc_ids[k]` tags boundary k
/// with the document it was read from.
struct BoundedSequence {
    std::vector<SymbolId> symbols;
    std::vector<std::size_t> boundaries;
    std::vector<std::uint32_t> doc_ids;

    std::size_t size() const noexcept { return symbols.size(); }
    bool empty() const noexcept { return symbols.empty(); }

    /// Appends a boundary at the current end unless one is already there.
    void mark_boundary(std::uint32_t doc_id = 0);

    /// Half-open [begin, end) ranges between consecutive boundaries,
    /// including empty leading/trailing segments.
    std::vector<std::pair<std::size_t, std::size_t>> segments() const;

    bool operator==(const BoundedSequence& other) const = default;
};

/// Characters that end a segment. Runs of them collapse into one boundary.
class SeparatorSet {
public:
    SeparatorSet() : chars_{U'\n'} {}
    explicit SeparatorSet(std::u32string chars) : chars_(std::move(chars)) {}

    bool contains(char32_t cp) const noexcept { return chars_.find(cp) != std::u32string::npos; }
    /// The character written back for a boundary when decoding.
    char32_t primary() const { return chars_.empty() ? U'\n' : chars_.front(); }
    const std::u32string& chars() const noexcept { return chars_; }

private:
    std::u32string chars_;
};

// --- UTF-8 ---------------------------------------------------------------

/// Throws DecodeError carrying `base_offset` plus the local byte offset.
std::u32string decode_utf8(std::string_view bytes, std::size_t base_offset = 0);
void append_utf8(std::string& out, char32_t cp);
std::string to_utf8(std::u32string_view text);

/// Unicode simple (1:1) lowercase mapping.
char32_t simple_lowercase(char32_t cp) noexcept;

// --- normalization and encoding -----------------------------------------

std::u32string normalize(std::u32string_view text, const NormalizationOptions& opts);
std::string normalize(std::string_view text, const NormalizationOptions& opts);

/// Encodes already-normalized text, extending `table` with unseen characters.
BoundedSequence encode(std::string_view text, const SeparatorSet& separators, TerminalTable& table);
BoundedSequence encode(std::u32string_view text, const SeparatorSet& separators, TerminalTable& table);

struct EncodedCorpus {
    TerminalTable terminals;
    BoundedSequence sequence;
};

EncodedCorpus encode(std::string_view text, const SeparatorSet& separators = {});

/// Inverse of encode up to separator-run collapsing. Throws DomainError if a
/// symbol is not a terminal of `table`.
std::string decode_terminals(const BoundedSequence& seq, const TerminalTable& table,
                             char32_t separator = U'\n');

/// Incremental normalize+encode over arbitrarily split UTF-8 chunks.
class CorpusEncoder {
public:
    CorpusEncoder(NormalizationOptions opts, SeparatorSet separators);

    void feed(std::string_view chunk);
    /// Ends the current document: flushes pending bytes and marks a boundary.
    void end_document();
    EncodedCorpus finish();

    std::size_t bytes_consumed() const noexcept { return offset_; }

private:
    void push(char32_t cp);

    NormalizationOptions opts_;
    SeparatorSet separators_;
    EncodedCorpus out_;
    std::string carry_;
    std::size_t offset_ = 0;
    std::uint32_t doc_ = 0;
    bool in_separator_run_ = false;
};

inline constexpr std::size_t kDefaultChunkBytes = 1 << 20;

/// Reads one or more UTF-8 files in fixed-size chunks; a boundary separates
/// consecutive files. Throws IoError or DecodeError.
EncodedCorpus read_corpus(std::span<const std::string> paths, const NormalizationOptions& opts,
                          const SeparatorSet& separators = {},
                          std::size_t chunk_bytes = kDefaultChunkBytes);

/// Streams `in` to `out` through normalize() without holding the whole text.
void normalize_stream(std::istream& in, std::ostream& out, const NormalizationOptions& opts,
                      std::size_t chunk_bytes = kDefaultChunkBytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace rgram
