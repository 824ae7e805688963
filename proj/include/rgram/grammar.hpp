#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rgram/corpus.hpp"

namespace rgram {

/// `id -> (left, right)`; both children were created before `id`.
struct Rule {
    SymbolId id = 0;
    SymbolId left = 0;
    SymbolId right = 0;
    std::uint64_t freq_at_merge = 0;

    bool operator==(const Rule&) const = default;
};

/// Terminal table plus the ordered pair-replacement rules. Immutable once
/// built apart from appending rules, so concurrent readers are safe.
class Grammar {
public:
    Grammar() = default;
    explicit Grammar(TerminalTable terminals);
    /// Validates that rule ids are consecutive from |terminals| and acyclic.
    Grammar(TerminalTable terminals, std::vector<Rule> rules);

    SymbolId add_rule(SymbolId left, SymbolId right, std::uint64_t freq_at_merge);

    const TerminalTable& terminals() const noexcept { return terminals_; }
    const std::vector<Rule>& rules() const noexcept { return rules_; }
    std::size_t terminal_count() const noexcept { return terminals_.size(); }
    std::size_t symbol_count() const noexcept { return terminals_.size() + rules_.size(); }
    bool is_terminal(SymbolId id) const noexcept { return id < terminals_.size(); }
    bool contains(SymbolId id) const noexcept { return id < symbol_count(); }

    /// Throws LookupError for terminals and unknown ids.
    const Rule& rule(SymbolId id) const;

    /// Terminal expansion; throws LookupError for unknown ids.
    std::u32string expand32(SymbolId id) const;
    std::string expand(SymbolId id) const;
    void expand_into(SymbolId id, std::u32string& out) const;

    /// Number of terminals `id` expands to.
    std::uint64_t length(SymbolId id) const;
    /// 0 for terminals, 1 + max(depth(left), depth(right)) otherwise.
    std::uint32_t depth(SymbolId id) const;

    bool operator==(const Grammar& other) const {
        return terminals_ == other.terminals_ && rules_ == other.rules_;
    }

private:
    void check(SymbolId id) const;

    TerminalTable terminals_;
    std::vector<Rule> rules_;
    std::vector<std::uint64_t> lengths_;  // per rule
    std::vector<std::uint32_t> depths_;   // per rule
};

/// A sequence produced by applying a grammar to text. Characters missing
/// from the terminal table become ids `g.symbol_count() + k` where
/// `unknown[k]` is the character; no rule ever touches them.
struct Segmentation {
    BoundedSequence sequence;
    std::vector<char32_t> unknown;
    std::uint64_t unknown_occurrences = 0;
};

/// Replays every rule in creation order, each left to right, never across a
/// boundary. Symbols the grammar does not know pass through untouched.
/// Segments are processed in parallel when OpenMP is available.
BoundedSequence apply(const Grammar& g, const BoundedSequence& seq);
/// Single-threaded reference for apply().
BoundedSequence apply_serial(const Grammar& g, const BoundedSequence& seq);

/// Encodes normalized text against the grammar's terminals and applies it.
Segmentation apply_text(const Grammar& g, std::string_view normalized_text,
                        const SeparatorSet& separators = {});

/// Expands every symbol and writes `separator` at each boundary. Ids past
/// the grammar resolve through `unknown`; anything else is a LookupError.
std::string decode(const Grammar& g, const BoundedSequence& seq, char32_t separator = U'\n',
                   const std::vector<char32_t>& unknown = {});

// --- grammar file ---------------------------------------------------------

inline constexpr int kGrammarFormatVersion = 1;

void save_grammar(const Grammar& g, std::ostream& out);
void save_grammar(const Grammar& g, const std::string& path);
/// Throws ParseError (with line), VersionError or ValidationError.
Grammar load_grammar(std::istream& in);
Grammar load_grammar(const std::string& path);

// --- segmented corpus -----------------------------------------------------

/// Space -> `_`, `_` -> `\_`, `\` -> `\\`, newline -> `\n`, tab -> `\t`.
std::string escape_token(std::u32string_view token);
std::string escape_token(std::string_view utf8_token);
/// Inverse of escape_token; throws ParseError tagged with `line`.
std::string unescape_token(std::string_view escaped, std::size_t line = 0);

/// One token per line, a blank line per boundary.
void write_segmented(std::ostream& out, const Grammar& g, const BoundedSequence& seq,
                     const std::vector<char32_t>& unknown = {});

/// Token text per position, with boundaries, as read from a segmented file.
struct SegmentedCorpus {
    std::vector<std::string> types;     // distinct token strings, first-seen order
    std::vector<std::uint32_t> tokens;  // indices into `types`
    std::vector<std::size_t> boundaries;

    std::string text(char32_t separator = U'\n') const;
};

SegmentedCorpus read_segmented(std::istream& in);
SegmentedCorpus read_segmented(const std::string& path);

/// Id-per-line variant of the segmented corpus (blank line = boundary).
void write_ids(std::ostream& out, const BoundedSequence& seq);
BoundedSequence read_ids(std::istream& in);

}  // namespace rgram
