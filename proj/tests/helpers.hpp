#pragma once

#include <random>
#include <string>

#include "rgram/corpus.hpp"

namespace rgram::fixtures {

// Encodes `text`, reading '|' as a boundary.
inline EncodedCorpus corpus_of(std::string_view text) { return encode(text, SeparatorSet(U"|")); }

inline BoundedSequence random_sequence(std::mt19937_64& rng, std::size_t alphabet, std::size_t length,
                                       double boundary_rate = 0.0) {
    std::uniform_int_distribution<std::uint32_t> sym(0, static_cast<std::uint32_t>(alphabet - 1));
    std::bernoulli_distribution cut(boundary_rate);
    BoundedSequence seq;
    for (std::size_t i = 0; i < length; ++i) {
        if (boundary_rate > 0 && i > 0 && cut(rng)) seq.mark_boundary();
        seq.symbols.push_back(sym(rng));
    }
    return seq;
}

inline TerminalTable alphabet_table(std::size_t n) {
    std::vector<char32_t> cps;
    for (std::size_t i = 0; i < n; ++i) cps.push_back(U'a' + static_cast<char32_t>(i));
    return TerminalTable(cps);
}

// Random text over a mix of ASCII, Latin-1, Greek, CJK and astral letters.
inline std::string random_unicode(std::mt19937_64& rng, std::size_t length) {
    static const char32_t pool[] = {U'a', U'b', U'c', U' ', U'_', U'\\', U'\n', U'\t', U'é', U'ß', U'β',
                                    U'α', U'λ', U'中', U'文', U'😀', U'𝔸', U'ж', U'0', U'7'};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
    std::u32string s;
    for (std::size_t i = 0; i < length; ++i) s.push_back(pool[pick(rng)]);
    return to_utf8(s);
}

}  // namespace rgram::fixtures
