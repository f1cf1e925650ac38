#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bycs/detail/utf8.hpp"
#include "bycs/types.hpp"

namespace bycs {

struct TokenSequence {
    std::vector<std::string> tokens;
    TokenizerMode mode = TokenizerMode::whitespace_word;
};

namespace detail {

// Lowercases (ASCII) and strips punctuation from both edges. Returns the
// empty string when nothing but punctuation remains.
inline std::string normalize_word(const std::vector<char32_t>& cps) {
    std::size_t begin = 0, end = cps.size();
    while (begin < end && is_strippable_punct(cps[begin]))
        ++begin;
    while (end > begin && is_strippable_punct(cps[end - 1]))
        --end;
    std::string out;
    for (std::size_t i = begin; i < end; ++i)
        utf8_append(out, ascii_lower(cps[i]));
    return out;
}

inline std::string lower_word(const std::vector<char32_t>& cps) {
    std::string out;
    for (char32_t cp : cps)
        utf8_append(out, ascii_lower(cp));
    return out;
}

} // namespace detail

/// Splits text into tokens.
///   whitespace_word: split on Unicode whitespace, lowercase, strip
///     punctuation from token edges.
///   character: one token per Unicode scalar, whitespace dropped.
///   cjk_aware: CJK scalars become single-character tokens; non-CJK runs
///     are split on whitespace and lowercased.
/// Empty text yields an empty sequence; no token is ever empty.
inline TokenSequence tokenize(std::string_view text, TokenizerMode mode) {
    TokenSequence seq;
    seq.mode = mode;
    std::vector<char32_t> word;
    const auto flush_word = [&](bool strip_punct) {
        if (word.empty())
            return;
        std::string tok = strip_punct ? detail::normalize_word(word)
                                      : detail::lower_word(word);
        if (!tok.empty())
            seq.tokens.push_back(std::move(tok));
        word.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = detail::utf8_next(text, pos);
        switch (mode) {
            case TokenizerMode::whitespace_word:
                if (detail::is_unicode_space(cp))
                    flush_word(true);
                else
                    word.push_back(cp);
                break;
            case TokenizerMode::character:
                if (!detail::is_unicode_space(cp)) {
                    std::string tok;
                    detail::utf8_append(tok, cp);
                    seq.tokens.push_back(std::move(tok));
                }
                break;
            case TokenizerMode::cjk_aware:
                if (detail::is_unicode_space(cp)) {
                    flush_word(false);
                } else if (detail::is_cjk(cp)) {
                    flush_word(false);
                    std::string tok;
                    detail::utf8_append(tok, cp);
                    seq.tokens.push_back(std::move(tok));
                } else {
                    word.push_back(cp);
                }
                break;
        }
    }
    if (mode == TokenizerMode::whitespace_word)
        flush_word(true);
    else if (mode == TokenizerMode::cjk_aware)
        flush_word(false);
    return seq;
}

} // namespace bycs
