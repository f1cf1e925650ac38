#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bycs::detail {

// Decodes one UTF-8 scalar starting at `pos`, advancing `pos` past it.
// Invalid bytes are consumed one at a time and returned as U+FFFD so that
// tokenization never stalls on malformed input.
inline char32_t utf8_next(std::string_view text, std::size_t& pos) {
    const auto byte = [&](std::size_t i) -> std::uint8_t {
        return static_cast<std::uint8_t>(text[i]);
    };
    const std::uint8_t b0 = byte(pos);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
        pos += 1;
        return b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        pos += 1;
        return 0xFFFD;
    }
    if (pos + len > text.size()) {
        pos += 1;
        return 0xFFFD;
    }
    for (std::size_t i = 1; i < len; ++i) {
        if ((byte(pos + i) & 0xC0) != 0x80) {
            pos += 1;
            return 0xFFFD;
        }
        cp = (cp << 6) | (byte(pos + i) & 0x3F);
    }
    pos += len;
    return cp;
}

inline void utf8_append(std::string& out, char32_t cp) {
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

inline bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// CJK scripts treated as one-token-per-character: Han, kana, Hangul,
// CJK punctuation/compatibility blocks and the fullwidth forms.
inline bool is_cjk(char32_t cp) {
    // Boundary pairs (last-before-range, last-of-range); odd index => CJK.
    static constexpr char32_t splits[] = {
        0x1100 - 1,  0x11FF,   // Hangul Jamo
        0x2E80 - 1,  0x2FDF,   // CJK radicals, Kangxi radicals
        0x3000 - 1,  0x33FF,   // CJK punct, kana, bopomofo, compat jamo, enclosed
        0x3400 - 1,  0x4DBF,   // CJK ideographs extension A
        0x4E00 - 1,  0x9FFF,   // CJK unified ideographs
        0xA960 - 1,  0xA97F,   // Hangul Jamo extended-A
        0xAC00 - 1,  0xD7FF,   // Hangul syllables, Jamo extended-B
        0xF900 - 1,  0xFAFF,   // CJK compatibility ideographs
        0xFE30 - 1,  0xFE4F,   // CJK compatibility forms
        0xFF00 - 1,  0xFFEF,   // halfwidth and fullwidth forms
        0x1B000 - 1, 0x1B12F,  // kana supplement, kana extended-A
        0x20000 - 1, 0x2EBEF,  // CJK ideographs extensions B-F
        0x2F800 - 1, 0x2FA1F,  // CJK compatibility ideographs supplement
    };
    std::size_t lo = 0, hi = sizeof(splits) / sizeof(splits[0]);
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (splits[mid] < cp)
            lo = mid + 1;
        else
            hi = mid;
    }
    return (lo & 1) != 0;
}

// Punctuation stripped from token edges in word mode: ASCII punctuation
// plus the common typographic and CJK marks.
inline bool is_strippable_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    switch (cp) {
        case 0x2010: case 0x2013: case 0x2014: case 0x2018: case 0x2019:
        case 0x201C: case 0x201D: case 0x2026:
        case 0x3001: case 0x3002: case 0x300A: case 0x300B:
        case 0x300C: case 0x300D: case 0x3008: case 0x3009:
        case 0xFF01: case 0xFF08: case 0xFF09: case 0xFF0C: case 0xFF0E:
        case 0xFF1A: case 0xFF1B: case 0xFF1F:
            return true;
        default:
            return false;
    }
}

inline char32_t ascii_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z')
        return cp + ('a' - 'A');
    return cp;
}

} // namespace bycs::detail
