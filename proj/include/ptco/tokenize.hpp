#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "ptco/errors.hpp"
#include "ptco/text.hpp"

namespace ptco {

// A fixed-size slice of the token stream of one diff text.
struct TokenBlock {
    std::vector<std::string> tokens;
    std::string source_entry;
    std::size_t block_index = 0;
};

namespace detail {

enum class CharClass { Upper, Lower, Digit };

inline CharClass classify(char c) {
    if (std::isdigit(static_cast<unsigned char>(c))) return CharClass::Digit;
    if (std::isupper(static_cast<unsigned char>(c))) return CharClass::Upper;
    return CharClass::Lower;
}

// Splits one identifier-like word into sub-tokens at snake_case and camelCase
// boundaries ("parseHTTPResponse_v2" -> parse, HTTP, Response, v, 2).
inline void split_word(std::string_view word, std::vector<std::string>& out) {
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < word.size(); ++i) {
        char c = word[i];
        if (c == '_') {
            flush();
            continue;
        }
        if (!cur.empty()) {
            CharClass prev = classify(cur.back());
            CharClass now = classify(c);
            bool boundary = false;
            if (prev != CharClass::Upper && now == CharClass::Upper) boundary = true;
            if ((prev == CharClass::Digit) != (now == CharClass::Digit)) boundary = true;
            // end of an acronym run: HTTPServer -> HTTP | Server
            if (prev == CharClass::Upper && now == CharClass::Upper && i + 1 < word.size() &&
                classify(word[i + 1]) == CharClass::Lower)
                boundary = true;
            if (boundary) flush();
        }
        cur += c;
    }
    flush();
}

}  // namespace detail

// Lexes text into tokens: identifier words are split into sub-tokens; every
// other non-whitespace character stands alone.
inline std::vector<std::string> code_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (is_ident_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            detail::split_word(text.substr(i, j - i), tokens);
            i = j;
            continue;
        }
        tokens.emplace_back(1, c);
        ++i;
    }
    return tokens;
}

// Partitions the diff's token stream into blocks of at most `block_size`
// tokens. With overlap > 0, consecutive blocks share that many tokens.
inline std::vector<TokenBlock> tokenize_diff(std::string_view diff_text,
                                             std::size_t block_size = 50,
                                             std::size_t overlap = 0,
                                             std::string source_entry = {}) {
    if (block_size < 1) throw Error("block_size must be >= 1");
    if (overlap >= block_size) throw Error("overlap must be < block_size");

    std::vector<std::string> tokens = code_tokens(diff_text);
    std::vector<TokenBlock> blocks;
    if (tokens.empty()) return blocks;

    std::size_t step = block_size - overlap;
    for (std::size_t start = 0; start < tokens.size(); start += step) {
        TokenBlock block;
        block.source_entry = source_entry;
        block.block_index = blocks.size();
        std::size_t end = std::min(start + block_size, tokens.size());
        block.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                            tokens.begin() + static_cast<std::ptrdiff_t>(end));
        blocks.push_back(std::move(block));
        if (end == tokens.size()) break;
    }
    return blocks;
}

}  // namespace ptco
