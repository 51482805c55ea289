#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace ptco {

// Splits on '\n'. A trailing newline does not produce an empty final element;
// use ends_with_newline() to reconstruct the original text exactly.
inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

inline bool ends_with_newline(std::string_view text) {
    return !text.empty() && text.back() == '\n';
}

// Inverse of split_lines given the original trailing-newline flag.
inline std::string join_lines(const std::vector<std::string>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += lines[i];
        if (i + 1 < lines.size() || trailing_newline) out += '\n';
    }
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// True when `word` occurs in `text` delimited by non-identifier characters.
inline bool contains_word(std::string_view text, std::string_view word) {
    if (word.empty()) return false;
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_ident_char(text[pos - 1]);
        std::size_t end = pos + word.size();
        bool right_ok = end == text.size() || !is_ident_char(text[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

inline bool contains_word_ci(std::string_view text, std::string_view word) {
    return contains_word(to_lower(text), to_lower(word));
}

}  // namespace ptco
