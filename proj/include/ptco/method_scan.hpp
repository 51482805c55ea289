#pragma once

// Lightweight brace/signature scanner for Java-like sources. Methods are
// identified by (name, parameter arity); no full grammar is involved, which
// keeps the miner independent of any one compiler front end.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptco/errors.hpp"
#include "ptco/text.hpp"

namespace ptco {

struct MethodInfo {
    std::string name;
    std::size_t arity = 0;
    std::size_t start_line = 0;  // 1-based, includes leading annotations/modifiers
    std::size_t end_line = 0;    // 1-based, closing brace
    std::string text;            // exact source slice of the method

    std::string signature() const { return name + "/" + std::to_string(arity); }
};

namespace detail {

inline bool is_control_keyword(std::string_view word) {
    static const char* kKeywords[] = {"if",     "for",   "while", "switch", "catch",
                                      "do",     "else",  "try",   "return", "new",
                                      "synchronized", "assert", "throw"};
    for (const char* k : kKeywords)
        if (word == k) return true;
    return false;
}

class SourceWalker {
public:
    explicit SourceWalker(std::string_view src) : src_(src) {}

    // Advances one character, maintaining comment/string state. Returns true
    // while input remains.
    bool at_code() const { return state_ == State::Code; }
    char current() const { return src_[pos_]; }
    std::size_t pos() const { return pos_; }
    std::size_t line() const { return line_; }
    bool done() const { return pos_ >= src_.size(); }

    void advance() {
        char c = src_[pos_];
        char next = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
        switch (state_) {
            case State::Code:
                if (c == '/' && next == '/')
                    state_ = State::LineComment;
                else if (c == '/' && next == '*')
                    state_ = State::BlockComment;
                else if (c == '"')
                    state_ = State::Str;
                else if (c == '\'')
                    state_ = State::Chr;
                break;
            case State::LineComment:
                if (c == '\n') state_ = State::Code;
                break;
            case State::BlockComment:
                if (c == '*' && next == '/') state_ = State::ClosingBlock;
                break;
            case State::ClosingBlock:
                state_ = State::Code;
                break;
            case State::Str:
                if (c == '\\')
                    state_ = State::StrEscape;
                else if (c == '"')
                    state_ = State::Code;
                break;
            case State::StrEscape:
                state_ = State::Str;
                break;
            case State::Chr:
                if (c == '\\')
                    state_ = State::ChrEscape;
                else if (c == '\'')
                    state_ = State::Code;
                break;
            case State::ChrEscape:
                state_ = State::Chr;
                break;
        }
        if (c == '\n') ++line_;
        ++pos_;
    }

private:
    enum class State { Code, LineComment, BlockComment, ClosingBlock, Str, StrEscape, Chr, ChrEscape };
    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    State state_ = State::Code;
};

}  // namespace detail

// Extracts the method-like declarations of a source text. Throws Error when
// braces never balance (the caller treats the file as malformed).
inline std::vector<MethodInfo> scan_methods(std::string_view source) {
    std::vector<MethodInfo> methods;

    // Positions of interesting characters at code level, in order.
    struct CodeChar {
        char c;
        std::size_t pos;
        std::size_t line;
    };
    std::vector<CodeChar> code;
    {
        detail::SourceWalker walker(source);
        while (!walker.done()) {
            if (walker.at_code()) code.push_back({walker.current(), walker.pos(), walker.line()});
            walker.advance();
        }
    }

    long depth_check = 0;
    for (const CodeChar& cc : code) {
        if (cc.c == '{') ++depth_check;
        if (cc.c == '}') --depth_check;
        if (depth_check < 0) throw Error("unbalanced braces");
    }
    if (depth_check != 0) throw Error("unbalanced braces");

    auto read_word_ending_at = [&](std::size_t idx) -> std::pair<std::string, std::size_t> {
        // Word of code chars ending at index idx (inclusive); returns the word
        // and the code index of its first character.
        if (idx >= code.size() || !is_ident_char(code[idx].c)) return {"", idx};
        std::size_t first = idx;
        while (first > 0 && is_ident_char(code[first - 1].c)) --first;
        std::string word;
        for (std::size_t i = first; i <= idx; ++i) word += code[i].c;
        return {word, first};
    };

    std::size_t i = 0;
    while (i < code.size()) {
        if (code[i].c != '(') {
            ++i;
            continue;
        }
        // identifier immediately before '(' (skipping whitespace)
        std::size_t j = i;
        while (j > 0 && std::isspace(static_cast<unsigned char>(code[j - 1].c))) --j;
        if (j == 0) {
            ++i;
            continue;
        }
        auto [name, name_begin] = read_word_ending_at(j - 1);
        if (name.empty() || detail::is_control_keyword(name) ||
            std::isdigit(static_cast<unsigned char>(name[0]))) {
            ++i;
            continue;
        }
        // reject `new Foo(...)` and annotation arguments `@Foo(...)`
        std::size_t k = name_begin;
        while (k > 0 && std::isspace(static_cast<unsigned char>(code[k - 1].c))) --k;
        if (k > 0) {
            if (code[k - 1].c == '@') {
                ++i;
                continue;
            }
            auto [prev_word, prev_begin] = read_word_ending_at(k - 1);
            if (prev_word == "new") {
                ++i;
                continue;
            }
            (void)prev_begin;
        }

        // scan the parameter list
        std::size_t close = i;
        long paren = 0;
        long angle = 0;
        std::size_t commas = 0;
        bool any_param_char = false;
        for (; close < code.size(); ++close) {
            char c = code[close].c;
            if (c == '(') ++paren;
            else if (c == ')') {
                --paren;
                if (paren == 0) break;
            } else if (c == '<') ++angle;
            else if (c == '>' && angle > 0) --angle;
            else if (c == ',' && paren == 1 && angle == 0) ++commas;
            else if (paren == 1 && !std::isspace(static_cast<unsigned char>(c))) any_param_char = true;
        }
        if (close >= code.size()) {
            ++i;
            continue;
        }

        // after ')': optional throws clause, then '{' makes it a method
        std::size_t after = close + 1;
        while (after < code.size()) {
            char c = code[after].c;
            if (std::isspace(static_cast<unsigned char>(c)) || is_ident_char(c) || c == ',') {
                ++after;
                continue;
            }
            break;
        }
        if (after >= code.size() || code[after].c != '{') {
            i = close + 1;
            continue;
        }

        // method body: match the brace
        long depth = 0;
        std::size_t body_end = after;
        for (; body_end < code.size(); ++body_end) {
            if (code[body_end].c == '{') ++depth;
            if (code[body_end].c == '}') {
                --depth;
                if (depth == 0) break;
            }
        }
        if (body_end >= code.size()) throw Error("unbalanced braces");

        // signature start: just after the previous ';', '{' or '}' at code
        // level; annotations and modifiers fall inside that span
        std::size_t sig_begin_code = 0;
        for (std::size_t b = name_begin; b-- > 0;) {
            char c = code[b].c;
            if (c == ';' || c == '{' || c == '}') {
                sig_begin_code = b + 1;
                break;
            }
        }
        std::size_t start_pos = code[sig_begin_code].pos;
        std::size_t start_line = code[sig_begin_code].line;
        // skip leading whitespace of the span
        while (start_pos < code[name_begin].pos &&
               std::isspace(static_cast<unsigned char>(source[start_pos]))) {
            if (source[start_pos] == '\n') ++start_line;
            ++start_pos;
        }

        MethodInfo m;
        m.name = name;
        m.arity = any_param_char ? commas + 1 : 0;
        m.start_line = start_line;
        m.end_line = code[body_end].line;
        m.text = std::string(source.substr(start_pos, code[body_end].pos - start_pos + 1));
        methods.push_back(std::move(m));

        i = body_end + 1;
    }
    return methods;
}

inline std::optional<MethodInfo> find_method(std::string_view source, std::string_view name,
                                             long arity = -1) {
    for (MethodInfo& m : scan_methods(source))
        if (m.name == name && (arity < 0 || m.arity == static_cast<std::size_t>(arity)))
            return m;
    return std::nullopt;
}

// Replaces the named method's full text (annotations through closing brace)
// with `replacement`. Returns the new source, or nullopt when absent.
inline std::optional<std::string> replace_method(std::string_view source, std::string_view name,
                                                 std::string_view replacement, long arity = -1) {
    std::vector<MethodInfo> methods = scan_methods(source);
    for (const MethodInfo& m : methods) {
        if (m.name != name || (arity >= 0 && m.arity != static_cast<std::size_t>(arity))) continue;
        std::size_t begin = source.find(m.text);
        if (begin == std::string_view::npos) continue;
        std::string out(source.substr(0, begin));
        out += replacement;
        out += source.substr(begin + m.text.size());
        return out;
    }
    return std::nullopt;
}

}  // namespace ptco
