#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ptco/errors.hpp"
#include "ptco/text.hpp"

namespace ptco {

// One contiguous change: old lines [old_start, old_start+old_len) replaced by
// new lines [new_start, new_start+new_len). Starts are 1-based; a zero-length
// range uses the unified-diff convention (start = line before the insertion
// point, 0 when inserting at the top). `lines` holds the payload with '-'
// prefixes first, then '+' prefixes.
struct DiffHunk {
    std::size_t old_start = 0;
    std::size_t old_len = 0;
    std::size_t new_start = 0;
    std::size_t new_len = 0;
    std::vector<std::string> lines;
};

struct CodeDiff {
    std::string old_path;
    std::string new_path;
    std::vector<DiffHunk> hunks;
    std::set<std::size_t> changed_lines_new;  // 1-based lines added or modified in the new text

    // Retained so render_diff_text can emit context without re-reading files.
    std::vector<std::string> old_lines;
    bool old_ends_nl = false;
    bool new_ends_nl = false;

    bool empty() const { return hunks.empty(); }
};

namespace detail {

enum class DiffOp : std::uint8_t { Keep, Del, Add };

// LCS backtrack over the trimmed middles. Falls back to a whole-block replace
// when the DP table would be unreasonably large; the result is still a valid
// (if coarse) diff.
inline std::vector<DiffOp> diff_ops(const std::vector<std::string>& a, std::size_t a_off,
                                    std::size_t n, const std::vector<std::string>& b,
                                    std::size_t b_off, std::size_t m) {
    std::vector<DiffOp> ops;
    constexpr std::size_t kMaxCells = std::size_t{1} << 24;
    if ((n + 1) * (m + 1) > kMaxCells) {
        ops.insert(ops.end(), n, DiffOp::Del);
        ops.insert(ops.end(), m, DiffOp::Add);
        return ops;
    }
    std::vector<std::uint32_t> dp((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return dp[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            if (a[a_off + i] == b[b_off + j])
                at(i, j) = at(i + 1, j + 1) + 1;
            else
                at(i, j) = std::max(at(i + 1, j), at(i, j + 1));
        }
    }
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[a_off + i] == b[b_off + j]) {
            ops.push_back(DiffOp::Keep);
            ++i;
            ++j;
        } else if (at(i + 1, j) >= at(i, j + 1)) {
            ops.push_back(DiffOp::Del);
            ++i;
        } else {
            ops.push_back(DiffOp::Add);
            ++j;
        }
    }
    while (i++ < n) ops.push_back(DiffOp::Del);
    while (j++ < m) ops.push_back(DiffOp::Add);
    return ops;
}

}  // namespace detail

inline CodeDiff compute_diff(std::string_view old_text, std::string_view new_text,
                             std::string old_path = {}, std::string new_path = {}) {
    CodeDiff diff;
    diff.old_path = std::move(old_path);
    diff.new_path = std::move(new_path);
    diff.old_lines = split_lines(old_text);
    diff.old_ends_nl = ends_with_newline(old_text);
    diff.new_ends_nl = ends_with_newline(new_text);

    std::vector<std::string> new_lines = split_lines(new_text);

    // Compare "decorated" lines (content plus newline presence) so that a
    // change in the trailing newline makes the final line a change.
    auto decorate = [](const std::vector<std::string>& lines, bool ends_nl) {
        std::vector<std::string> dec(lines);
        for (std::size_t i = 0; i < dec.size(); ++i)
            if (i + 1 < dec.size() || ends_nl) dec[i] += '\n';
        return dec;
    };
    std::vector<std::string> a = decorate(diff.old_lines, diff.old_ends_nl);
    std::vector<std::string> b = decorate(new_lines, diff.new_ends_nl);

    if (a == b) return diff;

    std::size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
    std::size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix])
        ++suffix;

    std::size_t n = a.size() - prefix - suffix;
    std::size_t m = b.size() - prefix - suffix;
    auto ops = detail::diff_ops(a, prefix, n, b, prefix, m);

    std::size_t ai = prefix;  // 0-based cursors
    std::size_t bi = prefix;
    std::size_t k = 0;
    while (k < ops.size()) {
        if (ops[k] == detail::DiffOp::Keep) {
            ++ai;
            ++bi;
            ++k;
            continue;
        }
        DiffHunk hunk;
        std::size_t o_begin = ai;
        std::size_t n_begin = bi;
        std::vector<std::string> dels;
        std::vector<std::string> adds;
        while (k < ops.size() && ops[k] != detail::DiffOp::Keep) {
            if (ops[k] == detail::DiffOp::Del)
                dels.push_back(diff.old_lines[ai++]);
            else
                adds.push_back(new_lines[bi++]);
            ++k;
        }
        hunk.old_len = ai - o_begin;
        hunk.new_len = bi - n_begin;
        hunk.old_start = hunk.old_len > 0 ? o_begin + 1 : o_begin;
        hunk.new_start = hunk.new_len > 0 ? n_begin + 1 : n_begin;
        for (auto& l : dels) hunk.lines.push_back("-" + l);
        for (auto& l : adds) hunk.lines.push_back("+" + l);
        for (std::size_t ln = n_begin + 1; ln <= bi; ++ln) diff.changed_lines_new.insert(ln);
        diff.hunks.push_back(std::move(hunk));
    }
    return diff;
}

// Applies `diff` to `old_text`. Throws Error when the '-' side does not match.
inline std::string apply_diff(std::string_view old_text, const CodeDiff& diff) {
    std::vector<std::string> a = split_lines(old_text);
    std::vector<std::string> out;
    std::size_t cursor = 0;  // 0-based index into a
    for (const DiffHunk& hunk : diff.hunks) {
        std::size_t o_begin = hunk.old_len > 0 ? hunk.old_start - 1 : hunk.old_start;
        if (o_begin < cursor || o_begin + hunk.old_len > a.size())
            throw Error("diff hunk out of range");
        for (; cursor < o_begin; ++cursor) out.push_back(a[cursor]);
        std::size_t li = 0;
        for (std::size_t d = 0; d < hunk.old_len; ++d, ++li) {
            const std::string& line = hunk.lines.at(li);
            if (line.empty() || line[0] != '-' || line.substr(1) != a[cursor + d])
                throw Error("diff does not match old text at line " +
                            std::to_string(cursor + d + 1));
        }
        cursor += hunk.old_len;
        for (; li < hunk.lines.size(); ++li) {
            const std::string& line = hunk.lines.at(li);
            if (line.empty() || line[0] != '+') throw Error("malformed hunk payload");
            out.push_back(line.substr(1));
        }
    }
    for (; cursor < a.size(); ++cursor) out.push_back(a[cursor]);
    return join_lines(out, diff.hunks.empty() ? diff.old_ends_nl : diff.new_ends_nl);
}

// Unified-diff text. Zero hunks render as the empty string. File headers are
// emitted only when a path is set.
inline std::string render_diff_text(const CodeDiff& diff, std::size_t context_lines = 3) {
    if (diff.hunks.empty()) return {};

    struct Range {
        std::size_t o_begin, o_end, n_begin, n_end;  // 0-based, end exclusive
        const DiffHunk* hunk;
    };
    std::vector<Range> ranges;
    for (const DiffHunk& h : diff.hunks) {
        std::size_t ob = h.old_len > 0 ? h.old_start - 1 : h.old_start;
        std::size_t nb = h.new_len > 0 ? h.new_start - 1 : h.new_start;
        ranges.push_back({ob, ob + h.old_len, nb, nb + h.new_len, &h});
    }

    const std::size_t old_size = diff.old_lines.size();
    std::size_t new_size = old_size;
    for (const Range& r : ranges) new_size += (r.n_end - r.n_begin) - (r.o_end - r.o_begin);

    std::string out;
    if (!diff.old_path.empty() || !diff.new_path.empty()) {
        out += "--- " + diff.old_path + "\n";
        out += "+++ " + diff.new_path + "\n";
    }

    auto fmt_range = [](std::size_t start0, std::size_t len) {
        // unified convention: 1-based start, ",len" omitted when len == 1
        std::size_t shown = len > 0 ? start0 + 1 : start0;
        std::string s = std::to_string(shown);
        if (len != 1) s += "," + std::to_string(len);
        return s;
    };
    auto marker_if = [&](bool cond) {
        if (cond) out += "\\ No newline at end of file\n";
    };

    std::size_t g = 0;
    while (g < ranges.size()) {
        // Merge hunks whose context regions touch.
        std::size_t last = g;
        while (last + 1 < ranges.size() &&
               ranges[last + 1].o_begin <= ranges[last].o_end + 2 * context_lines)
            ++last;

        std::size_t ctx_begin = ranges[g].o_begin > context_lines
                                    ? ranges[g].o_begin - context_lines
                                    : 0;
        std::size_t ctx_end = std::min(old_size, ranges[last].o_end + context_lines);

        std::size_t old_count = ctx_end - ctx_begin;
        std::size_t new_count = old_count;
        for (std::size_t i = g; i <= last; ++i)
            new_count += (ranges[i].n_end - ranges[i].n_begin) -
                         (ranges[i].o_end - ranges[i].o_begin);
        std::size_t new_begin = ranges[g].n_begin - (ranges[g].o_begin - ctx_begin);

        out += "@@ -" + fmt_range(ctx_begin, old_count) + " +" + fmt_range(new_begin, new_count) +
               " @@\n";

        std::size_t pos = ctx_begin;          // 0-based old-file cursor
        std::size_t new_cursor = new_begin;   // 0-based new-file cursor
        auto emit_context = [&]() {
            out += " " + diff.old_lines[pos] + "\n";
            marker_if(pos + 1 == old_size && !diff.old_ends_nl);
            ++pos;
            ++new_cursor;
        };
        for (std::size_t i = g; i <= last; ++i) {
            while (pos < ranges[i].o_begin) emit_context();
            const DiffHunk& h = *ranges[i].hunk;
            std::size_t li = 0;
            for (std::size_t d = 0; d < h.old_len; ++d, ++li, ++pos) {
                out += h.lines[li] + "\n";
                marker_if(pos + 1 == old_size && !diff.old_ends_nl);
            }
            for (; li < h.lines.size(); ++li, ++new_cursor) {
                out += h.lines[li] + "\n";
                marker_if(new_cursor + 1 == new_size && !diff.new_ends_nl);
            }
        }
        while (pos < ctx_end) emit_context();
        g = last + 1;
    }
    return out;
}

}  // namespace ptco
