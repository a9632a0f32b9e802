#include "evoagent/diff.hpp"

#include "evoagent/fs_tree.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace evoagent {

namespace {

struct Lines {
    std::vector<std::string> lines;
    bool trailing_newline = true;  // irrelevant when lines is empty
};

Lines split_content(const std::string& text) {
    Lines out;
    if (text.empty())
        return out;
    out.trailing_newline = text.back() == '\n';
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            out.lines.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    if (start < text.size())
        out.lines.push_back(text.substr(start));
    return out;
}

enum class Op { Keep, Del, Add };

struct Edit {
    Op op;
    size_t a_index;  // valid for Keep/Del
    size_t b_index;  // valid for Keep/Add
};

// Classic LCS edit script with common prefix/suffix trimming.
std::vector<Edit> edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    size_t pre = 0;
    while (pre < a.size() && pre < b.size() && a[pre] == b[pre])
        ++pre;
    size_t suf = 0;
    while (suf < a.size() - pre && suf < b.size() - pre &&
           a[a.size() - 1 - suf] == b[b.size() - 1 - suf])
        ++suf;

    size_t n = a.size() - pre - suf;
    size_t m = b.size() - pre - suf;

    std::vector<Edit> script;
    for (size_t i = 0; i < pre; ++i)
        script.push_back({Op::Keep, i, i});

    if (n > 0 && m > 0 && n * m <= size_t(16) * 1024 * 1024) {
        std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
        for (size_t i = n; i-- > 0;) {
            for (size_t j = m; j-- > 0;) {
                if (a[pre + i] == b[pre + j])
                    dp[i][j] = dp[i + 1][j + 1] + 1;
                else
                    dp[i][j] = std::max(dp[i + 1][j], dp[i][j + 1]);
            }
        }
        size_t i = 0, j = 0;
        while (i < n && j < m) {
            if (a[pre + i] == b[pre + j]) {
                script.push_back({Op::Keep, pre + i, pre + j});
                ++i;
                ++j;
            } else if (dp[i + 1][j] >= dp[i][j + 1]) {
                script.push_back({Op::Del, pre + i, 0});
                ++i;
            } else {
                script.push_back({Op::Add, 0, pre + j});
                ++j;
            }
        }
        while (i < n) {
            script.push_back({Op::Del, pre + i, 0});
            ++i;
        }
        while (j < m) {
            script.push_back({Op::Add, 0, pre + j});
            ++j;
        }
    } else {
        // One side empty or middle too large: replace wholesale.
        for (size_t i = 0; i < n; ++i)
            script.push_back({Op::Del, pre + i, 0});
        for (size_t j = 0; j < m; ++j)
            script.push_back({Op::Add, 0, pre + j});
    }

    for (size_t i = 0; i < suf; ++i)
        script.push_back({Op::Keep, a.size() - suf + i, b.size() - suf + i});
    return script;
}

struct Row {
    char tag;  // ' ', '-', '+'
    const std::string* text;
    bool no_newline;  // marker follows this row
};

}  // namespace

std::string unified_diff_body(const std::string& a, const std::string& b, int context) {
    if (a == b)
        return "";

    Lines la = split_content(a);
    Lines lb = split_content(b);
    auto script = edit_script(la.lines, lb.lines);

    // A final kept line whose trailing-newline state changed must become a
    // -/+ pair, otherwise the change would be invisible in the hunks.
    if (!script.empty() && script.back().op == Op::Keep &&
        la.trailing_newline != lb.trailing_newline) {
        Edit last = script.back();
        script.pop_back();
        script.push_back({Op::Del, last.a_index, 0});
        script.push_back({Op::Add, 0, last.b_index});
    }

    // Marker semantics: after a ' ' or '+' row it states that the NEW file
    // ends without a newline at that row; after a '-' row, the OLD file.
    std::vector<Row> rows;
    rows.reserve(script.size());
    for (const auto& e : script) {
        switch (e.op) {
        case Op::Keep:
            rows.push_back({' ', &la.lines[e.a_index],
                            !lb.trailing_newline && e.b_index + 1 == lb.lines.size()});
            break;
        case Op::Del:
            rows.push_back({'-', &la.lines[e.a_index],
                            !la.trailing_newline && e.a_index + 1 == la.lines.size()});
            break;
        case Op::Add:
            rows.push_back({'+', &lb.lines[e.b_index],
                            !lb.trailing_newline && e.b_index + 1 == lb.lines.size()});
            break;
        }
    }

    // Rows belonging to a hunk: every change plus `context` keeps around it.
    std::vector<bool> in_hunk(rows.size(), false);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].tag == ' ')
            continue;
        size_t lo = i >= size_t(context) ? i - context : 0;
        size_t hi = std::min(rows.size(), i + size_t(context) + 1);
        for (size_t k = lo; k < hi; ++k)
            in_hunk[k] = true;
    }

    std::ostringstream out;
    size_t a_line = 1, b_line = 1;
    size_t i = 0;
    while (i < rows.size()) {
        if (!in_hunk[i]) {
            if (rows[i].tag == ' ') {
                ++a_line;
                ++b_line;
            }
            ++i;
            continue;
        }
        size_t j = i;
        while (j < rows.size() && in_hunk[j])
            ++j;

        size_t a_start = a_line, b_start = b_line;
        size_t a_count = 0, b_count = 0;
        std::ostringstream body;
        for (size_t k = i; k < j; ++k) {
            body << rows[k].tag << *rows[k].text << '\n';
            if (rows[k].no_newline)
                body << "\\ No newline at end of file\n";
            if (rows[k].tag != '+') {
                ++a_count;
                ++a_line;
            }
            if (rows[k].tag != '-') {
                ++b_count;
                ++b_line;
            }
        }
        out << "@@ -" << (a_count == 0 ? a_start - 1 : a_start) << ',' << a_count << " +"
            << (b_count == 0 ? b_start - 1 : b_start) << ',' << b_count << " @@\n";
        out << body.str();
        i = j;
    }
    return out.str();
}

std::string unified_diff(const std::string& a, const std::string& b, const std::string& a_label,
                         const std::string& b_label, int context) {
    std::string body = unified_diff_body(a, b, context);
    if (body.empty())
        return "";
    return "--- " + a_label + "\n+++ " + b_label + "\n" + body;
}

std::string apply_unified_diff(const std::string& a, const std::string& diff_text) {
    Lines la = split_content(a);
    std::vector<std::string> out_lines;
    bool out_trailing = true;
    size_t cursor = 0;  // next unconsumed line of a

    std::vector<std::string> dl = split_lines(diff_text);
    size_t i = 0;
    bool saw_hunk = false;
    bool last_row_emitted = false;  // last hunk row produced an output line
    while (i < dl.size()) {
        const std::string& line = dl[i];
        if (!starts_with(line, "@@")) {
            ++i;  // header / noise between hunks
            continue;
        }
        saw_hunk = true;
        size_t a_start = 0, a_count = 0;
        if (std::sscanf(line.c_str(), "@@ -%zu,%zu", &a_start, &a_count) != 2)
            throw DiffApplyError("bad hunk header: " + line);
        size_t target = a_count == 0 ? a_start : a_start - 1;
        if (target < cursor || target > la.lines.size())
            throw DiffApplyError("hunk out of order at: " + line);
        while (cursor < target) {
            out_lines.push_back(la.lines[cursor]);
            ++cursor;
        }
        ++i;
        while (i < dl.size() && !starts_with(dl[i], "@@")) {
            const std::string& h = dl[i];
            if (starts_with(h, "\\")) {
                if (last_row_emitted)
                    out_trailing = false;
                ++i;
                continue;
            }
            if (h.empty()) {
                ++i;
                continue;
            }
            char tag = h[0];
            if (tag != ' ' && tag != '-' && tag != '+')
                break;  // start of the next file's header or trailing noise
            std::string text = h.substr(1);
            if (tag == ' ' || tag == '-') {
                if (cursor >= la.lines.size() || la.lines[cursor] != text)
                    throw DiffApplyError("context mismatch at source line " +
                                         std::to_string(cursor + 1));
                ++cursor;
            }
            if (tag == ' ' || tag == '+') {
                out_lines.push_back(text);
                out_trailing = true;
                last_row_emitted = true;
            } else {
                last_row_emitted = false;
            }
            ++i;
        }
    }
    if (!saw_hunk) {
        // Header-only diffs (e.g. an empty file created or deleted) change
        // nothing about the content itself.
        for (const auto& l : dl)
            if (!l.empty() && !starts_with(l, "--- ") && !starts_with(l, "+++ "))
                throw DiffApplyError("no hunks in diff text");
    }

    if (cursor < la.lines.size()) {
        while (cursor < la.lines.size()) {
            out_lines.push_back(la.lines[cursor]);
            ++cursor;
        }
        out_trailing = la.trailing_newline;
    }

    if (out_lines.empty())
        return "";
    std::string result = join(out_lines, "\n");
    if (out_trailing)
        result += "\n";
    return result;
}

std::vector<std::string> unified_diff_paths(const std::string& diff_text) {
    std::vector<std::string> paths;
    for (const auto& line : split_lines(diff_text)) {
        std::string p;
        if (starts_with(line, "--- a/"))
            p = line.substr(6);
        else if (starts_with(line, "+++ b/"))
            p = line.substr(6);
        else
            continue;
        if (p.empty())
            continue;
        if (std::find(paths.begin(), paths.end(), p) == paths.end())
            paths.push_back(p);
    }
    return paths;
}

int count_hunks(const std::string& diff_text) {
    int n = 0;
    for (const auto& line : split_lines(diff_text))
        if (starts_with(line, "@@"))
            ++n;
    return n;
}

}  // namespace evoagent
