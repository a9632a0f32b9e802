#include "evoagent/patch.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace evoagent {

// ---- XML extraction ----

namespace {

// Finds `<tag ...>` or `<tag .../>` starting at or after `from`. Returns the
// position of '<' or npos.
size_t find_tag(const std::string& text, const std::string& tag, size_t from) {
    size_t pos = from;
    std::string needle = "<" + tag;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        size_t after = pos + needle.size();
        if (after < text.size() &&
            (text[after] == ' ' || text[after] == '>' || text[after] == '/' ||
             text[after] == '\n' || text[after] == '\t'))
            return pos;
        pos = after;
    }
    return std::string::npos;
}

std::optional<std::string> tag_attribute(const std::string& opening, const std::string& name) {
    for (char quote : {'"', '\''}) {
        std::string needle = name + "=" + quote;
        size_t pos = opening.find(needle);
        if (pos == std::string::npos)
            continue;
        size_t start = pos + needle.size();
        size_t end = opening.find(quote, start);
        if (end == std::string::npos)
            return std::nullopt;
        return opening.substr(start, end - start);
    }
    return std::nullopt;
}

// Block texture: the first newline after the opening tag and the closing
// tag's own indentation line are framing, not content.
std::string extract_body(const std::string& raw) {
    std::string body = raw;
    size_t first_nl = body.find('\n');
    if (first_nl != std::string::npos && trim(body.substr(0, first_nl)).empty())
        body = body.substr(first_nl + 1);
    size_t last_nl = body.rfind('\n');
    if (last_nl != std::string::npos && trim(body.substr(last_nl + 1)).empty())
        body = body.substr(0, last_nl + 1);
    return body;
}

// Extracts the body of `<tag>...</tag>` inside [from, limit). Returns nullopt
// when the pair is absent or unclosed.
std::optional<std::string> inner_block(const std::string& text, const std::string& tag,
                                       size_t from, size_t limit, size_t* end_out = nullptr) {
    size_t open = find_tag(text, tag, from);
    if (open == std::string::npos || open >= limit)
        return std::nullopt;
    size_t open_end = text.find('>', open);
    if (open_end == std::string::npos || open_end >= limit)
        return std::nullopt;
    std::string close = "</" + tag + ">";
    size_t close_pos = text.find(close, open_end + 1);
    if (close_pos == std::string::npos || close_pos > limit)
        return std::nullopt;
    if (end_out)
        *end_out = close_pos + close.size();
    return extract_body(text.substr(open_end + 1, close_pos - open_end - 1));
}

}  // namespace

PatchParseResult parse_patches(const std::string& llm_output) {
    PatchParseResult result;
    const std::string& text = llm_output;
    size_t cursor = 0;
    std::string pending_rationale;

    while (cursor < text.size()) {
        size_t rat = find_tag(text, "rationale", cursor);
        size_t rep = find_tag(text, "replace_code", cursor);
        size_t cre = find_tag(text, "create_file", cursor);
        size_t del = find_tag(text, "delete_file", cursor);
        size_t next = std::min(std::min(rat, rep), std::min(cre, del));
        if (next == std::string::npos)
            break;

        if (next == rat) {
            size_t end = 0;
            auto body = inner_block(text, "rationale", rat, text.size(), &end);
            if (body) {
                pending_rationale = trim(*body);
                cursor = end;
            } else {
                result.notes.push_back("unclosed <rationale> tag skipped");
                cursor = rat + 1;
            }
            continue;
        }

        size_t open_end = text.find('>', next);
        if (open_end == std::string::npos) {
            result.notes.push_back("truncated action tag skipped");
            break;
        }
        std::string opening = text.substr(next, open_end - next + 1);
        auto path = tag_attribute(opening, "path");

        if (next == del) {
            if (!path) {
                result.notes.push_back("<delete_file> without path skipped");
                cursor = open_end + 1;
                continue;
            }
            PatchAction action;
            action.kind = PatchKind::DeleteFile;
            action.path = *path;
            action.rationale = pending_rationale;
            pending_rationale.clear();
            result.actions.push_back(std::move(action));
            // Self-closing or paired form; skip the explicit close if present.
            if (opening.size() >= 2 && opening[opening.size() - 2] == '/') {
                cursor = open_end + 1;
            } else {
                size_t close_pos = text.find("</delete_file>", open_end + 1);
                cursor = close_pos == std::string::npos ? open_end + 1
                                                        : close_pos + strlen("</delete_file>");
            }
            continue;
        }

        const char* tag = next == rep ? "replace_code" : "create_file";
        std::string close = std::string("</") + tag + ">";
        size_t close_pos = text.find(close, open_end + 1);
        if (close_pos == std::string::npos) {
            result.notes.push_back(std::string("unclosed <") + tag + "> fragment skipped");
            cursor = open_end + 1;
            continue;
        }
        size_t limit = close_pos;

        if (!path) {
            result.notes.push_back(std::string("<") + tag + "> without path skipped");
            cursor = close_pos + close.size();
            continue;
        }

        if (next == rep) {
            auto search = inner_block(text, "search", open_end + 1, limit);
            auto replace = inner_block(text, "replace", open_end + 1, limit);
            if (!search || trim(*search).empty()) {
                result.notes.push_back("<replace_code> for " + *path +
                                       " lacks a usable <search> block; skipped");
                cursor = close_pos + close.size();
                continue;
            }
            PatchAction action;
            action.kind = PatchKind::ReplaceCode;
            action.path = *path;
            action.search = *search;
            action.replace = replace.value_or("");
            action.rationale = pending_rationale;
            pending_rationale.clear();
            result.actions.push_back(std::move(action));
        } else {
            auto content = inner_block(text, "content", open_end + 1, limit);
            if (!content) {
                result.notes.push_back("<create_file> for " + *path +
                                       " lacks a <content> block; skipped");
                cursor = close_pos + close.size();
                continue;
            }
            PatchAction action;
            action.kind = PatchKind::CreateFile;
            action.path = *path;
            action.content = *content;
            action.rationale = pending_rationale;
            pending_rationale.clear();
            result.actions.push_back(std::move(action));
        }
        cursor = close_pos + close.size();
    }
    return result;
}

// ---- safety ----

UnsafeVerdict is_unsafe(const std::string& path, std::optional<LayerId> phase,
                        const LayerMap& map, const SafetyRules& rules) {
    if (is_malformed_path(path))
        return {true, "path traversal or absolute path: " + path};
    std::string norm = normalize_rel_path(path);
    for (const auto& glob : rules.protected_globs)
        if (glob_match(glob, norm))
            return {true, "protected path: " + norm};
    if (phase) {
        auto layer = map.attribute(norm);
        if (!layer)
            return {true, "path outside every evolvable layer: " + norm};
        if (*layer != *phase)
            return {true, "layer mismatch: " + norm + " belongs to " + layer_name(*layer) +
                              ", active phase is " + layer_name(*phase)};
    }
    return {false, ""};
}

// ---- fingerprinting and fuzzy matching ----

std::string fingerprint_line(const std::string& line) {
    std::string body = line;
    size_t hash = body.find('#');
    size_t slashes = body.find("//");
    size_t cut = std::min(hash, slashes);
    if (cut != std::string::npos)
        body = body.substr(0, cut);

    std::string out;
    bool in_space = false;
    for (char c : body) {
        if (c == ' ' || c == '\t' || c == '\r') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty())
            out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

std::vector<std::string> fingerprint(const std::string& text) {
    std::vector<std::string> lines = split_lines(text);
    if (text.empty())
        lines.push_back("");  // "" fingerprints to [""]
    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto& line : lines)
        out.push_back(fingerprint_line(line));
    return out;
}

namespace {

size_t lcs_length(const std::vector<std::string>& a, size_t a_begin, size_t a_end,
                  const std::vector<std::string>& b) {
    size_t n = a_end - a_begin, m = b.size();
    std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (a[a_begin + i] == b[j])
                cur[j + 1] = prev[j] + 1;
            else
                cur[j + 1] = std::max(prev[j + 1], cur[j]);
        }
        std::swap(prev, cur);
        std::fill(cur.begin(), cur.end(), 0);
    }
    return prev[m];
}

struct BestWindow {
    bool found = false;
    size_t begin = 0, end = 0;
    double quality = 0.0;
};

BestWindow scan_windows(const std::vector<std::string>& file_fp,
                        const std::vector<std::string>& search_fp) {
    BestWindow best;
    std::string anchor;
    for (const auto& line : search_fp)
        if (!line.empty()) {
            anchor = line;
            break;
        }
    if (anchor.empty())
        return best;

    for (size_t i = 0; i < file_fp.size(); ++i) {
        if (file_fp[i] != anchor)
            continue;
        size_t end = std::min(i + search_fp.size(), file_fp.size());
        size_t lcs = lcs_length(file_fp, i, end, search_fp);
        double quality = 2.0 * static_cast<double>(lcs) /
                         static_cast<double>((end - i) + search_fp.size());
        if (!best.found || quality > best.quality) {
            best = {true, i, end, quality};
        }
    }
    return best;
}

}  // namespace

std::optional<FuzzyMatch> fuzzy_locate(const std::vector<std::string>& file_fingerprint,
                                       const std::vector<std::string>& search_fingerprint,
                                       double threshold) {
    if (search_fingerprint.empty())
        return std::nullopt;
    BestWindow best = scan_windows(file_fingerprint, search_fingerprint);
    if (!best.found || best.quality < threshold)
        return std::nullopt;
    return FuzzyMatch{best.begin, best.end, best.quality};
}

double fuzzy_best_quality(const std::vector<std::string>& file_fingerprint,
                          const std::vector<std::string>& search_fingerprint) {
    return scan_windows(file_fingerprint, search_fingerprint).quality;
}

std::string reindent(const std::string& replacement, const std::string& indent) {
    if (replacement.empty())
        return replacement;
    std::vector<std::string> lines = split_lines(replacement);
    bool trailing_newline = replacement.back() == '\n';

    std::optional<std::string> common;
    for (const auto& line : lines) {
        if (trim(line).empty())
            continue;
        size_t ws = line.find_first_not_of(" \t");
        std::string prefix = line.substr(0, ws == std::string::npos ? line.size() : ws);
        if (!common) {
            common = prefix;
        } else {
            size_t k = 0;
            while (k < common->size() && k < prefix.size() && (*common)[k] == prefix[k])
                ++k;
            common->resize(k);
        }
    }
    size_t strip = common ? common->size() : 0;

    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto& line : lines) {
        if (trim(line).empty()) {
            out.push_back("");
        } else {
            out.push_back(indent + line.substr(strip));
        }
    }
    std::string joined = join(out, "\n");
    if (trailing_newline)
        joined += "\n";
    return joined;
}

// ---- applying ----

std::string apply_outcome_name(ApplyOutcome outcome) {
    switch (outcome) {
    case ApplyOutcome::Applied: return "applied";
    case ApplyOutcome::SkippedUnsafe: return "skipped_unsafe";
    case ApplyOutcome::SkippedAmbiguous: return "skipped_ambiguous";
    case ApplyOutcome::SkippedNoMatch: return "skipped_no_match";
    case ApplyOutcome::SkippedExists: return "skipped_exists";
    case ApplyOutcome::Failed: return "failed";
    }
    return "?";
}

std::optional<ApplyOutcome> apply_outcome_from_name(const std::string& name) {
    for (ApplyOutcome o : {ApplyOutcome::Applied, ApplyOutcome::SkippedUnsafe,
                           ApplyOutcome::SkippedAmbiguous, ApplyOutcome::SkippedNoMatch,
                           ApplyOutcome::SkippedExists, ApplyOutcome::Failed})
        if (apply_outcome_name(o) == name)
            return o;
    return std::nullopt;
}

namespace {

struct LineSpan {
    size_t begin = 0, end = 0;  // 0-based, end exclusive
    bool valid = false;
};

LineSpan scoring_span(const std::string& content, const SafetyRules& rules) {
    LineSpan span;
    auto lines = split_lines(content);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!span.valid && trim(lines[i]) == rules.scoring_begin) {
            span.begin = i;
            span.valid = true;
        } else if (span.valid && trim(lines[i]) == rules.scoring_end) {
            span.end = i + 1;
            return span;
        }
    }
    if (span.valid)
        span.end = lines.size();  // unterminated region protects to EOF
    return span;
}

bool spans_intersect(const LineSpan& a, size_t begin, size_t end) {
    return a.valid && begin < a.end && a.begin < end;
}

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    if (needle.empty())
        return 0;
    size_t count = 0, pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

size_t line_of_offset(const std::string& content, size_t offset) {
    return static_cast<size_t>(std::count(content.begin(), content.begin() + offset, '\n'));
}

std::string leading_whitespace(const std::string& line) {
    size_t ws = line.find_first_not_of(" \t");
    return line.substr(0, ws == std::string::npos ? line.size() : ws);
}

}  // namespace

int ApplyReport::applied_count() const {
    int n = 0;
    for (const auto& a : actions)
        if (a.outcome == ApplyOutcome::Applied)
            ++n;
    return n;
}

std::string ApplyReport::to_text() const {
    std::ostringstream out;
    int index = 1;
    for (const auto& a : actions) {
        const char* kind = a.action.kind == PatchKind::ReplaceCode  ? "replace_code"
                           : a.action.kind == PatchKind::CreateFile ? "create_file"
                                                                    : "delete_file";
        out << index++ << ". " << kind << " " << a.action.path << ": "
            << apply_outcome_name(a.outcome);
        if (a.outcome == ApplyOutcome::SkippedAmbiguous)
            out << " (" << a.match_count << " matches)";
        if (a.outcome == ApplyOutcome::SkippedNoMatch)
            out << " (best quality " << a.best_quality << ")";
        if (!a.detail.empty())
            out << " - " << a.detail;
        out << "\n";
    }
    for (const auto& note : notes)
        out << "note: " << note << "\n";
    return out.str();
}

ApplyReport apply_actions(FileTree& root, const std::vector<PatchAction>& actions,
                          const ApplyOptions& options) {
    ApplyReport report;

    for (const auto& action : actions) {
        ActionReport entry;
        entry.action = action;
        entry.outcome = ApplyOutcome::Applied;

        auto verdict = is_unsafe(action.path, options.phase, options.layer_map, options.safety);
        if (verdict.unsafe) {
            entry.outcome = ApplyOutcome::SkippedUnsafe;
            entry.detail = verdict.reason;
            report.actions.push_back(std::move(entry));
            continue;
        }
        std::string path = normalize_rel_path(action.path);

        try {
            switch (action.kind) {
            case PatchKind::CreateFile: {
                if (root.count(path)) {
                    entry.outcome = ApplyOutcome::SkippedExists;
                    entry.detail = "file already exists";
                    break;
                }
                bool is_dir_prefix = false;
                for (const auto& [existing, _] : root)
                    if (starts_with(existing, path + "/")) {
                        is_dir_prefix = true;
                        break;
                    }
                if (is_dir_prefix) {
                    entry.outcome = ApplyOutcome::Failed;
                    entry.detail = "path names an existing directory";
                    break;
                }
                root[path] = action.content;
                break;
            }
            case PatchKind::DeleteFile: {
                const std::string& scoring = options.safety.scoring_file;
                if (path == scoring || starts_with(scoring, path + "/")) {
                    entry.outcome = ApplyOutcome::SkippedUnsafe;
                    entry.detail = "deleting the scoring entrypoint file";
                    break;
                }
                root.erase(path);
                for (auto it = root.begin(); it != root.end();) {
                    if (starts_with(it->first, path + "/"))
                        it = root.erase(it);
                    else
                        ++it;
                }
                break;
            }
            case PatchKind::ReplaceCode: {
                auto file_it = root.find(path);
                if (file_it == root.end()) {
                    entry.outcome = ApplyOutcome::Failed;
                    entry.detail = "no such file";
                    break;
                }
                std::string& content = file_it->second;
                LineSpan protected_span;
                if (path == options.safety.scoring_file)
                    protected_span = scoring_span(content, options.safety);

                size_t n = count_occurrences(content, action.search);
                if (n > 1) {
                    entry.outcome = ApplyOutcome::SkippedAmbiguous;
                    entry.match_count = static_cast<int>(n);
                    entry.detail = "search block is not unique; add surrounding context";
                    break;
                }
                if (n == 1) {
                    size_t offset = content.find(action.search);
                    size_t begin_line = line_of_offset(content, offset);
                    size_t search_lines =
                        static_cast<size_t>(std::count(action.search.begin(),
                                                       action.search.end(), '\n')) +
                        (ends_with(action.search, "\n") ? 0 : 1);
                    size_t end_line = begin_line + std::max<size_t>(search_lines, 1);
                    if (spans_intersect(protected_span, begin_line, end_line)) {
                        entry.outcome = ApplyOutcome::SkippedUnsafe;
                        entry.detail = "edit intersects the protected scoring region";
                        break;
                    }
                    content.replace(offset, action.search.size(), action.replace);
                    break;
                }

                // Fuzzy fallback over whitespace/comment-normalized lines.
                auto file_fp = fingerprint(content);
                auto search_fp = fingerprint(action.search);
                auto match = fuzzy_locate(file_fp, search_fp, options.fuzzy_threshold);
                if (!match) {
                    entry.outcome = ApplyOutcome::SkippedNoMatch;
                    entry.best_quality = fuzzy_best_quality(file_fp, search_fp);
                    entry.detail = "no exact occurrence and fuzzy match below threshold";
                    break;
                }
                if (spans_intersect(protected_span, match->begin_line, match->end_line)) {
                    entry.outcome = ApplyOutcome::SkippedUnsafe;
                    entry.detail = "edit intersects the protected scoring region";
                    break;
                }

                std::vector<std::string> lines = split_lines(content);
                bool trailing = !content.empty() && content.back() == '\n';
                std::string indent = leading_whitespace(lines[match->begin_line]);
                std::string replacement = reindent(action.replace, indent);
                std::vector<std::string> replacement_lines = split_lines(replacement);

                std::vector<std::string> rebuilt(lines.begin(),
                                                 lines.begin() + static_cast<long>(match->begin_line));
                for (auto& line : replacement_lines)
                    rebuilt.push_back(std::move(line));
                rebuilt.insert(rebuilt.end(), lines.begin() + static_cast<long>(match->end_line),
                               lines.end());
                content = join(rebuilt, "\n");
                if (trailing && !content.empty())
                    content += "\n";
                break;
            }
            }
        } catch (const std::exception& e) {
            entry.outcome = ApplyOutcome::Failed;
            entry.detail = e.what();
        }
        report.actions.push_back(std::move(entry));
    }
    return report;
}

}  // namespace evoagent
