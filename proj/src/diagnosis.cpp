#include "evoagent/diagnosis.hpp"

#include "evoagent/fs_tree.hpp"
#include "evoagent/template_engine.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace evoagent {

std::string priority_name(Priority p) {
    switch (p) {
    case Priority::P0: return "P0";
    case Priority::P1: return "P1";
    case Priority::P2: return "P2";
    }
    return "?";
}

std::optional<Priority> priority_from_name(const std::string& name) {
    std::string up = name;
    std::transform(up.begin(), up.end(), up.begin(), ::toupper);
    if (up == "P0")
        return Priority::P0;
    if (up == "P1")
        return Priority::P1;
    if (up == "P2")
        return Priority::P2;
    return std::nullopt;
}

namespace {

const std::pair<Classification, const char*> kClassifications[] = {
    {Classification::KnowledgeGap, "Knowledge Gap"},
    {Classification::ExecutionNoise, "Execution Noise"},
    {Classification::StrategyDivergence, "Strategy Divergence"},
    {Classification::ToolMisuse, "Tool Misuse"},
    {Classification::ReasoningFlaw, "Reasoning Flaw"},
    {Classification::MemoryLimitation, "Memory Limitation"},
    {Classification::VerificationGap, "Verification Gap"},
    {Classification::PrerequisiteViolation, "Prerequisite Violation"},
};

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

// Lowercase letters only: field names compare independent of *, spaces, case.
std::string letters_key(const std::string& s) {
    std::string out;
    for (unsigned char c : s)
        if (std::isalpha(c))
            out += static_cast<char>(std::tolower(c));
    return out;
}

}  // namespace

std::string classification_name(Classification c) {
    for (const auto& [value, name] : kClassifications)
        if (value == c)
            return name;
    return "?";
}

std::optional<Classification> classification_from_name(const std::string& name) {
    std::string key = letters_key(name);
    for (const auto& [value, text] : kClassifications)
        if (letters_key(text) == key)
            return value;
    return std::nullopt;
}

std::variant<int, ScoreError> extract_score(const std::string& text) {
    std::optional<long> last;
    for (const auto& line : split_lines(text)) {
        size_t pos = line.find("SCORE:");
        if (pos == std::string::npos)
            continue;
        size_t i = pos + 6;
        while (i < line.size() && (line[i] == ' ' || line[i] == '*'))
            ++i;
        bool negative = false;
        if (i < line.size() && line[i] == '-') {
            negative = true;
            ++i;
        }
        size_t digits = i;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits])))
            ++digits;
        if (digits == i)
            continue;  // no integer after the label; not a score line
        long value = std::stol(line.substr(i, digits - i));
        last = negative ? -value : value;
    }
    if (!last)
        return ScoreError::Missing;
    if (*last < 0 || *last > 100)
        return ScoreError::OutOfRange;
    return static_cast<int>(*last);
}

namespace {

// Heading line "### <n>. <title>" -> section number; numbering is required,
// titles are not, case and whitespace are flexible.
std::optional<int> parse_section_heading(const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t[0] != '#')
        return std::nullopt;
    size_t i = 0;
    while (i < t.size() && t[i] == '#')
        ++i;
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i])))
        ++i;
    if (i >= t.size() || !std::isdigit(static_cast<unsigned char>(t[i])))
        return std::nullopt;
    int n = t[i] - '0';
    ++i;
    if (i < t.size() && !(t[i] == '.' || t[i] == ')' || std::isspace(static_cast<unsigned char>(t[i]))))
        return std::nullopt;
    return n <= 3 ? std::optional<int>(n) : std::nullopt;
}

// "**Weakness 3 (P1): title**" (bold optional) -> (priority, title).
std::optional<std::pair<Priority, std::string>> parse_weakness_header(const std::string& line) {
    std::string t = trim(line);
    while (starts_with(t, "*"))
        t = t.substr(1);
    while (ends_with(t, "*"))
        t.pop_back();
    t = trim(t);
    if (lower(t).rfind("weakness", 0) != 0)
        return std::nullopt;
    size_t open = t.find('(');
    size_t close = t.find(')', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos)
        return std::nullopt;
    std::string tag = trim(t.substr(open + 1, close - open - 1));
    // "P0/P1/P2" style tags pick the first listed priority.
    size_t slash = tag.find('/');
    if (slash != std::string::npos)
        tag = trim(tag.substr(0, slash));
    auto priority = priority_from_name(tag);
    if (!priority)
        return std::nullopt;
    std::string title;
    size_t colon = t.find(':', close);
    if (colon != std::string::npos)
        title = trim(t.substr(colon + 1));
    return std::make_pair(*priority, title);
}

// "* **Field**: value" / "- Field: value" -> (field key, value start).
std::optional<std::pair<std::string, std::string>> parse_field_line(const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || (t[0] != '*' && t[0] != '-'))
        return std::nullopt;
    t = trim(t.substr(1));
    size_t colon = t.find(':');
    if (colon == std::string::npos)
        return std::nullopt;
    std::string name = t.substr(0, colon);
    // Parenthetical qualifiers in the name ("(lightweight)") are noise.
    size_t paren = name.find('(');
    if (paren != std::string::npos)
        name = name.substr(0, paren);
    std::string key = letters_key(name);
    if (key.empty())
        return std::nullopt;
    return std::make_pair(key, trim(t.substr(colon + 1)));
}

void assign_weakness_field(Weakness& w, const std::string& key, const std::string& value) {
    if (key == "description") {
        w.description = value;
    } else if (starts_with(key, "whereitshowsup")) {
        w.where_shown = value;
    } else if (starts_with(key, "stepswasted")) {
        w.steps_wasted = value;
    } else if (starts_with(key, "earliestpivot")) {
        w.earliest_pivot = value;
    } else if (starts_with(key, "blockingargument")) {
        w.blocking_argument = value;
    } else if (key == "impact") {
        w.impact = value;
    } else if (starts_with(key, "rootcause")) {
        w.root_cause = value;
        w.root_cause_inferred = value.find("INFERENCE") != std::string::npos;
    } else if (key == "classification") {
        for (const auto& [cls, name] : kClassifications) {
            if (lower(value).find(lower(name)) != std::string::npos) {
                w.classification = cls;
                break;
            }
        }
    } else if (starts_with(key, "counterfactual")) {
        w.counterfactual = value;
    }
}

}  // namespace

DiagnosisParseResult parse_diagnosis(const std::string& text) {
    DiagnosisParseResult result;
    DiagnosisReport& report = result.report;
    report.raw = text;

    auto lines = split_lines(text);
    int section = -1;
    Weakness* current_weakness = nullptr;
    std::string current_field;
    std::vector<std::string> assessment_lines;

    auto append_bullet_list = [&](std::vector<std::string>& list, const std::string& line) {
        std::string t = trim(line);
        if (t.empty())
            return;
        if (t[0] == '-' || t[0] == '*') {
            list.push_back(trim(t.substr(1)));
        } else if (!list.empty()) {
            list.back() += "\n" + t;
        }
    };

    for (const auto& line : lines) {
        if (auto n = parse_section_heading(line)) {
            section = *n;
            current_weakness = nullptr;
            current_field.clear();
            continue;
        }
        switch (section) {
        case 0:
            append_bullet_list(report.truths, line);
            break;
        case 1:
            append_bullet_list(report.highlights, line);
            break;
        case 2: {
            if (auto header = parse_weakness_header(line)) {
                report.weaknesses.push_back(Weakness{});
                current_weakness = &report.weaknesses.back();
                current_weakness->priority = header->first;
                current_weakness->title = header->second;
                current_field.clear();
                continue;
            }
            if (!current_weakness)
                break;
            if (auto field = parse_field_line(line)) {
                current_field = field->first;
                assign_weakness_field(*current_weakness, field->first, field->second);
            } else if (!current_field.empty() && !trim(line).empty()) {
                // Continuation of a multi-line field value.
                Weakness& w = *current_weakness;
                std::string extra = trim(line);
                auto extend = [&](std::string& target) {
                    if (!target.empty())
                        target += "\n";
                    target += extra;
                };
                if (current_field == "description")
                    extend(w.description);
                else if (starts_with(current_field, "whereitshowsup"))
                    extend(w.where_shown);
                else if (starts_with(current_field, "rootcause")) {
                    extend(w.root_cause);
                    w.root_cause_inferred |= extra.find("INFERENCE") != std::string::npos;
                } else if (starts_with(current_field, "counterfactual"))
                    extend(w.counterfactual);
                else if (starts_with(current_field, "blockingargument"))
                    extend(w.blocking_argument);
            }
            break;
        }
        case 3:
            if (line.find("SCORE:") == std::string::npos)
                assessment_lines.push_back(line);
            break;
        default:
            break;
        }
    }
    report.assessment = trim(join(assessment_lines, "\n"));

    auto score = extract_score(text);
    if (auto* error = std::get_if<ScoreError>(&score)) {
        result.score_error = *error;
        report.score = 0;
    } else {
        report.score = std::get<int>(score);
    }
    return result;
}

std::string render_diagnosis(const DiagnosisReport& report) {
    std::ostringstream out;
    out << "### 0. Validated Truths\n";
    for (const auto& t : report.truths)
        out << "- " << t << "\n";
    out << "\n### 1. Strategic Highlights\n";
    for (const auto& h : report.highlights)
        out << "- " << h << "\n";
    out << "\n### 2. Weakness Analysis\n";
    int index = 1;
    for (const auto& w : report.weaknesses) {
        out << "**Weakness " << index++ << " (" << priority_name(w.priority)
            << "): " << w.title << "**\n";
        out << "* Description: " << w.description << "\n";
        out << "* Where it shows up: " << w.where_shown << "\n";
        out << "* Steps wasted: " << w.steps_wasted << "\n";
        out << "* Earliest pivot signal: " << w.earliest_pivot << "\n";
        out << "* Blocking argument: " << w.blocking_argument << "\n";
        out << "* Impact: " << w.impact << "\n";
        out << "* Root cause: " << w.root_cause;
        if (w.root_cause_inferred && w.root_cause.find("INFERENCE") == std::string::npos)
            out << " (INFERENCE)";
        out << "\n";
        out << "* Classification: "
            << (w.classification ? "[" + classification_name(*w.classification) + "]" : "") << "\n";
        out << "* Counterfactual: " << w.counterfactual << "\n\n";
    }
    out << "### 3. Final Assessment\n";
    if (!report.assessment.empty())
        out << report.assessment << "\n";
    out << "SCORE: " << report.score << "\n";
    return out.str();
}

std::string diagnosis_sidecar(const DiagnosisReport& report) {
    std::ostringstream out;
    out << "truths = " << report.truths.size() << "\n";
    out << "highlights = " << report.highlights.size() << "\n";
    out << "weaknesses = " << report.weaknesses.size() << "\n";
    int index = 1;
    for (const auto& w : report.weaknesses) {
        out << "weakness." << index << ".priority = " << priority_name(w.priority) << "\n";
        out << "weakness." << index << ".title = " << w.title << "\n";
        if (w.classification)
            out << "weakness." << index
                << ".classification = " << classification_name(*w.classification) << "\n";
        ++index;
    }
    out << "score = " << report.score << "\n";
    return out.str();
}

std::variant<std::vector<ChatMessage>, DiagnosisDisabled> build_diagnosis_prompt(
    const TrajectorySummary& summary, const Challenge& challenge,
    const DiagnosisPrompts& prompts) {
    if (!prompts.enabled())
        return DiagnosisDisabled{};

    std::ostringstream content;
    content << "# Challenge: " << challenge.name << "\n\n" << challenge.prompt << "\n\n";
    content << "# Trajectory Summary\n\n" << summary_to_text(summary);

    TemplateVars vars;
    vars["raw_content"] = content.str();
    std::vector<ChatMessage> messages;
    messages.push_back({"system", render_template(*prompts.system, vars)});
    messages.push_back({"user", render_template(*prompts.user, vars)});
    return messages;
}

std::vector<std::string> rank_siblings(const std::vector<std::pair<std::string, int>>& nodes) {
    std::vector<size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return nodes[a].second > nodes[b].second; });
    std::vector<std::string> ids;
    ids.reserve(nodes.size());
    for (size_t i : order)
        ids.push_back(nodes[i].first);
    return ids;
}

}  // namespace evoagent
