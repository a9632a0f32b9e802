#pragma once

#include "evoagent/backend.hpp"
#include "evoagent/challenge.hpp"
#include "evoagent/summarizer.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace evoagent {

enum class Priority { P0, P1, P2 };

std::string priority_name(Priority p);
std::optional<Priority> priority_from_name(const std::string& name);

enum class Classification {
    KnowledgeGap,
    ExecutionNoise,
    StrategyDivergence,
    ToolMisuse,
    ReasoningFlaw,
    MemoryLimitation,
    VerificationGap,
    PrerequisiteViolation,
};

std::string classification_name(Classification c);  // e.g. "Knowledge Gap"
std::optional<Classification> classification_from_name(const std::string& name);

struct Weakness {
    std::string title;
    Priority priority = Priority::P2;
    std::string description;
    std::string where_shown;
    std::string steps_wasted;
    std::string earliest_pivot;
    std::string blocking_argument;
    std::string impact;
    std::string root_cause;
    bool root_cause_inferred = false;  // "INFERENCE" marker present
    std::optional<Classification> classification;
    std::string counterfactual;
};

struct DiagnosisReport {
    std::vector<std::string> truths;
    std::vector<std::string> highlights;
    std::vector<Weakness> weaknesses;  // document order
    std::string assessment;
    int score = 0;  // 0..100
    std::string raw;
};

enum class ScoreError { Missing, OutOfRange };

// Matches the last "SCORE: <n>" line; values outside [0,100] are rejected.
std::variant<int, ScoreError> extract_score(const std::string& text);

struct DiagnosisParseResult {
    DiagnosisReport report;
    std::optional<ScoreError> score_error;  // report.score is 0 when set
};

// Tolerant section-grammar parse; never fails on arbitrary text.
DiagnosisParseResult parse_diagnosis(const std::string& text);

// Renders a report back to the section grammar (left inverse of
// parse_diagnosis on the structured fields).
std::string render_diagnosis(const DiagnosisReport& report);

// Key-value sidecar (section counts, weaknesses, score) for persistence.
std::string diagnosis_sidecar(const DiagnosisReport& report);

struct DiagnosisDisabled {};  // the active prompt pack has no diagnosis call

struct DiagnosisPrompts {
    std::optional<std::string> system;
    std::optional<std::string> user;
    bool enabled() const { return system && user; }
};

// System message verbatim from the pack; the rendered summary (plus challenge
// metadata header) fills the user template's content slot.
std::variant<std::vector<ChatMessage>, DiagnosisDisabled> build_diagnosis_prompt(
    const TrajectorySummary& summary, const Challenge& challenge,
    const DiagnosisPrompts& prompts);

// Descending by score, ties by ascending creation order (input order).
std::vector<std::string> rank_siblings(const std::vector<std::pair<std::string, int>>& nodes);

}  // namespace evoagent
