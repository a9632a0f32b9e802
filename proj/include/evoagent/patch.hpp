#pragma once

#include "evoagent/fs_tree.hpp"
#include "evoagent/layer.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace evoagent {

// ---- XML patch actions ----

enum class PatchKind { ReplaceCode, CreateFile, DeleteFile };

struct PatchAction {
    PatchKind kind;
    std::string path;      // as written by the model; may be unsafe
    std::string search;    // ReplaceCode
    std::string replace;   // ReplaceCode (empty deletes the matched block)
    std::string content;   // CreateFile
    std::string rationale;
};

struct PatchParseResult {
    std::vector<PatchAction> actions;  // source order
    std::vector<std::string> notes;    // skipped malformed fragments
};

// Tolerant extraction of <replace_code>/<create_file>/<delete_file> actions
// from arbitrary model output; prose and <rationale> are non-semantic.
PatchParseResult parse_patches(const std::string& llm_output);

// ---- safety ----

struct SafetyRules {
    // Paths that may never be touched, regardless of phase.
    std::vector<std::string> protected_globs = {"skills/skill_template", "skills/skill_template/**"};
    // File holding the fenced scoring region.
    std::string scoring_file = "agent.py";
    std::string scoring_begin = "# === SUBMISSION SCORING: DO NOT MODIFY ===";
    std::string scoring_end = "# === END SUBMISSION SCORING ===";
};

struct UnsafeVerdict {
    bool unsafe = false;
    std::string reason;
};

// Path-level safety: traversal, absolute paths, protected globs, and (when a
// phase is given) any path attributed to a different layer.
UnsafeVerdict is_unsafe(const std::string& path, std::optional<LayerId> phase,
                        const LayerMap& map, const SafetyRules& rules = {});

// ---- fuzzy matching ----

// Per line: strip trailing line comments ('#', '//'), collapse inner
// whitespace runs, trim. Empty normalized lines stay as empty markers.
std::vector<std::string> fingerprint(const std::string& text);
std::string fingerprint_line(const std::string& line);

struct FuzzyMatch {
    size_t begin_line = 0;  // 0-based, inclusive
    size_t end_line = 0;    // 0-based, exclusive
    double quality = 0.0;   // in [0, 1]
};

inline constexpr double kDefaultFuzzyThreshold = 0.6;

// Anchors at lines equal to the search's first non-empty fingerprint line;
// each anchor scores a |search|-line window by an LCS sequence ratio.
// Returns the best window iff quality >= threshold.
std::optional<FuzzyMatch> fuzzy_locate(const std::vector<std::string>& file_fingerprint,
                                       const std::vector<std::string>& search_fingerprint,
                                       double threshold = kDefaultFuzzyThreshold);

// Best achievable quality regardless of the threshold (for reporting).
double fuzzy_best_quality(const std::vector<std::string>& file_fingerprint,
                          const std::vector<std::string>& search_fingerprint);

// Strips the replacement's common leading indentation and prepends `indent`
// to every non-empty line; blank lines stay blank.
std::string reindent(const std::string& replacement, const std::string& indent);

// ---- applying ----

enum class ApplyOutcome { Applied, SkippedUnsafe, SkippedAmbiguous, SkippedNoMatch, SkippedExists, Failed };

std::string apply_outcome_name(ApplyOutcome outcome);
std::optional<ApplyOutcome> apply_outcome_from_name(const std::string& name);

struct ActionReport {
    PatchAction action;
    ApplyOutcome outcome;
    std::string detail;          // reason for skips/failures
    int match_count = 0;         // SkippedAmbiguous
    double best_quality = 0.0;   // SkippedNoMatch
};

struct ApplyReport {
    std::vector<ActionReport> actions;  // one per input action, in order
    std::vector<std::string> notes;     // carried over from parsing

    int applied_count() const;
    std::string to_text() const;
};

struct ApplyOptions {
    std::optional<LayerId> phase;  // restrict edits to one layer; nullopt = any
    double fuzzy_threshold = kDefaultFuzzyThreshold;
    SafetyRules safety;
    LayerMap layer_map = LayerMap::default_map();
};

// Applies actions in order to the working tree. ReplaceCode: a unique exact
// occurrence is replaced; multiple occurrences skip as ambiguous; zero falls
// back to fuzzy location with re-indent. CreateFile skips existing paths;
// DeleteFile removes a file or directory prefix.
ApplyReport apply_actions(FileTree& root, const std::vector<PatchAction>& actions,
                          const ApplyOptions& options);

}  // namespace evoagent
