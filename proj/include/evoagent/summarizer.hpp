#pragma once

#include "evoagent/backend.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evoagent {

struct MalformedLogError : std::runtime_error {
    explicit MalformedLogError(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyTrajectoryError : std::runtime_error {
    explicit EmptyTrajectoryError(const std::string& what) : std::runtime_error(what) {}
};

struct RawStep {
    int index = 0;
    std::string thought;
    std::string action;
    std::string observation;
};

// Parses the step-framed trajectory log. Missing labeled blocks become empty
// strings; a log without a single step header is malformed.
std::vector<RawStep> parse_steps(const std::string& log);

struct ChunkSpec {
    int start = 0;  // 1-based, inclusive
    int end = 0;
};

// Consecutive non-overlapping windows covering [1, total]; the last window
// may be shorter.
std::vector<ChunkSpec> make_chunks(int total, int window);

// Continuity preview of steps [max(1, start-window), start-1]: each prior
// step's thought plus the first line of its observation, capped at max_bytes.
std::string chunk_prev_context(const std::vector<RawStep>& steps, int start, int window,
                               size_t max_bytes = 2048);

struct SummaryStep {
    int index = 0;
    std::string thought_summary;
    std::string obs_summary;
    bool backfilled = false;
    bool missing = false;  // placeholder for a step the model never emitted
};

// Parses one chunk's model output; steps outside [start, end] are dropped and
// indices missing from the output become placeholder steps. Never throws.
std::vector<SummaryStep> parse_chunk_output(const std::string& text, int start, int end);

struct TrajectorySummary {
    std::vector<SummaryStep> steps;  // exactly one per index 1..N
    int backfill_count = 0;
};

inline constexpr const char* kObsPlaceholderPrefix = "<OBS:";
inline constexpr const char* kBackfillLabel = "Important raw obs:";

// Appends the verbatim raw observation to every obs_summary carrying the
// placeholder prefix, lowest step indices first, for at most `cap` steps.
TrajectorySummary backfill_placeholders(std::vector<SummaryStep> steps,
                                        const std::vector<RawStep>& raw, int cap);

struct SummarizerPrompts {
    std::string chunk_system;
    std::string chunk_user;
};

struct SummarizerOptions {
    int window = 10;
    int backfill_cap = 3;
    int fan_out = 1;  // concurrent chunk calls
    GenerationSettings generation;
};

// Full pipeline: parse -> chunk -> per-chunk model call -> merge -> backfill.
// A failed chunk call degrades that chunk to placeholder steps.
TrajectorySummary summarize_trajectory(const std::string& log, ModelBackend& backend,
                                       const SummarizerPrompts& prompts,
                                       const SummarizerOptions& options,
                                       const std::string& backend_key = "summary");

// Step-framed rendering (same === STEP n === framing as the trajectory log).
std::string summary_to_text(const TrajectorySummary& summary);

}  // namespace evoagent
