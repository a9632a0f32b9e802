#pragma once

#include "evoagent/backend.hpp"
#include "evoagent/challenge.hpp"
#include "evoagent/executor.hpp"
#include "evoagent/scaffold.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace evoagent {

// ---- action parsing ----

enum class ParseErrorKind { NoBlock, NoReasoning, MultipleBlocks, Other };

struct ActionParseError {
    ParseErrorKind kind;
    int block_count = 0;  // for MultipleBlocks
};

struct ParsedAction {
    std::string thought;  // reasoning text before the code block
    std::string command;  // fenced block body, verbatim
};

// A parse failure is a normal turn outcome, never an exception.
std::variant<ParsedAction, ActionParseError> parse_bash_action(const std::string& response);

// ---- trajectory ----

struct StepRecord {
    int index = 0;  // 1-based
    std::string thought;
    std::optional<std::string> action;  // absent iff the turn failed parsing
    std::string observation;
    std::optional<int> returncode;  // absent for non-executed turns
    bool timed_out = false;
};

enum class EpisodeStatus { Solved, Unsolved };

struct Trajectory {
    std::vector<StepRecord> steps;
    EpisodeStatus status = EpisodeStatus::Unsolved;
    std::vector<std::string> loaded_skills;
    bool aborted = false;  // backend failed mid-episode; steps are partial
    std::string abort_reason;
};

// Step-framed persistence format, also the summarizer's input.
std::string trajectory_to_log(const Trajectory& trajectory);

// ---- per-turn pieces ----

struct RuntimeOptions {
    std::chrono::seconds command_timeout{120};
    size_t observation_cap = 64 * 1024;  // bytes of command output kept per observation
    int max_skills = 4;
    GenerationSettings generation;
};

// Renders one observation from the scaffold's observation template: command
// output (head-truncated at the cap with an explicit marker), return code,
// timeout notice and the working-directory prompt line.
std::string render_observation(const ExecutionResult& result, const std::string& cwd,
                               const AgentScaffold& scaffold, size_t observation_cap);

std::string render_parse_error(const ActionParseError& error, const AgentScaffold& scaffold);

struct SkillLoadResult {
    std::string observation;
    std::optional<std::string> loaded;  // skill name when the load succeeded
};

// Intercepts the skill-loading primitive ("load_skill --name <name>");
// returns nullopt when the command should go to the executor instead.
std::optional<SkillLoadResult> handle_load_skill(const std::string& command,
                                                 const AgentScaffold& scaffold);

enum class SubmissionVerdict { Solved, Incorrect, NotASubmission };

struct SubmissionResult {
    SubmissionVerdict verdict;
    std::string message;  // scorer message (appended to the observation)
};

struct VerifierFailure : std::runtime_error {
    explicit VerifierFailure(const std::string& what) : std::runtime_error(what) {}
};

// Checks whether `text` is a `submit <token>` command and scores it against
// the challenge verifier. Exact-flag verifiers compare bytes; command
// verifiers run the configured command (token substituted for "{token}")
// and treat exit 0 as solved.
SubmissionResult verify_submission(const std::string& text, const Challenge& challenge,
                                   CommandExecutor* executor = nullptr,
                                   const std::string& cwd = "");

// ---- the episode loop ----

// Runs one bounded ReAct episode of the scaffold against the challenge in
// `workspace` (challenge files are copied in if absent). Every turn appends
// exactly one StepRecord; a verified submission ends the episode as Solved.
Trajectory run_episode(const AgentScaffold& scaffold, const Challenge& challenge,
                       ModelBackend& backend, CommandExecutor& executor,
                       const std::string& workspace, const RuntimeOptions& options,
                       const std::string& backend_key = "episode");

}  // namespace evoagent
