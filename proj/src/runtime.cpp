#include "evoagent/runtime.hpp"

#include "evoagent/template_engine.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

namespace evoagent {

namespace {

bool is_open_fence(const std::string& line) { return trim(line) == "```bash"; }
bool is_close_fence(const std::string& line) { return trim(line) == "```"; }

const char* kCommandDocs =
    "submit <flag>\n"
    "    Submit a candidate flag to the scorer. This is the only way to solve\n"
    "    the challenge; submitting does not execute a shell command.\n"
    "load_skill --name <skill_name>\n"
    "    Inject the named skill's full playbook into your context as the next\n"
    "    observation. Load a skill before attempting its vulnerability class.";

}  // namespace

std::variant<ParsedAction, ActionParseError> parse_bash_action(const std::string& response) {
    auto lines = split_lines(response);

    int blocks = 0;
    bool in_block = false;
    std::vector<std::string> first_body;
    std::vector<std::string> before_first;
    bool first_done = false;

    for (const auto& line : lines) {
        if (!in_block && is_open_fence(line)) {
            in_block = true;
            ++blocks;
            continue;
        }
        if (in_block && is_close_fence(line)) {
            in_block = false;
            if (blocks == 1)
                first_done = true;
            continue;
        }
        if (in_block) {
            if (blocks == 1)
                first_body.push_back(line);
        } else if (blocks == 0) {
            before_first.push_back(line);
        }
    }

    if (blocks == 0)
        return ActionParseError{ParseErrorKind::NoBlock, 0};
    if (in_block)
        return ActionParseError{ParseErrorKind::Other, blocks};
    if (blocks > 1)
        return ActionParseError{ParseErrorKind::MultipleBlocks, blocks};
    if (!first_done)
        return ActionParseError{ParseErrorKind::Other, blocks};

    std::string reasoning = trim(join(before_first, "\n"));
    if (reasoning.empty())
        return ActionParseError{ParseErrorKind::NoReasoning, 1};
    return ParsedAction{reasoning, join(first_body, "\n")};
}

std::string render_observation(const ExecutionResult& result, const std::string& cwd,
                               const AgentScaffold& scaffold, size_t observation_cap) {
    std::string out = result.stdout_bytes;
    if (!result.stderr_bytes.empty()) {
        if (!out.empty() && out.back() != '\n')
            out += '\n';
        out += result.stderr_bytes;
    }
    if (out.size() > observation_cap) {
        size_t total = out.size();
        out.resize(observation_cap);
        out += "\n[output truncated: first " + std::to_string(observation_cap) + " of " +
               std::to_string(total) + " bytes shown]";
    }

    TemplateVars vars;
    vars["output"] = out;
    vars["returncode"] = std::to_string(result.returncode);
    vars["timed_out"] = result.timed_out ? "1" : "";
    vars["cwd"] = cwd;
    return render_template(scaffold.file(kObservationTemplateFile), vars);
}

std::string render_parse_error(const ActionParseError& error, const AgentScaffold& scaffold) {
    TemplateVars vars;
    vars["no_block"] = error.kind == ParseErrorKind::NoBlock ? "1" : "";
    vars["no_reasoning"] = error.kind == ParseErrorKind::NoReasoning ? "1" : "";
    vars["multiple_blocks"] = error.kind == ParseErrorKind::MultipleBlocks ? "1" : "";
    vars["other"] = error.kind == ParseErrorKind::Other ? "1" : "";
    vars["command_blocks_num"] = std::to_string(error.block_count);
    return render_template(scaffold.file(kParseErrorTemplateFile), vars);
}

std::optional<SkillLoadResult> handle_load_skill(const std::string& command,
                                                 const AgentScaffold& scaffold) {
    std::istringstream in(trim(command));
    std::string tok;
    if (!(in >> tok) || tok != "load_skill")
        return std::nullopt;

    std::string name;
    while (in >> tok) {
        if (tok == "--name") {
            in >> name;
            break;
        }
        if (starts_with(tok, "--name=")) {
            name = tok.substr(7);
            break;
        }
    }
    if (name.empty())
        return SkillLoadResult{"load_skill requires --name <skill_name>.", std::nullopt};

    const Skill* skill = scaffold.find_skill(name);
    if (!skill || name == kTemplateSkillName) {
        std::string obs = "Unknown skill: '" + name + "'. Available skills:\n" +
                          format_skills_context(scaffold.skills(), -1);
        return SkillLoadResult{obs, std::nullopt};
    }
    return SkillLoadResult{skill->playbook, name};
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += "'";
    return out;
}

}  // namespace

SubmissionResult verify_submission(const std::string& text, const Challenge& challenge,
                                   CommandExecutor* executor, const std::string& cwd) {
    std::string trimmed = trim(text);
    std::istringstream in(trimmed);
    std::string head;
    if (!(in >> head) || head != "submit")
        return {SubmissionVerdict::NotASubmission, ""};

    std::string token = trim(trimmed.substr(trimmed.find("submit") + 6));

    if (challenge.verifier_kind == VerifierKind::ExactFlag) {
        if (token == challenge.verifier_value)
            return {SubmissionVerdict::Solved, "Correct flag. Challenge solved."};
        return {SubmissionVerdict::Incorrect,
                "Incorrect submission: token '" + token + "' was rejected by the scorer."};
    }

    if (!executor)
        throw VerifierFailure("no executor available to run the verification command");
    std::string command = challenge.verifier_value;
    size_t slot = command.find("{token}");
    if (slot != std::string::npos)
        command.replace(slot, 7, shell_quote(token));
    ExecutionResult result;
    try {
        result = executor->run(command, cwd, std::chrono::seconds(60));
    } catch (const std::exception& e) {
        throw VerifierFailure(std::string("verification command could not be launched: ") +
                              e.what());
    }
    if (result.returncode == 0)
        return {SubmissionVerdict::Solved, "Submission accepted. Challenge solved."};
    return {SubmissionVerdict::Incorrect,
            "Incorrect submission: token '" + token + "' was rejected by the scorer."};
}

std::string trajectory_to_log(const Trajectory& trajectory) {
    std::ostringstream out;
    for (const auto& step : trajectory.steps) {
        out << "=== STEP " << step.index << " ===\n";
        out << "THOUGHT:\n" << step.thought << "\n";
        out << "ACTION:\n" << (step.action ? *step.action : "") << "\n";
        out << "OBSERVATION:\n" << step.observation << "\n";
        out << "RETURNCODE: " << (step.returncode ? std::to_string(*step.returncode) : "none")
            << "\n\n";
    }
    return out.str();
}

Trajectory run_episode(const AgentScaffold& scaffold, const Challenge& challenge,
                       ModelBackend& backend, CommandExecutor& executor,
                       const std::string& workspace, const RuntimeOptions& options,
                       const std::string& backend_key) {
    fs::create_directories(workspace);
    for (const auto& [rel, content] : challenge.files) {
        fs::path dest = fs::path(workspace) / rel;
        if (!fs::exists(dest))
            write_file(dest.string(), content);
    }

    TemplateVars system_vars;
    system_vars["command_docs"] = kCommandDocs;
    system_vars["skill_descriptions"] =
        format_skills_context(scaffold.skills(), options.max_skills);

    std::ostringstream mission;
    mission << challenge.prompt;
    if (!challenge.files.empty()) {
        mission << "\n\nFiles in your workspace:\n";
        for (const auto& [rel, _] : challenge.files)
            mission << "  " << rel << "\n";
    }
    TemplateVars instance_vars;
    instance_vars["mission_context"] = mission.str();

    std::vector<ChatMessage> messages;
    messages.push_back({"system", render_template(scaffold.file(kSystemTemplateFile), system_vars)});
    messages.push_back(
        {"user", render_template(scaffold.file(kInstanceTemplateFile), instance_vars)});

    Trajectory trajectory;
    for (int i = 1; i <= challenge.step_budget; ++i) {
        std::string response;
        try {
            response = backend.complete(
                {CallRole::Episode, backend_key, messages, options.generation});
        } catch (const BackendFailure& e) {
            trajectory.aborted = true;
            trajectory.abort_reason = e.what();
            break;
        }
        messages.push_back({"assistant", response});

        StepRecord step;
        step.index = i;
        bool solved = false;

        auto parsed = parse_bash_action(response);
        if (auto* error = std::get_if<ActionParseError>(&parsed)) {
            step.thought = trim(response);
            step.observation = render_parse_error(*error, scaffold);
        } else {
            auto& action = std::get<ParsedAction>(parsed);
            step.thought = action.thought;
            step.action = action.command;

            SubmissionResult submission =
                verify_submission(action.command, challenge, &executor, workspace);
            if (submission.verdict == SubmissionVerdict::Solved) {
                step.observation = submission.message;
                solved = true;
            } else if (submission.verdict == SubmissionVerdict::Incorrect) {
                step.observation = submission.message;
            } else if (auto skill = handle_load_skill(action.command, scaffold)) {
                step.observation = skill->observation;
                if (skill->loaded &&
                    std::find(trajectory.loaded_skills.begin(), trajectory.loaded_skills.end(),
                              *skill->loaded) == trajectory.loaded_skills.end())
                    trajectory.loaded_skills.push_back(*skill->loaded);
            } else {
                ExecutionResult result;
                try {
                    result = executor.run(action.command, workspace, options.command_timeout);
                } catch (const std::exception& e) {
                    result.stderr_bytes = std::string("executor failure: ") + e.what();
                    result.returncode = 127;
                }
                step.returncode = result.returncode;
                step.timed_out = result.timed_out;
                step.observation =
                    render_observation(result, workspace, scaffold, options.observation_cap);
            }
        }

        trajectory.steps.push_back(step);
        if (solved) {
            trajectory.status = EpisodeStatus::Solved;
            break;
        }
        messages.push_back({"user", step.observation});
    }
    return trajectory;
}

}  // namespace evoagent
