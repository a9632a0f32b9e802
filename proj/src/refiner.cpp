#include "evoagent/refiner.hpp"

#include "evoagent/executor.hpp"
#include "evoagent/template_engine.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <sstream>

namespace fs = std::filesystem;

namespace evoagent {

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

// Runtime variable contract per template file; evolved templates must keep
// rendering against exactly these names.
TemplateVars contract_vars(const std::string& path) {
    TemplateVars vars;
    if (path == kObservationTemplateFile) {
        vars = {{"output", "sample"}, {"returncode", "0"}, {"timed_out", ""}, {"cwd", "/tmp"}};
    } else if (path == kParseErrorTemplateFile) {
        vars = {{"no_block", "1"},
                {"no_reasoning", ""},
                {"multiple_blocks", ""},
                {"other", ""},
                {"command_blocks_num", "0"}};
    } else if (path == kSystemTemplateFile) {
        vars = {{"command_docs", "sample"}, {"skill_descriptions", ""}};
    } else if (path == kInstanceTemplateFile) {
        vars = {{"mission_context", "sample"}};
    }
    return vars;
}

}  // namespace

std::optional<std::string> Validators::check_python(const std::string& path,
                                                    const std::string& content) const {
    size_t key = std::hash<std::string>{}(content);
    {
        std::lock_guard<std::mutex> lock(memo_->mutex);
        auto it = memo_->results.find(key);
        if (it != memo_->results.end())
            return it->second ? std::nullopt
                              : std::optional<std::string>("syntax error (cached result)");
    }

    static std::atomic<unsigned> counter{0};
    fs::path tmp = fs::temp_directory_path() /
                   ("evoagent_pyck_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++) + ".py");
    write_file(tmp.string(), content);

    LocalExecutor executor;
    auto result = executor.run(python_command + " -m py_compile " + shell_quote(tmp.string()),
                               fs::temp_directory_path().string(), std::chrono::seconds(30));
    std::error_code ec;
    fs::remove(tmp, ec);
    fs::remove_all(fs::temp_directory_path() / "__pycache__", ec);

    if (result.returncode == 127)
        throw ValidatorUnavailable("python syntax checker cannot run: " + python_command);

    bool ok = result.returncode == 0;
    {
        std::lock_guard<std::mutex> lock(memo_->mutex);
        memo_->results[key] = ok;
    }
    if (ok)
        return std::nullopt;
    std::string detail = trim(result.stderr_bytes);
    if (detail.size() > 400)
        detail.resize(400);
    return detail.empty() ? std::optional<std::string>("syntax error in " + path)
                          : std::optional<std::string>(detail);
}

std::vector<ValidationError> Validators::check(const FileTree& tree) const {
    std::vector<ValidationError> errors;
    for (const auto& [path, content] : tree) {
        if (ends_with(path, ".py")) {
            if (auto error = check_python(path, content))
                errors.push_back({path, *error});
        } else if (ends_with(path, "_template.txt")) {
            if (auto error = check_template(content)) {
                errors.push_back({path, *error});
                continue;
            }
            try {
                render_template(content, contract_vars(path));
            } catch (const TemplateError& e) {
                errors.push_back({path, e.what()});
            }
        }
    }
    return errors;
}

std::vector<ValidationError> validate_tree(const FileTree& tree, const Validators& validators) {
    return validators.check(tree);
}

namespace {

std::string render_mutation_evidence(const std::string& parent_patch_diff) {
    if (trim(parent_patch_diff).empty())
        return "No mutation patch available (root node).";
    return "```diff\n" + parent_patch_diff + "```\n";
}

std::string render_reports(const std::string& report_text, const char* tag,
                           const std::string& empty_note) {
    if (trim(report_text).empty())
        return empty_note;
    return std::string("<") + tag + ">\n" + report_text + "\n</" + tag + ">";
}

std::string render_prompt_templates(const FileTree& tree) {
    std::ostringstream out;
    for (const auto& [path, content] : tree) {
        if (!ends_with(path, "_template.txt"))
            continue;
        out << "#### " << path << "\n```text\n" << content << "\n```\n\n";
    }
    return out.str();
}

std::string render_skill_context(const FileTree& tree) {
    std::ostringstream out;
    std::string prefix = std::string(kSkillsDir) + "/";
    std::string current_dir;
    for (const auto& [path, content] : tree) {
        if (!starts_with(path, prefix))
            continue;
        size_t slash = path.find('/', prefix.size());
        if (slash == std::string::npos)
            continue;
        std::string dir = path.substr(0, slash);
        if (dir != current_dir) {
            out << "### " << dir << "\n";
            current_dir = dir;
        }
        out << "#### " << path << "\n" << content << "\n\n";
    }
    return out.str();
}

std::vector<ChatMessage> build_refiner_messages(const FileTree& tree,
                                                const MutationContext& context,
                                                const PromptPack& pack,
                                                const std::string& phase_card) {
    std::string current_report = context.summary_text;
    if (!trim(context.diagnosis_text).empty())
        current_report = context.diagnosis_text + "\n\n## Trajectory Summary\n" +
                         context.summary_text;

    TemplateVars vars;
    vars["mutation_evidence"] = render_mutation_evidence(context.parent_patch_diff);
    vars["parent_reports"] =
        render_reports(context.parent_diagnosis_text, "PARENT_TRAJECTORY",
                       "(no parent logs available; this is the root node)");
    vars["current_reports"] = render_reports(current_report, "CURRENT_TRAJECTORY", "(no logs)");
    vars["prompt_templates"] = render_prompt_templates(tree);
    auto driver = tree.find(kDriverFile);
    vars["agent_implementation"] = driver == tree.end() ? "" : driver->second;
    vars["skill_context"] = render_skill_context(tree);
    vars["gen0_system_template"] = context.gen0_system_template;

    std::vector<ChatMessage> messages;
    messages.push_back({"system", render_template(pack.coderefiner_system, vars)});
    messages.push_back({"user", render_template(pack.coderefiner_user, vars)});
    messages.push_back({"user", render_template(phase_card, vars)});
    return messages;
}

PhaseResult run_refiner_call(FileTree& tree, std::optional<LayerId> phase,
                             const MutationContext& context, ModelBackend& backend,
                             const PromptPack& pack, const std::string& phase_card,
                             const RefinerOptions& options, const std::string& backend_key) {
    PhaseResult result;
    FileTree snapshot = tree;

    BackendRequest request;
    request.role = CallRole::Refiner;
    request.key = backend_key;
    request.settings = options.generation;
    request.messages = build_refiner_messages(tree, context, pack, phase_card);

    try {
        result.response = backend.complete(request);
    } catch (const BackendFailure& e) {
        result.backend_failed = true;
        result.report.notes.push_back(std::string("backend failure, phase is a no-op: ") +
                                      e.what());
        return result;
    }

    auto parsed = parse_patches(result.response);
    ApplyOptions apply_options = options.apply;
    apply_options.phase = phase;
    result.report = apply_actions(tree, parsed.actions, apply_options);
    result.report.notes.insert(result.report.notes.end(), parsed.notes.begin(),
                               parsed.notes.end());

    result.changed = tree != snapshot;
    if (!result.changed)
        return result;  // patch-free (or fully skipped) response: valid no-op

    result.errors = validate_tree(tree, options.validators);
    if (result.errors.empty()) {
        try {
            AgentScaffold::from_tree(tree, apply_options.layer_map);  // dry-run load
        } catch (const std::exception& e) {
            result.errors.push_back({"", e.what()});
        }
    }
    if (!result.errors.empty()) {
        tree = std::move(snapshot);
        result.changed = false;
        result.reverted = true;
    }
    return result;
}

}  // namespace

PhaseResult run_phase(FileTree& tree, LayerId phase, const MutationContext& context,
                      ModelBackend& backend, const PromptPack& pack,
                      const RefinerOptions& options, const std::string& backend_key) {
    if (!pack.layered())
        throw std::runtime_error("run_phase requires a pack with phase cards");
    const std::string& card = pack.phase_cards[static_cast<size_t>(phase)];
    return run_refiner_call(tree, phase, context, backend, pack, card, options, backend_key);
}

PhaseResult run_holistic(FileTree& tree, const MutationContext& context, ModelBackend& backend,
                         const PromptPack& pack, const RefinerOptions& options,
                         const std::string& backend_key) {
    if (!pack.holistic_card)
        throw std::runtime_error("run_holistic requires a pack with a holistic card");
    return run_refiner_call(tree, std::nullopt, context, backend, pack, *pack.holistic_card,
                            options, backend_key);
}

std::vector<ChildCandidate> mutate(const FileTree& parent, const MutationContext& context,
                                   int m, ModelBackend& backend, const PromptPack& pack,
                                   const RefinerOptions& options,
                                   const std::vector<std::string>& child_keys) {
    std::vector<ChildCandidate> children;
    for (int j = 0; j < m; ++j) {
        const std::string& key = child_keys.at(static_cast<size_t>(j));
        ChildCandidate child;
        child.tree = parent;
        try {
            if (pack.layered()) {
                for (LayerId phase : kAllLayers) {
                    child.phases.push_back(
                        run_phase(child.tree, phase, context, backend, pack, options, key));
                    ++child.refiner_calls;
                }
            } else {
                child.phases.push_back(
                    run_holistic(child.tree, context, backend, pack, options, key));
                ++child.refiner_calls;
            }
            // Per-phase validation already syntax-checked every change; the
            // final gate is the dry-run scaffold load.
            AgentScaffold::from_tree(child.tree, options.apply.layer_map);
        } catch (const std::exception&) {
            child.valid = false;
        }
        children.push_back(std::move(child));
    }
    return children;
}

}  // namespace evoagent
