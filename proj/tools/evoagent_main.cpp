#include "evoagent/analysis.hpp"
#include "evoagent/config.hpp"
#include "evoagent/diagnosis.hpp"
#include "evoagent/engine.hpp"
#include "evoagent/patch.hpp"
#include "evoagent/prompt_pack.hpp"
#include "evoagent/runtime.hpp"
#include "evoagent/summarizer.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace evoagent;

namespace {

constexpr int kExitSolved = 0;
constexpr int kExitError = 1;
constexpr int kExitUnsolved = 3;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty())
        std::cout << text;
    else
        write_file(out_path, text);
}

int cmd_evolve(const std::string& config_path, const std::string& run_id_override) {
    RunConfig config = RunConfig::load(config_path);
    if (!run_id_override.empty())
        config.run_id = run_id_override;

    PromptPack pack = PromptPack::load_by_id(config.packs_dir, config.prompt_pack);
    auto backend = config.make_backend();
    LocalExecutor executor;
    EngineOptions options = config.engine_options();

    AgentScaffold seed = AgentScaffold::load(config.scaffold_path, options.layer_map);
    Challenge challenge = Challenge::load(config.challenge_path);

    fs::create_directories(options.run_dir);
    write_file((fs::path(options.run_dir) / "config").string(), config.render());

    EvolveResult result = evolve(seed, challenge, pack, *backend, executor, options);
    Accounting acc = accounting(result.tree);

    std::cout << (result.outcome == EvolveOutcome::Solved ? "SOLVED" : "UNSOLVED") << " "
              << challenge.name << "\n";
    std::cout << "rollouts: " << acc.rollouts << "\n";
    for (const auto& [role, count] : acc.llm_calls_by_role)
        std::cout << "calls." << role << ": " << count << "\n";
    for (const auto& [status, count] : acc.nodes_by_status)
        std::cout << "nodes." << status << ": " << count << "\n";
    std::cout << "run directory: " << options.run_dir << "\n";
    return result.outcome == EvolveOutcome::Solved ? kExitSolved : kExitUnsolved;
}

int cmd_rollout(const std::string& scaffold_path, const std::string& challenge_path,
                const std::string& script_path, const std::string& workspace,
                const std::string& out_path, int steps) {
    AgentScaffold scaffold = AgentScaffold::load(scaffold_path);
    Challenge challenge = Challenge::load(challenge_path);
    if (steps > 0)
        challenge.step_budget = steps;
    ScriptedBackend backend = ScriptedBackend::from_file(script_path);
    LocalExecutor executor;
    RuntimeOptions options;

    std::string ws = workspace.empty()
                         ? (fs::temp_directory_path() / ("evoagent_rollout_" +
                                                          std::to_string(::getpid())))
                               .string()
                         : workspace;
    Trajectory trajectory = run_episode(scaffold, challenge, backend, executor, ws, options);
    emit(trajectory_to_log(trajectory), out_path);
    std::cerr << (trajectory.status == EpisodeStatus::Solved ? "solved" : "unsolved") << " in "
              << trajectory.steps.size() << " steps\n";
    return 0;
}

int cmd_summarize(const std::string& log_path, const std::string& script_path,
                  const std::string& packs_dir, const std::string& pack_id, int window, int cap,
                  const std::string& out_path) {
    PromptPack pack = PromptPack::load_by_id(packs_dir, pack_id);
    ScriptedBackend backend = ScriptedBackend::from_file(script_path);
    SummarizerOptions options;
    options.window = window;
    options.backfill_cap = cap;
    TrajectorySummary summary =
        summarize_trajectory(read_file(log_path), backend, pack.summarizer, options);
    emit(summary_to_text(summary), out_path);
    return 0;
}

int cmd_diagnose(const std::string& summary_path, const std::string& script_path,
                 const std::string& packs_dir, const std::string& pack_id,
                 const std::string& challenge_path, const std::string& out_path) {
    PromptPack pack = PromptPack::load_by_id(packs_dir, pack_id);
    if (!pack.diagnosis_enabled()) {
        std::cerr << "error: pack '" << pack_id << "' has no diagnosis prompts\n";
        return kExitError;
    }
    Challenge challenge;
    challenge.name = "unnamed";
    if (!challenge_path.empty())
        challenge = Challenge::load(challenge_path);

    // The summary file is already step-framed; re-parse it into steps so the
    // prompt builder renders the same framing.
    TrajectorySummary summary;
    auto raw_steps = parse_steps(read_file(summary_path));
    for (const auto& raw : raw_steps) {
        SummaryStep step;
        step.index = raw.index;
        step.thought_summary = raw.thought;
        step.obs_summary = raw.observation;
        summary.steps.push_back(std::move(step));
    }

    ScriptedBackend backend = ScriptedBackend::from_file(script_path);
    auto prompt = build_diagnosis_prompt(summary, challenge, pack.diagnosis);
    BackendRequest request;
    request.role = CallRole::Diagnosis;
    request.key = "diagnose";
    request.messages = std::get<std::vector<ChatMessage>>(prompt);
    std::string text = backend.complete(request);

    auto parsed = parse_diagnosis(text);
    emit(text + "\n---\n" + diagnosis_sidecar(parsed.report), out_path);
    if (parsed.score_error) {
        std::cerr << "warning: "
                  << (*parsed.score_error == ScoreError::Missing ? "no score line found"
                                                                 : "score out of range")
                  << "; fallback score 0\n";
    }
    return 0;
}

int cmd_patch_apply(const std::string& root, const std::string& actions_path,
                    const std::string& phase_name, double threshold) {
    FileTree tree = read_tree(root);
    auto parsed = parse_patches(read_file(actions_path));

    ApplyOptions options;
    options.fuzzy_threshold = threshold;
    if (!phase_name.empty()) {
        auto layer = layer_from_name(phase_name);
        if (!layer) {
            std::cerr << "error: unknown phase '" << phase_name
                      << "' (strategy, env_interface, domain_knowledge, perception)\n";
            return kExitError;
        }
        options.phase = layer;
    }

    ApplyReport report = apply_actions(tree, parsed.actions, options);

    // Rewrite the tree in place: update files and drop deleted ones.
    fs::remove_all(fs::path(root));
    write_tree(root, tree);
    std::cout << report.to_text();
    return 0;
}

int cmd_analyze(const std::string& run_dir, const std::string& layer_map_path) {
    LayerMap map = layer_map_path.empty() ? LayerMap::default_map()
                                          : load_layer_map(layer_map_path);
    std::cout << analyze_run_dir(run_dir, map);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scaffold-evolution engine: beam search over self-revising shell agents"};
    app.require_subcommand(1);

    std::string config_path, run_id;
    auto* evolve_cmd = app.add_subcommand("evolve", "Run the full evolution loop on a target");
    evolve_cmd->add_option("--config", config_path, "Run configuration file")->required();
    evolve_cmd->add_option("--run-id", run_id, "Override the configured run id");

    std::string scaffold_path, challenge_path, script_path, workspace, out_path;
    int steps = 0;
    auto* rollout_cmd = app.add_subcommand("rollout", "Run a single episode of a scaffold");
    rollout_cmd->add_option("--scaffold", scaffold_path, "Scaffold directory")->required();
    rollout_cmd->add_option("--challenge", challenge_path, "Challenge package")->required();
    rollout_cmd->add_option("--backend-script", script_path, "Scripted backend file")->required();
    rollout_cmd->add_option("--workspace", workspace, "Episode workspace directory");
    rollout_cmd->add_option("--out", out_path, "Trajectory log output path (default stdout)");
    rollout_cmd->add_option("--steps", steps, "Step budget override");

    std::string log_path, packs_dir = (fs::path(default_data_dir()) / "prompt_packs").string();
    std::string pack_id = "default";
    int window = 10, cap = 3;
    auto* summarize_cmd = app.add_subcommand("summarize", "Compress a trajectory log");
    summarize_cmd->add_option("--log", log_path, "Trajectory log file")->required();
    summarize_cmd->add_option("--backend-script", script_path, "Scripted backend file")
        ->required();
    summarize_cmd->add_option("--packs-dir", packs_dir, "Prompt pack root directory");
    summarize_cmd->add_option("--pack", pack_id, "Prompt pack id");
    summarize_cmd->add_option("--window", window, "Chunk window size");
    summarize_cmd->add_option("--cap", cap, "Backfill cap");
    summarize_cmd->add_option("--out", out_path, "Summary output path (default stdout)");

    std::string summary_path;
    auto* diagnose_cmd = app.add_subcommand("diagnose", "Produce a diagnosis report");
    diagnose_cmd->add_option("--summary", summary_path, "Summary file")->required();
    diagnose_cmd->add_option("--backend-script", script_path, "Scripted backend file")
        ->required();
    diagnose_cmd->add_option("--packs-dir", packs_dir, "Prompt pack root directory");
    diagnose_cmd->add_option("--pack", pack_id, "Prompt pack id");
    diagnose_cmd->add_option("--challenge", challenge_path, "Challenge package (metadata)");
    diagnose_cmd->add_option("--out", out_path, "Report output path (default stdout)");

    std::string root, actions_path, phase_name;
    double threshold = kDefaultFuzzyThreshold;
    auto* patch_cmd = app.add_subcommand("patch", "Patch utilities");
    auto* apply_cmd = patch_cmd->add_subcommand("apply", "Apply an actions file to a tree");
    apply_cmd->add_option("--root", root, "Working tree directory")->required();
    apply_cmd->add_option("--actions", actions_path, "File with XML patch actions")->required();
    apply_cmd->add_option("--phase", phase_name, "Restrict edits to one layer");
    apply_cmd->add_option("--threshold", threshold, "Fuzzy match threshold");

    std::string run_dir, layer_map_path;
    auto* analyze_cmd = app.add_subcommand("analyze", "Post-hoc metrics over a run directory");
    analyze_cmd->add_option("--run", run_dir, "Run directory")->required();
    analyze_cmd->add_option("--layer-map", layer_map_path, "Layer map file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (evolve_cmd->parsed())
            return cmd_evolve(config_path, run_id);
        if (rollout_cmd->parsed())
            return cmd_rollout(scaffold_path, challenge_path, script_path, workspace, out_path,
                               steps);
        if (summarize_cmd->parsed())
            return cmd_summarize(log_path, script_path, packs_dir, pack_id, window, cap,
                                 out_path);
        if (diagnose_cmd->parsed())
            return cmd_diagnose(summary_path, script_path, packs_dir, pack_id, challenge_path,
                                out_path);
        if (patch_cmd->parsed() && apply_cmd->parsed())
            return cmd_patch_apply(root, actions_path, phase_name, threshold);
        if (analyze_cmd->parsed())
            return cmd_analyze(run_dir, layer_map_path);
        std::cerr << "error: no subcommand\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
