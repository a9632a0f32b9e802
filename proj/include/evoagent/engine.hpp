#pragma once

#include "evoagent/challenge.hpp"
#include "evoagent/diagnosis.hpp"
#include "evoagent/prompt_pack.hpp"
#include "evoagent/refiner.hpp"
#include "evoagent/runtime.hpp"
#include "evoagent/summarizer.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evoagent {

struct BeamConfig {
    int generations = 3;          // T mutation rounds; populations P_0..P_T all execute
    int beam_width = 3;           // k
    int children_per_parent = 3;  // m
    int select_top = 2;
    double mutation_temperature = 1.0;
    int step_budget = 30;
    int rollout_budget_cap = 16;
    int workers = 1;  // concurrent rollouts within a generation

    void validate() const;
};

enum class NodeStatus { Pending, Executed, Solved, Invalid, Pruned };

std::string node_status_name(NodeStatus status);
std::optional<NodeStatus> node_status_from_name(const std::string& name);

// One applied-or-skipped patch action, kept for post-hoc analysis.
struct ActionRecord {
    PatchKind kind;
    ApplyOutcome outcome;
    std::string path;
};

struct EvolutionNode {
    std::string id;
    std::optional<std::string> parent_id;
    int generation = 0;
    FileTree scaffold_files;
    std::string patch_diff;  // unified diff from the parent; empty for root
    std::optional<Trajectory> trajectory;
    std::optional<TrajectorySummary> summary;
    std::optional<DiagnosisReport> report;
    std::optional<int> score;
    NodeStatus status = NodeStatus::Pending;
    std::vector<ActionRecord> actions;
    int episode_calls = 0;
    int summarizer_calls = 0;
    int diagnosis_calls = 0;
    int refiner_calls = 0;
    long wall_ms = 0;
};

struct EvolutionTree {
    std::vector<EvolutionNode> nodes;                 // creation order
    std::vector<std::vector<size_t>> generations;     // node indices per generation

    EvolutionNode* find(const std::string& id);
    const EvolutionNode* find(const std::string& id) const;
};

// "root" -> "child<j>" -> "c<j>_<j'>" -> "c<j>_<j'>_<j''>" ...
std::string child_node_id(const std::string& parent_id, int index);

struct Accounting {
    int rollouts = 0;
    std::map<std::string, int> llm_calls_by_role;
    std::map<std::string, int> nodes_by_status;
};

Accounting accounting(const EvolutionTree& tree);

// Ranked parent list for the next generation: rank_siblings order, truncated
// to min(|population|, beam_width) and then to select_top.
std::vector<std::string> select_parents(
    const std::vector<std::pair<std::string, int>>& population, const BeamConfig& config);

enum class EvolveOutcome { Solved, Unsolved };

struct EvolveResult {
    EvolveOutcome outcome = EvolveOutcome::Unsolved;
    EvolutionTree tree;
};

struct FatalSetupError : std::runtime_error {
    explicit FatalSetupError(const std::string& what) : std::runtime_error(what) {}
};

struct EngineOptions {
    BeamConfig beam;
    RuntimeOptions runtime;
    RefinerOptions refiner;
    int summary_window = 10;
    int backfill_cap = 3;
    int summarizer_fan_out = 1;
    LayerMap layer_map = LayerMap::default_map();
    std::string work_dir;  // scratch root for episode workspaces
    std::string run_dir;   // persistence root ("" disables persistence)
};

// The outer beam-search loop: execute every population node (early return on
// a verified solve), summarize, diagnose, select parents, mutate, discard
// invalid children, repeat. The full tree is persisted regardless of outcome.
EvolveResult evolve(const AgentScaffold& seed, const Challenge& challenge,
                    const PromptPack& pack, ModelBackend& backend, CommandExecutor& executor,
                    const EngineOptions& options);

// ---- persistence ----

void persist_tree(const EvolutionTree& tree, const std::string& run_dir);
std::string render_node_meta(const EvolutionNode& node);
std::string render_tree_index(const EvolutionTree& tree);

// Counts completions per (role, key); wraps the real backend so accounting
// stays exact under concurrency.
class CountingBackend : public ModelBackend {
public:
    explicit CountingBackend(ModelBackend& inner) : inner_(&inner) {}

    std::string complete(const BackendRequest& request) override;
    int count(CallRole role, const std::string& key) const;
    int total(CallRole role) const;

private:
    ModelBackend* inner_;
    mutable std::mutex mutex_;
    std::map<std::pair<CallRole, std::string>, int> counts_;
};

}  // namespace evoagent
