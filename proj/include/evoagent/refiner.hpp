#pragma once

#include "evoagent/backend.hpp"
#include "evoagent/patch.hpp"
#include "evoagent/prompt_pack.hpp"
#include "evoagent/scaffold.hpp"

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace evoagent {

struct ValidationError {
    std::string path;
    std::string message;
};

struct ValidatorUnavailable : std::runtime_error {
    explicit ValidatorUnavailable(const std::string& what) : std::runtime_error(what) {}
};

// Syntax checks for scaffold file classes: Python driver sources compile via
// an external interpreter, template files parse under the template engine
// and must render against their runtime variable contract.
class Validators {
public:
    std::string python_command = "python3";

    std::vector<ValidationError> check(const FileTree& tree) const;

private:
    std::optional<std::string> check_python(const std::string& path,
                                            const std::string& content) const;

    // Memo of syntax-check results by content hash; shared across copies so
    // identical trees never recompile.
    struct Memo {
        std::mutex mutex;
        std::unordered_map<size_t, bool> results;
    };
    std::shared_ptr<Memo> memo_ = std::make_shared<Memo>();
};

std::vector<ValidationError> validate_tree(const FileTree& tree, const Validators& validators);

// Everything one refiner call gets to see.
struct MutationContext {
    std::string summary_text;          // rendered trajectory summary z
    std::string diagnosis_text;        // raw diagnosis report d ("" when disabled)
    std::string parent_diagnosis_text; // parent generation's report ("" for root)
    std::string parent_patch_diff;     // diff that produced the current agent
    std::string gen0_system_template;  // conciseness anchor for phase 1
};

struct RefinerOptions {
    ApplyOptions apply;       // phase is set per call
    Validators validators;
    GenerationSettings generation{1.0, 10240};  // mutation temperature 1.0
};

struct PhaseResult {
    ApplyReport report;
    bool changed = false;   // tree differs from its pre-phase state
    bool reverted = false;  // changes failed validation and were rolled back
    bool backend_failed = false;
    std::string response;
    std::vector<ValidationError> errors;  // what forced the revert
};

// One layer-scoped refiner call: prompt, parse, apply (restricted to the
// phase's layer), validate plus dry-run load; failures revert the tree to
// its pre-phase state. A patch-free response is a valid no-op.
PhaseResult run_phase(FileTree& tree, LayerId phase, const MutationContext& context,
                      ModelBackend& backend, const PromptPack& pack,
                      const RefinerOptions& options, const std::string& backend_key);

// Ablation: a single unscoped call that may patch any layer.
PhaseResult run_holistic(FileTree& tree, const MutationContext& context, ModelBackend& backend,
                         const PromptPack& pack, const RefinerOptions& options,
                         const std::string& backend_key);

struct ChildCandidate {
    FileTree tree;
    std::vector<PhaseResult> phases;  // 4 entries (or 1 under the holistic pack)
    int refiner_calls = 0;
    bool valid = true;  // children failing final validation are discarded
};

// Produces m child working copies from a parent tree; each child runs its own
// sequential phase chain. Candidates whose final copy fails validation carry
// valid = false. Child backend keys are taken from `child_keys`.
std::vector<ChildCandidate> mutate(const FileTree& parent, const MutationContext& context,
                                   int m, ModelBackend& backend, const PromptPack& pack,
                                   const RefinerOptions& options,
                                   const std::vector<std::string>& child_keys);

}  // namespace evoagent
