#pragma once

#include "evoagent/fs_tree.hpp"

#include <optional>
#include <string>

namespace evoagent {

enum class VerifierKind { ExactFlag, Command };

// One target: mission text, attachment files, and the programmatic
// solve check (exact flag match or an external command's exit status).
struct Challenge {
    std::string name;
    std::string prompt;
    FileTree files;  // relative to the package's files/ directory
    VerifierKind verifier_kind = VerifierKind::ExactFlag;
    std::string verifier_value;  // flag bytes, or command with {token} slot
    int step_budget = 30;

    // Loads a package directory: challenge.json + files/.
    static Challenge load(const std::string& dir);
};

}  // namespace evoagent
