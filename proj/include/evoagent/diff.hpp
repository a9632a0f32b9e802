#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoagent {

// Line-oriented diff between two byte strings, rendered and re-applied as
// standard unified-diff text. Trailing-newline state is preserved exactly
// ("\ No newline at end of file" markers), so apply(render(a,b), a) == b
// byte-for-byte.

struct DiffApplyError : std::runtime_error {
    explicit DiffApplyError(const std::string& what) : std::runtime_error(what) {}
};

// Unified diff body (hunks only, no ---/+++ header). Empty if a == b.
std::string unified_diff_body(const std::string& a, const std::string& b, int context = 3);

// Full unified diff with "--- <a_label>\n+++ <b_label>" header; empty when a == b.
std::string unified_diff(const std::string& a, const std::string& b,
                         const std::string& a_label, const std::string& b_label,
                         int context = 3);

// Applies hunks (header lines tolerated and ignored) to `a`. Context and
// removal lines must match exactly.
std::string apply_unified_diff(const std::string& a, const std::string& diff_text);

// Paths named in "--- a/<p>" / "+++ b/<p>" headers of a multi-file diff.
std::vector<std::string> unified_diff_paths(const std::string& diff_text);

int count_hunks(const std::string& diff_text);

}  // namespace evoagent
