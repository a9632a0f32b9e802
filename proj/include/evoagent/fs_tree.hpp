#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoagent {

// A snapshot of a file tree: normalized relative path -> raw byte content.
// std::map keeps iteration order deterministic.
using FileTree = std::map<std::string, std::string>;

struct MalformedPathError : std::runtime_error {
    explicit MalformedPathError(const std::string& what) : std::runtime_error(what) {}
};

// Normalizes a relative path: collapses "./", rejects absolute paths,
// backslashes and ".." segments. Throws MalformedPathError.
std::string normalize_rel_path(const std::string& path);

// True if the path would be rejected by normalize_rel_path.
bool is_malformed_path(const std::string& path);

FileTree read_tree(const std::string& root_dir);
void write_tree(const std::string& root_dir, const FileTree& tree);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

std::vector<std::string> split_lines(const std::string& text);  // drops line terminators
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string trim(const std::string& s);

bool starts_with(const std::string& s, const std::string& prefix);
bool ends_with(const std::string& s, const std::string& suffix);

}  // namespace evoagent
