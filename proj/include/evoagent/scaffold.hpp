#pragma once

#include "evoagent/fs_tree.hpp"
#include "evoagent/layer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evoagent {

// Exact file names every scaffold must carry (plus a skills/ directory).
inline constexpr const char* kSystemTemplateFile = "system_template.txt";
inline constexpr const char* kInstanceTemplateFile = "instance_template.txt";
inline constexpr const char* kObservationTemplateFile = "observation_template.txt";
inline constexpr const char* kParseErrorTemplateFile = "output_parse_error_template.txt";
inline constexpr const char* kDriverFile = "agent.py";
inline constexpr const char* kSkillsDir = "skills";
inline constexpr const char* kTemplateSkillName = "skill_template";
inline constexpr const char* kSkillDescriptionFile = "description.md";
inline constexpr const char* kSkillPlaybookFile = "SKILL.md";

struct MissingFileError : std::runtime_error {
    explicit MissingFileError(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidSkillError : std::runtime_error {
    explicit InvalidSkillError(const std::string& what) : std::runtime_error(what) {}
};

struct Skill {
    std::string name;
    std::string description;  // short trigger text, shown before loading
    std::string playbook;     // full SKILL.md text, injected on load
    int created_seq = 0;      // recency key; 0 for skills present at load
};

class AgentScaffold {
public:
    AgentScaffold() = default;
    AgentScaffold(FileTree files, LayerMap map);

    // Loads and validates a scaffold directory (byte-faithful snapshot).
    static AgentScaffold load(const std::string& root_dir, LayerMap map = LayerMap::default_map());
    // Same validation against an in-memory tree (dry-run load).
    static AgentScaffold from_tree(FileTree files, LayerMap map = LayerMap::default_map());

    const FileTree& files() const { return files_; }
    const LayerMap& layer_map() const { return layer_map_; }
    const std::vector<Skill>& skills() const { return skills_; }

    const std::string& file(const std::string& path) const;
    bool has_file(const std::string& path) const { return files_.count(path) > 0; }

    const Skill* find_skill(const std::string& name) const;
    // Carries recency over from a parent snapshot; previously unseen skills
    // get `new_seq`.
    void inherit_skill_recency(const AgentScaffold& parent, int new_seq);

    void write_to(const std::string& root_dir) const { write_tree(root_dir, files_); }

private:
    void discover_skills();

    FileTree files_;
    LayerMap layer_map_;
    std::vector<Skill> skills_;
};

enum class FileChange { Created, Deleted, Modified };

struct FileDiff {
    FileChange change;
    std::string unified;  // "--- a/<path>\n+++ b/<path>\n" + hunks
};

struct ScaffoldDiff {
    std::map<std::string, FileDiff> files;                     // keyed by relative path
    std::map<LayerId, std::vector<std::string>> layer_groups;  // derived from the layer map
    std::vector<std::string> unattributed;                     // paths outside every layer

    bool empty() const { return files.empty(); }
    std::string to_text() const;  // all per-file diffs concatenated, path order
    bool touches_layer(LayerId layer) const { return layer_groups.count(layer) > 0; }
};

// Per-file unified diffs for every created/deleted/modified path.
ScaffoldDiff diff_scaffold(const AgentScaffold& parent, const AgentScaffold& child);
ScaffoldDiff diff_trees(const FileTree& parent, const FileTree& child, const LayerMap& map);

// Applies a ScaffoldDiff rendered by diff_trees back onto a parent tree.
FileTree apply_scaffold_diff(const FileTree& parent, const ScaffoldDiff& diff);

// Skill menu for the system prompt: name + description of at most max_skills
// skills (most-recently-created first, then by name); the protected template
// skill is never listed.
std::string format_skills_context(const std::vector<Skill>& skills, int max_skills);

}  // namespace evoagent
