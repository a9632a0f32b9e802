#include "evoagent/scaffold.hpp"

#include "evoagent/diff.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace evoagent {

AgentScaffold::AgentScaffold(FileTree files, LayerMap map)
    : files_(std::move(files)), layer_map_(std::move(map)) {
    discover_skills();
}

AgentScaffold AgentScaffold::load(const std::string& root_dir, LayerMap map) {
    return from_tree(read_tree(root_dir), std::move(map));
}

AgentScaffold AgentScaffold::from_tree(FileTree files, LayerMap map) {
    static const char* required[] = {kSystemTemplateFile, kInstanceTemplateFile,
                                     kObservationTemplateFile, kParseErrorTemplateFile,
                                     kDriverFile};
    for (const char* name : required)
        if (!files.count(name))
            throw MissingFileError(std::string("missing required scaffold file: ") + name);

    bool has_skills_dir = false;
    for (const auto& [path, _] : files)
        if (starts_with(path, std::string(kSkillsDir) + "/")) {
            has_skills_dir = true;
            break;
        }
    if (!has_skills_dir)
        throw MissingFileError("missing skills directory");

    AgentScaffold scaffold(std::move(files), std::move(map));

    std::string tmpl_dir = std::string(kSkillsDir) + "/" + kTemplateSkillName + "/";
    if (!scaffold.has_file(tmpl_dir + kSkillDescriptionFile) ||
        !scaffold.has_file(tmpl_dir + kSkillPlaybookFile))
        throw MissingFileError("missing protected template skill folder: " + tmpl_dir);
    return scaffold;
}

void AgentScaffold::discover_skills() {
    std::set<std::string> names;
    std::string prefix = std::string(kSkillsDir) + "/";
    for (const auto& [path, _] : files_) {
        if (!starts_with(path, prefix))
            continue;
        size_t slash = path.find('/', prefix.size());
        if (slash == std::string::npos)
            continue;  // loose file directly under skills/
        names.insert(path.substr(prefix.size(), slash - prefix.size()));
    }
    skills_.clear();
    for (const auto& name : names) {
        std::string dir = prefix + name + "/";
        auto desc = files_.find(dir + kSkillDescriptionFile);
        auto play = files_.find(dir + kSkillPlaybookFile);
        if (desc == files_.end())
            throw InvalidSkillError("skill folder lacks " + std::string(kSkillDescriptionFile) +
                                    ": " + name);
        if (play == files_.end())
            throw InvalidSkillError("skill folder lacks " + std::string(kSkillPlaybookFile) + ": " +
                                    name);
        if (trim(desc->second).empty())
            throw InvalidSkillError("skill description is empty: " + name);
        skills_.push_back(Skill{name, desc->second, play->second, 0});
    }
}

const std::string& AgentScaffold::file(const std::string& path) const {
    auto it = files_.find(path);
    if (it == files_.end())
        throw MissingFileError("no such scaffold file: " + path);
    return it->second;
}

const Skill* AgentScaffold::find_skill(const std::string& name) const {
    for (const auto& skill : skills_)
        if (skill.name == name)
            return &skill;
    return nullptr;
}

void AgentScaffold::inherit_skill_recency(const AgentScaffold& parent, int new_seq) {
    for (auto& skill : skills_) {
        const Skill* prev = parent.find_skill(skill.name);
        skill.created_seq = prev ? prev->created_seq : new_seq;
    }
}

ScaffoldDiff diff_trees(const FileTree& parent, const FileTree& child, const LayerMap& map) {
    ScaffoldDiff diff;
    std::set<std::string> paths;
    for (const auto& [p, _] : parent)
        paths.insert(p);
    for (const auto& [p, _] : child)
        paths.insert(p);

    for (const auto& path : paths) {
        auto pi = parent.find(path);
        auto ci = child.find(path);
        std::string a = pi == parent.end() ? "" : pi->second;
        std::string b = ci == child.end() ? "" : ci->second;
        if (a == b && pi != parent.end() && ci != child.end())
            continue;

        FileChange change;
        std::string a_label, b_label;
        if (pi == parent.end()) {
            change = FileChange::Created;
            a_label = "/dev/null";
            b_label = "b/" + path;
        } else if (ci == child.end()) {
            change = FileChange::Deleted;
            a_label = "a/" + path;
            b_label = "/dev/null";
        } else {
            change = FileChange::Modified;
            a_label = "a/" + path;
            b_label = "b/" + path;
        }
        std::string text = unified_diff(a, b, a_label, b_label);
        if (text.empty() && change == FileChange::Modified)
            continue;  // byte-identical
        if (text.empty())
            text = "--- " + a_label + "\n+++ " + b_label + "\n";  // empty file created/deleted
        diff.files.emplace(path, FileDiff{change, std::move(text)});

        if (auto layer = map.attribute(path))
            diff.layer_groups[*layer].push_back(path);
        else
            diff.unattributed.push_back(path);
    }
    return diff;
}

ScaffoldDiff diff_scaffold(const AgentScaffold& parent, const AgentScaffold& child) {
    return diff_trees(parent.files(), child.files(), parent.layer_map());
}

FileTree apply_scaffold_diff(const FileTree& parent, const ScaffoldDiff& diff) {
    FileTree out = parent;
    for (const auto& [path, fd] : diff.files) {
        switch (fd.change) {
        case FileChange::Deleted:
            out.erase(path);
            break;
        case FileChange::Created:
        case FileChange::Modified: {
            std::string base;
            if (fd.change == FileChange::Modified) {
                auto it = out.find(path);
                if (it == out.end())
                    throw DiffApplyError("diff modifies missing file: " + path);
                base = it->second;
            }
            out[path] = apply_unified_diff(base, fd.unified);
            break;
        }
        }
    }
    return out;
}

std::string ScaffoldDiff::to_text() const {
    std::string out;
    for (const auto& [_, fd] : files)
        out += fd.unified;
    return out;
}

std::string format_skills_context(const std::vector<Skill>& skills, int max_skills) {
    std::vector<const Skill*> menu;
    for (const auto& skill : skills)
        if (skill.name != kTemplateSkillName)
            menu.push_back(&skill);
    std::stable_sort(menu.begin(), menu.end(), [](const Skill* a, const Skill* b) {
        if (a->created_seq != b->created_seq)
            return a->created_seq > b->created_seq;
        return a->name < b->name;
    });
    if (max_skills >= 0 && menu.size() > static_cast<size_t>(max_skills))
        menu.resize(static_cast<size_t>(max_skills));

    std::ostringstream out;
    for (const Skill* skill : menu) {
        out << "- " << skill->name << ": " << trim(skill->description) << "\n";
    }
    return out.str();
}

}  // namespace evoagent
