#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evoagent/scaffold.hpp"

#include <filesystem>

using namespace evoagent;
namespace fs = std::filesystem;

namespace {

const std::string kSeedDir = std::string(EVOAGENT_DATA_DIR) + "/seed_scaffold";

FileTree seed_tree() { return read_tree(kSeedDir); }

}  // namespace

TEST_CASE("default layer map attributes the paper file set") {
    LayerMap map = LayerMap::default_map();
    CHECK(map.attribute("system_template.txt") == LayerId::Strategy);
    CHECK(map.attribute("instance_template.txt") == LayerId::EnvInterface);
    CHECK(map.attribute("skills/web-sqli/SKILL.md") == LayerId::DomainKnowledge);
    CHECK(map.attribute("skills/web-sqli/description.md") == LayerId::DomainKnowledge);
    CHECK(map.attribute("agent.py") == LayerId::Perception);
    CHECK(map.attribute("observation_template.txt") == LayerId::Perception);
    CHECK(map.attribute("output_parse_error_template.txt") == LayerId::Perception);
    CHECK(map.attribute("README.md") == std::nullopt);
    CHECK_THROWS_AS(map.attribute("../etc/passwd"), MalformedPathError);
    CHECK_THROWS_AS(map.attribute("/etc/passwd"), MalformedPathError);
}

TEST_CASE("layer order matches the mutation phase order") {
    CHECK(static_cast<int>(LayerId::Strategy) == 0);
    CHECK(static_cast<int>(LayerId::EnvInterface) == 1);
    CHECK(static_cast<int>(LayerId::DomainKnowledge) == 2);
    CHECK(static_cast<int>(LayerId::Perception) == 3);
}

TEST_CASE("default layer file-sets are pairwise disjoint on the seed") {
    LayerMap map = LayerMap::default_map();
    std::vector<std::string> paths;
    for (const auto& [path, _] : seed_tree())
        paths.push_back(path);
    CHECK(map.ambiguous_paths(paths).empty());
    // Every seed path attributes to exactly one layer.
    for (const auto& path : paths)
        CHECK(map.attribute(path).has_value());
}

TEST_CASE("seed scaffold loads with the template skill") {
    AgentScaffold scaffold = AgentScaffold::load(kSeedDir);
    REQUIRE(scaffold.skills().size() == 1);
    CHECK(scaffold.skills()[0].name == "skill_template");
    CHECK(scaffold.has_file("system_template.txt"));
}

TEST_CASE("load errors name the missing piece") {
    FileTree tree = seed_tree();
    tree.erase("instance_template.txt");
    CHECK_THROWS_WITH_AS(AgentScaffold::from_tree(tree),
                         doctest::Contains("instance_template.txt"), MissingFileError);

    tree = seed_tree();
    tree["skills/broken/description.md"] = "a skill without a playbook";
    CHECK_THROWS_WITH_AS(AgentScaffold::from_tree(tree), doctest::Contains("broken"),
                         InvalidSkillError);

    tree = seed_tree();
    tree["skills/empty-desc/description.md"] = "   \n";
    tree["skills/empty-desc/SKILL.md"] = "# body";
    CHECK_THROWS_AS(AgentScaffold::from_tree(tree), InvalidSkillError);
}

TEST_CASE("diff_scaffold of identical scaffolds is empty") {
    AgentScaffold a = AgentScaffold::load(kSeedDir);
    CHECK(diff_scaffold(a, a).empty());
}

TEST_CASE("created skill file groups under domain knowledge") {
    AgentScaffold parent = AgentScaffold::load(kSeedDir);
    FileTree child_tree = parent.files();
    child_tree["skills/x/description.md"] = "trigger\n";
    child_tree["skills/x/SKILL.md"] = "# playbook\n";
    AgentScaffold child = AgentScaffold::from_tree(child_tree);

    ScaffoldDiff diff = diff_scaffold(parent, child);
    REQUIRE(diff.files.size() == 2);
    CHECK(diff.files.at("skills/x/SKILL.md").change == FileChange::Created);
    REQUIRE(diff.layer_groups.count(LayerId::DomainKnowledge));
    CHECK(diff.layer_groups.at(LayerId::DomainKnowledge).size() == 2);
    CHECK(diff.unattributed.empty());
}

TEST_CASE("one-line template edit diffs as one strategy hunk") {
    FileTree parent_tree = seed_tree();
    parent_tree["system_template.txt"] = "line one\nline two\nline three\n";
    FileTree child_tree = parent_tree;
    child_tree["system_template.txt"] = "line one\nline 2\nline three\n";

    ScaffoldDiff diff = diff_trees(parent_tree, child_tree, LayerMap::default_map());
    REQUIRE(diff.files.size() == 1);
    const FileDiff& fd = diff.files.at("system_template.txt");
    CHECK(fd.change == FileChange::Modified);
    CHECK(count_hunks(fd.unified) == 1);
    REQUIRE(diff.layer_groups.count(LayerId::Strategy));
    CHECK(diff.layer_groups.at(LayerId::Strategy) ==
          std::vector<std::string>{"system_template.txt"});
}

TEST_CASE("scaffold diff round-trips byte-for-byte") {
    FileTree parent = seed_tree();
    FileTree child = parent;
    child["system_template.txt"] += "extra line\n";
    child.erase("observation_template.txt");
    child["skills/y/description.md"] = "desc";  // no trailing newline
    child["skills/y/SKILL.md"] = "# y\nbody\n";
    child["agent.py"] = "print('rewritten')\n";

    ScaffoldDiff diff = diff_trees(parent, child, LayerMap::default_map());
    FileTree rebuilt = apply_scaffold_diff(parent, diff);
    CHECK(rebuilt == child);
}

TEST_CASE("skills context renders at most max_skills entries, recency first") {
    std::vector<Skill> skills = {
        {"alpha", "first skill", "play", 0},  {"beta", "second skill", "play", 0},
        {"gamma", "third skill", "play", 2},  {"delta", "fourth skill", "play", 1},
        {"omega", "fifth skill", "play", 0},  {"zeta", "sixth skill", "play", 0},
        {"skill_template", "canonical reference", "play", 0},
    };
    std::string menu = format_skills_context(skills, 4);
    auto lines = split_lines(menu);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "- gamma: third skill");   // newest
    CHECK(lines[1] == "- delta: fourth skill");  // next newest
    CHECK(lines[2] == "- alpha: first skill");   // then lexicographic
    CHECK(lines[3] == "- beta: second skill");
    CHECK(menu.find("skill_template") == std::string::npos);

    CHECK(format_skills_context({}, 4).empty());
    std::vector<Skill> two = {{"a", "x", "p", 0}, {"b", "y", "p", 0}};
    CHECK(split_lines(format_skills_context(two, 4)).size() == 2);
}

TEST_CASE("skills context entry count equals min of menu size and cap") {
    std::vector<Skill> skills;
    for (int i = 0; i < 7; ++i)
        skills.push_back({"s" + std::to_string(i), "d", "p", 0});
    skills.push_back({"skill_template", "ref", "p", 0});
    for (int cap = 0; cap <= 9; ++cap) {
        auto lines = split_lines(format_skills_context(skills, cap));
        CHECK(static_cast<int>(lines.size()) == std::min(7, cap));
    }
}
