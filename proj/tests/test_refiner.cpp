#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evoagent/refiner.hpp"

#include <filesystem>

using namespace evoagent;

namespace {

const std::string kSeedDir = std::string(EVOAGENT_DATA_DIR) + "/seed_scaffold";
const std::string kPacksDir = std::string(EVOAGENT_DATA_DIR) + "/prompt_packs";

FileTree seed_tree() { return read_tree(kSeedDir); }

MutationContext simple_context() {
    MutationContext context;
    context.summary_text = "=== STEP 1 ===\nTHOUGHT: poked around\nOBSERVATION: nothing\n";
    context.diagnosis_text = "### 3. Final Assessment\nSCORE: 10\n";
    context.gen0_system_template = seed_tree().at("system_template.txt");
    return context;
}

std::string skill_patch(const std::string& name) {
    return "Strategic Improvement Plan: add the missing capability.\n"
           "<patch><rationale>repeated misses</rationale>\n"
           "<create_file path=\"skills/" + name + "/description.md\">\n<content>\n"
           "trigger for " + name + "\n</content>\n</create_file>\n</patch>\n"
           "<patch><rationale>playbook</rationale>\n"
           "<create_file path=\"skills/" + name + "/SKILL.md\">\n<content>\n"
           "# " + name + "\nsteps\n</content>\n</create_file>\n</patch>\n";
}

}  // namespace

TEST_CASE("validator accepts the untouched seed scaffold") {
    Validators validators;
    CHECK(validate_tree(seed_tree(), validators).empty());
}

TEST_CASE("validator flags an unclosed template delimiter") {
    Validators validators;
    FileTree tree = seed_tree();
    tree["observation_template.txt"] = "broken {{ output\n";
    auto errors = validate_tree(tree, validators);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].path == "observation_template.txt");
}

TEST_CASE("validator flags a driver syntax error via the external checker") {
    Validators validators;
    FileTree tree = seed_tree();
    tree["agent.py"] = "def broken(:\n    pass\n";
    auto errors = validate_tree(tree, validators);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].path == "agent.py");
}

TEST_CASE("validator flags a template referencing an unknown slot") {
    Validators validators;
    FileTree tree = seed_tree();
    tree["observation_template.txt"] = "obs {{ not_a_runtime_var }}\n";
    auto errors = validate_tree(tree, validators);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].message.find("not_a_runtime_var") != std::string::npos);
}

TEST_CASE("unavailable external checker raises ValidatorUnavailable") {
    Validators validators;
    validators.python_command = "definitely-not-a-python-binary";
    CHECK_THROWS_AS(validate_tree(seed_tree(), validators), ValidatorUnavailable);
}

TEST_CASE("run_phase applies a valid skill creation in the domain phase") {
    FileTree tree = seed_tree();
    ScriptedBackend backend;
    backend.add(CallRole::Refiner, "*", skill_patch("web-sqli"));
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    RefinerOptions options;

    auto result = run_phase(tree, LayerId::DomainKnowledge, simple_context(), backend, pack,
                            options, "child0");
    CHECK(result.changed);
    CHECK_FALSE(result.reverted);
    CHECK(tree.count("skills/web-sqli/SKILL.md"));
    CHECK(result.report.applied_count() == 2);
}

TEST_CASE("patch-free response is a valid no-op") {
    FileTree tree = seed_tree();
    FileTree before = tree;
    ScriptedBackend backend;
    backend.add(CallRole::Refiner, "*",
                "no L_S patches needed; failure routes to phase 3");
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    RefinerOptions options;

    auto result = run_phase(tree, LayerId::Strategy, simple_context(), backend, pack, options,
                            "child0");
    CHECK_FALSE(result.changed);
    CHECK_FALSE(result.reverted);
    CHECK(tree == before);
}

TEST_CASE("phase breaking the driver syntax reverts byte-identically") {
    FileTree tree = seed_tree();
    FileTree before = tree;
    ScriptedBackend backend;
    backend.add(CallRole::Refiner, "*",
                "<replace_code path=\"agent.py\">\n<search>\nimport re\n</search>\n"
                "<replace>\nimport re(((\n</replace>\n</replace_code>\n");
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    RefinerOptions options;

    auto result =
        run_phase(tree, LayerId::Perception, simple_context(), backend, pack, options, "c");
    CHECK(result.reverted);
    CHECK_FALSE(result.changed);
    CHECK_FALSE(result.errors.empty());
    CHECK(tree == before);
}

TEST_CASE("phase isolation: the diff after a phase touches only that layer") {
    // The response tries to patch three layers; only the active layer's edit
    // survives the apply step.
    std::string greedy =
        skill_patch("greedy") +
        "<replace_code path=\"system_template.txt\">\n<search>\nRESPONSE FORMAT:\n</search>\n"
        "<replace>\nRESPONSE SHAPE:\n</replace>\n</replace_code>\n"
        "<replace_code path=\"instance_template.txt\">\n<search>\n# OPERATIONAL GUIDANCE\n"
        "</search>\n<replace>\n# GUIDANCE\n</replace>\n</replace_code>\n";

    FileTree tree = seed_tree();
    FileTree before = tree;
    ScriptedBackend backend;
    backend.add(CallRole::Refiner, "*", greedy);
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    RefinerOptions options;

    auto result = run_phase(tree, LayerId::DomainKnowledge, simple_context(), backend, pack,
                            options, "c");
    CHECK(result.changed);
    ScaffoldDiff diff = diff_trees(before, tree, LayerMap::default_map());
    for (const auto& [path, _] : diff.files) {
        auto layer = LayerMap::default_map().attribute(path);
        REQUIRE(layer.has_value());
        CHECK(*layer == LayerId::DomainKnowledge);
    }
}

TEST_CASE("backend failure makes the phase a no-op") {
    FileTree tree = seed_tree();
    FileTree before = tree;
    ScriptedBackend backend;  // empty script: first request throws
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    RefinerOptions options;
    auto result =
        run_phase(tree, LayerId::Strategy, simple_context(), backend, pack, options, "c");
    CHECK(result.backend_failed);
    CHECK(tree == before);
}

TEST_CASE("mutate produces children via four phase calls each") {
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    ScriptedBackend backend;
    // 3 children x 4 phases = 12 calls; phase 3 (index 2) creates a skill.
    for (int child = 0; child < 3; ++child) {
        std::string key = "child" + std::to_string(child);
        backend.add(CallRole::Refiner, key, "no-op phase 1");
        backend.add(CallRole::Refiner, key, "no-op phase 2");
        backend.add(CallRole::Refiner, key, skill_patch("skill-c" + std::to_string(child)));
        backend.add(CallRole::Refiner, key, "no-op phase 4");
    }
    RefinerOptions options;
    auto children = mutate(seed_tree(), simple_context(), 3, backend, pack, options,
                           {"child0", "child1", "child2"});
    REQUIRE(children.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(children[static_cast<size_t>(i)].valid);
        CHECK(children[static_cast<size_t>(i)].refiner_calls == 4);
        CHECK(children[static_cast<size_t>(i)].tree.count(
            "skills/skill-c" + std::to_string(i) + "/SKILL.md"));
    }
    // The script must now be fully drained: a 13th call would throw.
    BackendRequest extra{CallRole::Refiner, "child0", {}, {}};
    CHECK_THROWS_AS(backend.complete(extra), ScriptExhausted);
}

TEST_CASE("all-no-op children equal the parent and stay valid") {
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    ScriptedBackend backend;
    backend.add(CallRole::Refiner, "*", "nothing to change", -1);
    RefinerOptions options;
    FileTree parent = seed_tree();
    auto children = mutate(parent, simple_context(), 2, backend, pack, options, {"a", "b"});
    REQUIRE(children.size() == 2);
    for (const auto& child : children) {
        CHECK(child.valid);
        CHECK(child.tree == parent);
    }
}

TEST_CASE("a child hitting an unavailable validator is discarded") {
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "default");
    ScriptedBackend backend;
    // child "bad" patches the driver (forcing a python check with a broken
    // checker); children "ok1"/"ok2" are no-ops that never invoke it.
    for (const std::string key : {"ok1", "bad", "ok2"}) {
        if (key == "bad") {
            backend.add(CallRole::Refiner, key, "phase1 none");
            backend.add(CallRole::Refiner, key, "phase2 none");
            backend.add(CallRole::Refiner, key, "phase3 none");
            backend.add(CallRole::Refiner, key,
                        "<replace_code path=\"agent.py\">\n<search>\nimport re\n</search>\n"
                        "<replace>\nimport re2\n</replace>\n</replace_code>\n");
        } else {
            backend.add(CallRole::Refiner, key, "none", 4);
        }
    }
    RefinerOptions options;
    options.validators.python_command = "missing-python-checker";
    auto children =
        mutate(seed_tree(), simple_context(), 3, backend, pack, options, {"ok1", "bad", "ok2"});
    REQUIRE(children.size() == 3);
    CHECK(children[0].valid);
    CHECK_FALSE(children[1].valid);  // ValidatorUnavailable mid-child discards it
    CHECK(children[2].valid);
}

TEST_CASE("holistic pack runs a single unscoped call per child") {
    PromptPack pack = PromptPack::load_by_id(kPacksDir, "ablation-holistic");
    REQUIRE_FALSE(pack.layered());
    ScriptedBackend backend;
    // One call may now patch strategy and skills together.
    backend.add(CallRole::Refiner, "h0",
                skill_patch("holistic-skill") +
                    "<replace_code path=\"system_template.txt\">\n<search>\nRESPONSE FORMAT:\n"
                    "</search>\n<replace>\nRESPONSE FORMAT (v2):\n</replace>\n</replace_code>\n");
    RefinerOptions options;
    auto children = mutate(seed_tree(), simple_context(), 1, backend, pack, options, {"h0"});
    REQUIRE(children.size() == 1);
    CHECK(children[0].valid);
    CHECK(children[0].refiner_calls == 1);
    CHECK(children[0].tree.count("skills/holistic-skill/SKILL.md"));
    CHECK(children[0].tree.at("system_template.txt").find("RESPONSE FORMAT (v2):") !=
          std::string::npos);
}
