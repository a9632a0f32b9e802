#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evoagent/runtime.hpp"

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <random>

using namespace evoagent;
namespace fs = std::filesystem;

namespace {

const std::string kSeedDir = std::string(EVOAGENT_DATA_DIR) + "/seed_scaffold";

AgentScaffold seed() { return AgentScaffold::load(kSeedDir); }

Challenge flag_challenge(int budget = 30) {
    Challenge c;
    c.name = "t";
    c.prompt = "find the flag";
    c.verifier_kind = VerifierKind::ExactFlag;
    c.verifier_value = "flag{ok}";
    c.step_budget = budget;
    return c;
}

FunctionExecutor echo_executor() {
    return FunctionExecutor([](const std::string& command) {
        ExecutionResult r;
        r.stdout_bytes = "ran: " + command + "\n";
        return r;
    });
}

std::string fresh_workspace(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("evoagent_rt_" + tag + "_" +
                                            std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("well-formed single block parses to its verbatim body") {
    auto parsed = parse_bash_action("reasoning here\n```bash\nls -la\n```");
    auto* action = std::get_if<ParsedAction>(&parsed);
    REQUIRE(action);
    CHECK(action->command == "ls -la");
    CHECK(action->thought == "reasoning here");
}

TEST_CASE("parse failures map to their kinds") {
    auto no_block = parse_bash_action("just prose, no fence");
    REQUIRE(std::holds_alternative<ActionParseError>(no_block));
    CHECK(std::get<ActionParseError>(no_block).kind == ParseErrorKind::NoBlock);

    auto two = parse_bash_action("t\n```bash\na\n```\nand\n```bash\nb\n```");
    REQUIRE(std::holds_alternative<ActionParseError>(two));
    CHECK(std::get<ActionParseError>(two).kind == ParseErrorKind::MultipleBlocks);
    CHECK(std::get<ActionParseError>(two).block_count == 2);

    auto bare = parse_bash_action("```bash\nls\n```");
    REQUIRE(std::holds_alternative<ActionParseError>(bare));
    CHECK(std::get<ActionParseError>(bare).kind == ParseErrorKind::NoReasoning);

    auto unclosed = parse_bash_action("t\n```bash\nls\n");
    REQUIRE(std::holds_alternative<ActionParseError>(unclosed));
    CHECK(std::get<ActionParseError>(unclosed).kind == ParseErrorKind::Other);

    // Non-bash fences never count as actions.
    auto python_only = parse_bash_action("t\n```python\nprint(1)\n```");
    REQUIRE(std::holds_alternative<ActionParseError>(python_only));
    CHECK(std::get<ActionParseError>(python_only).kind == ParseErrorKind::NoBlock);
}

TEST_CASE("parse round-trips arbitrary fence-free command text") {
    std::mt19937 rng(7);
    static const char* pieces[] = {"ls", "grep -r x .", "echo 'a b'", "cat /tmp/f", "a && b",
                                   "python3 - <<'EOF'", "for i in 1 2 3; do echo $i; done"};
    for (int trial = 0; trial < 200; ++trial) {
        int n = std::uniform_int_distribution<int>(1, 4)(rng);
        std::vector<std::string> body;
        for (int i = 0; i < n; ++i)
            body.push_back(pieces[std::uniform_int_distribution<size_t>(0, 6)(rng)]);
        std::string command = join(body, "\n");
        std::string rendered = "thought text\n```bash\n" + command + "\n```";
        auto parsed = parse_bash_action(rendered);
        REQUIRE(std::holds_alternative<ParsedAction>(parsed));
        CHECK(std::get<ParsedAction>(parsed).command == command);
    }
}

TEST_CASE("observation embeds the verbatim timeout sentence on returncode 124") {
    ExecutionResult r;
    r.returncode = 124;
    r.timed_out = true;
    r.stdout_bytes = "partial";
    std::string obs = render_observation(r, "/work", seed(), 64 * 1024);
    CHECK(obs.find("Command timed out (returncode=124). You may need to check the command "
                   "script or parameters.") != std::string::npos);
    CHECK(obs.find("<returncode>124</returncode>") != std::string::npos);
}

TEST_CASE("empty output renders returncode and prompt line only") {
    ExecutionResult r;
    std::string obs = render_observation(r, "/work", seed(), 64 * 1024);
    CHECK(obs.find("<returncode>0</returncode>") != std::string::npos);
    CHECK(obs.find("/work$") != std::string::npos);
    CHECK(obs.find("timed out") == std::string::npos);
}

TEST_CASE("oversized output is truncated to exactly the cap plus a marker") {
    const size_t cap = 64 * 1024;
    const size_t total = 1024 * 1024;
    ExecutionResult r;
    r.stdout_bytes = std::string(total, 'x');
    std::string obs = render_observation(r, "/w", seed(), cap);

    // Oracle: the payload between the template frame and the marker is cap
    // bytes long and the marker names both sizes.
    std::string marker = "\n[output truncated: first " + std::to_string(cap) + " of " +
                         std::to_string(total) + " bytes shown]";
    size_t marker_at = obs.find(marker);
    REQUIRE(marker_at != std::string::npos);
    size_t payload_start = obs.find("<command_output>\n") + strlen("<command_output>\n");
    CHECK(marker_at - payload_start == cap);
}

TEST_CASE("load_skill resolves playbooks and reports unknown names") {
    FileTree tree = read_tree(kSeedDir);
    tree["skills/web-sqli/description.md"] = "SQL injection workflows";
    tree["skills/web-sqli/SKILL.md"] = "# full sqli playbook\nsteps here\n";
    AgentScaffold scaffold = AgentScaffold::from_tree(tree);

    auto hit = handle_load_skill("load_skill --name web-sqli", scaffold);
    REQUIRE(hit);
    CHECK(hit->observation == "# full sqli playbook\nsteps here\n");
    CHECK(hit->loaded == "web-sqli");

    CHECK_FALSE(handle_load_skill("ls", scaffold));

    auto ghost = handle_load_skill("load_skill --name ghost", scaffold);
    REQUIRE(ghost);
    CHECK_FALSE(ghost->loaded);
    CHECK(ghost->observation.find("ghost") != std::string::npos);
}

TEST_CASE("verify_submission distinguishes the three verdicts") {
    Challenge c = flag_challenge();
    auto solved = verify_submission("submit flag{ok}", c);
    CHECK(solved.verdict == SubmissionVerdict::Solved);

    auto wrong = verify_submission("submit flag{nope}", c);
    CHECK(wrong.verdict == SubmissionVerdict::Incorrect);
    CHECK(wrong.message.find("flag{nope}") != std::string::npos);

    CHECK(verify_submission("ls -la", c).verdict == SubmissionVerdict::NotASubmission);
}

TEST_CASE("command verifier maps exit status to the verdict") {
    Challenge c;
    c.name = "cmd";
    c.verifier_kind = VerifierKind::Command;
    c.verifier_value = "check {token}";
    FunctionExecutor pass([](const std::string& command) {
        ExecutionResult r;
        r.returncode = command.find("'good'") != std::string::npos ? 0 : 1;
        return r;
    });
    CHECK(verify_submission("submit good", c, &pass).verdict == SubmissionVerdict::Solved);
    CHECK(verify_submission("submit bad", c, &pass).verdict == SubmissionVerdict::Incorrect);
    CHECK_THROWS_AS(verify_submission("submit x", c, nullptr), VerifierFailure);
}

TEST_CASE("episode solves on step 1 when the backend submits the flag") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "I know the flag.\n```bash\nsubmit flag{ok}\n```");
    auto executor = echo_executor();
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("solve1"), {});
    CHECK(t.status == EpisodeStatus::Solved);
    REQUIRE(t.steps.size() == 1);
    CHECK(t.steps[0].action == "submit flag{ok}");
}

TEST_CASE("thirty non-solving turns exhaust the default budget") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "looking around\n```bash\nls\n```", -1);
    auto executor = echo_executor();
    Challenge c = flag_challenge(30);
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("budget"), {});
    CHECK(t.status == EpisodeStatus::Unsolved);
    CHECK(t.steps.size() == 30);
}

TEST_CASE("malformed turn consumes a step and carries no action") {
    // Hand-traced: step 1 fails parsing (no block), step 2 submits the flag.
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "no action this turn, just rambling");
    backend.add(CallRole::Episode, "*", "got it\n```bash\nsubmit flag{ok}\n```");
    auto executor = echo_executor();
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("malformed"), {});
    CHECK(t.status == EpisodeStatus::Solved);
    REQUIRE(t.steps.size() == 2);
    CHECK_FALSE(t.steps[0].action.has_value());
    CHECK(t.steps[0].observation.find("No valid bash code block") != std::string::npos);
    CHECK(t.steps[1].action == "submit flag{ok}");
}

TEST_CASE("incorrect submission appends the scorer message and continues") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "try\n```bash\nsubmit flag{wrong}\n```");
    backend.add(CallRole::Episode, "*", "retry\n```bash\nsubmit flag{ok}\n```");
    auto executor = echo_executor();
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("incorrect"), {});
    CHECK(t.status == EpisodeStatus::Solved);
    REQUIRE(t.steps.size() == 2);
    CHECK(t.steps[0].observation.find("rejected by the scorer") != std::string::npos);
}

TEST_CASE("backend failure aborts with a partial trajectory") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "ok\n```bash\nls\n```");
    // second request exhausts the script
    auto executor = echo_executor();
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("abort"), {});
    CHECK(t.aborted);
    CHECK(t.steps.size() == 1);
    CHECK(t.status == EpisodeStatus::Unsolved);
}

TEST_CASE("executor launch failure becomes an observation, not an abort") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "t\n```bash\nboom\n```");
    backend.add(CallRole::Episode, "*", "t\n```bash\nsubmit flag{ok}\n```");
    FunctionExecutor broken(
        [](const std::string&) -> ExecutionResult { throw std::runtime_error("cannot spawn"); });
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, broken, fresh_workspace("launchfail"), {});
    CHECK_FALSE(t.aborted);
    REQUIRE(t.steps.size() == 2);
    CHECK(t.steps[0].observation.find("cannot spawn") != std::string::npos);
    CHECK(t.steps[0].returncode == 127);
}

TEST_CASE("step budget is never exceeded under random scripted backends") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        int budget = std::uniform_int_distribution<int>(1, 8)(rng);
        ScriptedBackend backend;
        int solve_at = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 1; i <= 12; ++i) {
            if (i == solve_at)
                backend.add(CallRole::Episode, "*", "t\n```bash\nsubmit flag{ok}\n```");
            else if (i % 3 == 0)
                backend.add(CallRole::Episode, "*", "malformed turn");
            else
                backend.add(CallRole::Episode, "*", "t\n```bash\nls\n```");
        }
        auto executor = echo_executor();
        Challenge c = flag_challenge(budget);
        Trajectory t = run_episode(seed(), c, backend, executor,
                                   fresh_workspace("prop" + std::to_string(trial)), {});
        CHECK(t.steps.size() <= static_cast<size_t>(budget));
        // Solved iff the last step's submission passed.
        if (t.status == EpisodeStatus::Solved) {
            CHECK(t.steps.back().action == "submit flag{ok}");
            CHECK(solve_at <= budget);
        } else {
            CHECK(solve_at > budget);
        }
        // Indices strictly increase from 1.
        for (size_t i = 0; i < t.steps.size(); ++i)
            CHECK(t.steps[i].index == static_cast<int>(i) + 1);
    }
}

TEST_CASE("local executor runs commands and enforces timeouts") {
    LocalExecutor executor;
    std::string ws = fresh_workspace("local");
    fs::create_directories(ws);

    auto echo = executor.run("echo hello; echo err >&2; exit 3", ws, std::chrono::seconds(10));
    CHECK(echo.stdout_bytes == "hello\n");
    CHECK(echo.stderr_bytes == "err\n");
    CHECK(echo.returncode == 3);
    CHECK_FALSE(echo.timed_out);

    auto slow = executor.run("sleep 5", ws, std::chrono::seconds(1));
    CHECK(slow.timed_out);
    CHECK(slow.returncode == 124);
}

TEST_CASE("trajectory log framing is what the summarizer parses") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "first thought\n```bash\nls\n```");
    backend.add(CallRole::Episode, "*", "done\n```bash\nsubmit flag{ok}\n```");
    auto executor = echo_executor();
    Challenge c = flag_challenge();
    Trajectory t = run_episode(seed(), c, backend, executor, fresh_workspace("log"), {});
    std::string log = trajectory_to_log(t);
    CHECK(log.find("=== STEP 1 ===") != std::string::npos);
    CHECK(log.find("=== STEP 2 ===") != std::string::npos);
    CHECK(log.find("THOUGHT:\nfirst thought") != std::string::npos);
    CHECK(log.find("ACTION:\nls") != std::string::npos);
    CHECK(log.find("RETURNCODE: 0") != std::string::npos);
    CHECK(log.find("RETURNCODE: none") != std::string::npos);
}
