#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evoagent/config.hpp"
#include "evoagent/prompt_pack.hpp"
#include "evoagent/template_engine.hpp"

#include <httplib.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

using namespace evoagent;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = EVOAGENT_DATA_DIR;
const std::string kPacksDir = kDataDir + "/prompt_packs";

std::string scratch(const std::string& tag) {
    auto dir = fs::temp_directory_path() /
               ("evoagent_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string minimal_config() {
    return "challenge = " + kDataDir + "/challenges/toy\n" +
           "scaffold = " + kDataDir + "/seed_scaffold\n" +
           "backend = scripted\n" +
           "backend_script = " + kDataDir + "/../tests/data/e2e/solve_script.txt\n";
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    std::string command = std::string(EVOAGENT_CLI_PATH) + " " + args;
    std::string out_file = scratch("cliout") + "/out.txt";
    command += " > " + out_file + " 2>&1";
    int status = std::system(command.c_str());
    if (output)
        *output = fs::exists(out_file) ? read_file(out_file) : "";
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("minimal config fills the paper defaults") {
    RunConfig config = RunConfig::from_text(minimal_config());
    CHECK(config.beam.generations == 3);
    CHECK(config.beam.beam_width == 3);
    CHECK(config.beam.children_per_parent == 3);
    CHECK(config.beam.select_top == 2);
    CHECK(config.beam.step_budget == 30);
    CHECK(config.beam.rollout_budget_cap == 16);
    CHECK(config.beam.mutation_temperature == doctest::Approx(1.0));
    CHECK(config.max_tokens == 10240);
    CHECK(config.command_timeout_s == 120);
    CHECK(config.observation_cap == 64 * 1024);
    CHECK(config.max_skills == 4);
    CHECK(config.summary_window == 10);
    CHECK(config.backfill_cap == 3);
    CHECK(config.fuzzy_threshold == doctest::Approx(0.6));
}

TEST_CASE("unknown keys and invariant violations are ConfigErrors naming the key") {
    CHECK_THROWS_WITH_AS(RunConfig::from_text(minimal_config() + "frobnicate = 1\n"),
                         doctest::Contains("frobnicate"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::from_text(minimal_config() + "generations = -2\n"),
                         doctest::Contains("generations"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::from_text(minimal_config() + "generations = abc\n"),
                         doctest::Contains("generations"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("scaffold = /nonexistent\n"), ConfigError);
    // select_top > beam_width violates the beam invariant
    CHECK_THROWS_AS(RunConfig::from_text(minimal_config() + "select_top = 9\n"), ConfigError);
    // missing required keys
    CHECK_THROWS_WITH_AS(RunConfig::from_text(""), doctest::Contains("challenge"), ConfigError);
}

TEST_CASE("scripted replay drains entries and then hard-errors") {
    std::string dir = scratch("script");
    write_file(dir + "/s.txt",
               "=== SCRIPT role=episode ===\n"
               "first response\n"
               "=== SCRIPT role=episode key=nodeA repeat=2 ===\n"
               "keyed response\n");
    ScriptedBackend backend = ScriptedBackend::from_file(dir + "/s.txt");

    BackendRequest keyed{CallRole::Episode, "nodeA", {}, {}};
    CHECK(backend.complete(keyed) == "keyed response");
    CHECK(backend.complete(keyed) == "keyed response");
    // keyed queue exhausted; falls back to the wildcard entry once
    CHECK(backend.complete(keyed) == "first response");
    CHECK_THROWS_WITH_AS(backend.complete(keyed), doctest::Contains("episode"),
                         ScriptExhausted);

    BackendRequest other{CallRole::Summarizer, "x", {}, {}};
    CHECK_THROWS_AS(backend.complete(other), ScriptExhausted);
}

TEST_CASE("scripted responses ignore temperature settings (determinism contract)") {
    ScriptedBackend backend;
    backend.add(CallRole::Episode, "*", "same text", -1);
    BackendRequest hot{CallRole::Episode, "k", {}, {2.0, 99}};
    BackendRequest cold{CallRole::Episode, "k", {}, {0.0, 1}};
    CHECK(backend.complete(hot) == backend.complete(cold));
}

TEST_CASE("prompt packs render with zero unresolved slots against fuzzed inputs") {
    std::mt19937 rng(808);
    auto random_text = [&](bool with_braces) {
        static const char* pieces[] = {"alpha",  "0x41",  "\n",  "SCORE:", "step",
                                       "payload", "### ", "-",   "`code`", " "};
        std::string out;
        int n = std::uniform_int_distribution<int>(0, 30)(rng);
        for (int i = 0; i < n; ++i)
            out += pieces[std::uniform_int_distribution<size_t>(0, 9)(rng)];
        if (with_braces)
            out += "{{ not_a_slot }}";
        return out;
    };

    for (const std::string pack_id : {"default", "ablation-holistic", "ablation-no-diagnosis"}) {
        PromptPack pack = PromptPack::load_by_id(kPacksDir, pack_id);
        for (int trial = 0; trial < 30; ++trial) {
            TemplateVars sum_vars = {
                {"raw_content", random_text(false)}, {"start_step", "11"},
                {"end_step", "20"},                  {"total_steps", "25"},
                {"previous_context", random_text(false)}, {"max_step", "25"},
            };
            std::string sys = render_template(pack.summarizer.chunk_system, sum_vars);
            std::string user = render_template(pack.summarizer.chunk_user, sum_vars);
            CHECK(sys.find("{{") == std::string::npos);
            CHECK(user.find("{{") == std::string::npos);

            if (pack.diagnosis_enabled()) {
                TemplateVars diag_vars = {{"raw_content", random_text(false)}};
                CHECK(render_template(*pack.diagnosis.user, diag_vars).find("{{") ==
                      std::string::npos);
                CHECK(render_template(*pack.diagnosis.system, diag_vars).find("{{") ==
                      std::string::npos);
            }

            TemplateVars refiner_vars = {
                {"mutation_evidence", random_text(false)},
                {"parent_reports", random_text(false)},
                {"current_reports", random_text(false)},
                {"prompt_templates", random_text(false)},
                {"agent_implementation", random_text(false)},
                {"skill_context", random_text(false)},
                {"gen0_system_template", random_text(false)},
            };
            CHECK(render_template(pack.coderefiner_system, refiner_vars).find("{{") ==
                  std::string::npos);
            CHECK(render_template(pack.coderefiner_user, refiner_vars).find("{{") ==
                  std::string::npos);
            for (const auto& card : pack.phase_cards)
                CHECK(render_template(card, refiner_vars).find("{{") == std::string::npos);
            if (pack.holistic_card)
                CHECK(render_template(*pack.holistic_card, refiner_vars).find("{{") ==
                      std::string::npos);
        }
    }
}

TEST_CASE("substituted values pass through without re-expansion") {
    TemplateVars vars = {{"x", "literal {{ not_expanded }} braces"}};
    std::string out = render_template("value: {{ x }}", vars);
    CHECK(out == "value: literal {{ not_expanded }} braces");
}

TEST_CASE("template errors: unclosed delimiters, unknown slots, sections") {
    CHECK(check_template("ok {{ a }} {{#s}}x{{/s}}") == std::nullopt);
    CHECK(check_template("broken {{ a").has_value());
    CHECK(check_template("{{#s}} unclosed").has_value());
    CHECK(check_template("{{/s}} stray").has_value());
    CHECK_THROWS_AS(render_template("{{ missing }}", {}), TemplateError);
    // inactive sections skip unknown slots
    CHECK(render_template("{{#off}}{{ missing }}{{/off}}ok", {{"off", ""}}) == "ok");
}

TEST_CASE("http chat backend retries transient failures and parses the reply") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        int n = ++hits;
        if (auto it = req.headers.find("Authorization"); it != req.headers.end())
            seen_auth = it->second;
        if (n == 1) {
            res.status = 500;
            res.set_content("transient", "text/plain");
            return;
        }
        res.status = 200;
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"}}]})",
                        "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("EVOAGENT_TEST_KEY", "sk-test-123", 1);
    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.model = "test-model";
    config.api_key_env = "EVOAGENT_TEST_KEY";
    config.initial_backoff = std::chrono::milliseconds(10);
    HttpChatBackend backend(config);

    BackendRequest request;
    request.role = CallRole::Episode;
    request.key = "k";
    request.messages = {{"system", "s"}, {"user", "u"}};
    CHECK(backend.complete(request) == "pong");
    CHECK(hits == 2);
    CHECK(seen_auth == "Bearer sk-test-123");

    server.stop();
    serve.join();
}

TEST_CASE("http backend rejects non-retryable statuses immediately") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.model = "m";
    HttpChatBackend backend(config);
    BackendRequest request;
    request.messages = {{"user", "u"}};
    CHECK_THROWS_AS(backend.complete(request), BackendFailure);
    CHECK(hits == 1);

    server.stop();
    serve.join();
}

// ---- CLI surface ----

TEST_CASE("cli: summarize on an empty log exits nonzero with MalformedLog") {
    std::string dir = scratch("sum");
    write_file(dir + "/empty.log", "");
    write_file(dir + "/script.txt", "=== SCRIPT role=summarizer ===\nunused\n");
    std::string output;
    int code = run_cli("summarize --log " + dir + "/empty.log --backend-script " + dir +
                           "/script.txt --packs-dir " + kPacksDir,
                       &output);
    CHECK(code != 0);
    CHECK(output.find("error:") != std::string::npos);
}

TEST_CASE("cli: summarize produces a step-framed summary") {
    std::string dir = scratch("sum2");
    write_file(dir + "/t.log",
               "=== STEP 1 ===\nTHOUGHT:\nlook\nACTION:\nls\nOBSERVATION:\nfiles\n"
               "RETURNCODE: 0\n");
    write_file(dir + "/script.txt",
               "=== SCRIPT role=summarizer ===\n"
               "=== STEP 1 ===\nTHOUGHT: scanned the box\nOBSERVATION: saw files\n");
    std::string output;
    int code = run_cli("summarize --log " + dir + "/t.log --backend-script " + dir +
                           "/script.txt --packs-dir " + kPacksDir,
                       &output);
    CHECK(code == 0);
    CHECK(output.find("=== STEP 1 ===") != std::string::npos);
    CHECK(output.find("scanned the box") != std::string::npos);
}

TEST_CASE("cli: patch apply reports an ambiguous action and exits zero") {
    std::string dir = scratch("patch");
    write_file(dir + "/tree/f.txt", "dup\nmid\ndup\n");
    write_file(dir + "/actions.xml",
               "<replace_code path=\"f.txt\">\n<search>\ndup\n</search>\n"
               "<replace>\nD\n</replace>\n</replace_code>\n");
    std::string output;
    int code = run_cli("patch apply --root " + dir + "/tree --actions " + dir + "/actions.xml",
                       &output);
    CHECK(code == 0);
    CHECK(output.find("skipped_ambiguous") != std::string::npos);
    CHECK(output.find("(2 matches)") != std::string::npos);
    CHECK(read_file(dir + "/tree/f.txt") == "dup\nmid\ndup\n");
}

TEST_CASE("cli: diagnose emits the report plus sidecar") {
    std::string dir = scratch("diag");
    write_file(dir + "/summary.txt",
               "=== STEP 1 ===\nTHOUGHT: probed\nOBSERVATION: 403\n");
    write_file(dir + "/script.txt",
               "=== SCRIPT role=diagnosis ===\n"
               "### 0. Validated Truths\n- saw a 403\n\n### 3. Final Assessment\nSCORE: 42\n");
    std::string output;
    int code = run_cli("diagnose --summary " + dir + "/summary.txt --backend-script " + dir +
                           "/script.txt --packs-dir " + kPacksDir,
                       &output);
    CHECK(code == 0);
    CHECK(output.find("SCORE: 42") != std::string::npos);
    CHECK(output.find("score = 42") != std::string::npos);
    CHECK(output.find("truths = 1") != std::string::npos);
}

TEST_CASE("cli: rollout runs one scripted episode") {
    std::string dir = scratch("roll");
    write_file(dir + "/script.txt",
               "=== SCRIPT role=episode ===\n"
               "find it\n```bash\ncat srv/.vault\n```\n"
               "=== SCRIPT role=episode ===\n"
               "submit\n```bash\nsubmit flag{l4y3rs_all_th3_w4y_d0wn}\n```\n");
    std::string output;
    int code = run_cli("rollout --scaffold " + kDataDir + "/seed_scaffold --challenge " +
                           kDataDir + "/challenges/toy --backend-script " + dir +
                           "/script.txt --workspace " + dir + "/ws",
                       &output);
    CHECK(code == 0);
    CHECK(output.find("=== STEP 1 ===") != std::string::npos);
    CHECK(output.find("flag{l4y3rs_all_th3_w4y_d0wn}") != std::string::npos);
}
