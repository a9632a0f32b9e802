#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoagent {

// The four places the loop spends model calls.
enum class CallRole { Episode, Summarizer, Diagnosis, Refiner };

std::string call_role_name(CallRole role);
std::optional<CallRole> call_role_from_name(const std::string& name);

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct BackendFailure : std::runtime_error {
    explicit BackendFailure(const std::string& what) : std::runtime_error(what) {}
};

struct ScriptExhausted : BackendFailure {
    explicit ScriptExhausted(const std::string& what) : BackendFailure(what) {}
};

struct GenerationSettings {
    double temperature = 0.0;
    int max_tokens = 10240;
};

// One completion request. `key` identifies the requesting context (the
// evolution node id); deterministic backends dispatch on (role, key, call
// index) and never on message content.
struct BackendRequest {
    CallRole role;
    std::string key;
    std::vector<ChatMessage> messages;
    GenerationSettings settings;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string complete(const BackendRequest& request) = 0;
};

// Deterministic replay backend. Responses are queued per (role, key); a
// request drains its exact queue first and falls back to the (role, "*")
// wildcard queue. An empty queue is a hard ScriptExhausted error.
class ScriptedBackend : public ModelBackend {
public:
    struct Entry {
        std::string text;
        long remaining = 1;  // -1 = unbounded
    };

    ScriptedBackend() = default;
    ScriptedBackend(ScriptedBackend&& other) noexcept : queues_(std::move(other.queues_)) {}
    ScriptedBackend& operator=(ScriptedBackend&& other) noexcept {
        queues_ = std::move(other.queues_);
        return *this;
    }

    // Script file format, entries in file order:
    //   === SCRIPT role=<episode|summarizer|diagnosis|refiner> [key=<k>] [repeat=<n|*>] ===
    //   <response text up to the next header>
    static ScriptedBackend from_file(const std::string& path);
    static ScriptedBackend from_text(const std::string& text);

    void add(CallRole role, const std::string& key, std::string text, long repeat = 1);

    std::string complete(const BackendRequest& request) override;

private:
    std::map<std::pair<CallRole, std::string>, std::vector<Entry>> queues_;
    std::mutex mutex_;
};

// Test helper: delegates to a function of the request.
class FunctionBackend : public ModelBackend {
public:
    using Fn = std::function<std::string(const BackendRequest&)>;
    explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const BackendRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

struct HttpBackendConfig {
    std::string base_url;               // e.g. "http://localhost:8080/v1"
    std::string model;
    std::string api_key_env = "LLM_API_KEY";
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds request_timeout{600'000};
};

// Chat-completion client: POST {base_url}/chat/completions with a role/content
// message array; retries transient failures (5xx, transport errors) with
// exponential backoff.
class HttpChatBackend : public ModelBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    std::string complete(const BackendRequest& request) override;

private:
    HttpBackendConfig config_;
};

}  // namespace evoagent
