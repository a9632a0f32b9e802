#include "evoagent/backend.hpp"

#include "evoagent/fs_tree.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sstream>
#include <thread>

// httplib's default read timeout is too small for long generations.
#define CPPHTTPLIB_OPENSSL_SUPPORT_OFF
#include <httplib.h>

namespace evoagent {

std::string call_role_name(CallRole role) {
    switch (role) {
    case CallRole::Episode: return "episode";
    case CallRole::Summarizer: return "summarizer";
    case CallRole::Diagnosis: return "diagnosis";
    case CallRole::Refiner: return "refiner";
    }
    return "?";
}

std::optional<CallRole> call_role_from_name(const std::string& name) {
    for (CallRole role :
         {CallRole::Episode, CallRole::Summarizer, CallRole::Diagnosis, CallRole::Refiner})
        if (call_role_name(role) == name)
            return role;
    return std::nullopt;
}

void ScriptedBackend::add(CallRole role, const std::string& key, std::string text, long repeat) {
    queues_[{role, key}].push_back(Entry{std::move(text), repeat});
}

std::string ScriptedBackend::complete(const BackendRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const std::string& key : {request.key, std::string("*")}) {
        auto it = queues_.find({request.role, key});
        if (it == queues_.end())
            continue;
        auto& queue = it->second;
        while (!queue.empty()) {
            Entry& entry = queue.front();
            if (entry.remaining == 0) {
                queue.erase(queue.begin());
                continue;
            }
            if (entry.remaining > 0)
                --entry.remaining;
            return entry.text;
        }
    }
    throw ScriptExhausted("scripted backend exhausted for (" + call_role_name(request.role) +
                          ", " + request.key + ")");
}

ScriptedBackend ScriptedBackend::from_text(const std::string& text) {
    ScriptedBackend backend;
    auto lines = split_lines(text);
    std::optional<CallRole> role;
    std::string key = "*";
    long repeat = 1;
    std::vector<std::string> body;
    bool in_entry = false;

    auto flush = [&] {
        if (!in_entry)
            return;
        // Body is everything up to (not including) the next header; a single
        // trailing blank line separating entries is dropped.
        while (!body.empty() && body.back().empty())
            body.pop_back();
        backend.add(*role, key, join(body, "\n"), repeat);
        body.clear();
    };

    for (const auto& line : lines) {
        if (starts_with(line, "=== SCRIPT ") && ends_with(trim(line), "===")) {
            flush();
            role.reset();
            key = "*";
            repeat = 1;
            std::istringstream in(trim(line.substr(11)));
            std::string tok;
            while (in >> tok) {
                if (tok == "===")
                    continue;
                auto eq = tok.find('=');
                if (eq == std::string::npos)
                    continue;
                std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
                if (k == "role")
                    role = call_role_from_name(v);
                else if (k == "key")
                    key = v;
                else if (k == "repeat")
                    repeat = v == "*" ? -1 : std::stol(v);
            }
            if (!role)
                throw std::runtime_error("script entry without a valid role: " + line);
            in_entry = true;
        } else if (in_entry) {
            body.push_back(line);
        }
    }
    flush();
    return backend;
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    return from_text(read_file(path));
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::complete(const BackendRequest& request) {
    using nlohmann::json;

    json payload;
    payload["model"] = config_.model;
    payload["temperature"] = request.settings.temperature;
    payload["max_tokens"] = request.settings.max_tokens;
    payload["messages"] = json::array();
    for (const auto& msg : request.messages)
        payload["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    std::string body = payload.dump();

    // Split base_url into host part and path prefix.
    std::string url = config_.base_url;
    std::string scheme_host = url, prefix;
    size_t scheme = url.find("://");
    size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start != std::string::npos) {
        scheme_host = url.substr(0, path_start);
        prefix = url.substr(path_start);
        while (!prefix.empty() && prefix.back() == '/')
            prefix.pop_back();
    }

    httplib::Headers headers;
    if (const char* secret = std::getenv(config_.api_key_env.c_str()); secret && *secret)
        headers.emplace("Authorization", std::string("Bearer ") + secret);

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        httplib::Client client(scheme_host);
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(
            config_.request_timeout));
        client.set_connection_timeout(std::chrono::seconds(30));

        auto result = client.Post(prefix + "/chat/completions", headers, body, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
        } else if (result->status >= 200 && result->status < 300) {
            try {
                json reply = json::parse(result->body);
                return reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const std::exception& e) {
                throw BackendFailure(std::string("malformed chat completion response: ") +
                                     e.what());
            }
        } else if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
        } else {
            throw BackendFailure("chat completion rejected: HTTP " +
                                 std::to_string(result->status) + " " + result->body);
        }
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw BackendFailure("chat completion failed after " + std::to_string(config_.max_attempts) +
                         " attempts: " + last_error);
}

}  // namespace evoagent
