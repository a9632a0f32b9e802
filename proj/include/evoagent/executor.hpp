#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace evoagent {

struct ExecutionResult {
    std::string stdout_bytes;
    std::string stderr_bytes;
    int returncode = 0;
    bool timed_out = false;  // implies returncode == 124
};

// Runs one shell command in a working directory with a wall-clock timeout.
// Adapters (e.g. a container runner) implement the same interface.
class CommandExecutor {
public:
    virtual ~CommandExecutor() = default;
    virtual ExecutionResult run(const std::string& command, const std::string& cwd,
                                std::chrono::seconds timeout) = 0;
};

// Spawns `/bin/bash -c <command>` in a scratch directory; on timeout the
// process group is killed and the result carries returncode 124.
class LocalExecutor : public CommandExecutor {
public:
    ExecutionResult run(const std::string& command, const std::string& cwd,
                        std::chrono::seconds timeout) override;
};

// Test helper: canned results from a function of the command.
class FunctionExecutor : public CommandExecutor {
public:
    using Fn = std::function<ExecutionResult(const std::string& command)>;
    explicit FunctionExecutor(Fn fn) : fn_(std::move(fn)) {}
    ExecutionResult run(const std::string& command, const std::string&,
                        std::chrono::seconds) override {
        return fn_(command);
    }

private:
    Fn fn_;
};

}  // namespace evoagent
