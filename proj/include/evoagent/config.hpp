#pragma once

#include "evoagent/backend.hpp"
#include "evoagent/engine.hpp"

#include <memory>
#include <optional>
#include <string>

namespace evoagent {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class BackendKind { Scripted, HttpChat };
enum class ExecutorKind { Local };

// Plain-text run configuration ("key = value" lines, '#' comments).
// Defaults reproduce the 16-rollout beam configuration.
struct RunConfig {
    std::string challenge_path;
    std::string scaffold_path;
    BeamConfig beam;
    int max_tokens = 10240;
    size_t observation_cap = 64 * 1024;
    int command_timeout_s = 120;
    int max_skills = 4;
    int summary_window = 10;
    int backfill_cap = 3;
    int summarizer_fan_out = 1;
    double fuzzy_threshold = 0.6;
    std::string prompt_pack = "default";
    std::string packs_dir;  // default: <data dir>/prompt_packs
    BackendKind backend = BackendKind::Scripted;
    std::string backend_script;
    std::string backend_url;
    std::string backend_model;
    std::string backend_key_env = "LLM_API_KEY";
    ExecutorKind executor = ExecutorKind::Local;
    std::string python_command = "python3";
    std::string output_dir = "runs";
    std::string run_id = "run";
    std::optional<std::string> layer_map_path;

    static RunConfig load(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& base_dir = ".");

    LayerMap resolve_layer_map() const;
    std::unique_ptr<ModelBackend> make_backend() const;
    EngineOptions engine_options() const;
    std::string render() const;  // resolved key=value form, for the run directory
};

// Layer-map file: "<glob> <layer-name>" per line.
LayerMap load_layer_map(const std::string& path);

std::string default_data_dir();

}  // namespace evoagent
