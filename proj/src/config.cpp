#include "evoagent/config.hpp"

#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

#ifndef EVOAGENT_DATA_DIR
#define EVOAGENT_DATA_DIR "data"
#endif

namespace evoagent {

std::string default_data_dir() {
    return EVOAGENT_DATA_DIR;
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        int parsed = std::stoi(value, &used);
        if (used != value.size())
            throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double parsed = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs a number, got '" + value + "'");
    }
}

int parse_positive(const std::string& key, const std::string& value) {
    int parsed = parse_int(key, value);
    if (parsed < 1)
        throw ConfigError("config key '" + key + "' must be >= 1, got " + value);
    return parsed;
}

std::string resolve_path(const std::string& base_dir, const std::string& value) {
    fs::path p(value);
    if (p.is_absolute())
        return value;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

LayerMap load_layer_map(const std::string& path) {
    std::vector<LayerRule> rules;
    for (const auto& raw : split_lines(read_file(path))) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream in(line);
        std::string glob, layer;
        in >> glob >> layer;
        auto id = layer_from_name(layer);
        if (glob.empty() || !id)
            throw ConfigError("bad layer map line: " + raw);
        rules.push_back({glob, *id});
    }
    if (rules.empty())
        throw ConfigError("layer map file has no rules: " + path);
    return LayerMap(std::move(rules));
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& base_dir) {
    RunConfig config;
    config.packs_dir = (fs::path(default_data_dir()) / "prompt_packs").string();

    for (const auto& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line is not 'key = value': " + raw);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line has an empty key: " + raw);

        if (key == "challenge") {
            config.challenge_path = resolve_path(base_dir, value);
        } else if (key == "scaffold") {
            config.scaffold_path = resolve_path(base_dir, value);
        } else if (key == "generations") {
            config.beam.generations = parse_positive(key, value);
        } else if (key == "beam_width") {
            config.beam.beam_width = parse_positive(key, value);
        } else if (key == "children_per_parent") {
            config.beam.children_per_parent = parse_positive(key, value);
        } else if (key == "select_top") {
            config.beam.select_top = parse_positive(key, value);
        } else if (key == "mutation_temperature") {
            config.beam.mutation_temperature = parse_double(key, value);
        } else if (key == "step_budget") {
            config.beam.step_budget = parse_positive(key, value);
        } else if (key == "rollout_budget_cap") {
            config.beam.rollout_budget_cap = parse_positive(key, value);
        } else if (key == "workers") {
            config.beam.workers = parse_positive(key, value);
        } else if (key == "max_tokens") {
            config.max_tokens = parse_positive(key, value);
        } else if (key == "observation_cap") {
            config.observation_cap = static_cast<size_t>(parse_positive(key, value));
        } else if (key == "command_timeout") {
            config.command_timeout_s = parse_positive(key, value);
        } else if (key == "max_skills") {
            int parsed = parse_int(key, value);
            if (parsed < 0)
                throw ConfigError("config key 'max_skills' must be >= 0");
            config.max_skills = parsed;
        } else if (key == "summary_window") {
            config.summary_window = parse_positive(key, value);
        } else if (key == "backfill_cap") {
            int parsed = parse_int(key, value);
            if (parsed < 0)
                throw ConfigError("config key 'backfill_cap' must be >= 0");
            config.backfill_cap = parsed;
        } else if (key == "summarizer_fan_out") {
            config.summarizer_fan_out = parse_positive(key, value);
        } else if (key == "fuzzy_threshold") {
            config.fuzzy_threshold = parse_double(key, value);
            if (config.fuzzy_threshold < 0.0 || config.fuzzy_threshold > 1.0)
                throw ConfigError("config key 'fuzzy_threshold' must be in [0, 1]");
        } else if (key == "prompt_pack") {
            config.prompt_pack = value;
        } else if (key == "packs_dir") {
            config.packs_dir = resolve_path(base_dir, value);
        } else if (key == "backend") {
            if (value == "scripted")
                config.backend = BackendKind::Scripted;
            else if (value == "http")
                config.backend = BackendKind::HttpChat;
            else
                throw ConfigError("config key 'backend' must be 'scripted' or 'http', got '" +
                                  value + "'");
        } else if (key == "backend_script") {
            config.backend_script = resolve_path(base_dir, value);
        } else if (key == "backend_url") {
            config.backend_url = value;
        } else if (key == "backend_model") {
            config.backend_model = value;
        } else if (key == "backend_key_env") {
            config.backend_key_env = value;
        } else if (key == "executor") {
            if (value != "local")
                throw ConfigError("config key 'executor' only supports 'local' (adapters plug "
                                  "in behind the CommandExecutor interface), got '" +
                                  value + "'");
        } else if (key == "python_command") {
            config.python_command = value;
        } else if (key == "output_dir") {
            config.output_dir = resolve_path(base_dir, value);
        } else if (key == "run_id") {
            config.run_id = value;
        } else if (key == "layer_map") {
            config.layer_map_path = resolve_path(base_dir, value);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    if (config.challenge_path.empty())
        throw ConfigError("config is missing required key 'challenge'");
    if (config.scaffold_path.empty())
        throw ConfigError("config is missing required key 'scaffold'");
    if (!fs::exists(config.challenge_path))
        throw ConfigError("challenge path does not exist: " + config.challenge_path);
    if (!fs::exists(config.scaffold_path))
        throw ConfigError("scaffold path does not exist: " + config.scaffold_path);
    if (config.backend == BackendKind::Scripted) {
        if (config.backend_script.empty())
            throw ConfigError("scripted backend needs 'backend_script'");
        if (!fs::exists(config.backend_script))
            throw ConfigError("backend script does not exist: " + config.backend_script);
    } else {
        if (config.backend_url.empty() || config.backend_model.empty())
            throw ConfigError("http backend needs 'backend_url' and 'backend_model'");
    }
    if (config.layer_map_path && !fs::exists(*config.layer_map_path))
        throw ConfigError("layer map path does not exist: " + *config.layer_map_path);

    try {
        config.beam.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return config;
}

RunConfig RunConfig::load(const std::string& path) {
    std::string base = fs::path(path).has_parent_path()
                           ? fs::path(path).parent_path().string()
                           : std::string(".");
    try {
        return from_text(read_file(path), base);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

LayerMap RunConfig::resolve_layer_map() const {
    if (layer_map_path)
        return load_layer_map(*layer_map_path);
    return LayerMap::default_map();
}

std::unique_ptr<ModelBackend> RunConfig::make_backend() const {
    if (backend == BackendKind::Scripted) {
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(backend_script));
    }
    HttpBackendConfig http;
    http.base_url = backend_url;
    http.model = backend_model;
    http.api_key_env = backend_key_env;
    return std::make_unique<HttpChatBackend>(http);
}

EngineOptions RunConfig::engine_options() const {
    EngineOptions options;
    options.beam = beam;
    options.runtime.command_timeout = std::chrono::seconds(command_timeout_s);
    options.runtime.observation_cap = observation_cap;
    options.runtime.max_skills = max_skills;
    options.runtime.generation.max_tokens = max_tokens;
    options.refiner.generation.max_tokens = max_tokens;
    options.refiner.generation.temperature = beam.mutation_temperature;
    options.refiner.apply.fuzzy_threshold = fuzzy_threshold;
    options.refiner.validators.python_command = python_command;
    options.summary_window = summary_window;
    options.backfill_cap = backfill_cap;
    options.summarizer_fan_out = summarizer_fan_out;
    options.layer_map = resolve_layer_map();
    options.refiner.apply.layer_map = options.layer_map;
    fs::path run_root = fs::path(output_dir) / run_id;
    options.run_dir = run_root.string();
    options.work_dir = (run_root / "workspaces").string();
    return options;
}

std::string RunConfig::render() const {
    std::ostringstream out;
    out << "challenge = " << challenge_path << "\n";
    out << "scaffold = " << scaffold_path << "\n";
    out << "generations = " << beam.generations << "\n";
    out << "beam_width = " << beam.beam_width << "\n";
    out << "children_per_parent = " << beam.children_per_parent << "\n";
    out << "select_top = " << beam.select_top << "\n";
    out << "mutation_temperature = " << beam.mutation_temperature << "\n";
    out << "step_budget = " << beam.step_budget << "\n";
    out << "rollout_budget_cap = " << beam.rollout_budget_cap << "\n";
    out << "workers = " << beam.workers << "\n";
    out << "max_tokens = " << max_tokens << "\n";
    out << "observation_cap = " << observation_cap << "\n";
    out << "command_timeout = " << command_timeout_s << "\n";
    out << "max_skills = " << max_skills << "\n";
    out << "summary_window = " << summary_window << "\n";
    out << "backfill_cap = " << backfill_cap << "\n";
    out << "summarizer_fan_out = " << summarizer_fan_out << "\n";
    out << "fuzzy_threshold = " << fuzzy_threshold << "\n";
    out << "prompt_pack = " << prompt_pack << "\n";
    out << "packs_dir = " << packs_dir << "\n";
    out << "backend = " << (backend == BackendKind::Scripted ? "scripted" : "http") << "\n";
    if (!backend_script.empty())
        out << "backend_script = " << backend_script << "\n";
    if (!backend_url.empty())
        out << "backend_url = " << backend_url << "\n";
    if (!backend_model.empty())
        out << "backend_model = " << backend_model << "\n";
    out << "backend_key_env = " << backend_key_env << "\n";
    out << "executor = local\n";
    out << "python_command = " << python_command << "\n";
    out << "output_dir = " << output_dir << "\n";
    out << "run_id = " << run_id << "\n";
    if (layer_map_path)
        out << "layer_map = " << *layer_map_path << "\n";
    return out.str();
}

}  // namespace evoagent
