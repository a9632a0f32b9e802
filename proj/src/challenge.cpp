#include "evoagent/challenge.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace fs = std::filesystem;

namespace evoagent {

Challenge Challenge::load(const std::string& dir) {
    using nlohmann::json;

    fs::path meta_path = fs::path(dir) / "challenge.json";
    if (!fs::exists(meta_path))
        throw std::runtime_error("challenge package has no challenge.json: " + dir);
    json meta = json::parse(read_file(meta_path.string()));

    Challenge c;
    c.name = meta.at("name").get<std::string>();
    c.prompt = meta.at("prompt").get<std::string>();

    const auto& verifier = meta.at("verifier");
    std::string kind = verifier.at("kind").get<std::string>();
    if (kind == "flag")
        c.verifier_kind = VerifierKind::ExactFlag;
    else if (kind == "command")
        c.verifier_kind = VerifierKind::Command;
    else
        throw std::runtime_error("unknown verifier kind: " + kind);
    c.verifier_value = verifier.at("value").get<std::string>();

    if (meta.contains("step_budget"))
        c.step_budget = meta.at("step_budget").get<int>();
    if (c.step_budget < 1)
        throw std::runtime_error("step_budget must be >= 1");

    fs::path files_dir = fs::path(dir) / "files";
    if (fs::is_directory(files_dir))
        c.files = read_tree(files_dir.string());
    return c;
}

}  // namespace evoagent
