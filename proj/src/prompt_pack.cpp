#include "evoagent/prompt_pack.hpp"

#include "evoagent/fs_tree.hpp"

#include <filesystem>

namespace fs = std::filesystem;

namespace evoagent {

namespace {

std::optional<std::string> read_optional(const fs::path& path) {
    if (!fs::exists(path))
        return std::nullopt;
    return read_file(path.string());
}

std::string read_required(const fs::path& path) {
    auto text = read_optional(path);
    if (!text)
        throw std::runtime_error("prompt pack is missing " + path.string());
    return *text;
}

}  // namespace

PromptPack PromptPack::load(const std::string& dir) {
    fs::path root(dir);
    if (!fs::is_directory(root))
        throw std::runtime_error("prompt pack directory not found: " + dir);

    PromptPack pack;
    pack.id = root.filename().string();
    pack.summarizer.chunk_system = read_required(root / "summarizer_chunk_system.txt");
    pack.summarizer.chunk_user = read_required(root / "summarizer_chunk_user.txt");
    pack.diagnosis.system = read_optional(root / "eureka_system.txt");
    pack.diagnosis.user = read_optional(root / "eureka_user.txt");
    if (pack.diagnosis.system.has_value() != pack.diagnosis.user.has_value())
        throw std::runtime_error("prompt pack has only one of the eureka system/user cards: " +
                                 dir);
    pack.coderefiner_system = read_required(root / "coderefiner_system.txt");
    pack.coderefiner_user = read_required(root / "coderefiner_user.txt");

    pack.holistic_card = read_optional(root / "holistic.txt");
    for (int i = 1; i <= 4; ++i) {
        auto card = read_optional(root / ("phase_" + std::to_string(i) + ".txt"));
        if (card)
            pack.phase_cards.push_back(*card);
    }
    if (!pack.phase_cards.empty() && pack.phase_cards.size() != 4)
        throw std::runtime_error("prompt pack must carry all four phase cards or none: " + dir);
    if (pack.phase_cards.empty() && !pack.holistic_card)
        throw std::runtime_error("prompt pack has neither phase cards nor a holistic card: " +
                                 dir);
    return pack;
}

PromptPack PromptPack::load_by_id(const std::string& packs_dir, const std::string& id) {
    return load((fs::path(packs_dir) / id).string());
}

}  // namespace evoagent
