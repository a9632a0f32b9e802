#pragma once

#include "evoagent/diagnosis.hpp"
#include "evoagent/summarizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evoagent {

inline constexpr const char* kPackDefault = "default";
inline constexpr const char* kPackAblationHolistic = "ablation-holistic";
inline constexpr const char* kPackAblationNoDiagnosis = "ablation-no-diagnosis";

// A directory of editable prompt card files:
//   summarizer_chunk_system.txt / summarizer_chunk_user.txt
//   eureka_system.txt / eureka_user.txt          (absent: diagnosis disabled)
//   coderefiner_system.txt / coderefiner_user.txt
//   phase_1.txt .. phase_4.txt                   -or-  holistic.txt
struct PromptPack {
    std::string id;
    SummarizerPrompts summarizer;
    DiagnosisPrompts diagnosis;
    std::string coderefiner_system;
    std::string coderefiner_user;
    std::vector<std::string> phase_cards;       // one per mutation phase, in order
    std::optional<std::string> holistic_card;

    bool layered() const { return !phase_cards.empty(); }
    bool diagnosis_enabled() const { return diagnosis.enabled(); }

    static PromptPack load(const std::string& dir);
    // Resolves "<packs_dir>/<id>".
    static PromptPack load_by_id(const std::string& packs_dir, const std::string& id);
};

}  // namespace evoagent
