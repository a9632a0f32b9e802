#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace evoagent {

// The four evolvable scaffold layers. Enum order is the mutation phase order.
enum class LayerId {
    Strategy = 0,        // system prompt template
    EnvInterface = 1,    // instance prompt template
    DomainKnowledge = 2, // skill library
    Perception = 3,      // driver source + observation/parse-error templates
};

constexpr std::array<LayerId, 4> kAllLayers = {
    LayerId::Strategy, LayerId::EnvInterface, LayerId::DomainKnowledge, LayerId::Perception};

std::string layer_name(LayerId layer);
std::optional<LayerId> layer_from_name(const std::string& name);

// One attribution rule: path glob -> layer. Globs support '**' (any path
// segments), '*' (within a segment) and '?'.
struct LayerRule {
    std::string glob;
    LayerId layer;
};

bool glob_match(const std::string& glob, const std::string& path);

class LayerMap {
public:
    LayerMap() = default;
    explicit LayerMap(std::vector<LayerRule> rules) : rules_(std::move(rules)) {}

    static LayerMap default_map();

    const std::vector<LayerRule>& rules() const { return rules_; }

    // Unique matching layer for a normalized relative path, or nullopt.
    // Throws MalformedPathError for absolute/escaping paths.
    std::optional<LayerId> attribute(const std::string& path) const;

    // Returns paths matched by more than one rule (the map invariant
    // requires this to be empty for every concrete scaffold).
    std::vector<std::string> ambiguous_paths(const std::vector<std::string>& paths) const;

    bool operator==(const LayerMap& other) const;

private:
    std::vector<LayerRule> rules_;
};

std::optional<LayerId> attribute_layer(const std::string& path, const LayerMap& map);

}  // namespace evoagent
