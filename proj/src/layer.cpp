#include "evoagent/layer.hpp"

#include "evoagent/fs_tree.hpp"

namespace evoagent {

std::string layer_name(LayerId layer) {
    switch (layer) {
    case LayerId::Strategy: return "strategy";
    case LayerId::EnvInterface: return "env_interface";
    case LayerId::DomainKnowledge: return "domain_knowledge";
    case LayerId::Perception: return "perception";
    }
    return "?";
}

std::optional<LayerId> layer_from_name(const std::string& name) {
    for (LayerId layer : kAllLayers)
        if (layer_name(layer) == name)
            return layer;
    return std::nullopt;
}

namespace {

// Recursive glob matcher. '**' crosses segment boundaries, '*' and '?' do not.
bool match_from(const std::string& g, size_t gi, const std::string& p, size_t pi) {
    while (gi < g.size()) {
        if (g.compare(gi, 2, "**") == 0) {
            size_t next = gi + 2;
            if (next < g.size() && g[next] == '/')
                ++next;
            for (size_t k = pi; k <= p.size(); ++k) {
                if (match_from(g, next, p, k))
                    return true;
                // '**' may consume anything, so advance one char at a time.
            }
            return false;
        }
        if (pi >= p.size())
            return false;
        char gc = g[gi];
        if (gc == '*') {
            for (size_t k = pi; k <= p.size() && (k == pi || p[k - 1] != '/'); ++k)
                if (match_from(g, gi + 1, p, k))
                    return true;
            return false;
        }
        if (gc == '?') {
            if (p[pi] == '/')
                return false;
        } else if (gc != p[pi]) {
            return false;
        }
        ++gi;
        ++pi;
    }
    return pi == p.size();
}

}  // namespace

bool glob_match(const std::string& glob, const std::string& path) {
    return match_from(glob, 0, path, 0);
}

LayerMap LayerMap::default_map() {
    return LayerMap({
        {"system_template.txt", LayerId::Strategy},
        {"instance_template.txt", LayerId::EnvInterface},
        {"skills/**", LayerId::DomainKnowledge},
        {"agent.py", LayerId::Perception},
        {"observation_template.txt", LayerId::Perception},
        {"output_parse_error_template.txt", LayerId::Perception},
    });
}

std::optional<LayerId> LayerMap::attribute(const std::string& path) const {
    std::string norm = normalize_rel_path(path);
    for (const auto& rule : rules_)
        if (glob_match(rule.glob, norm))
            return rule.layer;
    return std::nullopt;
}

std::vector<std::string> LayerMap::ambiguous_paths(const std::vector<std::string>& paths) const {
    std::vector<std::string> out;
    for (const auto& path : paths) {
        int hits = 0;
        for (const auto& rule : rules_)
            if (glob_match(rule.glob, path))
                ++hits;
        if (hits > 1)
            out.push_back(path);
    }
    return out;
}

bool LayerMap::operator==(const LayerMap& other) const {
    if (rules_.size() != other.rules_.size())
        return false;
    for (size_t i = 0; i < rules_.size(); ++i)
        if (rules_[i].glob != other.rules_[i].glob || rules_[i].layer != other.rules_[i].layer)
            return false;
    return true;
}

std::optional<LayerId> attribute_layer(const std::string& path, const LayerMap& map) {
    return map.attribute(path);
}

}  // namespace evoagent
