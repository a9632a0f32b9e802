#include "evoagent/analysis.hpp"

#include "evoagent/diff.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

namespace evoagent {

std::vector<std::string> tokenize_identifiers(const std::string& diff_text) {
    std::vector<std::string> tokens;
    for (const auto& line : split_lines(diff_text)) {
        if (starts_with(line, "--- ") || starts_with(line, "+++ ") || starts_with(line, "@@") ||
            starts_with(line, "diff ") || starts_with(line, "index ") ||
            starts_with(line, "\\"))
            continue;
        size_t i = 0;
        while (i < line.size()) {
            char c = line[i];
            bool alpha = std::isalpha(static_cast<unsigned char>(c)) || c == '_';
            if (!alpha) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < line.size() &&
                   (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_'))
                ++j;
            tokens.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    return tokens;
}

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& documents, size_t feature_cap) {
    std::map<std::string, int> df;
    for (const auto& doc : documents) {
        std::map<std::string, int> seen;
        for (const auto& token : doc)
            seen[token] = 1;
        for (const auto& [token, _] : seen)
            ++df[token];
    }

    std::vector<std::pair<std::string, int>> terms(df.begin(), df.end());
    if (terms.size() > feature_cap) {
        // Highest document frequency first, ties by lexicographic order.
        std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second)
                return a.second > b.second;
            return a.first < b.first;
        });
        terms.resize(feature_cap);
    }

    TfidfModel model;
    model.feature_cap = feature_cap;
    double n_docs = static_cast<double>(documents.size());
    for (const auto& [token, freq] : terms) {
        model.vocabulary.push_back(token);
        model.idf[token] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(freq))) + 1.0;
    }
    std::sort(model.vocabulary.begin(), model.vocabulary.end());
    return model;
}

std::map<std::string, double> TfidfModel::vectorize(
    const std::vector<std::string>& tokens) const {
    std::map<std::string, int> tf;
    for (const auto& token : tokens)
        if (idf.count(token))
            ++tf[token];

    std::map<std::string, double> vec;
    double norm_sq = 0.0;
    for (const auto& [token, count] : tf) {
        double weight = (1.0 + std::log(static_cast<double>(count))) * idf.at(token);
        vec[token] = weight;
        norm_sq += weight * weight;
    }
    if (norm_sq > 0.0) {
        double norm = std::sqrt(norm_sq);
        for (auto& [_, weight] : vec)
            weight /= norm;
    }
    return vec;
}

double cosine_distance(const std::map<std::string, double>& a,
                       const std::map<std::string, double>& b) {
    if (a.empty() || b.empty())
        return a.empty() && b.empty() ? 0.0 : 1.0;
    double dot = 0.0;
    for (const auto& [token, weight] : a) {
        auto it = b.find(token);
        if (it != b.end())
            dot += weight * it->second;
    }
    double distance = 1.0 - dot;  // vectors are L2-normalized
    return std::min(1.0, std::max(0.0, distance));
}

double tfidf_cosine_distance(const std::string& d1, const std::string& d2,
                             const std::vector<std::string>& corpus, size_t feature_cap) {
    if (corpus.empty())
        throw std::invalid_argument("tfidf corpus must not be empty");
    std::vector<std::vector<std::string>> documents;
    documents.reserve(corpus.size());
    for (const auto& doc : corpus)
        documents.push_back(tokenize_identifiers(doc));
    TfidfModel model = fit_tfidf(documents, feature_cap);
    return cosine_distance(model.vectorize(tokenize_identifiers(d1)),
                           model.vectorize(tokenize_identifiers(d2)));
}

std::vector<SiblingPairStat> sibling_distances(const EvolutionTree& tree, size_t feature_cap) {
    std::vector<std::vector<std::string>> documents;
    std::map<std::string, size_t> doc_of_node;
    for (const auto& node : tree.nodes) {
        if (!node.parent_id)
            continue;
        doc_of_node[node.id] = documents.size();
        documents.push_back(tokenize_identifiers(node.patch_diff));
    }
    TfidfModel model = fit_tfidf(documents, feature_cap);

    std::map<std::string, std::vector<const EvolutionNode*>> by_parent;
    for (const auto& node : tree.nodes)
        if (node.parent_id)
            by_parent[*node.parent_id].push_back(&node);

    std::vector<SiblingPairStat> pairs;
    for (const auto& [parent_id, children] : by_parent) {
        for (size_t i = 0; i < children.size(); ++i) {
            auto vi = model.vectorize(documents[doc_of_node[children[i]->id]]);
            for (size_t j = i + 1; j < children.size(); ++j) {
                auto vj = model.vectorize(documents[doc_of_node[children[j]->id]]);
                pairs.push_back({parent_id, children[i]->id, children[j]->id,
                                 cosine_distance(vi, vj)});
            }
        }
    }
    return pairs;
}

std::vector<LayerActivationStat> layer_activation(const EvolutionTree& tree,
                                                  const LayerMap& map) {
    int total_edges = 0;
    std::map<LayerId, int> activated;
    for (const auto& node : tree.nodes) {
        if (!node.parent_id)
            continue;
        ++total_edges;
        std::vector<bool> touched(4, false);
        for (const auto& path : unified_diff_paths(node.patch_diff)) {
            if (is_malformed_path(path))
                continue;
            if (auto layer = map.attribute(path))
                touched[static_cast<size_t>(*layer)] = true;
        }
        for (LayerId layer : kAllLayers)
            if (touched[static_cast<size_t>(layer)])
                ++activated[layer];
    }
    if (total_edges == 0)
        throw EmptyTreeError("tree has no parent-child edges");

    std::vector<LayerActivationStat> stats;
    for (LayerId layer : kAllLayers) {
        LayerActivationStat stat;
        stat.layer = layer;
        stat.activated_edges = activated[layer];
        stat.total_edges = total_edges;
        stat.rate = static_cast<double>(stat.activated_edges) / total_edges;
        stats.push_back(stat);
    }
    return stats;
}

ActionComposition ld_action_composition(const EvolutionTree& tree, const LayerMap& map) {
    int creates = 0, replaces = 0, deletes = 0;
    for (const auto& node : tree.nodes) {
        for (const auto& action : node.actions) {
            if (action.outcome != ApplyOutcome::Applied)
                continue;
            if (is_malformed_path(action.path))
                continue;
            auto layer = map.attribute(action.path);
            if (!layer || *layer != LayerId::DomainKnowledge)
                continue;
            switch (action.kind) {
            case PatchKind::CreateFile: ++creates; break;
            case PatchKind::ReplaceCode: ++replaces; break;
            case PatchKind::DeleteFile: ++deletes; break;
            }
        }
    }
    ActionComposition comp;
    comp.total_actions = creates + replaces + deletes;
    if (comp.total_actions > 0) {
        comp.create_share = static_cast<double>(creates) / comp.total_actions;
        comp.replace_share = static_cast<double>(replaces) / comp.total_actions;
        comp.delete_share = static_cast<double>(deletes) / comp.total_actions;
    }
    return comp;
}

EvolutionTree load_run_dir(const std::string& run_dir) {
    using nlohmann::json;

    std::string index_path = (fs::path(run_dir) / "tree").string();
    json doc = json::parse(read_file(index_path));

    EvolutionTree tree;
    for (const auto& entry : doc.at("nodes")) {
        EvolutionNode node;
        node.id = entry.at("id").get<std::string>();
        if (!entry.at("parent").is_null())
            node.parent_id = entry.at("parent").get<std::string>();
        node.generation = entry.at("generation").get<int>();
        if (auto status = node_status_from_name(entry.at("status").get<std::string>()))
            node.status = *status;
        if (entry.contains("score"))
            node.score = entry.at("score").get<int>();

        fs::path dir = fs::path(run_dir) / "nodes" / node.id;
        fs::path patch = dir / "patch.diff";
        if (fs::exists(patch))
            node.patch_diff = read_file(patch.string());
        fs::path meta = dir / "meta";
        if (fs::exists(meta)) {
            for (const auto& line : split_lines(read_file(meta.string()))) {
                size_t eq = line.find('=');
                if (eq == std::string::npos)
                    continue;
                std::string key = trim(line.substr(0, eq));
                std::string value = trim(line.substr(eq + 1));
                if (key == "episode_calls")
                    node.episode_calls = std::stoi(value);
                else if (key == "summarizer_calls")
                    node.summarizer_calls = std::stoi(value);
                else if (key == "diagnosis_calls")
                    node.diagnosis_calls = std::stoi(value);
                else if (key == "refiner_calls")
                    node.refiner_calls = std::stoi(value);
                else if (starts_with(key, "action.")) {
                    std::istringstream in(value);
                    std::string kind_name, outcome_name, path;
                    in >> kind_name >> outcome_name;
                    std::getline(in, path);
                    ActionRecord record;
                    record.kind = kind_name == "create_file"    ? PatchKind::CreateFile
                                  : kind_name == "delete_file"  ? PatchKind::DeleteFile
                                                                : PatchKind::ReplaceCode;
                    auto outcome = apply_outcome_from_name(outcome_name);
                    record.outcome = outcome.value_or(ApplyOutcome::Failed);
                    record.path = trim(path);
                    node.actions.push_back(std::move(record));
                }
            }
        }

        int generation = node.generation;
        tree.nodes.push_back(std::move(node));
        while (static_cast<int>(tree.generations.size()) <= generation)
            tree.generations.push_back({});
        tree.generations[static_cast<size_t>(generation)].push_back(tree.nodes.size() - 1);
    }
    return tree;
}

std::string analyze_run_dir(const std::string& run_dir, const LayerMap& map) {
    EvolutionTree tree = load_run_dir(run_dir);
    std::ostringstream out;
    out.precision(6);

    out << "section\tkey\tvalue\textra\n";

    Accounting acc = accounting(tree);
    out << "accounting\trollouts\t" << acc.rollouts << "\t\n";
    out << "accounting\tnodes\t" << tree.nodes.size() << "\t\n";
    for (const auto& [role, count] : acc.llm_calls_by_role)
        out << "accounting\tcalls." << role << "\t" << count << "\t\n";
    for (const auto& [status, count] : acc.nodes_by_status)
        out << "accounting\tstatus." << status << "\t" << count << "\t\n";

    for (const auto& pair : sibling_distances(tree))
        out << "sibling_pair\t" << pair.child_a << "|" << pair.child_b << "\t" << pair.distance
            << "\tparent=" << pair.parent_id << "\n";

    bool has_edges = false;
    for (const auto& node : tree.nodes)
        if (node.parent_id)
            has_edges = true;
    if (has_edges) {
        for (const auto& stat : layer_activation(tree, map))
            out << "layer_activation\t" << layer_name(stat.layer) << "\t" << stat.rate << "\t"
                << stat.activated_edges << "/" << stat.total_edges << "\n";
    }

    ActionComposition comp = ld_action_composition(tree, map);
    out << "ld_composition\tcreate\t" << comp.create_share << "\t\n";
    out << "ld_composition\treplace\t" << comp.replace_share << "\t\n";
    out << "ld_composition\tdelete\t" << comp.delete_share << "\t"
        << "n=" << comp.total_actions << "\n";
    return out.str();
}

}  // namespace evoagent
