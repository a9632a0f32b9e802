#pragma once

#include "evoagent/engine.hpp"
#include "evoagent/layer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evoagent {

struct EmptyTreeError : std::runtime_error {
    explicit EmptyTreeError(const std::string& what) : std::runtime_error(what) {}
};

// Identifier tokens ([A-Za-z_][A-Za-z0-9_]*) from a unified diff's content
// lines; headers and hunk markers contribute nothing.
std::vector<std::string> tokenize_identifiers(const std::string& diff_text);

struct TfidfModel {
    std::vector<std::string> vocabulary;         // sorted
    std::map<std::string, double> idf;
    size_t feature_cap = 80'000;

    // Sublinear tf (1 + log tf), smoothed idf (log((1+N)/(1+df)) + 1),
    // L2-normalized.
    std::map<std::string, double> vectorize(const std::vector<std::string>& tokens) const;
};

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& documents,
                     size_t feature_cap = 80'000);

double cosine_distance(const std::map<std::string, double>& a,
                       const std::map<std::string, double>& b);

// Distance between two diffs under a vocabulary fitted on the whole corpus;
// a token-free diff is at distance 1 from anything except another token-free
// diff (distance 0).
double tfidf_cosine_distance(const std::string& d1, const std::string& d2,
                             const std::vector<std::string>& corpus,
                             size_t feature_cap = 80'000);

// ---- tree metrics ----

struct SiblingPairStat {
    std::string parent_id;
    std::string child_a;
    std::string child_b;
    double distance = 0.0;
};

struct LayerActivationStat {
    LayerId layer;
    int activated_edges = 0;
    int total_edges = 0;
    double rate = 0.0;
};

struct ActionComposition {
    double create_share = 0.0;
    double replace_share = 0.0;
    double delete_share = 0.0;
    int total_actions = 0;
};

// All unordered sibling pairs (children sharing a parent), with the TF-IDF
// cosine distance between their parent->child diffs; the vocabulary is
// fitted on every diff in the tree.
std::vector<SiblingPairStat> sibling_distances(const EvolutionTree& tree,
                                               size_t feature_cap = 80'000);

// Per layer, the fraction of parent->child edges whose diff touches at least
// one file of that layer (layers are non-exclusive per edge).
std::vector<LayerActivationStat> layer_activation(const EvolutionTree& tree,
                                                  const LayerMap& map);

// Shares over Applied domain-knowledge actions, normalized when any exist.
ActionComposition ld_action_composition(const EvolutionTree& tree,
                                        const LayerMap& map = LayerMap::default_map());

// ---- run-directory analysis ----

// Reconstructs the analyzable view of a persisted run (tree index, per-node
// patch diffs, metas).
EvolutionTree load_run_dir(const std::string& run_dir);

// Tab-separated report: one row per sibling pair, one per layer, one
// composition row, plus accounting totals.
std::string analyze_run_dir(const std::string& run_dir,
                            const LayerMap& map = LayerMap::default_map());

}  // namespace evoagent
