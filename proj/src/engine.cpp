#include "evoagent/engine.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <future>
#include <sstream>

namespace fs = std::filesystem;

namespace evoagent {

void BeamConfig::validate() const {
    if (generations < 1 || beam_width < 1 || children_per_parent < 1 || select_top < 1 ||
        step_budget < 1 || rollout_budget_cap < 1 || workers < 1)
        throw std::invalid_argument("beam configuration counts must be >= 1");
    if (select_top > beam_width)
        throw std::invalid_argument("select_top must not exceed beam_width");
}

std::string node_status_name(NodeStatus status) {
    switch (status) {
    case NodeStatus::Pending: return "pending";
    case NodeStatus::Executed: return "executed";
    case NodeStatus::Solved: return "solved";
    case NodeStatus::Invalid: return "invalid";
    case NodeStatus::Pruned: return "pruned";
    }
    return "?";
}

std::optional<NodeStatus> node_status_from_name(const std::string& name) {
    for (NodeStatus s : {NodeStatus::Pending, NodeStatus::Executed, NodeStatus::Solved,
                         NodeStatus::Invalid, NodeStatus::Pruned})
        if (node_status_name(s) == name)
            return s;
    return std::nullopt;
}

EvolutionNode* EvolutionTree::find(const std::string& id) {
    for (auto& node : nodes)
        if (node.id == id)
            return &node;
    return nullptr;
}

const EvolutionNode* EvolutionTree::find(const std::string& id) const {
    for (const auto& node : nodes)
        if (node.id == id)
            return &node;
    return nullptr;
}

std::string child_node_id(const std::string& parent_id, int index) {
    if (parent_id == "root")
        return "child" + std::to_string(index);
    std::string path;
    if (starts_with(parent_id, "child"))
        path = parent_id.substr(5);
    else if (starts_with(parent_id, "c"))
        path = parent_id.substr(1);
    else
        path = parent_id;
    return "c" + path + "_" + std::to_string(index);
}

Accounting accounting(const EvolutionTree& tree) {
    Accounting acc;
    for (CallRole role :
         {CallRole::Episode, CallRole::Summarizer, CallRole::Diagnosis, CallRole::Refiner})
        acc.llm_calls_by_role[call_role_name(role)] = 0;
    for (const auto& node : tree.nodes) {
        if (node.status == NodeStatus::Executed || node.status == NodeStatus::Solved ||
            node.status == NodeStatus::Pruned)
            ++acc.rollouts;
        ++acc.nodes_by_status[node_status_name(node.status)];
        acc.llm_calls_by_role["episode"] += node.episode_calls;
        acc.llm_calls_by_role["summarizer"] += node.summarizer_calls;
        acc.llm_calls_by_role["diagnosis"] += node.diagnosis_calls;
        acc.llm_calls_by_role["refiner"] += node.refiner_calls;
    }
    return acc;
}

std::vector<std::string> select_parents(
    const std::vector<std::pair<std::string, int>>& population, const BeamConfig& config) {
    auto ranked = rank_siblings(population);
    size_t keep = std::min(ranked.size(), static_cast<size_t>(config.beam_width));
    keep = std::min(keep, static_cast<size_t>(config.select_top));
    ranked.resize(keep);
    return ranked;
}

std::string CountingBackend::complete(const BackendRequest& request) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++counts_[{request.role, request.key}];
    }
    return inner_->complete(request);
}

int CountingBackend::count(CallRole role, const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = counts_.find({role, key});
    return it == counts_.end() ? 0 : it->second;
}

int CountingBackend::total(CallRole role) const {
    std::lock_guard<std::mutex> lock(mutex_);
    int sum = 0;
    for (const auto& [key, n] : counts_)
        if (key.first == role)
            sum += n;
    return sum;
}

namespace {

struct NodeExecution {
    Trajectory trajectory;
    std::optional<TrajectorySummary> summary;
    std::optional<DiagnosisReport> report;
    std::optional<int> score;
    long wall_ms = 0;
};

}  // namespace

EvolveResult evolve(const AgentScaffold& seed, const Challenge& challenge,
                    const PromptPack& pack, ModelBackend& raw_backend,
                    CommandExecutor& executor, const EngineOptions& options) {
    options.beam.validate();
    try {
        AgentScaffold::from_tree(seed.files(), options.layer_map);
    } catch (const std::exception& e) {
        throw FatalSetupError(std::string("seed scaffold does not validate: ") + e.what());
    }

    CountingBackend backend(raw_backend);
    EvolveResult result;
    EvolutionTree& tree = result.tree;

    EvolutionNode root;
    root.id = "root";
    root.generation = 0;
    root.scaffold_files = seed.files();
    tree.nodes.push_back(std::move(root));
    tree.generations.push_back({0});

    SummarizerOptions summarizer_options;
    summarizer_options.window = options.summary_window;
    summarizer_options.backfill_cap = options.backfill_cap;
    summarizer_options.fan_out = options.summarizer_fan_out;

    RuntimeOptions runtime_options = options.runtime;
    Challenge effective_challenge = challenge;
    effective_challenge.step_budget = options.beam.step_budget;

    int rollouts = 0;
    bool solved = false;
    bool budget_exhausted = false;

    // Recency bookkeeping for the skill menu across generations.
    std::map<std::string, AgentScaffold> loaded_scaffolds;
    auto scaffold_of = [&](const EvolutionNode& node) -> AgentScaffold& {
        auto it = loaded_scaffolds.find(node.id);
        if (it == loaded_scaffolds.end()) {
            AgentScaffold scaffold =
                AgentScaffold::from_tree(node.scaffold_files, options.layer_map);
            if (node.parent_id) {
                auto parent = loaded_scaffolds.find(*node.parent_id);
                if (parent != loaded_scaffolds.end())
                    scaffold.inherit_skill_recency(parent->second, node.generation);
            }
            it = loaded_scaffolds.emplace(node.id, std::move(scaffold)).first;
        }
        return it->second;
    };

    auto execute_node = [&](size_t node_index) -> NodeExecution {
        EvolutionNode& node = tree.nodes[node_index];
        auto started = std::chrono::steady_clock::now();
        NodeExecution exec;

        std::string workspace =
            (fs::path(options.work_dir.empty() ? "." : options.work_dir) / node.id).string();
        exec.trajectory = run_episode(scaffold_of(node), effective_challenge, backend, executor,
                                      workspace, runtime_options, node.id);

        if (exec.trajectory.status != EpisodeStatus::Solved) {
            try {
                exec.summary = summarize_trajectory(trajectory_to_log(exec.trajectory), backend,
                                                    pack.summarizer, summarizer_options, node.id);
            } catch (const std::exception&) {
                exec.summary.reset();  // degraded: no summary, no diagnosis
            }
            if (exec.summary && pack.diagnosis_enabled()) {
                auto prompt =
                    build_diagnosis_prompt(*exec.summary, effective_challenge, pack.diagnosis);
                BackendRequest request;
                request.role = CallRole::Diagnosis;
                request.key = node.id;
                request.messages = std::get<std::vector<ChatMessage>>(prompt);
                request.settings = options.refiner.generation;
                request.settings.temperature = 0.0;
                try {
                    auto parsed = parse_diagnosis(backend.complete(request));
                    if (parsed.score_error) {
                        DiagnosisReport empty;
                        empty.raw = parsed.report.raw;
                        exec.report = std::move(empty);  // failed diagnosis ranks last
                        exec.score = 0;
                    } else {
                        exec.score = parsed.report.score;
                        exec.report = std::move(parsed.report);
                    }
                } catch (const BackendFailure&) {
                    exec.report = DiagnosisReport{};
                    exec.score = 0;
                }
            }
        }
        exec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
        return exec;
    };

    auto commit = [&](size_t node_index, NodeExecution exec) {
        EvolutionNode& node = tree.nodes[node_index];
        node.status = exec.trajectory.status == EpisodeStatus::Solved ? NodeStatus::Solved
                                                                      : NodeStatus::Executed;
        node.trajectory = std::move(exec.trajectory);
        node.summary = std::move(exec.summary);
        node.report = std::move(exec.report);
        node.score = exec.score;
        node.wall_ms = exec.wall_ms;
        node.episode_calls = backend.count(CallRole::Episode, node.id);
        node.summarizer_calls = backend.count(CallRole::Summarizer, node.id);
        node.diagnosis_calls = backend.count(CallRole::Diagnosis, node.id);
        if (node.status == NodeStatus::Solved)
            solved = true;
    };

    for (int t = 0; t <= options.beam.generations && !solved && !budget_exhausted; ++t) {
        const std::vector<size_t> population = tree.generations[static_cast<size_t>(t)];

        // Execute the population, committing results in node order. Batches
        // of `workers` nodes may run concurrently; a solve stops the run
        // before any later batch starts.
        size_t next = 0;
        while (next < population.size() && !solved) {
            if (rollouts >= options.beam.rollout_budget_cap) {
                budget_exhausted = true;
                break;
            }
            size_t batch = std::min<size_t>(options.beam.workers, population.size() - next);
            batch = std::min<size_t>(
                batch, static_cast<size_t>(options.beam.rollout_budget_cap - rollouts));
            if (batch > 1) {
                // Scaffolds load lazily and are cached; touch them on this
                // thread before fanning out.
                for (size_t k = 0; k < batch; ++k)
                    scaffold_of(tree.nodes[population[next + k]]);
                std::vector<std::future<NodeExecution>> futures;
                for (size_t k = 0; k < batch; ++k)
                    futures.push_back(std::async(std::launch::async, execute_node,
                                                 population[next + k]));
                for (size_t k = 0; k < batch; ++k) {
                    commit(population[next + k], futures[k].get());
                    ++rollouts;
                }
            } else {
                commit(population[next], execute_node(population[next]));
                ++rollouts;
            }
            next += batch;
        }
        if (solved || budget_exhausted || t == options.beam.generations)
            break;

        // Parent selection over the executed population.
        std::vector<std::pair<std::string, int>> scored;
        for (size_t index : population) {
            const EvolutionNode& node = tree.nodes[index];
            if (node.status == NodeStatus::Executed)
                scored.emplace_back(node.id, node.score.value_or(0));
        }
        auto parents = select_parents(scored, options.beam);
        for (size_t index : population) {
            EvolutionNode& node = tree.nodes[index];
            if (node.status == NodeStatus::Executed &&
                std::find(parents.begin(), parents.end(), node.id) == parents.end())
                node.status = NodeStatus::Pruned;
        }

        // Mutate each parent into m children.
        std::vector<size_t> next_generation;
        for (const auto& parent_id : parents) {
            EvolutionNode* parent = tree.find(parent_id);

            MutationContext context;
            context.summary_text = parent->summary ? summary_to_text(*parent->summary) : "";
            context.diagnosis_text = parent->report ? parent->report->raw : "";
            if (parent->parent_id) {
                const EvolutionNode* grand = tree.find(*parent->parent_id);
                if (grand && grand->report)
                    context.parent_diagnosis_text = grand->report->raw;
            }
            context.parent_patch_diff = parent->patch_diff;
            context.gen0_system_template = seed.file(kSystemTemplateFile);

            std::vector<std::string> child_keys;
            for (int j = 0; j < options.beam.children_per_parent; ++j)
                child_keys.push_back(child_node_id(parent_id, j));

            RefinerOptions refiner_options = options.refiner;
            refiner_options.apply.layer_map = options.layer_map;
            refiner_options.generation.temperature = options.beam.mutation_temperature;

            auto candidates = mutate(parent->scaffold_files, context,
                                     options.beam.children_per_parent, backend, pack,
                                     refiner_options, child_keys);
            for (int j = 0; j < static_cast<int>(candidates.size()); ++j) {
                ChildCandidate& candidate = candidates[static_cast<size_t>(j)];
                EvolutionNode child;
                child.id = child_keys[static_cast<size_t>(j)];
                child.parent_id = parent_id;
                child.generation = t + 1;
                child.scaffold_files = candidate.tree;
                child.patch_diff =
                    diff_trees(parent->scaffold_files, candidate.tree, options.layer_map)
                        .to_text();
                child.refiner_calls = backend.count(CallRole::Refiner, child.id);
                child.status = candidate.valid ? NodeStatus::Pending : NodeStatus::Invalid;
                for (const auto& phase : candidate.phases)
                    for (const auto& entry : phase.report.actions)
                        child.actions.push_back(
                            {entry.action.kind, entry.outcome,
                             is_malformed_path(entry.action.path)
                                 ? entry.action.path
                                 : normalize_rel_path(entry.action.path)});
                tree.nodes.push_back(std::move(child));
                if (candidate.valid)
                    next_generation.push_back(tree.nodes.size() - 1);
            }
        }

        if (next_generation.empty())
            break;  // population died out
        tree.generations.push_back(next_generation);
    }

    result.outcome = solved ? EvolveOutcome::Solved : EvolveOutcome::Unsolved;
    if (!options.run_dir.empty())
        persist_tree(tree, options.run_dir);
    return result;
}

// ---- persistence ----

std::string render_node_meta(const EvolutionNode& node) {
    std::ostringstream out;
    out << "id = " << node.id << "\n";
    out << "parent = " << (node.parent_id ? *node.parent_id : "-") << "\n";
    out << "generation = " << node.generation << "\n";
    out << "status = " << node_status_name(node.status) << "\n";
    out << "score = " << (node.score ? std::to_string(*node.score) : "-") << "\n";
    out << "episode_calls = " << node.episode_calls << "\n";
    out << "summarizer_calls = " << node.summarizer_calls << "\n";
    out << "diagnosis_calls = " << node.diagnosis_calls << "\n";
    out << "refiner_calls = " << node.refiner_calls << "\n";
    out << "wall_ms = " << node.wall_ms << "\n";
    int index = 1;
    for (const auto& action : node.actions) {
        const char* kind = action.kind == PatchKind::ReplaceCode  ? "replace_code"
                           : action.kind == PatchKind::CreateFile ? "create_file"
                                                                  : "delete_file";
        out << "action." << index++ << " = " << kind << " " << apply_outcome_name(action.outcome)
            << " " << action.path << "\n";
    }
    return out.str();
}

std::string render_tree_index(const EvolutionTree& tree) {
    nlohmann::json doc;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
        nlohmann::json entry;
        entry["id"] = node.id;
        entry["parent"] = node.parent_id ? nlohmann::json(*node.parent_id) : nlohmann::json();
        entry["generation"] = node.generation;
        entry["status"] = node_status_name(node.status);
        if (node.score)
            entry["score"] = *node.score;
        doc["nodes"].push_back(entry);
    }
    return doc.dump(2) + "\n";
}

void persist_tree(const EvolutionTree& tree, const std::string& run_dir) {
    fs::create_directories(run_dir);
    write_file((fs::path(run_dir) / "tree").string(), render_tree_index(tree));
    for (const auto& node : tree.nodes) {
        fs::path dir = fs::path(run_dir) / "nodes" / node.id;
        write_tree((dir / "scaffold").string(), node.scaffold_files);
        if (node.trajectory)
            write_file((dir / "trajectory.log").string(), trajectory_to_log(*node.trajectory));
        if (node.summary)
            write_file((dir / "summary.txt").string(), summary_to_text(*node.summary));
        if (node.report) {
            write_file((dir / "diagnosis.txt").string(), node.report->raw);
            write_file((dir / "diagnosis.meta").string(), diagnosis_sidecar(*node.report));
        }
        write_file((dir / "patch.diff").string(), node.patch_diff);
        write_file((dir / "meta").string(), render_node_meta(node));
    }
}

}  // namespace evoagent
