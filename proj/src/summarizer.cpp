#include "evoagent/summarizer.hpp"

#include "evoagent/fs_tree.hpp"
#include "evoagent/template_engine.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <sstream>

namespace evoagent {

namespace {

std::optional<int> parse_step_header(const std::string& line) {
    std::string t = trim(line);
    if (!starts_with(t, "=== STEP "))
        return std::nullopt;
    if (!ends_with(t, "==="))
        return std::nullopt;
    std::string mid = trim(t.substr(9, t.size() - 9 - 3));
    if (mid.empty() || mid.find_first_not_of("0123456789") != std::string::npos)
        return std::nullopt;
    return std::stoi(mid);
}

// Labeled blocks within a step body. A label line is "<LABEL>:" optionally
// followed by same-line content.
struct BlockCollector {
    std::map<std::string, std::string>* blocks;
    std::string current;

    void feed(const std::string& line, const std::vector<std::string>& labels) {
        for (const auto& label : labels) {
            if (starts_with(line, label + ":")) {
                current = label;
                std::string rest = line.substr(label.size() + 1);
                if (!rest.empty() && rest[0] == ' ')
                    rest = rest.substr(1);
                (*blocks)[label] = rest;
                return;
            }
        }
        if (current.empty())
            return;
        std::string& acc = (*blocks)[current];
        if (!acc.empty())
            acc += "\n";
        acc += line;
    }
};

std::string strip_outer_blank(const std::string& s) {
    auto lines = split_lines(s);
    size_t b = 0, e = lines.size();
    while (b < e && trim(lines[b]).empty())
        ++b;
    while (e > b && trim(lines[e - 1]).empty())
        --e;
    return join(std::vector<std::string>(lines.begin() + b, lines.begin() + e), "\n");
}

}  // namespace

std::vector<RawStep> parse_steps(const std::string& log) {
    static const std::vector<std::string> kLabels = {"THOUGHT", "ACTION", "OBSERVATION",
                                                     "RETURNCODE"};
    std::vector<RawStep> steps;
    std::optional<int> current_index;
    std::map<std::string, std::string> blocks;
    BlockCollector collector{&blocks, ""};

    auto flush = [&] {
        if (!current_index)
            return;
        RawStep step;
        step.index = *current_index;
        step.thought = strip_outer_blank(blocks.count("THOUGHT") ? blocks["THOUGHT"] : "");
        step.action = strip_outer_blank(blocks.count("ACTION") ? blocks["ACTION"] : "");
        step.observation =
            strip_outer_blank(blocks.count("OBSERVATION") ? blocks["OBSERVATION"] : "");
        steps.push_back(std::move(step));
        blocks.clear();
        collector.current.clear();
    };

    for (const auto& line : split_lines(log)) {
        if (auto idx = parse_step_header(line)) {
            flush();
            current_index = idx;
            continue;
        }
        if (current_index)
            collector.feed(line, kLabels);
    }
    flush();

    if (steps.empty())
        throw MalformedLogError("no step headers found in trajectory log");
    return steps;
}

std::vector<ChunkSpec> make_chunks(int total, int window) {
    if (window < 1)
        throw std::invalid_argument("window must be >= 1");
    if (total == 0)
        throw EmptyTrajectoryError("trajectory has no steps");
    std::vector<ChunkSpec> chunks;
    for (int start = 1; start <= total; start += window)
        chunks.push_back({start, std::min(start + window - 1, total)});
    return chunks;
}

std::string chunk_prev_context(const std::vector<RawStep>& steps, int start, int window,
                               size_t max_bytes) {
    if (start <= 1)
        return "";
    int lo = std::max(1, start - window);
    std::ostringstream out;
    for (const auto& step : steps) {
        if (step.index < lo || step.index >= start)
            continue;
        out << "[step " << step.index << "] " << step.thought << "\n";
        auto obs_lines = split_lines(step.observation);
        if (!obs_lines.empty())
            out << "    obs: " << obs_lines.front() << "\n";
    }
    std::string text = out.str();
    if (text.size() > max_bytes)
        text.resize(max_bytes);
    return text;
}

std::vector<SummaryStep> parse_chunk_output(const std::string& text, int start, int end) {
    static const std::vector<std::string> kLabels = {"THOUGHT", "OBSERVATION"};
    std::map<int, SummaryStep> by_index;

    std::optional<int> current_index;
    std::map<std::string, std::string> blocks;
    BlockCollector collector{&blocks, ""};

    auto flush = [&] {
        if (!current_index)
            return;
        int idx = *current_index;
        if (idx >= start && idx <= end) {
            SummaryStep step;
            step.index = idx;
            step.thought_summary =
                strip_outer_blank(blocks.count("THOUGHT") ? blocks["THOUGHT"] : "");
            step.obs_summary =
                strip_outer_blank(blocks.count("OBSERVATION") ? blocks["OBSERVATION"] : "");
            by_index[idx] = std::move(step);  // last occurrence wins
        }
        blocks.clear();
        collector.current.clear();
    };

    for (const auto& line : split_lines(text)) {
        if (auto idx = parse_step_header(line)) {
            flush();
            current_index = idx;
            continue;
        }
        if (current_index)
            collector.feed(line, kLabels);
    }
    flush();

    std::vector<SummaryStep> out;
    for (int i = start; i <= end; ++i) {
        auto it = by_index.find(i);
        if (it != by_index.end()) {
            out.push_back(std::move(it->second));
        } else {
            SummaryStep placeholder;
            placeholder.index = i;
            placeholder.thought_summary = "(no summary produced for this step)";
            placeholder.obs_summary = "(no summary produced for this step)";
            placeholder.missing = true;
            out.push_back(std::move(placeholder));
        }
    }
    return out;
}

TrajectorySummary backfill_placeholders(std::vector<SummaryStep> steps,
                                        const std::vector<RawStep>& raw, int cap) {
    std::map<int, const RawStep*> raw_by_index;
    for (const auto& r : raw)
        raw_by_index[r.index] = &r;

    TrajectorySummary summary;
    summary.steps = std::move(steps);
    std::sort(summary.steps.begin(), summary.steps.end(),
              [](const SummaryStep& a, const SummaryStep& b) { return a.index < b.index; });

    for (auto& step : summary.steps) {
        if (summary.backfill_count >= cap)
            break;
        if (step.obs_summary.find(kObsPlaceholderPrefix) == std::string::npos)
            continue;
        auto it = raw_by_index.find(step.index);
        if (it == raw_by_index.end())
            continue;
        step.obs_summary += std::string("\n") + kBackfillLabel + "\n" + it->second->observation;
        step.backfilled = true;
        ++summary.backfill_count;
    }
    return summary;
}

namespace {

std::string render_chunk_body(const std::vector<RawStep>& steps, int start, int end) {
    std::ostringstream out;
    for (const auto& step : steps) {
        if (step.index < start || step.index > end)
            continue;
        out << "=== STEP " << step.index << " ===\n";
        out << "THOUGHT:\n" << step.thought << "\n";
        out << "ACTION:\n" << step.action << "\n";
        out << "OBSERVATION:\n" << step.observation << "\n\n";
    }
    return out.str();
}

}  // namespace

TrajectorySummary summarize_trajectory(const std::string& log, ModelBackend& backend,
                                       const SummarizerPrompts& prompts,
                                       const SummarizerOptions& options,
                                       const std::string& backend_key) {
    auto raw = parse_steps(log);
    int total = static_cast<int>(raw.size());
    auto chunks = make_chunks(total, options.window);

    auto run_chunk = [&](const ChunkSpec& chunk) -> std::vector<SummaryStep> {
        TemplateVars vars;
        vars["raw_content"] = render_chunk_body(raw, chunk.start, chunk.end);
        vars["start_step"] = std::to_string(chunk.start);
        vars["end_step"] = std::to_string(chunk.end);
        vars["total_steps"] = std::to_string(total);
        vars["max_step"] = std::to_string(total);
        vars["previous_context"] = chunk_prev_context(raw, chunk.start, options.window);

        BackendRequest request;
        request.role = CallRole::Summarizer;
        request.key = backend_key;
        request.settings = options.generation;
        request.messages = {{"system", render_template(prompts.chunk_system, vars)},
                            {"user", render_template(prompts.chunk_user, vars)}};
        try {
            return parse_chunk_output(backend.complete(request), chunk.start, chunk.end);
        } catch (const BackendFailure&) {
            // Degrade this chunk to placeholders; the rest of the summary stands.
            return parse_chunk_output("", chunk.start, chunk.end);
        }
    };

    std::vector<std::vector<SummaryStep>> per_chunk(chunks.size());
    if (options.fan_out > 1) {
        size_t next = 0;
        while (next < chunks.size()) {
            size_t batch = std::min<size_t>(options.fan_out, chunks.size() - next);
            std::vector<std::future<std::vector<SummaryStep>>> futures;
            for (size_t k = 0; k < batch; ++k)
                futures.push_back(std::async(std::launch::async, run_chunk, chunks[next + k]));
            for (size_t k = 0; k < batch; ++k)
                per_chunk[next + k] = futures[k].get();
            next += batch;
        }
    } else {
        for (size_t c = 0; c < chunks.size(); ++c)
            per_chunk[c] = run_chunk(chunks[c]);
    }

    // Merge by step index; chunks partition [1, N], so this is a concat.
    std::vector<SummaryStep> merged;
    merged.reserve(total);
    for (auto& part : per_chunk)
        for (auto& step : part)
            merged.push_back(std::move(step));

    return backfill_placeholders(std::move(merged), raw, options.backfill_cap);
}

std::string summary_to_text(const TrajectorySummary& summary) {
    std::ostringstream out;
    for (const auto& step : summary.steps) {
        out << "=== STEP " << step.index << " ===\n";
        out << "THOUGHT: " << step.thought_summary << "\n";
        out << "OBSERVATION: " << step.obs_summary << "\n";
    }
    return out.str();
}

}  // namespace evoagent
