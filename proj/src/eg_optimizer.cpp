#include "toolret/eg_optimizer.hpp"

#include <algorithm>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "toolret/evaluator.hpp"
#include "toolret/util.hpp"

namespace toolret::eg {

using nlohmann::json;

void EgConfig::validate() const {
    if (!(failure_threshold > 0.0 && failure_threshold <= 1.0))
        throw ValidationError("failure_threshold must lie in (0, 1]");
    if (max_rounds < 0) throw ValidationError("max_rounds must be non-negative");
    if (query_cap == 0) throw ValidationError("query_cap must be positive");
}

EgState init_state(const ToolCatalog& catalog) {
    EgState state;
    for (const auto& id : catalog.ids()) state.tools[id] = {};
    return state;
}

EgState phase1_evaluate(const std::vector<QueryRecord>& trainset, pipeline::ToolRetriever& retriever, EgState state) {
    for (const auto& query : trainset) {
        auto result = pipeline::run_pnr(query, retriever);
        if (result.failed()) {
            spdlog::warn("phase 1: skipping query '{}': {}", query.id, result.error);
            continue;
        }
        for (const auto& tool_id : query.gold_tool_ids) {
            auto& stats = state.tools[tool_id];
            ++stats.trials;
            if (!result.tools.count(tool_id)) {
                ++stats.failure;
                if (std::find(stats.failure_queries.begin(), stats.failure_queries.end(), query.text) ==
                    stats.failure_queries.end())
                    stats.failure_queries.push_back(query.text);
            }
        }
    }
    return state;
}

std::vector<std::string> select_underinformative(const EgState& state, const EgConfig& config) {
    std::vector<std::string> out;
    for (const auto& [id, stats] : state.tools) {
        if (stats.trials == 0) continue;
        const double ratio = static_cast<double>(stats.failure) / static_cast<double>(stats.trials);
        if (ratio > config.failure_threshold) out.push_back(id);
    }
    return out;
}

FilteredQueries strip_entities(const std::vector<std::string>& queries, llm::LlmProvider& provider, std::size_t cap) {
    if (queries.empty()) throw ValidationError("strip_entities: no queries");
    FilteredQueries out;
    const std::size_t n = std::min(cap, queries.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& original = queries[queries.size() - 1 - i];
        auto generic = trim(llm::complete(provider, llm::TemplateId::entity_filter, {{"query", original}}));
        if (generic.empty()) {
            out.warnings.push_back("entity filter returned nothing for '" + original + "'; keeping it");
            spdlog::warn("{}", out.warnings.back());
            generic = original;
        }
        out.queries.push_back(std::move(generic));
    }
    return out;
}

std::vector<std::string> generate_reasons(const Tool& tool, const std::vector<std::string>& filtered,
                                          llm::LlmProvider& provider) {
    if (filtered.empty()) throw ValidationError("generate_reasons: no queries");
    auto reply = llm::complete(provider, llm::TemplateId::functionality_assessment,
                               {{"tool_name", tool.name}, {"description", tool.description},
                                {"queries", join(filtered, "\n")}});
    std::vector<std::string> reasons;
    for (const auto& line : split_lines(reply))
        if (auto r = trim(line); !r.empty()) reasons.push_back(std::move(r));
    if (reasons.empty()) throw ProviderError("no reasons");
    return reasons;
}

std::string rewrite_description(const Tool& tool, const std::string& description,
                                const std::vector<std::string>& filtered, const std::vector<std::string>& reasons,
                                llm::LlmProvider& provider) {
    if (description.empty() || filtered.empty() || reasons.empty())
        throw ValidationError("rewrite_description: inputs must be non-empty");
    auto reply = trim(llm::complete(provider, llm::TemplateId::edit_ground,
                                    {{"tool_name", tool.name}, {"description", description},
                                     {"queries", join(filtered, "\n")}, {"reasons", join(reasons, "\n")}}));
    if (reply.empty()) throw ProviderError("rewrite returned an empty description");
    return reply;
}

namespace {

std::vector<QueryRecord> queries_with_tool(const std::vector<QueryRecord>& devset, const std::string& tool_id) {
    std::vector<QueryRecord> out;
    for (const auto& q : devset)
        if (q.gold_tool_ids.count(tool_id)) out.push_back(q);
    return out;
}

}  // namespace

double tool_dev_recall(const std::vector<QueryRecord>& devset, pipeline::ToolRetriever& retriever,
                       const std::string& tool_id) {
    auto subset = queries_with_tool(devset, tool_id);
    if (subset.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& q : subset) {
        auto result = pipeline::run_pnr(q, retriever);
        // a failed run retrieved nothing
        sum += result.failed() ? 0.0 : eval::recall(result.tools, q.gold_tool_ids);
    }
    return sum / static_cast<double>(subset.size());
}

std::map<std::string, double> dev_recall_by_tool(const std::vector<QueryRecord>& devset,
                                                 pipeline::ToolRetriever& retriever) {
    std::map<std::string, double> sum;
    std::map<std::string, std::size_t> count;
    for (const auto& q : devset) {
        auto result = pipeline::run_pnr(q, retriever);
        const double r = result.failed() ? 0.0 : eval::recall(result.tools, q.gold_tool_ids);
        for (const auto& id : q.gold_tool_ids) {
            sum[id] += r;
            ++count[id];
        }
    }
    std::map<std::string, double> out;
    for (const auto& id : retriever.catalog().ids())
        out[id] = count.count(id) ? sum[id] / static_cast<double>(count[id]) : 0.0;
    return out;
}

GateResult gate(const std::vector<QueryRecord>& devset, pipeline::PnrPipeline& pipeline, EgState& state,
                const std::string& tool_id, const std::string& new_text, int round, const EgConfig& config) {
    if (new_text.empty()) throw ValidationError("gate: candidate description is empty");
    const ToolCatalog old_catalog = pipeline.catalog();
    const dense::DenseIndex old_index = pipeline.index();

    ToolCatalog trial = old_catalog.with_description(tool_id, new_text, round, 0.0);
    dense::DenseIndex trial_index = config.full_rebuild
                                        ? dense::build_index(trial, pipeline.embedder(), old_index.head)
                                        : dense::update_entry(old_index, trial, tool_id, pipeline.embedder());
    pipeline.install(trial, trial_index);

    GateResult result;
    try {
        result.dev_recall_new = tool_dev_recall(devset, pipeline, tool_id);
    } catch (...) {
        pipeline.install(old_catalog, old_index);
        throw;
    }
    auto& stats = state.tools[tool_id];
    if (result.dev_recall_new > stats.best_recall) {
        result.accepted = true;
        // same description as the trial snapshot, so the trial index stays fresh
        ToolCatalog accepted = apply_description(old_catalog, tool_id, new_text, round, result.dev_recall_new);
        pipeline.install(std::move(accepted), std::move(trial_index));
        stats.best_recall = result.dev_recall_new;
    } else {
        pipeline.install(old_catalog, old_index);
    }
    return result;
}

EgResult run_eg(const std::vector<QueryRecord>& trainset, const std::vector<QueryRecord>& devset,
                pipeline::PnrPipeline& pipeline, llm::LlmProvider& provider, const EgConfig& config) {
    config.validate();
    EgResult out;
    EgState state = init_state(pipeline.catalog());
    out.report.initial_recall = dev_recall_by_tool(devset, pipeline);
    for (auto& [id, stats] : state.tools) stats.best_recall = out.report.initial_recall[id];

    for (int round = 1; round <= config.max_rounds; ++round) {
        state.current_round = round;
        for (auto& [_, stats] : state.tools) {
            stats.trials = 0;
            stats.failure = 0;
            stats.failure_queries.clear();
        }
        state = phase1_evaluate(trainset, pipeline, std::move(state));

        RoundSummary summary;
        summary.round = round;
        summary.selected = select_underinformative(state, config);
        summary.evaluated = state.tools;
        spdlog::info("E&G round {}: {} under-informative tools", round, summary.selected.size());

        for (const auto& tool_id : summary.selected) {
            DescriptionProposal p;
            p.tool_id = tool_id;
            p.round = round;
            const Tool tool = pipeline.catalog().at(tool_id);
            p.old_text = tool.description;
            p.dev_recall_old = state.tools[tool_id].best_recall;
            try {
                auto filtered = strip_entities(state.tools[tool_id].failure_queries, provider, config.query_cap);
                p.filtered_queries = filtered.queries;
                p.warnings = filtered.warnings;
                p.reasons = generate_reasons(tool, p.filtered_queries, provider);
                p.new_text = rewrite_description(tool, tool.description, p.filtered_queries, p.reasons, provider);
                auto g = gate(devset, pipeline, state, tool_id, p.new_text, round, config);
                p.dev_recall_new = g.dev_recall_new;
                p.accepted = g.accepted;
                if (p.accepted) ++summary.accepted;
            } catch (const std::exception& e) {
                p.error = e.what();
                spdlog::warn("E&G round {}: tool '{}' skipped: {}", round, tool_id, p.error);
            }
            out.report.proposals.push_back(std::move(p));
        }
        for (const auto& [id, stats] : state.tools) summary.best_recall[id] = stats.best_recall;
        const bool nothing_selected = summary.selected.empty();
        out.report.rounds.push_back(std::move(summary));
        if (nothing_selected) break;
    }
    out.catalog = pipeline.catalog();
    out.state = std::move(state);
    return out;
}

std::string serialize_proposals(const EgReport& report) {
    std::string out;
    for (const auto& p : report.proposals) {
        json rec = {{"tool_id", p.tool_id},
                    {"round", p.round},
                    {"dev_recall_old", p.dev_recall_old},
                    {"dev_recall_new", p.dev_recall_new},
                    {"accepted", p.accepted},
                    {"old_text", p.old_text},
                    {"new_text", p.new_text},
                    {"filtered_queries", p.filtered_queries},
                    {"reasons", p.reasons}};
        if (!p.error.empty()) rec["error"] = p.error;
        if (!p.warnings.empty()) rec["warnings"] = p.warnings;
        out += rec.dump() + "\n";
    }
    return out;
}

}  // namespace toolret::eg
