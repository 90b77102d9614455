#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/llm_gateway.hpp"
#include "toolret/retrieval_pipeline.hpp"

namespace toolret::eg {

struct ToolStats {
    std::size_t trials = 0;
    std::size_t failure = 0;
    std::vector<std::string> failure_queries;  // distinct, in the order they failed
    double best_recall = 0.0;

    bool operator==(const ToolStats&) const = default;
};

struct EgState {
    std::map<std::string, ToolStats> tools;
    int current_round = 0;
};

struct EgConfig {
    double failure_threshold = 0.5;  // in (0, 1]
    int max_rounds = 5;
    std::size_t query_cap = 8;       // failure queries handed to the optimizer per tool
    bool full_rebuild = false;       // gate rebuilds the whole index instead of one vector

    void validate() const;
};

struct DescriptionProposal {
    std::string tool_id;
    int round = 0;
    std::string old_text;
    std::vector<std::string> filtered_queries;  // U
    std::vector<std::string> reasons;           // R
    std::string new_text;
    double dev_recall_old = 0.0;
    double dev_recall_new = 0.0;
    bool accepted = false;
    std::string error;  // set when the tool's optimization failed before gating
    std::vector<std::string> warnings;
};

struct RoundSummary {
    int round = 0;
    std::vector<std::string> selected;
    std::map<std::string, ToolStats> evaluated;  // phase-1 counters the selection saw
    std::size_t accepted = 0;
    std::map<std::string, double> best_recall;  // snapshot after the round
};

struct EgReport {
    std::vector<DescriptionProposal> proposals;
    std::vector<RoundSummary> rounds;
    std::map<std::string, double> initial_recall;
};

EgState init_state(const ToolCatalog& catalog);

// Runs P&R on every training query and counts, per gold tool, trials and failures.
// Queries whose pipeline run fails are skipped.
EgState phase1_evaluate(const std::vector<QueryRecord>& trainset, pipeline::ToolRetriever& retriever, EgState state);

// Tools with trials > 0 and failure / trials > threshold, ascending id.
std::vector<std::string> select_underinformative(const EgState& state, const EgConfig& config);

struct FilteredQueries {
    std::vector<std::string> queries;  // U
    std::vector<std::string> warnings;
};

// Entity-filters the `cap` most recent failure queries (newest first).
FilteredQueries strip_entities(const std::vector<std::string>& queries, llm::LlmProvider& provider,
                               std::size_t cap = 8);

std::vector<std::string> generate_reasons(const Tool& tool, const std::vector<std::string>& filtered,
                                          llm::LlmProvider& provider);

std::string rewrite_description(const Tool& tool, const std::string& description,
                                const std::vector<std::string>& filtered, const std::vector<std::string>& reasons,
                                llm::LlmProvider& provider);

// Macro recall over the dev queries whose gold set contains the tool; 0 if none do.
double tool_dev_recall(const std::vector<QueryRecord>& devset, pipeline::ToolRetriever& retriever,
                       const std::string& tool_id);

// Per-tool dev recall for every catalog tool from one pass over the dev set.
std::map<std::string, double> dev_recall_by_tool(const std::vector<QueryRecord>& devset,
                                                 pipeline::ToolRetriever& retriever);

struct GateResult {
    double dev_recall_new = 0.0;
    bool accepted = false;
};

// Installs the candidate description, re-evaluates the tool's dev recall and keeps
// the edit only on strict improvement over the tool's best recall. On rejection the
// previous catalog and index are restored.
GateResult gate(const std::vector<QueryRecord>& devset, pipeline::PnrPipeline& pipeline, EgState& state,
                const std::string& tool_id, const std::string& new_text, int round, const EgConfig& config = {});

struct EgResult {
    ToolCatalog catalog;
    EgReport report;
    EgState state;
};

// At most max_rounds rounds of evaluate -> select -> filter -> reasons -> rewrite ->
// gate; stops early after a round that selects no tool.
EgResult run_eg(const std::vector<QueryRecord>& trainset, const std::vector<QueryRecord>& devset,
                pipeline::PnrPipeline& pipeline, llm::LlmProvider& provider, const EgConfig& config = {});

std::string serialize_proposals(const EgReport& report);

}  // namespace toolret::eg
