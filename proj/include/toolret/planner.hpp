#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "toolret/llm_gateway.hpp"

namespace toolret::plan {

struct SubQuery {
    std::string text;
    std::size_t step_index = 0;  // 1-based
    std::string parent_query_id;

    bool operator==(const SubQuery&) const = default;
};

enum class StopReason { none, satisfied, exhausted };

struct PlanConfig {
    std::size_t max_steps = 6;
    std::size_t batch_size = 4;  // hypotheses per step
    std::uint64_t seed = 0;
    // Show retrieved tool names to the stop check.
    bool judge_sees_tools = false;
};

struct PlanState {
    std::string query_id;
    std::string query;
    std::vector<SubQuery> history;
    std::vector<std::string> hypotheses;  // last generated batch
    std::vector<std::string> retrieved_tool_names;
    bool done = false;
    StopReason stop = StopReason::none;
    PlanConfig config;
};

PlanState make_state(std::string query_id, std::string query, PlanConfig config = {});

// "1. first\n2. second" or "(none)".
std::string format_history(const std::vector<SubQuery>& history);

// One planner completion parsed line by line; blank lines dropped, at most
// batch_size kept. Throws ValidationError("no hypotheses") when nothing parses.
std::vector<std::string> propose_hypotheses(const PlanState& state, llm::LlmProvider& provider);

struct SelectionTrace {
    enum class Branch { no_history, filtered, fallback };

    Branch branch = Branch::no_history;
    std::vector<std::string> texts;   // clustered texts: unique prev, then unique new candidates
    std::vector<std::size_t> labels;  // cluster label per entry of `texts`
    std::size_t prev_count = 0;       // leading entries of `texts` that are prev items
    std::size_t k = 0;
    std::vector<std::string> survivors;  // candidates whose label no prev item has
};

struct Selection {
    std::string chosen;
    SelectionTrace trace;
};

// Furthest-planning choice among candidates: TF-IDF over prev ∪ cand, k-means with
// k = min(|union|, |prev| + 1), keep candidates whose label no prev item carries,
// then a seeded uniform pick (from all candidates if none survive or prev is empty).
Selection select_subquery(const std::vector<std::string>& prev, const std::vector<std::string>& cand,
                          std::uint64_t seed);

struct Verdict {
    bool satisfied = false;
    bool parsed = true;  // false when the reply began with neither yes nor no
    std::string raw;
};

// Leading alphabetic word, case-insensitive: "yes" or "no"; anything else is "no".
Verdict parse_verdict(const std::string& reply);

std::string propose_task(std::size_t batch_size);
std::string judge_task();

Verdict goal_satisfied(const PlanState& state, llm::LlmProvider& provider);

struct StepResult {
    PlanState state;
    SubQuery chosen;
    Selection selection;
    Verdict verdict;
};

// hypotheses -> selection -> append -> stop check. The state is done when the
// verdict is yes or the history reached max_steps.
StepResult plan_step(const PlanState& state, llm::LlmProvider& provider);

}  // namespace toolret::plan
