#include "toolret/planner.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <spdlog/spdlog.h>

#include "toolret/text_analysis.hpp"
#include "toolret/util.hpp"

namespace toolret::plan {

PlanState make_state(std::string query_id, std::string query, PlanConfig config) {
    if (config.max_steps == 0) throw ValidationError("max_steps must be positive");
    if (config.batch_size == 0) throw ValidationError("batch_size must be positive");
    PlanState s;
    s.query_id = std::move(query_id);
    s.query = std::move(query);
    s.config = config;
    return s;
}

std::string format_history(const std::vector<SubQuery>& history) {
    if (history.empty()) return "(none)";
    std::vector<std::string> lines;
    for (const auto& sq : history) lines.push_back(std::to_string(sq.step_index) + ". " + sq.text);
    return join(lines, "\n");
}

std::string propose_task(std::size_t batch_size) {
    return "Write " + std::to_string(batch_size) +
           " different candidates for the next sub-query, one per line, without numbering.";
}

std::string judge_task() {
    return "Have the sub-queries so far fully covered the request? Answer Yes or No first, then explain briefly.";
}

namespace {

llm::Variables planner_vars(const PlanState& state, std::string task) {
    llm::Variables vars{{"query", state.query}, {"history", format_history(state.history)}, {"task", std::move(task)}};
    if (state.config.judge_sees_tools && !state.retrieved_tool_names.empty())
        vars["retrieved"] = "Tools retrieved so far: " + join(state.retrieved_tool_names, ", ");
    return vars;
}

}  // namespace

std::vector<std::string> propose_hypotheses(const PlanState& state, llm::LlmProvider& provider) {
    if (state.done) throw ValidationError("plan is already done");
    llm::Variables vars{{"query", state.query},
                        {"history", format_history(state.history)},
                        {"task", propose_task(state.config.batch_size)}};
    const auto reply = llm::complete(provider, llm::TemplateId::planner, vars);
    std::vector<std::string> out;
    for (const auto& line : split_lines(reply)) {
        auto text = trim(line);
        if (text.empty()) continue;
        out.push_back(std::move(text));
        if (out.size() == state.config.batch_size) break;
    }
    if (out.empty()) throw ValidationError("no hypotheses");
    return out;
}

Selection select_subquery(const std::vector<std::string>& prev, const std::vector<std::string>& cand,
                          std::uint64_t seed) {
    if (cand.empty()) throw ValidationError("select_subquery: no candidates");
    Rng rng(derive_seed(seed, 0x5e1ec7));
    Selection sel;

    std::vector<std::string> unique_cand;
    for (const auto& c : cand)
        if (std::find(unique_cand.begin(), unique_cand.end(), c) == unique_cand.end()) unique_cand.push_back(c);

    if (prev.empty()) {
        sel.trace.branch = SelectionTrace::Branch::no_history;
        sel.chosen = unique_cand[rng.uniform_index(unique_cand.size())];
        return sel;
    }

    auto& texts = sel.trace.texts;
    for (const auto& p : prev)
        if (std::find(texts.begin(), texts.end(), p) == texts.end()) texts.push_back(p);
    sel.trace.prev_count = texts.size();
    for (const auto& c : unique_cand)
        if (std::find(texts.begin(), texts.end(), c) == texts.end()) texts.push_back(c);

    auto model = text::TfIdfModel::fit(texts);
    std::vector<text::DenseVector> vectors;
    for (const auto& t : texts) vectors.push_back(model.transform(t).to_dense(model.vocabulary_size()));
    sel.trace.k = std::min(texts.size(), sel.trace.prev_count + 1);
    auto clusters = text::kmeans(vectors, sel.trace.k, derive_seed(seed, 0xc1u));
    sel.trace.labels = clusters.labels;

    std::set<std::size_t> prev_labels(clusters.labels.begin(),
                                      clusters.labels.begin() + static_cast<std::ptrdiff_t>(sel.trace.prev_count));
    for (const auto& c : unique_cand) {
        auto pos = static_cast<std::size_t>(std::find(texts.begin(), texts.end(), c) - texts.begin());
        if (!prev_labels.count(clusters.labels[pos])) sel.trace.survivors.push_back(c);
    }
    if (sel.trace.survivors.empty()) {
        sel.trace.branch = SelectionTrace::Branch::fallback;
        sel.chosen = unique_cand[rng.uniform_index(unique_cand.size())];
    } else {
        sel.trace.branch = SelectionTrace::Branch::filtered;
        sel.chosen = sel.trace.survivors[rng.uniform_index(sel.trace.survivors.size())];
    }
    return sel;
}

Verdict parse_verdict(const std::string& reply) {
    Verdict v;
    v.raw = reply;
    std::string word;
    for (unsigned char c : reply) {
        if (std::isalpha(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else if (!word.empty() || !std::isspace(c)) {
            break;
        }
    }
    if (word == "yes") {
        v.satisfied = true;
    } else if (word != "no") {
        v.parsed = false;
    }
    return v;
}

Verdict goal_satisfied(const PlanState& state, llm::LlmProvider& provider) {
    if (state.history.empty()) throw ValidationError("goal check needs at least one sub-query");
    auto v = parse_verdict(llm::complete(provider, llm::TemplateId::planner, planner_vars(state, judge_task())));
    if (!v.parsed) spdlog::warn("unparseable stop verdict for query '{}', treating as no: {}", state.query_id, v.raw);
    return v;
}

StepResult plan_step(const PlanState& state, llm::LlmProvider& provider) {
    if (state.done) throw ValidationError("plan is already done");
    StepResult r;
    r.state = state;
    r.state.hypotheses = propose_hypotheses(state, provider);

    std::vector<std::string> prev;
    for (const auto& sq : state.history) prev.push_back(sq.text);
    const std::size_t step = state.history.size() + 1;
    r.selection = select_subquery(prev, r.state.hypotheses, derive_seed(state.config.seed, step));
    r.chosen = {r.selection.chosen, step, state.query_id};
    r.state.history.push_back(r.chosen);

    r.verdict = goal_satisfied(r.state, provider);
    if (r.verdict.satisfied) {
        r.state.done = true;
        r.state.stop = StopReason::satisfied;
    } else if (r.state.history.size() >= r.state.config.max_steps) {
        r.state.done = true;
        r.state.stop = StopReason::exhausted;
    }
    return r;
}

}  // namespace toolret::plan
