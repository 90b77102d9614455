#include "toolret/retrieval_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <spdlog/spdlog.h>

#include "toolret/util.hpp"

namespace toolret::pipeline {

using nlohmann::json;

std::string to_string(RunStatus status) {
    switch (status) {
        case RunStatus::completed: return "completed";
        case RunStatus::exhausted: return "exhausted";
        case RunStatus::failed: return "failed";
    }
    return "unknown";
}

CandidateSet retrieve_candidates(const dense::DenseIndex& index, const ToolCatalog& catalog,
                                 const dense::EmbeddingProvider& embedder, const std::string& sub_query,
                                 std::size_t pool_size) {
    if (!index.fresh_for(catalog))
        throw StaleIndexError("dense index was built for catalog version " + std::to_string(index.catalog_version) +
                              " but the catalog is at version " + std::to_string(catalog.version()) +
                              "; rebuild the index");
    CandidateSet out;
    out.sub_query = sub_query;
    out.pool_size = pool_size;
    out.ranked = dense::dense_topk(index, embedder.embed(sub_query), pool_size);
    return out;
}

std::vector<RerankedTool> rerank_lm(const CandidateSet& candidates, const llm::PairScorer& scorer,
                                    const ToolCatalog& catalog) {
    std::vector<std::string> descriptions;
    for (const auto& c : candidates.ranked) descriptions.push_back(catalog.at(c.id).description);
    const auto nll = scorer.score(candidates.sub_query, descriptions);
    std::vector<RerankedTool> out;
    for (std::size_t i = 0; i < candidates.ranked.size(); ++i) out.push_back({candidates.ranked[i].id, nll[i]});
    std::sort(out.begin(), out.end(), [](const RerankedTool& a, const RerankedTool& b) {
        if (a.neg_logprob != b.neg_logprob) return a.neg_logprob < b.neg_logprob;
        return a.id < b.id;
    });
    if (out.size() > kShortlistSource) out.resize(kShortlistSource);
    return out;
}

std::string format_tool_list(const std::vector<std::string>& tool_ids, const ToolCatalog& catalog) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < tool_ids.size(); ++i) {
        const auto& tool = catalog.at(tool_ids[i]);
        lines.push_back(std::to_string(i + 1) + ". " + tool.name + ": " + tool.description);
    }
    return join(lines, "\n");
}

namespace {

std::string clean_name(std::string_view raw) {
    std::string s = trim(raw);
    // list markers: "-", "*", "1.", "2)"
    if (!s.empty() && (s[0] == '-' || s[0] == '*')) s = trim(s.substr(1));
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) s = trim(s.substr(digits + 1));
    while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        s = trim(s.substr(1, s.size() - 2));
    return s;
}

bool is_none(const std::string& s) {
    auto lower = to_lower(s);
    while (!lower.empty() && (lower.back() == '.' || lower.back() == '!')) lower.pop_back();
    return lower == "none";
}

}  // namespace

Shortlist parse_shortlist(const std::string& reply, const std::string& sub_query,
                          const std::vector<std::string>& source_ids, const ToolCatalog& catalog) {
    Shortlist out;
    out.sub_query = sub_query;
    out.source_ids = source_ids;

    std::map<std::string, std::vector<std::string>> by_name;  // lowercased name -> source ids
    for (const auto& id : source_ids) by_name[to_lower(catalog.at(id).name)].push_back(id);
    std::set<std::string> catalog_names;
    for (const auto& [_, tool] : catalog.tools()) catalog_names.insert(to_lower(tool.name));

    std::set<std::string> picked;
    auto consider = [&](const std::string& name) {
        auto it = by_name.find(to_lower(name));
        if (it != by_name.end()) {
            picked.insert(it->second.begin(), it->second.end());
        } else if (catalog_names.count(to_lower(name))) {
            out.warnings.push_back("predictor named '" + name + "', which is not among the top candidates");
        } else {
            out.warnings.push_back("predictor named unknown tool '" + name + "'");
        }
    };

    for (const auto& line : split_lines(reply)) {
        auto name = clean_name(line);
        if (name.empty() || is_none(name)) continue;
        if (!by_name.count(to_lower(name)) && !catalog_names.count(to_lower(name)) &&
            name.find(',') != std::string::npos) {
            std::string part;
            for (char c : name + ",") {
                if (c == ',') {
                    if (auto n = clean_name(part); !n.empty() && !is_none(n)) consider(n);
                    part.clear();
                } else {
                    part += c;
                }
            }
            continue;
        }
        consider(name);
    }
    for (const auto& id : source_ids)
        if (picked.count(id)) out.tool_ids.push_back(id);
    for (const auto& w : out.warnings) spdlog::warn("shortlist for '{}': {}", sub_query, w);
    return out;
}

Shortlist predict_shortlist(const std::vector<std::string>& top_ids, const std::string& sub_query,
                            llm::LlmProvider& provider, const ToolCatalog& catalog) {
    if (top_ids.empty()) throw ValidationError("predict_shortlist: no candidate tools");
    const auto reply = llm::complete(provider, llm::TemplateId::predictor,
                                     {{"sub_query", sub_query}, {"tools", format_tool_list(top_ids, catalog)}});
    return parse_shortlist(reply, sub_query, top_ids, catalog);
}

std::set<std::string> union_tools(const std::vector<Shortlist>& shortlists) {
    std::set<std::string> out;
    for (const auto& s : shortlists) out.insert(s.tool_ids.begin(), s.tool_ids.end());
    return out;
}

namespace {

class TracingProvider final : public llm::LlmProvider {
public:
    TracingProvider(llm::LlmProvider& inner, std::vector<json>& trace, std::string query_id)
        : inner_(inner), trace_(trace), query_id_(std::move(query_id)) {}

    std::string complete(const llm::LlmRequest& request) override {
        auto reply = inner_.complete(request);
        trace_.push_back({{"type", "provider_call"},
                          {"query_id", query_id_},
                          {"template_id", llm::to_string(request.template_id)},
                          {"key", llm::canonical_key(request.template_id, request.variables)},
                          {"response", reply}});
        return reply;
    }

private:
    llm::LlmProvider& inner_;
    std::vector<json>& trace_;
    std::string query_id_;
};

json step_record(const std::string& query_id, const StepRecord& step) {
    json candidates = json::array();
    for (const auto& c : step.candidates.ranked) candidates.push_back({{"id", c.id}, {"score", c.score}});
    json reranked = json::array();
    for (const auto& r : step.reranked) reranked.push_back({{"id", r.id}, {"neg_logprob", r.neg_logprob}});
    return {{"type", "step"},
            {"query_id", query_id},
            {"step", step.sub_query.step_index},
            {"sub_query", step.sub_query.text},
            {"hypotheses", step.hypotheses},
            {"verdict", step.verdict.satisfied},
            {"candidates", std::move(candidates)},
            {"reranked", std::move(reranked)},
            {"shortlist", step.shortlist.tool_ids},
            {"warnings", step.shortlist.warnings}};
}

void finalize(PnRResult& result) {
    std::vector<Shortlist> shortlists;
    std::map<std::string, double> best;
    for (const auto& step : result.steps) {
        shortlists.push_back(step.shortlist);
        for (const auto& id : step.shortlist.tool_ids) {
            ++result.hit_counts[id];
            for (const auto& r : step.reranked) {
                if (r.id != id) continue;
                auto it = best.find(id);
                if (it == best.end() || r.neg_logprob < it->second) best[id] = r.neg_logprob;
            }
        }
    }
    result.tools = union_tools(shortlists);
    std::set<std::string> check;
    for (const auto& step : result.steps) check.insert(step.shortlist.tool_ids.begin(), step.shortlist.tool_ids.end());
    if (check != result.tools) throw std::logic_error("final tool set differs from the union of step shortlists");

    result.ranking.assign(result.tools.begin(), result.tools.end());
    std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](const std::string& a, const std::string& b) {
        const double sa = best.at(a), sb = best.at(b);
        if (sa != sb) return sa < sb;
        return a < b;
    });
}

}  // namespace

PnrPipeline::PnrPipeline(ToolCatalog catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                         std::shared_ptr<llm::LlmProvider> llm, std::shared_ptr<const llm::PairScorer> scorer,
                         PipelineConfig config, std::optional<train::ProjectionHead> head)
    : catalog_(std::move(catalog)),
      embedder_(std::move(embedder)),
      llm_(std::move(llm)),
      scorer_(std::move(scorer)),
      config_(config) {
    if (!embedder_ || !llm_ || !scorer_) throw ValidationError("pipeline needs an embedder, an LLM and a scorer");
    index_ = dense::build_index(catalog_, *embedder_, std::move(head));
}

PnrPipeline::PnrPipeline(ToolCatalog catalog, dense::DenseIndex index,
                         std::shared_ptr<const dense::EmbeddingProvider> embedder,
                         std::shared_ptr<llm::LlmProvider> llm, std::shared_ptr<const llm::PairScorer> scorer,
                         PipelineConfig config)
    : catalog_(std::move(catalog)),
      index_(std::move(index)),
      embedder_(std::move(embedder)),
      llm_(std::move(llm)),
      scorer_(std::move(scorer)),
      config_(config) {
    if (!embedder_ || !llm_ || !scorer_) throw ValidationError("pipeline needs an embedder, an LLM and a scorer");
    if (!index_.fresh_for(catalog_))
        throw StaleIndexError("index (catalog version " + std::to_string(index_.catalog_version) +
                              ") does not match catalog version " + std::to_string(catalog_.version()) +
                              "; rebuild the index");
    if (index_.provider_id != embedder_->provider_id())
        throw ValidationError("index was built with provider '" + index_.provider_id + "', not '" +
                              embedder_->provider_id() + "'");
}

void PnrPipeline::install(ToolCatalog catalog, dense::DenseIndex index) {
    catalog_ = std::move(catalog);
    index_ = std::move(index);
    if (scorer_factory_) scorer_ = scorer_factory_(catalog_);
}

void PnrPipeline::refit_scorer_with(ScorerFactory factory) {
    scorer_factory_ = std::move(factory);
    if (scorer_factory_) scorer_ = scorer_factory_(catalog_);
}

void PnrPipeline::rebuild_index() { index_ = dense::build_index(catalog_, *embedder_, index_.head); }

PnRResult PnrPipeline::retrieve(const QueryRecord& query) {
    PnRResult result;
    result.query_id = query.id;
    TracingProvider llm(*llm_, result.trace, query.id);
    auto state = plan::make_state(query.id, query.text, config_.plan);
    try {
        while (!state.done) {
            auto planned = plan::plan_step(state, llm);
            StepRecord step;
            step.sub_query = planned.chosen;
            step.hypotheses = planned.state.hypotheses;
            step.verdict = planned.verdict;
            state = std::move(planned.state);

            step.candidates = retrieve_candidates(index_, catalog_, *embedder_, step.sub_query.text, config_.pool_size);
            step.reranked = rerank_lm(step.candidates, *scorer_, catalog_);
            std::vector<std::string> top_ids;
            for (const auto& r : step.reranked) top_ids.push_back(r.id);
            step.shortlist = predict_shortlist(top_ids, step.sub_query.text, llm, catalog_);
            for (const auto& id : step.shortlist.tool_ids) state.retrieved_tool_names.push_back(catalog_.at(id).name);

            result.trace.push_back(step_record(query.id, step));
            result.steps.push_back(std::move(step));
        }
        result.status = state.stop == plan::StopReason::exhausted ? RunStatus::exhausted : RunStatus::completed;
    } catch (const std::exception& e) {
        result.status = RunStatus::failed;
        result.error = e.what();
        result.cause = std::current_exception();
        result.trace.push_back({{"type", "error"}, {"query_id", query.id}, {"message", result.error}});
        spdlog::warn("query '{}' failed: {}", query.id, result.error);
    }
    finalize(result);
    return result;
}

PnRResult run_pnr(const QueryRecord& query, ToolRetriever& pipeline) { return pipeline.retrieve(query); }

namespace {

PnRResult single_step_result(const QueryRecord& query, std::vector<ScoredId> ranked, const char* kind) {
    PnRResult result;
    result.query_id = query.id;
    StepRecord step;
    step.sub_query = {query.text, 1, query.id};
    step.candidates = {query.text, ranked, ranked.size()};
    for (const auto& r : ranked) {
        step.shortlist.tool_ids.push_back(r.id);
        step.reranked.push_back({r.id, -r.score});
    }
    step.shortlist.sub_query = query.text;
    step.shortlist.source_ids = step.shortlist.tool_ids;
    result.steps.push_back(step);
    finalize(result);
    json rec = step_record(query.id, result.steps.back());
    rec["retriever"] = kind;
    result.trace.push_back(std::move(rec));
    return result;
}

}  // namespace

DenseBaseline::DenseBaseline(ToolCatalog catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                             std::size_t k)
    : catalog_(std::move(catalog)), embedder_(std::move(embedder)), k_(k) {
    index_ = dense::build_index(catalog_, *embedder_);
}

PnRResult DenseBaseline::retrieve(const QueryRecord& query) {
    try {
        return single_step_result(query, dense::dense_topk(index_, embedder_->embed(query.text), k_), "dense");
    } catch (const std::exception& e) {
        PnRResult r;
        r.query_id = query.id;
        r.status = RunStatus::failed;
        r.error = e.what();
        r.cause = std::current_exception();
        return r;
    }
}

Bm25Baseline::Bm25Baseline(ToolCatalog catalog, std::size_t k, text::Bm25Params params)
    : catalog_(std::move(catalog)), k_(k) {
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& [id, tool] : catalog_.tools()) docs.emplace_back(id, tool.description);
    index_ = text::Bm25Index::build(docs, params);
}

PnRResult Bm25Baseline::retrieve(const QueryRecord& query) {
    return single_step_result(query, index_.topk(query.text, k_), "bm25");
}

std::shared_ptr<const llm::PairScorer> default_scorer(const ToolCatalog& catalog) {
    std::vector<std::string> corpus;
    for (const auto& [_, tool] : catalog.tools()) corpus.push_back(tool.description);
    return std::make_shared<llm::QueryAdaptedLmScorer>(llm::NGramLm::train(corpus, 2), 1);
}

PnrPipeline make_default_pipeline(const ToolCatalog& catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                                  std::shared_ptr<llm::LlmProvider> llm, PipelineConfig config,
                                  std::optional<train::ProjectionHead> head) {
    PnrPipeline p(catalog, std::move(embedder), std::move(llm), default_scorer(catalog), config, std::move(head));
    p.refit_scorer_with(default_scorer);
    return p;
}

std::string serialize_trace(const PnRResult& result) {
    std::string out;
    for (const auto& rec : result.trace) {
        out += rec.dump();
        out += '\n';
    }
    json summary = {{"type", "result"},
                    {"query_id", result.query_id},
                    {"status", to_string(result.status)},
                    {"tools", result.tools},
                    {"ranking", result.ranking},
                    {"hit_counts", result.hit_counts}};
    if (!result.error.empty()) summary["error"] = result.error;
    out += summary.dump();
    out += '\n';
    return out;
}

}  // namespace toolret::pipeline
