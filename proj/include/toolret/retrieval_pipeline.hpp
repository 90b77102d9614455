#pragma once

#include <exception>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/dense_retriever.hpp"
#include "toolret/llm_gateway.hpp"
#include "toolret/planner.hpp"

namespace toolret::pipeline {

using text::ScoredId;

inline constexpr std::size_t kShortlistSource = 5;  // reranked tools shown to the predictor

class StaleIndexError : public Error {
public:
    using Error::Error;
};

struct PipelineConfig {
    std::size_t pool_size = 20;  // dense candidates before reranking
    plan::PlanConfig plan;
};

struct CandidateSet {
    std::string sub_query;
    std::vector<ScoredId> ranked;  // descending retriever score
    std::size_t pool_size = 0;
};

struct RerankedTool {
    std::string id;
    double neg_logprob = 0.0;
};

struct Shortlist {
    std::string sub_query;
    std::vector<std::string> tool_ids;      // subset of source_ids, in source order
    std::vector<std::string> source_ids;    // reranked top-5
    std::vector<std::string> warnings;
};

struct StepRecord {
    plan::SubQuery sub_query;
    std::vector<std::string> hypotheses;
    plan::Verdict verdict;
    CandidateSet candidates;
    std::vector<RerankedTool> reranked;  // top-5
    Shortlist shortlist;
};

enum class RunStatus { completed, exhausted, failed };
std::string to_string(RunStatus status);

struct PnRResult {
    std::string query_id;
    std::vector<StepRecord> steps;
    std::set<std::string> tools;           // union of step shortlists
    std::vector<std::string> ranking;      // tools ordered by best-step likelihood, then id
    std::map<std::string, int> hit_counts; // shortlisted in how many steps
    RunStatus status = RunStatus::completed;
    std::string error;
    std::exception_ptr cause;              // the exception behind a failed run
    std::vector<nlohmann::json> trace;     // one record per provider call and per step

    bool failed() const { return status == RunStatus::failed; }
};

// Embeds the sub-query and takes the dense top pool_size. Throws StaleIndexError if
// the index was not built from `catalog`.
CandidateSet retrieve_candidates(const dense::DenseIndex& index, const ToolCatalog& catalog,
                                 const dense::EmbeddingProvider& embedder, const std::string& sub_query,
                                 std::size_t pool_size);

// Ascending -ln P(sub_query [SEP] description), ties by id, truncated to 5.
std::vector<RerankedTool> rerank_lm(const CandidateSet& candidates, const llm::PairScorer& scorer,
                                    const ToolCatalog& catalog);

// "1. Name: description" per tool.
std::string format_tool_list(const std::vector<std::string>& tool_ids, const ToolCatalog& catalog);

// Matches names (case-insensitive, exact) against the source tools. Unmatched names
// are dropped with a warning; "none" yields an empty shortlist.
Shortlist parse_shortlist(const std::string& reply, const std::string& sub_query,
                          const std::vector<std::string>& source_ids, const ToolCatalog& catalog);

Shortlist predict_shortlist(const std::vector<std::string>& top_ids, const std::string& sub_query,
                            llm::LlmProvider& provider, const ToolCatalog& catalog);

std::set<std::string> union_tools(const std::vector<Shortlist>& shortlists);

class ToolRetriever {
public:
    virtual ~ToolRetriever() = default;
    virtual PnRResult retrieve(const QueryRecord& query) = 0;
    virtual const ToolCatalog& catalog() const = 0;
};

/// Interleaved plan-and-retrieve over a catalog snapshot and its dense index. Never
/// mutates the catalog; E&G swaps snapshots in through install().
class PnrPipeline final : public ToolRetriever {
public:
    PnrPipeline(ToolCatalog catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                std::shared_ptr<llm::LlmProvider> llm, std::shared_ptr<const llm::PairScorer> scorer,
                PipelineConfig config = {}, std::optional<train::ProjectionHead> head = std::nullopt);

    // Uses a prebuilt index; it must be fresh for `catalog`.
    PnrPipeline(ToolCatalog catalog, dense::DenseIndex index, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                std::shared_ptr<llm::LlmProvider> llm, std::shared_ptr<const llm::PairScorer> scorer,
                PipelineConfig config = {});

    PnRResult retrieve(const QueryRecord& query) override;
    const ToolCatalog& catalog() const override { return catalog_; }
    const dense::DenseIndex& index() const { return index_; }
    const dense::EmbeddingProvider& embedder() const { return *embedder_; }
    const PipelineConfig& config() const { return config_; }

    void install(ToolCatalog catalog, dense::DenseIndex index);
    void rebuild_index();

    // Refits the scorer from every installed catalog snapshot, starting now.
    using ScorerFactory = std::function<std::shared_ptr<const llm::PairScorer>(const ToolCatalog&)>;
    void refit_scorer_with(ScorerFactory factory);

private:
    ToolCatalog catalog_;
    dense::DenseIndex index_;
    std::shared_ptr<const dense::EmbeddingProvider> embedder_;
    std::shared_ptr<llm::LlmProvider> llm_;
    std::shared_ptr<const llm::PairScorer> scorer_;
    ScorerFactory scorer_factory_;
    PipelineConfig config_;
};

PnRResult run_pnr(const QueryRecord& query, ToolRetriever& pipeline);

// One-shot dense top-k over the whole query.
class DenseBaseline final : public ToolRetriever {
public:
    DenseBaseline(ToolCatalog catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder, std::size_t k = 5);
    PnRResult retrieve(const QueryRecord& query) override;
    const ToolCatalog& catalog() const override { return catalog_; }

private:
    ToolCatalog catalog_;
    dense::DenseIndex index_;
    std::shared_ptr<const dense::EmbeddingProvider> embedder_;
    std::size_t k_;
};

// One-shot BM25 top-k over tool descriptions.
class Bm25Baseline final : public ToolRetriever {
public:
    explicit Bm25Baseline(ToolCatalog catalog, std::size_t k = 5, text::Bm25Params params = {});
    PnRResult retrieve(const QueryRecord& query) override;
    const ToolCatalog& catalog() const override { return catalog_; }

private:
    ToolCatalog catalog_;
    text::Bm25Index index_;
    std::size_t k_;
};

// Bigram model over the catalog's current descriptions, adapted to each sub-query.
std::shared_ptr<const llm::PairScorer> default_scorer(const ToolCatalog& catalog);

// Pipeline whose scorer is default_scorer() refit on every installed catalog.
PnrPipeline make_default_pipeline(const ToolCatalog& catalog, std::shared_ptr<const dense::EmbeddingProvider> embedder,
                                  std::shared_ptr<llm::LlmProvider> llm, PipelineConfig config = {},
                                  std::optional<train::ProjectionHead> head = std::nullopt);

// Line-delimited trace records.
std::string serialize_trace(const PnRResult& result);

}  // namespace toolret::pipeline
