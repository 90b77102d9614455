#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/dense_retriever.hpp"
#include "toolret/eg_optimizer.hpp"
#include "toolret/evaluator.hpp"
#include "toolret/llm_gateway.hpp"
#include "toolret/retrieval_pipeline.hpp"

// Deterministic desk-scale suite: a 60-tool catalog over six categories, 30
// multi-aspect queries, a keyword-poor catalog variant for description editing, and
// the scripted LLM transcripts that replay every call the suite's scenarios make.
//
// Transcripts are produced by record-and-replay: a rule-based policy stands in for
// the LLM while the real pipeline runs, and a RecordingProvider captures each call.
// Tests replay them with a strict ScriptedProvider.
namespace toolret::fixtures {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::size_t kToolCount = 60;
inline constexpr std::size_t kQueryCount = 30;
inline constexpr std::size_t kPoorToolCount = 10;
inline constexpr int kEgRounds = 5;

struct Aspect {
    std::string tool_id;
    std::string sub_query;   // what a decomposing planner would ask
    std::string paraphrase;  // restatement of the same need
};

// Everything the policy knows. Built from the seed alone.
struct World {
    std::uint64_t seed = kDefaultSeed;
    ToolCatalog catalog;          // well-described tools
    ToolCatalog variant_catalog;  // same tools, kPoorToolCount of them keyword-poor
    std::vector<QueryRecord> queries;  // Q1..Q30, splits assigned
    std::map<std::string, std::vector<Aspect>> aspects;   // query text -> aspects
    std::map<std::string, std::string> generic_queries;   // query text -> entity-free text
    std::map<std::string, std::string> enriched;          // tool name -> rewrite for poor tools
    std::vector<std::string> poor_tool_ids;
    std::string damaged_tool_id;  // healthy dev tool used for the rejected-rewrite scenario
    std::string damaging_text;
};

World build_world(std::uint64_t seed = kDefaultSeed);

// Rule-based stand-in for the LLM, used only to record transcripts.
std::unique_ptr<llm::LlmProvider> make_policy(const World& world);

struct SuiteConfig {
    std::uint64_t split_seed = kDefaultSeed;
    std::uint64_t plan_seed = kDefaultSeed;
    std::size_t pool_size = 20;
    std::size_t max_steps = 6;
    std::size_t batch_size = 4;
    std::size_t embedding_dim = 512;
    std::size_t sample_size = 100;
    std::uint64_t eval_seed = kDefaultSeed;
    int max_rounds = kEgRounds;

    pipeline::PipelineConfig pipeline_config() const;
    std::string to_conf() const;  // flat key=value, as read by the CLI
};

std::shared_ptr<const dense::EmbeddingProvider> make_embedder(const SuiteConfig& config);

// Builds the pipeline exactly as the CLI does: hash embedder, default scorer trained
// on `catalog`'s current descriptions.
pipeline::PnrPipeline make_pipeline(const ToolCatalog& catalog, std::shared_ptr<llm::LlmProvider> llm,
                                    const SuiteConfig& config);

struct BaseOutcome {
    std::vector<pipeline::PnRResult> pnr;       // per query, Q order
    std::vector<pipeline::PnRResult> one_shot;  // dense top-5 over the full query
    double pnr_recall = 0.0;
    double one_shot_recall = 0.0;
    eg::EgResult eg;  // E&G on the well-described catalog; nothing to fix
    // rejected-rewrite scenario
    std::string catalog_before;
    std::string catalog_after;
    std::string index_before;
    std::string index_after;
    eg::GateResult damaging_gate;
    double damaged_tool_recall = 0.0;
};

BaseOutcome run_base_scenario(const ToolCatalog& catalog, const std::vector<QueryRecord>& queries,
                              const World& world, std::shared_ptr<llm::LlmProvider> llm,
                              const SuiteConfig& config);

struct VariantOutcome {
    eval::MetricsReport dev_before;
    eg::EgResult eg;
    DescriptionCache cache;
    eval::MetricsReport dev_after;     // fresh pipeline over the cached descriptions
    eval::MetricsReport dev_reverted;  // fresh pipeline over the original descriptions
};

VariantOutcome run_variant_scenario(const ToolCatalog& variant, const std::vector<QueryRecord>& queries,
                                    std::shared_ptr<llm::LlmProvider> llm, const SuiteConfig& config);

struct GeneratedSuite {
    std::string root;
    std::string checksum;
    nlohmann::json expected;
};

// Writes base/ and eg_variant/ under `root` (tools, queries, per-template transcripts,
// conf, expected values) and CHECKSUM. Throws if the suite lacks the properties it
// exists to exercise.
GeneratedSuite generate_fixture(const std::string& root, std::uint64_t seed = kDefaultSeed);

// Hash over every suite file except CHECKSUM, in sorted path order.
std::string suite_checksum(const std::string& root);

// Loads and merges every *.jsonl in a transcript directory.
llm::Transcript load_transcript_dir(const std::string& dir);
void save_transcript_dir(const llm::Transcript& transcript, const std::string& dir);

}  // namespace toolret::fixtures
