#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "toolret/util.hpp"

namespace toolret::llm {

enum class TemplateId { planner, predictor, entity_filter, functionality_assessment, edit_ground };

std::string to_string(TemplateId id);
TemplateId parse_template_id(const std::string& name);

using Variables = std::map<std::string, std::string>;

struct PromptTemplate {
    TemplateId id;
    std::string body;  // placeholders are {name}; any other brace is literal
    std::vector<std::string> required_vars;
    Variables defaults;  // optional variables and their default values
};

// The five shipped templates.
const PromptTemplate& builtin_template(TemplateId id);

class MissingVariableError : public ValidationError {
public:
    explicit MissingVariableError(const std::string& name)
        : ValidationError("missing template variable '" + name + "'"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

// Defaults merged under the caller's variables.
Variables effective_variables(const PromptTemplate& tmpl, const Variables& vars);

// Single-pass substitution: substituted values are never re-scanned.
std::string render(const PromptTemplate& tmpl, const Variables& vars);
std::string render(TemplateId id, const Variables& vars);

// template_id, then sorted (name, value) pairs, all joined with U+001F.
std::string canonical_key(TemplateId id, const Variables& vars);

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 512;
    std::uint64_t seed = 0;
};

struct LlmRequest {
    TemplateId template_id;
    Variables variables;  // effective variables (defaults applied)
    std::string prompt;   // rendered text
    DecodeParams params;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const LlmRequest& request) = 0;
};

// Renders `id` with `vars` and sends it to the provider.
std::string complete(LlmProvider& provider, TemplateId id, const Variables& vars, const DecodeParams& params = {});

struct TranscriptEntry {
    TemplateId template_id;
    std::string key;
    std::string response;
};

class Transcript {
public:
    // Later entries with an existing key must carry the same response.
    void add(TemplateId id, std::string key, std::string response);
    const std::string* find(const std::string& key) const;
    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, TranscriptEntry>& entries() const { return entries_; }
    void merge(const Transcript& other);

private:
    std::map<std::string, TranscriptEntry> entries_;
};

// One JSON object per line: {"template_id", "key", "response"}; sorted by key.
std::string serialize_transcript(const Transcript& transcript);
Transcript parse_transcript(const std::string& content);
Transcript load_transcript(const std::string& path);
void save_transcript(const Transcript& transcript, const std::string& path);

class TranscriptMissError : public ProviderError {
public:
    TranscriptMissError(TemplateId id, std::string key);
    TemplateId template_id() const { return id_; }
    const std::string& key() const { return key_; }

private:
    TemplateId id_;
    std::string key_;
};

inline constexpr std::string_view kUnscripted = "UNSCRIPTED";

/// Replays a transcript. In strict mode a missing key throws TranscriptMissError;
/// otherwise the reply is kUnscripted.
class ScriptedProvider final : public LlmProvider {
public:
    explicit ScriptedProvider(Transcript transcript, bool strict = true)
        : transcript_(std::move(transcript)), strict_(strict) {}

    std::string complete(const LlmRequest& request) override;
    std::size_t misses() const { return misses_; }

private:
    Transcript transcript_;
    bool strict_;
    std::size_t misses_ = 0;
};

// Answers through a callback. Used to script behavior programmatically.
class FunctionProvider final : public LlmProvider {
public:
    using Fn = std::function<std::string(const LlmRequest&)>;
    explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const LlmRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

// Forwards to an inner provider and records every exchange as a transcript entry.
class RecordingProvider final : public LlmProvider {
public:
    explicit RecordingProvider(LlmProvider& inner) : inner_(inner) {}
    std::string complete(const LlmRequest& request) override;
    const Transcript& transcript() const { return transcript_; }

private:
    LlmProvider& inner_;
    Transcript transcript_;
    std::mutex mutex_;
};

struct RemoteChatConfig {
    std::string url;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string token_env;
    std::chrono::milliseconds timeout{60000};
    std::chrono::milliseconds backoff{500};
    int attempts = 3;
    int max_in_flight = 4;
};

/// Chat-completion client. Request: {"model", "messages": [{"role": "user",
/// "content"}], "temperature", "max_tokens", "seed"}. The reply text is taken from
/// choices[0].message.content, choices[0].text or a top-level "text".
class RemoteChatProvider final : public LlmProvider {
public:
    explicit RemoteChatProvider(RemoteChatConfig config);
    std::string complete(const LlmRequest& request) override;

private:
    RemoteChatConfig config_;
    std::counting_semaphore<64> in_flight_;
};

/// Add-one smoothed n-gram model. Tokens outside the vocabulary map to "<unk>";
/// contexts are padded with "<s>".
class NGramLm {
public:
    static constexpr std::string_view kUnknown = "<unk>";
    static constexpr std::string_view kBegin = "<s>";

    static NGramLm train(const std::vector<std::string>& corpus, std::size_t order = 2,
                         const std::vector<std::string>& extra_vocabulary = {});

    // Copy with `text` added `weight` times to the counts. The vocabulary grows by
    // the new tokens.
    NGramLm adapted(std::string_view text, std::size_t weight = 1) const;

    std::size_t order() const { return order_; }
    std::size_t vocabulary_size() const { return vocabulary_.size(); }
    const std::set<std::string>& vocabulary() const { return vocabulary_; }

    // p(token | context); context holds the preceding order-1 tokens.
    double probability(const std::vector<std::string>& context, const std::string& token) const;

    // Sum over tokens of -ln p(token | preceding tokens); 0 for an empty text.
    double sequence_neg_logprob(std::string_view text) const;

private:
    void add_text(const std::vector<std::string>& tokens, std::size_t weight);
    std::string map_token(const std::string& token) const;
    static std::string context_key(const std::vector<std::string>& context);

    std::size_t order_ = 2;
    std::set<std::string> vocabulary_;
    std::map<std::string, std::map<std::string, std::size_t>> counts_;  // context -> token -> count
    std::map<std::string, std::size_t> context_totals_;
};

double sequence_neg_logprob(const NGramLm& lm, std::string_view text);

inline constexpr std::string_view kPairSeparator = " [SEP] ";

// Scores (sub-query, description) pairs by -ln P of "sub_query [SEP] description";
// lower is more likely.
class PairScorer {
public:
    virtual ~PairScorer() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> score(std::string_view sub_query,
                                      const std::vector<std::string>& descriptions) const = 0;
};

// Scores with a fixed model.
class FixedLmScorer final : public PairScorer {
public:
    explicit FixedLmScorer(NGramLm lm) : lm_(std::move(lm)) {}
    std::string name() const override { return "fixed-ngram"; }
    std::vector<double> score(std::string_view sub_query,
                              const std::vector<std::string>& descriptions) const override;

private:
    NGramLm lm_;
};

/// Scores with the base model adapted to the sub-query (the sub-query text is added
/// to the counts `query_weight` times), so descriptions that share n-grams with
/// the sub-query become more likely.
class QueryAdaptedLmScorer final : public PairScorer {
public:
    QueryAdaptedLmScorer(NGramLm base, std::size_t query_weight = 1)
        : base_(std::move(base)), query_weight_(query_weight) {}
    std::string name() const override { return "query-adapted-ngram"; }
    std::vector<double> score(std::string_view sub_query,
                              const std::vector<std::string>& descriptions) const override;

private:
    NGramLm base_;
    std::size_t query_weight_;
};

}  // namespace toolret::llm
