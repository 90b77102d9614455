#include "toolret/llm_gateway.hpp"

#include <cctype>
#include <cmath>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "http_client.hpp"
#include "toolret/text_analysis.hpp"

namespace toolret::llm {

using nlohmann::json;

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::planner: return "planner";
        case TemplateId::predictor: return "predictor";
        case TemplateId::entity_filter: return "entity_filter";
        case TemplateId::functionality_assessment: return "functionality_assessment";
        case TemplateId::edit_ground: return "edit_ground";
    }
    return "unknown";
}

TemplateId parse_template_id(const std::string& name) {
    for (auto id : {TemplateId::planner, TemplateId::predictor, TemplateId::entity_filter,
                    TemplateId::functionality_assessment, TemplateId::edit_ground})
        if (to_string(id) == name) return id;
    throw ValidationError("unknown template id '" + name + "'");
}

namespace {

const std::string kPlannerBody =
    R"(You are a planner that breaks a complex user request into simple sub-queries. Each sub-query should be answerable with a single tool and should cover one aspect of the request that the earlier sub-queries have not covered yet.

Example
Request: I want romantic songs for my playlist and the weather in Paris this weekend.
Sub-queries so far:
1. search for romantic songs to add to a playlist
Next sub-query: get the weekend weather forecast for a city

Request: {query}
Sub-queries so far:
{history}
{retrieved}
{task})";

const std::string kPredictorBody =
    R"(You select tools for a task. Given a sub-query and candidate tools with their descriptions, list the names of the tools that are relevant to the sub-query, one name per line. If no tool is relevant, answer "none".

Example
Sub-query: convert 100 US dollars to euros
Candidate tools:
1. Currency Converter: converts amounts between currencies using daily exchange rates
2. Stock Quotes: returns real-time prices for listed stocks
Relevant tools:
Currency Converter

Sub-query: {sub_query}
Candidate tools:
{tools}
Relevant tools:)";

const std::string kEntityFilterBody =
    R"(Rewrite the user query so that it keeps its intent but no longer mentions specific entities such as names, identifiers, numbers, dates or places. Replace each entity with a generic phrase. Answer with the rewritten query only.

Example
Query: download the track with ID '987654' and show its credits
Rewritten: download a specific track by its track ID and show its credits

Query: {query}
Rewritten:)";

const std::string kFunctionalityBody =
    R"(A tool failed to be retrieved for the user queries below. Using the tool's name and description, explain why the tool could be related to and helpful for each query. Write one reason per line.

Tool name: {tool_name}
Tool description: {description}
User queries:
{queries}
Reasons:)";

const std::string kEditGroundBody =
    R"(Improve a tool description so that it is grounded in how users actually need the tool. Keep every fact in the original description, and add the concrete capabilities and use cases suggested by the user queries and the reasons. Do not mention specific entities from the queries. Answer with the new description only.

Example
Tool name: LANDR Mastering v1
Original description: Instant and customized audio mastering powered by an AI-driven mastering engine.
User queries:
download a specific track by its track ID
fetch the credits of a track
Reasons:
the tool manages tracks that users upload for mastering
New description: A comprehensive audio mastering solution for music producers. It offers instant, customizable AI-driven mastering, lets users download a specific track by its track ID, and fetches track credits for their productions.

Tool name: {tool_name}
Original description: {description}
User queries:
{queries}
Reasons:
{reasons}
New description:)";

}  // namespace

const PromptTemplate& builtin_template(TemplateId id) {
    static const std::map<TemplateId, PromptTemplate> templates = {
        {TemplateId::planner,
         {TemplateId::planner,
          kPlannerBody,
          {"query", "history"},
          {{"retrieved", ""}, {"task", "Next sub-query:"}}}},
        {TemplateId::predictor, {TemplateId::predictor, kPredictorBody, {"sub_query", "tools"}, {}}},
        {TemplateId::entity_filter, {TemplateId::entity_filter, kEntityFilterBody, {"query"}, {}}},
        {TemplateId::functionality_assessment,
         {TemplateId::functionality_assessment, kFunctionalityBody, {"tool_name", "description", "queries"}, {}}},
        {TemplateId::edit_ground,
         {TemplateId::edit_ground, kEditGroundBody, {"tool_name", "description", "queries", "reasons"}, {}}},
    };
    return templates.at(id);
}

Variables effective_variables(const PromptTemplate& tmpl, const Variables& vars) {
    for (const auto& name : tmpl.required_vars)
        if (!vars.count(name)) throw MissingVariableError(name);
    Variables out = tmpl.defaults;
    for (const auto& [k, v] : vars) out[k] = v;
    return out;
}

std::string render(const PromptTemplate& tmpl, const Variables& vars) {
    const Variables all = effective_variables(tmpl, vars);
    const std::string& body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() && (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '_')) ++j;
            if (j < body.size() && body[j] == '}' && j > i + 1) {
                const std::string name = body.substr(i + 1, j - i - 1);
                auto it = all.find(name);
                if (it == all.end()) throw MissingVariableError(name);
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += body[i++];
    }
    return out;
}

std::string render(TemplateId id, const Variables& vars) { return render(builtin_template(id), vars); }

std::string canonical_key(TemplateId id, const Variables& vars) {
    std::string key = to_string(id);
    for (const auto& [name, value] : effective_variables(builtin_template(id), vars)) {  // std::map iterates sorted
        key += '\x1f';
        key += name;
        key += '\x1f';
        key += value;
    }
    return key;
}

std::string complete(LlmProvider& provider, TemplateId id, const Variables& vars, const DecodeParams& params) {
    const auto& tmpl = builtin_template(id);
    LlmRequest request{id, effective_variables(tmpl, vars), render(tmpl, vars), params};
    return provider.complete(request);
}

void Transcript::add(TemplateId id, std::string key, std::string response) {
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        if (it->second.response != response)
            throw ValidationError("transcript key recorded twice with different responses (" + to_string(id) + ")");
        return;
    }
    std::string k = key;
    entries_.emplace(std::move(k), TranscriptEntry{id, std::move(key), std::move(response)});
}

const std::string* Transcript::find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second.response;
}

void Transcript::merge(const Transcript& other) {
    for (const auto& [key, e] : other.entries_) add(e.template_id, e.key, e.response);
}

std::string serialize_transcript(const Transcript& transcript) {
    std::string out;
    for (const auto& [key, e] : transcript.entries()) {
        json obj = {{"template_id", to_string(e.template_id)}, {"key", e.key}, {"response", e.response}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

Transcript parse_transcript(const std::string& content) {
    Transcript t;
    auto lines = split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            json obj = json::parse(lines[i]);
            t.add(parse_template_id(obj.at("template_id").get<std::string>()), obj.at("key").get<std::string>(),
                  obj.at("response").get<std::string>());
        } catch (const json::exception& e) {
            throw ValidationError("transcript line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return t;
}

Transcript load_transcript(const std::string& path) { return parse_transcript(read_file(path)); }

void save_transcript(const Transcript& transcript, const std::string& path) {
    write_file(path, serialize_transcript(transcript));
}

namespace {

std::string printable_key(const std::string& key) {
    std::string out;
    for (char c : key) out += (c == '\x1f') ? '|' : c;
    if (out.size() > 200) out = out.substr(0, 200) + "...";
    return out;
}

}  // namespace

TranscriptMissError::TranscriptMissError(TemplateId id, std::string key)
    : ProviderError("transcript miss for template '" + to_string(id) + "', key '" + printable_key(key) + "'"),
      id_(id),
      key_(std::move(key)) {}

std::string ScriptedProvider::complete(const LlmRequest& request) {
    const auto key = canonical_key(request.template_id, request.variables);
    if (const auto* response = transcript_.find(key)) return *response;
    ++misses_;
    if (strict_) throw TranscriptMissError(request.template_id, key);
    spdlog::warn("unscripted {} request; answering {}", to_string(request.template_id), kUnscripted);
    return std::string(kUnscripted);
}

std::string RecordingProvider::complete(const LlmRequest& request) {
    std::string response = inner_.complete(request);
    std::lock_guard lock(mutex_);
    transcript_.add(request.template_id, canonical_key(request.template_id, request.variables), response);
    return response;
}

RemoteChatProvider::RemoteChatProvider(RemoteChatConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
    if (config_.url.empty()) throw ValidationError("remote chat: url is required");
    if (config_.model.empty()) throw ValidationError("remote chat: model is required");
}

std::string RemoteChatProvider::complete(const LlmRequest& request) {
    json body = {{"model", config_.model},
                 {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
                 {"temperature", request.params.temperature},
                 {"max_tokens", request.params.max_tokens},
                 {"seed", request.params.seed}};
    std::map<std::string, std::string> headers;
    if (auto token = detail::token_from_env(config_.token_env); !token.empty())
        headers["Authorization"] = "Bearer " + token;
    detail::HttpOptions opts{config_.timeout, config_.attempts, config_.backoff};

    in_flight_.acquire();
    json reply;
    try {
        reply = detail::post_json(config_.url, body, headers, opts);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();

    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const auto& choice = reply["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string())
            return choice["message"]["content"].get<std::string>();
        if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
    }
    if (reply.contains("text") && reply["text"].is_string()) return reply["text"].get<std::string>();
    throw ProviderError("chat reply has no text");
}

NGramLm NGramLm::train(const std::vector<std::string>& corpus, std::size_t order,
                       const std::vector<std::string>& extra_vocabulary) {
    if (order < 1) throw ValidationError("n-gram order must be at least 1");
    NGramLm lm;
    lm.order_ = order;
    lm.vocabulary_.insert(std::string(kUnknown));
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& doc : corpus) {
        tokenized.push_back(text::tokenize(doc));
        lm.vocabulary_.insert(tokenized.back().begin(), tokenized.back().end());
    }
    for (const auto& w : extra_vocabulary)
        for (auto& tok : text::tokenize(w)) lm.vocabulary_.insert(std::move(tok));
    for (const auto& tokens : tokenized) lm.add_text(tokens, 1);
    return lm;
}

NGramLm NGramLm::adapted(std::string_view text, std::size_t weight) const {
    NGramLm out = *this;
    auto tokens = text::tokenize(text);
    out.vocabulary_.insert(tokens.begin(), tokens.end());
    out.add_text(tokens, weight);
    return out;
}

std::string NGramLm::context_key(const std::vector<std::string>& context) {
    std::string key;
    for (const auto& t : context) {
        key += t;
        key += '\x1f';
    }
    return key;
}

std::string NGramLm::map_token(const std::string& token) const {
    return vocabulary_.count(token) ? token : std::string(kUnknown);
}

void NGramLm::add_text(const std::vector<std::string>& tokens, std::size_t weight) {
    if (weight == 0) return;
    std::vector<std::string> context(order_ - 1, std::string(kBegin));
    for (const auto& raw : tokens) {
        const std::string tok = map_token(raw);
        const std::string key = context_key(context);
        counts_[key][tok] += weight;
        context_totals_[key] += weight;
        if (!context.empty()) {
            context.erase(context.begin());
            context.push_back(tok);
        }
    }
}

double NGramLm::probability(const std::vector<std::string>& context, const std::string& token) const {
    std::vector<std::string> ctx;
    for (const auto& t : context) ctx.push_back(t == kBegin ? t : map_token(t));
    const std::string key = context_key(ctx);
    const std::string tok = map_token(token);
    std::size_t pair = 0, total = 0;
    if (auto it = counts_.find(key); it != counts_.end()) {
        if (auto jt = it->second.find(tok); jt != it->second.end()) pair = jt->second;
        total = context_totals_.at(key);
    }
    return (static_cast<double>(pair) + 1.0) / (static_cast<double>(total) + static_cast<double>(vocabulary_.size()));
}

double NGramLm::sequence_neg_logprob(std::string_view text) const {
    auto tokens = text::tokenize(text);
    std::vector<std::string> context(order_ - 1, std::string(kBegin));
    double total = 0.0;
    for (const auto& raw : tokens) {
        const std::string tok = map_token(raw);
        total -= std::log(probability(context, tok));
        if (!context.empty()) {
            context.erase(context.begin());
            context.push_back(tok);
        }
    }
    return total;
}

double sequence_neg_logprob(const NGramLm& lm, std::string_view text) { return lm.sequence_neg_logprob(text); }

namespace {

std::vector<double> score_with(const NGramLm& lm, std::string_view sub_query,
                               const std::vector<std::string>& descriptions) {
    std::vector<double> out;
    out.reserve(descriptions.size());
    for (const auto& d : descriptions) {
        std::string joined(sub_query);
        joined += kPairSeparator;
        joined += d;
        out.push_back(lm.sequence_neg_logprob(joined));
    }
    return out;
}

}  // namespace

std::vector<double> FixedLmScorer::score(std::string_view sub_query,
                                         const std::vector<std::string>& descriptions) const {
    return score_with(lm_, sub_query, descriptions);
}

std::vector<double> QueryAdaptedLmScorer::score(std::string_view sub_query,
                                                const std::vector<std::string>& descriptions) const {
    return score_with(base_.adapted(sub_query, query_weight_), sub_query, descriptions);
}

}  // namespace toolret::llm
