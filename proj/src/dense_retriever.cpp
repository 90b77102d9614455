#include "toolret/dense_retriever.hpp"

#include <algorithm>
#include <json.hpp>

#include "http_client.hpp"
#include "toolret/util.hpp"

namespace toolret::dense {

using nlohmann::json;

EmbeddingVector EmbeddingVector::normalized(Eigen::VectorXd raw) {
    if (!raw.allFinite()) throw ProviderError("embedding contains non-finite values");
    const double norm = raw.norm();
    if (norm == 0.0) throw ProviderError("embedding is the zero vector");
    EmbeddingVector v;
    v.values_ = raw / norm;
    return v;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("HashEmbedder dimension must be positive");
}

std::string HashEmbedder::provider_id() const { return "hash-bow-" + std::to_string(dim_); }

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
    auto tokens = text::tokenize(text);
    if (tokens.empty()) throw ProviderError("text has no tokens to embed");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& tok : tokens) counts[static_cast<Eigen::Index>(fnv1a64(tok) % dim_)] += 1.0;
    return EmbeddingVector::normalized(std::move(counts));
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
    if (config_.url.empty()) throw ValidationError("remote embedding: url is required");
    if (config_.dimension == 0) throw ValidationError("remote embedding: dimension is required");
}

EmbeddingVector RemoteEmbeddingProvider::embed(std::string_view text) const {
    json body = {{"model", config_.model}, {"input", json::array({std::string(text)})}};
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

    const json* vec = nullptr;
    if (reply.contains("data") && reply["data"].is_array() && !reply["data"].empty())
        vec = &reply["data"][0]["embedding"];
    else if (reply.contains("embeddings") && reply["embeddings"].is_array() && !reply["embeddings"].empty())
        vec = &reply["embeddings"][0];
    else if (reply.contains("embedding"))
        vec = &reply["embedding"];
    if (!vec || !vec->is_array()) throw ProviderError("embedding reply has no vector");
    if (vec->size() != config_.dimension)
        throw ProviderError("embedding reply has dimension " + std::to_string(vec->size()) + ", expected " +
                            std::to_string(config_.dimension));
    Eigen::VectorXd raw(static_cast<Eigen::Index>(vec->size()));
    for (std::size_t i = 0; i < vec->size(); ++i) {
        if (!(*vec)[i].is_number()) throw ProviderError("embedding reply contains a non-number");
        raw[static_cast<Eigen::Index>(i)] = (*vec)[i].get<double>();
    }
    return EmbeddingVector::normalized(std::move(raw));
}

Eigen::VectorXd DenseIndex::project(const EmbeddingVector& v) const {
    if (v.dim() != dim)
        throw ValidationError("query dimension " + std::to_string(v.dim()) + " does not match index dimension " +
                              std::to_string(dim));
    return head ? head->apply(v.values()) : v.values();
}

namespace {

Eigen::VectorXd embed_tool(const Tool& tool, const EmbeddingProvider& provider,
                           const std::optional<train::ProjectionHead>& head) {
    try {
        auto v = provider.embed(tool.description);
        if (v.dim() != provider.dimension())
            throw ProviderError("provider returned dimension " + std::to_string(v.dim()));
        return head ? head->apply(v.values()) : v.values();
    } catch (const ProviderError& e) {
        throw IndexBuildError(tool.id, e.what());
    }
}

}  // namespace

DenseIndex build_index(const ToolCatalog& catalog, const EmbeddingProvider& provider,
                       std::optional<train::ProjectionHead> head) {
    if (head && head->dim() != provider.dimension())
        throw ValidationError("projection head dimension " + std::to_string(head->dim()) +
                              " does not match provider dimension " + std::to_string(provider.dimension()));
    DenseIndex index;
    index.catalog_version = catalog.version();
    index.catalog_fingerprint = catalog.fingerprint();
    index.provider_id = provider.provider_id();
    index.dim = provider.dimension();
    index.head = std::move(head);
    index.entries.reserve(catalog.size());
    for (const auto& [id, tool] : catalog.tools()) index.entries.push_back({id, embed_tool(tool, provider, index.head)});
    return index;
}

DenseIndex update_entry(const DenseIndex& index, const ToolCatalog& catalog, const std::string& tool_id,
                        const EmbeddingProvider& provider) {
    DenseIndex out = index;
    auto it = std::find_if(out.entries.begin(), out.entries.end(),
                           [&](const IndexEntry& e) { return e.tool_id == tool_id; });
    if (it == out.entries.end()) throw NotFoundError("tool '" + tool_id + "' is not in the index");
    it->vector = embed_tool(catalog.at(tool_id), provider, out.head);
    out.catalog_version = catalog.version();
    out.catalog_fingerprint = catalog.fingerprint();
    return out;
}

std::vector<ScoredId> dense_topk(const DenseIndex& index, const EmbeddingVector& query, std::size_t k) {
    const Eigen::VectorXd q = index.project(query);
    std::vector<ScoredId> scored;
    scored.reserve(index.entries.size());
    for (const auto& e : index.entries) scored.push_back({e.tool_id, q.dot(e.vector)});
    const std::size_t n = std::min(k, scored.size());
    auto better = [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    scored.resize(n);
    return scored;
}

std::string serialize_index(const DenseIndex& index) {
    json entries = json::array();
    for (const auto& e : index.entries)
        entries.push_back({{"tool_id", e.tool_id}, {"vector", std::vector<double>(e.vector.begin(), e.vector.end())}});
    json obj = {{"catalog_version", index.catalog_version},
                {"catalog_fingerprint", index.catalog_fingerprint},
                {"provider_id", index.provider_id},
                {"dim", index.dim},
                {"entries", std::move(entries)}};
    if (index.head) obj["head"] = train::serialize_head(*index.head);
    return obj.dump() + "\n";
}

DenseIndex parse_index(const std::string& content) {
    try {
        json obj = json::parse(content);
        DenseIndex index;
        index.catalog_version = obj.at("catalog_version").get<std::uint64_t>();
        index.catalog_fingerprint = obj.at("catalog_fingerprint").get<std::string>();
        index.provider_id = obj.at("provider_id").get<std::string>();
        index.dim = obj.at("dim").get<std::size_t>();
        if (obj.contains("head")) index.head = train::parse_head(obj["head"].get<std::string>());
        for (const auto& e : obj.at("entries")) {
            auto values = e.at("vector").get<std::vector<double>>();
            if (values.size() != index.dim) throw ValidationError("index entry has wrong dimension");
            index.entries.push_back(
                {e.at("tool_id").get<std::string>(),
                 Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))});
        }
        return index;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed index file: ") + e.what());
    }
}

void save_index(const DenseIndex& index, const std::string& path) { write_file(path, serialize_index(index)); }

DenseIndex load_index(const std::string& path) { return parse_index(read_file(path)); }

}  // namespace toolret::dense
