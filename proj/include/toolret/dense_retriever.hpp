#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/text_analysis.hpp"
#include "toolret/trainer.hpp"
#include "toolret/util.hpp"

namespace toolret::dense {

using text::ScoredId;

// Unit-norm embedding. Construction normalizes; an all-zero input is rejected.
class EmbeddingVector {
public:
    static EmbeddingVector normalized(Eigen::VectorXd raw);

    const Eigen::VectorXd& values() const { return values_; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }

    bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

private:
    Eigen::VectorXd values_;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string provider_id() const = 0;
    virtual std::size_t dimension() const = 0;
    // Throws ProviderError when the text cannot be embedded.
    virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Network-free embedder: each token adds 1 to bucket fnv1a64(token) mod dim, then
/// the count vector is L2-normalized. Texts without tokens are rejected.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dim = 512);

    std::string provider_id() const override;
    std::size_t dimension() const override { return dim_; }
    EmbeddingVector embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

struct RemoteEmbeddingConfig {
    std::string url;                 // e.g. http://localhost:8080/v1/embeddings
    std::string model;
    std::size_t dimension = 0;
    std::string token_env;           // environment variable holding the bearer token
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds backoff{250};
    int attempts = 3;
    int max_in_flight = 4;           // at most 64
};

/// HTTP embedding client. Request: {"model", "input": [text]}. Accepts replies shaped
/// {"data": [{"embedding": [...]}]}, {"embeddings": [[...]]} or {"embedding": [...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string provider_id() const override { return "remote:" + config_.model; }
    std::size_t dimension() const override { return config_.dimension; }
    EmbeddingVector embed(std::string_view text) const override;

private:
    RemoteEmbeddingConfig config_;
    mutable std::counting_semaphore<64> in_flight_;
};

struct IndexEntry {
    std::string tool_id;
    Eigen::VectorXd vector;  // projected when the index carries a head
};

struct DenseIndex {
    std::vector<IndexEntry> entries;  // ascending tool id
    std::uint64_t catalog_version = 0;
    std::string catalog_fingerprint;
    std::string provider_id;
    std::size_t dim = 0;
    std::optional<train::ProjectionHead> head;

    bool fresh_for(const ToolCatalog& catalog) const {
        return catalog_version == catalog.version() && catalog_fingerprint == catalog.fingerprint();
    }
    // Applies the head (if any) to a query embedding.
    Eigen::VectorXd project(const EmbeddingVector& v) const;
};

class IndexBuildError : public ProviderError {
public:
    IndexBuildError(std::string tool_id, const std::string& what)
        : ProviderError("embedding failed for tool '" + tool_id + "': " + what), tool_id_(std::move(tool_id)) {}
    const std::string& tool_id() const { return tool_id_; }

private:
    std::string tool_id_;
};

DenseIndex build_index(const ToolCatalog& catalog, const EmbeddingProvider& provider,
                       std::optional<train::ProjectionHead> head = std::nullopt);

// Re-embeds one tool from `catalog` and restamps the index with its version.
DenseIndex update_entry(const DenseIndex& index, const ToolCatalog& catalog, const std::string& tool_id,
                        const EmbeddingProvider& provider);

// Exhaustive dot-product ranking (cosine without a head); ties by ascending id.
std::vector<ScoredId> dense_topk(const DenseIndex& index, const EmbeddingVector& query, std::size_t k);

std::string serialize_index(const DenseIndex& index);
DenseIndex parse_index(const std::string& content);
void save_index(const DenseIndex& index, const std::string& path);
DenseIndex load_index(const std::string& path);

}  // namespace toolret::dense
