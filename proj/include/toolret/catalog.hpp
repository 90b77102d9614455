#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toolret {

struct DescriptionRevision {
    int round = 0;
    std::string text;
    double dev_recall = 0.0;

    bool operator==(const DescriptionRevision&) const = default;
};

struct Tool {
    std::string id;
    std::string name;
    std::string category;
    std::string description;       // current text, the one retrievers index
    std::string base_description;  // original human-written text
    std::vector<DescriptionRevision> history;  // append-only

    bool operator==(const Tool&) const = default;
};

/// Immutable snapshot of the tool collection. Mutating operations return a new
/// snapshot whose version is strictly greater than the source's.
class ToolCatalog {
public:
    ToolCatalog() = default;

    /// Validates ids (unique, non-empty) and descriptions (non-empty).
    static ToolCatalog from_tools(std::vector<Tool> tools, std::uint64_t version = 0);

    std::size_t size() const { return tools_.size(); }
    bool empty() const { return tools_.empty(); }
    std::uint64_t version() const { return version_; }

    bool contains(const std::string& id) const { return tools_.count(id) != 0; }
    const Tool* find(const std::string& id) const;
    const Tool& at(const std::string& id) const;  // throws NotFoundError

    // Tools in ascending id order.
    const std::map<std::string, Tool>& tools() const { return tools_; }
    std::vector<std::string> ids() const;

    // Hash over (id, description) pairs; changes whenever any indexed text changes.
    std::string fingerprint() const;

    ToolCatalog with_description(const std::string& id, const std::string& text, int round,
                                 double dev_recall) const;

    bool operator==(const ToolCatalog&) const = default;

private:
    std::map<std::string, Tool> tools_;
    std::uint64_t version_ = 0;
};

ToolCatalog parse_catalog(const std::string& content);
ToolCatalog load_catalog(const std::string& path);
std::string serialize_catalog(const ToolCatalog& catalog);
void save_catalog(const ToolCatalog& catalog, const std::string& path);

ToolCatalog apply_description(const ToolCatalog& catalog, const std::string& tool_id,
                              const std::string& new_text, int round, double dev_recall);

enum class Split { train, dev, test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct QueryRecord {
    std::string id;
    std::string text;
    std::set<std::string> gold_tool_ids;
    std::map<std::string, int> graded;  // empty when no graded labels
    Split split = Split::train;

    bool operator==(const QueryRecord&) const = default;
};

struct SplitRatios {
    int train_percent = 70;
    int dev_percent = 15;
    int test_percent = 15;
};

struct QueryDataset {
    std::vector<QueryRecord> records;  // file order
    SplitRatios ratios;
    std::uint64_t split_seed = 0;

    std::vector<QueryRecord> split(Split which) const;
    const QueryRecord* find(const std::string& id) const;
};

// Assigns train/dev/test by a seeded shuffle of the sorted record ids. Counts are
// floor(N * pct / 100) for train and dev, remainder to test.
void assign_splits(std::vector<QueryRecord>& records, std::uint64_t seed,
                   const SplitRatios& ratios = {});

QueryDataset parse_queries(const std::string& content, const ToolCatalog& catalog,
                           std::uint64_t split_seed);
QueryDataset load_queries(const std::string& path, const ToolCatalog& catalog,
                          std::uint64_t split_seed);
std::string serialize_queries(const std::vector<QueryRecord>& records);

struct CacheEntry {
    std::string description;
    int round = 0;
    double dev_recall = 0.0;

    bool operator==(const CacheEntry&) const = default;
};

// tool id -> latest accepted description
using DescriptionCache = std::map<std::string, CacheEntry>;

DescriptionCache cache_from_catalog(const ToolCatalog& catalog);
ToolCatalog apply_cache(const ToolCatalog& catalog, const DescriptionCache& cache);
std::string serialize_cache(const DescriptionCache& cache);
DescriptionCache parse_cache(const std::string& content);
DescriptionCache load_cache(const std::string& path);
void save_cache(const DescriptionCache& cache, const std::string& path);

}  // namespace toolret
