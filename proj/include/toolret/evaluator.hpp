#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolret/catalog.hpp"
#include "toolret/retrieval_pipeline.hpp"

namespace toolret::eval {

// |retrieved ∩ gold| / |gold|. Throws ValidationError for an empty gold set.
double recall(const std::set<std::string>& retrieved, const std::set<std::string>& gold);

// Exponential-gain NDCG: DCG = sum (2^g - 1) / log2(pos + 1) over the ranking, IDCG
// from all grades sorted descending. 0 when IDCG is 0. Grades must be 0, 1 or 2.
double ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& grades);

// Graded labels when present, otherwise gold tools at grade 1.
std::map<std::string, int> grades_for(const QueryRecord& query);

struct QueryMetrics {
    std::string query_id;
    double recall = 0.0;
    double ndcg = 0.0;
    std::vector<std::string> ranking;
    std::string status;
};

struct FailedQuery {
    std::string query_id;
    std::string error;
};

struct MetricsReport {
    std::vector<QueryMetrics> queries;  // ascending query id
    std::vector<FailedQuery> failed;
    double mean_recall = 0.0;
    double mean_ndcg = 0.0;
    std::size_t query_count = 0;  // successful queries in the averages
    nlohmann::json config;
};

// Seeded sample of min(sample_size, |split|) queries, run through the retriever in
// ascending id order. Failed queries are listed separately and excluded from the
// macro averages.
MetricsReport evaluate_system(const std::vector<QueryRecord>& split, pipeline::ToolRetriever& retriever,
                              std::size_t sample_size, std::uint64_t seed, nlohmann::json config = {});

std::vector<QueryRecord> sample_queries(const std::vector<QueryRecord>& split, std::size_t sample_size,
                                        std::uint64_t seed);

// One line per query plus a trailing summary line.
std::string serialize_report(const MetricsReport& report);

// Human-readable table; metrics shown on a 0-100 scale.
std::string summary_table(const MetricsReport& report);

}  // namespace toolret::eval
