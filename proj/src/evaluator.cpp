#include "toolret/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "toolret/util.hpp"

namespace toolret::eval {

using nlohmann::json;

double recall(const std::set<std::string>& retrieved, const std::set<std::string>& gold) {
    if (gold.empty()) throw ValidationError("recall: gold set is empty");
    std::size_t hits = 0;
    for (const auto& g : gold)
        if (retrieved.count(g)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& grades) {
    std::vector<int> ideal;
    for (const auto& [id, g] : grades) {
        if (g < 0 || g > 2) throw ValidationError("grade for '" + id + "' must be 0, 1 or 2");
        ideal.push_back(g);
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    auto gain = [](int g) { return std::pow(2.0, g) - 1.0; };
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size(); ++i) idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
    if (idcg == 0.0) return 0.0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        auto it = grades.find(ranking[i]);
        if (it == grades.end()) continue;
        dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg / idcg;
}

std::map<std::string, int> grades_for(const QueryRecord& query) {
    if (!query.graded.empty()) return query.graded;
    std::map<std::string, int> out;
    for (const auto& id : query.gold_tool_ids) out[id] = 1;
    return out;
}

std::vector<QueryRecord> sample_queries(const std::vector<QueryRecord>& split, std::size_t sample_size,
                                        std::uint64_t seed) {
    std::vector<QueryRecord> sorted = split;
    std::sort(sorted.begin(), sorted.end(), [](const QueryRecord& a, const QueryRecord& b) { return a.id < b.id; });
    if (sorted.size() > sample_size) {
        Rng rng(seed);
        rng.shuffle(sorted);
        sorted.resize(sample_size);
        std::sort(sorted.begin(), sorted.end(), [](const QueryRecord& a, const QueryRecord& b) { return a.id < b.id; });
    }
    return sorted;
}

MetricsReport evaluate_system(const std::vector<QueryRecord>& split, pipeline::ToolRetriever& retriever,
                              std::size_t sample_size, std::uint64_t seed, json config) {
    if (split.empty()) throw ValidationError("evaluate_system: split is empty");
    MetricsReport report;
    report.config = std::move(config);
    report.config["sample_size"] = sample_size;
    report.config["seed"] = seed;
    report.config["catalog_version"] = retriever.catalog().version();

    double sum_recall = 0.0, sum_ndcg = 0.0;
    for (const auto& query : sample_queries(split, sample_size, seed)) {
        auto result = pipeline::run_pnr(query, retriever);
        if (result.failed()) {
            report.failed.push_back({query.id, result.error});
            continue;
        }
        QueryMetrics m;
        m.query_id = query.id;
        m.recall = recall(result.tools, query.gold_tool_ids);
        m.ndcg = ndcg(result.ranking, grades_for(query));
        m.ranking = result.ranking;
        m.status = pipeline::to_string(result.status);
        sum_recall += m.recall;
        sum_ndcg += m.ndcg;
        report.queries.push_back(std::move(m));
    }
    report.query_count = report.queries.size();
    if (report.query_count > 0) {
        report.mean_recall = sum_recall / static_cast<double>(report.query_count);
        report.mean_ndcg = sum_ndcg / static_cast<double>(report.query_count);
    }
    return report;
}

std::string serialize_report(const MetricsReport& report) {
    std::string out;
    for (const auto& q : report.queries) {
        json rec = {{"type", "query"},
                    {"query_id", q.query_id},
                    {"recall", q.recall},
                    {"ndcg", q.ndcg},
                    {"ranking", q.ranking},
                    {"status", q.status}};
        out += rec.dump() + "\n";
    }
    for (const auto& f : report.failed) {
        json rec = {{"type", "failed"}, {"query_id", f.query_id}, {"error", f.error}};
        out += rec.dump() + "\n";
    }
    json summary = {{"type", "summary"},
                    {"queries", report.query_count},
                    {"failed", report.failed.size()},
                    {"mean_recall", report.mean_recall},
                    {"mean_ndcg", report.mean_ndcg},
                    {"config", report.config}};
    out += summary.dump() + "\n";
    return out;
}

std::string summary_table(const MetricsReport& report) {
    std::string out;
    out += fmt::format("{:<12} {:>8} {:>8}\n", "query", "Rec", "NDCG");
    for (const auto& q : report.queries)
        out += fmt::format("{:<12} {:>8.2f} {:>8.2f}\n", q.query_id, q.recall * 100.0, q.ndcg * 100.0);
    for (const auto& f : report.failed) out += fmt::format("{:<12} {:>8} {:>8}\n", f.query_id, "failed", "-");
    out += fmt::format("{:<12} {:>8.2f} {:>8.2f}\n", "mean", report.mean_recall * 100.0, report.mean_ndcg * 100.0);
    out += fmt::format("{} queries evaluated, {} failed\n", report.query_count, report.failed.size());
    return out;
}

}  // namespace toolret::eval
