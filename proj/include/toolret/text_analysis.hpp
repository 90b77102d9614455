#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace toolret::text {

// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

struct SparseVector {
    std::vector<std::pair<std::size_t, double>> entries;  // strictly increasing index

    bool empty() const { return entries.empty(); }
    double norm() const;
    double dot(const SparseVector& other) const;
    std::vector<double> to_dense(std::size_t dim) const;
};

class TfIdfModel {
public:
    // idf(t) = ln((1 + N) / (1 + df(t))) + 1; vocabulary indices in first-seen order.
    static TfIdfModel fit(const std::vector<std::string>& corpus);

    SparseVector transform(std::string_view text) const;

    std::size_t vocabulary_size() const { return idf_.size(); }
    std::size_t corpus_size() const { return corpus_size_; }
    const std::unordered_map<std::string, std::size_t>& vocabulary() const { return vocabulary_; }
    double idf(std::string_view token) const;  // 0 for out-of-vocabulary tokens

private:
    std::unordered_map<std::string, std::size_t> vocabulary_;
    std::vector<double> idf_;
    std::size_t corpus_size_ = 0;
};

using DenseVector = std::vector<double>;

struct ClusterAssignment {
    std::vector<std::size_t> labels;
    std::vector<DenseVector> centroids;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    // Sum of squared distances to the assigned centroid, recorded after every
    // assignment step.
    std::vector<double> objective_trace;
};

inline constexpr std::size_t kMaxKmeansIterations = 100;

// Lloyd's algorithm from a seeded farthest-point initialization. Stops at an
// assignment fixpoint or after kMaxKmeansIterations. Empty clusters keep their
// previous centroid; ties go to the lowest index.
ClusterAssignment kmeans(const std::vector<DenseVector>& vectors, std::size_t k, std::uint64_t seed);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredId {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredId&) const = default;
};

class Bm25Index {
public:
    struct Posting {
        std::size_t doc = 0;
        std::size_t tf = 0;
    };

    static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs,
                           Bm25Params params = {});

    // Descending score, ties by ascending id. Only documents that contain at least one
    // query term are returned.
    std::vector<ScoredId> topk(std::string_view query, std::size_t k) const;

    // Lucene-style idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
    static double idf(std::size_t n_docs, std::size_t df);
    static double term_weight(double idf, std::size_t tf, double doc_len, double avg_len,
                              const Bm25Params& params);

    std::size_t size() const { return doc_ids_.size(); }
    double average_length() const { return avg_len_; }
    const Bm25Params& params() const { return params_; }

private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<double> doc_lengths_;
    double avg_len_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

std::vector<ScoredId> bm25_topk(const Bm25Index& index, std::string_view query, std::size_t k);

// Sorts by descending score then ascending id.
void sort_ranked(std::vector<ScoredId>& items);

}  // namespace toolret::text
