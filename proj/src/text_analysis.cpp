#include "toolret/text_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "toolret/util.hpp"

namespace toolret::text {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double SparseVector::norm() const {
    double s = 0.0;
    for (const auto& [_, w] : entries) s += w * w;
    return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < entries.size() && j < other.entries.size()) {
        if (entries[i].first == other.entries[j].first) {
            s += entries[i].second * other.entries[j].second;
            ++i;
            ++j;
        } else if (entries[i].first < other.entries[j].first) {
            ++i;
        } else {
            ++j;
        }
    }
    return s;
}

std::vector<double> SparseVector::to_dense(std::size_t dim) const {
    std::vector<double> out(dim, 0.0);
    for (const auto& [idx, w] : entries) {
        if (idx >= dim) throw std::out_of_range("sparse index exceeds dense dimension");
        out[idx] = w;
    }
    return out;
}

TfIdfModel TfIdfModel::fit(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw ValidationError("tfidf_fit: corpus is empty");
    TfIdfModel model;
    model.corpus_size_ = corpus.size();
    std::vector<std::size_t> df;
    for (const auto& doc : corpus) {
        std::set<std::string> unique;
        for (auto& tok : tokenize(doc)) unique.insert(std::move(tok));
        // first-seen order within a document follows token order, not set order
        for (const auto& tok : tokenize(doc)) {
            if (model.vocabulary_.emplace(tok, df.size()).second) df.push_back(0);
        }
        for (const auto& tok : unique) ++df[model.vocabulary_.at(tok)];
    }
    const double n = static_cast<double>(corpus.size());
    model.idf_.resize(df.size());
    for (std::size_t i = 0; i < df.size(); ++i)
        model.idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
    return model;
}

double TfIdfModel::idf(std::string_view token) const {
    auto it = vocabulary_.find(std::string(token));
    return it == vocabulary_.end() ? 0.0 : idf_[it->second];
}

SparseVector TfIdfModel::transform(std::string_view text) const {
    std::map<std::size_t, double> counts;
    for (const auto& tok : tokenize(text)) {
        auto it = vocabulary_.find(tok);
        if (it != vocabulary_.end()) counts[it->second] += 1.0;
    }
    SparseVector v;
    for (const auto& [idx, tf] : counts) v.entries.emplace_back(idx, tf * idf_[idx]);
    const double norm = v.norm();
    if (norm > 0.0)
        for (auto& [_, w] : v.entries) w /= norm;
    return v;
}

namespace {

double squared_distance(const DenseVector& a, const DenseVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<DenseVector>& vectors, std::size_t k, std::uint64_t seed) {
    if (vectors.empty()) throw ValidationError("kmeans: empty input");
    if (k < 1 || k > vectors.size())
        throw ValidationError("kmeans: k=" + std::to_string(k) + " out of range [1, " +
                              std::to_string(vectors.size()) + "]");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw ValidationError("kmeans: vectors differ in dimension");

    ClusterAssignment out;
    out.seed = seed;
    Rng rng(seed);

    // farthest-point seeding
    std::vector<std::size_t> chosen{rng.uniform_index(vectors.size())};
    std::vector<double> nearest(vectors.size(), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const auto& last = vectors[chosen.back()];
        std::size_t best = 0;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(vectors[i], last));
            if (nearest[i] > best_dist) {
                best_dist = nearest[i];
                best = i;
            }
        }
        chosen.push_back(best);
    }
    for (std::size_t idx : chosen) out.centroids.push_back(vectors[idx]);

    const std::size_t n = vectors.size();
    out.labels.assign(n, 0);
    bool first = true;
    for (std::size_t iter = 0; iter < kMaxKmeansIterations; ++iter) {
        bool changed = false;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_dist = squared_distance(vectors[i], out.centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(vectors[i], out.centroids[c]);
                if (d < best_dist) {
                    best_dist = d;
                    best = c;
                }
            }
            if (first || out.labels[i] != best) changed = true;
            out.labels[i] = best;
            objective += best_dist;
        }
        out.objective_trace.push_back(objective);
        out.iterations = iter + 1;
        if (!changed) break;
        first = false;

        std::vector<DenseVector> sums(k, DenseVector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[out.labels[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += vectors[i][d];
            ++counts[out.labels[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d)
                out.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    return out;
}

void sort_ranked(std::vector<ScoredId>& items) {
    std::sort(items.begin(), items.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

double Bm25Index::idf(std::size_t n_docs, std::size_t df) {
    const double n = static_cast<double>(n_docs);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Bm25Index::term_weight(double idf, std::size_t tf, double doc_len, double avg_len,
                              const Bm25Params& params) {
    const double f = static_cast<double>(tf);
    return idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * doc_len / avg_len));
}

Bm25Index Bm25Index::build(const std::vector<std::pair<std::string, std::string>>& docs, Bm25Params params) {
    Bm25Index index;
    index.params_ = params;
    double total = 0.0;
    for (const auto& [id, body] : docs) {
        const std::size_t doc = index.doc_ids_.size();
        index.doc_ids_.push_back(id);
        auto tokens = tokenize(body);
        index.doc_lengths_.push_back(static_cast<double>(tokens.size()));
        total += static_cast<double>(tokens.size());
        std::map<std::string, std::size_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) index.postings_[term].push_back({doc, count});
    }
    index.avg_len_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    return index;
}

std::vector<ScoredId> Bm25Index::topk(std::string_view query, std::size_t k) const {
    auto tokens = tokenize(query);
    std::set<std::string> terms(tokens.begin(), tokens.end());
    std::vector<double> scores(doc_ids_.size(), 0.0);
    std::vector<bool> matched(doc_ids_.size(), false);
    // accumulate per term in ascending term order so sums are reproducible
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf(doc_ids_.size(), it->second.size());
        for (const auto& p : it->second) {
            scores[p.doc] += term_weight(w, p.tf, doc_lengths_[p.doc], avg_len_, params_);
            matched[p.doc] = true;
        }
    }
    std::vector<ScoredId> out;
    for (std::size_t d = 0; d < doc_ids_.size(); ++d)
        if (matched[d]) out.push_back({doc_ids_[d], scores[d]});
    sort_ranked(out);
    if (out.size() > k) out.resize(k);
    return out;
}

std::vector<ScoredId> bm25_topk(const Bm25Index& index, std::string_view query, std::size_t k) {
    return index.topk(query, k);
}

}  // namespace toolret::text
