#include "toolret/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "toolret/util.hpp"

namespace toolret::train {

ProjectionHead ProjectionHead::identity(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return {Eigen::MatrixXd::Identity(n, n)};
}

std::string serialize_head(const ProjectionHead& head) {
    std::ostringstream out;
    out << "toolret-head " << head.dim() << '\n';
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < head.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.weights.cols(); ++c) {
            if (c > 0) out << ' ';
            out << head.weights(r, c);
        }
        out << '\n';
    }
    return out.str();
}

ProjectionHead parse_head(const std::string& content) {
    std::istringstream in(content);
    std::string magic;
    std::size_t dim = 0;
    if (!(in >> magic >> dim) || magic != "toolret-head" || dim == 0)
        throw ValidationError("projection head: bad header (expected 'toolret-head <dim>')");
    const auto n = static_cast<Eigen::Index>(dim);
    ProjectionHead head{Eigen::MatrixXd(n, n)};
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            if (!(in >> head.weights(r, c)))
                throw ValidationError("projection head: truncated matrix at row " + std::to_string(r));
    if (!head.finite()) throw ValidationError("projection head: non-finite entry");
    return head;
}

void save_head(const ProjectionHead& head, const std::string& path) { write_file(path, serialize_head(head)); }

ProjectionHead load_head(const std::string& path) { return parse_head(read_file(path)); }

namespace {

void check_batch(const TrainBatch& batch, const ProjectionHead& head) {
    if (batch.items.empty()) throw ValidationError("train batch is empty");
    const auto dim = static_cast<Eigen::Index>(head.dim());
    auto check = [&](const Eigen::VectorXd& v) {
        if (v.size() != dim) throw ValidationError("train batch vector dimension does not match head");
        if (!v.allFinite()) throw ValidationError("train batch contains a non-finite value");
    };
    for (const auto& item : batch.items) {
        if (item.negatives.empty()) throw ValidationError("train item has no negatives");
        check(item.query);
        check(item.positive);
        for (const auto& n : item.negatives) check(n);
    }
    if (!head.finite()) throw ValidationError("projection head has a non-finite entry");
}

// Candidate documents for item j: positive first, then negatives.
std::vector<const Eigen::VectorXd*> candidates(const TrainBatch& batch, std::size_t j, const LossOptions& opts) {
    std::vector<const Eigen::VectorXd*> docs;
    const auto& item = batch.items[j];
    docs.push_back(&item.positive);
    for (const auto& n : item.negatives) docs.push_back(&n);
    if (opts.share_in_batch)
        for (std::size_t o = 0; o < batch.items.size(); ++o)
            if (o != j) docs.push_back(&batch.items[o].positive);
    return docs;
}

// Returns -ln softmax_0 and fills probabilities.
double item_loss(const Eigen::VectorXd& wq, const std::vector<const Eigen::VectorXd*>& docs,
                 const ProjectionHead& head, std::vector<double>& probs) {
    std::vector<double> scores(docs.size());
    double max_s = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < docs.size(); ++i) {
        scores[i] = wq.dot(head.weights * *docs[i]);
        max_s = std::max(max_s, scores[i]);
    }
    double z = 0.0;
    for (double s : scores) z += std::exp(s - max_s);
    probs.resize(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) probs[i] = std::exp(scores[i] - max_s) / z;
    return (max_s + std::log(z)) - scores[0];
}

}  // namespace

double loss(const TrainBatch& batch, const ProjectionHead& head, const LossOptions& opts) {
    check_batch(batch, head);
    double total = 0.0;
    std::vector<double> probs;
    for (std::size_t j = 0; j < batch.items.size(); ++j) {
        const Eigen::VectorXd wq = head.weights * batch.items[j].query;
        total += item_loss(wq, candidates(batch, j, opts), head, probs);
    }
    const double value = total / static_cast<double>(batch.items.size());
    if (!std::isfinite(value)) throw ValidationError("loss is not finite");
    return value;
}

Eigen::MatrixXd grad(const TrainBatch& batch, const ProjectionHead& head, const LossOptions& opts) {
    check_batch(batch, head);
    // s_k = q^T W^T W d_k, so ds_k/dW = W (q d_k^T + d_k q^T).
    // dL_j/ds_k = p_k - [k == positive].
    const auto dim = static_cast<Eigen::Index>(head.dim());
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<double> probs;
    for (std::size_t j = 0; j < batch.items.size(); ++j) {
        const auto& q = batch.items[j].query;
        const Eigen::VectorXd wq = head.weights * q;
        auto docs = candidates(batch, j, opts);
        item_loss(wq, docs, head, probs);
        Eigen::VectorXd weighted = Eigen::VectorXd::Zero(dim);
        for (std::size_t k = 0; k < docs.size(); ++k)
            weighted += (probs[k] - (k == 0 ? 1.0 : 0.0)) * *docs[k];
        outer += q * weighted.transpose() + weighted * q.transpose();
    }
    return head.weights * outer / static_cast<double>(batch.items.size());
}

TrainResult train(const ProjectionHead& initial, const std::vector<TrainBatch>& batches,
                  const TrainConfig& config) {
    TrainResult result{initial, {}};
    if (config.steps == 0) return result;
    if (batches.empty()) throw ValidationError("train: no batches");
    for (const auto& b : batches) check_batch(b, initial);
    Rng rng(config.seed);
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const std::size_t pos = step % batches.size();
        if (pos == 0) {
            order.resize(batches.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
        }
        const auto& batch = batches[order[pos]];
        double value;
        try {
            value = loss(batch, result.head, config.loss);
        } catch (const ValidationError&) {
            // shapes were validated up front, so only non-finite values land here
            throw Error("training diverged at step " + std::to_string(step));
        }
        result.loss_trace.push_back(value);
        result.head.weights -= config.learning_rate * grad(batch, result.head, config.loss);
        if (!result.head.finite()) throw Error("training diverged at step " + std::to_string(step));
    }
    return result;
}

}  // namespace toolret::train
