#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace toolret::train {

// Square linear map applied to frozen embeddings before scoring.
struct ProjectionHead {
    Eigen::MatrixXd weights;

    static ProjectionHead identity(std::size_t dim);
    std::size_t dim() const { return static_cast<std::size_t>(weights.rows()); }
    bool finite() const { return weights.allFinite(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return weights * v; }
};

// Plain-text format: "toolret-head <dim>" followed by dim rows of dim values.
std::string serialize_head(const ProjectionHead& head);
ProjectionHead parse_head(const std::string& content);
void save_head(const ProjectionHead& head, const std::string& path);
ProjectionHead load_head(const std::string& path);

struct TrainItem {
    Eigen::VectorXd query;
    Eigen::VectorXd positive;
    std::vector<Eigen::VectorXd> negatives;
};

struct TrainBatch {
    std::vector<TrainItem> items;
};

struct LossOptions {
    // Also treat the other items' positives as negatives for each item.
    bool share_in_batch = false;
};

// Mean over items of -ln softmax(s_pos | s_pos, s_neg...), s = (W q) . (W d).
double loss(const TrainBatch& batch, const ProjectionHead& head, const LossOptions& opts = {});

// dL/dW for the loss above.
Eigen::MatrixXd grad(const TrainBatch& batch, const ProjectionHead& head, const LossOptions& opts = {});

struct TrainConfig {
    std::size_t steps = 500;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    LossOptions loss;
};

struct TrainResult {
    ProjectionHead head;
    std::vector<double> loss_trace;  // loss of the batch used at each step, before the update
};

// Plain gradient descent. Each pass over the batches visits them in a seeded
// permutation. Throws if the loss becomes non-finite.
TrainResult train(const ProjectionHead& initial, const std::vector<TrainBatch>& batches,
                  const TrainConfig& config);

}  // namespace toolret::train
