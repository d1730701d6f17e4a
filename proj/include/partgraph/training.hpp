#pragma once

#include "partgraph/nn/model.hpp"
#include "partgraph/part_features.hpp"
#include "partgraph/pipeline.hpp"
#include "partgraph/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace partgraph {

enum class Optimizer { Adam, SgdMomentum };

struct TrainConfig {
    Scalar learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    Index batch_size = 8; // graphs per update, gradient-averaged
    Index epochs = 1;
    Scalar disconnect_rate = 0.0;
    std::uint64_t seed = 0;
    LrfMode lrf_mode = LrfMode::Pca;
    bool include_angle = true;
    nn::Pooling pooling = nn::Pooling::MaxPool;
    Scalar threshold_scale_eval = 1.0;
    // Stop once train and validation accuracy both reach these; > 1 disables.
    Scalar early_stop_train_acc = 2.0;
    Scalar early_stop_val_acc = 2.0;
};

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

struct Metrics {
    Scalar accuracy = 0.0;
    Scalar class_accuracy = 0.0; // unweighted mean over classes present
    IndexMatrix confusion;       // rows: true class, cols: predicted
};

struct GraphDataset {
    std::vector<FeaturizedGraph> graphs;
    std::vector<Index> labels; // indices into class_names, parallel to graphs
    std::vector<std::string> class_names;

    bool empty() const { return graphs.empty(); }
    std::size_t size() const { return graphs.size(); }
};

// Resolves each graph's label string against class_names (ConfigError on an
// unknown label).
GraphDataset make_graph_dataset(std::vector<FeaturizedGraph> graphs,
                                std::vector<std::string> class_names);

// -log(probs[label]) with probabilities clamped at 1e-12.
Scalar cross_entropy_loss(const Vector& probs, Index label);

// Gradient of that loss with respect to the logits feeding a softmax.
Vector cross_entropy_logit_grad(const Vector& probs, Index label);

struct EpochLog {
    Index epoch = 0;
    Scalar loss = 0.0;
    Scalar train_acc = 0.0;
    Scalar val_acc = 0.0; // nan when no validation set is given
};

// `epoch<TAB>loss<TAB>train_acc<TAB>val_acc`.
std::string format_epoch_log(const EpochLog& log);

struct TrainResult {
    std::vector<EpochLog> log;
    bool diverged = false; // loss went non-finite; model holds the last good epoch
};

// Seeded shuffled epochs with fresh per-graph disconnection, gradient
// averaging over batches, and one optimizer step per batch. A non-finite
// loss rolls the model back to the end of the previous epoch and stops.
// Pass the same pointer as `on_epoch` to stream log lines (may be null).
TrainResult train(nn::PartGnn& model, const GraphDataset& train_set,
                  const GraphDataset& val_set, const TrainConfig& cfg,
                  void (*on_epoch)(const EpochLog&) = nullptr);

// Eval-mode forward over the dataset; consumes no randomness.
Metrics evaluate(nn::PartGnn& model, const GraphDataset& dataset);

// Predicts the most frequent class of `dataset` for every object in it.
Metrics majority_class_baseline(const GraphDataset& dataset);

} // namespace partgraph
