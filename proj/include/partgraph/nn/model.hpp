#pragma once

#include "partgraph/nn/layers.hpp"
#include "partgraph/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace partgraph::nn {

enum class Pooling { MaxPool, SingleNode };

struct ModelConfig {
    std::vector<Index> encoder_widths{16, 16, 32, 256};
    std::vector<Index> reduce_widths{256, 128};
    Index gat_heads = 8;
    std::vector<Index> gat_head_widths{16, 16, 32, 32};
    std::vector<Index> classifier_widths{128, 256};
    Index n_classes = 0;
    Pooling pooling = Pooling::MaxPool;
    Index max_parts = 32;
    Index in_features = 4; // xyz + average angle, or 3 without the angle
};

struct EncoderLayer {
    DenseParams dense;
    BatchNormParams bn;
    Param w_max; // 1 x out, zero-initialized
};

struct ReduceLayer {
    DenseParams dense;
    BatchNormParams bn;
};

struct AttentionHead {
    Param W; // f_in x width
    Param a; // 2*width x 1, split into the self and neighbor halves
};

struct GatLayer {
    std::vector<AttentionHead> heads;
};

// The n x n attention bias: 0 on the diagonal and for overlap edges, -1e9
// elsewhere.
Matrix adjacency_mask(Index n_parts, const std::vector<std::pair<Index, Index>>& edges);

// Occlusion augmentation: each node is independently selected with
// probability `rate` and has all its non-self connections masked out; the
// result stays symmetric and the diagonal stays open.
Matrix apply_disconnection(const Matrix& mask, Scalar rate, Rng& rng);

// Stacks per-graph adjacency biases into one block-diagonal matrix whose
// cross-graph entries are closed, for running several graphs in one forward
// pass without attention leaking between them.
Matrix block_diagonal_mask(const std::vector<Matrix>& blocks);

struct GnnOutput {
    Vector object_logits;
    Vector object_probs;
    Matrix node_logits; // SingleNode: P x n_classes, empty otherwise
    Matrix node_probs;
};

// Per-forward caches; one instance per forward call, consumed by backward.
struct GnnCache;

// The part-graph classifier: shared per-point encoder, set pooling per part,
// feature reduction across parts, four multi-head attention layers over the
// overlap graph, then an object-level pooling head.
class PartGnn {
public:
    explicit PartGnn(ModelConfig cfg);

    const ModelConfig& config() const { return config_; }

    void init_params(std::uint64_t seed);

    // points: all parts stacked, shape (n_parts * n_points) x in_features.
    // mask: n_parts x n_parts adjacency bias. Train mode updates batch-norm
    // running statistics (output is independent of them in that mode).
    // Equivalent to forward_batch with a single graph.
    GnnOutput forward(const Matrix& points, Index n_parts, const Matrix& mask, Mode mode,
                      GnnCache* cache = nullptr);

    // Several graphs in one pass: `points` holds every graph's parts
    // concatenated (all graphs sharing one per-part point count),
    // `part_counts` the number of parts per graph, and `mask` the
    // block-diagonal adjacency bias over all parts. In train mode the batch
    // norms then draw their statistics from the whole batch, which is what
    // their running estimates need to describe for eval mode to match.
    std::vector<GnnOutput> forward_batch(const Matrix& points,
                                         const std::vector<Index>& part_counts,
                                         const Matrix& mask, Mode mode,
                                         GnnCache* cache = nullptr);

    // Accumulates parameter gradients from the gradient of the loss with
    // respect to the final logits: object logits (one row per graph) in
    // MaxPool mode, node logits (one row per part) in SingleNode mode.
    // Returns the gradient with respect to the input points.
    Matrix backward(const GnnCache& cache, const Matrix& dlogits);

    // Convenience for one part: returns its reduced feature row. Batch norms
    // that would see a single row in train mode fall back to running stats.
    Vector encode_part(const Matrix& part_points, Mode mode);

    void zero_grad();

    // Trainable parameters in a fixed, documented order.
    std::vector<std::pair<std::string, Param*>> named_params();
    // Non-trainable state (batch-norm running stats) in fixed order.
    std::vector<std::pair<std::string, Matrix*>> named_state();

    std::vector<EncoderLayer>& encoder() { return encoder_; }
    std::vector<ReduceLayer>& reduce() { return reduce_; }
    std::vector<GatLayer>& gat() { return gat_; }
    std::vector<DenseParams>& classifier() { return classifier_; }

private:
    Matrix encode_stage(const Matrix& points, Index n_parts, Mode mode, GnnCache* cache);
    Matrix reduce_stage(const Matrix& part_features, Mode mode, GnnCache* cache);
    Matrix gat_stage(const Matrix& h, const Matrix& mask, GnnCache* cache);
    void classify_stage(const Matrix& features, const std::vector<Index>& part_counts,
                        GnnCache* cache, std::vector<GnnOutput>& outputs);

    ModelConfig config_;
    std::vector<EncoderLayer> encoder_;
    std::vector<ReduceLayer> reduce_;
    std::vector<GatLayer> gat_;
    std::vector<DenseParams> classifier_; // two hidden layers + class projection
};

// Row-wise stabilized softmax (used for the classifier outputs).
Matrix row_softmax(const Matrix& logits);

struct GatLayerCache;

// One multi-head attention layer over part features h (P x f): per head a
// learned projection, pairwise attention logits through a LeakyReLU, masked
// row softmax, attention-weighted mean, ReLU; head outputs concatenated.
Matrix gat_layer_forward(const Matrix& h, const Matrix& mask, const GatLayer& layer,
                         GatLayerCache* cache = nullptr);

struct EncoderLayerCache {
    Matrix input;
    BatchNormCache bn; // statistics over all stacked points of the graph
    Matrix bn_out;
    Matrix relu_out;
    std::vector<std::vector<Eigen::Index>> wms_argmax; // per part
};

struct ReduceLayerCache {
    Matrix input;
    BatchNormCache bn;
    Matrix bn_out;
};

struct GatHeadCache {
    Matrix projected; // P x w
    Matrix u;         // pre-LeakyReLU pairwise logits
    Matrix gamma;     // attention coefficients
    Matrix pre_relu;  // gamma * projected
};

struct GatLayerCache {
    Matrix input;
    std::vector<GatHeadCache> heads;
};

struct GnnCache {
    Index n_parts = 0; // total across every graph of the call
    Index n_points = 0;
    std::vector<Index> part_counts; // parts per graph, in stacking order
    Mode mode = Mode::Eval;
    Matrix points;
    std::vector<EncoderLayerCache> encoder;
    std::vector<std::vector<Eigen::Index>> pool_argmax; // per part, per filter
    Matrix pooled;                                      // P x encoder_out
    std::vector<ReduceLayerCache> reduce;
    Matrix mask;
    std::vector<GatLayerCache> gat;
    Matrix gat_out;                                      // P x gat_out_width
    std::vector<std::vector<Eigen::Index>> object_argmax; // MaxPool head, per graph
    std::vector<Matrix> classifier_inputs;    // input to each classifier dense
    std::vector<Matrix> classifier_pre_relu;  // hidden layers only
};

} // namespace partgraph::nn
