#include "partgraph/nn/model.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <cmath>
#include <string>

namespace partgraph::nn {

namespace {

constexpr Scalar kMaskBias = -1e9;
constexpr Scalar kAttentionSlope = 0.2;

// Batch norm over a part's points (or over parts) falls back to the running
// statistics when the batch has a single row, instead of refusing the call.
Matrix segment_batch_norm(const Matrix& x, BatchNormParams& p, Mode mode, BatchNormCache& cache) {
    const Mode effective = (mode == Mode::Train && x.rows() < 2) ? Mode::Eval : mode;
    return batch_norm_fwd(x, p, effective, cache);
}

} // namespace

Matrix adjacency_mask(Index n_parts, const std::vector<std::pair<Index, Index>>& edges) {
    Matrix mask = Matrix::Constant(n_parts, n_parts, kMaskBias);
    mask.diagonal().setZero();
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n_parts || j >= n_parts) {
            throw ShapeMismatchError("adjacency edge out of range");
        }
        mask(i, j) = 0.0;
        mask(j, i) = 0.0;
    }
    return mask;
}

Matrix block_diagonal_mask(const std::vector<Matrix>& blocks) {
    Index total = 0;
    for (const Matrix& block : blocks) {
        if (block.rows() != block.cols()) {
            throw ShapeMismatchError("adjacency masks must be square");
        }
        total += block.rows();
    }
    Matrix out = Matrix::Constant(total, total, kMaskBias);
    Index at = 0;
    for (const Matrix& block : blocks) {
        out.block(at, at, block.rows(), block.cols()) = block;
        at += block.rows();
    }
    return out;
}

Matrix apply_disconnection(const Matrix& mask, Scalar rate, Rng& rng) {
    if (rate <= 0.0) {
        return mask; // no draws, so rate 0 leaves the RNG stream untouched
    }
    Matrix out = mask;
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        if (rng.next_double() >= rate) {
            continue;
        }
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            if (j != i) {
                out(i, j) = kMaskBias;
                out(j, i) = kMaskBias;
            }
        }
    }
    return out;
}

Matrix row_softmax(const Matrix& logits) {
    Matrix s = logits;
    s.colwise() -= logits.rowwise().maxCoeff();
    Matrix g = s.array().exp().matrix();
    const Vector inv = g.rowwise().sum().cwiseInverse();
    return inv.asDiagonal() * g;
}

PartGnn::PartGnn(ModelConfig cfg) : config_(std::move(cfg)) {
    if (config_.n_classes < 1) {
        throw ConfigError("model needs at least one class");
    }
    if (config_.gat_head_widths.empty() || config_.encoder_widths.empty() ||
        config_.reduce_widths.empty()) {
        throw ConfigError("model needs non-empty layer width lists");
    }

    Index width = config_.in_features;
    for (Index out : config_.encoder_widths) {
        EncoderLayer layer;
        layer.dense.W = Param(width, out);
        layer.dense.b = Param(1, out);
        layer.bn = BatchNormParams(out);
        layer.w_max = Param(1, out);
        encoder_.push_back(std::move(layer));
        width = out;
    }

    for (Index out : config_.reduce_widths) {
        ReduceLayer layer;
        layer.dense.W = Param(width, out);
        layer.dense.b = Param(1, out);
        layer.bn = BatchNormParams(out);
        reduce_.push_back(std::move(layer));
        width = out;
    }

    for (Index head_width : config_.gat_head_widths) {
        GatLayer layer;
        for (Index k = 0; k < config_.gat_heads; ++k) {
            AttentionHead head;
            head.W = Param(width, head_width);
            head.a = Param(2 * head_width, 1);
            layer.heads.push_back(std::move(head));
        }
        gat_.push_back(std::move(layer));
        width = config_.gat_heads * head_width;
    }

    for (Index out : config_.classifier_widths) {
        DenseParams dense;
        dense.W = Param(width, out);
        dense.b = Param(1, out);
        classifier_.push_back(std::move(dense));
        width = out;
    }
    DenseParams proj;
    proj.W = Param(width, config_.n_classes);
    proj.b = Param(1, config_.n_classes);
    classifier_.push_back(std::move(proj));
}

void PartGnn::init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (EncoderLayer& layer : encoder_) {
        glorot_init(layer.dense.W.value, layer.dense.W.value.rows(), layer.dense.W.value.cols(),
                    rng);
    }
    for (ReduceLayer& layer : reduce_) {
        glorot_init(layer.dense.W.value, layer.dense.W.value.rows(), layer.dense.W.value.cols(),
                    rng);
    }
    for (GatLayer& layer : gat_) {
        for (AttentionHead& head : layer.heads) {
            glorot_init(head.W.value, head.W.value.rows(), head.W.value.cols(), rng);
            glorot_init(head.a.value, head.a.value.rows(), 1, rng);
        }
    }
    for (DenseParams& dense : classifier_) {
        glorot_init(dense.W.value, dense.W.value.rows(), dense.W.value.cols(), rng);
    }
}

Matrix PartGnn::encode_stage(const Matrix& points, Index n_parts, Mode mode, GnnCache* cache) {
    const Index n_points = points.rows() / n_parts;
    Matrix h = points;
    for (std::size_t li = 0; li < encoder_.size(); ++li) {
        EncoderLayer& layer = encoder_[li];
        EncoderLayerCache* lc = cache ? &cache->encoder[li] : nullptr;
        if (lc) {
            lc->input = h;
        }

        h = dense_fwd(h, layer.dense);

        // One set of batch statistics over every point of every part: eval
        // mode then sees running estimates of the same whole-graph
        // distribution the train-mode statistics were drawn from.
        BatchNormCache local_bn;
        Matrix bn_out = segment_batch_norm(h, layer.bn, mode, lc ? lc->bn : local_bn);
        if (lc) {
            lc->bn_out = bn_out;
        }

        Matrix relu_out = relu_fwd(bn_out);
        if (lc) {
            lc->relu_out = relu_out;
            lc->wms_argmax.assign(static_cast<std::size_t>(n_parts), {});
        }

        Matrix next(h.rows(), h.cols());
        for (Index p = 0; p < n_parts; ++p) {
            std::vector<Eigen::Index> argmax;
            next.middleRows(p * n_points, n_points) = weighted_max_subtract_fwd(
                relu_out.middleRows(p * n_points, n_points), layer.w_max, argmax);
            if (lc) {
                lc->wms_argmax[static_cast<std::size_t>(p)] = std::move(argmax);
            }
        }
        h = std::move(next);
    }

    Matrix pooled(n_parts, h.cols());
    for (Index p = 0; p < n_parts; ++p) {
        std::vector<Eigen::Index> argmax;
        pooled.row(p) = set_maxpool_fwd(h.middleRows(p * n_points, n_points), argmax);
        if (cache) {
            cache->pool_argmax[static_cast<std::size_t>(p)] = std::move(argmax);
        }
    }
    if (cache) {
        cache->pooled = pooled;
    }
    return pooled;
}

Matrix PartGnn::reduce_stage(const Matrix& part_features, Mode mode, GnnCache* cache) {
    Matrix h = part_features;
    for (std::size_t li = 0; li < reduce_.size(); ++li) {
        ReduceLayer& layer = reduce_[li];
        ReduceLayerCache* lc = cache ? &cache->reduce[li] : nullptr;
        if (lc) {
            lc->input = h;
        }
        h = dense_fwd(h, layer.dense);
        BatchNormCache local;
        h = segment_batch_norm(h, layer.bn, mode, lc ? lc->bn : local);
        if (lc) {
            lc->bn_out = h;
        }
        h = relu_fwd(h);
    }
    return h;
}

Matrix gat_layer_forward(const Matrix& h, const Matrix& mask, const GatLayer& layer,
                         GatLayerCache* cache) {
    if (cache) {
        cache->input = h;
        cache->heads.resize(layer.heads.size());
    }
    const Matrix ones = Matrix::Ones(h.rows(), 1);
    const Index w = layer.heads.front().W.value.cols();
    Matrix out(h.rows(), static_cast<Eigen::Index>(layer.heads.size()) * w);
    for (std::size_t k = 0; k < layer.heads.size(); ++k) {
        const AttentionHead& head = layer.heads[k];
        const Matrix projected = h * head.W.value;
        // e_ij = LeakyReLU(a^T [p_i || p_j]) decomposes into a self score
        // s1_i plus a neighbor score s2_j.
        const Vector s1 = projected * head.a.value.topRows(w);
        const Vector s2 = projected * head.a.value.bottomRows(w);
        const Matrix u = s1 * ones.transpose() + ones * s2.transpose();
        const Matrix e = leaky_relu_fwd(u, kAttentionSlope);
        const Matrix gamma = masked_softmax_fwd(e, mask);
        const Matrix pre_relu = gamma * projected;
        out.middleCols(static_cast<Eigen::Index>(k) * w, w) = relu_fwd(pre_relu);
        if (cache) {
            GatHeadCache& hc = cache->heads[k];
            hc.projected = projected;
            hc.u = u;
            hc.gamma = gamma;
            hc.pre_relu = pre_relu;
        }
    }
    return out;
}

Matrix PartGnn::gat_stage(const Matrix& h_in, const Matrix& mask, GnnCache* cache) {
    Matrix h = h_in;
    for (std::size_t li = 0; li < gat_.size(); ++li) {
        h = gat_layer_forward(h, mask, gat_[li], cache ? &cache->gat[li] : nullptr);
    }
    if (cache) {
        cache->gat_out = h;
    }
    return h;
}

void PartGnn::classify_stage(const Matrix& features, const std::vector<Index>& part_counts,
                             GnnCache* cache, std::vector<GnnOutput>& outputs) {
    const auto n_graphs = static_cast<Eigen::Index>(part_counts.size());
    Matrix h;
    if (config_.pooling == Pooling::MaxPool) {
        // One pooled row per graph: column-max over that graph's part rows.
        h.resize(n_graphs, features.cols());
        std::vector<std::vector<Eigen::Index>> argmax(part_counts.size());
        Index row = 0;
        for (Eigen::Index g = 0; g < n_graphs; ++g) {
            h.row(g) = set_maxpool_fwd(features.middleRows(row, part_counts[g]),
                                       argmax[static_cast<std::size_t>(g)]);
            row += part_counts[g];
        }
        if (cache) {
            cache->object_argmax = std::move(argmax);
        }
    } else {
        h = features; // one classifier pass per part
    }

    if (cache) {
        cache->classifier_inputs.clear();
        cache->classifier_pre_relu.clear();
    }
    for (std::size_t i = 0; i < classifier_.size(); ++i) {
        if (cache) {
            cache->classifier_inputs.push_back(h);
        }
        h = dense_fwd(h, classifier_[i]);
        if (i + 1 < classifier_.size()) {
            if (cache) {
                cache->classifier_pre_relu.push_back(h);
            }
            h = relu_fwd(h);
        }
    }

    outputs.resize(part_counts.size());
    const Matrix probs = row_softmax(h);
    if (config_.pooling == Pooling::MaxPool) {
        for (Eigen::Index g = 0; g < n_graphs; ++g) {
            GnnOutput& out = outputs[static_cast<std::size_t>(g)];
            out.object_logits = h.row(g).transpose();
            out.object_probs = probs.row(g).transpose();
        }
    } else {
        Index row = 0;
        for (Eigen::Index g = 0; g < n_graphs; ++g) {
            GnnOutput& out = outputs[static_cast<std::size_t>(g)];
            const Index count = part_counts[static_cast<std::size_t>(g)];
            out.node_logits = h.middleRows(row, count);
            out.node_probs = probs.middleRows(row, count);
            out.object_probs = out.node_probs.colwise().mean().transpose();
            // The per-object scores live in probability space here; keep the
            // logits slot consistent by storing their logarithms.
            out.object_logits = out.object_probs.array().log().matrix();
            row += count;
        }
    }
}

GnnOutput PartGnn::forward(const Matrix& points, Index n_parts, const Matrix& mask, Mode mode,
                           GnnCache* cache) {
    std::vector<GnnOutput> outputs =
        forward_batch(points, std::vector<Index>{n_parts}, mask, mode, cache);
    return std::move(outputs.front());
}

std::vector<GnnOutput> PartGnn::forward_batch(const Matrix& points,
                                              const std::vector<Index>& part_counts,
                                              const Matrix& mask, Mode mode, GnnCache* cache) {
    if (part_counts.empty()) {
        throw EmptyGraphError("forward needs at least one graph");
    }
    Index n_parts = 0;
    for (const Index count : part_counts) {
        if (count < 1) {
            throw EmptyGraphError("forward needs at least one part");
        }
        n_parts += count;
    }
    if (points.rows() % n_parts != 0 || points.rows() == 0) {
        throw ShapeMismatchError("points rows " + std::to_string(points.rows()) +
                                 " not divisible into " + std::to_string(n_parts) + " parts");
    }
    if (points.cols() != config_.in_features) {
        throw ShapeMismatchError("points have " + std::to_string(points.cols()) +
                                 " features, model expects " +
                                 std::to_string(config_.in_features));
    }
    if (mask.rows() != n_parts || mask.cols() != n_parts) {
        throw ShapeMismatchError("mask must be n_parts x n_parts");
    }

    if (cache) {
        cache->n_parts = n_parts;
        cache->n_points = points.rows() / n_parts;
        cache->part_counts = part_counts;
        cache->mode = mode;
        cache->points = points;
        cache->encoder.assign(encoder_.size(), {});
        cache->pool_argmax.assign(static_cast<std::size_t>(n_parts), {});
        cache->reduce.assign(reduce_.size(), {});
        cache->mask = mask;
        cache->gat.assign(gat_.size(), {});
    }

    const Matrix pooled = encode_stage(points, n_parts, mode, cache);
    const Matrix part_features = reduce_stage(pooled, mode, cache);
    const Matrix gat_out = gat_stage(part_features, mask, cache);

    std::vector<GnnOutput> outputs;
    classify_stage(gat_out, part_counts, cache, outputs);
    return outputs;
}

Matrix PartGnn::backward(const GnnCache& cache, const Matrix& dlogits) {
    const Index n_parts = cache.n_parts;
    const Index n_points = cache.n_points;

    // Classifier head.
    Matrix d = dlogits;
    for (std::size_t i = classifier_.size(); i-- > 0;) {
        if (i + 1 < classifier_.size()) {
            d = relu_bwd(cache.classifier_pre_relu[i], d);
        }
        d = dense_bwd(cache.classifier_inputs[i], classifier_[i], d);
    }
    Matrix d_gat;
    if (config_.pooling == Pooling::MaxPool) {
        // Un-pool each graph's logit-gradient row onto its own part rows.
        d_gat = Matrix::Zero(n_parts, d.cols());
        Index row = 0;
        for (std::size_t g = 0; g < cache.part_counts.size(); ++g) {
            const Index count = cache.part_counts[g];
            d_gat.middleRows(row, count) = set_maxpool_bwd(
                count, cache.object_argmax[g], d.row(static_cast<Eigen::Index>(g)));
            row += count;
        }
    } else {
        d_gat = std::move(d);
    }

    // Attention layers, newest first.
    for (std::size_t li = gat_.size(); li-- > 0;) {
        GatLayer& layer = gat_[li];
        const GatLayerCache& lc = cache.gat[li];
        const Index w = config_.gat_head_widths[li];
        Matrix d_in = Matrix::Zero(lc.input.rows(), lc.input.cols());
        for (std::size_t k = 0; k < layer.heads.size(); ++k) {
            AttentionHead& head = layer.heads[k];
            const GatHeadCache& hc = lc.heads[k];
            const Matrix d_out = d_gat.middleCols(static_cast<Eigen::Index>(k) * w, w);

            const Matrix dm = relu_bwd(hc.pre_relu, d_out);
            const Matrix dgamma = dm * hc.projected.transpose();
            Matrix d_proj = hc.gamma.transpose() * dm;

            const Matrix de = masked_softmax_bwd(hc.gamma, dgamma);
            const Matrix du = leaky_relu_bwd(hc.u, de, kAttentionSlope);
            const Vector ds1 = du.rowwise().sum();
            const Vector ds2 = du.colwise().sum().transpose();

            d_proj.noalias() += ds1 * head.a.value.topRows(w).transpose();
            d_proj.noalias() += ds2 * head.a.value.bottomRows(w).transpose();
            head.a.grad.topRows(w).noalias() += hc.projected.transpose() * ds1;
            head.a.grad.bottomRows(w).noalias() += hc.projected.transpose() * ds2;

            head.W.grad.noalias() += lc.input.transpose() * d_proj;
            d_in.noalias() += d_proj * head.W.value.transpose();
        }
        d_gat = std::move(d_in);
    }

    // Reduce layers.
    for (std::size_t li = reduce_.size(); li-- > 0;) {
        ReduceLayer& layer = reduce_[li];
        const ReduceLayerCache& lc = cache.reduce[li];
        d_gat = relu_bwd(lc.bn_out, d_gat);
        d_gat = batch_norm_bwd(lc.bn, layer.bn, d_gat);
        d_gat = dense_bwd(lc.input, layer.dense, d_gat);
    }

    // Un-pool back onto each part's points.
    Matrix d_stack = Matrix::Zero(n_parts * n_points, d_gat.cols());
    for (Index p = 0; p < n_parts; ++p) {
        d_stack.middleRows(p * n_points, n_points) = set_maxpool_bwd(
            n_points, cache.pool_argmax[static_cast<std::size_t>(p)], d_gat.row(p));
    }

    // Encoder layers.
    for (std::size_t li = encoder_.size(); li-- > 0;) {
        EncoderLayer& layer = encoder_[li];
        const EncoderLayerCache& lc = cache.encoder[li];

        Matrix d_relu(d_stack.rows(), d_stack.cols());
        for (Index p = 0; p < n_parts; ++p) {
            d_relu.middleRows(p * n_points, n_points) = weighted_max_subtract_bwd(
                lc.relu_out.middleRows(p * n_points, n_points), layer.w_max,
                lc.wms_argmax[static_cast<std::size_t>(p)],
                d_stack.middleRows(p * n_points, n_points));
        }

        Matrix d_bn = relu_bwd(lc.bn_out, d_relu);
        Matrix d_dense = batch_norm_bwd(lc.bn, layer.bn, d_bn);
        d_stack = dense_bwd(lc.input, layer.dense, d_dense);
    }
    return d_stack;
}

Vector PartGnn::encode_part(const Matrix& part_points, Mode mode) {
    const Matrix pooled = encode_stage(part_points, 1, mode, nullptr);
    const Matrix reduced = reduce_stage(pooled, mode, nullptr);
    return reduced.row(0).transpose();
}

void PartGnn::zero_grad() {
    for (auto& [name, param] : named_params()) {
        (void)name;
        param->zero_grad();
    }
}

std::vector<std::pair<std::string, Param*>> PartGnn::named_params() {
    std::vector<std::pair<std::string, Param*>> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        const std::string base = "encoder." + std::to_string(i);
        out.emplace_back(base + ".dense.W", &encoder_[i].dense.W);
        out.emplace_back(base + ".dense.b", &encoder_[i].dense.b);
        out.emplace_back(base + ".bn.gamma", &encoder_[i].bn.gamma);
        out.emplace_back(base + ".bn.beta", &encoder_[i].bn.beta);
        out.emplace_back(base + ".w_max", &encoder_[i].w_max);
    }
    for (std::size_t i = 0; i < reduce_.size(); ++i) {
        const std::string base = "reduce." + std::to_string(i);
        out.emplace_back(base + ".dense.W", &reduce_[i].dense.W);
        out.emplace_back(base + ".dense.b", &reduce_[i].dense.b);
        out.emplace_back(base + ".bn.gamma", &reduce_[i].bn.gamma);
        out.emplace_back(base + ".bn.beta", &reduce_[i].bn.beta);
    }
    for (std::size_t l = 0; l < gat_.size(); ++l) {
        for (std::size_t k = 0; k < gat_[l].heads.size(); ++k) {
            const std::string base =
                "gat." + std::to_string(l) + ".head" + std::to_string(k);
            out.emplace_back(base + ".W", &gat_[l].heads[k].W);
            out.emplace_back(base + ".a", &gat_[l].heads[k].a);
        }
    }
    for (std::size_t i = 0; i < classifier_.size(); ++i) {
        const std::string base = "classifier." + std::to_string(i);
        out.emplace_back(base + ".W", &classifier_[i].W);
        out.emplace_back(base + ".b", &classifier_[i].b);
    }
    return out;
}

std::vector<std::pair<std::string, Matrix*>> PartGnn::named_state() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        const std::string base = "encoder." + std::to_string(i);
        out.emplace_back(base + ".bn.running_mean", &encoder_[i].bn.running_mean);
        out.emplace_back(base + ".bn.running_var", &encoder_[i].bn.running_var);
    }
    for (std::size_t i = 0; i < reduce_.size(); ++i) {
        const std::string base = "reduce." + std::to_string(i);
        out.emplace_back(base + ".bn.running_mean", &reduce_[i].bn.running_mean);
        out.emplace_back(base + ".bn.running_var", &reduce_[i].bn.running_var);
    }
    return out;
}

} // namespace partgraph::nn
