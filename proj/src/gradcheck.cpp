#include "partgraph/gradcheck.hpp"

#include "partgraph/nn/layers.hpp"
#include "partgraph/nn/model.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/training.hpp"

#include <cmath>

namespace partgraph::nn {

namespace {

constexpr Scalar kLayerTol = 1e-5;
constexpr Scalar kModelTol = 1e-4;

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, Scalar lo, Scalar hi) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = rng.next_uniform(lo, hi);
        }
    }
    return m;
}

// Values bounded away from zero, so ReLU-family kinks sit far from the
// finite-difference window.
Matrix random_off_kink(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Scalar mag = rng.next_uniform(0.2, 1.0);
            m(r, c) = rng.next_double() < 0.5 ? -mag : mag;
        }
    }
    return m;
}

ParamView view_matrix(Matrix& value, Matrix& grad) {
    return {value.data(), grad.data(), value.size()};
}

GradCheckResult check_dense(Rng& rng) {
    Matrix x = random_matrix(rng, 5, 4, -1, 1);
    DenseParams p;
    p.W = Param(4, 3);
    p.b = Param(1, 3);
    glorot_init(p.W.value, 4, 3, rng);
    p.b.value = random_matrix(rng, 1, 3, -0.5, 0.5);
    const Matrix weights = random_matrix(rng, 5, 3, -1, 1);

    Matrix dx = dense_bwd(x, p, weights);
    const auto loss = [&] { return (dense_fwd(x, p).array() * weights.array()).sum(); };
    const Scalar err = max_relative_grad_error(
        loss, {view_of(p.W), view_of(p.b), view_matrix(x, dx)});
    return {"dense", err, kLayerTol};
}

GradCheckResult check_batch_norm(Rng& rng, Mode mode) {
    Matrix x = random_matrix(rng, 6, 4, -2, 2);
    BatchNormParams p(4);
    p.gamma.value = random_matrix(rng, 1, 4, 0.5, 1.5);
    p.beta.value = random_matrix(rng, 1, 4, -0.5, 0.5);
    p.running_mean = random_matrix(rng, 1, 4, -0.5, 0.5);
    p.running_var = random_matrix(rng, 1, 4, 0.5, 1.5);
    const Matrix weights = random_matrix(rng, 6, 4, -1, 1);

    BatchNormCache cache;
    batch_norm_fwd(x, p, mode, cache);
    Matrix dx = batch_norm_bwd(cache, p, weights);
    // Train-mode forwards fold batch statistics into the running estimates,
    // but the output never reads them in that mode, so the loss stays a pure
    // function of the checked values.
    const auto loss = [&] {
        BatchNormCache c;
        return (batch_norm_fwd(x, p, mode, c).array() * weights.array()).sum();
    };
    const Scalar err = max_relative_grad_error(
        loss, {view_of(p.gamma), view_of(p.beta), view_matrix(x, dx)});
    return {mode == Mode::Train ? "batch_norm_train" : "batch_norm_eval", err, kLayerTol};
}

GradCheckResult check_relu(Rng& rng) {
    Matrix x = random_off_kink(rng, 6, 5);
    const Matrix weights = random_matrix(rng, 6, 5, -1, 1);
    Matrix dx = relu_bwd(x, weights);
    const auto loss = [&] { return (relu_fwd(x).array() * weights.array()).sum(); };
    const Scalar err = max_relative_grad_error(loss, {view_matrix(x, dx)});
    return {"relu", err, kLayerTol};
}

GradCheckResult check_leaky_relu(Rng& rng) {
    Matrix x = random_off_kink(rng, 6, 5);
    const Matrix weights = random_matrix(rng, 6, 5, -1, 1);
    Matrix dx = leaky_relu_bwd(x, weights, 0.2);
    const auto loss = [&] { return (leaky_relu_fwd(x, 0.2).array() * weights.array()).sum(); };
    const Scalar err = max_relative_grad_error(loss, {view_matrix(x, dx)});
    return {"leaky_relu", err, kLayerTol};
}

GradCheckResult check_masked_softmax(Rng& rng) {
    Matrix e = random_matrix(rng, 6, 6, -2, 2);
    Matrix mask = Matrix::Zero(6, 6);
    for (Eigen::Index r = 0; r < 6; ++r) {
        for (Eigen::Index c = 0; c < 6; ++c) {
            if (r != c && rng.next_double() < 0.4) {
                mask(r, c) = -1e9;
            }
        }
    }
    const Matrix weights = random_matrix(rng, 6, 6, -1, 1);
    const Matrix gamma = masked_softmax_fwd(e, mask);
    Matrix de = masked_softmax_bwd(gamma, weights);
    const auto loss = [&] {
        return (masked_softmax_fwd(e, mask).array() * weights.array()).sum();
    };
    const Scalar err = max_relative_grad_error(loss, {view_matrix(e, de)});
    return {"masked_softmax", err, kLayerTol};
}

GradCheckResult check_set_maxpool(Rng& rng) {
    // A spread factor keeps the argmax stable inside the difference window.
    Matrix x = random_matrix(rng, 6, 5, 0, 10);
    const Matrix weights = random_matrix(rng, 1, 5, -1, 1);
    std::vector<Eigen::Index> argmax;
    set_maxpool_fwd(x, argmax);
    Matrix dx = set_maxpool_bwd(6, argmax, weights);
    const auto loss = [&] {
        std::vector<Eigen::Index> a;
        return (set_maxpool_fwd(x, a).array() * weights.array()).sum();
    };
    const Scalar err = max_relative_grad_error(loss, {view_matrix(x, dx)});
    return {"set_maxpool", err, kLayerTol};
}

GradCheckResult check_weighted_max_subtract(Rng& rng) {
    Matrix x = random_matrix(rng, 6, 5, 0, 10);
    Param w(1, 5);
    w.value = random_matrix(rng, 1, 5, -0.5, 0.5);
    const Matrix weights = random_matrix(rng, 6, 5, -1, 1);
    std::vector<Eigen::Index> argmax;
    weighted_max_subtract_fwd(x, w, argmax);
    Matrix dx = weighted_max_subtract_bwd(x, w, argmax, weights);
    const auto loss = [&] {
        std::vector<Eigen::Index> a;
        return (weighted_max_subtract_fwd(x, w, a).array() * weights.array()).sum();
    };
    const Scalar err = max_relative_grad_error(loss, {view_matrix(x, dx), view_of(w)});
    return {"weighted_max_subtract", err, kLayerTol};
}

GradCheckResult check_model(Rng& rng, Pooling pooling) {
    ModelConfig cfg;
    cfg.encoder_widths = {5, 6};
    cfg.reduce_widths = {6, 5};
    cfg.gat_heads = 2;
    cfg.gat_head_widths = {3, 3};
    cfg.classifier_widths = {4};
    cfg.n_classes = 3;
    cfg.in_features = 4;
    cfg.pooling = pooling;

    PartGnn model(cfg);
    model.init_params(rng.next_u64());
    // Randomize the zero-initialized parameters too, so no pre-activation
    // sits exactly on a ReLU or max kink.
    for (const auto& [name, param] : model.named_params()) {
        if (name.ends_with(".b") || name.ends_with(".beta") || name.ends_with(".w_max")) {
            param->value = random_matrix(rng, param->value.rows(), param->value.cols(),
                                         -0.3, 0.3);
        } else if (name.ends_with(".gamma")) {
            param->value = random_matrix(rng, param->value.rows(), param->value.cols(),
                                         0.7, 1.3);
        }
    }

    const Index n_parts = 3;
    const Index n_points = 7;
    Matrix points = random_matrix(rng, n_parts * n_points, cfg.in_features, -1, 1);
    const Matrix mask = adjacency_mask(n_parts, {{0, 1}, {1, 2}});
    const Index label = 1;

    const auto loss_of = [&](const GnnOutput& out) {
        if (pooling == Pooling::MaxPool) {
            return cross_entropy_loss(out.object_probs, label);
        }
        Scalar loss = 0;
        for (Eigen::Index p = 0; p < out.node_probs.rows(); ++p) {
            loss += cross_entropy_loss(out.node_probs.row(p).transpose(), label);
        }
        return loss / static_cast<Scalar>(out.node_probs.rows());
    };

    GnnCache cache;
    const GnnOutput out = model.forward(points, n_parts, mask, Mode::Train, &cache);
    Matrix dlogits;
    if (pooling == Pooling::MaxPool) {
        dlogits = cross_entropy_logit_grad(out.object_probs, label).transpose();
    } else {
        dlogits = out.node_probs;
        dlogits.col(label).array() -= 1.0;
        dlogits /= static_cast<Scalar>(n_parts);
    }
    model.zero_grad();
    Matrix dpoints = model.backward(cache, dlogits);

    std::vector<ParamView> views;
    for (const auto& [name, param] : model.named_params()) {
        views.push_back(view_of(*param));
    }
    views.push_back(view_matrix(points, dpoints));

    const auto loss = [&] {
        return loss_of(model.forward(points, n_parts, mask, Mode::Train));
    };
    const Scalar err = max_relative_grad_error(loss, views);
    return {pooling == Pooling::MaxPool ? "model_maxpool" : "model_singlenode", err,
            kModelTol};
}

} // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> results;
    results.push_back(check_dense(rng));
    results.push_back(check_batch_norm(rng, Mode::Train));
    results.push_back(check_batch_norm(rng, Mode::Eval));
    results.push_back(check_relu(rng));
    results.push_back(check_leaky_relu(rng));
    results.push_back(check_masked_softmax(rng));
    results.push_back(check_set_maxpool(rng));
    results.push_back(check_weighted_max_subtract(rng));
    results.push_back(check_model(rng, Pooling::MaxPool));
    results.push_back(check_model(rng, Pooling::SingleNode));
    return results;
}

} // namespace partgraph::nn
