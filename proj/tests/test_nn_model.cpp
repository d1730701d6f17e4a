#include <doctest.h>

#include "partgraph/errors.hpp"
#include "partgraph/nn/model.hpp"
#include "partgraph/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

using namespace partgraph;
using namespace partgraph::nn;

namespace {

ModelConfig toy_config(Pooling pooling) {
    ModelConfig cfg;
    cfg.encoder_widths = {6, 8};
    cfg.reduce_widths = {8, 5};
    cfg.gat_heads = 2;
    cfg.gat_head_widths = {3, 4};
    cfg.classifier_widths = {6};
    cfg.n_classes = 3;
    cfg.in_features = 4;
    cfg.pooling = pooling;
    return cfg;
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                     double hi = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = rng.next_uniform(lo, hi);
        }
    }
    return m;
}

// One train-mode pass moves the batch-norm running stats off their initial
// values, so later eval-mode forwards exercise real normalization.
void warm_up(PartGnn& model, Rng& rng, Index n_parts, Index n_points) {
    const Matrix mask = Matrix::Zero(n_parts, n_parts);
    const Matrix points =
        random_matrix(rng, n_parts * n_points, model.config().in_features);
    model.forward(points, n_parts, mask, Mode::Train);
}

// Attention layer computed the slow explicit way, one coefficient at a time.
Matrix gat_oracle(const Matrix& h, const Matrix& mask, const GatLayer& layer) {
    const Eigen::Index n = h.rows();
    const Eigen::Index w = layer.heads.front().W.value.cols();
    Matrix out(n, static_cast<Eigen::Index>(layer.heads.size()) * w);
    for (std::size_t k = 0; k < layer.heads.size(); ++k) {
        const Matrix p = h * layer.heads[k].W.value;
        const Matrix& a = layer.heads[k].a.value;
        for (Eigen::Index i = 0; i < n; ++i) {
            // Row-stochastic weights over the unmasked neighborhood of i.
            std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
            double best = -1e300;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mask(i, j) != 0.0) {
                    continue;
                }
                double e = 0.0;
                for (Eigen::Index c = 0; c < w; ++c) {
                    e += a(c, 0) * p(i, c) + a(w + c, 0) * p(j, c);
                }
                e = e >= 0.0 ? e : 0.2 * e;
                weight[static_cast<std::size_t>(j)] = e;
                best = std::max(best, e);
            }
            double z = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mask(i, j) == 0.0) {
                    z += std::exp(weight[static_cast<std::size_t>(j)] - best);
                }
            }
            for (Eigen::Index c = 0; c < w; ++c) {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (mask(i, j) == 0.0) {
                        acc += std::exp(weight[static_cast<std::size_t>(j)] - best) / z * p(j, c);
                    }
                }
                out(i, static_cast<Eigen::Index>(k) * w + c) = std::max(acc, 0.0);
            }
        }
    }
    return out;
}

GatLayer random_gat_layer(Rng& rng, Eigen::Index f_in, Eigen::Index width, int heads) {
    GatLayer layer;
    for (int k = 0; k < heads; ++k) {
        AttentionHead head;
        head.W = Param(f_in, width);
        head.a = Param(2 * width, 1);
        head.W.value = random_matrix(rng, f_in, width);
        head.a.value = random_matrix(rng, 2 * width, 1);
        layer.heads.push_back(std::move(head));
    }
    return layer;
}

} // namespace

TEST_CASE("adjacency mask opens the diagonal and the given edges") {
    const Matrix mask = adjacency_mask(4, {{0, 1}, {2, 3}});
    for (Index i = 0; i < 4; ++i) {
        CHECK(mask(i, i) == 0.0);
    }
    CHECK(mask(0, 1) == 0.0);
    CHECK(mask(1, 0) == 0.0);
    CHECK(mask(2, 3) == 0.0);
    CHECK(mask(0, 2) == -1e9);
    CHECK(mask == mask.transpose().eval());

    CHECK_THROWS_AS(adjacency_mask(2, {{0, 5}}), ShapeMismatchError);
}

TEST_CASE("zero-rate disconnection is a no-op that draws nothing") {
    const Matrix mask = adjacency_mask(5, {{0, 1}, {1, 2}, {3, 4}});
    Rng rng(7);
    Rng untouched(7);
    CHECK(apply_disconnection(mask, 0.0, rng) == mask);
    // The generator state must be identical to one that never ran.
    CHECK(rng.next_u64() == untouched.next_u64());
}

TEST_CASE("full-rate disconnection leaves only self-loops") {
    const Matrix mask = adjacency_mask(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    Rng rng(3);
    const Matrix cut = apply_disconnection(mask, 1.0, rng);
    for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 4; ++j) {
            CHECK(cut(i, j) == (i == j ? 0.0 : -1e9));
        }
    }
}

TEST_CASE("disconnection selects nodes at the requested rate") {
    Rng rng(11);
    int fully_masked = 0;
    const int masks = 100;
    const Index n = 100;
    Matrix complete = Matrix::Zero(n, n); // complete graph: everything open
    for (int m = 0; m < masks; ++m) {
        const Matrix cut = apply_disconnection(complete, 0.75, rng);
        CHECK(cut == cut.transpose().eval());
        for (Index i = 0; i < n; ++i) {
            CHECK(cut(i, i) == 0.0);
            bool all_cut = true;
            for (Index j = 0; j < n && all_cut; ++j) {
                all_cut = i == j || cut(i, j) == -1e9;
            }
            fully_masked += all_cut ? 1 : 0;
        }
    }
    const double fraction = double(fully_masked) / double(masks * n);
    CHECK(fraction == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("attention layer reduces to a per-node projection on isolated nodes") {
    Rng rng(5);
    const GatLayer layer = random_gat_layer(rng, 4, 3, 2);
    const Matrix h = random_matrix(rng, 3, 4);
    const Matrix mask = adjacency_mask(3, {}); // no edges: self-loops only

    const Matrix out = gat_layer_forward(h, mask, layer);
    for (int k = 0; k < 2; ++k) {
        const Matrix projected = h * layer.heads[static_cast<std::size_t>(k)].W.value;
        const Matrix expected = projected.cwiseMax(0.0);
        CHECK((out.middleCols(3 * k, 3) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("zero attention vectors make every neighborhood uniform") {
    Rng rng(9);
    GatLayer layer = random_gat_layer(rng, 5, 4, 1);
    layer.heads[0].a.value.setZero();
    const Matrix h = random_matrix(rng, 3, 5);
    const Matrix mask = adjacency_mask(3, {{0, 1}, {1, 2}});

    const Matrix out = gat_layer_forward(h, mask, layer);
    const Matrix p = h * layer.heads[0].W.value;
    const Matrix mean_all = (p.row(0) + p.row(1) + p.row(2)) / 3.0;
    CHECK((out.row(1) - mean_all.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix mean_01 = (p.row(0) + p.row(1)) / 2.0;
    CHECK((out.row(0) - mean_01.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention layer matches the explicit oracle on random graphs") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_below(5));
        std::vector<std::pair<Index, Index>> edges;
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                if (rng.next_double() < 0.5) {
                    edges.emplace_back(i, j);
                }
            }
        }
        const Matrix mask = adjacency_mask(n, edges);
        const GatLayer layer = random_gat_layer(rng, 4, 3, 2);
        const Matrix h = random_matrix(rng, n, 4);
        const Matrix got = gat_layer_forward(h, mask, layer);
        const Matrix want = gat_oracle(h, mask, layer);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);

        GatLayerCache cache;
        gat_layer_forward(h, mask, layer, &cache);
        for (const GatHeadCache& head : cache.heads) {
            for (Eigen::Index i = 0; i < n; ++i) {
                CHECK(std::abs(head.gamma.row(i).sum() - 1.0) < 1e-12);
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (mask(i, j) != 0.0) {
                        CHECK(head.gamma(i, j) < 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("classifier outputs are normalized distributions") {
    for (const Pooling pooling : {Pooling::MaxPool, Pooling::SingleNode}) {
        PartGnn model(toy_config(pooling));
        model.init_params(1);
        Rng rng(2);
        warm_up(model, rng, 3, 7);

        const Matrix points = random_matrix(rng, 3 * 7, 4);
        const Matrix mask = adjacency_mask(3, {{0, 1}});
        const GnnOutput out = model.forward(points, 3, mask, Mode::Eval);
        CHECK(out.object_probs.size() == 3);
        CHECK(std::abs(out.object_probs.sum() - 1.0) < 1e-9);
        CHECK(out.object_probs.minCoeff() >= 0.0);
        if (pooling == Pooling::SingleNode) {
            REQUIRE(out.node_probs.rows() == 3);
            for (Eigen::Index i = 0; i < 3; ++i) {
                CHECK(std::abs(out.node_probs.row(i).sum() - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("forward validates its shapes") {
    PartGnn model(toy_config(Pooling::MaxPool));
    model.init_params(0);
    const Matrix mask = adjacency_mask(2, {});
    CHECK_THROWS_AS(model.forward(Matrix::Zero(10, 4), 0, mask, Mode::Eval), EmptyGraphError);
    CHECK_THROWS_AS(model.forward(Matrix::Zero(9, 4), 2, mask, Mode::Eval), ShapeMismatchError);
    CHECK_THROWS_AS(model.forward(Matrix::Zero(10, 3), 2, mask, Mode::Eval), ShapeMismatchError);
    CHECK_THROWS_AS(model.forward(Matrix::Zero(10, 4), 2, Matrix::Zero(3, 3), Mode::Eval),
                    ShapeMismatchError);
}

TEST_CASE("node permutations permute node outputs and preserve the prediction") {
    for (const Pooling pooling : {Pooling::MaxPool, Pooling::SingleNode}) {
        PartGnn model(toy_config(pooling));
        model.init_params(3);
        Rng rng(17);
        warm_up(model, rng, 4, 6);

        const Index n_parts = 4, n_points = 6;
        const Matrix points = random_matrix(rng, n_parts * n_points, 4);
        const Matrix mask = adjacency_mask(n_parts, {{0, 1}, {1, 2}, {0, 3}});

        const std::vector<Index> perm{2, 0, 3, 1}; // new position -> old part
        Matrix perm_points(points.rows(), points.cols());
        Matrix perm_mask(n_parts, n_parts);
        for (Index i = 0; i < n_parts; ++i) {
            perm_points.middleRows(i * n_points, n_points) =
                points.middleRows(perm[static_cast<std::size_t>(i)] * n_points, n_points);
            for (Index j = 0; j < n_parts; ++j) {
                perm_mask(i, j) = mask(perm[static_cast<std::size_t>(i)],
                                       perm[static_cast<std::size_t>(j)]);
            }
        }

        const GnnOutput base = model.forward(points, n_parts, mask, Mode::Eval);
        const GnnOutput shuffled = model.forward(perm_points, n_parts, perm_mask, Mode::Eval);
        CHECK((base.object_probs - shuffled.object_probs).cwiseAbs().maxCoeff() < 1e-9);
        if (pooling == Pooling::SingleNode) {
            for (Index i = 0; i < n_parts; ++i) {
                CHECK((shuffled.node_probs.row(i) -
                       base.node_probs.row(perm[static_cast<std::size_t>(i)]))
                          .cwiseAbs()
                          .maxCoeff() < 1e-9);
            }
        }
    }
}

TEST_CASE("both pooling heads agree on a one-node graph") {
    PartGnn max_model(toy_config(Pooling::MaxPool));
    PartGnn single_model(toy_config(Pooling::SingleNode));
    max_model.init_params(21);
    single_model.init_params(21); // same draws: identical parameters

    Rng rng(23);
    const Matrix points = random_matrix(rng, 9, 4);
    const Matrix mask = Matrix::Zero(1, 1);
    const GnnOutput a = max_model.forward(points, 1, mask, Mode::Eval);
    const GnnOutput b = single_model.forward(points, 1, mask, Mode::Eval);
    CHECK((a.object_probs - b.object_probs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicating a node does not move the max-pooled prediction") {
    // Attention redistributes mass when a neighborhood gains a clone, so the
    // clean idempotence statement uses nodes whose neighborhoods the clone
    // cannot disturb: an edgeless graph.
    PartGnn model(toy_config(Pooling::MaxPool));
    model.init_params(5);
    Rng rng(31);
    warm_up(model, rng, 4, 5);

    const Index n_points = 5;
    const Matrix points = random_matrix(rng, 3 * n_points, 4);
    const Matrix mask = adjacency_mask(3, {});
    const GnnOutput base = model.forward(points, 3, mask, Mode::Eval);

    Matrix dup_points(4 * n_points, 4);
    dup_points.topRows(3 * n_points) = points;
    dup_points.bottomRows(n_points) = points.middleRows(n_points, n_points);
    const GnnOutput dup =
        model.forward(dup_points, 4, adjacency_mask(4, {}), Mode::Eval);
    CHECK((base.object_probs - dup.object_probs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a clone with the original's neighbors reproduces its node output") {
    PartGnn model(toy_config(Pooling::SingleNode));
    model.init_params(5);
    Rng rng(43);
    warm_up(model, rng, 4, 5);

    const Index n_points = 5;
    const Matrix points = random_matrix(rng, 3 * n_points, 4);
    const Matrix mask = adjacency_mask(3, {{0, 1}, {1, 2}});
    const GnnOutput base = model.forward(points, 3, mask, Mode::Eval);

    // Node 3 clones node 1: same point rows, same neighbors (0 and 2). The
    // two stay indistinguishable layer by layer, so their per-node
    // predictions coincide; the neighbors' predictions shift because their
    // attention now sees the clone too.
    Matrix dup_points(4 * n_points, 4);
    dup_points.topRows(3 * n_points) = points;
    dup_points.bottomRows(n_points) = points.middleRows(n_points, n_points);
    const Matrix dup_mask = adjacency_mask(4, {{0, 1}, {1, 2}, {0, 3}, {2, 3}});
    const GnnOutput dup = model.forward(dup_points, 4, dup_mask, Mode::Eval);
    CHECK((dup.node_probs.row(3) - dup.node_probs.row(1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dup.node_probs.row(0) - base.node_probs.row(0)).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("with every edge cut the node head averages independent predictions") {
    PartGnn model(toy_config(Pooling::SingleNode));
    model.init_params(12);
    Rng rng(37);
    warm_up(model, rng, 3, 6);

    const Index n_parts = 3, n_points = 6;
    const Matrix points = random_matrix(rng, n_parts * n_points, 4);
    Matrix cut = Matrix::Constant(n_parts, n_parts, -1e9);
    cut.diagonal().setZero();

    const GnnOutput joint = model.forward(points, n_parts, cut, Mode::Eval);
    Vector mean = Vector::Zero(3);
    for (Index i = 0; i < n_parts; ++i) {
        const Matrix one = points.middleRows(i * n_points, n_points);
        const GnnOutput solo = model.forward(one, 1, Matrix::Zero(1, 1), Mode::Eval);
        CHECK((joint.node_probs.row(i).transpose() - solo.object_probs).cwiseAbs().maxCoeff() <
              1e-9);
        mean += solo.object_probs;
    }
    mean /= static_cast<Scalar>(n_parts);
    CHECK((joint.object_probs - mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("part encoding ignores the order of its points") {
    PartGnn model(toy_config(Pooling::MaxPool));
    model.init_params(8);
    Rng rng(41);
    warm_up(model, rng, 2, 8);

    const Matrix points = random_matrix(rng, 8, 4);
    const Vector base = model.encode_part(points, Mode::Eval);
    CHECK(base.size() == 5); // final reduced width of the toy config

    Matrix reversed(8, 4);
    for (Eigen::Index i = 0; i < 8; ++i) {
        reversed.row(i) = points.row(7 - i);
    }
    const Vector flipped = model.encode_part(reversed, Mode::Eval);
    CHECK((base - flipped).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("named parameters and state cover the whole model uniquely") {
    PartGnn model(toy_config(Pooling::MaxPool));
    const auto params = model.named_params();
    const auto state = model.named_state();
    // 2 encoder layers x 5 arrays + 2 reduce layers x 4 + 2 gat layers x 2
    // heads x 2 + 2 classifier layers x 2 (hidden + projection).
    CHECK(params.size() == 2 * 5 + 2 * 4 + 2 * 2 * 2 + 2 * 2);
    CHECK(state.size() == (2 + 2) * 2);

    std::vector<std::string> names;
    for (const auto& [name, param] : params) {
        names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}
