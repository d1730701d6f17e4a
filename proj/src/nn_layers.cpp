#include "partgraph/nn/layers.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <cmath>
#include <string>

namespace partgraph::nn {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ShapeMismatchError(what);
    }
}

} // namespace

Matrix dense_fwd(const Matrix& x, const DenseParams& p) {
    require(x.cols() == p.W.value.rows(), "dense: input width " + std::to_string(x.cols()) +
                                              " vs W rows " + std::to_string(p.W.value.rows()));
    return (x * p.W.value).rowwise() + p.b.value.row(0);
}

Matrix dense_bwd(const Matrix& x, DenseParams& p, const Matrix& dy) {
    require(dy.rows() == x.rows() && dy.cols() == p.W.value.cols(), "dense backward shape");
    p.W.grad.noalias() += x.transpose() * dy;
    p.b.grad.row(0) += dy.colwise().sum();
    return dy * p.W.value.transpose();
}

Matrix batch_norm_fwd(const Matrix& x, BatchNormParams& p, Mode mode, BatchNormCache& cache) {
    require(x.cols() == p.gamma.value.cols(), "batch_norm: feature width");
    cache.mode = mode;

    Matrix mean;
    Matrix var;
    if (mode == Mode::Train) {
        if (x.rows() < 2) {
            throw SingletonBatchError("batch_norm needs >= 2 rows in train mode");
        }
        mean = x.colwise().mean();
        var = (x.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
        p.running_mean += p.momentum * (mean - p.running_mean);
        p.running_var += p.momentum * (var - p.running_var);
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }

    cache.inv_std = (var.array() + p.epsilon).rsqrt().matrix();
    const Matrix centered = x.rowwise() - mean.row(0);
    cache.xhat = centered * cache.inv_std.row(0).asDiagonal();
    Matrix y = cache.xhat * p.gamma.value.row(0).asDiagonal();
    y.rowwise() += p.beta.value.row(0);
    return y;
}

Matrix batch_norm_bwd(const BatchNormCache& cache, BatchNormParams& p, const Matrix& dy) {
    require(dy.rows() == cache.xhat.rows() && dy.cols() == cache.xhat.cols(),
            "batch_norm backward shape");
    p.gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    p.beta.grad.row(0) += dy.colwise().sum();

    const Matrix dxhat = dy * p.gamma.value.row(0).asDiagonal();
    if (cache.mode == Mode::Eval) {
        return dxhat * cache.inv_std.row(0).asDiagonal();
    }
    const auto n = static_cast<Scalar>(dy.rows());
    const Matrix sum_dxhat = dxhat.colwise().sum();
    const Matrix sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum().matrix();
    Matrix dx = n * dxhat;
    dx.rowwise() -= sum_dxhat.row(0);
    dx -= cache.xhat * sum_dxhat_xhat.row(0).asDiagonal();
    return (dx * cache.inv_std.row(0).asDiagonal()) / n;
}

Matrix relu_fwd(const Matrix& x) {
    return x.cwiseMax(0.0);
}

Matrix relu_bwd(const Matrix& x, const Matrix& dy) {
    return (x.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

Matrix leaky_relu_fwd(const Matrix& x, Scalar slope) {
    return (x.array() > 0.0).select(x, slope * x);
}

Matrix leaky_relu_bwd(const Matrix& x, const Matrix& dy, Scalar slope) {
    return (x.array() > 0.0).select(dy, slope * dy);
}

Matrix masked_softmax_fwd(const Matrix& e, const Matrix& bias_mask) {
    require(e.rows() == bias_mask.rows() && e.cols() == bias_mask.cols(), "masked_softmax shape");
    Matrix s = e + bias_mask;
    const Vector row_max = s.rowwise().maxCoeff();
    s.colwise() -= row_max;
    Matrix g = s.array().exp().matrix();
    const Vector inv_row_sum = g.rowwise().sum().cwiseInverse();
    return inv_row_sum.asDiagonal() * g;
}

Matrix masked_softmax_bwd(const Matrix& gamma, const Matrix& dgamma) {
    const Vector dot = (gamma.array() * dgamma.array()).rowwise().sum().matrix();
    Matrix shifted = dgamma;
    shifted.colwise() -= dot;
    return gamma.cwiseProduct(shifted);
}

Matrix set_maxpool_fwd(const Matrix& x, std::vector<Eigen::Index>& argmax) {
    argmax.assign(static_cast<std::size_t>(x.cols()), 0);
    Matrix out(1, x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Index row = 0;
        out(0, c) = x.col(c).maxCoeff(&row);
        argmax[static_cast<std::size_t>(c)] = row;
    }
    return out;
}

Matrix set_maxpool_bwd(Eigen::Index rows, const std::vector<Eigen::Index>& argmax,
                       const Matrix& dy) {
    Matrix dx = Matrix::Zero(rows, dy.cols());
    for (Eigen::Index c = 0; c < dy.cols(); ++c) {
        dx(argmax[static_cast<std::size_t>(c)], c) = dy(0, c);
    }
    return dx;
}

Matrix weighted_max_subtract_fwd(const Matrix& x, const Param& w,
                                 std::vector<Eigen::Index>& argmax) {
    require(w.value.cols() == x.cols(), "weighted_max_subtract: filter width");
    Matrix maxes = set_maxpool_fwd(x, argmax);
    Matrix y = x;
    y.array().rowwise() -= w.value.row(0).array() * maxes.row(0).array();
    return y;
}

Matrix weighted_max_subtract_bwd(const Matrix& x, Param& w,
                                 const std::vector<Eigen::Index>& argmax, const Matrix& dy) {
    Matrix dx = dy;
    const Matrix col_sums = dy.colwise().sum();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const Eigen::Index m = argmax[static_cast<std::size_t>(c)];
        dx(m, c) -= w.value(0, c) * col_sums(0, c);
        w.grad(0, c) -= x(m, c) * col_sums(0, c);
    }
    return dx;
}

Scalar max_relative_grad_error(const std::function<Scalar()>& loss,
                               const std::vector<ParamView>& views, Scalar eps) {
    Scalar worst = 0.0;
    for (const ParamView& view : views) {
        for (Eigen::Index i = 0; i < view.size; ++i) {
            const Scalar saved = view.value[i];
            view.value[i] = saved + eps;
            const Scalar up = loss();
            view.value[i] = saved - eps;
            const Scalar down = loss();
            view.value[i] = saved;
            const Scalar numeric = (up - down) / (2.0 * eps);
            const Scalar analytic = view.grad[i];
            const Scalar diff = std::abs(analytic - numeric);
            // Central differences cannot resolve below ulp(loss)/(2*eps), about
            // 1e-11 for O(1) losses; differences under the floor are agreement,
            // not error (matters for parameters whose true gradient is zero,
            // e.g. a bias feeding a train-mode batch norm).
            if (diff <= kGradNoiseFloor) {
                continue;
            }
            const Scalar err =
                diff / std::max(Scalar(1e-8), std::abs(analytic) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

void glorot_init(Matrix& w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = rng.next_uniform(-bound, bound);
        }
    }
}

} // namespace partgraph::nn
