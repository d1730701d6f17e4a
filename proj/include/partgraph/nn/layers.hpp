#pragma once

#include "partgraph/types.hpp"

#include <functional>
#include <vector>

namespace partgraph {
class Rng;
}

namespace partgraph::nn {

enum class Mode { Train, Eval };

// Dense value with a same-shape gradient buffer. Vectors are 1 x n rows.
struct Param {
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(Eigen::Index rows, Eigen::Index cols)
        : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

struct DenseParams {
    Param W; // in x out
    Param b; // 1 x out
};

// y = x W + b. Backward accumulates into the parameter grads and returns dx.
Matrix dense_fwd(const Matrix& x, const DenseParams& p);
Matrix dense_bwd(const Matrix& x, DenseParams& p, const Matrix& dy);

struct BatchNormParams {
    Param gamma; // 1 x f
    Param beta;  // 1 x f
    Matrix running_mean; // 1 x f
    Matrix running_var;  // 1 x f
    Scalar momentum = 0.1;
    Scalar epsilon = 1e-5;

    explicit BatchNormParams(Eigen::Index f = 0)
        : gamma(1, f), beta(1, f),
          running_mean(Matrix::Zero(1, f)), running_var(Matrix::Ones(1, f)) {
        gamma.value.setOnes();
    }
};

struct BatchNormCache {
    Matrix xhat;
    Matrix inv_std; // 1 x f
    Mode mode = Mode::Train;
};

// Normalizes each feature column over the rows (the element axis). Train
// mode uses batch statistics and folds them into the running estimates;
// eval mode uses the running estimates. Train mode needs >= 2 rows.
Matrix batch_norm_fwd(const Matrix& x, BatchNormParams& p, Mode mode, BatchNormCache& cache);
Matrix batch_norm_bwd(const BatchNormCache& cache, BatchNormParams& p, const Matrix& dy);

Matrix relu_fwd(const Matrix& x);
Matrix relu_bwd(const Matrix& x, const Matrix& dy);
Matrix leaky_relu_fwd(const Matrix& x, Scalar slope);
Matrix leaky_relu_bwd(const Matrix& x, const Matrix& dy, Scalar slope);

// Row-wise softmax of (e + bias_mask), stabilized by row-max subtraction.
// bias_mask entries are 0 for connected pairs and -1e9 for disconnected ones.
Matrix masked_softmax_fwd(const Matrix& e, const Matrix& bias_mask);
Matrix masked_softmax_bwd(const Matrix& gamma, const Matrix& dgamma);

// Column-wise max over the set rows; ties resolve to the first row.
Matrix set_maxpool_fwd(const Matrix& x, std::vector<Eigen::Index>& argmax);
Matrix set_maxpool_bwd(Eigen::Index rows, const std::vector<Eigen::Index>& argmax,
                       const Matrix& dy);

// y[i,k] = x[i,k] - w[k] * max_j x[j,k], with w one learnable scalar per
// filter (1 x f row).
Matrix weighted_max_subtract_fwd(const Matrix& x, const Param& w,
                                 std::vector<Eigen::Index>& argmax);
Matrix weighted_max_subtract_bwd(const Matrix& x, Param& w,
                                 const std::vector<Eigen::Index>& argmax, const Matrix& dy);

// Central-finite-difference check. `views` binds parameter/input storage to
// the analytic gradients already accumulated for the same loss; the loss
// closure must be pure in those values. Returns the worst per-element
// relative error |a - n| / max(1e-8, |a| + |n|); differences at or below
// kGradNoiseFloor are below the resolution of the difference quotient itself
// and count as exact agreement.
inline constexpr Scalar kGradNoiseFloor = 1e-9;

struct ParamView {
    Scalar* value;
    const Scalar* grad;
    Eigen::Index size;
};

Scalar max_relative_grad_error(const std::function<Scalar()>& loss,
                               const std::vector<ParamView>& views, Scalar eps = 1e-5);

inline ParamView view_of(Param& p) {
    return {p.value.data(), p.grad.data(), p.value.size()};
}

// Glorot-uniform fill, the init used for every weight matrix in the model.
void glorot_init(Matrix& w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

} // namespace partgraph::nn
