#pragma once

#include <cmath>

#include "crisisvit/model_config.hpp"
#include "crisisvit/types.hpp"

// Forward/backward primitives over one token sequence (rows = tokens).
// Backward functions accumulate into the supplied gradient arrays.

namespace crisisvit::layers {

template <typename Scalar>
Matrix<Scalar> linear(const Matrix<Scalar>& x, const Matrix<Scalar>& weight,
                      const Matrix<Scalar>& bias) {
    Matrix<Scalar> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
}

template <typename Scalar>
Matrix<Scalar> linear_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& weight,
                               const Matrix<Scalar>& dy, Matrix<Scalar>& dweight,
                               Matrix<Scalar>& dbias) {
    dweight.noalias() += x.transpose() * dy;
    dbias.row(0) += dy.colwise().sum();
    return dy * weight.transpose();
}

template <typename Scalar>
struct LayerNormCache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
};

inline constexpr double kLayerNormEps = 1e-6;

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Matrix<Scalar>& gamma,
                          const Matrix<Scalar>& beta, LayerNormCache<Scalar>& cache) {
    const auto n = static_cast<Scalar>(x.cols());
    Vector<Scalar> mean = x.rowwise().sum() / n;
    Matrix<Scalar> centered = x.colwise() - mean;
    Vector<Scalar> var = centered.rowwise().squaredNorm() / n;
    cache.inv_std = (var.array() + Scalar(kLayerNormEps)).rsqrt().matrix();
    cache.normalized = cache.inv_std.asDiagonal() * centered;
    Matrix<Scalar> y = cache.normalized.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const LayerNormCache<Scalar>& cache, const Matrix<Scalar>& gamma,
                                   const Matrix<Scalar>& dy, Matrix<Scalar>& dgamma,
                                   Matrix<Scalar>& dbeta) {
    const auto& xhat = cache.normalized;
    dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    dbeta.row(0) += dy.colwise().sum();
    Matrix<Scalar> dxhat = dy.array().rowwise() * gamma.row(0).array();
    const auto n = static_cast<Scalar>(dy.cols());
    Vector<Scalar> mean_d = dxhat.rowwise().sum() / n;
    Vector<Scalar> mean_dx = (dxhat.array() * xhat.array()).rowwise().sum().matrix() / n;
    Matrix<Scalar> dx = dxhat;
    dx.colwise() -= mean_d;
    dx -= (xhat.array().colwise() * mean_dx.array()).matrix();
    return cache.inv_std.asDiagonal() * dx;
}

template <typename Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& x, Activation act) {
    if (act == Activation::relu) return x.cwiseMax(Scalar(0));
    const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
    return x.unaryExpr([&](Scalar v) { return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2)); });
}

template <typename Scalar>
Matrix<Scalar> activate_backward(const Matrix<Scalar>& pre, const Matrix<Scalar>& dy, Activation act) {
    if (act == Activation::relu)
        return (pre.array() > Scalar(0)).select(dy, Matrix<Scalar>::Zero(dy.rows(), dy.cols()));
    const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
    const Scalar inv_sqrt2pi = Scalar(0.39894228040143267794);
    Matrix<Scalar> deriv = pre.unaryExpr([&](Scalar v) {
        return Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v);
    });
    return dy.cwiseProduct(deriv);
}

/// Numerically stable row-wise softmax.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
    Matrix<Scalar> out = logits;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const Scalar m = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

template <typename Scalar>
struct AttentionCache {
    Matrix<Scalar> input;
    Matrix<Scalar> qkv;
    std::vector<Matrix<Scalar>> probs;  // per head, tokens x tokens
    Matrix<Scalar> context;             // concatenated head outputs
};

/// Multi-head self-attention with fused qkv projection (hidden -> 3*hidden).
template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& x, const Matrix<Scalar>& qkv_w, const Matrix<Scalar>& qkv_b,
                         const Matrix<Scalar>& proj_w, const Matrix<Scalar>& proj_b, int num_heads,
                         AttentionCache<Scalar>& cache) {
    const Eigen::Index tokens = x.rows();
    const Eigen::Index hidden = x.cols();
    const Eigen::Index hd = hidden / num_heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

    cache.input = x;
    cache.qkv = linear(x, qkv_w, qkv_b);
    cache.probs.assign(static_cast<std::size_t>(num_heads), Matrix<Scalar>());
    cache.context.resize(tokens, hidden);
    for (int h = 0; h < num_heads; ++h) {
        auto q = cache.qkv.middleCols(h * hd, hd);
        auto k = cache.qkv.middleCols(hidden + h * hd, hd);
        auto v = cache.qkv.middleCols(2 * hidden + h * hd, hd);
        Matrix<Scalar> scores = (q * k.transpose()) * scale;
        cache.probs[static_cast<std::size_t>(h)] = softmax_rows(scores);
        cache.context.middleCols(h * hd, hd).noalias() = cache.probs[static_cast<std::size_t>(h)] * v;
    }
    return linear(cache.context, proj_w, proj_b);
}

template <typename Scalar>
Matrix<Scalar> attention_backward(const AttentionCache<Scalar>& cache, const Matrix<Scalar>& qkv_w,
                                  const Matrix<Scalar>& proj_w, int num_heads, const Matrix<Scalar>& dy,
                                  Matrix<Scalar>& dqkv_w, Matrix<Scalar>& dqkv_b, Matrix<Scalar>& dproj_w,
                                  Matrix<Scalar>& dproj_b) {
    const Eigen::Index tokens = cache.input.rows();
    const Eigen::Index hidden = cache.input.cols();
    const Eigen::Index hd = hidden / num_heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

    Matrix<Scalar> dcontext = linear_backward(cache.context, proj_w, dy, dproj_w, dproj_b);
    Matrix<Scalar> dqkv(tokens, 3 * hidden);
    for (int h = 0; h < num_heads; ++h) {
        const auto& p = cache.probs[static_cast<std::size_t>(h)];
        auto q = cache.qkv.middleCols(h * hd, hd);
        auto k = cache.qkv.middleCols(hidden + h * hd, hd);
        auto v = cache.qkv.middleCols(2 * hidden + h * hd, hd);
        auto dctx = dcontext.middleCols(h * hd, hd);

        Matrix<Scalar> dp = dctx * v.transpose();
        dqkv.middleCols(2 * hidden + h * hd, hd).noalias() = p.transpose() * dctx;
        Vector<Scalar> row_dot = (dp.array() * p.array()).rowwise().sum().matrix();
        Matrix<Scalar> ds = p.array() * (dp.colwise() - row_dot).array();
        ds *= scale;
        dqkv.middleCols(h * hd, hd).noalias() = ds * k;
        dqkv.middleCols(hidden + h * hd, hd).noalias() = ds.transpose() * q;
    }
    return linear_backward(cache.input, qkv_w, dqkv, dqkv_w, dqkv_b);
}

}  // namespace crisisvit::layers
