#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crisisvit/image.hpp"
#include "crisisvit/layers.hpp"
#include "crisisvit/model_config.hpp"
#include "crisisvit/parameter_tree.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit {

/// Shape of a stack of pre-norm transformer blocks stored under `prefix`.
struct StackShape {
    std::string prefix;
    int depth = 0;
    int hidden = 0;
    int heads = 0;
    int mlp_dim = 0;
    Activation activation = Activation::relu;

    std::string block(int i) const { return prefix + "blocks." + std::to_string(i) + "."; }
};

inline StackShape encoder_stack(const ModelConfig& c) {
    return {"encoder.", c.depth, c.hidden_dim, c.num_heads, c.mlp_dim(), c.activation};
}

inline bool is_head_parameter(const std::string& name) { return name.rfind("head.", 0) == 0; }

// --- initialization -------------------------------------------------------

namespace init {

template <typename Scalar>
Matrix<Scalar> xavier_uniform(int fan_in, int fan_out, std::uint64_t seed) {
    Rng rng(seed);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix<Scalar> w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
    return w;
}

template <typename Scalar>
Matrix<Scalar> normal(int rows, int cols, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<Scalar> w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
    return w;
}

}  // namespace init

/// Adds a linear layer `name`.{weight,bias}. Each array draws from its own
/// stream keyed by (seed, name), so adding or removing other parameters never
/// changes it.
template <typename Scalar>
void add_linear(ParameterTree<Scalar>& p, const std::string& name, int in, int out, std::uint64_t seed) {
    p.set(name + ".weight", init::xavier_uniform<Scalar>(in, out, derive_seed(seed, name + ".weight")));
    p.set(name + ".bias", Matrix<Scalar>::Zero(1, out));
}

template <typename Scalar>
void add_layer_norm(ParameterTree<Scalar>& p, const std::string& name, int width) {
    p.set(name + ".weight", Matrix<Scalar>::Ones(1, width));
    p.set(name + ".bias", Matrix<Scalar>::Zero(1, width));
}

template <typename Scalar>
void add_stack(ParameterTree<Scalar>& p, const StackShape& s, std::uint64_t seed) {
    for (int i = 0; i < s.depth; ++i) {
        const std::string b = s.block(i);
        add_layer_norm(p, b + "norm1", s.hidden);
        add_linear(p, b + "attn.qkv", s.hidden, 3 * s.hidden, seed);
        add_linear(p, b + "attn.proj", s.hidden, s.hidden, seed);
        add_layer_norm(p, b + "norm2", s.hidden);
        add_linear(p, b + "mlp.fc1", s.hidden, s.mlp_dim, seed);
        add_linear(p, b + "mlp.fc2", s.mlp_dim, s.hidden, seed);
    }
    add_layer_norm(p, s.prefix + "norm", s.hidden);
}

template <typename Scalar>
void add_head(ParameterTree<Scalar>& p, int hidden, int num_classes, std::uint64_t seed) {
    p.set("head.weight", init::normal<Scalar>(hidden, num_classes, 0.01, derive_seed(seed, "head.weight")));
    p.set("head.bias", Matrix<Scalar>::Zero(1, num_classes));
}

/// Initialized parameter tree for `config`; bit-identical for equal (config, seed).
template <typename Scalar>
ParameterTree<Scalar> build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ParameterTree<Scalar> p;
    add_linear(p, "patch_embed", config.patch_dim(), config.hidden_dim, seed);
    p.set("cls_token", init::normal<Scalar>(1, config.hidden_dim, 0.02, derive_seed(seed, "cls_token")));
    p.set("pos_embed",
          init::normal<Scalar>(config.num_tokens(), config.hidden_dim, 0.02, derive_seed(seed, "pos_embed")));
    add_stack(p, encoder_stack(config), seed);
    if (config.num_classes > 0) add_head(p, config.hidden_dim, config.num_classes, seed);
    return p;
}

/// Names and shapes a tree built for `config` must have.
std::vector<std::pair<std::string, std::pair<long, long>>> expected_layout(const ModelConfig& config);

// --- transformer stack ----------------------------------------------------

template <typename Scalar>
struct BlockCache {
    layers::LayerNormCache<Scalar> ln1;
    layers::AttentionCache<Scalar> attn;
    layers::LayerNormCache<Scalar> ln2;
    Matrix<Scalar> ln2_out;
    Matrix<Scalar> fc1_pre;
    Matrix<Scalar> fc1_act;
};

template <typename Scalar>
struct StackCache {
    std::vector<BlockCache<Scalar>> blocks;
    layers::LayerNormCache<Scalar> final_norm;
};

template <typename Scalar>
Matrix<Scalar> stack_forward(const ParameterTree<Scalar>& p, const StackShape& s, Matrix<Scalar> x,
                             StackCache<Scalar>& cache) {
    cache.blocks.resize(static_cast<std::size_t>(s.depth));
    for (int i = 0; i < s.depth; ++i) {
        const std::string b = s.block(i);
        auto& c = cache.blocks[static_cast<std::size_t>(i)];
        Matrix<Scalar> z = layers::layer_norm(x, p.at(b + "norm1.weight"), p.at(b + "norm1.bias"), c.ln1);
        x += layers::attention(z, p.at(b + "attn.qkv.weight"), p.at(b + "attn.qkv.bias"),
                               p.at(b + "attn.proj.weight"), p.at(b + "attn.proj.bias"), s.heads, c.attn);
        c.ln2_out = layers::layer_norm(x, p.at(b + "norm2.weight"), p.at(b + "norm2.bias"), c.ln2);
        c.fc1_pre = layers::linear(c.ln2_out, p.at(b + "mlp.fc1.weight"), p.at(b + "mlp.fc1.bias"));
        c.fc1_act = layers::activate(c.fc1_pre, s.activation);
        x += layers::linear(c.fc1_act, p.at(b + "mlp.fc2.weight"), p.at(b + "mlp.fc2.bias"));
    }
    return layers::layer_norm(x, p.at(s.prefix + "norm.weight"), p.at(s.prefix + "norm.bias"), cache.final_norm);
}

template <typename Scalar>
Matrix<Scalar> stack_backward(const ParameterTree<Scalar>& p, const StackShape& s, const StackCache<Scalar>& cache,
                              const Matrix<Scalar>& dy, ParameterTree<Scalar>& g) {
    Matrix<Scalar> dx = layers::layer_norm_backward(cache.final_norm, p.at(s.prefix + "norm.weight"), dy,
                                                    g.at(s.prefix + "norm.weight"), g.at(s.prefix + "norm.bias"));
    for (int i = s.depth - 1; i >= 0; --i) {
        const std::string b = s.block(i);
        const auto& c = cache.blocks[static_cast<std::size_t>(i)];
        // mlp residual branch
        Matrix<Scalar> d_act = layers::linear_backward(c.fc1_act, p.at(b + "mlp.fc2.weight"), dx,
                                                       g.at(b + "mlp.fc2.weight"), g.at(b + "mlp.fc2.bias"));
        Matrix<Scalar> d_pre = layers::activate_backward(c.fc1_pre, d_act, s.activation);
        Matrix<Scalar> d_ln2 = layers::linear_backward(c.ln2_out, p.at(b + "mlp.fc1.weight"), d_pre,
                                                       g.at(b + "mlp.fc1.weight"), g.at(b + "mlp.fc1.bias"));
        dx += layers::layer_norm_backward(c.ln2, p.at(b + "norm2.weight"), d_ln2, g.at(b + "norm2.weight"),
                                          g.at(b + "norm2.bias"));
        // attention residual branch
        Matrix<Scalar> d_ln1 = layers::attention_backward(
            c.attn, p.at(b + "attn.qkv.weight"), p.at(b + "attn.proj.weight"), s.heads, dx,
            g.at(b + "attn.qkv.weight"), g.at(b + "attn.qkv.bias"), g.at(b + "attn.proj.weight"),
            g.at(b + "attn.proj.bias"));
        dx += layers::layer_norm_backward(c.ln1, p.at(b + "norm1.weight"), d_ln1, g.at(b + "norm1.weight"),
                                          g.at(b + "norm1.bias"));
    }
    return dx;
}

// --- encoder --------------------------------------------------------------

template <typename Scalar>
struct EncoderCache {
    Matrix<Scalar> patches;             // all patches of the image
    std::vector<int> visible;           // patch indices fed to the encoder
    StackCache<Scalar> stack;
};

/// Encode one image given as patches (num_patches x patch_dim). When
/// `visible` is given only those patches are embedded, so the output has
/// 1 + visible->size() rows; otherwise 1 + num_patches rows. Row 0 is the
/// class token.
template <typename Scalar>
Matrix<Scalar> encode_patches(const ParameterTree<Scalar>& p, const ModelConfig& c, const Matrix<Scalar>& patches,
                              const std::vector<int>* visible, EncoderCache<Scalar>& cache) {
    if (patches.rows() != c.num_patches() || patches.cols() != c.patch_dim())
        throw DimensionError("patch matrix shape does not match model config");
    cache.patches = patches;
    if (visible) {
        cache.visible = *visible;
    } else {
        cache.visible.resize(static_cast<std::size_t>(c.num_patches()));
        for (int i = 0; i < c.num_patches(); ++i) cache.visible[static_cast<std::size_t>(i)] = i;
    }
    const auto n = static_cast<Eigen::Index>(cache.visible.size());
    const auto& pos = p.at("pos_embed");

    Matrix<Scalar> kept(n, c.patch_dim());
    for (Eigen::Index i = 0; i < n; ++i) kept.row(i) = patches.row(cache.visible[static_cast<std::size_t>(i)]);
    Matrix<Scalar> emb = layers::linear(kept, p.at("patch_embed.weight"), p.at("patch_embed.bias"));

    Matrix<Scalar> x(n + 1, c.hidden_dim);
    x.row(0) = p.at("cls_token").row(0) + pos.row(0);
    for (Eigen::Index i = 0; i < n; ++i)
        x.row(i + 1) = emb.row(i) + pos.row(1 + cache.visible[static_cast<std::size_t>(i)]);
    return stack_forward(p, encoder_stack(c), std::move(x), cache.stack);
}

template <typename Scalar>
void encode_patches_backward(const ParameterTree<Scalar>& p, const ModelConfig& c, const EncoderCache<Scalar>& cache,
                             const Matrix<Scalar>& dtokens, ParameterTree<Scalar>& g) {
    Matrix<Scalar> dx = stack_backward(p, encoder_stack(c), cache.stack, dtokens, g);
    auto& dpos = g.at("pos_embed");
    const auto n = static_cast<Eigen::Index>(cache.visible.size());
    g.at("cls_token").row(0) += dx.row(0);
    dpos.row(0) += dx.row(0);
    Matrix<Scalar> kept(n, c.patch_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int idx = cache.visible[static_cast<std::size_t>(i)];
        dpos.row(1 + idx) += dx.row(i + 1);
        kept.row(i) = cache.patches.row(idx);
    }
    layers::linear_backward(kept, p.at("patch_embed.weight"), Matrix<Scalar>(dx.bottomRows(n)),
                            g.at("patch_embed.weight"), g.at("patch_embed.bias"));
}

/// Token embeddings per image, each (1 + num_patches) x hidden_dim.
template <typename Scalar>
std::vector<Matrix<Scalar>> encode_batch(const ParameterTree<Scalar>& p, const ModelConfig& c,
                                         const ImageTensorBatch<Scalar>& batch) {
    batch.check_against(c);
    std::vector<Matrix<Scalar>> out;
    out.reserve(batch.size());
    EncoderCache<Scalar> cache;
    for (const auto& im : batch.images)
        out.push_back(encode_patches(p, c, patchify(im, c.image_size, c.patch_size), nullptr, cache));
    return out;
}

/// Head logits, batch x num_classes. Classification reads the class token.
template <typename Scalar>
Matrix<Scalar> forward_logits(const ParameterTree<Scalar>& p, const ModelConfig& c,
                              const ImageTensorBatch<Scalar>& batch) {
    if (c.headless()) throw UsageError("model is headless; attach a head before classifying");
    batch.check_against(c);
    Matrix<Scalar> logits(static_cast<Eigen::Index>(batch.size()), c.num_classes);
    EncoderCache<Scalar> cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Matrix<Scalar> tokens = encode_patches(p, c, patchify(batch.images[i], c.image_size, c.patch_size), nullptr, cache);
        logits.row(static_cast<Eigen::Index>(i)) =
            tokens.row(0) * p.at("head.weight") + p.at("head.bias").row(0);
    }
    return logits;
}

/// Mean cross-entropy over the batch (with optional label smoothing). When
/// `grads` is given, d(loss)/d(params) is accumulated into it.
template <typename Scalar>
Scalar classification_loss(const ParameterTree<Scalar>& p, const ModelConfig& c,
                           const std::vector<const Matrix<Scalar>*>& patch_sets, const std::vector<int>& labels,
                           Scalar label_smoothing, ParameterTree<Scalar>* grads, Matrix<Scalar>* logits_out = nullptr) {
    if (c.headless()) throw UsageError("model is headless; attach a head before training a classifier");
    if (patch_sets.size() != labels.size() || patch_sets.empty())
        throw DimensionError("classification batch: images and labels differ in count or are empty");
    const auto batch = static_cast<Scalar>(patch_sets.size());
    const int k = c.num_classes;
    if (logits_out) logits_out->resize(static_cast<Eigen::Index>(patch_sets.size()), k);

    Scalar total = 0;
    EncoderCache<Scalar> cache;
    for (std::size_t i = 0; i < patch_sets.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw IntegrityError("label index out of range for head width");
        Matrix<Scalar> tokens = encode_patches(p, c, *patch_sets[i], nullptr, cache);
        Matrix<Scalar> cls = tokens.topRows(1);
        Matrix<Scalar> logits = layers::linear(cls, p.at("head.weight"), p.at("head.bias"));
        if (logits_out) logits_out->row(static_cast<Eigen::Index>(i)) = logits.row(0);

        Matrix<Scalar> target = Matrix<Scalar>::Constant(1, k, label_smoothing / k);
        target(0, labels[i]) += Scalar(1) - label_smoothing;
        const Scalar m = logits.maxCoeff();
        const Scalar lse = m + std::log((logits.array() - m).exp().sum());
        total += -(target.array() * (logits.array() - lse)).sum();

        if (grads) {
            Matrix<Scalar> dlogits = (layers::softmax_rows(logits) - target) / batch;
            Matrix<Scalar> dcls = layers::linear_backward(cls, p.at("head.weight"), dlogits,
                                                          grads->at("head.weight"), grads->at("head.bias"));
            Matrix<Scalar> dtokens = Matrix<Scalar>::Zero(tokens.rows(), tokens.cols());
            dtokens.row(0) = dcls.row(0);
            encode_patches_backward(p, c, cache, dtokens, *grads);
        }
    }
    return total / batch;
}

}  // namespace crisisvit
