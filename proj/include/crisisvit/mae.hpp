#pragma once

#include <cstdint>
#include <vector>

#include "crisisvit/checkpoint.hpp"
#include "crisisvit/dataset.hpp"
#include "crisisvit/optim.hpp"
#include "crisisvit/run_ledger.hpp"
#include "crisisvit/vit.hpp"

namespace crisisvit {

/// Which patches of one image are hidden from the encoder.
struct MaskPlan {
    int total_patches = 0;
    double mask_ratio = 0;
    std::vector<int> masked_indices;  // sorted, unique

    std::vector<int> visible_indices() const;
    std::vector<char> mask_flags() const;  // 1 = masked
};

/// Exactly round(mask_ratio * total_patches) indices drawn uniformly without
/// replacement; deterministic in `seed`.
MaskPlan sample_mask(int total_patches, double mask_ratio, std::uint64_t seed);

/// Mean squared error over masked patches only (averaged over the masked
/// patches' elements). Zero when nothing is masked.
template <typename Scalar>
Scalar reconstruction_loss(const Matrix<Scalar>& predicted, const Matrix<Scalar>& target, const MaskPlan& plan) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
        throw DimensionError("reconstruction: prediction and target shapes differ");
    if (predicted.rows() != plan.total_patches)
        throw DimensionError("reconstruction: mask plan covers " + std::to_string(plan.total_patches) +
                             " patches but prediction has " + std::to_string(predicted.rows()));
    if (plan.masked_indices.empty()) return Scalar(0);
    Scalar sum = 0;
    for (int i : plan.masked_indices) sum += (predicted.row(i) - target.row(i)).squaredNorm();
    return sum / static_cast<Scalar>(plan.masked_indices.size() * static_cast<std::size_t>(predicted.cols()));
}

/// d(reconstruction_loss)/d(predicted); rows of visible patches are zero.
template <typename Scalar>
Matrix<Scalar> reconstruction_loss_grad(const Matrix<Scalar>& predicted, const Matrix<Scalar>& target,
                                        const MaskPlan& plan) {
    reconstruction_loss(predicted, target, plan);  // shape checks
    Matrix<Scalar> g = Matrix<Scalar>::Zero(predicted.rows(), predicted.cols());
    if (plan.masked_indices.empty()) return g;
    const Scalar scale =
        Scalar(2) / static_cast<Scalar>(plan.masked_indices.size() * static_cast<std::size_t>(predicted.cols()));
    for (int i : plan.masked_indices) g.row(i) = scale * (predicted.row(i) - target.row(i));
    return g;
}

/// Per-patch standardized pixels used as reconstruction targets.
template <typename Scalar>
Matrix<Scalar> normalized_patch_targets(const Matrix<Scalar>& patches) {
    Matrix<Scalar> out = patches;
    const auto n = static_cast<Scalar>(patches.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const Scalar mean = out.row(r).sum() / n;
        out.row(r).array() -= mean;
        const Scalar var = out.row(r).squaredNorm() / n;
        out.row(r) /= std::sqrt(var + Scalar(1e-6));
    }
    return out;
}

struct SslTrainConfig {
    double mask_ratio = 0.75;
    int epochs = 400;
    int batch_size = 1024;
    std::string optimizer = "adam";
    double learning_rate = 1.5e-4;
    double warmup_fraction = 0.05;
    double weight_decay = 0.05;
    std::uint64_t seed = 0;
    int decoder_depth = 4;
    int decoder_dim = 256;
    int decoder_heads = 8;
    long max_steps = 0;                    // 0 = run all epochs
    double max_decode_failure_fraction = 0.05;
    std::string dataset = "incidents1m";

    void validate() const;
};

void to_json(nlohmann::json& j, const SslTrainConfig& c);
void from_json(const nlohmann::json& j, SslTrainConfig& c);

inline StackShape decoder_stack(const ModelConfig& model, const SslTrainConfig& ssl) {
    return {"mae.decoder.", ssl.decoder_depth, ssl.decoder_dim, ssl.decoder_heads, 4 * ssl.decoder_dim,
            model.activation};
}

inline bool is_mae_parameter(const std::string& name) { return name.rfind("mae.", 0) == 0; }

/// Adds the reconstruction decoder (stored under "mae.") to an encoder tree.
template <typename Scalar>
void add_mae_decoder(ParameterTree<Scalar>& p, const ModelConfig& model, const SslTrainConfig& ssl, std::uint64_t seed) {
    const int d = ssl.decoder_dim;
    add_linear(p, "mae.decoder_embed", model.hidden_dim, d, seed);
    p.set("mae.mask_token", init::normal<Scalar>(1, d, 0.02, derive_seed(seed, "mae.mask_token")));
    p.set("mae.decoder_pos_embed",
          init::normal<Scalar>(model.num_tokens(), d, 0.02, derive_seed(seed, "mae.decoder_pos_embed")));
    add_stack(p, decoder_stack(model, ssl), seed);
    add_linear(p, "mae.decoder_pred", d, model.patch_dim(), seed);
}

/// Outputs of one masked-reconstruction pass, for probes and tests.
template <typename Scalar>
struct MaeProbe {
    Eigen::Index encoder_tokens = 0;
    Matrix<Scalar> prediction;  // num_patches x patch_dim
    Matrix<Scalar> target;
};

/// Reconstruction loss for one image under `plan`. The encoder sees only the
/// visible patches. With `grads`, accumulates grad_scale * d(loss)/d(params).
template <typename Scalar>
Scalar mae_loss(const ParameterTree<Scalar>& p, const ModelConfig& c, const StackShape& dec,
                const Matrix<Scalar>& patches, const MaskPlan& plan, ParameterTree<Scalar>* grads,
                Scalar grad_scale = Scalar(1), MaeProbe<Scalar>* probe = nullptr) {
    if (plan.total_patches != c.num_patches())
        throw DimensionError("mask plan patch count does not match model config");
    const std::vector<int> visible = plan.visible_indices();
    const std::vector<char> masked = plan.mask_flags();
    const Eigen::Index n = c.num_patches();

    EncoderCache<Scalar> ecache;
    Matrix<Scalar> enc = encode_patches(p, c, patches, &visible, ecache);
    Matrix<Scalar> y = layers::linear(enc, p.at("mae.decoder_embed.weight"), p.at("mae.decoder_embed.bias"));

    const auto& mask_token = p.at("mae.mask_token");
    Matrix<Scalar> full(n + 1, dec.hidden);
    full.row(0) = y.row(0);
    for (Eigen::Index i = 0; i < n; ++i)
        if (masked[static_cast<std::size_t>(i)]) full.row(i + 1) = mask_token.row(0);
    for (std::size_t j = 0; j < visible.size(); ++j) full.row(visible[j] + 1) = y.row(static_cast<Eigen::Index>(j) + 1);
    full += p.at("mae.decoder_pos_embed");

    StackCache<Scalar> dcache;
    Matrix<Scalar> z = stack_forward(p, dec, full, dcache);
    Matrix<Scalar> out = layers::linear(z, p.at("mae.decoder_pred.weight"), p.at("mae.decoder_pred.bias"));
    Matrix<Scalar> pred = out.bottomRows(n);
    Matrix<Scalar> target = normalized_patch_targets(patches);
    const Scalar loss = reconstruction_loss(pred, target, plan);

    if (probe) {
        probe->encoder_tokens = enc.rows();
        probe->prediction = pred;
        probe->target = target;
    }
    if (!grads) return loss;

    auto& g = *grads;
    Matrix<Scalar> dout = Matrix<Scalar>::Zero(out.rows(), out.cols());
    dout.bottomRows(n) = reconstruction_loss_grad(pred, target, plan) * grad_scale;
    Matrix<Scalar> dz =
        layers::linear_backward(z, p.at("mae.decoder_pred.weight"), dout, g.at("mae.decoder_pred.weight"),
                                g.at("mae.decoder_pred.bias"));
    Matrix<Scalar> dfull = stack_backward(p, dec, dcache, dz, g);
    g.at("mae.decoder_pos_embed") += dfull;

    Matrix<Scalar> dy(y.rows(), y.cols());
    dy.row(0) = dfull.row(0);
    for (std::size_t j = 0; j < visible.size(); ++j) dy.row(static_cast<Eigen::Index>(j) + 1) = dfull.row(visible[j] + 1);
    auto& dmask = g.at("mae.mask_token");
    for (Eigen::Index i = 0; i < n; ++i)
        if (masked[static_cast<std::size_t>(i)]) dmask.row(0) += dfull.row(i + 1);

    Matrix<Scalar> denc = layers::linear_backward(enc, p.at("mae.decoder_embed.weight"), dy,
                                                  g.at("mae.decoder_embed.weight"), g.at("mae.decoder_embed.bias"));
    encode_patches_backward(p, c, ecache, denc, g);
    return loss;
}

/// Per-epoch mean reconstruction loss of an SSL run.
struct SslHistory {
    std::vector<double> epoch_loss;
    long steps = 0;
};

/// Masked-reconstruction pre-training over already decoded images. Starts
/// from `base` (its head, if any, is dropped) and returns a headless encoder
/// checkpoint with a self-supervised provenance stage appended.
Checkpoint pretrain_ssl(const SampleSet& images, const Checkpoint& base, const SslTrainConfig& config,
                        RunLedger* ledger = nullptr, SslHistory* history = nullptr);

/// Fresh-start convenience overload.
Checkpoint pretrain_ssl(const SampleSet& images, const ModelConfig& model, const SslTrainConfig& config,
                        const Normalization& norm = {}, RunLedger* ledger = nullptr, SslHistory* history = nullptr);

}  // namespace crisisvit
