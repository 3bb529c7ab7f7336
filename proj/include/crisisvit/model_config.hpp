#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace crisisvit {

enum class Activation { relu, gelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Architecture of a ViT-style backbone plus its classification head.
/// Defaults are ViT-Base/16 with a ReLU feed-forward sublayer and no head.
struct ModelConfig {
    int image_size = 224;
    int patch_size = 16;
    int channels = 3;
    int depth = 12;
    int hidden_dim = 768;
    int num_heads = 12;
    int mlp_ratio = 4;
    Activation activation = Activation::relu;
    int num_classes = 0;  // 0 = headless encoder

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }
    int num_tokens() const { return 1 + num_patches(); }
    int patch_dim() const { return patch_size * patch_size * channels; }
    int head_dim() const { return hidden_dim / num_heads; }
    int mlp_dim() const { return hidden_dim * mlp_ratio; }
    bool headless() const { return num_classes == 0; }

    /// Throws ConfigError naming the first offending field.
    void validate() const;

    /// Same encoder architecture (everything except num_classes).
    bool same_encoder(const ModelConfig& other) const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig vit_base_config(int num_classes = 0);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace crisisvit
