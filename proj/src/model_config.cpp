#include "crisisvit/model_config.hpp"

#include "crisisvit/errors.hpp"

namespace crisisvit {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "gelu") return Activation::gelu;
    throw ConfigError("activation: unknown value '" + name + "' (expected relu or gelu)");
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(patch_size >= 1, "patch_size: must be >= 1");
    require(image_size >= patch_size, "image_size: must be >= patch_size");
    require(image_size % patch_size == 0,
            "image_size: " + std::to_string(image_size) + " is not divisible by patch_size " +
                std::to_string(patch_size));
    require(channels >= 1, "channels: must be >= 1");
    require(depth >= 1, "depth: must be >= 1");
    require(num_heads >= 1, "num_heads: must be >= 1");
    require(hidden_dim >= 1, "hidden_dim: must be >= 1");
    require(hidden_dim % num_heads == 0,
            "hidden_dim: " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                std::to_string(num_heads));
    require(mlp_ratio >= 1, "mlp_ratio: must be >= 1");
    require(num_classes >= 0, "num_classes: must be >= 0");
}

bool ModelConfig::same_encoder(const ModelConfig& o) const {
    ModelConfig a = *this, b = o;
    a.num_classes = b.num_classes = 0;
    return a == b;
}

ModelConfig vit_base_config(int num_classes) {
    ModelConfig c;
    c.num_classes = num_classes;
    return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"image_size", c.image_size}, {"patch_size", c.patch_size},
                       {"channels", c.channels},     {"depth", c.depth},
                       {"hidden_dim", c.hidden_dim}, {"num_heads", c.num_heads},
                       {"mlp_ratio", c.mlp_ratio},   {"activation", to_string(c.activation)},
                       {"num_classes", c.num_classes}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.image_size = j.value("image_size", d.image_size);
    c.patch_size = j.value("patch_size", d.patch_size);
    c.channels = j.value("channels", d.channels);
    c.depth = j.value("depth", d.depth);
    c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
    c.num_heads = j.value("num_heads", d.num_heads);
    c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
    c.activation = activation_from_string(j.value("activation", std::string("relu")));
    c.num_classes = j.value("num_classes", d.num_classes);
}

}  // namespace crisisvit
