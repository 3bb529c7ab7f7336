#include "crisisvit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "crisisvit/digest.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/vit.hpp"

namespace crisisvit {

static_assert(std::endian::native == std::endian::little, "checkpoint archives assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'V', 'I', 'T', 'C', 'K', 'P', 'T'};

template <typename Scalar>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "float32"; }
template <>
const char* dtype_name<double>() { return "float64"; }

}  // namespace

std::vector<std::pair<std::string, std::pair<long, long>>> expected_layout(const ModelConfig& c) {
    std::vector<std::pair<std::string, std::pair<long, long>>> out;
    auto linear = [&](const std::string& n, long in, long o) {
        out.push_back({n + ".weight", {in, o}});
        out.push_back({n + ".bias", {1, o}});
    };
    auto norm = [&](const std::string& n, long w) {
        out.push_back({n + ".weight", {1, w}});
        out.push_back({n + ".bias", {1, w}});
    };
    const long d = c.hidden_dim;
    linear("patch_embed", c.patch_dim(), d);
    out.push_back({"cls_token", {1, d}});
    out.push_back({"pos_embed", {c.num_tokens(), d}});
    const StackShape s = encoder_stack(c);
    for (int i = 0; i < s.depth; ++i) {
        const std::string b = s.block(i);
        norm(b + "norm1", d);
        linear(b + "attn.qkv", d, 3 * d);
        linear(b + "attn.proj", d, d);
        norm(b + "norm2", d);
        linear(b + "mlp.fc1", d, s.mlp_dim);
        linear(b + "mlp.fc2", s.mlp_dim, d);
    }
    norm("encoder.norm", d);
    if (c.num_classes > 0) linear("head", d, c.num_classes);
    return out;
}

void to_json(nlohmann::json& j, const StageRecord& s) {
    j = nlohmann::json{{"dataset", s.dataset},
                       {"strategy", s.strategy},
                       {"epochs", s.epochs},
                       {"seed", s.seed},
                       {"details", s.details}};
}

void from_json(const nlohmann::json& j, StageRecord& s) {
    s.dataset = j.at("dataset").get<std::string>();
    s.strategy = j.at("strategy").get<std::string>();
    s.epochs = j.at("epochs").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.details = j.value("details", nlohmann::json::object());
}

template <typename Scalar>
void ParameterCheckpoint<Scalar>::verify() const {
    config.validate();
    std::map<std::string, std::pair<long, long>> expected;
    for (auto& [n, shape] : expected_layout(config)) expected[n] = shape;

    std::vector<std::string> missing, orphan, misshapen;
    for (const auto& [n, shape] : expected) {
        if (!params.contains(n)) {
            missing.push_back(n);
            continue;
        }
        const auto& a = params.at(n);
        if (a.rows() != shape.first || a.cols() != shape.second) misshapen.push_back(n);
    }
    for (const auto& [n, _] : params)
        if (!expected.count(n)) orphan.push_back(n);
    if (missing.empty() && orphan.empty() && misshapen.empty()) return;

    std::ostringstream msg;
    msg << "checkpoint does not match its model_config;";
    auto list = [&](const char* label, const std::vector<std::string>& v) {
        if (v.empty()) return;
        msg << ' ' << label << ':';
        for (const auto& n : v) msg << ' ' << n;
        msg << ';';
    };
    list("missing", missing);
    list("orphan", orphan);
    list("misshapen", misshapen);
    throw IntegrityError(msg.str());
}

template <typename Scalar>
std::string ParameterCheckpoint<Scalar>::provenance_digest() const {
    return short_digest(nlohmann::json(provenance).dump());
}

template <typename Scalar>
ParameterCheckpoint<Scalar> make_checkpoint(const ModelConfig& config, std::uint64_t seed, const Normalization& norm) {
    ParameterCheckpoint<Scalar> c;
    c.config = config;
    c.params = build_model<Scalar>(config, seed);
    c.normalization = norm;
    return c;
}

template <typename Scalar>
std::string serialize_checkpoint(const ParameterCheckpoint<Scalar>& ckpt) {
    nlohmann::json meta;
    meta["format_version"] = ckpt.format_version;
    meta["model_config"] = ckpt.config;
    meta["provenance"] = ckpt.provenance;
    meta["normalization"] = ckpt.normalization;
    meta["dtype"] = dtype_name<Scalar>();
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, a] : ckpt.params) {
        table.push_back({{"name", name}, {"rows", a.rows()}, {"cols", a.cols()}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(a.size()) * sizeof(Scalar);
    }
    meta["arrays"] = table;
    const std::string header = meta.dump();

    std::string out;
    out.reserve(sizeof(kMagic) + 8 + header.size() + offset);
    out.append(kMagic, sizeof(kMagic));
    const std::uint64_t len = header.size();
    out.append(reinterpret_cast<const char*>(&len), sizeof(len));
    out += header;
    for (const auto& [_, a] : ckpt.params)
        out.append(reinterpret_cast<const char*>(a.data()), static_cast<std::size_t>(a.size()) * sizeof(Scalar));
    return out;
}

template <typename Scalar>
ParameterCheckpoint<Scalar> deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("not a checkpoint archive (bad magic)");
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + sizeof(kMagic), sizeof(len));
    const std::size_t data_start = sizeof(kMagic) + 8 + len;
    if (data_start > bytes.size()) throw IntegrityError("checkpoint archive truncated in metadata");

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(bytes.substr(sizeof(kMagic) + 8, len));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("checkpoint metadata unreadable: ") + e.what());
    }
    const int version = meta.value("format_version", -1);
    if (version != kCheckpointFormatVersion)
        throw IntegrityError("unsupported checkpoint format_version " + std::to_string(version));

    const auto dtype = meta.at("dtype").get<std::string>();
    std::size_t width = 0;
    if (dtype == "float32")
        width = sizeof(float);
    else if (dtype == "float64")
        width = sizeof(double);
    else
        throw IntegrityError("unsupported checkpoint dtype " + dtype);

    ParameterCheckpoint<Scalar> ckpt;
    ckpt.format_version = version;
    ckpt.config = meta.at("model_config").get<ModelConfig>();
    ckpt.provenance = meta.at("provenance").get<std::vector<StageRecord>>();
    ckpt.normalization = meta.at("normalization").get<Normalization>();
    for (const auto& entry : meta.at("arrays")) {
        const auto rows = entry.at("rows").get<Eigen::Index>();
        const auto cols = entry.at("cols").get<Eigen::Index>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const std::size_t count = static_cast<std::size_t>(rows * cols);
        if (data_start + offset + count * width > bytes.size())
            throw IntegrityError("checkpoint archive truncated in array data");
        const char* src = bytes.data() + data_start + offset;
        Matrix<Scalar> a(rows, cols);
        if (width == sizeof(float)) {
            std::vector<float> tmp(count);
            std::memcpy(tmp.data(), src, count * width);
            for (std::size_t i = 0; i < count; ++i) a.data()[i] = static_cast<Scalar>(tmp[i]);
        } else {
            std::vector<double> tmp(count);
            std::memcpy(tmp.data(), src, count * width);
            for (std::size_t i = 0; i < count; ++i) a.data()[i] = static_cast<Scalar>(tmp[i]);
        }
        ckpt.params.set(entry.at("name").get<std::string>(), std::move(a));
    }
    ckpt.verify();
    return ckpt;
}

template <typename Scalar>
void save_checkpoint(const ParameterCheckpoint<Scalar>& ckpt, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(ckpt));
}

template <typename Scalar>
ParameterCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint<Scalar>(read_file(path));
}

template <typename Scalar>
std::string checkpoint_digest(const ParameterCheckpoint<Scalar>& ckpt) {
    return sha256_hex(serialize_checkpoint(ckpt));
}

template <typename Scalar>
ParameterCheckpoint<Scalar> replace_head(const ParameterCheckpoint<Scalar>& ckpt, int new_num_classes,
                                         std::uint64_t seed) {
    ckpt.verify();
    if (new_num_classes < 0) throw ConfigError("num_classes: must be >= 0");
    ParameterCheckpoint<Scalar> out = ckpt;
    out.params.erase("head.weight");
    out.params.erase("head.bias");
    out.config.num_classes = new_num_classes;
    if (new_num_classes > 0) add_head(out.params, out.config.hidden_dim, new_num_classes, seed);
    out.append_stage(StageRecord{"", "replace_head", 0, seed,
                                 {{"from_classes", ckpt.config.num_classes}, {"to_classes", new_num_classes}}});
    return out;
}

template <typename Scalar>
Matrix<Scalar> forward_classify(const ParameterCheckpoint<Scalar>& ckpt, const ImageTensorBatch<Scalar>& batch) {
    if (ckpt.config.headless()) throw UsageError("checkpoint is headless; replace_head before classifying");
    return layers::softmax_rows(forward_logits(ckpt.params, ckpt.config, batch));
}

#define CRISISVIT_INSTANTIATE(S)                                                                             \
    template struct ParameterCheckpoint<S>;                                                                 \
    template ParameterCheckpoint<S> make_checkpoint<S>(const ModelConfig&, std::uint64_t, const Normalization&); \
    template std::string serialize_checkpoint<S>(const ParameterCheckpoint<S>&);                            \
    template ParameterCheckpoint<S> deserialize_checkpoint<S>(const std::string&);                          \
    template void save_checkpoint<S>(const ParameterCheckpoint<S>&, const std::filesystem::path&);          \
    template ParameterCheckpoint<S> load_checkpoint<S>(const std::filesystem::path&);                       \
    template std::string checkpoint_digest<S>(const ParameterCheckpoint<S>&);                               \
    template ParameterCheckpoint<S> replace_head<S>(const ParameterCheckpoint<S>&, int, std::uint64_t);     \
    template Matrix<S> forward_classify<S>(const ParameterCheckpoint<S>&, const ImageTensorBatch<S>&);

CRISISVIT_INSTANTIATE(float)
CRISISVIT_INSTANTIATE(double)

#undef CRISISVIT_INSTANTIATE

}  // namespace crisisvit
