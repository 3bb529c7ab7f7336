#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crisisvit/image.hpp"
#include "crisisvit/model_config.hpp"
#include "crisisvit/parameter_tree.hpp"
#include "json.hpp"

namespace crisisvit {

inline constexpr int kCheckpointFormatVersion = 1;

/// One training stage in a checkpoint's lineage.
struct StageRecord {
    std::string dataset;
    std::string strategy;
    int epochs = 0;
    std::uint64_t seed = 0;
    nlohmann::json details = nlohmann::json::object();

    friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

void to_json(nlohmann::json& j, const StageRecord& s);
void from_json(const nlohmann::json& j, StageRecord& s);

template <typename Scalar>
struct ParameterCheckpoint {
    ModelConfig config;
    ParameterTree<Scalar> params;
    std::vector<StageRecord> provenance;  // append-only
    Normalization normalization;
    int format_version = kCheckpointFormatVersion;

    void append_stage(StageRecord record) { provenance.push_back(std::move(record)); }

    /// Throws IntegrityError listing missing, orphan and misshapen parameters
    /// relative to the layout `config` determines.
    void verify() const;

    /// Digest of the provenance list alone (used to group runs by lineage).
    std::string provenance_digest() const;
};

using Checkpoint = ParameterCheckpoint<float>;

/// Fresh checkpoint from build_model.
template <typename Scalar>
ParameterCheckpoint<Scalar> make_checkpoint(const ModelConfig& config, std::uint64_t seed,
                                            const Normalization& norm = {});

/// Archive layout: 8-byte magic, little-endian u64 metadata length, JSON
/// metadata (format_version, model_config, provenance, normalization, dtype
/// and an array table of name/rows/cols/offset), then the raw array data.
template <typename Scalar>
std::string serialize_checkpoint(const ParameterCheckpoint<Scalar>& ckpt);
template <typename Scalar>
ParameterCheckpoint<Scalar> deserialize_checkpoint(const std::string& bytes);

template <typename Scalar>
void save_checkpoint(const ParameterCheckpoint<Scalar>& ckpt, const std::filesystem::path& path);
template <typename Scalar>
ParameterCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Content digest of the serialized archive.
template <typename Scalar>
std::string checkpoint_digest(const ParameterCheckpoint<Scalar>& ckpt);

/// Copies encoder parameters verbatim and attaches a freshly initialized head
/// of width `new_num_classes` (0 strips the head).
template <typename Scalar>
ParameterCheckpoint<Scalar> replace_head(const ParameterCheckpoint<Scalar>& ckpt, int new_num_classes,
                                         std::uint64_t seed);

/// Softmax probabilities, one row per image.
template <typename Scalar>
Matrix<Scalar> forward_classify(const ParameterCheckpoint<Scalar>& ckpt, const ImageTensorBatch<Scalar>& batch);

}  // namespace crisisvit
