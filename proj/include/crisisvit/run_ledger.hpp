#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace crisisvit {

/// Append-only line-delimited JSON log. Each append is written and flushed
/// before returning, so a crash loses at most the record being written.
class RunLedger {
public:
    RunLedger() = default;  // in-memory only
    explicit RunLedger(std::filesystem::path path);

    /// Appends `record`, stamping wall_time (seconds since ledger creation)
    /// when the record does not carry one.
    void append(nlohmann::json record);

    /// Convenience for training metrics: {stage, epoch, step, loss, wall_time}.
    void metric(const std::string& stage, int epoch, long step, double loss, nlohmann::json extra = {});

    const std::vector<nlohmann::json>& records() const { return records_; }
    const std::filesystem::path& path() const { return path_; }

    /// Reads every complete record of an existing ledger file; a trailing
    /// partial line is ignored.
    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::vector<nlohmann::json> records_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
    std::mutex mutex_;
};

}  // namespace crisisvit
