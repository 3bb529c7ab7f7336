#include "crisisvit/run_ledger.hpp"

#include <fstream>

#include "crisisvit/errors.hpp"

namespace crisisvit {

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RunLedger::append(nlohmann::json record) {
    std::lock_guard lock(mutex_);
    if (!record.contains("wall_time"))
        record["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw DataError("cannot append to run ledger: " + path_.string());
        out << record.dump() << '\n';
        out.flush();
    }
    records_.push_back(std::move(record));
}

void RunLedger::metric(const std::string& stage, int epoch, long step, double loss, nlohmann::json extra) {
    nlohmann::json r = {{"type", "metric"}, {"stage", stage}, {"epoch", epoch}, {"step", step}, {"loss", loss}};
    if (extra.is_object())
        for (auto& [k, v] : extra.items()) r[k] = v;
    append(std::move(r));
}

std::vector<nlohmann::json> RunLedger::read(const std::filesystem::path& path) {
    std::vector<nlohmann::json> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception&) {
            break;  // torn final write
        }
    }
    return out;
}

}  // namespace crisisvit
