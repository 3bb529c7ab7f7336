#pragma once

#include <stdexcept>
#include <string>

namespace crisisvit {

// Error taxonomy. Each family maps onto one CLI exit code (see exit_code()).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct IntegrityError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct StatisticsError : Error {
    using Error::Error;
};
struct UsageError : Error {
    using Error::Error;
};
struct VocabularyError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTraining = 4;

inline int exit_code(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
        dynamic_cast<const VocabularyError*>(&e))
        return kExitValidation;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const IntegrityError*>(&e))
        return kExitData;
    return kExitTraining;
}

}  // namespace crisisvit
