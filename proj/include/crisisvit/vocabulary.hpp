#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crisisvit {

inline constexpr std::size_t kIncidentClasses = 43;
inline constexpr std::size_t kPlaceClasses = 49;
inline constexpr std::size_t kJointClasses = kIncidentClasses + kPlaceClasses;

/// Ordered, unique class names. Position is the class index.
class LabelVocabulary {
public:
    LabelVocabulary() = default;
    LabelVocabulary(std::string name, std::vector<std::string> classes,
                    std::map<std::string, std::string> aliases = {});

    const std::string& name() const { return name_; }
    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    const std::string& operator[](std::size_t i) const { return classes_.at(i); }

    /// Class index of `label` (canonical name or alias).
    std::optional<int> index_of(const std::string& label) const;
    bool contains(const std::string& label) const { return index_of(label).has_value(); }
    /// Canonical spelling, or nullopt for labels outside the vocabulary.
    std::optional<std::string> canonical(const std::string& label) const;

    /// First 16 hex digits of the SHA-256 of name and class list.
    const std::string& version() const { return version_; }

    const std::map<std::string, std::string>& aliases() const { return aliases_; }

private:
    std::string name_;
    std::vector<std::string> classes_;
    std::map<std::string, int> index_;
    std::map<std::string, std::string> aliases_;  // alias -> canonical
    std::string version_;
};

/// Root of the shipped data files; CRISISVIT_DATA_DIR in the environment
/// overrides the build-time location.
std::filesystem::path data_dir();

/// Parses "name|alias|..." lines ('#' comments). Throws VocabularyError when
/// the class count differs from `expected_size` or names repeat.
LabelVocabulary load_vocabulary(const std::filesystem::path& path, const std::string& name,
                                std::optional<std::size_t> expected_size = std::nullopt);

LabelVocabulary incident_vocabulary(const std::filesystem::path& dir = data_dir() / "vocabularies");
LabelVocabulary place_vocabulary(const std::filesystem::path& dir = data_dir() / "vocabularies");

/// Incident classes followed by place classes (0-42, then 43-91 for the
/// shipped vocabularies).
LabelVocabulary joint_vocabulary(const LabelVocabulary& incident, const LabelVocabulary& place);

}  // namespace crisisvit
