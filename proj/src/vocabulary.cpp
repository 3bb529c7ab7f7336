#include "crisisvit/vocabulary.hpp"

#include <cstdlib>
#include <fstream>

#include "crisisvit/digest.hpp"
#include "crisisvit/errors.hpp"

namespace crisisvit {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

LabelVocabulary::LabelVocabulary(std::string name, std::vector<std::string> classes,
                                 std::map<std::string, std::string> aliases)
    : name_(std::move(name)), classes_(std::move(classes)), aliases_(std::move(aliases)) {
    for (std::size_t i = 0; i < classes_.size(); ++i)
        if (!index_.emplace(classes_[i], static_cast<int>(i)).second)
            throw VocabularyError("vocabulary " + name_ + ": duplicate class '" + classes_[i] + "'");
    for (const auto& [alias, target] : aliases_) {
        if (!index_.count(target))
            throw VocabularyError("vocabulary " + name_ + ": alias '" + alias + "' targets unknown class");
        if (index_.count(alias))
            throw VocabularyError("vocabulary " + name_ + ": alias '" + alias + "' shadows a class");
    }
    std::string canon = name_;
    for (const auto& c : classes_) canon += "\n" + c;
    version_ = short_digest(canon);
}

std::optional<int> LabelVocabulary::index_of(const std::string& label) const {
    if (auto it = index_.find(label); it != index_.end()) return it->second;
    if (auto a = aliases_.find(label); a != aliases_.end()) return index_.at(a->second);
    return std::nullopt;
}

std::optional<std::string> LabelVocabulary::canonical(const std::string& label) const {
    const auto i = index_of(label);
    if (!i) return std::nullopt;
    return classes_[static_cast<std::size_t>(*i)];
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("CRISISVIT_DATA_DIR"); env && *env) return env;
    return CRISISVIT_DATA_DIR;
}

LabelVocabulary load_vocabulary(const std::filesystem::path& path, const std::string& name,
                                std::optional<std::size_t> expected_size) {
    std::ifstream in(path);
    if (!in) throw VocabularyError("cannot open vocabulary file " + path.string());
    std::vector<std::string> classes;
    std::map<std::string, std::string> aliases;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> names;
        std::size_t start = 0;
        while (true) {
            const auto bar = line.find('|', start);
            names.push_back(trim(line.substr(start, bar == std::string::npos ? std::string::npos : bar - start)));
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
        classes.push_back(names[0]);
        for (std::size_t i = 1; i < names.size(); ++i) aliases[names[i]] = names[0];
    }
    if (expected_size && classes.size() != *expected_size)
        throw VocabularyError("vocabulary " + name + " has " + std::to_string(classes.size()) +
                              " classes, expected " + std::to_string(*expected_size) + " (" + path.string() + ")");
    return LabelVocabulary(name, std::move(classes), std::move(aliases));
}

LabelVocabulary incident_vocabulary(const std::filesystem::path& dir) {
    return load_vocabulary(dir / "incident.txt", "incident", kIncidentClasses);
}

LabelVocabulary place_vocabulary(const std::filesystem::path& dir) {
    return load_vocabulary(dir / "place.txt", "place", kPlaceClasses);
}

LabelVocabulary joint_vocabulary(const LabelVocabulary& incident, const LabelVocabulary& place) {
    if (incident.name() != "incident" || place.name() != "place")
        throw VocabularyError("joint vocabulary is built from the incident and place vocabularies");
    for (const auto& c : place.classes())
        if (incident.contains(c)) throw VocabularyError("class '" + c + "' appears in both vocabularies");
    std::vector<std::string> classes = incident.classes();
    classes.insert(classes.end(), place.classes().begin(), place.classes().end());
    std::map<std::string, std::string> aliases = incident.aliases();
    for (const auto& [a, t] : place.aliases()) aliases[a] = t;
    return LabelVocabulary("joint", std::move(classes), std::move(aliases));
}

}  // namespace crisisvit
