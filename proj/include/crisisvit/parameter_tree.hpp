#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "crisisvit/errors.hpp"
#include "crisisvit/types.hpp"

namespace crisisvit {

/// Named parameter arrays, iterated in lexicographic name order. Every array
/// is stored as a 2-D row-major matrix; vectors are 1 x n.
template <typename Scalar>
class ParameterTree {
public:
    using Array = Matrix<Scalar>;
    using Storage = std::map<std::string, Array>;

    Array& at(const std::string& name) {
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw IntegrityError("missing parameter: " + name);
        return it->second;
    }
    const Array& at(const std::string& name) const {
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw IntegrityError("missing parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
    void set(const std::string& name, Array value) { arrays_[name] = std::move(value); }
    void erase(const std::string& name) { arrays_.erase(name); }

    std::size_t size() const { return arrays_.size(); }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, a] : arrays_) n += static_cast<std::size_t>(a.size());
        return n;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(arrays_.size());
        for (const auto& [k, _] : arrays_) out.push_back(k);
        return out;
    }

    auto begin() { return arrays_.begin(); }
    auto end() { return arrays_.end(); }
    auto begin() const { return arrays_.begin(); }
    auto end() const { return arrays_.end(); }

    ParameterTree zeros_like() const {
        ParameterTree out;
        for (const auto& [k, a] : arrays_) out.arrays_[k] = Array::Zero(a.rows(), a.cols());
        return out;
    }

    void set_zero() {
        for (auto& [_, a] : arrays_) a.setZero();
    }

    template <typename Other>
    ParameterTree<Other> cast() const {
        ParameterTree<Other> out;
        for (const auto& [k, a] : arrays_) out.set(k, a.template cast<Other>());
        return out;
    }

    ParameterTree& operator+=(const ParameterTree& o) {
        for (auto& [k, a] : arrays_) a += o.at(k);
        return *this;
    }

    Scalar squared_norm() const {
        Scalar s = 0;
        for (const auto& [_, a] : arrays_) s += a.squaredNorm();
        return s;
    }

    void scale(Scalar f) {
        for (auto& [_, a] : arrays_) a *= f;
    }

    bool operator==(const ParameterTree& o) const {
        if (arrays_.size() != o.arrays_.size()) return false;
        for (const auto& [k, a] : arrays_) {
            auto it = o.arrays_.find(k);
            if (it == o.arrays_.end()) return false;
            if (a.rows() != it->second.rows() || a.cols() != it->second.cols()) return false;
            if (a != it->second) return false;
        }
        return true;
    }

private:
    Storage arrays_;
};

/// Largest absolute elementwise difference over the shared arrays.
template <typename Scalar>
Scalar max_abs_difference(const ParameterTree<Scalar>& a, const ParameterTree<Scalar>& b) {
    Scalar m = 0;
    for (const auto& [k, x] : a) {
        if (!b.contains(k)) continue;
        m = std::max(m, (x - b.at(k)).cwiseAbs().maxCoeff());
    }
    return m;
}

}  // namespace crisisvit
