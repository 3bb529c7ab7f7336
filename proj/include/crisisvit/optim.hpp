#pragma once

#include <cmath>
#include <string>

#include "crisisvit/errors.hpp"
#include "crisisvit/parameter_tree.hpp"
#include "json.hpp"

namespace crisisvit {

enum class DecayShape { cosine, constant };

/// Learning-rate schedule and regularization shared by every trainer.
struct TrainSchedule {
    double learning_rate = 1e-4;
    double warmup_fraction = 0.05;
    DecayShape decay = DecayShape::cosine;
    double grad_clip = 1.0;  // global L2 norm; <= 0 disables
    double label_smoothing = 0.0;
    double weight_decay = 0.0;

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("schedule.learning_rate: must be positive");
        if (!(warmup_fraction >= 0 && warmup_fraction < 1))
            throw ConfigError("schedule.warmup_fraction: must be in [0, 1)");
        if (label_smoothing < 0 || label_smoothing >= 1)
            throw ConfigError("schedule.label_smoothing: must be in [0, 1)");
        if (weight_decay < 0) throw ConfigError("schedule.weight_decay: must be >= 0");
    }

    /// Learning rate at optimizer step `step` of `total_steps` (0-based).
    double rate_at(long step, long total_steps) const {
        const long warmup = static_cast<long>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
        if (warmup > 0 && step < warmup) return learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
        if (decay == DecayShape::constant || total_steps <= warmup) return learning_rate;
        const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
        return learning_rate * 0.5 * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
    }
};

void to_json(nlohmann::json& j, const TrainSchedule& s);
void from_json(const nlohmann::json& j, TrainSchedule& s);

/// Rescale gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Scalar>
Scalar clip_global_norm(ParameterTree<Scalar>& grads, double max_norm) {
    const Scalar norm = std::sqrt(grads.squared_norm());
    if (max_norm > 0 && norm > static_cast<Scalar>(max_norm)) grads.scale(static_cast<Scalar>(max_norm) / norm);
    return norm;
}

/// Weight decay applies to projection matrices only, never to biases,
/// layer-norm gains or embeddings.
inline bool decays_weight(const std::string& name) {
    const std::string suffix = ".weight";
    if (name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
        return false;
    return name.find("norm") == std::string::npos;
}

/// Adam with bias correction; weight decay, when set, is decoupled.
/// Moment buffers are created lazily per parameter name, so parameters added
/// mid-run (a new head) start from zero moments.
template <typename Scalar>
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParameterTree<Scalar>& params, const ParameterTree<Scalar>& grads, double lr, double weight_decay = 0) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (auto& [name, p] : params) {
            if (!grads.contains(name)) continue;
            const auto& g = grads.at(name);
            if (!m_.contains(name) || m_.at(name).rows() != p.rows() || m_.at(name).cols() != p.cols()) {
                m_.set(name, Matrix<Scalar>::Zero(p.rows(), p.cols()));
                v_.set(name, Matrix<Scalar>::Zero(p.rows(), p.cols()));
            }
            auto& m = m_.at(name);
            auto& v = v_.at(name);
            m = Scalar(beta1_) * m + Scalar(1 - beta1_) * g;
            v = Scalar(beta2_) * v + Scalar(1 - beta2_) * g.cwiseProduct(g);
            if (weight_decay > 0 && decays_weight(name)) p *= Scalar(1 - lr * weight_decay);
            p.array() -= Scalar(lr / c1) * m.array() / ((v.array() / Scalar(c2)).sqrt() + Scalar(eps_));
        }
    }

    /// Drop moments for parameters (e.g. a replaced head).
    void forget(const std::string& name) {
        m_.erase(name);
        v_.erase(name);
    }

    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    ParameterTree<Scalar> m_, v_;
};

}  // namespace crisisvit
