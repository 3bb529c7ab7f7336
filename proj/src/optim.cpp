#include "crisisvit/optim.hpp"

namespace crisisvit {

void to_json(nlohmann::json& j, const TrainSchedule& s) {
    j = nlohmann::json{{"learning_rate", s.learning_rate},
                       {"warmup_fraction", s.warmup_fraction},
                       {"decay", s.decay == DecayShape::cosine ? "cosine" : "constant"},
                       {"grad_clip", s.grad_clip},
                       {"label_smoothing", s.label_smoothing},
                       {"weight_decay", s.weight_decay}};
}

void from_json(const nlohmann::json& j, TrainSchedule& s) {
    const TrainSchedule d;
    s.learning_rate = j.value("learning_rate", d.learning_rate);
    s.warmup_fraction = j.value("warmup_fraction", d.warmup_fraction);
    const auto decay = j.value("decay", std::string("cosine"));
    if (decay == "cosine")
        s.decay = DecayShape::cosine;
    else if (decay == "constant")
        s.decay = DecayShape::constant;
    else
        throw ConfigError("schedule.decay: unknown value '" + decay + "'");
    s.grad_clip = j.value("grad_clip", d.grad_clip);
    s.label_smoothing = j.value("label_smoothing", d.label_smoothing);
    s.weight_decay = j.value("weight_decay", d.weight_decay);
}

}  // namespace crisisvit
