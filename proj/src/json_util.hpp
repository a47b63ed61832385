#pragma once

// Internal JSON converters shared by persistence and config code.

#include "json.hpp"
#include "trimct/synth.hpp"
#include "trimct/transforms.hpp"

namespace trimct {

inline nlohmann::json shift_spec_to_json(const ShiftSpec& s) {
    return nlohmann::json{{"kind", shift_kind_name(s.kind)},
                          {"intensity", s.intensity},
                          {"regime", s.regime == ShiftRegime::moderate ? "moderate" : "harmful"}};
}

inline ShiftSpec shift_spec_from_json(const nlohmann::json& j) {
    ShiftSpec s;
    s.kind = shift_kind_from_name(j.at("kind").get<std::string>());
    s.intensity = j.at("intensity").get<float>();
    s.regime = j.at("regime").get<std::string>() == "harmful" ? ShiftRegime::harmful
                                                              : ShiftRegime::moderate;
    return s;
}

inline nlohmann::json defect_params_to_json(const DefectParams& p) {
    return nlohmann::json{{"good_alpha_lo", p.good_alpha_lo}, {"good_alpha_hi", p.good_alpha_hi},
                          {"pale_alpha_lo", p.pale_alpha_lo}, {"pale_alpha_hi", p.pale_alpha_hi},
                          {"erase_keep", p.erase_keep},       {"shift_frac_min", p.shift_frac_min},
                          {"shift_frac_max", p.shift_frac_max}, {"noise_amp", p.noise_amp}};
}

inline DefectParams defect_params_from_json(const nlohmann::json& j) {
    DefectParams p;
    p.good_alpha_lo = j.at("good_alpha_lo").get<float>();
    p.good_alpha_hi = j.at("good_alpha_hi").get<float>();
    p.pale_alpha_lo = j.at("pale_alpha_lo").get<float>();
    p.pale_alpha_hi = j.at("pale_alpha_hi").get<float>();
    p.erase_keep = j.at("erase_keep").get<float>();
    p.shift_frac_min = j.at("shift_frac_min").get<float>();
    p.shift_frac_max = j.at("shift_frac_max").get<float>();
    p.noise_amp = j.at("noise_amp").get<int>();
    return p;
}

}  // namespace trimct
