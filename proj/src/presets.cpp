#include "gridswitch/presets.hpp"

#include "gridswitch/config.hpp"

namespace gridswitch {

const std::vector<PlanePreset>& plane_presets() {
    static const std::vector<PlanePreset> presets = {
        {"gfl-opl", Mode::Gfl, {{"kp_o1", 0.0, 0.2}, {"ki_o1", 0.0, 3.0}}},
        {"gfl-icl", Mode::Gfl, {{"kp_i1", 0.0, 10.0}, {"ki_i1", 0.0, 5000.0}}},
        {"gfm-ovl", Mode::Gfm, {{"kp_o2", 0.0, 10.0}, {"ki_o2", 0.0, 1000.0}}},
        {"gfm-icl", Mode::Gfm, {{"kp_i2", 0.0, 20.0}, {"ki_i2", 0.0, 1000.0}}},
        {"gfl-scr-xr", Mode::Gfl, {{"scr", 1.0, 20.0}, {"x_over_r", 0.2, 20.0}}},
        {"gfm-scr-xr", Mode::Gfm, {{"scr", 1.0, 20.0}, {"x_over_r", 0.2, 20.0}}},
    };
    return presets;
}

const PlanePreset& plane_preset(const std::string& name) {
    for (const auto& p : plane_presets())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : plane_presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw ConfigError("unknown plane '" + name + "' (known: " + known + ")");
}

ParamSpace make_space(const PlanePreset& plane, const SystemConfig& cfg) {
    std::vector<std::string> keys;
    for (const auto& a : plane.axes) keys.push_back(a.name);
    return ParamSpace(plane.axes, model_margin_fn(plane.mode, cfg, keys));
}

}  // namespace gridswitch
