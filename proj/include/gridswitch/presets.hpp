#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/sssr.hpp"

namespace gridswitch {

/// Named two-parameter plane with its plotting box.
struct PlanePreset {
    std::string name;
    Mode mode = Mode::Gfl;
    std::vector<Axis> axes;
};

const std::vector<PlanePreset>& plane_presets();
/// Throws ConfigError for unknown names.
const PlanePreset& plane_preset(const std::string& name);

/// Parameter space of a preset with every non-axis parameter taken from `cfg`.
ParamSpace make_space(const PlanePreset& plane, const SystemConfig& cfg);

}  // namespace gridswitch
