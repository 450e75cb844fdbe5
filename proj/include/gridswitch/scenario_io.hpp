#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "gridswitch/config.hpp"
#include "gridswitch/simulation.hpp"

namespace gridswitch {

/// A run file: parameter overrides, run options, scripted events and sweeps.
///
///   plane = gfm-icl          # run option
///   scr = 2                  # parameter override
///   event = 1.0, scr, 3.1    # time, key, value
///   sweep = gfl, scr, 2, 18, x_over_r, 10   # mode, axis, from, to, fixed axis, fixed value
struct RunFile {
    std::string name;
    std::map<std::string, std::string> options;
    std::vector<KeyValue> overrides;
    std::vector<ScenarioEvent> events;
    std::vector<std::string> sweeps;

    bool has(const std::string& key) const { return options.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key, double fallback) const;
    std::vector<double> numbers(const std::string& key) const;
};

/// Option keys a run file may carry besides parameter keys.
const std::vector<std::string>& run_option_keys();

RunFile read_run_file(std::istream& in, const std::string& name = "");
RunFile read_run_file(const std::string& path);

/// Parameter overrides on top of `base`, validated.
SystemConfig apply_run_overrides(const SystemConfig& base, const RunFile& run);

/// duration, dt, initial_mode and events.
Scenario scenario_from(const RunFile& run);

struct SweepSpec {
    Mode mode = Mode::Gfl;
    std::string axis;
    double from = 0.0;
    double to = 1.0;
    std::string fixed_axis;
    double fixed_value = 0.0;
};
SweepSpec parse_sweep(const std::string& text);

/// Splits on commas and trims.
std::vector<std::string> split_list(const std::string& text);

}  // namespace gridswitch
