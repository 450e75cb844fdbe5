#include "gridswitch/scenario_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace gridswitch {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double to_number(const std::string& key, const std::string& text, int line = 0) {
    return parse_number(KeyValue{key, trim(text), line});
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            out.push_back(trim(item));
            item.clear();
        } else {
            item += ch;
        }
    }
    out.push_back(trim(item));
    return out;
}

const std::vector<std::string>& run_option_keys() {
    static const std::vector<std::string> keys = {
        "name",        "command",     "plane",      "mode",         "origin",     "duration",
        "dt",          "initial_mode", "policy",    "threshold",    "epsilon_h",  "weights",
        "samples",     "holdout",     "k_max",      "restarts",     "resolution", "seed",
        "epsilon",     "epsilon_r",   "assess_from", "compare_linear", "sweep_points", "context_samples",
        "context_k_max", "context_resolution", "record_every"};
    return keys;
}

std::string RunFile::get(const std::string& key, const std::string& fallback) const {
    const auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
}

double RunFile::number(const std::string& key, double fallback) const {
    const auto it = options.find(key);
    return it == options.end() ? fallback : to_number(key, it->second);
}

std::vector<double> RunFile::numbers(const std::string& key) const {
    std::vector<double> out;
    const auto it = options.find(key);
    if (it == options.end()) return out;
    for (const auto& item : split_list(it->second)) out.push_back(to_number(key, item));
    return out;
}

RunFile read_run_file(std::istream& in, const std::string& name) {
    RunFile run;
    run.name = name;
    const auto& opts = run_option_keys();
    for (const auto& kv : read_key_values(in)) {
        if (kv.key == "event") {
            const auto parts = split_list(kv.value);
            if (parts.size() != 3)
                throw ConfigError("line " + std::to_string(kv.line) + ": event needs 'time, key, value'");
            run.events.push_back({to_number("event", parts[0], kv.line), parts[1],
                                  to_number("event", parts[2], kv.line)});
        } else if (kv.key == "sweep") {
            parse_sweep(kv.value);
            run.sweeps.push_back(kv.value);
        } else if (std::find(opts.begin(), opts.end(), kv.key) != opts.end()) {
            run.options[kv.key] = kv.value;
        } else if (is_parameter_key(kv.key)) {
            parse_number(kv);
            run.overrides.push_back(kv);
        } else {
            throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
        }
    }
    if (run.has("name")) run.name = run.get("name", run.name);
    return run;
}

RunFile read_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run file '" + path + "'");
    return read_run_file(in, path);
}

SystemConfig apply_run_overrides(const SystemConfig& base, const RunFile& run) {
    return apply_config(base, run.overrides);
}

Scenario scenario_from(const RunFile& run) {
    Scenario s;
    s.name = run.name;
    s.duration = run.number("duration", s.duration);
    s.dt = run.number("dt", s.dt);
    if (run.has("initial_mode")) {
        try {
            s.initial_mode = parse_mode(run.get("initial_mode", "gfl"));
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
    s.events = run.events;
    try {
        s.validate();
    } catch (const SimulationError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

SweepSpec parse_sweep(const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 6)
        throw ConfigError("sweep needs 'mode, axis, from, to, fixed_axis, fixed_value'");
    SweepSpec s;
    try {
        s.mode = parse_mode(parts[0]);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    s.axis = parts[1];
    s.from = to_number("sweep", parts[2]);
    s.to = to_number("sweep", parts[3]);
    s.fixed_axis = parts[4];
    s.fixed_value = to_number("sweep", parts[5]);
    if (!is_parameter_key(s.axis) || !is_parameter_key(s.fixed_axis))
        throw ConfigError("sweep names an unknown parameter");
    return s;
}

}  // namespace gridswitch
