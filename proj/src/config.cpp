#include "gridswitch/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>

namespace gridswitch {

namespace {

using Accessor = std::function<double&(SystemConfig&)>;

const std::vector<std::pair<std::string, Accessor>>& accessor_table() {
    static const std::vector<std::pair<std::string, Accessor>> table = {
        {"r_f", [](SystemConfig& c) -> double& { return c.params.r_f; }},
        {"l_f", [](SystemConfig& c) -> double& { return c.params.l_f; }},
        {"c_f", [](SystemConfig& c) -> double& { return c.params.c_f; }},
        {"scr", [](SystemConfig& c) -> double& { return c.params.scr; }},
        {"x_over_r", [](SystemConfig& c) -> double& { return c.params.x_over_r; }},
        {"v_g", [](SystemConfig& c) -> double& { return c.params.v_g; }},
        {"omega0", [](SystemConfig& c) -> double& { return c.params.omega0; }},
        {"omega_base", [](SystemConfig& c) -> double& { return c.params.omega_base; }},
        {"kp_pll", [](SystemConfig& c) -> double& { return c.gfl.kp_pll; }},
        {"ki_pll", [](SystemConfig& c) -> double& { return c.gfl.ki_pll; }},
        {"kp_o1", [](SystemConfig& c) -> double& { return c.gfl.kp_o1; }},
        {"ki_o1", [](SystemConfig& c) -> double& { return c.gfl.ki_o1; }},
        {"kp_i1", [](SystemConfig& c) -> double& { return c.gfl.kp_i1; }},
        {"ki_i1", [](SystemConfig& c) -> double& { return c.gfl.ki_i1; }},
        {"j_virt", [](SystemConfig& c) -> double& { return c.gfm.j_virt; }},
        {"k_d", [](SystemConfig& c) -> double& { return c.gfm.k_d; }},
        {"k_omega", [](SystemConfig& c) -> double& { return c.gfm.k_omega; }},
        {"k_u", [](SystemConfig& c) -> double& { return c.gfm.k_u; }},
        {"k_q", [](SystemConfig& c) -> double& { return c.gfm.k_q; }},
        {"kp_q", [](SystemConfig& c) -> double& { return c.gfm.kp_q; }},
        {"ki_q", [](SystemConfig& c) -> double& { return c.gfm.ki_q; }},
        {"kp_o2", [](SystemConfig& c) -> double& { return c.gfm.kp_o2; }},
        {"ki_o2", [](SystemConfig& c) -> double& { return c.gfm.ki_o2; }},
        {"kp_i2", [](SystemConfig& c) -> double& { return c.gfm.kp_i2; }},
        {"ki_i2", [](SystemConfig& c) -> double& { return c.gfm.ki_i2; }},
        {"p_ref", [](SystemConfig& c) -> double& { return c.sp.p_ref; }},
        {"q_ref", [](SystemConfig& c) -> double& { return c.sp.q_ref; }},
        {"vd_ref", [](SystemConfig& c) -> double& { return c.sp.vd_ref; }},
        {"vq_ref", [](SystemConfig& c) -> double& { return c.sp.vq_ref; }},
        {"setpoint_bound", [](SystemConfig& c) -> double& { return c.sp.bound; }},
    };
    return table;
}

const Accessor* find_accessor(const std::string& key) {
    for (const auto& [name, acc] : accessor_table())
        if (name == key) return &acc;
    return nullptr;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

std::vector<KeyValue> read_key_values(std::istream& in) {
    std::vector<KeyValue> out;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
        if (kv.key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": missing key");
        out.push_back(std::move(kv));
    }
    return out;
}

double parse_number(const KeyValue& kv) {
    const std::string& s = kv.value;
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("line " + std::to_string(kv.line) + ": key '" + kv.key +
                          "' has non-numeric value '" + s + "'");
    return v;
}

const std::vector<std::string>& parameter_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& entry : accessor_table()) k.push_back(entry.first);
        return k;
    }();
    return keys;
}

bool is_parameter_key(const std::string& key) { return find_accessor(key) != nullptr; }

void set_parameter(SystemConfig& cfg, const std::string& key, double value) {
    const Accessor* acc = find_accessor(key);
    if (!acc) throw ConfigError("unknown parameter key '" + key + "'");
    (*acc)(cfg) = value;
}

double get_parameter(const SystemConfig& cfg, const std::string& key) {
    const Accessor* acc = find_accessor(key);
    if (!acc) throw ConfigError("unknown parameter key '" + key + "'");
    return (*acc)(const_cast<SystemConfig&>(cfg));
}

SystemConfig apply_config(SystemConfig base, const std::vector<KeyValue>& entries) {
    for (const auto& kv : entries) {
        if (!is_parameter_key(kv.key))
            throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
        set_parameter(base, kv.key, parse_number(kv));
    }
    try {
        base.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return base;
}

SystemConfig load_config(std::istream& in) { return apply_config(SystemConfig{}, read_key_values(in)); }

SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return load_config(in);
}

void write_config(std::ostream& out, const SystemConfig& cfg) {
    const auto old = out.precision(17);
    for (const auto& key : parameter_keys()) out << key << " = " << get_parameter(cfg, key) << '\n';
    out.precision(old);
}

}  // namespace gridswitch
