#pragma once

#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridswitch/model.hpp"

namespace gridswitch {

/// Bad configuration input: unknown key, malformed value or violated domain.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One `key = value` line from a text file, with its line number for diagnostics.
struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

/// Splits a key-value text stream. `#` starts a comment; blank lines are skipped.
std::vector<KeyValue> read_key_values(std::istream& in);

double parse_number(const KeyValue& kv);

/// Names accepted by set_parameter/get_parameter, in a stable order.
const std::vector<std::string>& parameter_keys();

bool is_parameter_key(const std::string& key);
void set_parameter(SystemConfig& cfg, const std::string& key, double value);
double get_parameter(const SystemConfig& cfg, const std::string& key);

/// Applies key-value pairs on top of `base`; unknown keys throw ConfigError
/// naming the key. The result is validated.
SystemConfig apply_config(SystemConfig base, const std::vector<KeyValue>& entries);

SystemConfig load_config(const std::string& path);
SystemConfig load_config(std::istream& in);

/// Writes every parameter as `key = value` at 17 significant digits.
void write_config(std::ostream& out, const SystemConfig& cfg);

}  // namespace gridswitch
