#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace vnla {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat "section.key" -> value view of the config file plus command-line
// overrides and the run seed. Fully resolved before any work; unknown keys
// are rejected. The resolved map is echoed verbatim into every artifact.
class RunConfig {
 public:
  static RunConfig defaults();
  static RunConfig from_file(const std::string& path);
  static RunConfig from_echo(const nlohmann::json& echo);

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);        // validates
  void apply_override(const std::string& key_equals_value);          // "a.b=v"

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("run.seed")); }
  int workers() const { return get_int("training.workers"); }

  nlohmann::ordered_json echo() const;  // full resolved map
  std::string echo_ini() const;         // config-file rendering with comments

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vnla
