#include "vnla/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vnla {

namespace {

enum class KeyType { integer, real, boolean, text };

struct KeySpec {
  const char* key;
  KeyType type;
  const char* default_value;
  const char* comment;  // paper-scale value where one exists
};

// Desk-scale defaults are active; full-scale reference values live in the
// comments and in configs/default.ini.
const KeySpec kRegistry[] = {
    {"run.seed", KeyType::integer, "1", "root of every random stream"},

    {"env.feature_dim", KeyType::integer, "64", "observation size (image embedding 2048 at full scale)"},
    {"env.fov_degrees", KeyType::real, "60", "horizontal field of view"},
    {"env.visibility_range", KeyType::real, "10", "object visibility range, meters"},
    {"env.feature_seed", KeyType::integer, "1234", "texture stream seed, mixed with the env id"},

    {"worldgen.num_envs", KeyType::integer, "24", "environments to generate"},
    {"worldgen.heldout_envs", KeyType::integer, "4", "environments reserved for unseen splits"},
    {"worldgen.rooms_min", KeyType::integer, "4", ""},
    {"worldgen.rooms_max", KeyType::integer, "7", ""},
    {"worldgen.viewpoints_per_room_min", KeyType::integer, "2", ""},
    {"worldgen.viewpoints_per_room_max", KeyType::integer, "4", ""},
    {"worldgen.objects_per_room_min", KeyType::integer, "1", ""},
    {"worldgen.objects_per_room_max", KeyType::integer, "3", ""},
    {"worldgen.room_size_min", KeyType::real, "4", "meters"},
    {"worldgen.room_size_max", KeyType::real, "7", "meters"},
    {"worldgen.hallway_width", KeyType::real, "3", "meters"},
    {"worldgen.eval_split_target", KeyType::integer, "200", "evaluation split size (5000 at full scale)"},
    {"worldgen.bucket_sample_asknav", KeyType::integer, "10", "per-bucket sample cap N, asknav"},
    {"worldgen.bucket_sample_noroom", KeyType::integer, "20", "per-bucket sample cap N, noroom"},
    {"worldgen.max_starts_per_room", KeyType::integer, "5", "start viewpoints per (bucket, room)"},
    {"worldgen.max_starts_per_object", KeyType::integer, "12", "start viewpoints per noroom bucket"},
    {"worldgen.path_min", KeyType::integer, "5", "teacher action filter, lower bound"},
    {"worldgen.path_max", KeyType::integer, "25", "teacher action filter, upper bound"},

    {"policy.hidden_size", KeyType::integer, "64", "LSTM hidden size (512 at full scale)"},
    {"policy.word_emb", KeyType::integer, "32", "word embedding size (256)"},
    {"policy.nav_action_emb", KeyType::integer, "8", "navigation action embedding size (32)"},
    {"policy.ask_action_emb", KeyType::integer, "8", "help-requesting action embedding size (32)"},
    {"policy.budget_emb", KeyType::integer, "4", "budget embedding size (16)"},
    {"policy.coverage_dim", KeyType::integer, "3", "coverage vector size (10)"},
    {"policy.ask_hidden", KeyType::integer, "64", "help-requesting hidden size (512)"},
    {"policy.ask_layers", KeyType::integer, "1", "help-requesting hidden layers (1)"},
    {"policy.dropout", KeyType::real, "0", "dropout ratio (0.5 at full scale)"},

    {"training.iterations", KeyType::integer, "400", "training iterations (1e5 at full scale)"},
    {"training.batch_size", KeyType::integer, "100", "episodes per update (100)"},
    {"training.lr", KeyType::real, "0.001", "Adam learning rate (1e-4 at full scale)"},
    {"training.weight_decay", KeyType::real, "0.0005", "L2-norm regularization (5e-4)"},
    {"training.tau", KeyType::real, "0.4", "help-requesting ratio (0.4)"},
    {"training.k", KeyType::integer, "4", "actions suggested by a subgoal (4)"},
    {"training.ask", KeyType::text, "learned", "none|first|random|teacher|learned"},
    {"training.advisor", KeyType::text, "indirect", "indirect|direct_sub|direct_nosub"},
    {"training.workers", KeyType::integer, "1", "parallel episode workers"},
    {"training.grad_chunks", KeyType::integer, "8", "fixed gradient accumulation slots"},
    {"training.dev_eval_every", KeyType::integer, "50", "iterations between dev evaluations"},
    {"training.dev_eval_limit", KeyType::integer, "200", "dev datapoints per evaluation"},
    {"training.checkpoint_every", KeyType::integer, "0", "0 = final checkpoint only"},
    {"training.dev_split", KeyType::text, "dev_seen", "split used for periodic evaluation"},

    {"eval.success_radius", KeyType::real, "2", "success radius d, meters (2)"},
    {"eval.num_seeds", KeyType::integer, "5", "evaluating random seeds (5)"},
    {"eval.l_max", KeyType::integer, "25", "maximum time budget (25)"},
    {"eval.require_explicit_stop", KeyType::boolean, "false", "success requires an emitted stop"},
    {"eval.nav_error_cap", KeyType::real, "50", "sentinel for unreachable final viewpoints"},
    {"eval.label_threshold", KeyType::integer, "10", "min label frequency in analysis tables (50)"},

    {"ask_teacher.rules", KeyType::text, "abcde", "enabled help-requesting rules"},
    {"ask_teacher.delta", KeyType::real, "8", "deviation threshold, meters (8)"},
    {"ask_teacher.epsilon", KeyType::real, "1.0", "uncertainty threshold, nats (1.0)"},
    {"ask_teacher.mu", KeyType::integer, "9", "non-moving threshold, steps (9)"},
    {"ask_teacher.deviation_metric", KeyType::text, "euclidean", "euclidean|geodesic"},
};

const KeySpec* find_spec(const std::string& key) {
  for (const auto& spec : kRegistry) {
    if (key == spec.key) return &spec;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void check_value(const KeySpec& spec, const std::string& value) {
  try {
    std::size_t used = 0;
    switch (spec.type) {
      case KeyType::integer:
        (void)std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        break;
      case KeyType::real:
        (void)std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        break;
      case KeyType::boolean:
        if (value != "true" && value != "false") throw std::invalid_argument(value);
        break;
      case KeyType::text:
        break;
    }
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + std::string(spec.key) + ": '" + value + "'");
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const auto& spec : kRegistry) cfg.values_[spec.key] = spec.default_value;
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig cfg = defaults();
  cfg.load_file(path);
  return cfg;
}

RunConfig RunConfig::from_echo(const nlohmann::json& echo) {
  RunConfig cfg = defaults();
  for (auto it = echo.begin(); it != echo.end(); ++it) {
    cfg.set(it.key(), it.value().get<std::string>());
  }
  return cfg;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    set(section.empty() ? key : section + "." + key, value);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (spec == nullptr) throw ConfigError("unknown config key: " + key);
  check_value(*spec, value);
  values_[key] = value;
}

void RunConfig::apply_override(const std::string& key_equals_value) {
  const auto eq = key_equals_value.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value: " + key_equals_value);
  }
  set(trim(key_equals_value.substr(0, eq)), trim(key_equals_value.substr(eq + 1)));
}

int RunConfig::get_int(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return static_cast<int>(std::stoll(it->second));
}

double RunConfig::get_double(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return std::stod(it->second);
}

bool RunConfig::get_bool(const std::string& key) const {
  return get_string(key) == "true";
}

const std::string& RunConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

nlohmann::ordered_json RunConfig::echo() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : values_) {
    // The worker count cannot change any result, so it stays out of artifact
    // echoes; identical runs at different parallelism produce identical bytes.
    if (key == "training.workers") continue;
    j[key] = value;
  }
  return j;
}

std::string RunConfig::echo_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& spec : kRegistry) {
    const std::string key(spec.key);
    const auto dot = key.find('.');
    const std::string sect = key.substr(0, dot);
    if (sect != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sect << "]\n";
      section = sect;
    }
    out << key.substr(dot + 1) << " = " << values_.at(key);
    if (spec.comment[0] != '\0') out << "  # " << spec.comment;
    out << "\n";
  }
  return out.str();
}

}  // namespace vnla
