#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vnla/training.hpp"

namespace vnla {

bool is_success(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env,
                double success_radius, bool require_explicit_stop = false);

// Undefined for NoRoom datapoints (no room label); callers exclude them.
bool is_room_success(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env);

double nav_error(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env,
                 double cap, bool* capped = nullptr);

// Per-episode summary retained for reports and the analysis commands.
struct EpisodeOutcome {
  std::string env_id;
  std::string object_label;
  std::optional<std::string> room_label;
  int time_budget = 0, b_hat = 0;
  std::vector<int> request_steps;
  int steps = 0;
  bool stopped = false;
  std::string final_viewpoint;
  bool success = false;
  bool room_success = false;  // meaningful only when room_label is set
  double nav_error = 0;
  bool nav_error_capped = false;
};

struct EvalParams {
  EpisodeParams episode;  // eval-mode episode parameters
  double success_radius = 2.0;
  bool require_explicit_stop = false;
  double nav_error_cap = 50.0;
  int l_max = 25;
  int workers = 1;
  std::uint64_t feature_seed_base = 1234;

  static EvalParams from_config(const RunConfig& cfg);
};

struct SeedMetrics {
  double success_rate = 0;
  double room_success_rate = 0;  // over datapoints with a room label
  double mean_nav_error = 0;
  int total = 0, room_total = 0;
};

struct Aggregate {
  double mean = 0, half_width = 0;  // mean +- 1.96 * stdErr across seeds
};

struct MetricsReport {
  std::string split;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedMetrics> per_seed;
  Aggregate success_rate, room_success_rate, mean_nav_error;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

Aggregate aggregate_values(std::span<const double> values);

MetricsReport evaluate(const AgentModel& model, const std::string& split_name,
                       const std::vector<DataPoint>& split,
                       const std::map<std::string, const EnvironmentGraph*>& envs,
                       const EvalBudgetStats& stats, const EvalParams& params,
                       const std::vector<std::uint64_t>& seeds,
                       std::vector<EpisodeOutcome>* outcomes = nullptr);

// Fractions of granted requests per normalized-time decile; zeros when no
// requests were made.
std::vector<double> analyze_requests(std::span<const EpisodeOutcome> outcomes);

struct LabelRow {
  std::string label;
  int successes = 0, total = 0;
  double rate = 0;
};

struct LabelTables {
  std::vector<LabelRow> objects;
  std::vector<LabelRow> rooms;
};

LabelTables analyze_by_label(std::span<const EpisodeOutcome> outcomes, int min_frequency);

void save_outcomes(std::span<const EpisodeOutcome> outcomes, const std::string& path);
std::vector<EpisodeOutcome> load_outcomes(const std::string& path);

}  // namespace vnla
