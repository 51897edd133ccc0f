#include "vnla/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vnla {

bool is_success(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env,
                double success_radius, bool require_explicit_stop) {
  if (require_explicit_stop && !trace.stopped) return false;
  const double d = geodesic_distance(env, trace.final_pose.viewpoint, dp.goal_viewpoints);
  return d <= success_radius;
}

bool is_room_success(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env) {
  if (!dp.room_label) {
    throw std::invalid_argument("is_room_success: datapoint has no room label");
  }
  return env.room_label_of(trace.final_pose.viewpoint) == *dp.room_label;
}

double nav_error(const EpisodeTrace& trace, const DataPoint& dp, const EnvironmentGraph& env,
                 double cap, bool* capped) {
  const double d = geodesic_distance(env, trace.final_pose.viewpoint, dp.goal_viewpoints);
  if (!std::isfinite(d)) {
    if (capped != nullptr) *capped = true;
    return cap;
  }
  if (capped != nullptr) *capped = false;
  return d;
}

EvalParams EvalParams::from_config(const RunConfig& cfg) {
  EvalParams p;
  p.episode = EpisodeParams::from_config(cfg, /*train=*/false);
  p.success_radius = cfg.get_double("eval.success_radius");
  p.require_explicit_stop = cfg.get_bool("eval.require_explicit_stop");
  p.nav_error_cap = cfg.get_double("eval.nav_error_cap");
  p.l_max = cfg.get_int("eval.l_max");
  p.workers = cfg.workers();
  p.feature_seed_base = static_cast<std::uint64_t>(cfg.get_int("env.feature_seed"));
  return p;
}

Aggregate aggregate_values(std::span<const double> values) {
  Aggregate agg;
  if (values.empty()) return agg;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  agg.mean = mean;
  if (values.size() < 2) return agg;  // single seed: half-width 0 by convention
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size() - 1);
  const double std_err = std::sqrt(var) / std::sqrt(static_cast<double>(values.size()));
  agg.half_width = 1.96 * std_err;
  return agg;
}

MetricsReport evaluate(const AgentModel& model, const std::string& split_name,
                       const std::vector<DataPoint>& split,
                       const std::map<std::string, const EnvironmentGraph*>& envs,
                       const EvalBudgetStats& stats, const EvalParams& params,
                       const std::vector<std::uint64_t>& seeds,
                       std::vector<EpisodeOutcome>* outcomes) {
  if (split.empty()) throw DataError("evaluate: empty split");
  MetricsReport report;
  report.split = split_name;
  report.seeds = seeds;

  // Per-datapoint constants.
  const int n = static_cast<int>(split.size());
  std::vector<const EnvironmentGraph*> dp_env(static_cast<std::size_t>(n));
  std::vector<int> dp_budget(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> dp_seed(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& dp = split[static_cast<std::size_t>(i)];
    const auto it = envs.find(dp.env_id);
    if (it == envs.end()) throw DataError("evaluate: unknown environment " + dp.env_id);
    dp_env[static_cast<std::size_t>(i)] = it->second;
    dp_budget[static_cast<std::size_t>(i)] =
        time_budget_eval(dp, *it->second, stats, params.l_max);
    dp_seed[static_cast<std::size_t>(i)] =
        derive_seed(params.feature_seed_base, hash_str(dp.env_id));
  }

  if (outcomes != nullptr) outcomes->clear();
  for (std::uint64_t seed : seeds) {
    std::vector<EpisodeOutcome> results(static_cast<std::size_t>(n));
    const int threads = std::max(1, params.workers);
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (int i = 0; i < n; ++i) {
      const auto& dp = split[static_cast<std::size_t>(i)];
      const EnvironmentGraph& env = *dp_env[static_cast<std::size_t>(i)];
      Rng rng(derive_seed(seed, std::string_view("eval"), static_cast<std::uint64_t>(i)));
      const EpisodeTrace trace =
          run_episode(dp, env, model, params.episode, dp_budget[static_cast<std::size_t>(i)],
                      dp_seed[static_cast<std::size_t>(i)], rng, nullptr);
      EpisodeOutcome out;
      out.env_id = dp.env_id;
      out.object_label = dp.object_label;
      out.room_label = dp.room_label;
      out.time_budget = trace.time_budget;
      out.b_hat = trace.b_hat;
      out.request_steps = trace.request_steps;
      out.steps = static_cast<int>(trace.steps.size());
      out.stopped = trace.stopped;
      out.final_viewpoint = env.viewpoint_ids[static_cast<std::size_t>(trace.final_pose.viewpoint)];
      out.success = is_success(trace, dp, env, params.success_radius, params.require_explicit_stop);
      out.nav_error = nav_error(trace, dp, env, params.nav_error_cap, &out.nav_error_capped);
      out.room_success = dp.room_label ? is_room_success(trace, dp, env) : false;
      results[static_cast<std::size_t>(i)] = std::move(out);
    }

    SeedMetrics m;
    m.total = n;
    double err = 0;
    int successes = 0, room_successes = 0;
    for (const auto& out : results) {
      successes += out.success ? 1 : 0;
      err += out.nav_error;
      if (out.room_label) {
        m.room_total += 1;
        room_successes += out.room_success ? 1 : 0;
      }
    }
    m.success_rate = static_cast<double>(successes) / n;
    m.room_success_rate =
        m.room_total > 0 ? static_cast<double>(room_successes) / m.room_total : 0.0;
    m.mean_nav_error = err / n;
    report.per_seed.push_back(m);
    if (outcomes != nullptr) {
      outcomes->insert(outcomes->end(), results.begin(), results.end());
    }
  }

  std::vector<double> success, room, err;
  for (const auto& m : report.per_seed) {
    success.push_back(m.success_rate);
    room.push_back(m.room_success_rate);
    err.push_back(m.mean_nav_error);
  }
  report.success_rate = aggregate_values(success);
  report.room_success_rate = aggregate_values(room);
  report.mean_nav_error = aggregate_values(err);
  return report;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "vnla-report/1";
  j["split"] = split;
  j["seeds"] = seeds;
  auto agg = [](const Aggregate& a) {
    return nlohmann::ordered_json{{"mean", a.mean}, {"half_width", a.half_width}};
  };
  j["success_rate"] = agg(success_rate);
  j["room_success_rate"] = agg(room_success_rate);
  j["mean_nav_error"] = agg(mean_nav_error);
  auto per_seed_json = nlohmann::ordered_json::array();
  for (const auto& m : per_seed) {
    per_seed_json.push_back({{"success_rate", m.success_rate},
                             {"room_success_rate", m.room_success_rate},
                             {"mean_nav_error", m.mean_nav_error},
                             {"total", m.total},
                             {"room_total", m.room_total}});
  }
  j["per_seed"] = per_seed_json;
  return j;
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "split: " << split << " (seeds: " << seeds.size() << ")\n";
  out << std::left << std::setw(26) << "metric" << std::right << std::setw(10) << "mean"
      << std::setw(12) << "half-width" << "\n";
  auto row = [&](const char* name, const Aggregate& a, double scale) {
    out << std::left << std::setw(26) << name << std::right << std::setw(10) << a.mean * scale
        << std::setw(12) << a.half_width * scale << "\n";
  };
  row("success rate (%)", success_rate, 100.0);
  row("room success rate (%)", room_success_rate, 100.0);
  row("mean nav error (m)", mean_nav_error, 1.0);
  return out.str();
}

std::vector<double> analyze_requests(std::span<const EpisodeOutcome> outcomes) {
  std::vector<double> bins(10, 0.0);
  double total = 0;
  for (const auto& out : outcomes) {
    for (int t : out.request_steps) {
      const double frac = static_cast<double>(t) / std::max(1, out.time_budget);
      const int bin = std::min(9, static_cast<int>(frac * 10.0));
      bins[static_cast<std::size_t>(bin)] += 1;
      total += 1;
    }
  }
  if (total > 0) {
    for (auto& b : bins) b /= total;
  }
  return bins;
}

LabelTables analyze_by_label(std::span<const EpisodeOutcome> outcomes, int min_frequency) {
  std::map<std::string, std::pair<int, int>> objects, rooms;  // label -> (successes, total)
  for (const auto& out : outcomes) {
    auto& obj = objects[out.object_label];
    obj.first += out.success ? 1 : 0;
    obj.second += 1;
    if (out.room_label) {
      auto& room = rooms[*out.room_label];
      room.first += out.success ? 1 : 0;
      room.second += 1;
    }
  }
  auto to_rows = [&](const std::map<std::string, std::pair<int, int>>& counts) {
    std::vector<LabelRow> rows;
    for (const auto& [label, c] : counts) {
      if (c.second < min_frequency) continue;
      rows.push_back({label, c.first, c.second, static_cast<double>(c.first) / c.second});
    }
    std::sort(rows.begin(), rows.end(), [](const LabelRow& a, const LabelRow& b) {
      return a.rate != b.rate ? a.rate > b.rate : a.label < b.label;
    });
    return rows;
  };
  return {to_rows(objects), to_rows(rooms)};
}

void save_outcomes(std::span<const EpisodeOutcome> outcomes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  for (const auto& o : outcomes) {
    nlohmann::ordered_json j;
    j["env"] = o.env_id;
    j["object"] = o.object_label;
    if (o.room_label) j["room"] = *o.room_label;
    j["t_budget"] = o.time_budget;
    j["b_hat"] = o.b_hat;
    j["requests"] = o.request_steps;
    j["steps"] = o.steps;
    j["stopped"] = o.stopped;
    j["final_viewpoint"] = o.final_viewpoint;
    j["success"] = o.success;
    j["room_success"] = o.room_success;
    j["nav_error"] = o.nav_error;
    out << j.dump() << "\n";
  }
}

std::vector<EpisodeOutcome> load_outcomes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<EpisodeOutcome> outcomes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EpisodeOutcome o;
    o.env_id = j.at("env").get<std::string>();
    o.object_label = j.at("object").get<std::string>();
    if (j.contains("room")) o.room_label = j.at("room").get<std::string>();
    o.time_budget = j.at("t_budget").get<int>();
    o.b_hat = j.at("b_hat").get<int>();
    o.request_steps = j.at("requests").get<std::vector<int>>();
    o.steps = j.at("steps").get<int>();
    o.stopped = j.at("stopped").get<bool>();
    o.final_viewpoint = j.at("final_viewpoint").get<std::string>();
    o.success = j.at("success").get<bool>();
    o.room_success = j.at("room_success").get<bool>();
    o.nav_error = j.at("nav_error").get<double>();
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

}  // namespace vnla
