#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vnla/env.hpp"
#include "vnla/rng.hpp"

namespace vnla {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorldgenParams {
  int rooms_min = 4, rooms_max = 7;
  int viewpoints_per_room_min = 2, viewpoints_per_room_max = 4;
  int objects_per_room_min = 1, objects_per_room_max = 3;
  double room_size_min = 4.0, room_size_max = 7.0;
  double hallway_width = 3.0;
  std::vector<std::string> object_labels;  // empty -> built-in list
  std::vector<std::string> room_labels;
};

const std::vector<std::string>& default_object_labels();
const std::vector<std::string>& default_room_labels();

// Rooms along a central hallway on a flat plane, viewpoints inside rooms and
// hallway, edges under 5 m, at least one object per room. Deterministic in
// (seed, env_id, params).
EnvironmentGraph generate_environment(std::uint64_t seed, const std::string& env_id,
                                      const WorldgenParams& params);

// "find a/an <obj> [in the <room> | in one of the <rooms>]"
std::string make_endgoal(const std::string& object_label, bool count_singular,
                         const std::optional<std::string>& room_label, int room_count);

// Rule-based English pluralization; small irregular table, idempotent on the
// plurals it knows.
std::string pluralize(const std::string& label);

struct DataPoint {
  std::string env_id;
  Pose start;
  std::vector<int> goal_viewpoints;  // sorted indices into the environment
  std::string end_goal;
  std::string object_label;
  std::optional<std::string> room_label;  // absent for NoRoom data
  int path_len = 0;  // teacher actions from start to the goal set, stop included
};

struct DatasetSplits {
  std::vector<DataPoint> train, dev_seen, dev_unseen, test_seen, test_unseen;

  const std::vector<DataPoint>& split(const std::string& name) const;
  static const std::vector<std::string>& split_names();
};

enum class DatasetMode { asknav, noroom };
DatasetMode dataset_mode_from_string(const std::string& s);
const char* to_string(DatasetMode m);

struct DatagenParams {
  DatasetMode mode = DatasetMode::asknav;
  int eval_split_target = 200;
  int bucket_sample_asknav = 10;   // Algorithm-2 N for asknav
  int bucket_sample_noroom = 20;   // Algorithm-2 N for noroom
  int max_starts_per_room = 5;     // asknav, per (bucket, room)
  int max_starts_per_object = 12;  // noroom, per bucket
  int path_min = 5, path_max = 25;
};

struct DatagenCounts {
  int candidate_points = 0;
  int discarded_objects_out_of_room = 0;
  int rejected_adjacent = 0;
  int rejected_path_length = 0;
};

DatasetSplits generate_dataset(const std::vector<const EnvironmentGraph*>& envs,
                               const std::vector<bool>& heldout, const DatagenParams& params,
                               Rng& rng, DatagenCounts* counts = nullptr);

struct DatasetBucket {
  int env_index = 0;
  std::string room_label;  // empty for noroom buckets
  std::string object_label;
  std::vector<DataPoint> points;
};

// The evaluation-split sampler: repeatedly shuffle the bucket pool, draw at
// most n_per_bucket points from one bucket per environment per round, and
// consume drawn buckets until the target is met or the pool is exhausted.
// Undrawn points land in `residual` for later splits.
std::vector<DataPoint> sample_evaluation_split(std::vector<DatasetBucket>& pool, int n_per_bucket,
                                               int target, Rng& rng,
                                               std::vector<DatasetBucket>& residual);

struct StatsReport {
  std::map<std::string, int> split_sizes;
  std::map<std::string, int> object_counts;      // over all splits
  std::map<std::string, int> start_room_counts;  // requires envs at call time
  std::map<std::string, int> goal_room_counts;
  std::map<int, int> path_length_hist;
  int total = 0;
};

StatsReport dataset_stats(const DatasetSplits& splits,
                          const std::map<std::string, const EnvironmentGraph*>& envs);

// JSON-lines dataset io (schema "vnla-data/1"); one DataPoint per line.
void save_datapoints(const std::vector<DataPoint>& dps,
                     const std::map<std::string, const EnvironmentGraph*>& envs,
                     const std::string& path);
std::vector<DataPoint> load_datapoints(const std::string& path,
                                       const std::map<std::string, const EnvironmentGraph*>& envs);

}  // namespace vnla
