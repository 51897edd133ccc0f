#include "vnla/worldgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vnla/oracle.hpp"

namespace vnla {

const std::vector<std::string>& default_object_labels() {
  static const std::vector<std::string> kLabels = {
      "cup",  "towel", "pillow", "lamp",  "mirror", "sink",  "plant", "book",
      "vase", "chair", "soap",   "kettle", "bench", "shelf", "clock", "basket"};
  return kLabels;
}

const std::vector<std::string>& default_room_labels() {
  static const std::vector<std::string> kLabels = {"bathroom", "kitchen", "bedroom",
                                                   "office",   "lounge",  "pantry"};
  return kLabels;
}

namespace {

double q3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string pad_id(const char* prefix, int n, int width) {
  std::string s = std::to_string(n);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return prefix + s;
}

}  // namespace

EnvironmentGraph generate_environment(std::uint64_t seed, const std::string& env_id,
                                      const WorldgenParams& params) {
  if (params.rooms_min < 1 || params.rooms_max < params.rooms_min ||
      params.viewpoints_per_room_min < 1 || params.objects_per_room_min < 1 ||
      params.room_size_min < 2.0 || params.room_size_max < params.room_size_min) {
    throw GenerationError("infeasible worldgen parameters");
  }
  const auto& object_labels =
      params.object_labels.empty() ? default_object_labels() : params.object_labels;
  const auto& room_labels = params.room_labels.empty() ? default_room_labels() : params.room_labels;

  Rng rng(derive_seed(seed, hash_str(env_id), std::string_view("worldgen")));
  EnvironmentGraph env;
  env.id = env_id;

  const int num_rooms = params.rooms_min + rng.uniform_int(params.rooms_max - params.rooms_min + 1);
  const double hw = params.hallway_width;

  struct RoomPlan {
    RoomRect rect;
    double door_x = 0;
    bool north = true;
  };
  std::vector<RoomPlan> plans;
  double north_x = 0.5, south_x = 0.5;
  for (int i = 0; i < num_rooms; ++i) {
    const double w = rng.uniform(params.room_size_min, params.room_size_max);
    const double d = rng.uniform(params.room_size_min, params.room_size_max);
    RoomPlan plan;
    plan.north = (i % 2 == 0);
    double& cursor = plan.north ? north_x : south_x;
    const double y0 = plan.north ? hw / 2 + 0.2 : -(hw / 2 + 0.2) - d;
    plan.rect = {q3(cursor), q3(y0), q3(cursor + w), q3(y0 + d)};
    plan.door_x = q3(cursor + w / 2);
    cursor += w + 1.0;
    plans.push_back(plan);
  }
  const double hall_len = q3(std::max({north_x, south_x, 6.0}));

  Room hallway;
  hallway.id = pad_id("r", 0, 2);
  hallway.label = "hallway";
  hallway.bounds = {0.0, q3(-hw / 2), hall_len, q3(hw / 2)};
  env.rooms.push_back(hallway);
  for (int i = 0; i < num_rooms; ++i) {
    Room room;
    room.id = pad_id("r", i + 1, 2);
    room.label = room_labels[static_cast<std::size_t>(rng.uniform_int(
        static_cast<int>(room_labels.size())))];
    room.bounds = plans[static_cast<std::size_t>(i)].rect;
    env.rooms.push_back(room);
  }

  auto add_viewpoint = [&](double x, double y, int room) {
    env.viewpoint_ids.push_back(pad_id("v", env.num_viewpoints(), 3));
    env.positions.push_back({q3(x), q3(y), 0.0});
    env.room_of.push_back(room);
    return env.num_viewpoints() - 1;
  };

  // Hallway chain.
  std::vector<int> hall_vps;
  for (double x = 1.2; x < hall_len - 0.4; x += 2.6) {
    hall_vps.push_back(add_viewpoint(x, 0.0, 0));
  }
  if (hall_vps.empty()) hall_vps.push_back(add_viewpoint(hall_len / 2, 0.0, 0));
  for (std::size_t i = 0; i < hall_vps.size(); ++i) {
    for (std::size_t j = i + 1; j < hall_vps.size(); ++j) {
      if (dist3(env.positions[static_cast<std::size_t>(hall_vps[i])],
                env.positions[static_cast<std::size_t>(hall_vps[j])]) <= 4.9) {
        env.edges.emplace_back(hall_vps[i], hall_vps[j]);
      }
    }
  }

  for (int i = 0; i < num_rooms; ++i) {
    const auto& plan = plans[static_cast<std::size_t>(i)];
    const int room_index = i + 1;
    const double door_y = plan.north ? hw / 2 + 0.9 : -(hw / 2 + 0.9);
    std::vector<int> room_vps;
    room_vps.push_back(add_viewpoint(plan.door_x, door_y, room_index));

    const int extra = std::max(0, params.viewpoints_per_room_min +
                                      rng.uniform_int(params.viewpoints_per_room_max -
                                                      params.viewpoints_per_room_min + 1) -
                                      1);
    const RoomRect inset{plan.rect.x0 + 0.6, plan.rect.y0 + 0.6, plan.rect.x1 - 0.6,
                         plan.rect.y1 - 0.6};
    for (int e = 0; e < extra; ++e) {
      for (int attempt = 0; attempt < 40; ++attempt) {
        const double x = q3(rng.uniform(inset.x0, inset.x1));
        const double y = q3(rng.uniform(inset.y0, inset.y1));
        const Vec3 cand{x, y, 0.0};
        bool ok_spacing = true, ok_reach = false;
        for (int v : room_vps) {
          const double d = dist3(env.positions[static_cast<std::size_t>(v)], cand);
          if (d < 1.0) ok_spacing = false;
          if (d <= 4.5) ok_reach = true;
        }
        if (ok_spacing && ok_reach) {
          room_vps.push_back(add_viewpoint(x, y, room_index));
          break;
        }
      }
    }
    for (std::size_t a = 0; a < room_vps.size(); ++a) {
      for (std::size_t b = a + 1; b < room_vps.size(); ++b) {
        if (dist3(env.positions[static_cast<std::size_t>(room_vps[a])],
                  env.positions[static_cast<std::size_t>(room_vps[b])]) <= 4.9) {
          env.edges.emplace_back(room_vps[a], room_vps[b]);
        }
      }
    }
    // Door connects to the nearest hallway viewpoint.
    int nearest = hall_vps.front();
    double best = std::numeric_limits<double>::infinity();
    for (int h : hall_vps) {
      const double d = dist3(env.positions[static_cast<std::size_t>(h)],
                             env.positions[static_cast<std::size_t>(room_vps.front())]);
      if (d < best) {
        best = d;
        nearest = h;
      }
    }
    if (best > kMaxEdgeLength) throw GenerationError("door link exceeds 5 m in " + env_id);
    env.edges.emplace_back(room_vps.front(), nearest);
  }

  for (std::size_t r = 0; r < env.rooms.size(); ++r) {
    const auto& rect = env.rooms[r].bounds;
    const int count = params.objects_per_room_min +
                      rng.uniform_int(params.objects_per_room_max - params.objects_per_room_min + 1);
    for (int i = 0; i < count; ++i) {
      ObjectInstance obj;
      obj.label = object_labels[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(object_labels.size())))];
      obj.pos = {q3(rng.uniform(rect.x0 + 0.3, rect.x1 - 0.3)),
                 q3(rng.uniform(rect.y0 + 0.3, rect.y1 - 0.3)), 0.0};
      obj.room = static_cast<int>(r);
      env.objects.push_back(obj);
    }
  }

  env.finalize();

  // Whole-floor connectivity.
  std::vector<bool> seen(static_cast<std::size_t>(env.num_viewpoints()), false);
  std::vector<int> stack{0};
  seen[0] = true;
  int reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : env.adjacency[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = true;
        ++reached;
        stack.push_back(u);
      }
    }
  }
  if (reached != env.num_viewpoints()) {
    throw GenerationError("generated environment is not connected: " + env_id);
  }
  return env;
}

std::string pluralize(const std::string& label) {
  static const std::map<std::string, std::string> kIrregular = {
      {"foot", "feet"},     {"tooth", "teeth"},   {"goose", "geese"},   {"man", "men"},
      {"woman", "women"},   {"child", "children"}, {"mouse", "mice"},   {"person", "people"},
      {"leaf", "leaves"},   {"shelf", "shelves"}, {"knife", "knives"},  {"wolf", "wolves"},
      {"life", "lives"},    {"loaf", "loaves"},   {"half", "halves"},   {"calf", "calves"},
      {"scarf", "scarves"}, {"thief", "thieves"}, {"wife", "wives"},    {"elf", "elves"},
      {"sheep", "sheep"},   {"fish", "fish"},     {"deer", "deer"},     {"series", "series"},
      {"species", "species"}, {"moose", "moose"}, {"cactus", "cacti"},  {"die", "dice"},
      {"ox", "oxen"},       {"crisis", "crises"}};
  static const std::set<std::string> kKnownPlurals = [] {
    std::set<std::string> s;
    for (const auto& [sing, plur] : kIrregular) s.insert(plur);
    return s;
  }();
  if (kKnownPlurals.count(label)) return label;
  auto it = kIrregular.find(label);
  if (it != kIrregular.end()) return it->second;

  const auto ends_with = [&](const char* suffix) {
    const std::size_t n = std::string_view(suffix).size();
    return label.size() >= n && label.compare(label.size() - n, n, suffix) == 0;
  };
  if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh")) {
    return label + "es";
  }
  if (label.size() >= 2 && label.back() == 'y') {
    const char prev = label[label.size() - 2];
    if (prev != 'a' && prev != 'e' && prev != 'i' && prev != 'o' && prev != 'u') {
      return label.substr(0, label.size() - 1) + "ies";
    }
  }
  return label + "s";
}

std::string make_endgoal(const std::string& object_label, bool count_singular,
                         const std::optional<std::string>& room_label, int room_count) {
  if (object_label.empty() || (room_label && room_label->empty())) {
    throw std::invalid_argument("make_endgoal: empty label");
  }
  if (room_label && room_count < 1) {
    throw std::invalid_argument("make_endgoal: room_count must be >= 1 with a room label");
  }
  std::string obj = object_label;
  if (count_singular) {
    const char c = object_label.front();
    const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
    obj = (vowel ? "an " : "a ") + object_label;
  }
  if (!room_label) return "find " + obj;
  if (room_count == 1) return "find " + obj + " in the " + *room_label;
  return "find " + obj + " in one of the " + pluralize(*room_label);
}

const std::vector<DataPoint>& DatasetSplits::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev_seen") return dev_seen;
  if (name == "dev_unseen") return dev_unseen;
  if (name == "test_seen") return test_seen;
  if (name == "test_unseen") return test_unseen;
  throw std::invalid_argument("unknown split: " + name);
}

const std::vector<std::string>& DatasetSplits::split_names() {
  static const std::vector<std::string> kNames = {"train", "dev_seen", "dev_unseen", "test_seen",
                                                  "test_unseen"};
  return kNames;
}

DatasetMode dataset_mode_from_string(const std::string& s) {
  if (s == "asknav") return DatasetMode::asknav;
  if (s == "noroom") return DatasetMode::noroom;
  throw std::invalid_argument("unknown dataset mode: " + s);
}

const char* to_string(DatasetMode m) {
  return m == DatasetMode::asknav ? "asknav" : "noroom";
}

namespace {

// Teacher actions (stop included) from pose to the goal set; path_cap+1
// signals "did not finish".
int teacher_action_count(const EnvironmentGraph& env, Pose pose, const GoalField& field,
                         int path_cap) {
  int count = 0;
  while (count <= path_cap) {
    const NavAction a = nav_teacher(env, pose, field);
    ++count;
    if (a == NavAction::stop) return count;
    pose = transition(env, pose, a, field);
  }
  return path_cap + 1;
}

void sort_buckets(std::vector<DatasetBucket>& buckets) {
  std::sort(buckets.begin(), buckets.end(), [](const DatasetBucket& a, const DatasetBucket& b) {
    return std::tie(a.env_index, a.room_label, a.object_label) <
           std::tie(b.env_index, b.room_label, b.object_label);
  });
}

}  // namespace

std::vector<DataPoint> sample_evaluation_split(std::vector<DatasetBucket>& pool, int n_per_bucket,
                                               int target, Rng& rng,
                                               std::vector<DatasetBucket>& residual) {
  std::vector<DataPoint> drawn;
  while (static_cast<int>(drawn.size()) < target && !pool.empty()) {
    rng.shuffle(pool);
    std::set<int> sampled_envs;
    std::vector<DatasetBucket> survivors;
    for (auto& bucket : pool) {
      if (sampled_envs.count(bucket.env_index)) {
        survivors.push_back(std::move(bucket));
        continue;
      }
      sampled_envs.insert(bucket.env_index);
      rng.shuffle(bucket.points);
      const int take = std::min<int>(n_per_bucket, static_cast<int>(bucket.points.size()));
      for (int i = 0; i < take; ++i) drawn.push_back(bucket.points[static_cast<std::size_t>(i)]);
      if (take < static_cast<int>(bucket.points.size())) {
        DatasetBucket rest = bucket;
        rest.points.assign(bucket.points.begin() + take, bucket.points.end());
        residual.push_back(std::move(rest));
      }
    }
    pool = std::move(survivors);
  }
  residual.insert(residual.end(), std::make_move_iterator(pool.begin()),
                  std::make_move_iterator(pool.end()));
  pool.clear();
  return drawn;
}

DatasetSplits generate_dataset(const std::vector<const EnvironmentGraph*>& envs,
                               const std::vector<bool>& heldout, const DatagenParams& params,
                               Rng& rng, DatagenCounts* counts) {
  if (envs.size() != heldout.size()) {
    throw std::invalid_argument("generate_dataset: envs/heldout size mismatch");
  }
  DatagenCounts local;
  DatagenCounts& c = counts ? *counts : local;
  const bool noroom = params.mode == DatasetMode::noroom;

  std::vector<DatasetBucket> train_pool, held_pool;
  for (int ei = 0; ei < static_cast<int>(envs.size()); ++ei) {
    const EnvironmentGraph& env = *envs[static_cast<std::size_t>(ei)];
    std::map<std::string, int> rooms_with_label;
    for (const auto& room : env.rooms) rooms_with_label[room.label] += 1;

    // (room label, object label) buckets; instances outside their room's
    // bounding region are discarded.
    std::map<std::pair<std::string, std::string>, std::vector<int>> goal_sets;
    for (const auto& obj : env.objects) {
      const auto& room = env.rooms[static_cast<std::size_t>(obj.room)];
      if (!room.bounds.contains(obj.pos.x, obj.pos.y)) {
        c.discarded_objects_out_of_room += 1;
        continue;
      }
      const std::string room_key = noroom ? "" : room.label;
      goal_sets[{room_key, obj.label}].push_back(obj.delegate);
    }

    for (auto& [key, delegates] : goal_sets) {
      std::sort(delegates.begin(), delegates.end());
      delegates.erase(std::unique(delegates.begin(), delegates.end()), delegates.end());
      DatasetBucket bucket;
      bucket.env_index = ei;
      bucket.room_label = key.first;
      bucket.object_label = key.second;

      const GoalField field = compute_goal_field(env, delegates);
      std::optional<std::string> room_label =
          noroom ? std::nullopt : std::optional<std::string>(key.first);
      const std::string end_goal = make_endgoal(
          key.second, true, room_label, noroom ? 0 : rooms_with_label.at(key.first));

      std::vector<int> reachable;
      for (int v = 0; v < env.num_viewpoints(); ++v) {
        if (std::isfinite(field.dist[static_cast<std::size_t>(v)])) reachable.push_back(v);
      }
      std::vector<int> starts;
      if (noroom) {
        std::vector<int> pool = reachable;
        rng.shuffle(pool);
        pool.resize(std::min<std::size_t>(pool.size(),
                                          static_cast<std::size_t>(params.max_starts_per_object)));
        starts = pool;
      } else {
        std::map<int, std::vector<int>> by_room;
        for (int v : reachable) by_room[env.room_of[static_cast<std::size_t>(v)]].push_back(v);
        for (auto& [room_index, vps] : by_room) {
          (void)room_index;
          rng.shuffle(vps);
          const int take = std::min<int>(params.max_starts_per_room, static_cast<int>(vps.size()));
          starts.insert(starts.end(), vps.begin(), vps.begin() + take);
        }
      }

      for (int start : starts) {
        c.candidate_points += 1;
        const Pose pose{start, rng.uniform_int(kHeadingSteps), 0};
        const auto& adj = env.adjacency[static_cast<std::size_t>(start)];
        const bool adjacent = std::any_of(delegates.begin(), delegates.end(), [&](int g) {
          return std::binary_search(adj.begin(), adj.end(), g);
        });
        if (adjacent) {
          c.rejected_adjacent += 1;
          continue;
        }
        const int length = teacher_action_count(env, pose, field, params.path_max);
        if (length < params.path_min || length > params.path_max) {
          c.rejected_path_length += 1;
          continue;
        }
        DataPoint dp;
        dp.env_id = env.id;
        dp.start = pose;
        dp.goal_viewpoints = delegates;
        dp.end_goal = end_goal;
        dp.object_label = key.second;
        dp.room_label = room_label;
        dp.path_len = length;
        bucket.points.push_back(std::move(dp));
      }
      if (!bucket.points.empty()) {
        (heldout[static_cast<std::size_t>(ei)] ? held_pool : train_pool).push_back(std::move(bucket));
      }
    }
  }

  if (train_pool.empty() && held_pool.empty()) {
    std::ostringstream msg;
    msg << "no valid datapoints (candidates=" << c.candidate_points
        << " adjacent=" << c.rejected_adjacent << " path_length=" << c.rejected_path_length
        << " out_of_room_objects=" << c.discarded_objects_out_of_room << ")";
    throw GenerationError(msg.str());
  }

  const int n = noroom ? params.bucket_sample_noroom : params.bucket_sample_asknav;
  DatasetSplits splits;

  std::vector<DatasetBucket> residual1;
  splits.dev_seen = sample_evaluation_split(train_pool, n, params.eval_split_target, rng, residual1);
  sort_buckets(residual1);
  std::vector<DatasetBucket> residual2;
  splits.test_seen = sample_evaluation_split(residual1, n, params.eval_split_target, rng, residual2);
  sort_buckets(residual2);
  for (const auto& bucket : residual2) {
    splits.train.insert(splits.train.end(), bucket.points.begin(), bucket.points.end());
  }

  std::vector<DatasetBucket> hresidual1;
  splits.dev_unseen = sample_evaluation_split(held_pool, n, params.eval_split_target, rng, hresidual1);
  sort_buckets(hresidual1);
  std::vector<DatasetBucket> hresidual2;
  splits.test_unseen = sample_evaluation_split(hresidual1, n, params.eval_split_target, rng, hresidual2);

  // Seen splits may only reference environments that still appear in train.
  std::set<std::string> train_envs;
  for (const auto& dp : splits.train) train_envs.insert(dp.env_id);
  auto keep_training_envs = [&](std::vector<DataPoint>& dps) {
    std::erase_if(dps, [&](const DataPoint& dp) { return !train_envs.count(dp.env_id); });
  };
  keep_training_envs(splits.dev_seen);
  keep_training_envs(splits.test_seen);
  return splits;
}

StatsReport dataset_stats(const DatasetSplits& splits,
                          const std::map<std::string, const EnvironmentGraph*>& envs) {
  StatsReport report;
  for (const auto& name : DatasetSplits::split_names()) {
    const auto& dps = splits.split(name);
    report.split_sizes[name] = static_cast<int>(dps.size());
    report.total += static_cast<int>(dps.size());
    for (const auto& dp : dps) {
      report.object_counts[dp.object_label] += 1;
      report.path_length_hist[dp.path_len] += 1;
      const auto it = envs.find(dp.env_id);
      if (it != envs.end()) {
        const EnvironmentGraph& env = *it->second;
        report.start_room_counts[env.room_label_of(dp.start.viewpoint)] += 1;
        for (int g : dp.goal_viewpoints) report.goal_room_counts[env.room_label_of(g)] += 1;
      }
    }
  }
  return report;
}

void save_datapoints(const std::vector<DataPoint>& dps,
                     const std::map<std::string, const EnvironmentGraph*>& envs,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& dp : dps) {
    const auto it = envs.find(dp.env_id);
    if (it == envs.end()) throw std::runtime_error("save_datapoints: unknown env " + dp.env_id);
    const EnvironmentGraph& env = *it->second;
    nlohmann::ordered_json j;
    j["env"] = dp.env_id;
    j["start"] = {{"viewpoint", env.viewpoint_ids[static_cast<std::size_t>(dp.start.viewpoint)]},
                  {"heading", dp.start.heading},
                  {"elevation", dp.start.elevation}};
    auto goals = nlohmann::ordered_json::array();
    for (int g : dp.goal_viewpoints) goals.push_back(env.viewpoint_ids[static_cast<std::size_t>(g)]);
    j["goals"] = goals;
    j["end_goal"] = dp.end_goal;
    j["object"] = dp.object_label;
    if (dp.room_label) j["room"] = *dp.room_label;
    j["path_len"] = dp.path_len;
    out << j.dump() << "\n";
  }
}

std::vector<DataPoint> load_datapoints(const std::string& path,
                                       const std::map<std::string, const EnvironmentGraph*>& envs) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<DataPoint> dps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    DataPoint dp;
    dp.env_id = j.at("env").get<std::string>();
    const auto it = envs.find(dp.env_id);
    if (it == envs.end()) throw std::runtime_error("load_datapoints: unknown env " + dp.env_id);
    const EnvironmentGraph& env = *it->second;
    dp.start.viewpoint = env.viewpoint_index(j.at("start").at("viewpoint").get<std::string>());
    dp.start.heading = j.at("start").at("heading").get<int>();
    dp.start.elevation = j.at("start").at("elevation").get<int>();
    for (const auto& g : j.at("goals")) {
      dp.goal_viewpoints.push_back(env.viewpoint_index(g.get<std::string>()));
    }
    dp.end_goal = j.at("end_goal").get<std::string>();
    dp.object_label = j.at("object").get<std::string>();
    if (j.contains("room")) dp.room_label = j.at("room").get<std::string>();
    dp.path_len = j.at("path_len").get<int>();
    dps.push_back(std::move(dp));
  }
  return dps;
}

}  // namespace vnla
