#include "vnla/artifacts.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace vnla {

const EnvironmentGraph& EnvCollection::at(const std::string& id) const {
  const auto it = by_id.find(id);
  if (it == by_id.end()) throw EnvError("unknown environment id: " + id);
  return *it->second;
}

WorldgenParams worldgen_params_from_config(const RunConfig& cfg) {
  WorldgenParams p;
  p.rooms_min = cfg.get_int("worldgen.rooms_min");
  p.rooms_max = cfg.get_int("worldgen.rooms_max");
  p.viewpoints_per_room_min = cfg.get_int("worldgen.viewpoints_per_room_min");
  p.viewpoints_per_room_max = cfg.get_int("worldgen.viewpoints_per_room_max");
  p.objects_per_room_min = cfg.get_int("worldgen.objects_per_room_min");
  p.objects_per_room_max = cfg.get_int("worldgen.objects_per_room_max");
  p.room_size_min = cfg.get_double("worldgen.room_size_min");
  p.room_size_max = cfg.get_double("worldgen.room_size_max");
  p.hallway_width = cfg.get_double("worldgen.hallway_width");
  return p;
}

DatagenParams datagen_params_from_config(const RunConfig& cfg, DatasetMode mode) {
  DatagenParams p;
  p.mode = mode;
  p.eval_split_target = cfg.get_int("worldgen.eval_split_target");
  p.bucket_sample_asknav = cfg.get_int("worldgen.bucket_sample_asknav");
  p.bucket_sample_noroom = cfg.get_int("worldgen.bucket_sample_noroom");
  p.max_starts_per_room = cfg.get_int("worldgen.max_starts_per_room");
  p.max_starts_per_object = cfg.get_int("worldgen.max_starts_per_object");
  p.path_min = cfg.get_int("worldgen.path_min");
  p.path_max = cfg.get_int("worldgen.path_max");
  return p;
}

namespace {

std::string env_file_name(int index) {
  std::string n = std::to_string(index);
  while (n.size() < 3) n.insert(n.begin(), '0');
  return "env-" + n + ".json";
}

}  // namespace

void write_environments(const RunConfig& cfg, const std::string& out_dir) {
  const int num_envs = cfg.get_int("worldgen.num_envs");
  const int heldout = cfg.get_int("worldgen.heldout_envs");
  if (num_envs < 1 || heldout < 0 || heldout >= num_envs) {
    throw GenerationError("worldgen: need num_envs >= 1 and 0 <= heldout_envs < num_envs");
  }
  const WorldgenParams params = worldgen_params_from_config(cfg);
  fs::create_directories(out_dir);

  nlohmann::ordered_json manifest;
  manifest["schema"] = "vnla-envs/1";
  manifest["seed"] = cfg.seed();
  manifest["config"] = cfg.echo();
  auto train = nlohmann::ordered_json::array();
  auto held = nlohmann::ordered_json::array();
  for (int i = 0; i < num_envs; ++i) {
    const std::string id = "env-" + std::to_string(i);
    const EnvironmentGraph env = generate_environment(cfg.seed(), id, params);
    const std::string file = env_file_name(i);
    save_environment(env, out_dir + "/" + file);
    (i >= num_envs - heldout ? held : train).push_back(file);
  }
  manifest["train"] = train;
  manifest["heldout"] = held;
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

EnvCollection load_environments(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open environment manifest: " + manifest_path);
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.value("schema", "") != "vnla-envs/1") {
    throw DataError("bad environment manifest schema: " + manifest_path);
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  EnvCollection envs;
  auto load_group = [&](const char* key, std::vector<std::string>& ids) {
    for (const auto& file : manifest.at(key)) {
      auto env = std::make_unique<EnvironmentGraph>(
          load_environment((base / file.get<std::string>()).string()));
      ids.push_back(env->id);
      envs.by_id[env->id] = env.get();
      envs.storage.push_back(std::move(env));
    }
  };
  load_group("train", envs.train_ids);
  load_group("heldout", envs.heldout_ids);
  return envs;
}

void write_dataset(const RunConfig& cfg, DatasetMode mode, const std::string& envs_manifest,
                   const EnvCollection& envs, const DatasetSplits& splits,
                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  const StatsReport stats = dataset_stats(splits, envs.by_id);

  nlohmann::ordered_json manifest;
  manifest["schema"] = "vnla-data/1";
  manifest["seed"] = cfg.seed();
  manifest["config"] = cfg.echo();
  manifest["mode"] = to_string(mode);
  manifest["envs_manifest"] = envs_manifest;
  auto split_json = nlohmann::ordered_json::object();
  for (const auto& name : DatasetSplits::split_names()) {
    const auto& dps = splits.split(name);
    const std::string file = name + ".jsonl";
    save_datapoints(dps, envs.by_id, out_dir + "/" + file);
    split_json[name] = {{"path", file}, {"count", dps.size()}};
  }
  manifest["splits"] = split_json;

  nlohmann::ordered_json stats_json;
  stats_json["total"] = stats.total;
  stats_json["split_sizes"] = stats.split_sizes;
  stats_json["objects"] = stats.object_counts;
  stats_json["start_rooms"] = stats.start_room_counts;
  stats_json["goal_rooms"] = stats.goal_room_counts;
  auto hist = nlohmann::ordered_json::object();
  for (const auto& [len, count] : stats.path_length_hist) hist[std::to_string(len)] = count;
  stats_json["path_lengths"] = hist;
  manifest["stats"] = stats_json;

  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

DatasetOnDisk load_dataset(const std::string& data_dir) {
  const std::string manifest_path = data_dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open dataset manifest: " + manifest_path);
  DatasetOnDisk ds;
  in >> ds.manifest;
  if (ds.manifest.value("schema", "") != "vnla-data/1") {
    throw DataError("bad dataset manifest schema: " + manifest_path);
  }
  ds.mode = ds.manifest.at("mode").get<std::string>();
  std::string envs_manifest = ds.manifest.at("envs_manifest").get<std::string>();
  if (!fs::path(envs_manifest).is_absolute() && !fs::exists(envs_manifest)) {
    const fs::path local = fs::path(data_dir) / envs_manifest;
    if (fs::exists(local)) envs_manifest = local.string();
  }
  ds.envs = load_environments(envs_manifest);

  const auto& split_json = ds.manifest.at("splits");
  auto load_split = [&](const std::string& name) {
    const std::string file = split_json.at(name).at("path").get<std::string>();
    return load_datapoints(data_dir + "/" + file, ds.envs.by_id);
  };
  ds.splits.train = load_split("train");
  ds.splits.dev_seen = load_split("dev_seen");
  ds.splits.dev_unseen = load_split("dev_unseen");
  ds.splits.test_seen = load_split("test_seen");
  ds.splits.test_unseen = load_split("test_unseen");
  return ds;
}

}  // namespace vnla
