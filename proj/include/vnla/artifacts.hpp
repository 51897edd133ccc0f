#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vnla/config.hpp"
#include "vnla/worldgen.hpp"

namespace vnla {

// Owned environments plus the id -> graph view used everywhere else.
struct EnvCollection {
  std::vector<std::unique_ptr<EnvironmentGraph>> storage;
  std::map<std::string, const EnvironmentGraph*> by_id;
  std::vector<std::string> train_ids, heldout_ids;

  const EnvironmentGraph& at(const std::string& id) const;
};

// Generates worldgen.num_envs environments, writes one JSON file each plus
// manifest.json (schema "vnla-envs/1", config echo, seed, train/heldout split).
void write_environments(const RunConfig& cfg, const std::string& out_dir);

EnvCollection load_environments(const std::string& manifest_path);

// Writes the five split files, manifest.json (schema "vnla-data/1") and a
// stats report under out_dir.
void write_dataset(const RunConfig& cfg, DatasetMode mode, const std::string& envs_manifest,
                   const EnvCollection& envs, const DatasetSplits& splits,
                   const std::string& out_dir);

struct DatasetOnDisk {
  EnvCollection envs;
  DatasetSplits splits;
  std::string mode;
  nlohmann::json manifest;
};

DatasetOnDisk load_dataset(const std::string& data_dir);

WorldgenParams worldgen_params_from_config(const RunConfig& cfg);
DatagenParams datagen_params_from_config(const RunConfig& cfg, DatasetMode mode);

}  // namespace vnla
