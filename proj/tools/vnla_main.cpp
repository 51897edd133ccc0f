#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vnla/artifacts.hpp"
#include "vnla/eval.hpp"
#include "vnla/training.hpp"

namespace fs = std::filesystem;
using namespace vnla;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int seed = -1;
  int workers = -1;
  std::string data_dir;
};

RunConfig resolve_config(const GlobalArgs& args) {
  RunConfig cfg = RunConfig::defaults();
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& kv : args.overrides) cfg.apply_override(kv);
  if (args.seed >= 0) cfg.set("run.seed", std::to_string(args.seed));
  if (args.workers >= 0) cfg.set("training.workers", std::to_string(args.workers));
  return cfg;
}

std::string resolve_path(const GlobalArgs& args, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (!args.data_dir.empty()) return (fs::path(args.data_dir) / path).string();
  return path;
}

void require_fresh_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory exists (use --force to overwrite): " + dir);
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_worldgen(const GlobalArgs& args, const std::string& out, bool force) {
  const RunConfig cfg = resolve_config(args);
  const std::string out_dir = resolve_path(args, out);
  require_fresh_dir(out_dir, force);
  write_environments(cfg, out_dir);
  std::cout << "wrote " << cfg.get_int("worldgen.num_envs") << " environments to " << out_dir
            << "\n";
  return kExitOk;
}

int cmd_datagen(const GlobalArgs& args, const std::string& envs_manifest, const std::string& out,
                const std::string& mode_name, bool force) {
  const RunConfig cfg = resolve_config(args);
  const DatasetMode mode = dataset_mode_from_string(mode_name);
  const std::string manifest_path = resolve_path(args, envs_manifest);
  const std::string out_dir = resolve_path(args, out);
  require_fresh_dir(out_dir, force);

  const EnvCollection envs = load_environments(manifest_path);
  std::vector<const EnvironmentGraph*> env_ptrs;
  std::vector<bool> heldout;
  for (const auto& id : envs.train_ids) {
    env_ptrs.push_back(envs.by_id.at(id));
    heldout.push_back(false);
  }
  for (const auto& id : envs.heldout_ids) {
    env_ptrs.push_back(envs.by_id.at(id));
    heldout.push_back(true);
  }
  Rng rng(derive_seed(cfg.seed(), std::string_view("datagen"), hash_str(mode_name)));
  DatagenCounts counts;
  const DatasetSplits splits =
      generate_dataset(env_ptrs, heldout, datagen_params_from_config(cfg, mode), rng, &counts);
  write_dataset(cfg, mode, manifest_path, envs, splits, out_dir);
  std::cout << "wrote dataset (" << mode_name << ") to " << out_dir << ": train "
            << splits.train.size() << ", dev_seen " << splits.dev_seen.size() << ", dev_unseen "
            << splits.dev_unseen.size() << ", test_seen " << splits.test_seen.size()
            << ", test_unseen " << splits.test_unseen.size() << "\n";
  return kExitOk;
}

int cmd_train(const GlobalArgs& args, const std::string& data, const std::string& out,
              const std::string& resume) {
  const RunConfig cfg = resolve_config(args);
  const DatasetOnDisk ds = load_dataset(resolve_path(args, data));
  TrainInputs inputs;
  inputs.cfg = cfg;
  inputs.envs = ds.envs.by_id;
  inputs.train_split = ds.splits.train;
  inputs.dev_split = ds.splits.split(cfg.get_string("training.dev_split"));
  inputs.out_dir = resolve_path(args, out);
  inputs.resume_checkpoint = resolve_path(args, resume);
  const TrainResult result = train(inputs);
  std::cout << "trained " << result.iterations << " iterations; checkpoint at "
            << result.checkpoint_path << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalArgs& args, const std::string& checkpoint, const std::string& data,
             const std::string& split, const std::string& ask, const std::string& advisor,
             const std::string& rules, bool rules_set, const std::string& out, bool traces) {
  nlohmann::json echo;
  const AgentModel model = AgentModel::load_checkpoint(resolve_path(args, checkpoint), &echo);

  // Start from the training-time config, then apply this invocation's
  // config file, overrides and flags.
  RunConfig cfg = RunConfig::from_echo(echo);
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& kv : args.overrides) cfg.apply_override(kv);
  if (args.seed >= 0) cfg.set("run.seed", std::to_string(args.seed));
  if (args.workers >= 0) cfg.set("training.workers", std::to_string(args.workers));
  if (!ask.empty()) cfg.set("training.ask", ask);
  if (!advisor.empty()) cfg.set("training.advisor", advisor);
  if (rules_set) cfg.set("ask_teacher.rules", rules);

  const DatasetOnDisk ds = load_dataset(resolve_path(args, data));
  const auto& dps = ds.splits.split(split);
  const EvalBudgetStats stats = EvalBudgetStats::build(ds.splits.train, ds.envs.by_id);
  const EvalParams params = EvalParams::from_config(cfg);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.get_int("eval.num_seeds"); ++i) {
    seeds.push_back(derive_seed(cfg.seed(), std::string_view("eval-seed"),
                                static_cast<std::uint64_t>(i)));
  }

  std::vector<EpisodeOutcome> outcomes;
  const MetricsReport report = evaluate(model, split, dps, ds.envs.by_id, stats, params, seeds,
                                        traces ? &outcomes : nullptr);

  const std::string out_dir = resolve_path(args, out);
  fs::create_directories(out_dir);
  auto j = report.to_json();
  j["config"] = cfg.echo();
  j["ask"] = cfg.get_string("training.ask");
  j["advisor"] = cfg.get_string("training.advisor");
  write_text(out_dir + "/report_" + split + ".json", j.dump(2) + "\n");
  write_text(out_dir + "/report_" + split + ".txt", report.to_text());
  if (traces) save_outcomes(outcomes, out_dir + "/traces_" + split + ".jsonl");
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_analyze(const GlobalArgs& args, const std::string& traces_dir, const std::string& out) {
  const RunConfig cfg = resolve_config(args);
  const std::string dir = resolve_path(args, traces_dir);
  std::vector<std::string> files;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<EpisodeOutcome> outcomes;
  for (const auto& file : files) {
    const auto loaded = load_outcomes(file);
    outcomes.insert(outcomes.end(), loaded.begin(), loaded.end());
  }

  const std::string out_dir = resolve_path(args, out);
  fs::create_directories(out_dir);

  const auto bins = analyze_requests(outcomes);
  std::ostringstream csv;
  csv << "bin_start,fraction\n";
  for (std::size_t i = 0; i < bins.size(); ++i) {
    csv << static_cast<double>(i) / 10.0 << "," << bins[i] << "\n";
  }
  write_text(out_dir + "/request_histogram.csv", csv.str());

  const LabelTables tables =
      analyze_by_label(outcomes, cfg.get_int("eval.label_threshold"));
  nlohmann::ordered_json j;
  j["schema"] = "vnla-analysis/1";
  j["config"] = cfg.echo();
  j["episodes"] = outcomes.size();
  auto rows_json = [](const std::vector<LabelRow>& rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      arr.push_back({{"label", r.label},
                     {"successes", r.successes},
                     {"total", r.total},
                     {"success_rate", r.rate}});
    }
    return arr;
  };
  j["objects"] = rows_json(tables.objects);
  j["rooms"] = rows_json(tables.rooms);
  write_text(out_dir + "/labels.json", j.dump(2) + "\n");

  std::ostringstream text;
  auto print_rows = [&](const char* title, const std::vector<LabelRow>& rows) {
    text << title << "\n";
    for (const auto& r : rows) {
      text << "  " << r.label << ": " << r.successes << "/" << r.total << "\n";
    }
  };
  print_rows("objects", tables.objects);
  print_rows("rooms", tables.rooms);
  write_text(out_dir + "/labels.txt", text.str());
  std::cout << "analyzed " << outcomes.size() << " episodes from " << files.size() << " files\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-world navigation with language-based assistance"};
  app.require_subcommand(1);

  GlobalArgs args;
  const char* env_dir = std::getenv("VNLA_DATA_DIR");
  if (env_dir != nullptr) args.data_dir = env_dir;
  app.add_option("--config", args.config_path, "config file (ini)");
  app.add_option("--set", args.overrides, "override, section.key=value")->take_all();
  app.add_option("--seed", args.seed, "run seed");
  app.add_option("--workers", args.workers, "parallel episode workers");
  app.add_option("--data-dir", args.data_dir, "root for relative paths (VNLA_DATA_DIR)");

  auto* worldgen = app.add_subcommand("worldgen", "generate environments");
  std::string wg_out = "envs";
  bool wg_force = false;
  worldgen->add_option("--out", wg_out, "output directory");
  worldgen->add_flag("--force", wg_force, "overwrite existing output");

  auto* datagen = app.add_subcommand("datagen", "generate a dataset");
  std::string dg_envs = "envs/manifest.json", dg_out = "data", dg_mode = "asknav";
  bool dg_force = false;
  datagen->add_option("--envs", dg_envs, "environment manifest");
  datagen->add_option("--out", dg_out, "output directory");
  datagen->add_option("--mode", dg_mode, "asknav|noroom");
  datagen->add_flag("--force", dg_force, "overwrite existing output");

  auto* train_cmd = app.add_subcommand("train", "train an agent");
  std::string tr_data = "data", tr_out = "run", tr_resume;
  train_cmd->add_option("--data", tr_data, "dataset directory");
  train_cmd->add_option("--out", tr_out, "output directory");
  train_cmd->add_option("--resume", tr_resume, "checkpoint to resume from");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data = "data", ev_split = "test_unseen", ev_ask, ev_advisor, ev_rules;
  std::string ev_out = "reports";
  bool ev_traces = false;
  eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", ev_data, "dataset directory");
  eval_cmd->add_option("--split", ev_split, "split name");
  eval_cmd->add_option("--ask", ev_ask, "none|first|random|teacher|learned");
  eval_cmd->add_option("--advisor", ev_advisor, "indirect|direct_sub|direct_nosub");
  auto* rules_opt = eval_cmd->add_option("--rules", ev_rules, "help-requesting rule subset");
  eval_cmd->add_option("--out", ev_out, "report directory");
  eval_cmd->add_flag("--traces", ev_traces, "write per-episode traces");

  auto* analyze = app.add_subcommand("analyze", "analyze trace files");
  std::string an_traces = "reports", an_out = "analysis";
  analyze->add_option("--traces", an_traces, "directory of trace .jsonl files");
  analyze->add_option("--out", an_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*worldgen) return cmd_worldgen(args, wg_out, wg_force);
    if (*datagen) return cmd_datagen(args, dg_envs, dg_out, dg_mode, dg_force);
    if (*train_cmd) return cmd_train(args, tr_data, tr_out, tr_resume);
    if (*eval_cmd) {
      return cmd_eval(args, ev_ckpt, ev_data, ev_split, ev_ask, ev_advisor, ev_rules,
                      rules_opt->count() > 0, ev_out, ev_traces);
    }
    if (*analyze) return cmd_analyze(args, an_traces, an_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const EnvError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const GenerationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
