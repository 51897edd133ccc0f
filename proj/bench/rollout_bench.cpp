// Compares the serial reference batch rollout against the OpenMP version and
// checks that both produce identical gradients.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "vnla/artifacts.hpp"
#include "vnla/training.hpp"

using namespace vnla;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool grads_equal(const ad::GradBuffer& a, const ad::GradBuffer& b) {
  for (int i = 0; i < a.count(); ++i) {
    const auto& ga = a.grad(i);
    const auto& gb = b.grad(i);
    for (std::size_t j = 0; j < ga.size(); ++j) {
      if (ga[j] != gb[j]) return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int batch = 64;
  int repeats = 3;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--batch" && i + 1 < argc) batch = std::stoi(argv[++i]);
    if (arg == "--repeats" && i + 1 < argc) repeats = std::stoi(argv[++i]);
  }

  RunConfig cfg = RunConfig::defaults();
  const WorldgenParams wparams = worldgen_params_from_config(cfg);
  std::vector<EnvironmentGraph> envs;
  for (int i = 0; i < 4; ++i) {
    envs.push_back(generate_environment(7, "bench-" + std::to_string(i), wparams));
  }
  std::vector<const EnvironmentGraph*> env_ptrs;
  for (const auto& env : envs) env_ptrs.push_back(&env);

  Rng rng(derive_seed(7, std::string_view("bench-data")));
  DatagenParams dparams = datagen_params_from_config(cfg, DatasetMode::asknav);
  dparams.eval_split_target = 0;
  const DatasetSplits splits = generate_dataset(env_ptrs, std::vector<bool>(envs.size(), false),
                                                dparams, rng);
  std::printf("bench corpus: %zu datapoints over %zu environments\n", splits.train.size(),
              envs.size());

  std::vector<std::string> texts;
  for (const auto& dp : splits.train) texts.push_back(dp.end_goal);
  Vocabulary vocab = Vocabulary::build(texts, 10);
  const int vocab_size = vocab.size();
  AgentModel model(ModelConfig::from_config(cfg, vocab_size), std::move(vocab));
  Rng init(derive_seed(7, std::string_view("bench-init")));
  model.init_params(init);

  std::map<std::string, const EnvironmentGraph*> env_map;
  for (const auto& env : envs) env_map[env.id] = &env;
  std::vector<EpisodeSpec> specs;
  for (int i = 0; i < batch; ++i) {
    const auto& dp = splits.train[static_cast<std::size_t>(i) % splits.train.size()];
    EpisodeSpec spec;
    spec.dp = &dp;
    spec.env = env_map.at(dp.env_id);
    spec.time_budget = time_budget_train(dp, *spec.env);
    spec.feature_seed = env_feature_seed(cfg, dp.env_id);
    specs.push_back(spec);
  }
  const EpisodeParams params = EpisodeParams::from_config(cfg, /*train=*/true);
  const int chunks = cfg.get_int("training.grad_chunks");

  double ref_ms = 0;
  BatchRollout reference;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    reference = rollout_batch_reference(model, specs, params, 7, 1, chunks);
    ref_ms += ms_since(t0);
  }
  ref_ms /= repeats;
  std::printf("%-28s %10.1f ms/batch  (nav loss %.3f)\n", "reference (serial)", ref_ms,
              reference.nav_loss / batch);

  for (int workers : {1, 2, 4, 8}) {
    double par_ms = 0;
    BatchRollout parallel;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      parallel = rollout_batch_parallel(model, specs, params, 7, 1, chunks, workers);
      par_ms += ms_since(t0);
    }
    par_ms /= repeats;
    const bool same = grads_equal(reference.grads, parallel.grads) &&
                      reference.nav_loss == parallel.nav_loss &&
                      reference.ask_loss == parallel.ask_loss;
    std::printf("openmp, %d worker(s)%*s %10.1f ms/batch  speedup %4.2fx  %s\n", workers,
                workers >= 10 ? 8 : 9, "", par_ms, ref_ms / par_ms,
                same ? "bitwise-identical" : "MISMATCH");
    if (!same) return 1;
  }
  return 0;
}
