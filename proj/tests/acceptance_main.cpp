// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 9 and 10 train real agents on a generated corpus and
// assert the directional results; expect a multi-minute runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "policy_fixtures.hpp"
#include "test_util.hpp"
#include "vnla/artifacts.hpp"
#include "vnla/eval.hpp"
#include "vnla/training.hpp"

namespace fs = std::filesystem;
using namespace vnla;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail = "") {
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------- criterion 1
void criterion_oracle_equivalence() {
  const auto start = Clock::now();
  Rng rng(60001);
  bool exact = true;
  std::string detail;
  for (int trial = 0; trial < 200 && exact; ++trial) {
    EnvironmentGraph env = testutil::random_geometric_env(rng, 4 + rng.uniform_int(47));
    std::vector<int> goals{rng.uniform_int(env.num_viewpoints())};
    if (trial % 3 == 0) goals.push_back(rng.uniform_int(env.num_viewpoints()));
    std::sort(goals.begin(), goals.end());
    goals.erase(std::unique(goals.begin(), goals.end()), goals.end());
    const auto oracle = testutil::bellman_ford_distances(env, goals);
    const GoalField field = compute_goal_field(env, goals);
    for (int v = 0; v < env.num_viewpoints() && exact; ++v) {
      const double got = field.dist[static_cast<std::size_t>(v)];
      const double want = oracle[static_cast<std::size_t>(v)];
      if (std::isfinite(want) != std::isfinite(got) || (std::isfinite(want) && got != want)) {
        exact = false;
        detail = "distance mismatch in trial " + std::to_string(trial);
      }
      if (!std::isfinite(want)) continue;
      // shortest_path must realize exactly the oracle cost. Fold the edge
      // lengths goal-rooted, the association order both algorithms use.
      const auto path = shortest_path(env, v, field);
      double cost = 0;
      for (std::size_t i = path.size(); i-- > 1;) {
        cost = dist3(env.positions[static_cast<std::size_t>(path[i - 1])],
                     env.positions[static_cast<std::size_t>(path[i])]) +
               cost;
      }
      if (cost != want) {
        exact = false;
        detail = "path cost mismatch in trial " + std::to_string(trial);
      }
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) {
    exact = false;
    detail = "took " + std::to_string(elapsed) + " s";
  }
  std::ostringstream what;
  what << "shortest paths match the brute-force oracle exactly on 200 graphs ("
       << std::fixed << std::setprecision(2) << elapsed << " s)";
  report(1, exact, what.str(), detail);
}

// ---------------------------------------------------------------- criterion 2
void criterion_teacher_optimality() {
  Rng rng(60002);
  const WorldgenParams wparams;
  DatagenParams dparams;
  dparams.eval_split_target = 0;
  bool ok = true;
  std::string detail;
  int checked = 0;
  for (int w = 0; w < 100 && ok; ++w) {
    const EnvironmentGraph env =
        generate_environment(70000 + w, "acc2-" + std::to_string(w), wparams);
    const std::vector<const EnvironmentGraph*> envs{&env};
    Rng gen_rng(derive_seed(60002, static_cast<std::uint64_t>(w)));
    const DatasetSplits splits = generate_dataset(envs, {false}, dparams, gen_rng);
    int used = 0;
    for (const auto& dp : splits.train) {
      if (used >= 10) break;
      ++used;
      ++checked;
      const GoalField field = compute_goal_field(env, dp.goal_viewpoints);
      Pose pose = dp.start;
      double dist = field.dist[static_cast<std::size_t>(pose.viewpoint)];
      int actions = 0;
      bool stopped = false;
      while (actions < dp.path_len) {
        const NavAction a = nav_teacher(env, pose, field);
        ++actions;
        if (a == NavAction::stop) {
          stopped = true;
          break;
        }
        pose = transition(env, pose, a, field);
        const double now = field.dist[static_cast<std::size_t>(pose.viewpoint)];
        if (now > dist) {
          ok = false;
          detail = "distance increased in world " + std::to_string(w);
          break;
        }
        dist = now;
      }
      if (ok && (!stopped || dist != 0.0)) {
        ok = false;
        detail = "rollout missed the goal in world " + std::to_string(w);
      }
    }
  }
  report(2, ok && checked >= 500,
         "teacher rollouts stop at a goal within the recorded path length (" +
             std::to_string(checked) + " datapoints)",
         detail);
}

// ---------------------------------------------------------------- criterion 3
void criterion_grammar_round_trip() {
  int failures = 0;
  const int k = 4;
  int total = 1;
  for (int i = 0; i < k; ++i) total *= kNavActionCount;
  for (int code = 0; code < total; ++code) {
    std::vector<NavAction> actions;
    int rest = code;
    for (int i = 0; i < k; ++i) {
      actions.push_back(static_cast<NavAction>(rest % kNavActionCount));
      rest /= kNavActionCount;
    }
    try {
      if (parse_subgoal(render_subgoal(actions)) != actions) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  report(3, failures == 0,
         "parse(render(s)) = s for all " + std::to_string(total) + " four-action subgoals",
         failures == 0 ? "" : std::to_string(failures) + " failures");
}

// ---------------------------------------------------------------- criterion 4
void criterion_budget_law() {
  Rng rng(60004);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 20 && ok; ++trial) {
    const int t_hat = 5 + rng.uniform_int(21);
    const int k = 1 + rng.uniform_int(10);
    const double tau = rng.uniform();
    double mean = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      mean += static_cast<double>(sample_help_budget(t_hat, tau, k, rng)) * k / t_hat;
    }
    mean /= draws;
    if (std::abs(mean - tau) > 0.01) {
      ok = false;
      std::ostringstream d;
      d << "tau " << tau << " estimated " << mean << " (T=" << t_hat << ", k=" << k << ")";
      detail = d.str();
    }
  }
  for (int i = 0; i < 1000 && ok; ++i) {
    if (sample_help_budget(20, 0.4, 4, rng) != 2) {
      ok = false;
      detail = "T=20, tau=0.4, k=4 must give exactly 2";
    }
  }
  report(4, ok, "E[Bk/T] = tau within 0.01 over 20 random budget setups; worked case exact",
         detail);
}

// ---------------------------------------------------------------- criterion 5
void criterion_time_budget_formula() {
  EnvironmentGraph env = testutil::line_env({2.0, 2.0});
  DataPoint dp;
  dp.env_id = env.id;
  dp.start = {0, 0, 0};
  dp.goal_viewpoints = {2};
  dp.object_label = "cup";
  dp.room_label = "room";
  EvalBudgetStats stats;
  stats.samples[{"room", "room"}] = {10, 12, 14};
  const int with_samples = time_budget_eval(dp, env, stats, 25);
  EvalBudgetStats empty;
  const int without = time_budget_eval(dp, env, empty, 25);
  const bool ok = with_samples == 14 && without == 25;
  report(5, ok, "upper-confidence time budget: {10,12,14} -> 14, empty -> 25",
         ok ? "" : "got " + std::to_string(with_samples) + " / " + std::to_string(without));
}

// ---------------------------------------------------------------- criterion 6
void criterion_gradients() {
  const auto start = Clock::now();
  AgentModel model = fixtures::tiny_model(60006, /*hidden=*/8);
  const auto nav = fixtures::check_blocks(
      model, [&](ad::GradBuffer* g) { return fixtures::nav_loss_forward(model, g); },
      fixtures::nav_block_ids(model));
  const auto ask = fixtures::check_blocks(
      model, [&](ad::GradBuffer* g) { return fixtures::ask_loss_forward(model, g); },
      fixtures::ask_block_ids(model));
  const double elapsed = seconds_since(start);
  bool ok = nav.failed == 0 && ask.failed == 0 && elapsed < 60.0;
  std::ostringstream what;
  what << "finite differences confirm " << nav.checked + ask.checked
       << " parameters across every block (" << std::fixed << std::setprecision(2) << elapsed
       << " s)";
  std::ostringstream detail;
  if (nav.failed + ask.failed > 0) {
    detail << nav.failed + ask.failed << " parameters off, worst rel err "
           << std::max(nav.worst_rel, ask.worst_rel) << " in "
           << (nav.worst_rel > ask.worst_rel ? nav.worst_block : ask.worst_block);
  } else if (elapsed >= 60.0) {
    detail << "took " << elapsed << " s";
  }
  report(6, ok, what.str(), detail.str());
}

// A corpus shared by criteria 7, 9, 10, 11.
struct Corpus {
  fs::path dir;
  RunConfig cfg;
  EnvCollection envs;
  DatasetSplits splits;
};

Corpus build_corpus(const fs::path& work) {
  Corpus corpus;
  corpus.dir = work;
  RunConfig cfg = RunConfig::defaults();
  cfg.set("run.seed", "60000");
  cfg.set("worldgen.num_envs", "24");
  cfg.set("worldgen.heldout_envs", "4");
  cfg.set("worldgen.eval_split_target", "200");
  // Desk-scale training setup for the directional experiments: small enough
  // to train six agents on one core, large enough to learn the grammar.
  cfg.set("policy.hidden_size", "48");
  cfg.set("policy.ask_hidden", "48");
  cfg.set("policy.word_emb", "24");
  cfg.set("env.feature_dim", "32");
  cfg.set("training.batch_size", "64");
  cfg.set("training.lr", "0.002");
  cfg.set("training.iterations", "1600");
  cfg.set("training.workers", "4");
  corpus.cfg = cfg;

  const fs::path env_dir = work / "envs";
  write_environments(cfg, env_dir.string());
  corpus.envs = load_environments((env_dir / "manifest.json").string());

  std::vector<const EnvironmentGraph*> ptrs;
  std::vector<bool> heldout;
  for (const auto& id : corpus.envs.train_ids) {
    ptrs.push_back(corpus.envs.by_id.at(id));
    heldout.push_back(false);
  }
  for (const auto& id : corpus.envs.heldout_ids) {
    ptrs.push_back(corpus.envs.by_id.at(id));
    heldout.push_back(true);
  }
  Rng rng(derive_seed(cfg.seed(), std::string_view("datagen"), std::string_view("asknav")));
  corpus.splits = generate_dataset(ptrs, heldout, datagen_params_from_config(cfg, DatasetMode::asknav), rng);
  write_dataset(cfg, DatasetMode::asknav, (env_dir / "manifest.json").string(), corpus.envs,
                corpus.splits, (work / "data").string());
  return corpus;
}

// ---------------------------------------------------------------- criterion 7
void criterion_bcui(const Corpus& corpus) {
  RunConfig cfg = corpus.cfg;
  cfg.set("training.iterations", "5");
  cfg.set("training.batch_size", "100");
  cfg.set("training.dev_eval_every", "0");

  std::vector<EpisodeSpec> specs;
  Rng pick(60007);
  for (int i = 0; i < 500; ++i) {
    const auto& dp = corpus.splits.train[static_cast<std::size_t>(
        pick.uniform_int(static_cast<int>(corpus.splits.train.size())))];
    EpisodeSpec spec;
    spec.dp = &dp;
    spec.env = corpus.envs.by_id.at(dp.env_id);
    spec.time_budget = time_budget_train(dp, *spec.env);
    spec.feature_seed = env_feature_seed(cfg, dp.env_id);
    specs.push_back(spec);
  }

  std::vector<std::string> texts;
  for (const auto& dp : corpus.splits.train) texts.push_back(dp.end_goal);
  Vocabulary vocab = Vocabulary::build(texts, 10);
  const int vocab_size = vocab.size();
  AgentModel model(ModelConfig::from_config(cfg, vocab_size), std::move(vocab));
  Rng init(derive_seed(cfg.seed(), std::string_view("init")));
  model.init_params(init);

  const EpisodeParams params = EpisodeParams::from_config(cfg, /*train=*/true);
  std::vector<EpisodeTrace> traces;
  rollout_batch_parallel(model, specs, params, cfg.seed(), 1, 8, 4, &traces);

  long bcui_violations = 0, budget_overruns = 0, grants = 0;
  for (const auto& trace : traces) {
    if (static_cast<int>(trace.request_steps.size()) > trace.b_hat) ++budget_overruns;
    grants += static_cast<long>(trace.request_steps.size());
    for (int rt : trace.request_steps) {
      for (int s = rt; s < rt + 4 && s <= static_cast<int>(trace.steps.size()); ++s) {
        const auto& step = trace.steps[static_cast<std::size_t>(s - 1)];
        if (!step.teacher_acted || step.nav_executed != step.nav_teacher_label) ++bcui_violations;
      }
    }
  }
  const bool ok = bcui_violations == 0 && budget_overruns == 0 && grants > 0;
  std::ostringstream what;
  what << "500 instrumented training episodes: 0 BCUI violations, 0 budget overruns ("
       << grants << " granted requests)";
  std::ostringstream detail;
  if (!ok) detail << bcui_violations << " violations, " << budget_overruns << " overruns";
  report(7, ok, what.str(), detail.str());
}

// ---------------------------------------------------------------- criterion 8
void criterion_rule_ablation() {
  using testutil::line_env;
  using testutil::make_env;
  AskTeacherConfig cfg;
  bool ok = true;
  std::string detail;

  auto expect = [&](const TeacherContext& ctx, const std::set<char>& want, const char* name) {
    const auto fired = ask_rules_fired(ctx, cfg);
    if (fired != want) {
      ok = false;
      detail = std::string("fixture '") + name + "' fired {";
      for (char c : fired) detail += c;
      detail += "}";
    }
  };

  EnvironmentGraph line = line_env({2.0, 2.0});
  const std::vector<int> far_goal{2};
  const GoalField line_field = compute_goal_field(line, far_goal);
  const std::vector<int> line_path{0, 1, 2};

  TeacherContext base;
  base.env = &line;
  base.field = &line_field;
  base.goals = &far_goal;
  base.original_path = &line_path;
  base.pose = {0, 0, 0};
  base.t = 2;
  base.time_budget = 20;
  base.help_budget = 1;
  base.stay_counter = 1;
  base.tentative = {1, 0, 0, 0, 0, 0};

  // (a): far off the recorded path, everything else calm.
  {
    EnvironmentGraph env = make_env({{0, 0, 0}, {0, 3, 0}, {9, 0, 0}, {9, 3.2, 0}, {4.5, 0, 0}},
                                    {{0, 1}, {2, 3}, {0, 4}, {4, 2}});
    const std::vector<int> goals{1};
    const GoalField field = compute_goal_field(env, goals);
    const std::vector<int> path{0, 1};
    TeacherContext ctx = base;
    ctx.env = &env;
    ctx.field = &field;
    ctx.goals = &goals;
    ctx.original_path = &path;
    ctx.pose = {2, 0, 0};
    expect(ctx, {'a'}, "a");
  }
  // (b): flat tentative distribution.
  {
    TeacherContext ctx = base;
    ctx.tentative = {1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    expect(ctx, {'b'}, "b");
  }
  // (c): parked for mu steps.
  {
    TeacherContext ctx = base;
    ctx.stay_counter = 9;
    expect(ctx, {'c'}, "c");
  }
  // (d): budget covers the remaining steps.
  {
    TeacherContext ctx = base;
    ctx.t = 19;
    expect(ctx, {'d'}, "d");
  }
  // (e): at a goal while the tentative argmax is forward.
  {
    const std::vector<int> goals{1};
    const GoalField field = compute_goal_field(line, goals);
    const std::vector<int> path{0, 1};
    TeacherContext ctx = base;
    ctx.field = &field;
    ctx.goals = &goals;
    ctx.original_path = &path;
    ctx.pose = {1, 0, 0};
    ctx.tentative = {0, 0, 0, 0, 1, 0};
    expect(ctx, {'e'}, "e");
  }
  // Empty rule set: never requests across a spread of contexts.
  {
    AskTeacherConfig none = cfg;
    none.rules.clear();
    Rng rng(60008);
    for (int i = 0; i < 200 && ok; ++i) {
      TeacherContext ctx = base;
      ctx.t = 1 + rng.uniform_int(20);
      ctx.help_budget = rng.uniform_int(5);
      ctx.stay_counter = 1 + rng.uniform_int(15);
      for (auto& p : ctx.tentative) p = rng.uniform();
      double total = 0;
      for (double p : ctx.tentative) total += p;
      for (auto& p : ctx.tentative) p /= total;
      if (ask_teacher(ctx, none) != AskAction::do_nothing) {
        ok = false;
        detail = "empty rule set requested";
      }
    }
  }
  report(8, ok, "rules (a)-(e) each fire alone in their fixture; empty rule set never fires",
         detail);
}

// ------------------------------------------------------------ criteria 9 + 10
struct TrainedAgent {
  std::string checkpoint;
  double unseen_success = 0;
};

TrainedAgent train_and_eval(const Corpus& corpus, const std::string& name, const std::string& ask,
                            const std::string& advisor, int iterations) {
  RunConfig cfg = corpus.cfg;
  cfg.set("training.ask", ask);
  cfg.set("training.advisor", advisor);
  cfg.set("training.iterations", std::to_string(iterations));
  cfg.set("training.dev_eval_every", "0");

  TrainInputs inputs;
  inputs.cfg = cfg;
  inputs.envs = corpus.envs.by_id;
  inputs.train_split = corpus.splits.train;
  inputs.out_dir = (corpus.dir / name).string();
  inputs.quiet = true;
  const auto t0 = Clock::now();
  const TrainResult trained = train(inputs);
  TrainedAgent agent;
  agent.checkpoint = trained.checkpoint_path;

  const AgentModel model = AgentModel::load_checkpoint(trained.checkpoint_path, nullptr);
  const EvalBudgetStats stats = EvalBudgetStats::build(corpus.splits.train, corpus.envs.by_id);
  EvalParams eparams = EvalParams::from_config(cfg);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 5; ++i) {
    seeds.push_back(derive_seed(cfg.seed(), std::string_view("eval-seed"),
                                static_cast<std::uint64_t>(i)));
  }
  const MetricsReport report = evaluate(model, "test_unseen", corpus.splits.test_unseen,
                                        corpus.envs.by_id, stats, eparams, seeds, nullptr);
  agent.unseen_success = report.success_rate.mean;
  std::printf("  agent %-14s ask=%-7s advisor=%-12s unseen success %5.1f%%  (%.0f s)\n",
              name.c_str(), ask.c_str(), advisor.c_str(), 100.0 * agent.unseen_success,
              seconds_since(t0));
  std::fflush(stdout);
  return agent;
}

void criteria_end_to_end(const Corpus& corpus) {
  const int iterations = corpus.cfg.get_int("training.iterations");
  const auto none = train_and_eval(corpus, "agent_none", "none", "indirect", iterations);
  const auto random = train_and_eval(corpus, "agent_random", "random", "indirect", iterations);
  const auto teacher = train_and_eval(corpus, "agent_teacher", "teacher", "indirect", iterations);
  const auto learned = train_and_eval(corpus, "agent_learned", "learned", "indirect", iterations);

  const double gap_learned = 100.0 * (learned.unseen_success - none.unseen_success);
  const double gap_teacher = 100.0 * std::abs(teacher.unseen_success - learned.unseen_success);
  const bool ordering = gap_learned >= 10.0 && random.unseen_success > none.unseen_success &&
                        gap_teacher <= 5.0;
  std::ostringstream what9;
  what9 << "unseen success ordering holds: learned-none " << std::fixed << std::setprecision(1)
        << gap_learned << " pts (>=10), random " << 100 * random.unseen_success << "% > none "
        << 100 * none.unseen_success << "%, |teacher-learned| " << gap_teacher << " pts (<=5)";
  report(9, ordering, what9.str());

  const auto direct_nosub =
      train_and_eval(corpus, "agent_direct_nosub", "learned", "direct_nosub", iterations);
  const auto direct_sub =
      train_and_eval(corpus, "agent_direct_sub", "learned", "direct_sub", iterations);
  const double margin = 100.0 * (direct_sub.unseen_success - direct_nosub.unseen_success);
  std::ostringstream what10;
  what10 << "subgoal-receiving direct agent within tolerance: margin " << std::fixed
         << std::setprecision(1) << margin << " pts (>= -2 required)";
  report(10, margin >= -2.0, what10.str());
}

// --------------------------------------------------------------- criterion 11
void criterion_determinism(const Corpus& corpus) {
  bool ok = true;
  std::string detail;

  // Datasets: regenerate from the same seed and compare all split bytes.
  {
    RunConfig cfg = corpus.cfg;
    std::vector<const EnvironmentGraph*> ptrs;
    std::vector<bool> heldout;
    for (const auto& id : corpus.envs.train_ids) {
      ptrs.push_back(corpus.envs.by_id.at(id));
      heldout.push_back(false);
    }
    for (const auto& id : corpus.envs.heldout_ids) {
      ptrs.push_back(corpus.envs.by_id.at(id));
      heldout.push_back(true);
    }
    Rng rng(derive_seed(cfg.seed(), std::string_view("datagen"), std::string_view("asknav")));
    const DatasetSplits again =
        generate_dataset(ptrs, heldout, datagen_params_from_config(cfg, DatasetMode::asknav), rng);
    write_dataset(cfg, DatasetMode::asknav, "envs/manifest.json", corpus.envs, again,
                  (corpus.dir / "data_again").string());
    for (const auto& name : DatasetSplits::split_names()) {
      if (read_file(corpus.dir / "data" / (name + ".jsonl")) !=
          read_file(corpus.dir / "data_again" / (name + ".jsonl"))) {
        ok = false;
        detail = "dataset bytes differ: " + name;
      }
    }
  }

  // Checkpoints: a short training run with 1 worker vs 4 workers.
  RunConfig cfg = corpus.cfg;
  cfg.set("training.iterations", "5");
  cfg.set("training.batch_size", "40");
  cfg.set("training.dev_eval_every", "0");
  TrainInputs inputs;
  inputs.cfg = cfg;
  inputs.envs = corpus.envs.by_id;
  inputs.train_split = corpus.splits.train;
  inputs.quiet = true;

  inputs.cfg.set("training.workers", "1");
  inputs.out_dir = (corpus.dir / "det_w1").string();
  train(inputs);
  inputs.cfg.set("training.workers", "4");
  inputs.out_dir = (corpus.dir / "det_w4").string();
  train(inputs);
  if (read_file(corpus.dir / "det_w1" / "checkpoint.bin") !=
      read_file(corpus.dir / "det_w4" / "checkpoint.bin")) {
    ok = false;
    detail = "checkpoints differ across worker counts";
  }

  // Reports: the same checkpoint evaluated with 1 and 4 workers.
  const AgentModel model =
      AgentModel::load_checkpoint((corpus.dir / "det_w1" / "checkpoint.bin").string(), nullptr);
  const EvalBudgetStats stats = EvalBudgetStats::build(corpus.splits.train, corpus.envs.by_id);
  EvalParams eparams = EvalParams::from_config(cfg);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  eparams.workers = 1;
  const auto report_w1 = evaluate(model, "dev_unseen", corpus.splits.dev_unseen,
                                  corpus.envs.by_id, stats, eparams, seeds, nullptr);
  eparams.workers = 4;
  const auto report_w4 = evaluate(model, "dev_unseen", corpus.splits.dev_unseen,
                                  corpus.envs.by_id, stats, eparams, seeds, nullptr);
  if (report_w1.to_json().dump() != report_w4.to_json().dump()) {
    ok = false;
    detail = "evaluation reports differ across worker counts";
  }

  report(11, ok, "datasets, checkpoints, and reports are byte-identical (workers 1 vs 4)", detail);
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "vnla_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion_oracle_equivalence();
  criterion_teacher_optimality();
  criterion_grammar_round_trip();
  criterion_budget_law();
  criterion_time_budget_formula();
  criterion_gradients();

  std::printf("building the shared corpus (24 environments, asknav dataset)...\n");
  std::fflush(stdout);
  const Corpus corpus = build_corpus(work);
  std::printf("  train %zu, dev_seen %zu, dev_unseen %zu, test_seen %zu, test_unseen %zu\n",
              corpus.splits.train.size(), corpus.splits.dev_seen.size(),
              corpus.splits.dev_unseen.size(), corpus.splits.test_seen.size(),
              corpus.splits.test_unseen.size());
  std::fflush(stdout);

  criterion_bcui(corpus);
  criterion_rule_ablation();
  criteria_end_to_end(corpus);
  criterion_determinism(corpus);

  std::printf("%s\n", g_failures == 0 ? "all criteria passed" : "SOME CRITERIA FAILED");
  return g_failures == 0 ? 0 : 1;
}
