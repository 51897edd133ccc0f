#include "vnla/training.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vnla/eval.hpp"

namespace vnla {

int teacher_path_length(const EnvironmentGraph& env, Pose pose, const GoalField& field, int cap) {
  int count = 0;
  while (count <= cap) {
    const NavAction a = nav_teacher(env, pose, field);
    ++count;
    if (a == NavAction::stop) return count;
    pose = transition(env, pose, a, field);
  }
  throw DataError("teacher rollout exceeded " + std::to_string(cap) + " actions in " + env.id);
}

int time_budget_train(const DataPoint& dp, const EnvironmentGraph& env) {
  if (dp.goal_viewpoints.empty()) throw DataError("datapoint without goals in " + env.id);
  double total = 0;
  for (int g : dp.goal_viewpoints) {
    const GoalField field = compute_goal_field(env, {g});
    if (!std::isfinite(field.dist[static_cast<std::size_t>(dp.start.viewpoint)])) {
      throw DataError("unreachable goal viewpoint in " + env.id);
    }
    total += teacher_path_length(env, dp.start, field);
  }
  return static_cast<int>(std::round(total / static_cast<double>(dp.goal_viewpoints.size())));
}

EvalBudgetStats EvalBudgetStats::build(const std::vector<DataPoint>& train_split,
                                       const std::map<std::string, const EnvironmentGraph*>& envs) {
  EvalBudgetStats stats;
  for (const auto& dp : train_split) {
    const auto it = envs.find(dp.env_id);
    if (it == envs.end()) throw DataError("stats: unknown environment " + dp.env_id);
    const EnvironmentGraph& env = *it->second;
    const std::string start_room = env.room_label_of(dp.start.viewpoint);
    const std::string goal_key = dp.room_label ? *dp.room_label : dp.object_label;
    stats.samples[{start_room, goal_key}].push_back(dp.path_len);
  }
  return stats;
}

int time_budget_eval(const DataPoint& dp, const EnvironmentGraph& env, const EvalBudgetStats& stats,
                     int l_max) {
  const std::string start_room = env.room_label_of(dp.start.viewpoint);
  const std::string goal_key = dp.room_label ? *dp.room_label : dp.object_label;
  const auto it = stats.samples.find({start_room, goal_key});
  if (it == stats.samples.end() || it->second.size() <= 1) return l_max;
  const auto& s = it->second;
  const double n = static_cast<double>(s.size());
  double mean = 0;
  for (int x : s) mean += x;
  mean /= n;
  double var = 0;
  for (int x : s) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  const double std_err = std::sqrt(var) / std::sqrt(n);
  const double c_upper = mean + 1.95 * std_err;
  return static_cast<int>(std::round(std::min(c_upper, static_cast<double>(l_max))));
}

int sample_help_budget(int time_budget, double tau, int k, Rng& rng) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("sample_help_budget: tau out of [0,1]");
  if (k < 1) throw std::invalid_argument("sample_help_budget: k must be >= 1");
  const double b = static_cast<double>(time_budget) * tau / static_cast<double>(k);
  const double whole = std::floor(b);
  return static_cast<int>(whole) + (rng.bernoulli(b - whole) ? 1 : 0);
}

AskPolicyKind ask_policy_from_string(const std::string& s) {
  if (s == "none") return AskPolicyKind::none;
  if (s == "first") return AskPolicyKind::first;
  if (s == "random") return AskPolicyKind::random;
  if (s == "teacher") return AskPolicyKind::teacher;
  if (s == "learned") return AskPolicyKind::learned;
  throw std::invalid_argument("unknown ask policy: " + s);
}

const char* to_string(AskPolicyKind k) {
  switch (k) {
    case AskPolicyKind::none: return "none";
    case AskPolicyKind::first: return "first";
    case AskPolicyKind::random: return "random";
    case AskPolicyKind::teacher: return "teacher";
    case AskPolicyKind::learned: return "learned";
  }
  return "?";
}

AskAction baseline_ask(AskPolicyKind kind, int t, const BudgetState& budget,
                       const TeacherContext& ctx, const AskTeacherConfig& teacher_cfg,
                       const std::set<int>& random_steps, std::span<const double> learned_dist) {
  switch (kind) {
    case AskPolicyKind::none:
      return AskAction::do_nothing;
    case AskPolicyKind::first:
      return budget.b > 0 ? AskAction::request : AskAction::do_nothing;
    case AskPolicyKind::random:
      return random_steps.count(t) ? AskAction::request : AskAction::do_nothing;
    case AskPolicyKind::teacher:
      return ask_teacher(ctx, teacher_cfg);
    case AskPolicyKind::learned:
      return static_cast<AskAction>(select_action(learned_dist, false));
  }
  return AskAction::do_nothing;
}

EpisodeParams EpisodeParams::from_config(const RunConfig& cfg, bool train) {
  EpisodeParams p;
  p.train = train;
  p.ask = ask_policy_from_string(cfg.get_string("training.ask"));
  p.advisor = advisor_mode_from_string(cfg.get_string("training.advisor"));
  p.k = cfg.get_int("training.k");
  p.tau = cfg.get_double("training.tau");
  p.teacher.rules.clear();
  for (char c : cfg.get_string("ask_teacher.rules")) p.teacher.rules.insert(c);
  p.teacher.delta = cfg.get_double("ask_teacher.delta");
  p.teacher.epsilon = cfg.get_double("ask_teacher.epsilon");
  p.teacher.mu = cfg.get_int("ask_teacher.mu");
  p.teacher.geodesic_deviation = cfg.get_string("ask_teacher.deviation_metric") == "geodesic";
  p.obs.feature_dim = cfg.get_int("env.feature_dim");
  p.obs.fov_degrees = cfg.get_double("env.fov_degrees");
  p.obs.visibility_range = cfg.get_double("env.visibility_range");
  return p;
}

std::uint64_t env_feature_seed(const RunConfig& cfg, const std::string& env_id) {
  return derive_seed(static_cast<std::uint64_t>(cfg.get_int("env.feature_seed")),
                     hash_str(env_id));
}

namespace {

template <std::size_t N>
std::array<double, N> to_array(std::span<const double> v) {
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N && i < v.size(); ++i) out[i] = v[i];
  return out;
}

EpisodeTrace run_episode_impl(const DataPoint& dp, const EnvironmentGraph& env,
                              const AgentModel& model, const EpisodeParams& params,
                              int time_budget, std::uint64_t feature_seed, Rng& rng,
                              ad::GradBuffer* grads, ad::Tape& tape) {
  const GoalField field = compute_goal_field(env, dp.goal_viewpoints);
  const std::vector<int> original_path = shortest_path(env, dp.start.viewpoint, field);

  EpisodeTrace trace;
  trace.time_budget = time_budget;
  trace.b_hat = sample_help_budget(time_budget, params.tau, params.k, rng);
  BudgetState budget{time_budget, trace.b_hat, trace.b_hat};

  std::set<int> random_steps;
  if (params.ask == AskPolicyKind::random) {
    const int picks = std::min(trace.b_hat, time_budget);
    for (int s : rng.sample_without_replacement(time_budget, picks)) random_steps.insert(s + 1);
  }
  std::string goal_text = dp.end_goal;
  auto memory = model.encode_goal(tape, model.vocab().encode_text(goal_text));
  auto coverage = model.make_coverage(tape, memory.size());
  trace.encode_count = 1;

  AgentModel::DecodeState state;
  NavAction prev_nav = NavAction::start;
  AskAction prev_ask = AskAction::start;
  Pose pose = dp.start;
  int stay_counter = 1;
  int bcui_left = 0;
  std::deque<NavAction> forced;
  ad::Tape::Var total_loss = -1;
  const bool direct = params.advisor != AdvisorMode::indirect;

  for (int t = 1; t <= time_budget; ++t) {
    StepRecord rec;
    rec.pose = pose;
    const auto observation = observe(env, pose, feature_seed, params.obs);
    std::vector<double> dropout_mask;
    const std::vector<double>* mask_ptr = nullptr;
    if (params.train && model.config().dropout > 0.0) {
      dropout_mask = model.sample_dropout_mask(rng);
      mask_ptr = &dropout_mask;
    }

    const auto pass1 =
        model.decode_pass(tape, state, memory, coverage, observation, prev_nav, prev_ask, mask_ptr);
    rec.tentative = to_array<kNavActionCount>(tape.value(pass1.dist));

    TeacherContext ctx;
    ctx.tentative = rec.tentative;
    ctx.t = t;
    ctx.time_budget = time_budget;
    ctx.help_budget = budget.b;
    ctx.stay_counter = stay_counter;
    ctx.env = &env;
    ctx.field = &field;
    ctx.goals = &dp.goal_viewpoints;
    ctx.original_path = &original_path;
    ctx.pose = pose;
    rec.ask_teacher_label = ask_teacher(ctx, params.teacher);

    const auto ask_var = model.ask_forward(tape, observation, budget.b, tape.value(pass1.dist),
                                           tape.value(pass1.h_dec), tape.value(pass1.h_att));
    rec.ask_dist = to_array<kAskActionCount>(tape.value(ask_var));

    AskAction decided;
    if (params.train &&
        (params.ask == AskPolicyKind::learned || params.ask == AskPolicyKind::teacher)) {
      decided = rec.ask_teacher_label;  // behavior cloning of the ask policy
    } else {
      decided = baseline_ask(params.ask, t, budget, ctx, params.teacher, random_steps,
                             tape.value(ask_var));
    }
    rec.ask_decided = decided;

    rec.granted = decided == AskAction::request && budget.b > 0;
    if (rec.granted) {
      const auto response = advisor(env, pose, field, params.k, params.advisor);
      if (response.text) {
        goal_text = prepend_subgoal(*response.text, dp.end_goal);
        memory = model.encode_goal(tape, model.vocab().encode_text(goal_text));
        coverage = model.make_coverage(tape, memory.size());
        trace.encode_count += 1;
        trace.goal_changes += 1;
        rec.encoder_invoked = true;
      }
      budget.b -= 1;
      trace.request_steps.push_back(t);
      if (params.train) {
        bcui_left = params.k;
      } else if (direct) {
        forced.assign(response.actions.begin(), response.actions.end());
      }
    }

    const auto pass2 =
        model.decode_pass(tape, state, memory, coverage, observation, prev_nav, decided, mask_ptr);
    model.update_coverage(tape, coverage, pass2.alpha);
    state = pass2.state;
    rec.final_dist = to_array<kNavActionCount>(tape.value(pass2.dist));
    rec.nav_teacher_label = nav_teacher(env, pose, field);

    NavAction acted;
    if (params.train) {
      if (bcui_left > 0) {
        acted = rec.nav_teacher_label;
        rec.teacher_acted = true;
        bcui_left -= 1;
      } else {
        acted = static_cast<NavAction>(select_action(tape.value(pass2.dist), true, &rng));
      }
    } else if (direct && !forced.empty()) {
      acted = forced.front();
      forced.pop_front();
      rec.advisor_forced = true;
    } else {
      acted = static_cast<NavAction>(select_action(tape.value(pass2.dist), false));
    }
    rec.nav_executed = acted;

    if (params.train) {
      const auto nav_loss = model.step_loss(tape, pass2.dist, static_cast<int>(rec.nav_teacher_label));
      const auto ask_loss = model.step_loss(tape, ask_var, static_cast<int>(rec.ask_teacher_label));
      rec.nav_loss = tape.scalar(nav_loss);
      rec.ask_loss = tape.scalar(ask_loss);
      trace.nav_loss += rec.nav_loss;
      trace.ask_loss += rec.ask_loss;
      const auto step_total = tape.add(nav_loss, ask_loss);
      total_loss = total_loss < 0 ? step_total : tape.add(total_loss, step_total);
    }

    trace.steps.push_back(rec);
    prev_nav = acted;
    prev_ask = decided;
    if (acted == NavAction::stop) {
      trace.stopped = true;
      break;
    }
    const Pose next = transition(env, pose, acted, field);
    stay_counter = next.viewpoint == pose.viewpoint ? stay_counter + 1 : 1;
    pose = next;
  }

  trace.final_pose = pose;
  if (params.train && total_loss >= 0 && grads != nullptr) tape.backward(total_loss);
  return trace;
}

}  // namespace

EpisodeTrace run_episode(const DataPoint& dp, const EnvironmentGraph& env, const AgentModel& model,
                         const EpisodeParams& params, int time_budget, std::uint64_t feature_seed,
                         Rng& rng, ad::GradBuffer* grads, ad::Tape* workspace) {
  try {
    if (workspace != nullptr) {
      workspace->reset(grads);
      return run_episode_impl(dp, env, model, params, time_budget, feature_seed, rng, grads,
                              *workspace);
    }
    ad::Tape tape(model.params(), grads);
    return run_episode_impl(dp, env, model, params, time_budget, feature_seed, rng, grads, tape);
  } catch (const std::exception& e) {
    throw std::runtime_error("episode failed (env " + dp.env_id + ", goal '" + dp.end_goal +
                             "'): " + e.what());
  }
}

namespace {

// Chunk boundaries depend only on (episode count, chunk count), never on the
// worker count, so gradient and loss summation order is schedule-independent.
struct ChunkPlan {
  int begin = 0, end = 0;
};

std::vector<ChunkPlan> plan_chunks(int episodes, int chunks) {
  const int n = std::max(1, std::min(chunks, episodes));
  std::vector<ChunkPlan> plan(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    plan[static_cast<std::size_t>(c)].begin = static_cast<int>(
        static_cast<std::int64_t>(episodes) * c / n);
    plan[static_cast<std::size_t>(c)].end = static_cast<int>(
        static_cast<std::int64_t>(episodes) * (c + 1) / n);
  }
  return plan;
}

struct ChunkResult {
  ad::GradBuffer grads;
  double nav_loss = 0, ask_loss = 0;
  int bad_episode = -1;
};

void run_chunk(const AgentModel& model, std::span<const EpisodeSpec> episodes,
               const EpisodeParams& params, std::uint64_t seed, std::int64_t iteration,
               const ChunkPlan& plan, ChunkResult& result, std::vector<EpisodeTrace>* traces) {
  result.grads.init(model.params());
  ad::Tape tape(model.params(), params.train ? &result.grads : nullptr);
  for (int i = plan.begin; i < plan.end; ++i) {
    const auto& spec = episodes[static_cast<std::size_t>(i)];
    Rng rng(derive_seed(seed, std::string_view("episode"), static_cast<std::uint64_t>(iteration),
                        static_cast<std::uint64_t>(i)));
    EpisodeTrace trace =
        run_episode(*spec.dp, *spec.env, model, params, spec.time_budget, spec.feature_seed, rng,
                    params.train ? &result.grads : nullptr, &tape);
    result.nav_loss += trace.nav_loss;
    result.ask_loss += trace.ask_loss;
    if (!std::isfinite(trace.nav_loss + trace.ask_loss) && result.bad_episode < 0) {
      result.bad_episode = i;
    }
    if (traces != nullptr) (*traces)[static_cast<std::size_t>(i)] = std::move(trace);
  }
}

BatchRollout merge_chunks(const AgentModel& model, std::vector<ChunkResult>& chunks) {
  BatchRollout out;
  out.grads.init(model.params());
  for (auto& c : chunks) {
    out.grads.add(c.grads);
    out.nav_loss += c.nav_loss;
    out.ask_loss += c.ask_loss;
    if (c.bad_episode >= 0 && out.bad_episode < 0) out.bad_episode = c.bad_episode;
  }
  return out;
}

}  // namespace

BatchRollout rollout_batch_reference(const AgentModel& model, std::span<const EpisodeSpec> episodes,
                                     const EpisodeParams& params, std::uint64_t seed,
                                     std::int64_t iteration, int chunks,
                                     std::vector<EpisodeTrace>* traces) {
  if (traces != nullptr) traces->assign(episodes.size(), {});
  const auto plan = plan_chunks(static_cast<int>(episodes.size()), chunks);
  std::vector<ChunkResult> results(plan.size());
  for (std::size_t c = 0; c < plan.size(); ++c) {
    run_chunk(model, episodes, params, seed, iteration, plan[c], results[c], traces);
  }
  return merge_chunks(model, results);
}

BatchRollout rollout_batch_parallel(const AgentModel& model, std::span<const EpisodeSpec> episodes,
                                    const EpisodeParams& params, std::uint64_t seed,
                                    std::int64_t iteration, int chunks, int workers,
                                    std::vector<EpisodeTrace>* traces) {
  if (traces != nullptr) traces->assign(episodes.size(), {});
  const auto plan = plan_chunks(static_cast<int>(episodes.size()), chunks);
  std::vector<ChunkResult> results(plan.size());
  const int threads = std::max(1, workers);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int c = 0; c < static_cast<int>(plan.size()); ++c) {
    run_chunk(model, episodes, params, seed, iteration, plan[static_cast<std::size_t>(c)],
              results[static_cast<std::size_t>(c)], traces);
  }
  return merge_chunks(model, results);
}

void AdamOptimizer::init(const ad::ParamStore& params) {
  state.iteration = 0;
  state.adam_m.resize(static_cast<std::size_t>(params.count()));
  state.adam_v.resize(static_cast<std::size_t>(params.count()));
  for (int i = 0; i < params.count(); ++i) {
    state.adam_m[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(params.block(i).size()), 0.0);
    state.adam_v[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(params.block(i).size()), 0.0);
  }
}

void AdamOptimizer::step(ad::ParamStore& params, const ad::GradBuffer& grads) {
  state.iteration += 1;
  const double t = static_cast<double>(state.iteration);
  const double corr1 = 1.0 - std::pow(beta1, t);
  const double corr2 = 1.0 - std::pow(beta2, t);
  for (int i = 0; i < params.count(); ++i) {
    auto& block = params.block(i);
    auto& m = state.adam_m[static_cast<std::size_t>(i)];
    auto& v = state.adam_v[static_cast<std::size_t>(i)];
    const auto& g = grads.grad(i);
    for (std::size_t j = 0; j < block.w.size(); ++j) {
      const double grad = g[j] + weight_decay * block.w[j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * grad;
      v[j] = beta2 * v[j] + (1.0 - beta2) * grad * grad;
      block.w[j] -= lr * (m[j] / corr1) / (std::sqrt(v[j] / corr2) + eps);
    }
  }
}

TrainResult train(const TrainInputs& in) {
  const RunConfig& cfg = in.cfg;
  if (in.train_split.empty()) throw DataError("train: empty training split");
  std::filesystem::create_directories(in.out_dir);

  const std::uint64_t seed = cfg.seed();
  const int iterations = cfg.get_int("training.iterations");
  const int batch_size = cfg.get_int("training.batch_size");
  const int chunks = cfg.get_int("training.grad_chunks");
  const int workers = cfg.workers();
  const int dev_every = cfg.get_int("training.dev_eval_every");
  const int dev_limit = cfg.get_int("training.dev_eval_limit");
  const int checkpoint_every = cfg.get_int("training.checkpoint_every");

  AdamOptimizer adam;
  adam.lr = cfg.get_double("training.lr");
  adam.weight_decay = cfg.get_double("training.weight_decay");

  std::optional<AgentModel> model;
  if (!in.resume_checkpoint.empty()) {
    TrainerState trainer;
    model.emplace(AgentModel::load_checkpoint(in.resume_checkpoint, nullptr, &trainer));
    if (trainer.adam_m.empty()) {
      throw CheckpointError("resume checkpoint has no trainer state: " + in.resume_checkpoint);
    }
    adam.state = std::move(trainer);
  } else {
    std::vector<std::string> texts;
    texts.reserve(in.train_split.size());
    for (const auto& dp : in.train_split) texts.push_back(dp.end_goal);
    Vocabulary vocab = Vocabulary::build(texts, std::max(cfg.get_int("training.k"), 10));
    const int vocab_size = vocab.size();
    model.emplace(ModelConfig::from_config(cfg, vocab_size), std::move(vocab));
    Rng init_rng(derive_seed(seed, std::string_view("init")));
    model->init_params(init_rng);
    adam.init(model->params());
  }

  const EpisodeParams train_params = EpisodeParams::from_config(cfg, /*train=*/true);

  // Per-datapoint structures reused across iterations.
  std::vector<const EnvironmentGraph*> dp_env(in.train_split.size());
  std::vector<int> dp_budget(in.train_split.size());
  std::vector<std::uint64_t> dp_feature_seed(in.train_split.size());
  for (std::size_t i = 0; i < in.train_split.size(); ++i) {
    const auto& dp = in.train_split[i];
    const auto it = in.envs.find(dp.env_id);
    if (it == in.envs.end()) throw DataError("train: unknown environment " + dp.env_id);
    dp_env[i] = it->second;
    dp_budget[i] = time_budget_train(dp, *it->second);
    dp_feature_seed[i] = env_feature_seed(cfg, dp.env_id);
  }

  EvalBudgetStats stats;
  EvalParams dev_params = EvalParams::from_config(cfg);
  if (!in.dev_split.empty()) stats = EvalBudgetStats::build(in.train_split, in.envs);
  std::vector<DataPoint> dev_subset(
      in.dev_split.begin(),
      in.dev_split.begin() + std::min<std::size_t>(in.dev_split.size(),
                                                   static_cast<std::size_t>(dev_limit)));

  model->vocab().save(in.out_dir + "/vocab.txt");

  const std::string log_path = in.out_dir + "/train_log.csv";
  std::ofstream log(log_path, adam.state.iteration > 0 ? std::ios::app : std::ios::trunc);
  if (adam.state.iteration == 0) log << "iteration,nav_loss,ask_loss,dev_success\n";

  const std::string checkpoint_path = in.out_dir + "/checkpoint.bin";
  TrainResult result;
  result.checkpoint_path = checkpoint_path;

  for (std::int64_t iter = adam.state.iteration + 1; iter <= iterations; ++iter) {
    Rng batch_rng(derive_seed(seed, std::string_view("batch"), static_cast<std::uint64_t>(iter)));
    std::vector<EpisodeSpec> specs(static_cast<std::size_t>(batch_size));
    for (auto& spec : specs) {
      const auto pick = static_cast<std::size_t>(
          batch_rng.uniform_int(static_cast<int>(in.train_split.size())));
      spec.dp = &in.train_split[pick];
      spec.env = dp_env[pick];
      spec.time_budget = dp_budget[pick];
      spec.feature_seed = dp_feature_seed[pick];
    }

    const BatchRollout rollout =
        rollout_batch_parallel(*model, specs, train_params, seed, iter, chunks, workers);
    if (!std::isfinite(rollout.nav_loss + rollout.ask_loss)) {
      const auto& bad = specs[static_cast<std::size_t>(std::max(0, rollout.bad_episode))];
      throw std::runtime_error("non-finite loss at iteration " + std::to_string(iter) + " (env " +
                               bad.dp->env_id + ", goal '" + bad.dp->end_goal + "')");
    }
    adam.step(model->params(), rollout.grads);

    result.final_nav_loss = rollout.nav_loss / batch_size;
    result.final_ask_loss = rollout.ask_loss / batch_size;

    std::string dev_cell;
    if (!dev_subset.empty() && dev_every > 0 &&
        (iter % dev_every == 0 || iter == iterations)) {
      const MetricsReport report =
          evaluate(*model, "dev", dev_subset, in.envs, stats, dev_params,
                   {derive_seed(seed, std::string_view("dev"), static_cast<std::uint64_t>(iter))});
      std::ostringstream cell;
      cell << report.success_rate.mean;
      dev_cell = cell.str();
      if (!in.quiet) {
        std::cout << "iter " << iter << " nav_loss " << result.final_nav_loss << " ask_loss "
                  << result.final_ask_loss << " dev_success " << dev_cell << "\n";
      }
    }
    log << iter << "," << result.final_nav_loss << "," << result.final_ask_loss << "," << dev_cell
        << "\n";

    if (checkpoint_every > 0 && iter % checkpoint_every == 0 && iter != iterations) {
      std::ostringstream name;
      name << in.out_dir << "/checkpoint_" << iter << ".bin";
      model->save_checkpoint(name.str(), cfg.echo(), &adam.state);
    }
  }

  model->save_checkpoint(checkpoint_path, cfg.echo(), &adam.state);
  result.iterations = iterations;
  return result;
}

}  // namespace vnla
