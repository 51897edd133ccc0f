#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vnla/config.hpp"
#include "vnla/policy.hpp"
#include "vnla/worldgen.hpp"

namespace vnla {

// Teacher actions (stop included) from a pose to the goal set.
int teacher_path_length(const EnvironmentGraph& env, Pose pose, const GoalField& field,
                        int cap = 200);

// Training-time budget: mean over goal viewpoints of the per-goal teacher
// action count, rounded half-up.
int time_budget_train(const DataPoint& dp, const EnvironmentGraph& env);

// Trajectory-length multisets from the training split, keyed by (start room
// label, goal room label) — or (start room label, object label) for NoRoom
// datapoints.
struct EvalBudgetStats {
  std::map<std::pair<std::string, std::string>, std::vector<int>> samples;

  static EvalBudgetStats build(const std::vector<DataPoint>& train_split,
                               const std::map<std::string, const EnvironmentGraph*>& envs);
};

// 95% upper-confidence estimate of the matching trajectory length, clamped to
// l_max; l_max when no (or a single) matching sample exists.
int time_budget_eval(const DataPoint& dp, const EnvironmentGraph& env,
                     const EvalBudgetStats& stats, int l_max);

struct BudgetState {
  int time_budget = 0;  // T
  int b_hat = 0;        // sampled request cap B
  int b = 0;            // remaining requests
};

// B = floor(T*tau/k) + Bernoulli(frac); E[B*k/T] = tau.
int sample_help_budget(int time_budget, double tau, int k, Rng& rng);

enum class AskPolicyKind { none, first, random, teacher, learned };
AskPolicyKind ask_policy_from_string(const std::string& s);
const char* to_string(AskPolicyKind k);

AskAction baseline_ask(AskPolicyKind kind, int t, const BudgetState& budget,
                       const TeacherContext& ctx, const AskTeacherConfig& teacher_cfg,
                       const std::set<int>& random_steps, std::span<const double> learned_dist);

struct StepRecord {
  Pose pose;
  std::array<double, kNavActionCount> tentative{};
  std::array<double, kNavActionCount> final_dist{};
  std::array<double, kAskActionCount> ask_dist{};
  AskAction ask_decided = AskAction::do_nothing;
  AskAction ask_teacher_label = AskAction::do_nothing;
  bool granted = false;
  bool teacher_acted = false;   // BCUI acting-policy flag (train)
  bool advisor_forced = false;  // direct advisor override (eval)
  bool encoder_invoked = false;
  NavAction nav_executed = NavAction::stop;
  NavAction nav_teacher_label = NavAction::stop;
  double nav_loss = 0, ask_loss = 0;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  int time_budget = 0;
  int b_hat = 0;
  std::vector<int> request_steps;  // granted, 1-based
  Pose final_pose;
  bool stopped = false;
  double nav_loss = 0, ask_loss = 0;
  int encode_count = 0, goal_changes = 0;
};

struct EpisodeParams {
  bool train = false;
  AskPolicyKind ask = AskPolicyKind::learned;
  AdvisorMode advisor = AdvisorMode::indirect;
  int k = 4;
  double tau = 0.4;
  AskTeacherConfig teacher;
  ObservationParams obs;

  static EpisodeParams from_config(const RunConfig& cfg, bool train);
};

// One Algorithm-style episode: observe, tentative pass, ask decision,
// advisor/goal rewrite, final pass, acting rule, transition. In train mode
// losses are accumulated and backpropagated into `grads`. A caller-owned
// `workspace` tape avoids reallocation across episodes.
EpisodeTrace run_episode(const DataPoint& dp, const EnvironmentGraph& env, const AgentModel& model,
                         const EpisodeParams& params, int time_budget,
                         std::uint64_t feature_seed, Rng& rng, ad::GradBuffer* grads = nullptr,
                         ad::Tape* workspace = nullptr);

struct EpisodeSpec {
  const DataPoint* dp = nullptr;
  const EnvironmentGraph* env = nullptr;
  int time_budget = 0;
  std::uint64_t feature_seed = 0;
};

struct BatchRollout {
  ad::GradBuffer grads;  // summed over the batch in fixed chunk order
  double nav_loss = 0, ask_loss = 0;
  int bad_episode = -1;  // first episode with a non-finite loss
};

// Serial reference: chunks processed in order on one thread.
BatchRollout rollout_batch_reference(const AgentModel& model, std::span<const EpisodeSpec> episodes,
                                     const EpisodeParams& params, std::uint64_t seed,
                                     std::int64_t iteration, int chunks,
                                     std::vector<EpisodeTrace>* traces = nullptr);

// OpenMP over the same fixed chunk structure; bit-identical to the reference
// for any worker count.
BatchRollout rollout_batch_parallel(const AgentModel& model, std::span<const EpisodeSpec> episodes,
                                    const EpisodeParams& params, std::uint64_t seed,
                                    std::int64_t iteration, int chunks, int workers,
                                    std::vector<EpisodeTrace>* traces = nullptr);

struct AdamOptimizer {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
  TrainerState state;

  void init(const ad::ParamStore& params);
  void step(ad::ParamStore& params, const ad::GradBuffer& grads);
};

struct TrainInputs {
  RunConfig cfg;
  std::map<std::string, const EnvironmentGraph*> envs;
  std::vector<DataPoint> train_split;
  std::vector<DataPoint> dev_split;  // may be empty
  std::string out_dir;               // checkpoint.bin, train_log.csv
  std::string resume_checkpoint;     // optional
  bool quiet = false;
};

struct TrainResult {
  std::string checkpoint_path;
  std::int64_t iterations = 0;
  double final_nav_loss = 0, final_ask_loss = 0;
};

TrainResult train(const TrainInputs& in);

std::uint64_t env_feature_seed(const RunConfig& cfg, const std::string& env_id);

}  // namespace vnla
