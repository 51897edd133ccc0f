#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vnla/env.hpp"

namespace vnla {

enum class AskAction { request = 0, do_nothing = 1, start = 2 };
constexpr int kAskActionCount = 2;  // start is not selectable

const char* to_string(AskAction a);

struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Edge-length-weighted shortest path to the nearest goal; deterministic
// tie-break toward the lexicographically smallest viewpoint-id sequence.
std::vector<int> shortest_path(const EnvironmentGraph& env, int start, const std::vector<int>& goals);
std::vector<int> shortest_path(const EnvironmentGraph& env, int start, const GoalField& field);

struct AskTeacherConfig {
  std::set<char> rules{'a', 'b', 'c', 'd', 'e'};
  double delta = 8.0;    // deviation threshold, meters
  double epsilon = 1.0;  // uncertainty threshold, nats
  int mu = 9;            // non-moving threshold, steps
  bool geodesic_deviation = false;  // rule (a): straight-line by default
};

// Everything the privileged actors may look at for one decision. Rules b, c,
// d read only the public members (tentative distribution, budget, clock,
// stay counter); rules a and e additionally need the ground-truth members,
// which may be left null when those rules are disabled.
struct TeacherContext {
  // public (agent-observable) state
  std::array<double, kNavActionCount> tentative{};  // pass-1 nav distribution
  int t = 1;             // current step, 1-based
  int time_budget = 1;   // T
  int help_budget = 0;   // b, remaining requests
  int stay_counter = 1;  // consecutive steps at the current viewpoint

  // ground truth (rules a/e, navigation teacher, advisor)
  const EnvironmentGraph* env = nullptr;
  const GoalField* field = nullptr;  // toward the episode goals
  const std::vector<int>* goals = nullptr;
  const std::vector<int>* original_path = nullptr;  // episode-start shortest path
  Pose pose;
};

// Optimal navigation teacher: stop at a goal; forward when it advances along
// the shortest path; otherwise the single rotation that most reduces the
// angular offset to the next-path viewpoint (horizontal before vertical,
// 180-degree ties turn right).
NavAction nav_teacher(const EnvironmentGraph& env, const Pose& pose, const GoalField& field);
NavAction nav_teacher(const TeacherContext& ctx);

// Which of the heuristic help-requesting rules fire. Budget gating (b > 0)
// is handled by the episode loop, not here.
std::set<char> ask_rules_fired(const TeacherContext& ctx, const AskTeacherConfig& cfg);
AskAction ask_teacher(const TeacherContext& ctx, const AskTeacherConfig& cfg);

enum class AdvisorMode { indirect, direct_with_subgoal, direct_no_subgoal };

AdvisorMode advisor_mode_from_string(const std::string& s);
const char* to_string(AdvisorMode m);

struct InterventionResponse {
  std::vector<NavAction> actions;   // exactly k, padded with stop after an early stop
  std::optional<std::string> text;  // rendered subgoal; absent in direct_no_subgoal
};

// Rolls the navigation teacher forward k steps from the given pose.
InterventionResponse advisor(const EnvironmentGraph& env, const Pose& pose, const GoalField& field,
                             int k, AdvisorMode mode);
InterventionResponse advisor(const EnvironmentGraph& env, const Pose& pose,
                             const std::vector<int>& goals, int k, AdvisorMode mode);

}  // namespace vnla
