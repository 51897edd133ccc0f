#include "vnla/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "vnla/language.hpp"

namespace vnla {

const char* to_string(AskAction a) {
  switch (a) {
    case AskAction::request: return "request";
    case AskAction::do_nothing: return "do_nothing";
    case AskAction::start: return "start";
  }
  return "?";
}

const char* to_string(AdvisorMode m) {
  switch (m) {
    case AdvisorMode::indirect: return "indirect";
    case AdvisorMode::direct_with_subgoal: return "direct_sub";
    case AdvisorMode::direct_no_subgoal: return "direct_nosub";
  }
  return "?";
}

AdvisorMode advisor_mode_from_string(const std::string& s) {
  if (s == "indirect") return AdvisorMode::indirect;
  if (s == "direct_sub") return AdvisorMode::direct_with_subgoal;
  if (s == "direct_nosub") return AdvisorMode::direct_no_subgoal;
  throw std::invalid_argument("unknown advisor mode: " + s);
}

std::vector<int> shortest_path(const EnvironmentGraph& env, int start, const GoalField& field) {
  if (!std::isfinite(field.dist[static_cast<std::size_t>(start)])) {
    throw NoPathError("no path from " + env.viewpoint_ids[static_cast<std::size_t>(start)] +
                      " to the goal set in environment " + env.id);
  }
  std::vector<int> path{start};
  int v = start;
  while (field.dist[static_cast<std::size_t>(v)] > 0.0) {
    v = field.next_hop[static_cast<std::size_t>(v)];
    path.push_back(v);
  }
  return path;
}

std::vector<int> shortest_path(const EnvironmentGraph& env, int start, const std::vector<int>& goals) {
  return shortest_path(env, start, compute_goal_field(env, goals));
}

NavAction nav_teacher(const EnvironmentGraph& env, const Pose& pose, const GoalField& field) {
  const int v = pose.viewpoint;
  if (field.dist[static_cast<std::size_t>(v)] == 0.0) return NavAction::stop;
  const int n = field.next_hop[static_cast<std::size_t>(v)];
  if (n < 0) {
    throw NoPathError("no path from " + env.viewpoint_ids[static_cast<std::size_t>(v)] +
                      " to the goal set in environment " + env.id);
  }
  if (transition(env, pose, NavAction::forward, field).viewpoint == n) return NavAction::forward;
  const double h = horizontal_offset_deg(env, pose, n);
  if (std::abs(h) > 30.0 + 1e-9) {
    // One step right vs one step left; keep whichever lands closer, ties right.
    const double after_right = std::abs(wrap180(h - 30.0));
    const double after_left = std::abs(wrap180(h + 30.0));
    return after_right <= after_left ? NavAction::right : NavAction::left;
  }
  const double vert = vertical_offset_deg(env, pose, n);
  if (vert > 0 && pose.elevation < kElevationMax) return NavAction::up;
  if (vert < 0 && pose.elevation > kElevationMin) return NavAction::down;
  // Horizontally aligned and elevation pinned: forward engages by definition.
  return NavAction::forward;
}

NavAction nav_teacher(const TeacherContext& ctx) {
  return nav_teacher(*ctx.env, ctx.pose, *ctx.field);
}

namespace {

double entropy_nats(const std::array<double, kNavActionCount>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

int argmax_index(const std::array<double, kNavActionCount>& p) {
  int best = 0;
  for (int i = 1; i < kNavActionCount; ++i) {
    if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

double deviation_from_path(const TeacherContext& ctx, bool geodesic) {
  double best = std::numeric_limits<double>::infinity();
  const auto& env = *ctx.env;
  for (int p : *ctx.original_path) {
    double d;
    if (geodesic) {
      d = geodesic_distance(env, ctx.pose.viewpoint, {p});
    } else {
      d = dist3(env.positions[static_cast<std::size_t>(ctx.pose.viewpoint)],
                env.positions[static_cast<std::size_t>(p)]);
    }
    best = std::min(best, d);
  }
  return best;
}

}  // namespace

std::set<char> ask_rules_fired(const TeacherContext& ctx, const AskTeacherConfig& cfg) {
  std::set<char> fired;
  const bool at_goal =
      cfg.rules.count('e') && ctx.field != nullptr &&
      ctx.field->dist[static_cast<std::size_t>(ctx.pose.viewpoint)] == 0.0;

  if (cfg.rules.count('a')) {
    if (ctx.env == nullptr || ctx.original_path == nullptr) {
      throw std::invalid_argument("ask_teacher: rule (a) requires ground-truth context");
    }
    if (deviation_from_path(ctx, cfg.geodesic_deviation) > cfg.delta) fired.insert('a');
  }
  if (cfg.rules.count('b')) {
    const double gap = std::log(static_cast<double>(kNavActionCount)) - entropy_nats(ctx.tentative);
    if (gap < cfg.epsilon) fired.insert('b');
  }
  if (cfg.rules.count('c')) {
    if (ctx.stay_counter >= cfg.mu) fired.insert('c');
  }
  if (cfg.rules.count('d')) {
    if (ctx.help_budget >= ctx.time_budget - ctx.t) fired.insert('d');
  }
  if (cfg.rules.count('e')) {
    if (ctx.field == nullptr) {
      throw std::invalid_argument("ask_teacher: rule (e) requires ground-truth context");
    }
    if (at_goal && argmax_index(ctx.tentative) == static_cast<int>(NavAction::forward)) {
      fired.insert('e');
    }
  }
  return fired;
}

AskAction ask_teacher(const TeacherContext& ctx, const AskTeacherConfig& cfg) {
  return ask_rules_fired(ctx, cfg).empty() ? AskAction::do_nothing : AskAction::request;
}

InterventionResponse advisor(const EnvironmentGraph& env, const Pose& pose, const GoalField& field,
                             int k, AdvisorMode mode) {
  if (k < 1) throw std::invalid_argument("advisor: k must be >= 1");
  InterventionResponse resp;
  Pose cur = pose;
  for (int i = 0; i < k; ++i) {
    const NavAction a = nav_teacher(env, cur, field);
    resp.actions.push_back(a);
    if (a == NavAction::stop) break;
    cur = transition(env, cur, a, field);
  }
  while (static_cast<int>(resp.actions.size()) < k) resp.actions.push_back(NavAction::stop);
  if (mode != AdvisorMode::direct_no_subgoal) resp.text = render_subgoal(resp.actions);
  return resp;
}

InterventionResponse advisor(const EnvironmentGraph& env, const Pose& pose,
                             const std::vector<int>& goals, int k, AdvisorMode mode) {
  return advisor(env, pose, compute_goal_field(env, goals), k, mode);
}

}  // namespace vnla
