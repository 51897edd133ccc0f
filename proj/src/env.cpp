#include "vnla/env.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>

#include "json.hpp"
#include "vnla/rng.hpp"

namespace vnla {

namespace {
constexpr double kDeg = 180.0 / 3.14159265358979323846;
constexpr double kAngleTol = 1e-9;
}  // namespace

const char* to_string(NavAction a) {
  switch (a) {
    case NavAction::left: return "left";
    case NavAction::right: return "right";
    case NavAction::up: return "up";
    case NavAction::down: return "down";
    case NavAction::forward: return "forward";
    case NavAction::stop: return "stop";
    case NavAction::start: return "start";
  }
  return "?";
}

NavAction nav_action_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(NavAction::start); ++i) {
    if (s == to_string(static_cast<NavAction>(i))) return static_cast<NavAction>(i);
  }
  throw std::invalid_argument("unknown nav action: " + s);
}

int EnvironmentGraph::viewpoint_index(const std::string& vid) const {
  auto it = std::lower_bound(viewpoint_ids.begin(), viewpoint_ids.end(), vid);
  if (it == viewpoint_ids.end() || *it != vid) {
    throw EnvError("environment " + id + ": unknown viewpoint '" + vid + "'");
  }
  return static_cast<int>(it - viewpoint_ids.begin());
}

int EnvironmentGraph::room_index(const std::string& rid) const {
  for (int i = 0; i < static_cast<int>(rooms.size()); ++i) {
    if (rooms[static_cast<std::size_t>(i)].id == rid) return i;
  }
  throw EnvError("environment " + id + ": unknown room '" + rid + "'");
}

const std::string& EnvironmentGraph::room_label_of(int viewpoint) const {
  return rooms[static_cast<std::size_t>(room_of[static_cast<std::size_t>(viewpoint)])].label;
}

void EnvironmentGraph::finalize() {
  const int n = num_viewpoints();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return viewpoint_ids[static_cast<std::size_t>(a)] < viewpoint_ids[static_cast<std::size_t>(b)];
  });
  std::vector<int> rank(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

  std::vector<std::string> ids(static_cast<std::size_t>(n));
  std::vector<Vec3> pos(static_cast<std::size_t>(n));
  std::vector<int> rof(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
    ids[static_cast<std::size_t>(i)] = viewpoint_ids[src];
    pos[static_cast<std::size_t>(i)] = positions[src];
    rof[static_cast<std::size_t>(i)] = room_of.empty() ? -1 : room_of[src];
  }
  viewpoint_ids = std::move(ids);
  positions = std::move(pos);
  if (!room_of.empty()) room_of = std::move(rof);

  for (auto& e : edges) {
    e.first = rank[static_cast<std::size_t>(e.first)];
    e.second = rank[static_cast<std::size_t>(e.second)];
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  adjacency.assign(static_cast<std::size_t>(n), {});
  for (const auto& e : edges) {
    adjacency[static_cast<std::size_t>(e.first)].push_back(e.second);
    adjacency[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  for (auto& a : adjacency) std::sort(a.begin(), a.end());

  for (auto& o : objects) {
    o.delegate = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int v = 0; v < n; ++v) {
      if (room_of[static_cast<std::size_t>(v)] != o.room) continue;
      const double d = dist3(positions[static_cast<std::size_t>(v)], o.pos);
      if (d < best) {
        best = d;
        o.delegate = v;
      }
    }
  }
  validate_environment(*this);
}

void validate_environment(const EnvironmentGraph& env) {
  const int n = env.num_viewpoints();
  for (int i = 1; i < n; ++i) {
    if (env.viewpoint_ids[static_cast<std::size_t>(i - 1)] >=
        env.viewpoint_ids[static_cast<std::size_t>(i)]) {
      throw EnvError("environment " + env.id + ": duplicate or unsorted viewpoint ids");
    }
  }
  if (static_cast<int>(env.positions.size()) != n || static_cast<int>(env.room_of.size()) != n) {
    throw EnvError("environment " + env.id + ": inconsistent viewpoint tables");
  }
  for (const auto& e : env.edges) {
    if (e.first < 0 || e.second >= n || e.first == e.second) {
      throw EnvError("environment " + env.id + ": bad edge");
    }
    const double len = dist3(env.positions[static_cast<std::size_t>(e.first)],
                             env.positions[static_cast<std::size_t>(e.second)]);
    if (len > kMaxEdgeLength + 1e-9) {
      throw EnvError("environment " + env.id + ": edge longer than 5 m");
    }
  }
  for (int v = 0; v < n; ++v) {
    const int r = env.room_of[static_cast<std::size_t>(v)];
    if (r < 0 || r >= static_cast<int>(env.rooms.size())) {
      throw EnvError("environment " + env.id + ": viewpoint without room");
    }
  }
  for (const auto& o : env.objects) {
    if (o.room < 0 || o.room >= static_cast<int>(env.rooms.size())) {
      throw EnvError("environment " + env.id + ": object without room");
    }
    if (o.delegate < 0 || o.delegate >= n ||
        env.room_of[static_cast<std::size_t>(o.delegate)] != o.room) {
      throw EnvError("environment " + env.id + ": object delegate not in its room");
    }
  }
}

namespace {

double q3(double v) { return std::round(v * 1000.0) / 1000.0; }

void check_pose(const EnvironmentGraph& env, const Pose& pose) {
  if (pose.viewpoint < 0 || pose.viewpoint >= env.num_viewpoints()) {
    throw EnvError("environment " + env.id + ": pose at unknown viewpoint index " +
                   std::to_string(pose.viewpoint));
  }
}

}  // namespace

EnvironmentGraph load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EnvError("cannot open environment file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema", "") != "vnla-env/1") {
    throw EnvError("bad environment schema in " + path);
  }
  EnvironmentGraph env;
  env.id = j.at("id").get<std::string>();
  std::vector<std::string> raw_ids;
  for (const auto& vp : j.at("viewpoints")) {
    raw_ids.push_back(vp.at("id").get<std::string>());
    const auto& p = vp.at("pos");
    env.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  }
  env.viewpoint_ids = raw_ids;
  auto index_of = [&](const std::string& vid) {
    auto it = std::find(raw_ids.begin(), raw_ids.end(), vid);
    if (it == raw_ids.end()) throw EnvError("unknown viewpoint '" + vid + "' in " + path);
    return static_cast<int>(it - raw_ids.begin());
  };
  for (const auto& e : j.at("edges")) {
    env.edges.emplace_back(index_of(e.at(0).get<std::string>()),
                           index_of(e.at(1).get<std::string>()));
  }
  for (const auto& r : j.at("rooms")) {
    Room room;
    room.id = r.at("id").get<std::string>();
    room.label = r.at("label").get<std::string>();
    const auto& b = r.at("bounds");
    room.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                   b.at(3).get<double>()};
    env.rooms.push_back(room);
  }
  env.room_of.assign(raw_ids.size(), -1);
  for (auto it = j.at("room_of").begin(); it != j.at("room_of").end(); ++it) {
    env.room_of[static_cast<std::size_t>(index_of(it.key()))] =
        env.room_index(it.value().get<std::string>());
  }
  for (const auto& o : j.at("objects")) {
    ObjectInstance obj;
    obj.label = o.at("label").get<std::string>();
    const auto& p = o.at("pos");
    obj.pos = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    obj.room = env.room_index(o.at("room").get<std::string>());
    env.objects.push_back(obj);
  }
  env.finalize();
  return env;
}

void save_environment(const EnvironmentGraph& env, const std::string& path) {
  nlohmann::ordered_json j;
  j["schema"] = "vnla-env/1";
  j["id"] = env.id;
  auto vps = nlohmann::ordered_json::array();
  for (int v = 0; v < env.num_viewpoints(); ++v) {
    const auto& p = env.positions[static_cast<std::size_t>(v)];
    vps.push_back({{"id", env.viewpoint_ids[static_cast<std::size_t>(v)]},
                   {"pos", {q3(p.x), q3(p.y), q3(p.z)}}});
  }
  j["viewpoints"] = vps;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : env.edges) {
    edges.push_back({env.viewpoint_ids[static_cast<std::size_t>(e.first)],
                     env.viewpoint_ids[static_cast<std::size_t>(e.second)]});
  }
  j["edges"] = edges;
  auto rooms = nlohmann::ordered_json::array();
  for (const auto& r : env.rooms) {
    rooms.push_back({{"id", r.id},
                     {"label", r.label},
                     {"bounds", {q3(r.bounds.x0), q3(r.bounds.y0), q3(r.bounds.x1), q3(r.bounds.y1)}}});
  }
  j["rooms"] = rooms;
  auto room_of = nlohmann::ordered_json::object();
  for (int v = 0; v < env.num_viewpoints(); ++v) {
    room_of[env.viewpoint_ids[static_cast<std::size_t>(v)]] =
        env.rooms[static_cast<std::size_t>(env.room_of[static_cast<std::size_t>(v)])].id;
  }
  j["room_of"] = room_of;
  auto objects = nlohmann::ordered_json::array();
  for (const auto& o : env.objects) {
    objects.push_back({{"label", o.label},
                       {"pos", {q3(o.pos.x), q3(o.pos.y), q3(o.pos.z)}},
                       {"room", env.rooms[static_cast<std::size_t>(o.room)].id},
                       {"delegate", env.viewpoint_ids[static_cast<std::size_t>(o.delegate)]}});
  }
  j["objects"] = objects;
  std::ofstream out(path);
  if (!out) throw EnvError("cannot write environment file: " + path);
  out << j.dump(2) << "\n";
}

GoalField compute_goal_field(const EnvironmentGraph& env, const std::vector<int>& goals) {
  if (goals.empty()) throw std::invalid_argument("compute_goal_field: empty goal set");
  const int n = env.num_viewpoints();
  GoalField field;
  field.dist.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  field.next_hop.assign(static_cast<std::size_t>(n), -1);

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int g : goals) {
    if (g < 0 || g >= n) throw EnvError("environment " + env.id + ": unknown goal viewpoint");
    field.dist[static_cast<std::size_t>(g)] = 0.0;
    heap.push({0.0, g});
  }
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > field.dist[static_cast<std::size_t>(v)]) continue;
    for (int u : env.adjacency[static_cast<std::size_t>(v)]) {
      const double w = dist3(env.positions[static_cast<std::size_t>(v)],
                             env.positions[static_cast<std::size_t>(u)]);
      if (d + w < field.dist[static_cast<std::size_t>(u)]) {
        field.dist[static_cast<std::size_t>(u)] = d + w;
        heap.push({d + w, u});
      }
    }
  }
  // Next hop toward the goals; scanning sorted neighbors keeps the
  // smallest-id winner on ties.
  for (int v = 0; v < n; ++v) {
    if (field.dist[static_cast<std::size_t>(v)] == 0.0 ||
        !std::isfinite(field.dist[static_cast<std::size_t>(v)])) {
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    int hop = -1;
    for (int u : env.adjacency[static_cast<std::size_t>(v)]) {
      const double w = dist3(env.positions[static_cast<std::size_t>(v)],
                             env.positions[static_cast<std::size_t>(u)]);
      const double via = w + field.dist[static_cast<std::size_t>(u)];
      if (via < best) {
        best = via;
        hop = u;
      }
    }
    field.next_hop[static_cast<std::size_t>(v)] = hop;
  }
  return field;
}

double geodesic_distance(const EnvironmentGraph& env, int viewpoint, const std::vector<int>& goals) {
  if (viewpoint < 0 || viewpoint >= env.num_viewpoints()) {
    throw EnvError("environment " + env.id + ": unknown viewpoint index");
  }
  const GoalField field = compute_goal_field(env, goals);
  return field.dist[static_cast<std::size_t>(viewpoint)];
}

double wrap180(double degrees) {
  double x = std::fmod(degrees + 180.0, 360.0);
  if (x < 0) x += 360.0;
  return x - 180.0;
}

double horizontal_offset_deg(const EnvironmentGraph& env, const Pose& pose, int target) {
  const Vec3& a = env.positions[static_cast<std::size_t>(pose.viewpoint)];
  const Vec3& b = env.positions[static_cast<std::size_t>(target)];
  const double bearing = std::atan2(b.x - a.x, b.y - a.y) * kDeg;
  return wrap180(bearing - 30.0 * pose.heading);
}

double vertical_offset_deg(const EnvironmentGraph& env, const Pose& pose, int target) {
  const Vec3& a = env.positions[static_cast<std::size_t>(pose.viewpoint)];
  const Vec3& b = env.positions[static_cast<std::size_t>(target)];
  const double horiz = std::hypot(b.x - a.x, b.y - a.y);
  const double pitch = std::atan2(b.z - a.z, horiz) * kDeg;
  return pitch - 30.0 * pose.elevation;
}

double gaze_angle_deg(const EnvironmentGraph& env, const Pose& pose, int target) {
  const Vec3& a = env.positions[static_cast<std::size_t>(pose.viewpoint)];
  const Vec3& b = env.positions[static_cast<std::size_t>(target)];
  const double hd = 30.0 * pose.heading / kDeg;
  const double el = 30.0 * pose.elevation / kDeg;
  const Vec3 gaze{std::cos(el) * std::sin(hd), std::cos(el) * std::cos(hd), std::sin(el)};
  Vec3 dir{b.x - a.x, b.y - a.y, b.z - a.z};
  const double len = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
  if (len == 0.0) return 0.0;
  dir = {dir.x / len, dir.y / len, dir.z / len};
  const double dot = gaze.x * dir.x + gaze.y * dir.y + gaze.z * dir.z;
  return std::acos(std::clamp(dot, -1.0, 1.0)) * kDeg;
}

namespace {

// The shortest-path-aware forward semantics. Moves to the next viewpoint on
// the shortest path to the goals when it is (or cannot be brought closer to)
// the view center; otherwise moves to the neighbor closest to the view
// center (tie-break: smallest viewpoint id = smallest index).
int forward_target(const EnvironmentGraph& env, const Pose& pose, const GoalField& field) {
  const int v = pose.viewpoint;
  const int n = field.next_hop[static_cast<std::size_t>(v)];
  if (n >= 0) {
    const double h = horizontal_offset_deg(env, pose, n);
    if (std::abs(h) <= 30.0 + kAngleTol) {
      const double vert = vertical_offset_deg(env, pose, n);
      if (std::abs(vert) <= 30.0 + kAngleTol) return n;
      if (vert > 0 && pose.elevation >= kElevationMax) return n;
      if (vert < 0 && pose.elevation <= kElevationMin) return n;
    }
  }
  int best = v;  // no neighbors: stay in place
  double best_angle = std::numeric_limits<double>::infinity();
  for (int u : env.adjacency[static_cast<std::size_t>(v)]) {
    const double ang = gaze_angle_deg(env, pose, u);
    if (ang < best_angle - kAngleTol) {
      best_angle = ang;
      best = u;
    }
  }
  return best;
}

}  // namespace

Pose transition(const EnvironmentGraph& env, const Pose& pose, NavAction action,
                const GoalField& field) {
  check_pose(env, pose);
  Pose next = pose;
  switch (action) {
    case NavAction::left:
      next.heading = (pose.heading + kHeadingSteps - 1) % kHeadingSteps;
      return next;
    case NavAction::right:
      next.heading = (pose.heading + 1) % kHeadingSteps;
      return next;
    case NavAction::up:
      next.elevation = std::min(kElevationMax, pose.elevation + 1);
      return next;
    case NavAction::down:
      next.elevation = std::max(kElevationMin, pose.elevation - 1);
      return next;
    case NavAction::forward:
      next.viewpoint = forward_target(env, pose, field);
      return next;
    case NavAction::stop:
    case NavAction::start:
      throw std::invalid_argument("transition: non-motion action");
  }
  return next;
}

Pose transition(const EnvironmentGraph& env, const Pose& pose, NavAction action,
                const std::vector<int>& goals) {
  if (goals.empty()) throw std::invalid_argument("transition: empty goal set");
  if (action == NavAction::forward) {
    return transition(env, pose, action, compute_goal_field(env, goals));
  }
  static const GoalField kUnused;
  check_pose(env, pose);
  Pose next = pose;
  switch (action) {
    case NavAction::left:
      next.heading = (pose.heading + kHeadingSteps - 1) % kHeadingSteps;
      return next;
    case NavAction::right:
      next.heading = (pose.heading + 1) % kHeadingSteps;
      return next;
    case NavAction::up:
      next.elevation = std::min(kElevationMax, pose.elevation + 1);
      return next;
    case NavAction::down:
      next.elevation = std::max(kElevationMin, pose.elevation - 1);
      return next;
    default:
      throw std::invalid_argument("transition: non-motion action");
  }
}

std::vector<double> observe(const EnvironmentGraph& env, const Pose& pose,
                            std::uint64_t feature_seed, const ObservationParams& params) {
  check_pose(env, pose);
  const int half = params.feature_dim / 2;
  std::vector<double> features(static_cast<std::size_t>(params.feature_dim), 0.0);
  const Vec3& here = env.positions[static_cast<std::size_t>(pose.viewpoint)];

  for (const auto& obj : env.objects) {
    const double d = dist3(here, obj.pos);
    if (d > params.visibility_range) continue;
    const double bearing = std::atan2(obj.pos.x - here.x, obj.pos.y - here.y) * kDeg;
    const double off = wrap180(bearing - 30.0 * pose.heading);
    if (std::abs(off) > params.fov_degrees / 2.0) continue;
    const double w = 1.0 / (1.0 + d);
    Rng emb(derive_seed(hash_str(obj.label), std::uint64_t{0x0b9ec7u}));
    for (int j = 0; j < half; ++j) {
      features[static_cast<std::size_t>(j)] += w * emb.uniform(-1.0, 1.0);
    }
  }
  Rng tex(derive_seed(feature_seed, hash_str(env.viewpoint_ids[static_cast<std::size_t>(pose.viewpoint)]),
                      static_cast<std::uint64_t>(pose.heading)));
  for (int j = half; j < params.feature_dim; ++j) {
    features[static_cast<std::size_t>(j)] = tex.uniform(-1.0, 1.0);
  }
  return features;
}

}  // namespace vnla
