#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vnla {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline double dist3(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Six navigation actions plus the <start> token used only as the t=0
// "previous action" input.
enum class NavAction { left = 0, right, up, down, forward, stop, start };

constexpr int kNavActionCount = 6;  // start is not selectable
constexpr int kHeadingSteps = 12;   // 30-degree increments
constexpr int kElevationMin = -1, kElevationMax = 1;
constexpr double kMaxEdgeLength = 5.0;  // meters

const char* to_string(NavAction a);
NavAction nav_action_from_string(const std::string& s);

struct Pose {
  int viewpoint = 0;   // index into EnvironmentGraph::viewpoint_ids
  int heading = 0;     // [0,12), angle = heading * 30 degrees
  int elevation = 0;   // {-1,0,+1}, angle = elevation * 30 degrees

  bool operator==(const Pose&) const = default;
};

struct EnvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RoomRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct Room {
  std::string id;
  std::string label;
  RoomRect bounds;
};

struct ObjectInstance {
  std::string label;
  Vec3 pos;
  int room = -1;      // index into rooms
  int delegate = -1;  // delegate viewpoint index (closest in same room)
};

// Immutable world graph. Viewpoints are kept sorted by id so that index
// order equals lexicographic id order (tie-breaks rely on this).
struct EnvironmentGraph {
  std::string id;
  std::vector<std::string> viewpoint_ids;
  std::vector<Vec3> positions;
  std::vector<std::pair<int, int>> edges;        // undirected, first < second
  std::vector<std::vector<int>> adjacency;       // sorted neighbor indices
  std::vector<Room> rooms;
  std::vector<int> room_of;                      // per viewpoint
  std::vector<ObjectInstance> objects;

  int num_viewpoints() const { return static_cast<int>(viewpoint_ids.size()); }
  int viewpoint_index(const std::string& vid) const;  // throws EnvError
  int room_index(const std::string& rid) const;
  const std::string& room_label_of(int viewpoint) const;
  void finalize();  // sort by id, rebuild adjacency, validate
};

void validate_environment(const EnvironmentGraph& env);

EnvironmentGraph load_environment(const std::string& path);
void save_environment(const EnvironmentGraph& env, const std::string& path);

// Shortest-path field toward a goal set: geodesic distance per viewpoint and
// the next hop along an optimal path (tie-break: smallest viewpoint id).
// next_hop is -1 at goal viewpoints and unreachable ones.
struct GoalField {
  std::vector<double> dist;
  std::vector<int> next_hop;
};

GoalField compute_goal_field(const EnvironmentGraph& env, const std::vector<int>& goals);

double geodesic_distance(const EnvironmentGraph& env, int viewpoint, const std::vector<int>& goals);

Pose transition(const EnvironmentGraph& env, const Pose& pose, NavAction action,
                const GoalField& field);
Pose transition(const EnvironmentGraph& env, const Pose& pose, NavAction action,
                const std::vector<int>& goals);

// Angular geometry (degrees). Heading 0 faces +y, increasing clockwise, so a
// target due +x sits at horizontal offset +90 from heading 0.
double wrap180(double degrees);
double horizontal_offset_deg(const EnvironmentGraph& env, const Pose& pose, int target);
double vertical_offset_deg(const EnvironmentGraph& env, const Pose& pose, int target);
// Full 3D angle between the gaze direction and the direction to target.
double gaze_angle_deg(const EnvironmentGraph& env, const Pose& pose, int target);

struct ObservationParams {
  int feature_dim = 64;          // split: objects [0,F/2), texture [F/2,F)
  double fov_degrees = 60.0;     // horizontal field of view
  double visibility_range = 10.0;
};

// Synthetic observation: hashed embeddings of visible objects weighted by
// 1/(1+distance) plus a per-(viewpoint,heading) pseudo-random texture block.
// Deterministic in (env, pose, feature_seed). Carries no room-label signal.
std::vector<double> observe(const EnvironmentGraph& env, const Pose& pose,
                            std::uint64_t feature_seed, const ObservationParams& params = {});

}  // namespace vnla
