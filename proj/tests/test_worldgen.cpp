#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "test_util.hpp"
#include "vnla/artifacts.hpp"
#include "vnla/training.hpp"
#include "vnla/worldgen.hpp"

using namespace vnla;
using namespace vnla::testutil;

namespace {

bool same_graph(const EnvironmentGraph& a, const EnvironmentGraph& b) {
  if (a.viewpoint_ids != b.viewpoint_ids || a.edges != b.edges) return false;
  for (int v = 0; v < a.num_viewpoints(); ++v) {
    const auto& pa = a.positions[static_cast<std::size_t>(v)];
    const auto& pb = b.positions[static_cast<std::size_t>(v)];
    if (pa.x != pb.x || pa.y != pb.y || pa.z != pb.z) return false;
  }
  if (a.objects.size() != b.objects.size()) return false;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    if (a.objects[i].label != b.objects[i].label || a.objects[i].delegate != b.objects[i].delegate) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const WorldgenParams params;
  const EnvironmentGraph a = generate_environment(7, "env-x", params);
  const EnvironmentGraph b = generate_environment(7, "env-x", params);
  CHECK(same_graph(a, b));
  const EnvironmentGraph c = generate_environment(8, "env-x", params);
  CHECK(!same_graph(a, c));
}

TEST_CASE("a one-room world is a small connected graph in one room plus hallway") {
  WorldgenParams params;
  params.rooms_min = params.rooms_max = 1;
  params.viewpoints_per_room_min = params.viewpoints_per_room_max = 3;
  const EnvironmentGraph env = generate_environment(3, "tiny", params);
  CHECK(env.rooms.size() == 2);  // hallway + the room
  CHECK(env.num_viewpoints() >= 3);
  // Connectivity over the whole floor is asserted inside the generator; the
  // room itself must hold all its viewpoints.
  int in_room = 0;
  for (int v = 0; v < env.num_viewpoints(); ++v) {
    if (env.rooms[static_cast<std::size_t>(env.room_of[static_cast<std::size_t>(v)])].label !=
        "hallway") {
      ++in_room;
    }
  }
  CHECK(in_room >= 3);
}

TEST_CASE("a hundred seeds worth of edges stay under 5 m and rooms stay stocked") {
  const WorldgenParams params;
  for (int seed = 0; seed < 100; ++seed) {
    const EnvironmentGraph env = generate_environment(seed, "scan", params);
    for (const auto& [a, b] : env.edges) {
      CHECK(dist3(env.positions[static_cast<std::size_t>(a)],
                  env.positions[static_cast<std::size_t>(b)]) <= kMaxEdgeLength);
    }
    std::set<int> rooms_with_objects;
    for (const auto& obj : env.objects) rooms_with_objects.insert(obj.room);
    CHECK(rooms_with_objects.size() == env.rooms.size());
    for (const auto& obj : env.objects) {
      CHECK(env.room_of[static_cast<std::size_t>(obj.delegate)] == obj.room);
    }
  }
}

TEST_CASE("infeasible parameters raise a generation error") {
  WorldgenParams params;
  params.rooms_min = 0;
  params.rooms_max = 0;
  CHECK_THROWS_AS(generate_environment(1, "bad", params), GenerationError);
}

TEST_CASE("end-goal templating") {
  CHECK(make_endgoal("cup", true, std::optional<std::string>("bathroom"), 2) ==
        "find a cup in one of the bathrooms");
  CHECK(make_endgoal("towel", true, std::optional<std::string>("kitchen"), 1) ==
        "find a towel in the kitchen");
  CHECK(make_endgoal("pillow", true, std::nullopt, 0) == "find a pillow");
  CHECK(make_endgoal("apple", true, std::nullopt, 0) == "find an apple");
  CHECK(make_endgoal("towels", false, std::optional<std::string>("kitchen"), 1) ==
        "find towels in the kitchen");
  CHECK_THROWS_AS(make_endgoal("", true, std::nullopt, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_endgoal("cup", true, std::optional<std::string>("bathroom"), 0),
                  std::invalid_argument);
}

TEST_CASE("pluralize") {
  CHECK(pluralize("bathroom") == "bathrooms");
  CHECK(pluralize("bench") == "benches");
  CHECK(pluralize("shelf") == "shelves");
  CHECK(pluralize("pantry") == "pantries");
  CHECK(pluralize("box") == "boxes");
  CHECK(pluralize("sheep") == "sheep");
  // Idempotent on the plurals it knows.
  CHECK(pluralize("shelves") == "shelves");
  CHECK(pluralize("children") == "children");
}

namespace {

struct Corpus {
  std::vector<EnvironmentGraph> envs;
  std::vector<const EnvironmentGraph*> ptrs;
  std::vector<bool> heldout;
  std::map<std::string, const EnvironmentGraph*> by_id;
};

Corpus make_corpus(int train, int held, std::uint64_t seed = 40) {
  Corpus c;
  const WorldgenParams params;
  for (int i = 0; i < train + held; ++i) {
    c.envs.push_back(generate_environment(seed, "env-" + std::to_string(i), params));
  }
  for (int i = 0; i < train + held; ++i) {
    c.ptrs.push_back(&c.envs[static_cast<std::size_t>(i)]);
    c.heldout.push_back(i >= train);
    c.by_id[c.envs[static_cast<std::size_t>(i)].id] = c.ptrs.back();
  }
  return c;
}

}  // namespace

TEST_CASE("generated datasets satisfy the documented filters") {
  Corpus corpus = make_corpus(4, 2);
  DatagenParams params;
  params.eval_split_target = 30;
  Rng rng(7);
  DatagenCounts counts;
  const DatasetSplits splits = generate_dataset(corpus.ptrs, corpus.heldout, params, rng, &counts);

  std::set<std::string> train_envs;
  for (const auto& dp : splits.train) train_envs.insert(dp.env_id);

  for (const auto& name : DatasetSplits::split_names()) {
    for (const auto& dp : splits.split(name)) {
      CAPTURE(name);
      const EnvironmentGraph& env = *corpus.by_id.at(dp.env_id);
      CHECK(dp.path_len >= 5);
      CHECK(dp.path_len <= 25);
      CHECK(dp.start.elevation == 0);
      CHECK(!dp.goal_viewpoints.empty());
      // Start never adjacent to (or on) a goal viewpoint.
      const auto& adj = env.adjacency[static_cast<std::size_t>(dp.start.viewpoint)];
      for (int g : dp.goal_viewpoints) {
        CHECK(g != dp.start.viewpoint);
        CHECK(std::find(adj.begin(), adj.end(), g) == adj.end());
      }
      // Reported path length matches a fresh teacher rollout.
      const GoalField field = compute_goal_field(env, dp.goal_viewpoints);
      CHECK(teacher_path_length(env, dp.start, field) == dp.path_len);
      // Goal viewpoints are exactly the surviving delegates of the bucket.
      std::set<int> delegates;
      for (const auto& obj : env.objects) {
        if (obj.label != dp.object_label) continue;
        if (dp.room_label &&
            env.rooms[static_cast<std::size_t>(obj.room)].label != *dp.room_label) {
          continue;
        }
        delegates.insert(obj.delegate);
      }
      CHECK(std::set<int>(dp.goal_viewpoints.begin(), dp.goal_viewpoints.end()) == delegates);
    }
  }
  // Seen splits only reference training-set environments.
  for (const auto& dp : splits.dev_seen) CHECK(train_envs.count(dp.env_id) == 1);
  for (const auto& dp : splits.test_seen) CHECK(train_envs.count(dp.env_id) == 1);
  // Unseen splits only reference held-out environments.
  for (const auto& dp : splits.dev_unseen) CHECK(corpus.by_id.at(dp.env_id) != nullptr);
  for (const auto& dp : splits.dev_unseen) {
    CHECK(dp.env_id.substr(4) >= "4");  // env-4, env-5 are held out
  }
}

TEST_CASE("noroom datasets drop room clauses and widen start sampling") {
  Corpus corpus = make_corpus(3, 1);
  DatagenParams params;
  params.mode = DatasetMode::noroom;
  params.eval_split_target = 20;
  Rng rng(7);
  const DatasetSplits splits = generate_dataset(corpus.ptrs, corpus.heldout, params, rng);
  REQUIRE(!splits.train.empty());
  for (const auto& dp : splits.train) {
    CHECK(!dp.room_label.has_value());
    CHECK(dp.end_goal.find(" in ") == std::string::npos);
    CHECK(dp.end_goal.rfind("find ", 0) == 0);
  }
}

TEST_CASE("objects outside their room bounds are discarded from buckets") {
  EnvironmentGraph env = line_env({2.0, 2.0, 2.0, 2.0, 2.0, 2.0});
  env.objects.clear();
  env.objects.push_back({"cup", {0.0, 12.0, 0.0}, 0, -1});   // inside
  env.objects.push_back({"cup", {0.0, 200.0, 0.0}, 0, -1});  // outside the room rect
  env.finalize();
  DatagenParams params;
  params.eval_split_target = 0;
  Rng rng(1);
  DatagenCounts counts;
  const std::vector<const EnvironmentGraph*> envs{&env};
  const DatasetSplits splits = generate_dataset(envs, {false}, params, rng, &counts);
  CHECK(counts.discarded_objects_out_of_room == 1);
  for (const auto& dp : splits.train) {
    CHECK(dp.goal_viewpoints == std::vector<int>{6});  // delegate of the inside cup only
  }
}

TEST_CASE("bucket sampling draws at most N per bucket and stops when exhausted") {
  // One bucket of 30 points, N = 10, target 5000: exactly 10 points emerge,
  // then the pool is empty and the 20 leftovers sit in the residual.
  DatasetBucket bucket;
  bucket.env_index = 0;
  bucket.object_label = "cup";
  for (int i = 0; i < 30; ++i) {
    DataPoint dp;
    dp.env_id = "env-0";
    dp.start = {i, 0, 0};
    dp.goal_viewpoints = {99};
    dp.object_label = "cup";
    dp.path_len = 10;
    bucket.points.push_back(dp);
  }
  std::vector<DatasetBucket> pool{bucket};
  std::vector<DatasetBucket> residual;
  Rng rng(5);
  const auto drawn = sample_evaluation_split(pool, 10, 5000, rng, residual);
  CHECK(drawn.size() == 10);
  CHECK(pool.empty());
  REQUIRE(residual.size() == 1);
  CHECK(residual[0].points.size() == 20);
  // Drawn and residual points partition the bucket.
  std::set<int> seen;
  for (const auto& dp : drawn) seen.insert(dp.start.viewpoint);
  for (const auto& dp : residual[0].points) seen.insert(dp.start.viewpoint);
  CHECK(seen.size() == 30);
}

TEST_CASE("bucket sampling visits each environment once per round") {
  // Two buckets in one environment plus one in another: the first round can
  // only draw from one bucket per environment.
  std::vector<DatasetBucket> pool;
  for (int b = 0; b < 3; ++b) {
    DatasetBucket bucket;
    bucket.env_index = b == 2 ? 1 : 0;
    bucket.object_label = "obj" + std::to_string(b);
    for (int i = 0; i < 4; ++i) {
      DataPoint dp;
      dp.env_id = "env-" + std::to_string(bucket.env_index);
      dp.object_label = bucket.object_label;
      dp.start = {i, 0, 0};
      bucket.points.push_back(dp);
    }
    pool.push_back(bucket);
  }
  std::vector<DatasetBucket> residual;
  Rng rng(6);
  // Target 8 = exactly two buckets' worth: round one draws one env-0 bucket
  // and the env-1 bucket; the second env-0 bucket survives to the residual.
  const auto drawn = sample_evaluation_split(pool, 4, 8, rng, residual);
  CHECK(drawn.size() == 8);
  int env1 = 0;
  for (const auto& dp : drawn) env1 += dp.env_id == "env-1" ? 1 : 0;
  CHECK(env1 == 4);
  REQUIRE(residual.size() == 1);
  CHECK(residual[0].env_index == 0);
}

TEST_CASE("dataset stats recount the splits") {
  Corpus corpus = make_corpus(3, 1);
  DatagenParams params;
  params.eval_split_target = 15;
  Rng rng(9);
  const DatasetSplits splits = generate_dataset(corpus.ptrs, corpus.heldout, params, rng);
  const StatsReport stats = dataset_stats(splits, corpus.by_id);
  int total = 0;
  for (const auto& name : DatasetSplits::split_names()) {
    CHECK(stats.split_sizes.at(name) == static_cast<int>(splits.split(name).size()));
    total += static_cast<int>(splits.split(name).size());
  }
  CHECK(stats.total == total);
  int object_total = 0;
  for (const auto& [label, count] : stats.object_counts) object_total += count;
  CHECK(object_total == total);
  for (const auto& [len, count] : stats.path_length_hist) {
    CHECK(len >= 5);
    CHECK(len <= 25);
    CHECK(count > 0);
  }

  const DatasetSplits empty;
  const StatsReport zero = dataset_stats(empty, corpus.by_id);
  CHECK(zero.total == 0);
  CHECK(zero.object_counts.empty());
}

TEST_CASE("datasets serialize byte-identically and round trip") {
  Corpus corpus = make_corpus(3, 1);
  DatagenParams params;
  params.eval_split_target = 15;

  Rng rng1(11), rng2(11);
  const DatasetSplits a = generate_dataset(corpus.ptrs, corpus.heldout, params, rng1);
  const DatasetSplits b = generate_dataset(corpus.ptrs, corpus.heldout, params, rng2);

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "vnla_dataset_det";
  fs::create_directories(dir);
  save_datapoints(a.train, corpus.by_id, (dir / "a.jsonl").string());
  save_datapoints(b.train, corpus.by_id, (dir / "b.jsonl").string());
  std::ifstream fa(dir / "a.jsonl"), fb(dir / "b.jsonl");
  const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());

  const auto loaded = load_datapoints((dir / "a.jsonl").string(), corpus.by_id);
  REQUIRE(loaded.size() == a.train.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].env_id == a.train[i].env_id);
    CHECK(loaded[i].start == a.train[i].start);
    CHECK(loaded[i].goal_viewpoints == a.train[i].goal_viewpoints);
    CHECK(loaded[i].end_goal == a.train[i].end_goal);
    CHECK(loaded[i].room_label == a.train[i].room_label);
    CHECK(loaded[i].path_len == a.train[i].path_len);
  }
  fs::remove_all(dir);
}
