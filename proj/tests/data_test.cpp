#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "hetplan/data/dataset.hpp"

using namespace hetplan;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hetplan_data_test_" + name)).string();
}

std::string bytes_of(const std::string& path) { return sim::read_text(path); }

}  // namespace

TEST(SampleScene, DeterministicPerSeed) {
  const auto ws = data::load_env("tabletop");
  const auto a = data::sample_scene(ws, 5, 7), b = data::sample_scene(ws, 5, 7);
  EXPECT_EQ(sim::dump_scene(a), sim::dump_scene(b));
  EXPECT_NE(sim::dump_scene(a), sim::dump_scene(data::sample_scene(ws, 5, 8)));
}

TEST(SampleScene, ShelfUsesEveryLevel) {
  const auto ws = data::load_env("shelf");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = data::sample_scene(ws, 6, seed);
    std::set<int> levels;
    for (const auto& o : s.current) levels.insert(o.pose.level);
    EXPECT_EQ(levels, (std::set<int>{0, 1})) << "seed " << seed;
  }
}

TEST(SampleScene, OvercrowdedThrows) {
  EXPECT_THROW(data::sample_scene(data::load_env("tabletop"), 200, 1), SceneTooCrowded);
  EXPECT_THROW(data::sample_scene(data::load_env("tabletop"), 0, 1), DomainError);
}

TEST(MakeTask, IdenticalScenesAreSolved) {
  const auto s = data::sample_scene(data::load_env("bins"), 4, 3);
  const auto r = data::make_task(s, s);
  EXPECT_TRUE(r.solved);
  EXPECT_EQ(r.first_labels, std::vector<int>(4, 0));
}

TEST(MakeTask, LabelsAndGraphReproduce) {
  const auto ws = data::load_env("shelf");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pair = data::sample_pair(ws, 4, seed);
    const sim::SceneState goal{ws, pair.goals, pair.goals, pair.tau};
    data::TaskRecord r;
    try {
      r = data::make_task(pair, goal);
    } catch (const InvalidTask&) {
      continue;
    } catch (const PlannerExhausted&) {
      continue;
    }
    if (r.solved) continue;
    EXPECT_EQ(std::count(r.first_labels.begin(), r.first_labels.end(), 1), 1);
    const auto g = perception::perceive_task(r.scene, nullptr).graph;
    EXPECT_EQ(g.edges, r.graph.edges);
    EXPECT_EQ(g.types, r.graph.types);
    EXPECT_EQ(g.handles, r.graph.handles);

    data::EnvCache envs;
    const auto back = data::record_from_json(nlohmann::json::parse(data::to_json(r).dump()), envs);
    EXPECT_EQ(back.action_labels, r.action_labels);
    EXPECT_EQ(back.first_labels, r.first_labels);
    EXPECT_EQ(back.graph.edges, r.graph.edges);
    EXPECT_EQ(sim::dump_scene(back.scene), sim::dump_scene(r.scene));
  }
}

TEST(MakeTask, InvalidTaskPropagates) {
  const auto ws = data::load_env("shelf");
  sim::ObjectInstance big{"big", sim::ShapeKind::block, 12, 12, 5, {10, 10, 0}};
  sim::SceneState a{ws, {big}, {big}, sim::kDefaultTau};
  sim::SceneState b = a;
  b.current[0].pose = {10, 33, 1};
  EXPECT_THROW(data::make_task(a, b), InvalidTask);
}

TEST(GenDataset, ByteIdenticalAndConsistent) {
  data::GenOptions opt;
  opt.count = 100;
  opt.seed = 1;
  const std::string p1 = tmp_path("a.bin"), p2 = tmp_path("b.bin");
  const auto m1 = data::gen_dataset(opt, p1);
  opt.threads = 3;
  data::gen_dataset(opt, p2);
  EXPECT_EQ(bytes_of(p1), bytes_of(p2));
  EXPECT_EQ(bytes_of(data::manifest_path(p1)).size(), bytes_of(data::manifest_path(p2)).size());

  std::size_t sum = 0;
  for (const auto& [env, n] : m1["envs"].items()) sum += n.get<std::size_t>();
  EXPECT_EQ(sum, 100u);
  const double push = m1["push_label_fraction"];
  EXPECT_GE(push, 0.2);
  EXPECT_LE(push, 0.8);

  const auto recs = data::read_dataset(p1);
  ASSERT_EQ(recs.size(), 100u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    EXPECT_EQ(r.meta.index, i);
    EXPECT_FALSE(r.solved);
    EXPECT_GE(r.meta.n, 3);
    EXPECT_LE(r.meta.n, 5);
    EXPECT_EQ(std::count(r.first_labels.begin(), r.first_labels.end(), 1), 1);
  }
  // Labels re-derive from the stored scenes.
  for (std::size_t i = 0; i < recs.size(); i += 10) {
    const auto plan = expert::astar_plan(recs[i].scene);
    EXPECT_EQ(plan.action_labels, recs[i].action_labels);
    EXPECT_EQ(plan.first_labels, recs[i].first_labels);
    EXPECT_EQ(plan.total_cost, recs[i].expert_cost);
  }
  // The stored seed regenerates the pair.
  const auto& r0 = recs[0];
  const auto again = data::sample_pair(data::load_env(r0.meta.env), r0.meta.n, r0.meta.seed);
  EXPECT_EQ(sim::dump_scene(again), sim::dump_scene(r0.scene));
  std::filesystem::remove(p1), std::filesystem::remove(p2);
  std::filesystem::remove(data::manifest_path(p1)), std::filesystem::remove(data::manifest_path(p2));
}

TEST(GenDataset, PartialAndTruncatedFilesAreRejected) {
  const std::string p = tmp_path("partial.bin");
  {
    data::DatasetWriter w(p);
    w.append(std::string("{}"));
  }
  EXPECT_THROW(data::read_dataset(p), FormatError);
  {
    data::DatasetWriter w(p);
    w.append(std::string("{\"x\":1}"));
    w.finish();
  }
  EXPECT_EQ(data::read_record_texts(p).size(), 1u);
  std::string bytes = bytes_of(p);
  sim::write_text(p, bytes.substr(0, bytes.size() - 2));
  EXPECT_THROW(data::read_record_texts(p), FormatError);
  sim::write_text(p, "garbage");
  EXPECT_THROW(data::read_record_texts(p), FormatError);
  std::filesystem::remove(p);
}

TEST(GenDataset, RejectsBadOptions) {
  data::GenOptions opt;
  opt.count = 0;
  EXPECT_THROW(data::generate_tasks(opt), DomainError);
  opt.count = 1;
  opt.envs = {"no_such_env"};
  EXPECT_THROW(data::generate_tasks(opt), FormatError);
}
