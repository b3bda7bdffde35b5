#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/data/envs.hpp"
#include "hetplan/data/scene_gen.hpp"
#include "hetplan/expert/planner.hpp"
#include "hetplan/graph/het_graph.hpp"
#include "hetplan/perception/task_view.hpp"
#include "hetplan/sim/scene_io.hpp"

namespace hetplan::data {

inline constexpr const char* kTaskSchema = "hetplan.task";
inline constexpr int kTaskVersion = 1;
inline constexpr const char* kManifestSchema = "hetplan.dataset";
inline constexpr int kManifestVersion = 1;
// File layout: 8-byte magic, 1 status byte ('P' while writing, 'C' once
// finished), then records as u64 little-endian length + JSON bytes.
inline constexpr char kDatasetMagic[8] = {'H', 'P', 'D', 'S', 'E', 'T', '0', '1'};
inline constexpr char kPartial = 'P';
inline constexpr char kComplete = 'C';
inline constexpr int kTaskAttempts = 200;

struct TaskMeta {
  std::uint64_t seed = 0;
  int n = 0;
  std::string env;
  std::size_t index = 0;
};

/// One labelled task. scene.current holds the start poses, scene.goals the
/// goal poses. The graph is stored without node features: shape codes need
/// the encoder, which is trained after the data exists.
struct TaskRecord {
  sim::SceneState scene;
  graph::HetTaskGraph graph;
  std::vector<int> action_labels;
  std::vector<int> first_labels;
  int expert_cost = 0;
  bool solved = false;
  TaskMeta meta;

  sim::SceneState start() const { return {scene.workspace, scene.current, scene.current, scene.tau}; }
  sim::SceneState goal() const { return {scene.workspace, scene.goals, scene.goals, scene.tau}; }
};

/// Pairs the scenes, runs the expert and records its labels. InvalidTask
/// and PlannerExhausted propagate.
inline TaskRecord make_task(const sim::SceneState& scene_a, const sim::SceneState& scene_b, TaskMeta meta = {}) {
  TaskRecord r;
  r.scene = pair_scenes(scene_a, scene_b);
  const expert::ExpertPlan plan = expert::astar_plan(r.scene);
  r.graph = perception::perceive_task(r.scene, nullptr).graph;
  r.action_labels = plan.action_labels;
  r.first_labels = plan.first_labels;
  r.expert_cost = plan.total_cost;
  r.solved = plan.solved;
  if (meta.n == 0) meta.n = static_cast<int>(r.scene.size());
  if (meta.env.empty()) meta.env = r.scene.workspace->name();
  r.meta = std::move(meta);
  return r;
}

inline nlohmann::json objects_json(const std::vector<sim::ObjectInstance>& objs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& o : objs) a.push_back(sim::to_json(o));
  return a;
}

inline nlohmann::json to_json(const TaskRecord& r) {
  return {{"schema", kTaskSchema},
          {"version", kTaskVersion},
          {"meta", {{"index", r.meta.index}, {"seed", r.meta.seed}, {"n", r.meta.n}, {"env", r.meta.env}}},
          {"tau", r.scene.tau},
          {"start", objects_json(r.scene.current)},
          {"goal", objects_json(r.scene.goals)},
          {"graph", graph::to_json(r.graph, false)},
          {"action_labels", r.action_labels},
          {"first_labels", r.first_labels},
          {"expert_cost", r.expert_cost},
          {"solved", r.solved}};
}

/// Workspaces are resolved by template name and shared between records.
class EnvCache {
 public:
  std::shared_ptr<const sim::Workspace> get(const std::string& name) {
    std::lock_guard lock(mu_);
    auto it = envs_.find(name);
    if (it != envs_.end()) return it->second;
    return envs_.emplace(name, load_env(name)).first->second;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const sim::Workspace>> envs_;
};

inline TaskRecord record_from_json(const nlohmann::json& j, EnvCache& envs) {
  try {
    if (j.value("schema", std::string()) != kTaskSchema) throw FormatError("not a task record");
    if (j.at("version").get<int>() != kTaskVersion) throw FormatError("unsupported task version");
    TaskRecord r;
    const auto& m = j.at("meta");
    r.meta = {m.at("seed").get<std::uint64_t>(), m.at("n").get<int>(), m.at("env").get<std::string>(),
              m.at("index").get<std::size_t>()};
    r.scene.workspace = envs.get(r.meta.env);
    r.scene.tau = j.at("tau").get<double>();
    for (const auto& o : j.at("start")) r.scene.current.push_back(sim::object_from_json(o));
    for (const auto& o : j.at("goal")) r.scene.goals.push_back(sim::object_from_json(o));
    sim::validate_scene(r.scene);
    r.graph = graph::graph_from_json(j.at("graph"));
    r.action_labels = j.at("action_labels").get<std::vector<int>>();
    r.first_labels = j.at("first_labels").get<std::vector<int>>();
    r.expert_cost = j.at("expert_cost").get<int>();
    r.solved = j.at("solved").get<bool>();
    if (r.action_labels.size() != r.scene.size() || r.first_labels.size() != r.scene.size())
      throw FormatError("label count does not match object count");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("task record: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("task record: ") + e.what());
  }
}

/// Append-only record file. The status byte stays 'P' until finish(), so
/// an interrupted run leaves a file readers refuse.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& path) : path_(path), f_(path, std::ios::binary | std::ios::trunc) {
    if (!f_) throw Error("cannot create dataset '" + path + "'");
    f_.write(kDatasetMagic, sizeof(kDatasetMagic));
    f_.put(kPartial);
    check();
  }

  void append(const std::string& json_text) {
    const std::uint64_t n = json_text.size();
    char len[8];
    std::memcpy(len, &n, 8);
    f_.write(len, 8);
    f_.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
    check();
  }

  void append(const TaskRecord& r) { append(to_json(r).dump()); }

  void finish() {
    f_.seekp(sizeof(kDatasetMagic));
    f_.put(kComplete);
    f_.close();
    if (!f_) throw Error("failed to finalize dataset '" + path_ + "'");
  }

 private:
  void check() {
    if (!f_) throw Error("write failed on dataset '" + path_ + "'");
  }
  std::string path_;
  std::ofstream f_;
};

inline std::vector<std::string> read_record_texts(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open dataset '" + path + "'");
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kDatasetMagic, 8) != 0) throw FormatError("'" + path + "' is not a dataset file");
  const int status = f.get();
  if (status == kPartial) throw FormatError("dataset '" + path + "' is partial (generation did not finish)");
  if (status != kComplete) throw FormatError("dataset '" + path + "' has a corrupt header");
  std::vector<std::string> out;
  char len[8];
  while (f.read(len, 8)) {
    std::uint64_t n;
    std::memcpy(&n, len, 8);
    std::string text(n, '\0');
    if (!f.read(text.data(), static_cast<std::streamsize>(n))) throw FormatError("dataset '" + path + "' is truncated");
    out.push_back(std::move(text));
  }
  if (f.gcount() != 0) throw FormatError("dataset '" + path + "' is truncated");
  return out;
}

inline std::vector<TaskRecord> read_dataset(const std::string& path) {
  EnvCache envs;
  std::vector<TaskRecord> out;
  for (const auto& text : read_record_texts(path)) {
    try {
      out.push_back(record_from_json(nlohmann::json::parse(text), envs));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("dataset record: ") + e.what());
    }
  }
  return out;
}

inline std::string manifest_path(const std::string& dataset_path) { return dataset_path + ".manifest.json"; }

struct GenOptions {
  std::size_t count = 5000;
  std::vector<std::string> envs = training_envs();
  std::uint64_t seed = 1;
  int min_objects = 3;
  int max_objects = 5;
  SceneOptions scene;
  unsigned threads = 1;
};

struct GenResult {
  std::vector<TaskRecord> records;
  nlohmann::json manifest;
};

/// Worker count from HETPLAN_THREADS, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* v = std::getenv("HETPLAN_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

struct Rejections {
  std::size_t crowded = 0, invalid = 0, solved = 0, exhausted = 0;
};

/// Record `index` depends only on (seed, index): environment by round
/// robin, object count and scenes from derived seeds.
inline TaskRecord generate_one(const GenOptions& opt, std::size_t index, EnvCache& envs, Rejections& rej) {
  const std::string& env = opt.envs[index % opt.envs.size()];
  const auto ws = envs.get(env);
  const std::uint64_t base = mix_seed(opt.seed, index);
  const int span = opt.max_objects - opt.min_objects + 1;
  const int n = opt.min_objects + static_cast<int>(base % static_cast<std::uint64_t>(span));
  for (int a = 0; a < kTaskAttempts; ++a) {
    const std::uint64_t s = mix_seed(base, static_cast<std::uint64_t>(a));
    try {
      const sim::SceneState pair = sample_pair(ws, n, s, opt.scene);
      sim::SceneState goal_scene{pair.workspace, pair.goals, pair.goals, pair.tau};
      TaskRecord r = make_task(pair, goal_scene, {s, n, env, index});
      if (r.solved) {
        ++rej.solved;
        continue;
      }
      return r;
    } catch (const SceneTooCrowded&) {
      ++rej.crowded;
    } catch (const InvalidTask&) {
      ++rej.invalid;
    } catch (const PlannerExhausted&) {
      ++rej.exhausted;
    }
  }
  throw SceneTooCrowded("no valid task for record " + std::to_string(index) + " in '" + env + "'");
}

}  // namespace detail

inline GenResult generate_tasks(const GenOptions& opt) {
  if (opt.count == 0) throw DomainError("dataset count must be at least 1");
  if (opt.envs.empty()) throw DomainError("dataset needs at least one environment");
  if (opt.min_objects < 1 || opt.max_objects < opt.min_objects) throw DomainError("bad object count range");
  GenResult res;
  res.records.resize(opt.count);
  EnvCache envs;
  for (const auto& e : opt.envs) envs.get(e);
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(opt.count)));
  std::vector<detail::Rejections> rej(threads);
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < opt.count; i += threads) res.records[i] = detail::generate_one(opt, i, envs, rej[t]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  detail::Rejections total;
  for (const auto& r : rej) {
    total.crowded += r.crowded, total.invalid += r.invalid;
    total.solved += r.solved, total.exhausted += r.exhausted;
  }
  std::map<std::string, std::size_t> per_env;
  std::size_t labels = 0, pushes = 0;
  for (const auto& r : res.records) {
    ++per_env[r.meta.env];
    labels += r.action_labels.size();
    pushes += static_cast<std::size_t>(std::count(r.action_labels.begin(), r.action_labels.end(), 1));
  }
  res.manifest = {{"schema", kManifestSchema},
                  {"version", kManifestVersion},
                  {"record_schema", kTaskSchema},
                  {"record_version", kTaskVersion},
                  {"seed", opt.seed},
                  {"count", opt.count},
                  {"envs", per_env},
                  {"objects_per_task", {opt.min_objects, opt.max_objects}},
                  {"ungraspable_ratio", opt.scene.ungraspable_ratio},
                  {"tau", opt.scene.tau},
                  {"shape_sizes_cm", {{"graspable", {3, 7}}, {"ungraspable", {10, 16}}}},
                  {"push_label_fraction", labels ? static_cast<double>(pushes) / static_cast<double>(labels) : 0.0},
                  {"rejected",
                   {{"crowded", total.crowded},
                    {"invalid", total.invalid},
                    {"solved", total.solved},
                    {"planner_exhausted", total.exhausted}}}};
  return res;
}

/// Writes the record file and its manifest; returns the manifest.
inline nlohmann::json gen_dataset(const GenOptions& opt, const std::string& out_path) {
  GenResult res = generate_tasks(opt);
  DatasetWriter w(out_path);
  for (const auto& r : res.records) w.append(r);
  w.finish();
  res.manifest["records_file"] = std::filesystem::path(out_path).filename().string();
  sim::write_text(manifest_path(out_path), res.manifest.dump(2) + "\n");
  return res.manifest;
}

}  // namespace hetplan::data
