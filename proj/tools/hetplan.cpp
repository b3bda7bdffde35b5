// hetplan: data generation, encoder pretraining, coordinator training,
// evaluation, single-task planning and scene inspection.

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hetplan/hetplan.hpp"

using namespace hetplan;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- gen-data

struct GenArgs {
  std::size_t count = 5000;
  std::string envs = "tabletop,shelf,bins";
  std::uint64_t seed = 1;
  int min_objects = 3, max_objects = 5;
  std::string out;
};

int run_gen(const GenArgs& a) {
  data::GenOptions opt;
  opt.count = a.count;
  opt.envs = split_list(a.envs);
  opt.seed = a.seed;
  opt.min_objects = a.min_objects;
  opt.max_objects = a.max_objects;
  opt.threads = data::default_threads();
  const auto manifest = data::gen_dataset(opt, a.out);
  std::cout << "wrote " << a.count << " tasks to " << a.out << "\n" << manifest.dump(2) << "\n";
  return 0;
}

// ---- pretrain

struct PretrainArgs {
  std::string out;
  std::size_t grids = train::kDefaultPretrainGrids;
  std::size_t epochs = 3, batch = 8, channels = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::string envs = "tabletop,shelf,bins";
};

int run_pretrain(const PretrainArgs& a) {
  train::PretrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch = a.batch;
  opt.lr = a.lr;
  opt.seed = a.seed;
  opt.encoder.channels = a.channels;
  opt.divergence_checkpoint = a.out + ".diverged";
  const auto grids = train::pretraining_grids(a.grids, a.seed, split_list(a.envs));
  const auto res = train::pretrain_encoder(grids, opt);
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
    std::cout << "epoch " << e + 1 << " reconstruction " << res.epoch_loss[e] << "\n";
  std::cout << "mse " << res.initial_loss << " -> " << res.final_loss << "\n";
  train::save_encoder(a.out, res.encoder, train::pretrain_info(opt, res, grids.size()));
  std::cout << "wrote encoder to " << a.out << "\n";
  return 0;
}

// ---- train

struct TrainArgs {
  std::string data, out, encoder, log;
  train::TrainOptions opt;
};

int run_train(TrainArgs a) {
  const auto records = data::read_dataset(a.data);
  perception::ShapeEncoder enc;
  nlohmann::json info = nlohmann::json::object();
  if (a.encoder.empty()) {
    std::cout << "no --encoder given; pretraining one (seed " << a.opt.seed << ")\n";
    train::PretrainOptions po;
    auto res = train::default_encoder(a.opt.seed, po);
    po.seed = a.opt.seed;
    info["pretraining"] = train::pretrain_info(po, res, train::kDefaultPretrainGrids);
    enc = std::move(res.encoder);
  } else {
    enc = train::load_encoder(a.encoder);
  }
  a.opt.divergence_checkpoint = a.out + ".diverged";
  auto r = train::train_bundle(records, enc, a.opt, info);
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  sim::write_text(log_path, train::log_csv(r.log));
  for (const auto& e : r.log)
    std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val_top1 " << e.val_object_top1 << " val_action "
              << e.val_action_acc << "\n";
  coord::save_bundle(a.out, r.bundle);
  std::cout << "wrote " << (a.opt.tied ? "tied " : "") << "coordinator to " << a.out << " (log " << log_path << ")\n";
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string suite, policies = "ours,model,plan,expert", model, gnn_model, out = "metrics.csv", episodes;
  std::uint64_t seed = 1;
  std::size_t runs = 1;
  bool jitter = false;
  double noise = 0.0;
};

std::unique_ptr<eval::Agent> load_agent(const std::string& path, bool want_tied) {
  if (path.empty()) return nullptr;
  auto b = coord::load_bundle(path);
  if (b.model.config().tied != want_tied)
    throw DomainError("'" + path + "' is " + (want_tied ? "not a tied" : "a tied") + " coordinator");
  return std::make_unique<eval::Agent>(std::move(b));
}

int run_eval(const EvalArgs& a) {
  std::vector<eval::Policy> policies;
  for (const auto& p : split_list(a.policies)) policies.push_back(eval::policy_from_string(p));
  const auto suite = eval::load_suite(a.suite);
  const auto ours = load_agent(a.model, false);
  const auto gnn = load_agent(a.gnn_model, true);
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < a.runs; ++k) seeds.push_back(a.seed + k);
  eval::RolloutOptions base;
  base.jitter = a.jitter;
  base.perception.descriptor_noise = a.noise;
  const auto rep = eval::evaluate(suite, policies, seeds, {ours.get(), gnn.get()}, base);
  sim::write_text(a.out, eval::metrics_csv(rep.rows));
  if (!a.episodes.empty()) {
    std::ostringstream os;
    os << "policy,task,seed,env,n_objects,success,cost,steps,failure\n";
    for (const auto& e : rep.episodes)
      os << to_string(e.policy) << ',' << e.task << ',' << e.seed << ',' << e.env << ',' << e.n_objects << ','
         << e.success << ',' << e.cost << ',' << e.steps << ',' << to_string(e.failure) << '\n';
    sim::write_text(a.episodes, os.str());
  }
  std::cout << std::left << std::setw(8) << "policy" << std::setw(10) << "episodes" << std::setw(10) << "success"
            << std::setw(10) << "cost" << "steps\n";
  for (auto p : policies) {
    const auto& r = rep.overall(p);
    std::cout << std::setw(8) << r.policy << std::setw(10) << r.episodes << std::setw(10)
              << eval::format_double(r.success_rate).substr(0, 6) << std::setw(10)
              << eval::format_double(r.mean_cost).substr(0, 6) << eval::format_double(r.mean_steps).substr(0, 6) << "\n";
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---- plan

struct PlanArgs {
  std::string start, goal, model, policy = "ours";
  std::uint64_t seed = 1;
  bool jitter = false;
};

int run_plan(const PlanArgs& a) {
  const sim::SceneState task = data::pair_scenes(sim::load_scene(a.start), sim::load_scene(a.goal));
  const eval::Policy policy = eval::policy_from_string(a.policy);
  std::unique_ptr<eval::Agent> agent;
  if (!a.model.empty()) agent = load_agent(a.model, policy == eval::Policy::gnn);
  eval::RolloutOptions opt;
  opt.seed = a.seed;
  opt.jitter = a.jitter;
  const auto ep = eval::rollout(task, policy, {agent.get(), agent.get()}, opt);

  std::cout << "task: " << task.size() << " objects in '" << task.workspace->name() << "', policy " << a.policy
            << "\n";
  std::cout << std::fixed << std::setprecision(2);
  for (std::size_t k = 0; k < ep.primitives.size(); ++k) {
    const auto& s = ep.primitives[k];
    std::cout << "step " << s.step + 1 << ": ";
    if (k < ep.decisions.size()) {
      const auto& d = ep.decisions[k];
      std::cout << "p_o=" << d.p_object[d.target] << " p_a=" << d.p_action[d.target] << " ";
    }
    std::cout << to_string(s.primitive) << ' ' << s.object << (s.buffer ? " (buffer)" : "") << " -> (" << s.target.x
              << ", " << s.target.y << ") level " << s.target.level << "  " << to_string(s.status) << "  cost "
              << s.cost << "\n";
  }
  if (ep.success)
    std::cout << "SUCCESS total cost " << ep.total_cost << " in " << ep.steps << " steps\n";
  else
    std::cout << "FAILURE (" << to_string(ep.failure_kind) << ") total cost " << ep.total_cost << " in " << ep.steps
              << " steps\n";
  return 0;
}

// ---- inspect

void render(std::ostream& os, const sim::Workspace& ws, const std::vector<sim::ObjectInstance>& objs) {
  std::vector<char> grid(static_cast<std::size_t>(ws.width() * ws.depth()));
  for (int y = 0; y < ws.depth(); ++y)
    for (int x = 0; x < ws.width(); ++x) {
      const int l = ws.level_at(x, y);
      grid[ws.index(x, y)] = ws.impassable(x, y) ? '#' : l == 0 ? '.' : static_cast<char>('0' + std::min(l, 9));
    }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const sim::Rect r = sim::footprint_cells(objs[i]);
    const char c = static_cast<char>((sim::is_graspable(objs[i], ws) ? 'a' : 'A') + static_cast<int>(i % 26));
    for (int y = std::max(0, r.y0); y < std::min(ws.depth(), r.y1); ++y)
      for (int x = std::max(0, r.x0); x < std::min(ws.width(), r.x1); ++x) grid[ws.index(x, y)] = c;
  }
  for (int y = ws.depth() - 1; y >= 0; --y) {
    for (int x = 0; x < ws.width(); ++x) os << grid[ws.index(x, y)];
    os << '\n';
  }
}

struct InspectArgs {
  std::string scene;
  bool goals = false;
  std::uint64_t seed = 1;
};

int run_inspect(const InspectArgs& a) {
  const sim::SceneState s = sim::load_scene(a.scene);
  const sim::Workspace& ws = *s.workspace;
  std::cout << ws.name() << ": " << ws.width() << " x " << ws.depth() << " cells of " << ws.cell_size()
            << " cm, levels 0-" << ws.max_level() << " ('.' floor, digits raised, '#' wall)\n";
  render(std::cout, ws, s.current);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& o = s.current[i];
    const bool grasp = sim::is_graspable(o, ws);
    std::cout << static_cast<char>((grasp ? 'a' : 'A') + static_cast<int>(i % 26)) << "  " << o.id << "  "
              << to_string(o.shape) << ' ' << o.width << 'x' << o.depth << 'x' << o.height << " at (" << o.pose.x
              << ", " << o.pose.y << ") level " << o.pose.level << (grasp ? "" : "  ungraspable") << "\n";
  }
  if (a.goals) {
    std::cout << "goals:\n";
    render(std::cout, ws, s.goals);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical rearrangement planner"};
  app.set_config("--config", "", "TOML/INI file with the same keys; command-line flags win");
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate labelled tasks with the expert");
  g->add_option("--count", gen.count, "number of tasks")->capture_default_str();
  g->add_option("--envs", gen.envs, "comma-separated environment templates")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--min-objects", gen.min_objects)->capture_default_str();
  g->add_option("--max-objects", gen.max_objects)->capture_default_str();
  g->add_option("--out", gen.out, "dataset file")->required();

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "pretrain the shape encoder as an autoencoder");
  p->add_option("--out", pre.out, "encoder checkpoint")->required();
  p->add_option("--grids", pre.grids, "distinct training shapes")->capture_default_str();
  p->add_option("--epochs", pre.epochs)->capture_default_str();
  p->add_option("--batch", pre.batch)->capture_default_str();
  p->add_option("--lr", pre.lr)->capture_default_str();
  p->add_option("--channels", pre.channels)->capture_default_str();
  p->add_option("--envs", pre.envs, "templates whose constraint regions join the shape set")->capture_default_str();
  p->add_option("--seed", pre.seed)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the coordinator by imitation");
  t->add_option("--data", tr.data, "dataset file")->required();
  t->add_option("--out", tr.out, "model checkpoint")->required();
  t->add_option("--encoder", tr.encoder, "pretrained encoder (pretrained on the fly when absent)");
  t->add_option("--log", tr.log, "epoch log CSV (default: <out>.log.csv)");
  t->add_option("--epochs", tr.opt.epochs)->capture_default_str();
  t->add_option("--lr", tr.opt.lr)->capture_default_str();
  t->add_option("--lambda", tr.opt.lambda, "action loss weight")->capture_default_str();
  t->add_option("--batch", tr.opt.batch)->capture_default_str();
  t->add_option("--hidden", tr.opt.hidden)->capture_default_str();
  t->add_option("--val-fraction", tr.opt.val_fraction)->capture_default_str();
  t->add_option("--seed", tr.opt.seed)->capture_default_str();
  t->add_flag("--tied", tr.opt.tied, "share one weight set across edge types");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "closed-loop evaluation of policies on a task suite");
  e->add_option("--suite", ev.suite, "dataset file")->required();
  e->add_option("--policies", ev.policies, "comma list of ours,gnn,model,plan,expert")->capture_default_str();
  e->add_option("--model", ev.model, "coordinator for 'ours'");
  e->add_option("--gnn-model", ev.gnn_model, "tied coordinator for 'gnn'");
  e->add_option("--seed", ev.seed)->capture_default_str();
  e->add_option("--runs", ev.runs, "seeds seed..seed+runs-1")->capture_default_str();
  e->add_option("--out", ev.out, "metrics CSV")->capture_default_str();
  e->add_option("--episodes", ev.episodes, "per-episode CSV");
  e->add_flag("--jitter", ev.jitter, "perturb executed poses");
  e->add_option("--noise", ev.noise, "descriptor noise sigma")->capture_default_str();

  PlanArgs pl;
  auto* n = app.add_subcommand("plan", "solve one start/goal pair and print the trace");
  n->add_option("--start", pl.start, "start scene")->required();
  n->add_option("--goal", pl.goal, "goal scene")->required();
  n->add_option("--model", pl.model, "coordinator checkpoint");
  n->add_option("--policy", pl.policy)->capture_default_str();
  n->add_option("--seed", pl.seed)->capture_default_str();
  n->add_flag("--jitter", pl.jitter);

  InspectArgs in;
  auto* i = app.add_subcommand("inspect", "render a scene as a height map");
  i->add_option("--scene", in.scene, "scene file")->required();
  i->add_flag("--goals", in.goals, "also render the goal layout");
  i->add_option("--seed", in.seed, "accepted for uniformity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (p->parsed()) return run_pretrain(pre);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (n->parsed()) return run_plan(pl);
    if (i->parsed()) return run_inspect(in);
  } catch (const std::exception& ex) {
    std::cerr << "hetplan: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
