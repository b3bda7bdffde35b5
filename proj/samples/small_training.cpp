// Small end-to-end run: generate tasks, train a coordinator on top of an
// untrained encoder, then roll it out next to the expert.
#include <iostream>

#include "hetplan/hetplan.hpp"

using namespace hetplan;

int main() {
  data::GenOptions g;
  g.count = 300;
  g.seed = 11;
  const auto records = data::generate_tasks(g).records;

  // random weights keep this quick; use default_encoder() for real runs
  perception::ShapeEncoder enc({perception::kGridResolution, 4}, 11);
  enc.allow_random_weights();

  train::TrainOptions opt;
  opt.epochs = 10;
  const auto trained = train::train_bundle(records, enc, opt);
  std::cout << "val top-1 " << trained.val.object_top1 << ", action acc " << trained.val.action_acc << "\n";

  g.count = 40;
  g.seed = 12;
  const auto suite = eval::suite_from_records(data::generate_tasks(g).records);
  const eval::Agent agent(trained.bundle);
  const auto report = eval::evaluate(suite, {eval::Policy::ours, eval::Policy::expert}, {1}, {&agent, nullptr});
  for (auto p : {eval::Policy::ours, eval::Policy::expert}) {
    const auto& r = report.overall(p);
    std::cout << r.policy << ": success " << r.success_rate << ", mean cost " << r.mean_cost << "\n";
  }
}
