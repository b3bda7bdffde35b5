// Plans the bundled example task with the expert search and replays it.
#include <iostream>

#include "hetplan/hetplan.hpp"

using namespace hetplan;

int main() {
  const std::string dir = HETPLAN_DATA_DIR "/scenes/";
  const auto task = data::pair_scenes(sim::load_scene(dir + "example_start.json"), sim::load_scene(dir + "example_goal.json"));

  const auto plan = expert::astar_plan(task);
  std::cout << plan.sequence.size() << " steps, cost " << plan.total_cost << ", " << plan.expansions
            << " expansions\n";
  for (const auto& st : plan.sequence)
    std::cout << "  " << to_string(st.primitive) << ' ' << st.object_id << " -> (" << st.target.x << ", "
              << st.target.y << ") level " << st.target.level << "\n";

  const auto ex = expert::execute_plan(task, plan);
  std::cout << (ex.success ? "reached the goal" : "execution failed") << ", executed cost " << ex.cost << "\n";
  return ex.success ? 0 : 1;
}
