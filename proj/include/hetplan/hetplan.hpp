#pragma once

#include "hetplan/core/error.hpp"
#include "hetplan/core/parallel.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/nn/checkpoint.hpp"
#include "hetplan/nn/layers.hpp"
#include "hetplan/nn/loss.hpp"
#include "hetplan/nn/optim.hpp"
#include "hetplan/nn/tape.hpp"
#include "hetplan/sim/geometry.hpp"
#include "hetplan/sim/observe.hpp"
#include "hetplan/sim/primitives.hpp"
#include "hetplan/sim/scene_io.hpp"
#include "hetplan/perception/encoder.hpp"
#include "hetplan/perception/features.hpp"
#include "hetplan/perception/matching.hpp"
#include "hetplan/perception/task_view.hpp"
#include "hetplan/graph/het_graph.hpp"
#include "hetplan/coord/model.hpp"
#include "hetplan/expert/planner.hpp"
#include "hetplan/data/dataset.hpp"
#include "hetplan/data/scene_gen.hpp"
#include "hetplan/train/imitation.hpp"
#include "hetplan/train/pretrain.hpp"
#include "hetplan/eval/evaluate.hpp"
