#pragma once

#include "cardprune/annealing.hpp"
#include "cardprune/bench.hpp"
#include "cardprune/common.hpp"
#include "cardprune/convex_qp.hpp"
#include "cardprune/exhaustive.hpp"
#include "cardprune/io.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/optimize.hpp"
#include "cardprune/problem.hpp"
#include "cardprune/pruner.hpp"
#include "cardprune/qubo.hpp"
#include "cardprune/qvsim.hpp"
#include "cardprune/track_model.hpp"
#include "cardprune/variational.hpp"
