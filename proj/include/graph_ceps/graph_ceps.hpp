#pragma once

#include "graph_ceps/classify.hpp"
#include "graph_ceps/csv.hpp"
#include "graph_ceps/error.hpp"
#include "graph_ceps/experiment.hpp"
#include "graph_ceps/features.hpp"
#include "graph_ceps/graph_topology.hpp"
#include "graph_ceps/parallel.hpp"
#include "graph_ceps/scene_sim.hpp"
#include "graph_ceps/seed.hpp"
#include "graph_ceps/spectral.hpp"
#include "graph_ceps/wav.hpp"
