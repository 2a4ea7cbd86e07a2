#pragma once

#include "spe/efl.hpp"

namespace fixtures {

// Two nodes, one arc 0 → 1, facility candidate at node 0.
inline spe::EflInstance toy_efl() {
  spe::EflInstance e;
  e.n_nodes = 2;
  e.arcs = {{0, 1, 10.0, 1.0}};
  e.candidates = {0};
  e.demand = {1};
  e.supply = {0, 1};
  e.beta0 = spe::Vec::Constant(1, 20.0);
  e.beta1 = spe::Vec::Ones(1);
  e.gamma0 = spe::Vec(2);
  e.gamma0 << 10, 20;
  e.gamma1 = spe::Vec::Ones(2);
  e.open_cost = spe::Vec::Constant(1, 0.5);
  e.unit_cost = spe::Vec::Constant(1, 0.5);
  e.capacity = spe::Vec::Constant(1, 10.0);
  e.q_max = 7.5;
  return e;
}

}  // namespace fixtures
