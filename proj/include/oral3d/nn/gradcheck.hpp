#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "oral3d/nn/graph.hpp"

namespace oral3d::nn {

struct GradcheckConfig {
  int graphs = 100;
  std::uint64_t seed = 0;
  double h = 1e-5;
  // Relative error denominator floor, so gradients that are zero up to
  // rounding do not produce spurious ratios.
  double floor = 1e-6;
  int max_params = 5000;
  // Coordinates checked per graph; every coordinate when the graph is smaller.
  int coords_per_graph = 400;
};

struct GradcheckReport {
  int graphs = 0;
  long checked = 0;
  long skipped_kinks = 0;
  double max_rel_error = 0.0;
  int worst_graph = -1;
  int max_param_count = 0;
  std::set<Op> ops_seen;

  // Differentiable ops that no graph exercised.
  std::vector<std::string> missing_ops() const;
};

// Builds random double-precision graphs over every differentiable op and
// compares backward() with central differences on their parameters.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace oral3d::nn
