#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgmpc/miblp/problem.hpp"

namespace mgmpc::miblp {

struct SolveOptions {
  double abs_gap = 1e-8;
  double rel_gap = 1e-8;
  double bilinear_tol = 1e-6;  // max |q - a*b| accepted at an incumbent
  long max_nodes = 200000;
  double max_time_s = 0.0;  // 0 disables the wall clock cutoff (deterministic)
  int tangent_init = 9;     // initial tangent points per quadratic atom
  int worker_count = 1;
  uint64_t seed = 0;  // reserved; the search is deterministic and ignores it
};

enum class SolveStatus { optimal, feasible, infeasible, node_limit, time_limit };

std::string to_string(SolveStatus s);

struct MiblpSolution {
  SolveStatus status = SolveStatus::infeasible;
  bool found = false;
  std::vector<double> values;
  double objective = 0.0;
  double bound = 0.0;  // proven lower bound on the optimum
  double gap_abs = 0.0;
  long node_count = 0;
  double wall_time_s = 0.0;
};

/// Deterministic branch-and-bound: best-bound node selection with
/// creation-index tie-breaks, binary branching on the most fractional
/// variable, spatial branching on bilinear factors (gain factor first),
/// McCormick envelopes per node, and outer-approximation tangent cuts for
/// the quadratic atoms. Nodes are processed in fixed-width rounds so the
/// search tree is identical for every worker_count.
MiblpSolution solve(const MiblpProblem& problem, const SolveOptions& opts = {});

/// Max violation per category for a candidate point.
struct ViolationReport {
  double bound = 0.0;
  double linear = 0.0;
  double integrality = 0.0;
  double bilinear = 0.0;
  double quad = 0.0;
  std::string worst_bound, worst_linear, worst_bilinear;
  double max_violation() const;
  bool within(double tol) const { return max_violation() <= tol; }
};

ViolationReport validate_solution(const MiblpProblem& problem,
                                  const std::vector<double>& values);

}  // namespace mgmpc::miblp
