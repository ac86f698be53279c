#pragma once

#include <array>
#include <vector>

#include "mgmpc/miblp/oracle.hpp"
#include "mgmpc/miblp/problem.hpp"
#include "mgmpc/miblp/solve.hpp"
#include "mgmpc/model/types.hpp"

namespace mgmpc::model {

/// Variable indices of the encoded problem. Sigma index 0 is the "high"
/// branch (maximal surplus corner by default), 1 the "low" branch.
struct VarMap {
  std::vector<int> u_f, u_b, u_pv, delta_f, chi_f, chi_b, t, sw;
  std::array<std::vector<int>, 2> p_f, p_b, p_pv, delta_pv, mu, s_b, s_pv;
  std::array<std::vector<int>, 2> d_b, d_f, q_f;  // adaptive mode only
  std::array<std::vector<int>, 2> x;              // length J+1
};

struct McProblem {
  miblp::MiblpProblem problem;
  VarMap map;
  MgParams params;  // big-M fields resolved
  InitialConditions init;
  GainMode mode;
  BuildOptions build;
  // paired disturbance corners: [step][sigma]
  std::vector<std::array<double, 2>> w_pv, demand;
  int horizon() const { return static_cast<int>(w_pv.size()); }
};

/// Encodes the robust dispatch instance: PV curtailment big-M, storage
/// dynamics, FC on/off limits, power balance, droop sharing (bilinear in
/// adaptive mode, constant-gain rows otherwise), frequency limits, epigraph
/// stage costs and the discounted objective.
McProblem build_mpc_problem(const MgParams& params, const ForecastBounds& bounds,
                            const InitialConditions& init, const GainMode& mode,
                            const BuildOptions& build = {});

/// v(k+step|k) from a solution. Fixed mode reports the configured constant
/// gains. Throws std::out_of_range for step >= horizon.
ControlInput extract_control(const McProblem& mc, const miblp::MiblpSolution& sol,
                             int step);

/// One sigma branch of the solution trajectories.
struct ScenarioVars {
  std::vector<double> p_f, p_b, p_pv, mu;
  std::vector<int> delta_pv;
  std::vector<double> x;  // length J+1
};
ScenarioVars extract_scenario(const McProblem& mc, const miblp::MiblpSolution& sol,
                              int sigma);

/// Grid-oracle instance for this problem (same corners, limits, weights).
miblp::GridOracleSpec make_oracle_spec(const McProblem& mc);

/// Completes an oracle control trajectory into a full variable vector via
/// the closed-form dispatch, usable with miblp::validate_solution.
std::vector<double> controls_to_values(const McProblem& mc,
                                       const miblp::OracleResult& controls);

}  // namespace mgmpc::model
