#pragma once

#include <array>
#include <vector>

namespace mgmpc::miblp {

/// Closed-form description of one minmax dispatch instance for the grid
/// oracle: unit limits, cost weights, the two extreme disturbance corners
/// per step, and the control designation (adaptive gains or constants).
struct GridOracleSpec {
  double p_pv_min = 0.0, p_pv_max = 0.0;
  double p_b_min = 0.0, p_b_max = 0.0;
  double p_f_min = 0.0, p_f_max = 0.0;
  double x_min = 0.0, x_max = 0.0;
  double mu_min = 0.0, mu_max = 0.0;
  double chi_f_min = 0.0, chi_f_max = 0.0;
  double chi_b_min = 0.0, chi_b_max = 0.0;
  double delta_t = 0.0, gamma = 0.0;
  double c_fru = 0.0, c_fru_prime = 0.0, c_fsw = 0.0;
  double c_pv_curt = 0.0, c_b_loss = 0.0;
  bool curtail_available = true;  // penalty reference: available power vs rating
  bool adaptive = true;
  double fixed_chi_f = 0.0, fixed_chi_b = 0.0;
  double x0 = 0.0;
  int delta_f_prev = 0;
  // disturbance corners per step; index 0 = "high" branch, 1 = "low"
  std::vector<std::array<double, 2>> w_pv, demand;

  int horizon() const { return static_cast<int>(w_pv.size()); }
};

struct OracleResult {
  bool found = false;
  double objective = 0.0;
  std::vector<double> u_f, u_b, u_pv, chi_f, chi_b;
  std::vector<int> delta_f;
  long evaluated = 0, feasible = 0;
};

/// Brute-force verification oracle: enumerates the FC on/off pattern and a
/// uniform grid over every continuous control (resolution intervals, so
/// refining 8 -> 16 -> 32 keeps earlier grids as subsets), computes the
/// dependent variables in closed form, and returns the best feasible grid
/// point. One-sided: a correct solver's optimum is <= the oracle objective.
OracleResult grid_oracle(const GridOracleSpec& spec, int resolution,
                         int worker_count = 1);

}  // namespace mgmpc::miblp
