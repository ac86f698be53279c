#pragma once

#include <vector>

namespace mgmpc::model {

/// Unit limits, cost weights, sharing/frequency bounds and horizon data.
/// Defaults are the reference parameterization used throughout the tests.
struct MgParams {
  double p_pv_min = 0.0, p_pv_max = 4.0;  // PV power limits, pu
  double p_b_min = -1.0, p_b_max = 1.0;   // battery power limits, pu
  double p_f_min = 0.2, p_f_max = 2.0;    // fuel cell limits when on, pu
  double x_min = 0.2, x_max = 3.0;        // storage energy limits, pu h
  double chi_f_min = 0.314, chi_f_max = 3.141;
  double chi_b_min = 0.314, chi_b_max = 3.141;
  double mu_min = -0.314, mu_max = 0.314;  // frequency offset limits, pu
  double delta_t = 0.5;                    // sampling time, h
  int horizon_j = 6;
  double gamma = 0.2;  // stage discount
  double c_fru = 0.13, c_fru_prime = 1.56;  // FC fixed / proportional running cost
  double c_fsw = 0.9;                       // FC switching cost
  double c_pv_curt = 1.0;                   // PV curtailment weight
  double c_b_loss = 0.1;                    // battery loss weight
  // big-M constants for the curtailment and FC sharing reformulations;
  // zero means "derive from the box bounds with a 5% margin"
  double big_m_pv = 0.0, small_m_pv = 0.0;
  double big_m_f = 0.0, small_m_f = 0.0;

  void validate() const;  // throws std::invalid_argument with the failing field
};

/// Fills any zero big-M field from the box bounds (5% margin) and checks
/// the result dominates the spans it must cover.
MgParams with_derived_big_m(const MgParams& p);

struct ForecastStep {
  double w_pv_low = 0.0, w_pv_high = 0.0;
  double demand_low = 0.0, demand_high = 0.0;  // load stored as demand >= 0
};

struct ForecastBounds {
  std::vector<ForecastStep> steps;
  int horizon() const { return static_cast<int>(steps.size()); }
  void validate() const;
};

struct InitialConditions {
  double x0 = 0.3;
  int delta_f_prev = 1;
};

/// One step of the control vector v(k): setpoints, FC status and gains.
struct ControlInput {
  double u_f = 0.0, u_b = 0.0, u_pv = 0.0;
  int delta_f = 0;
  double chi_f = 0.0, chi_b = 0.0;
};

/// Which extreme forecast corner each sigma branch tracks. The default
/// pairs maximal surplus (PV high, demand low) against maximal deficit,
/// which is the componentwise pairing in the signed-load convention.
enum class SigmaPairing { surplus_deficit, componentwise };

/// Reference level for the curtailment penalty: the available power of the
/// scenario, or the fixed PV rating.
enum class CurtailReference { available, rating };

struct GainMode {
  bool adaptive = true;
  double fixed_chi_f = 0.5, fixed_chi_b = 0.5;
  static GainMode make_adaptive() { return {true, 0.0, 0.0}; }
  static GainMode make_fixed(double chi_f, double chi_b) {
    return {false, chi_f, chi_b};
  }
};

struct BuildOptions {
  SigmaPairing pairing = SigmaPairing::surplus_deficit;
  CurtailReference curtail_ref = CurtailReference::available;
};

}  // namespace mgmpc::model
