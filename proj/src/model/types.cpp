#include "mgmpc/model/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mgmpc::model {

namespace {
[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("MgParams: " + msg);
}
}  // namespace

void MgParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (double v : {p_pv_min, p_pv_max, p_b_min, p_b_max, p_f_min, p_f_max, x_min,
                   x_max, chi_f_min, chi_f_max, chi_b_min, chi_b_max, mu_min,
                   mu_max, delta_t, gamma, c_fru, c_fru_prime, c_fsw, c_pv_curt,
                   c_b_loss, big_m_pv, small_m_pv, big_m_f, small_m_f})
    if (!finite(v)) fail("non-finite parameter");
  if (p_pv_min < 0.0 || p_pv_min > p_pv_max) fail("p_pv limits");
  if (!(p_b_min < 0.0 && 0.0 < p_b_max)) fail("p_b limits must straddle 0");
  if (!(0.0 < p_f_min && p_f_min <= p_f_max)) fail("p_f limits");
  if (!(0.0 <= x_min && x_min <= x_max)) fail("x limits");
  if (!(chi_f_min > 0.0 && chi_f_min <= chi_f_max)) fail("chi_f limits");
  if (!(chi_b_min > 0.0 && chi_b_min <= chi_b_max)) fail("chi_b limits");
  if (!(mu_min < 0.0 && 0.0 < mu_max)) fail("mu limits must straddle 0");
  if (!(delta_t > 0.0)) fail("delta_t");
  if (horizon_j < 1) fail("horizon_j");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0,1]");
  for (double w : {c_fru, c_fru_prime, c_fsw, c_pv_curt, c_b_loss})
    if (!(w > 0.0)) fail("cost weights must be positive");

  const double span_pv = p_pv_max - p_pv_min;
  const double span_f = (p_f_max - p_f_min) * chi_f_max;
  if (big_m_pv != 0.0 && big_m_pv < span_pv) fail("big_m_pv too small");
  if (small_m_pv != 0.0 && small_m_pv > -span_pv) fail("small_m_pv too large");
  if (big_m_f != 0.0 && big_m_f < std::max(mu_max, span_f)) fail("big_m_f too small");
  if (small_m_f != 0.0 && small_m_f > std::min(mu_min, -span_f))
    fail("small_m_f too large");
}

MgParams with_derived_big_m(const MgParams& p) {
  MgParams out = p;
  const double span_pv = p.p_pv_max - p.p_pv_min;
  const double span_f = (p.p_f_max - p.p_f_min) * p.chi_f_max;
  if (out.big_m_pv == 0.0) out.big_m_pv = 1.05 * span_pv;
  if (out.small_m_pv == 0.0) out.small_m_pv = -1.05 * span_pv;
  if (out.big_m_f == 0.0) out.big_m_f = 1.05 * std::max(p.mu_max, span_f);
  if (out.small_m_f == 0.0) out.small_m_f = 1.05 * std::min(p.mu_min, -span_f);
  out.validate();
  return out;
}

void ForecastBounds::validate() const {
  for (size_t j = 0; j < steps.size(); ++j) {
    const ForecastStep& s = steps[j];
    const bool ok = s.w_pv_low >= 0.0 && s.w_pv_low <= s.w_pv_high &&
                    s.demand_low >= 0.0 && s.demand_low <= s.demand_high &&
                    std::isfinite(s.w_pv_high) && std::isfinite(s.demand_high);
    if (!ok)
      throw std::invalid_argument("ForecastBounds: bad interval at step " +
                                  std::to_string(j));
  }
}

}  // namespace mgmpc::model
