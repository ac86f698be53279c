#include "mgmpc/model/build.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mgmpc::model {

namespace {

std::string nm(const char* base, int j) {
  return std::string(base) + "[" + std::to_string(j) + "]";
}
std::string nm(const char* base, int sigma, int j) {
  return std::string(base) + "[" + (sigma == 0 ? "h" : "l") + "][" +
         std::to_string(j) + "]";
}

}  // namespace

McProblem build_mpc_problem(const MgParams& params, const ForecastBounds& bounds,
                            const InitialConditions& init, const GainMode& mode,
                            const BuildOptions& build) {
  const MgParams p = with_derived_big_m(params);
  bounds.validate();
  if (bounds.horizon() != p.horizon_j)
    throw std::invalid_argument(
        "build_mpc_problem: forecast horizon does not match params.horizon_j");
  if (init.x0 < p.x_min - 1e-12 || init.x0 > p.x_max + 1e-12)
    throw std::invalid_argument("build_mpc_problem: x0 outside storage limits");
  if (init.delta_f_prev != 0 && init.delta_f_prev != 1)
    throw std::invalid_argument("build_mpc_problem: delta_f_prev not boolean");
  if (!mode.adaptive &&
      !(mode.fixed_chi_f > 0.0 && std::isfinite(mode.fixed_chi_f) &&
        mode.fixed_chi_b > 0.0 && std::isfinite(mode.fixed_chi_b)))
    throw std::invalid_argument("build_mpc_problem: fixed gains must be positive");

  const int J = p.horizon_j;
  McProblem mc;
  mc.params = p;
  mc.init = init;
  mc.mode = mode;
  mc.build = build;
  mc.w_pv.resize(J);
  mc.demand.resize(J);
  for (int j = 0; j < J; ++j) {
    const ForecastStep& s = bounds.steps[j];
    if (s.w_pv_high > p.p_pv_max + 1e-9)
      throw std::invalid_argument(
          "build_mpc_problem: PV bound exceeds the unit rating at step " +
          std::to_string(j));
    if (s.w_pv_low < p.p_pv_min - 1e-9)
      throw std::invalid_argument(
          "build_mpc_problem: PV bound below p_pv_min at step " +
          std::to_string(j) + " (infeasible curtailment box)");
    if (build.pairing == SigmaPairing::surplus_deficit) {
      mc.w_pv[j] = {s.w_pv_high, s.w_pv_low};
      mc.demand[j] = {s.demand_low, s.demand_high};
    } else {
      mc.w_pv[j] = {s.w_pv_high, s.w_pv_low};
      mc.demand[j] = {s.demand_high, s.demand_low};
    }
  }

  miblp::MiblpProblem& pr = mc.problem;
  VarMap& v = mc.map;
  const double span_f = p.p_f_max - p.p_f_min;
  const double pb2 = std::max(p.p_b_min * p.p_b_min, p.p_b_max * p.p_b_max);

  auto curtail_ref = [&](int sigma, int j) {
    return build.curtail_ref == CurtailReference::available ? mc.w_pv[j][sigma]
                                                            : p.p_pv_max;
  };

  for (int s = 0; s < 2; ++s) {
    v.p_f[s].resize(J);
    v.p_b[s].resize(J);
    v.p_pv[s].resize(J);
    v.delta_pv[s].resize(J);
    v.mu[s].resize(J);
    v.s_b[s].resize(J);
    v.s_pv[s].resize(J);
    v.d_b[s].resize(J, -1);
    v.d_f[s].resize(J, -1);
    v.q_f[s].resize(J, -1);
    v.x[s].resize(J + 1);
  }
  v.u_f.resize(J);
  v.u_b.resize(J);
  v.u_pv.resize(J);
  v.delta_f.resize(J);
  v.chi_f.resize(J, -1);
  v.chi_b.resize(J, -1);
  v.t.resize(J);
  v.sw.resize(J);

  // deviation ranges implied by the frequency limits through the links
  const double d_b_lo = std::max(p.p_b_min - p.p_b_max, p.mu_min / p.chi_b_min);
  const double d_b_hi = std::min(p.p_b_max - p.p_b_min, p.mu_max / p.chi_b_min);
  const double d_f_lo = std::max(-span_f, p.mu_min / p.chi_f_min);
  const double d_f_hi = std::min(span_f, p.mu_max / p.chi_f_min);

  for (int j = 0; j < J; ++j) {
    v.u_f[j] = pr.add_continuous(nm("u_f", j), 0.0, p.p_f_max);
    v.u_b[j] = pr.add_continuous(nm("u_b", j), p.p_b_min, p.p_b_max);
    v.u_pv[j] = pr.add_continuous(nm("u_pv", j), p.p_pv_min, p.p_pv_max);
    v.delta_f[j] = pr.add_binary(nm("delta_f", j));
    if (mode.adaptive) {
      v.chi_f[j] = pr.add_continuous(nm("chi_f", j), p.chi_f_min, p.chi_f_max);
      v.chi_b[j] = pr.add_continuous(nm("chi_b", j), p.chi_b_min, p.chi_b_max);
    }
    // safe stage-cost ceiling for the epigraph variable
    double curt_max = 0.0;
    for (int s = 0; s < 2; ++s) {
      const double c = curtail_ref(s, j) - p.p_pv_min;
      curt_max = std::max(curt_max, c * c);
    }
    const double t_hi = 1.05 * (p.c_fru + p.c_fru_prime * p.p_f_max + p.c_fsw +
                                p.c_b_loss * pb2 + p.c_pv_curt * curt_max);
    v.t[j] = pr.add_continuous(nm("t", j), 0.0, t_hi);
    v.sw[j] = pr.add_continuous(nm("sw", j), 0.0, 1.0);
    for (int s = 0; s < 2; ++s) {
      const double w = mc.w_pv[j][s];
      v.p_f[s][j] = pr.add_continuous(nm("p_f", s, j), 0.0, p.p_f_max);
      v.p_b[s][j] = pr.add_continuous(nm("p_b", s, j), p.p_b_min, p.p_b_max);
      v.p_pv[s][j] =
          pr.add_continuous(nm("p_pv", s, j), p.p_pv_min, std::min(p.p_pv_max, w));
      v.delta_pv[s][j] = pr.add_binary(nm("delta_pv", s, j));
      v.mu[s][j] = pr.add_continuous(nm("mu", s, j), p.mu_min, p.mu_max);
      v.s_b[s][j] =
          pr.add_continuous(nm("s_b", s, j), 0.0, 1.05 * p.c_b_loss * pb2);
      const double cr = curtail_ref(s, j) - p.p_pv_min;
      v.s_pv[s][j] = pr.add_continuous(nm("s_pv", s, j), 0.0,
                                       1.05 * p.c_pv_curt * cr * cr);
      if (mode.adaptive) {
        v.d_b[s][j] = pr.add_continuous(nm("d_b", s, j), d_b_lo, d_b_hi);
        v.d_f[s][j] = pr.add_continuous(nm("d_f", s, j), d_f_lo, d_f_hi);
        v.q_f[s][j] = pr.add_continuous(nm("q_f", s, j), p.mu_min, p.mu_max);
      }
    }
  }
  for (int s = 0; s < 2; ++s) {
    v.x[s][0] = pr.add_continuous(nm("x", s, 0), init.x0, init.x0);
    for (int j = 1; j <= J; ++j)
      v.x[s][j] = pr.add_continuous(nm("x", s, j), p.x_min, p.x_max);
  }

  using miblp::Sense;
  for (int j = 0; j < J; ++j) {
    // FC setpoint window tied to the on/off decision
    pr.add_row({{v.u_f[j], 1.0}, {v.delta_f[j], -p.p_f_max}}, Sense::le, 0.0);
    pr.add_row({{v.u_f[j], -1.0}, {v.delta_f[j], p.p_f_min}}, Sense::le, 0.0);
    // switching indicator sw >= |delta_f(j) - delta_f(j-1)|
    if (j == 0) {
      pr.add_row({{v.sw[0], 1.0}, {v.delta_f[0], -1.0}}, Sense::ge,
                 -static_cast<double>(init.delta_f_prev));
      pr.add_row({{v.sw[0], 1.0}, {v.delta_f[0], 1.0}}, Sense::ge,
                 static_cast<double>(init.delta_f_prev));
    } else {
      pr.add_row({{v.sw[j], 1.0}, {v.delta_f[j], -1.0}, {v.delta_f[j - 1], 1.0}},
                 Sense::ge, 0.0);
      pr.add_row({{v.sw[j], 1.0}, {v.delta_f[j], 1.0}, {v.delta_f[j - 1], -1.0}},
                 Sense::ge, 0.0);
    }
    for (int s = 0; s < 2; ++s) {
      const double w = mc.w_pv[j][s];
      // curtailment big-M: p_pv = min(u_pv, w) at integral delta_pv
      pr.add_row({{v.u_pv[j], 1.0},
                  {v.delta_pv[s][j], -p.big_m_pv},
                  {v.p_pv[s][j], -1.0}},
                 Sense::le, 0.0);
      pr.add_row({{v.p_pv[s][j], 1.0}, {v.u_pv[j], -1.0}}, Sense::le, 0.0);
      pr.add_row({{v.p_pv[s][j], -1.0}, {v.delta_pv[s][j], -p.small_m_pv}},
                 Sense::le, -w - p.small_m_pv);
      // storage dynamics
      pr.add_row({{v.x[s][j + 1], 1.0},
                  {v.x[s][j], -1.0},
                  {v.p_b[s][j], p.delta_t}},
                 Sense::eq, 0.0);
      // FC power window
      pr.add_row({{v.p_f[s][j], 1.0}, {v.delta_f[j], -p.p_f_max}}, Sense::le, 0.0);
      pr.add_row({{v.p_f[s][j], -1.0}, {v.delta_f[j], p.p_f_min}}, Sense::le, 0.0);
      // power balance (demand-positive form)
      pr.add_row({{v.p_f[s][j], 1.0}, {v.p_b[s][j], 1.0}, {v.p_pv[s][j], 1.0}},
                 Sense::eq, mc.demand[j][s]);
      if (mode.adaptive) {
        // battery deviation and its sharing product mu = d_b * chi_b
        pr.add_row({{v.d_b[s][j], 1.0}, {v.p_b[s][j], -1.0}, {v.u_b[j], 1.0}},
                   Sense::eq, 0.0);
        pr.add_link(v.mu[s][j], v.d_b[s][j], v.chi_b[j]);
        // FC deviation and gated product q_f = d_f * chi_f
        pr.add_row({{v.d_f[s][j], 1.0}, {v.p_f[s][j], -1.0}, {v.u_f[j], 1.0}},
                   Sense::eq, 0.0);
        pr.add_link(v.q_f[s][j], v.d_f[s][j], v.chi_f[j]);
        pr.add_row({{v.q_f[s][j], 1.0}, {v.delta_f[j], -p.big_m_f}}, Sense::le,
                   0.0);
        pr.add_row({{v.q_f[s][j], 1.0}, {v.delta_f[j], -p.small_m_f}}, Sense::ge,
                   0.0);
        pr.add_row({{v.q_f[s][j], 1.0},
                    {v.mu[s][j], -1.0},
                    {v.delta_f[j], -p.small_m_f}},
                   Sense::le, -p.small_m_f);
        pr.add_row({{v.q_f[s][j], 1.0},
                    {v.mu[s][j], -1.0},
                    {v.delta_f[j], -p.big_m_f}},
                   Sense::ge, -p.big_m_f);
      } else {
        const double cf = mode.fixed_chi_f, cb = mode.fixed_chi_b;
        // (p_b - u_b) * cb = mu
        pr.add_row({{v.p_b[s][j], cb}, {v.u_b[j], -cb}, {v.mu[s][j], -1.0}},
                   Sense::eq, 0.0);
        // (p_f - u_f) * cf gated by delta_f
        pr.add_row({{v.p_f[s][j], cf},
                    {v.u_f[j], -cf},
                    {v.delta_f[j], -p.big_m_f}},
                   Sense::le, 0.0);
        pr.add_row({{v.p_f[s][j], cf},
                    {v.u_f[j], -cf},
                    {v.delta_f[j], -p.small_m_f}},
                   Sense::ge, 0.0);
        pr.add_row({{v.p_f[s][j], cf},
                    {v.u_f[j], -cf},
                    {v.mu[s][j], -1.0},
                    {v.delta_f[j], -p.small_m_f}},
                   Sense::le, -p.small_m_f);
        pr.add_row({{v.p_f[s][j], cf},
                    {v.u_f[j], -cf},
                    {v.mu[s][j], -1.0},
                    {v.delta_f[j], -p.big_m_f}},
                   Sense::ge, -p.big_m_f);
      }
      // worst-case epigraph: t >= running + switching + quadratic atoms
      pr.add_row({{v.delta_f[j], p.c_fru},
                  {v.p_f[s][j], p.c_fru_prime},
                  {v.sw[j], p.c_fsw},
                  {v.s_b[s][j], 1.0},
                  {v.s_pv[s][j], 1.0},
                  {v.t[j], -1.0}},
                 Sense::le, 0.0);
      pr.add_atom(p.c_b_loss, {{v.p_b[s][j], 1.0}}, 0.0, v.s_b[s][j]);
      pr.add_atom(p.c_pv_curt, {{v.p_pv[s][j], -1.0}}, curtail_ref(s, j),
                  v.s_pv[s][j]);
    }
  }
  double disc = 1.0;
  for (int j = 0; j < J; ++j) {
    disc *= p.gamma;
    pr.objective.push_back({v.t[j], disc});
  }
  pr.check();
  return mc;
}

ControlInput extract_control(const McProblem& mc, const miblp::MiblpSolution& sol,
                             int step) {
  if (step < 0 || step >= mc.horizon())
    throw std::out_of_range("extract_control: step outside the horizon");
  if (sol.values.size() != mc.problem.vars.size())
    throw std::invalid_argument("extract_control: solution dimension mismatch");
  const VarMap& v = mc.map;
  ControlInput c;
  c.delta_f = static_cast<int>(std::lround(sol.values[v.delta_f[step]]));
  c.u_f = c.delta_f == 0 ? 0.0 : sol.values[v.u_f[step]];
  c.u_b = sol.values[v.u_b[step]];
  c.u_pv = sol.values[v.u_pv[step]];
  if (mc.mode.adaptive) {
    c.chi_f = sol.values[v.chi_f[step]];
    c.chi_b = sol.values[v.chi_b[step]];
  } else {
    c.chi_f = mc.mode.fixed_chi_f;
    c.chi_b = mc.mode.fixed_chi_b;
  }
  return c;
}

ScenarioVars extract_scenario(const McProblem& mc, const miblp::MiblpSolution& sol,
                              int sigma) {
  if (sigma != 0 && sigma != 1)
    throw std::out_of_range("extract_scenario: sigma must be 0 or 1");
  if (sol.values.size() != mc.problem.vars.size())
    throw std::invalid_argument("extract_scenario: solution dimension mismatch");
  const VarMap& v = mc.map;
  const int J = mc.horizon();
  ScenarioVars z;
  for (int j = 0; j < J; ++j) {
    z.p_f.push_back(sol.values[v.p_f[sigma][j]]);
    z.p_b.push_back(sol.values[v.p_b[sigma][j]]);
    z.p_pv.push_back(sol.values[v.p_pv[sigma][j]]);
    z.mu.push_back(sol.values[v.mu[sigma][j]]);
    z.delta_pv.push_back(
        static_cast<int>(std::lround(sol.values[v.delta_pv[sigma][j]])));
  }
  for (int j = 0; j <= J; ++j) z.x.push_back(sol.values[v.x[sigma][j]]);
  return z;
}

miblp::GridOracleSpec make_oracle_spec(const McProblem& mc) {
  const MgParams& p = mc.params;
  miblp::GridOracleSpec s;
  s.p_pv_min = p.p_pv_min;
  s.p_pv_max = p.p_pv_max;
  s.p_b_min = p.p_b_min;
  s.p_b_max = p.p_b_max;
  s.p_f_min = p.p_f_min;
  s.p_f_max = p.p_f_max;
  s.x_min = p.x_min;
  s.x_max = p.x_max;
  s.mu_min = p.mu_min;
  s.mu_max = p.mu_max;
  s.chi_f_min = p.chi_f_min;
  s.chi_f_max = p.chi_f_max;
  s.chi_b_min = p.chi_b_min;
  s.chi_b_max = p.chi_b_max;
  s.delta_t = p.delta_t;
  s.gamma = p.gamma;
  s.c_fru = p.c_fru;
  s.c_fru_prime = p.c_fru_prime;
  s.c_fsw = p.c_fsw;
  s.c_pv_curt = p.c_pv_curt;
  s.c_b_loss = p.c_b_loss;
  s.curtail_available = mc.build.curtail_ref == CurtailReference::available;
  s.adaptive = mc.mode.adaptive;
  s.fixed_chi_f = mc.mode.fixed_chi_f;
  s.fixed_chi_b = mc.mode.fixed_chi_b;
  s.x0 = mc.init.x0;
  s.delta_f_prev = mc.init.delta_f_prev;
  for (int j = 0; j < mc.horizon(); ++j) {
    s.w_pv.push_back(mc.w_pv[j]);
    s.demand.push_back(mc.demand[j]);
  }
  return s;
}

std::vector<double> controls_to_values(const McProblem& mc,
                                       const miblp::OracleResult& controls) {
  const int J = mc.horizon();
  if (static_cast<int>(controls.u_f.size()) != J)
    throw std::invalid_argument("controls_to_values: horizon mismatch");
  const MgParams& p = mc.params;
  const VarMap& v = mc.map;
  std::vector<double> out(mc.problem.vars.size(), 0.0);

  double xh = mc.init.x0, xl = mc.init.x0;
  int delta_prev = mc.init.delta_f_prev;
  out[v.x[0][0]] = xh;
  out[v.x[1][0]] = xl;
  for (int j = 0; j < J; ++j) {
    const int delta = controls.delta_f[j];
    const double u_f = delta ? controls.u_f[j] : 0.0;
    const double u_b = controls.u_b[j];
    const double u_pv = controls.u_pv[j];
    const double chi_f = controls.chi_f[j];
    const double chi_b = controls.chi_b[j];
    out[v.u_f[j]] = u_f;
    out[v.u_b[j]] = u_b;
    out[v.u_pv[j]] = u_pv;
    out[v.delta_f[j]] = delta;
    if (mc.mode.adaptive) {
      out[v.chi_f[j]] = chi_f;
      out[v.chi_b[j]] = chi_b;
    }
    out[v.sw[j]] = std::fabs(delta - delta_prev);
    double t = 0.0;
    for (int s = 0; s < 2; ++s) {
      const double w = mc.w_pv[j][s];
      const double d = mc.demand[j][s];
      const double p_pv = std::min(u_pv, w);
      const double r = d - (delta ? u_f : 0.0) - u_b - p_pv;
      double mu, p_f, p_b;
      if (delta) {
        mu = r / (1.0 / chi_f + 1.0 / chi_b);
        p_f = u_f + mu / chi_f;
        p_b = u_b + mu / chi_b;
      } else {
        mu = r * chi_b;
        p_f = 0.0;
        p_b = u_b + r;
      }
      out[v.p_f[s][j]] = p_f;
      out[v.p_b[s][j]] = p_b;
      out[v.p_pv[s][j]] = p_pv;
      out[v.mu[s][j]] = mu;
      out[v.delta_pv[s][j]] = w <= u_pv ? 1.0 : 0.0;
      out[v.s_b[s][j]] = p.c_b_loss * p_b * p_b;
      const double ref = mc.build.curtail_ref == CurtailReference::available
                             ? w
                             : p.p_pv_max;
      const double curt = ref - p_pv;
      out[v.s_pv[s][j]] = p.c_pv_curt * curt * curt;
      if (mc.mode.adaptive) {
        out[v.d_b[s][j]] = p_b - u_b;
        out[v.d_f[s][j]] = p_f - u_f;
        out[v.q_f[s][j]] = (p_f - u_f) * chi_f;
      }
      const double stage = p.c_fru * delta + p.c_fru_prime * p_f +
                           p.c_fsw * out[v.sw[j]] + out[v.s_b[s][j]] +
                           out[v.s_pv[s][j]];
      t = std::max(t, stage);
      const double xn = (s == 0 ? xh : xl) - p.delta_t * p_b;
      out[v.x[s][j + 1]] = xn;
      (s == 0 ? xh : xl) = xn;
    }
    out[v.t[j]] = t;
    delta_prev = delta;
  }
  return out;
}

}  // namespace mgmpc::model
