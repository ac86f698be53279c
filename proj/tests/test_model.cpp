#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "mgmpc/miblp/oracle.hpp"
#include "mgmpc/miblp/solve.hpp"
#include "mgmpc/model/build.hpp"

using namespace mgmpc;
using namespace mgmpc::model;

namespace {

ForecastBounds flat_bounds(int J, double pv_lo, double pv_hi, double d_lo,
                           double d_hi) {
  ForecastBounds b;
  for (int j = 0; j < J; ++j) b.steps.push_back({pv_lo, pv_hi, d_lo, d_hi});
  return b;
}

MgParams table_params(int J) {
  MgParams p;  // defaults carry the reference parameterization
  p.horizon_j = J;
  return p;
}

miblp::SolveOptions tight_opts() {
  miblp::SolveOptions o;
  o.abs_gap = 1e-9;
  o.rel_gap = 1e-12;
  return o;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("J=6 adaptive: binary and link counts follow the template") {
  const auto mc = build_mpc_problem(table_params(6),
                                    flat_bounds(6, 0.5, 1.5, 0.8, 1.2),
                                    {0.3, 1}, GainMode::make_adaptive());
  int nbin_f = 0, nbin_pv = 0;
  for (const auto& v : mc.problem.vars) {
    if (v.kind != miblp::VarKind::binary) continue;
    if (v.name.rfind("delta_f", 0) == 0) ++nbin_f;
    if (v.name.rfind("delta_pv", 0) == 0) ++nbin_pv;
  }
  CHECK(nbin_f == 6);
  CHECK(nbin_pv == 12);
  CHECK(mc.problem.links.size() == 24);  // 2 units x 2 sigma x 6 steps
}

TEST_CASE("dimension and box errors are reported before solving") {
  CHECK_THROWS_AS(build_mpc_problem(table_params(3),
                                    flat_bounds(2, 0.0, 1.0, 0.5, 0.5), {0.3, 1},
                                    GainMode::make_adaptive()),
                  std::invalid_argument);
  // PV bound above the rating breaks the curtailment big-M
  CHECK_THROWS_AS(build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.0, 4.5, 0.5, 0.5), {0.3, 1},
                                    GainMode::make_adaptive()),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.0, 1.0, 0.5, 0.5), {9.0, 1},
                                    GainMode::make_adaptive()),
                  std::invalid_argument);
  MgParams bad = table_params(1);
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("J=1 zero PV forces p_pv = 0 in any feasible solution") {
  const auto mc = build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.0, 0.0, 0.5, 0.5), {0.3, 1},
                                    GainMode::make_fixed(0.5, 0.5));
  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  for (int s = 0; s < 2; ++s) {
    const auto z = extract_scenario(mc, sol, s);
    CHECK(std::fabs(z.p_pv[0]) <= 1e-9);
  }
}

TEST_CASE("J=1 dispatch: storage head keeps the FC on, battery covers when it can") {
  // x0 = 0.3 leaves only 0.2 pu of discharge head: the FC must run
  {
    const auto mc = build_mpc_problem(table_params(1),
                                      flat_bounds(1, 0.0, 0.0, 0.5, 0.5),
                                      {0.3, 1}, GainMode::make_fixed(0.5, 0.5));
    const auto sol = miblp::solve(mc.problem, tight_opts());
    REQUIRE(sol.status == miblp::SolveStatus::optimal);
    CHECK(extract_control(mc, sol, 0).delta_f == 1);
  }
  // with a full battery and the FC previously off, battery-only is cheaper
  {
    const auto mc = build_mpc_problem(table_params(1),
                                      flat_bounds(1, 0.0, 0.0, 0.5, 0.5),
                                      {1.0, 0}, GainMode::make_fixed(0.5, 0.5));
    const auto sol = miblp::solve(mc.problem, tight_opts());
    REQUIRE(sol.status == miblp::SolveStatus::optimal);
    const auto c = extract_control(mc, sol, 0);
    CHECK(c.delta_f == 0);
    CHECK(c.u_f == 0.0);
    // oracle agreement at resolution 64
    const auto oracle = miblp::grid_oracle(make_oracle_spec(mc), 64);
    REQUIRE(oracle.found);
    CHECK(sol.objective <= oracle.objective + 1e-6);
    CHECK(oracle.objective <= sol.objective + 5e-3);  // grid granularity
  }
}

TEST_CASE("extract_control projects v(k) and honors conventions") {
  const auto mc = build_mpc_problem(table_params(2),
                                    flat_bounds(2, 0.5, 1.0, 0.8, 1.0), {0.5, 1},
                                    GainMode::make_fixed(0.5, 0.5));
  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  const auto c0 = extract_control(mc, sol, 0);
  CHECK(c0.chi_f == 0.5);
  CHECK(c0.chi_b == 0.5);
  CHECK(c0.u_pv >= mc.params.p_pv_min);
  CHECK(c0.u_pv <= mc.params.p_pv_max);
  CHECK_THROWS_AS(extract_control(mc, sol, 2), std::out_of_range);
}

TEST_CASE("Eq.2 intent: p_pv = min(u_pv, w_pv) at incumbents") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 6; ++it) {
    const double pv_lo = 0.4 + 0.8 * u(rng);
    const double pv_hi = pv_lo + 0.8 * u(rng);
    const double d_lo = 0.6 + 0.5 * u(rng);
    const double d_hi = d_lo + 0.3 * u(rng);
    const bool adaptive = it % 2 == 0;
    const auto mc = build_mpc_problem(
        table_params(2), flat_bounds(2, pv_lo, pv_hi, d_lo, d_hi), {0.8, 1},
        adaptive ? GainMode::make_adaptive() : GainMode::make_fixed(0.5, 0.5));
    const auto sol = miblp::solve(mc.problem, tight_opts());
    REQUIRE(sol.status == miblp::SolveStatus::optimal);
    for (int s = 0; s < 2; ++s) {
      const auto z = extract_scenario(mc, sol, s);
      for (int j = 0; j < 2; ++j) {
        const double u_pv = sol.values[mc.map.u_pv[j]];
        CHECK(std::fabs(z.p_pv[j] - std::min(u_pv, mc.w_pv[j][s])) <= 1e-7);
      }
    }
  }
}

TEST_CASE("storage telescoping holds exactly") {
  const auto mc = build_mpc_problem(table_params(3),
                                    flat_bounds(3, 0.2, 1.2, 0.7, 1.1), {0.6, 1},
                                    GainMode::make_adaptive());
  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  for (int s = 0; s < 2; ++s) {
    const auto z = extract_scenario(mc, sol, s);
    double x = mc.init.x0;
    for (int j = 0; j < 3; ++j) x -= mc.params.delta_t * z.p_b[j];
    CHECK(std::fabs(z.x[3] - x) <= 1e-9);
  }
}

TEST_CASE("feasible-set nesting: adaptive optimum never exceeds fixed") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 8; ++it) {
    const double pv_lo = 0.7 * u(rng);
    const double pv_hi = pv_lo + 0.9 * u(rng);
    const double d_lo = 0.5 + 0.6 * u(rng);
    const double d_hi = d_lo + 0.25 * u(rng);
    const double x0 = 0.3 + 2.0 * u(rng);
    const int prev = it % 2;
    const auto bounds = flat_bounds(1, pv_lo, pv_hi, d_lo, d_hi);
    const auto mc_a = build_mpc_problem(table_params(1), bounds, {x0, prev},
                                        GainMode::make_adaptive());
    const auto mc_f = build_mpc_problem(table_params(1), bounds, {x0, prev},
                                        GainMode::make_fixed(0.5, 0.5));
    const auto sa = miblp::solve(mc_a.problem, tight_opts());
    const auto sf = miblp::solve(mc_f.problem, tight_opts());
    if (sf.status == miblp::SolveStatus::infeasible) continue;
    REQUIRE(sa.status == miblp::SolveStatus::optimal);
    REQUIRE(sf.status == miblp::SolveStatus::optimal);
    CHECK_MESSAGE(sa.objective <= sf.objective + 1e-8, "instance ", it,
                  " adaptive ", sa.objective, " fixed ", sf.objective);
  }
}

TEST_CASE("validate_solution measures constructed violations") {
  const auto mc = build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.0, 0.5, 0.5, 0.7), {0.3, 1},
                                    GainMode::make_adaptive());
  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  CHECK(miblp::validate_solution(mc.problem, sol.values).within(1e-7));

  auto bad = sol.values;
  bad[mc.map.x[0][1]] = mc.params.x_max + 0.1;
  const auto rep = miblp::validate_solution(mc.problem, bad);
  CHECK(rep.bound == doctest::Approx(0.1).epsilon(1e-6));
  CHECK_THROWS_AS(miblp::validate_solution(mc.problem, std::vector<double>(3)),
                  std::invalid_argument);
}

TEST_CASE("oracle point validates to 1e-9 and bounds the solver (J=1 adaptive)") {
  const auto mc = build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.3, 0.9, 0.7, 1.0), {0.5, 1},
                                    GainMode::make_adaptive());
  const auto oracle = miblp::grid_oracle(make_oracle_spec(mc), 32);
  REQUIRE(oracle.found);
  const auto vals = controls_to_values(mc, oracle);
  CHECK(miblp::validate_solution(mc.problem, vals).within(1e-9));

  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  CHECK(sol.objective <= oracle.objective + 1e-6 * (1.0 + std::fabs(sol.objective)));
  CHECK(miblp::validate_solution(mc.problem, sol.values).within(1e-7));
}

TEST_CASE("J=2 reference parameters solve and respect the oracle bound") {
  const auto mc = build_mpc_problem(table_params(2),
                                    flat_bounds(2, 0.4, 1.1, 0.75, 1.05),
                                    {0.3, 1}, GainMode::make_adaptive());
  const auto sol = miblp::solve(mc.problem, tight_opts());
  REQUIRE(sol.status == miblp::SolveStatus::optimal);
  CHECK(miblp::validate_solution(mc.problem, sol.values).within(1e-7));
  const auto oracle = miblp::grid_oracle(make_oracle_spec(mc), 6, 4);
  REQUIRE(oracle.found);
  CHECK(sol.objective <= oracle.objective + 1e-6 * (1.0 + std::fabs(sol.objective)));
  const auto vals = controls_to_values(mc, oracle);
  CHECK(miblp::validate_solution(mc.problem, vals).within(1e-9));
}

TEST_CASE("oracle grid refinement is monotone") {
  const auto mc = build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.2, 0.8, 0.7, 0.9), {0.5, 1},
                                    GainMode::make_fixed(0.5, 0.5));
  const auto spec = make_oracle_spec(mc);
  double prev = std::numeric_limits<double>::infinity();
  for (int res : {8, 16, 32}) {
    const auto o = miblp::grid_oracle(spec, res);
    REQUIRE(o.found);
    CHECK(o.objective <= prev + 1e-12);
    prev = o.objective;
  }
}

TEST_CASE("oracle distinguishes empty grid from infeasibility report") {
  // demand far above what the units can deliver: no feasible grid point
  auto p = table_params(1);
  const auto mc = build_mpc_problem(p, flat_bounds(1, 0.0, 0.0, 3.9, 3.95),
                                    {0.3, 1}, GainMode::make_fixed(0.5, 0.5));
  const auto o = miblp::grid_oracle(make_oracle_spec(mc), 8);
  CHECK_FALSE(o.found);
  CHECK(o.evaluated > 0);
}

TEST_CASE("oracle is deterministic across worker counts") {
  const auto mc = build_mpc_problem(table_params(1),
                                    flat_bounds(1, 0.3, 0.9, 0.7, 1.0), {0.5, 1},
                                    GainMode::make_adaptive());
  const auto spec = make_oracle_spec(mc);
  const auto a = miblp::grid_oracle(spec, 12, 1);
  const auto b = miblp::grid_oracle(spec, 12, 4);
  REQUIRE(a.found);
  REQUIRE(b.found);
  CHECK(a.objective == b.objective);
  for (size_t j = 0; j < a.u_b.size(); ++j) {
    CHECK(a.u_b[j] == b.u_b[j]);
    CHECK(a.u_pv[j] == b.u_pv[j]);
    CHECK(a.chi_b[j] == b.chi_b[j]);
  }
}

}  // TEST_SUITE
