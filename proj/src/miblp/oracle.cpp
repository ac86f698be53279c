#include "mgmpc/miblp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace mgmpc::miblp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTol = 1e-12;

struct StepChoice {
  double u_f = 0.0, u_b = 0.0, u_pv = 0.0;
  double chi_f = 0.0, chi_b = 0.0;
  int delta = 0;
};

std::vector<double> grid_points(double lo, double hi, int res) {
  if (hi - lo <= 0.0) return {lo};
  std::vector<double> v;
  v.reserve(res + 1);
  for (int i = 0; i <= res; ++i) v.push_back(lo + (hi - lo) * i / res);
  return v;
}

struct Worker {
  const GridOracleSpec* spec = nullptr;
  // control grids
  std::vector<double> gu_f, gu_b, gu_pv, gchi_f, gchi_b;
  std::vector<double> off_uf{0.0};  // u_f when the FC is off
  std::vector<double> one_cf, one_cb;
  long evaluated = 0, feasible = 0;
  double best = kInf;
  long best_idx0 = -1;
  std::vector<StepChoice> cur, best_controls;

  // one sigma branch of the closed-form dispatch
  struct Branch {
    double p_pv, mu, p_f, p_b;
  };

  bool branch_ok(const StepChoice& c, double w, double d, Branch& out) const {
    const GridOracleSpec& s = *spec;
    out.p_pv = std::min(c.u_pv, w);
    if (out.p_pv < s.p_pv_min - kTol) return false;
    const double r = d - (c.delta ? c.u_f : 0.0) - c.u_b - out.p_pv;
    if (c.delta) {
      out.mu = r / (1.0 / c.chi_f + 1.0 / c.chi_b);
      out.p_f = c.u_f + out.mu / c.chi_f;
      out.p_b = c.u_b + out.mu / c.chi_b;
      if (out.p_f < s.p_f_min - kTol || out.p_f > s.p_f_max + kTol) return false;
    } else {
      out.mu = r * c.chi_b;
      out.p_f = 0.0;
      out.p_b = c.u_b + r;
    }
    if (out.mu < s.mu_min - kTol || out.mu > s.mu_max + kTol) return false;
    if (out.p_b < s.p_b_min - kTol || out.p_b > s.p_b_max + kTol) return false;
    return true;
  }

  double stage_cost(const StepChoice& c, const Branch& b, double w,
                    int delta_prev) const {
    const GridOracleSpec& s = *spec;
    const double ref = s.curtail_available ? w : s.p_pv_max;
    const double curt = ref - b.p_pv;
    double l = s.c_fru * c.delta + s.c_fru_prime * b.p_f +
               s.c_fsw * std::fabs(c.delta - delta_prev) +
               s.c_b_loss * b.p_b * b.p_b + s.c_pv_curt * curt * curt;
    return l;
  }

  // evaluates one fully specified step; returns stage worst-case cost and
  // next states, or nullopt-style false when infeasible
  bool eval_step(int j, const StepChoice& c, double xh, double xl,
                 int delta_prev, double& t_out, double& xh_out,
                 double& xl_out) {
    const GridOracleSpec& s = *spec;
    ++evaluated;
    Branch bh, bl;
    if (!branch_ok(c, s.w_pv[j][0], s.demand[j][0], bh)) return false;
    if (!branch_ok(c, s.w_pv[j][1], s.demand[j][1], bl)) return false;
    xh_out = xh - s.delta_t * bh.p_b;
    xl_out = xl - s.delta_t * bl.p_b;
    if (xh_out < s.x_min - kTol || xh_out > s.x_max + kTol) return false;
    if (xl_out < s.x_min - kTol || xl_out > s.x_max + kTol) return false;
    t_out = std::max(stage_cost(c, bh, s.w_pv[j][0], delta_prev),
                     stage_cost(c, bl, s.w_pv[j][1], delta_prev));
    return true;
  }

  void record(double obj, long idx0) {
    ++feasible;
    if (obj < best) {
      best = obj;
      best_idx0 = idx0;
      best_controls = cur;
    }
  }

  void rec(int j, double xh, double xl, int delta_prev, double prefix,
           long idx0) {
    const GridOracleSpec& s = *spec;
    if (j == s.horizon()) {
      record(prefix, idx0);
      return;
    }
    const double disc = std::pow(s.gamma, j + 1);
    StepChoice c;
    for (int delta = 0; delta <= 1; ++delta) {
      c.delta = delta;
      const auto& uf = delta ? gu_f : off_uf;
      for (const double u_f : uf) {
        c.u_f = u_f;
        for (const double u_b : gu_b) {
          c.u_b = u_b;
          for (const double u_pv : gu_pv) {
            c.u_pv = u_pv;
            const auto& gf = (s.adaptive && delta) ? gchi_f : one_cf;
            for (const double chi_f : gf) {
              c.chi_f = chi_f;
              const auto& gb = s.adaptive ? gchi_b : one_cb;
              for (const double chi_b : gb) {
                c.chi_b = chi_b;
                double t, xh2, xl2;
                if (!eval_step(j, c, xh, xl, delta_prev, t, xh2, xl2)) continue;
                const double next = prefix + disc * t;
                if (next >= best) continue;
                cur[j] = c;
                rec(j + 1, xh2, xl2, delta, next, idx0);
              }
            }
          }
        }
      }
    }
  }

  void run_range(long begin, long stride, long total, long c0) {
    const GridOracleSpec& s = *spec;
    for (long idx = begin; idx < total; idx += stride) {
      StepChoice c;
      long r = idx;
      if (idx < c0) {
        c.delta = 0;
        c.u_f = 0.0;
        const long nb = static_cast<long>(gchi_b.size());
        c.chi_b = s.adaptive ? gchi_b[r % nb] : s.fixed_chi_b;
        if (s.adaptive) r /= nb;
        c.chi_f = s.adaptive ? s.chi_f_min : s.fixed_chi_f;
        c.u_pv = gu_pv[r % gu_pv.size()];
        r /= static_cast<long>(gu_pv.size());
        c.u_b = gu_b[r % gu_b.size()];
      } else {
        r -= c0;
        c.delta = 1;
        const long nb = static_cast<long>(gchi_b.size());
        const long nf = static_cast<long>(gchi_f.size());
        if (s.adaptive) {
          c.chi_b = gchi_b[r % nb];
          r /= nb;
          c.chi_f = gchi_f[r % nf];
          r /= nf;
        } else {
          c.chi_b = s.fixed_chi_b;
          c.chi_f = s.fixed_chi_f;
        }
        c.u_pv = gu_pv[r % gu_pv.size()];
        r /= static_cast<long>(gu_pv.size());
        c.u_b = gu_b[r % gu_b.size()];
        r /= static_cast<long>(gu_b.size());
        c.u_f = gu_f[r % gu_f.size()];
      }
      double t, xh2, xl2;
      if (!eval_step(0, c, s.x0, s.x0, s.delta_f_prev, t, xh2, xl2)) continue;
      const double prefix = s.gamma * t;
      if (prefix >= best) continue;
      cur[0] = c;
      rec(1, xh2, xl2, c.delta, prefix, idx);
    }
  }
};

}  // namespace

OracleResult grid_oracle(const GridOracleSpec& spec, int resolution,
                         int worker_count) {
  if (resolution < 1) throw std::invalid_argument("grid_oracle: resolution < 1");
  if (spec.horizon() < 1 ||
      spec.demand.size() != spec.w_pv.size())
    throw std::invalid_argument("grid_oracle: bad horizon data");

  Worker proto;
  proto.spec = &spec;
  proto.gu_f = grid_points(spec.p_f_min, spec.p_f_max, resolution);
  proto.gu_b = grid_points(spec.p_b_min, spec.p_b_max, resolution);
  proto.gu_pv = grid_points(spec.p_pv_min, spec.p_pv_max, resolution);
  proto.gchi_f = grid_points(spec.chi_f_min, spec.chi_f_max, resolution);
  proto.gchi_b = grid_points(spec.chi_b_min, spec.chi_b_max, resolution);
  proto.one_cf = {spec.adaptive ? spec.chi_f_min : spec.fixed_chi_f};
  proto.one_cb = {spec.fixed_chi_b};
  proto.cur.resize(spec.horizon());

  const long nb = spec.adaptive ? static_cast<long>(proto.gchi_b.size()) : 1;
  const long nf = spec.adaptive ? static_cast<long>(proto.gchi_f.size()) : 1;
  const long c0 = static_cast<long>(proto.gu_b.size()) *
                  static_cast<long>(proto.gu_pv.size()) * nb;
  const long c1 = static_cast<long>(proto.gu_f.size()) *
                  static_cast<long>(proto.gu_b.size()) *
                  static_cast<long>(proto.gu_pv.size()) * nf * nb;
  const long total = c0 + c1;

  const int nw = std::max(1, worker_count);
  std::vector<Worker> workers(nw, proto);
  if (nw == 1) {
    workers[0].run_range(0, 1, total, c0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(nw);
    for (int w = 0; w < nw; ++w)
      threads.emplace_back([&, w] { workers[w].run_range(w, nw, total, c0); });
    for (auto& th : threads) th.join();
  }

  OracleResult res;
  int win = -1;
  for (int w = 0; w < nw; ++w) {
    res.evaluated += workers[w].evaluated;
    res.feasible += workers[w].feasible;
    if (workers[w].best_idx0 < 0) continue;
    if (win < 0 || workers[w].best < workers[win].best ||
        (workers[w].best == workers[win].best &&
         workers[w].best_idx0 < workers[win].best_idx0))
      win = w;
  }
  if (win < 0) return res;
  const Worker& w = workers[win];
  res.found = true;
  res.objective = w.best;
  for (const StepChoice& c : w.best_controls) {
    res.u_f.push_back(c.delta ? c.u_f : 0.0);
    res.u_b.push_back(c.u_b);
    res.u_pv.push_back(c.u_pv);
    res.chi_f.push_back(c.chi_f);
    res.chi_b.push_back(c.chi_b);
    res.delta_f.push_back(c.delta);
  }
  return res;
}

}  // namespace mgmpc::miblp
