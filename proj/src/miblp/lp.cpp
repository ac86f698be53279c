#include "mgmpc/miblp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mgmpc::miblp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;
constexpr double kPivotTol = 1e-11;
constexpr double kRatioTie = 1e-11;
}  // namespace

void LpSolver::load(const Lp& lp) {
  lp_ = &lp;
  m_ = static_cast<int>(lp.rows.size());
  n_ = lp.nvars;
  ncols_ = n_ + m_;

  cols_.assign(static_cast<size_t>(ncols_), {});
  lob_.assign(static_cast<size_t>(ncols_), 0.0);
  upb_.assign(static_cast<size_t>(ncols_), 0.0);
  rhs_.assign(static_cast<size_t>(m_), 0.0);

  for (int j = 0; j < n_; ++j) {
    lob_[j] = lp.lo[j];
    upb_[j] = lp.hi[j];
  }
  for (int i = 0; i < m_; ++i) {
    const LinearConstraint& r = lp.rows[i];
    rhs_[i] = r.rhs;
    for (const LinTerm& t : r.terms)
      if (t.coef != 0.0) cols_[t.var].push_back({i, t.coef});
    const int s = n_ + i;
    cols_[s].push_back({i, 1.0});
    switch (r.sense) {
      case Sense::le: lob_[s] = 0.0; upb_[s] = kInf; break;
      case Sense::eq: lob_[s] = 0.0; upb_[s] = 0.0; break;
      case Sense::ge: lob_[s] = -kInf; upb_[s] = 0.0; break;
    }
  }
}

void LpSolver::cold_basis() {
  basic_.resize(static_cast<size_t>(m_));
  stat_.assign(static_cast<size_t>(ncols_), 0);
  for (int j = 0; j < n_; ++j) {
    // start at the finite bound closer to zero
    stat_[j] = (std::fabs(lob_[j]) <= std::fabs(upb_[j])) ? 0 : 1;
  }
  for (int i = 0; i < m_; ++i) {
    const int s = n_ + i;
    stat_[s] = 2;
    basic_[i] = s;
  }
}

bool LpSolver::init_basis(const LpBasis* warm) {
  if (warm == nullptr || warm->empty()) {
    cold_basis();
    return true;
  }
  if (static_cast<int>(warm->basic.size()) != m_ ||
      static_cast<int>(warm->stat.size()) != ncols_) {
    cold_basis();
    return true;
  }
  basic_ = warm->basic;
  stat_ = warm->stat;
  int nb = 0;
  for (int i = 0; i < m_; ++i) {
    const int c = basic_[i];
    if (c < 0 || c >= ncols_ || stat_[c] != 2) {
      cold_basis();
      return true;
    }
  }
  for (int j = 0; j < ncols_; ++j) {
    if (stat_[j] == 2) {
      ++nb;
    } else if (stat_[j] == 0 && lob_[j] == -kInf) {
      stat_[j] = 1;  // bound vanished relative to the warm source
    } else if (stat_[j] == 1 && upb_[j] == kInf) {
      stat_[j] = 0;
    }
  }
  if (nb != m_) cold_basis();
  return true;
}

bool LpSolver::refactor() {
  lu_.assign(static_cast<size_t>(m_) * m_, 0.0);
  perm_.assign(static_cast<size_t>(m_), 0);
  etas_.clear();
  for (int i = 0; i < m_; ++i)
    for (const LinTerm& t : cols_[basic_[i]]) lu_[t.var + i * m_] += t.coef;

  for (int k = 0; k < m_; ++k) {
    int p = k;
    double best = std::fabs(lu_[k + k * m_]);
    for (int i = k + 1; i < m_; ++i) {
      const double v = std::fabs(lu_[i + k * m_]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best < 1e-12) return false;
    perm_[k] = p;
    if (p != k)
      for (int j = 0; j < m_; ++j) std::swap(lu_[k + j * m_], lu_[p + j * m_]);
    const double piv = lu_[k + k * m_];
    for (int i = k + 1; i < m_; ++i) {
      const double f = (lu_[i + k * m_] /= piv);
      if (f != 0.0)
        for (int j = k + 1; j < m_; ++j) lu_[i + j * m_] -= f * lu_[k + j * m_];
    }
  }
  return true;
}

void LpSolver::ftran(std::vector<double>& v) const {
  for (int k = 0; k < m_; ++k)
    if (perm_[k] != k) std::swap(v[k], v[perm_[k]]);
  for (int k = 0; k < m_; ++k) {
    const double vk = v[k];
    if (vk != 0.0)
      for (int i = k + 1; i < m_; ++i) v[i] -= lu_[i + k * m_] * vk;
  }
  for (int k = m_ - 1; k >= 0; --k) {
    const double vk = (v[k] /= lu_[k + k * m_]);
    if (vk != 0.0)
      for (int i = 0; i < k; ++i) v[i] -= lu_[i + k * m_] * vk;
  }
  for (const Eta& e : etas_) {
    const double t = v[e.r] / e.d[e.r];
    if (t != 0.0)
      for (int i = 0; i < m_; ++i) v[i] -= e.d[i] * t;
    v[e.r] = t;
  }
}

void LpSolver::btran(std::vector<double>& v) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    const Eta& e = *it;
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (i != e.r) s += e.d[i] * v[i];
    v[e.r] = (v[e.r] - s) / e.d[e.r];
  }
  // solve U^T z = v (U^T lower triangular)
  for (int k = 0; k < m_; ++k) {
    double s = v[k];
    for (int i = 0; i < k; ++i) s -= lu_[i + k * m_] * v[i];
    v[k] = s / lu_[k + k * m_];
  }
  // solve L^T w = z (unit diagonal)
  for (int k = m_ - 1; k >= 0; --k) {
    double s = v[k];
    for (int i = k + 1; i < m_; ++i) s -= lu_[i + k * m_] * v[i];
    v[k] = s;
  }
  for (int k = m_ - 1; k >= 0; --k)
    if (perm_[k] != k) std::swap(v[k], v[perm_[k]]);
}

void LpSolver::compute_basic_values() {
  std::vector<double> r = rhs_;
  for (int j = 0; j < ncols_; ++j) {
    if (stat_[j] == 2) continue;
    const double v = stat_[j] == 0 ? lob_[j] : upb_[j];
    if (v != 0.0)
      for (const LinTerm& t : cols_[j]) r[t.var] -= t.coef * v;
  }
  ftran(r);
  xb_ = std::move(r);
  pos_.assign(static_cast<size_t>(ncols_), -1);
  for (int i = 0; i < m_; ++i) pos_[basic_[i]] = i;
}

double LpSolver::infeasibility() const {
  double s = 0.0;
  for (int i = 0; i < m_; ++i) {
    const int c = basic_[i];
    if (xb_[i] < lob_[c]) s += lob_[c] - xb_[i];
    if (xb_[i] > upb_[c]) s += xb_[i] - upb_[c];
  }
  return s;
}

LpResult LpSolver::solve(const Lp& lp, const LpBasis* warm) {
  load(lp);

  if (m_ == 0) {
    // box-only problem: each variable sits at the bound favored by its cost
    LpResult res;
    res.status = LpStatus::optimal;
    res.x.resize(static_cast<size_t>(n_));
    res.basis.stat.assign(static_cast<size_t>(n_), 0);
    for (int j = 0; j < n_; ++j) {
      const bool upper = lp.cost[j] < 0.0;
      res.x[j] = upper ? upb_[j] : lob_[j];
      res.basis.stat[j] = upper ? 1 : 0;
      res.objective += lp.cost[j] * res.x[j];
    }
    return res;
  }

  init_basis(warm);
  if (!refactor()) {
    cold_basis();
    if (!refactor()) {
      LpResult res;
      res.status = LpStatus::numeric_error;
      return res;
    }
  }
  compute_basic_values();
  return run(lp);
}

LpResult LpSolver::run(const Lp& lp) {
  LpResult res;
  const int max_iter = 5000 + 50 * (m_ + n_);
  int phase = infeasibility() > kFeasTol ? 1 : 2;
  int deg_count = 0;
  bool bland = false;
  int etas_since = 0;

  double cmax = 0.0;
  for (int j = 0; j < n_; ++j) cmax = std::max(cmax, std::fabs(lp.cost[j]));
  const double eps_d = 1e-11 * (1.0 + cmax);

  std::vector<double> y(static_cast<size_t>(m_));
  std::vector<double> d(static_cast<size_t>(m_));

  auto column_dot = [&](int j, const std::vector<double>& v) {
    double s = 0.0;
    for (const LinTerm& t : cols_[j]) s += t.coef * v[t.var];
    return s;
  };
  auto reduced_cost = [&](int j, const std::vector<double>& yv, int ph) {
    const double cj = (ph == 2 && j < n_) ? lp.cost[j] : 0.0;
    return cj - column_dot(j, yv);
  };

  bool restarted = false;
  auto refactor_or_reset = [&]() {
    if (refactor()) return true;
    if (restarted) return false;
    restarted = true;  // basis went singular: rebuild from scratch once
    cold_basis();
    return refactor();
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (etas_since >= 64) {
      if (!refactor_or_reset()) {
        std::fprintf(stderr, "[lp] refac-A m=%d\n", m_);
        res.status = LpStatus::numeric_error;
        res.iterations = iter;
        return res;
      }
      compute_basic_values();
      etas_since = 0;
      if (phase == 2 && infeasibility() > 10 * kFeasTol) phase = 1;
    }

    if (phase == 1 && infeasibility() <= kFeasTol) phase = 2;

    // basic cost vector for the current phase
    for (int i = 0; i < m_; ++i) {
      const int c = basic_[i];
      if (phase == 1) {
        if (xb_[i] < lob_[c] - kFeasTol) y[i] = -1.0;
        else if (xb_[i] > upb_[c] + kFeasTol) y[i] = 1.0;
        else y[i] = 0.0;
      } else {
        y[i] = c < n_ ? lp.cost[c] : 0.0;
      }
    }
    btran(y);

    // pricing
    int q = -1;
    double qscore = 0.0;
    for (int j = 0; j < ncols_; ++j) {
      if (stat_[j] == 2 || lob_[j] == upb_[j]) continue;
      const double rj = reduced_cost(j, y, phase);
      const bool elig = (stat_[j] == 0 && rj < -eps_d) || (stat_[j] == 1 && rj > eps_d);
      if (!elig) continue;
      if (bland) {
        q = j;
        break;
      }
      const double sc = std::fabs(rj);
      if (sc > qscore) {
        qscore = sc;
        q = j;
      }
    }

    if (q < 0) {
      if (etas_since > 0) {
        // confirm with a fresh factorization before declaring a verdict
        if (!refactor_or_reset()) {
          std::fprintf(stderr, "[lp] refac-B m=%d\n", m_);
          res.status = LpStatus::numeric_error;
          res.iterations = iter;
          return res;
        }
        compute_basic_values();
        etas_since = 0;
        if (phase == 2 && infeasibility() > kFeasTol) phase = 1;
        continue;
      }
      if (phase == 1) {
        res.status = LpStatus::infeasible;
        res.iterations = iter;
        return res;
      }
      if (infeasibility() > 1e-7) {
        std::fprintf(stderr, "[lp] final-inf=%.3g restarted=%d m=%d\n", infeasibility(), (int)restarted, m_);
        if (!restarted) {
          restarted = true;
          cold_basis();
          if (refactor()) {
            compute_basic_values();
            etas_since = 0;
            phase = 1;
            continue;
          }
        }
        res.status = LpStatus::numeric_error;
        res.iterations = iter;
        return res;
      }
      break;  // optimal
    }

    const int dir = stat_[q] == 0 ? 1 : -1;
    for (int i = 0; i < m_; ++i) d[i] = 0.0;
    for (const LinTerm& t : cols_[q]) d[t.var] += t.coef;
    ftran(d);

    const double flip = upb_[q] - lob_[q];
    double theta = kInf;
    int leave = -1;  // -1 = bound flip on q
    int leave_to = 0;

    if (phase == 1) {
      // piecewise-linear (long step) phase-1 ratio test: walk through the
      // breakpoints where infeasible basics regain feasibility, updating
      // the infeasibility slope, and stop at the first hard bound or when
      // the slope turns nonnegative
      struct Ev {
        double t;
        double rate;  // |d row rate|, pivot magnitude proxy
        double add;   // slope increase when passing (0 for hard stops)
        int i;        // basis row, -1 for the entering bound flip
        int to;
        bool hard;
      };
      std::vector<Ev> evs;
      evs.reserve(static_cast<size_t>(m_) + 1);
      double slope = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double rate = -dir * d[i];
        if (std::fabs(rate) <= kPivotTol) continue;
        const int c = basic_[i];
        const double v = xb_[i];
        if (v < lob_[c] - kFeasTol) {
          slope -= rate;  // d(lo - v)/dtheta
          if (rate > 0) {
            evs.push_back({std::max(0.0, (lob_[c] - v) / rate), std::fabs(rate),
                           rate, i, 0, false});
            if (upb_[c] != kInf)
              evs.push_back({std::max(0.0, (upb_[c] - v) / rate),
                             std::fabs(rate), 0.0, i, 1, true});
          }
        } else if (v > upb_[c] + kFeasTol) {
          slope += rate;  // d(v - up)/dtheta
          if (rate < 0) {
            evs.push_back({std::max(0.0, (upb_[c] - v) / rate), std::fabs(rate),
                           -rate, i, 1, false});
            if (lob_[c] != -kInf)
              evs.push_back({std::max(0.0, (lob_[c] - v) / rate),
                             std::fabs(rate), 0.0, i, 0, true});
          }
        } else if (rate > 0) {
          if (upb_[c] != kInf)
            evs.push_back({std::max(0.0, (upb_[c] - v) / rate), std::fabs(rate),
                           0.0, i, 1, true});
        } else if (lob_[c] != -kInf) {
          evs.push_back({std::max(0.0, (lob_[c] - v) / rate), std::fabs(rate),
                         0.0, i, 0, true});
        }
      }
      if (std::isfinite(flip))
        evs.push_back({flip, 1.0, 0.0, -1, dir > 0 ? 1 : 0, true});
      std::sort(evs.begin(), evs.end(), [&](const Ev& a, const Ev& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.hard != b.hard) return a.hard;
        if (a.rate != b.rate) return a.rate > b.rate;
        const int va = a.i < 0 ? q : basic_[a.i];
        const int vb = b.i < 0 ? q : basic_[b.i];
        return va < vb;
      });
      double t_stop = kInf;
      for (const Ev& ev : evs) {
        if (ev.hard) {
          t_stop = ev.t;
          break;
        }
        slope += ev.add;
        if (slope >= -1e-12) {
          t_stop = ev.t;
          break;
        }
      }
      if (!std::isfinite(t_stop) && !evs.empty()) t_stop = evs.back().t;
      if (std::isfinite(t_stop)) {
        // any event at or (within tolerance) before the stop is a valid
        // place to land; take the numerically best pivot among them
        const double win = t_stop + 1e-9 * (1.0 + t_stop);
        double best_rate_p1 = -1.0;
        for (const Ev& ev : evs) {
          if (ev.t > win) break;
          if (ev.rate > best_rate_p1) {
            best_rate_p1 = ev.rate;
            theta = ev.t;
            leave = ev.i;
            leave_to = ev.to;
          }
        }
      }
    } else {
      // Harris-style two-pass ratio test: pass 1 finds the tightest
      // breakpoint with bounds relaxed by the feasibility tolerance, pass 2
      // picks the largest pivot whose true breakpoint fits inside that
      // window. Blocked bounds may overshoot by at most kFeasTol.
      auto breakpoint = [&](int i, double& t, int& to, double relax) {
        const double rate = -dir * d[i];
        if (std::fabs(rate) <= kPivotTol) return false;
        const int c = basic_[i];
        const double v = xb_[i];
        if (rate > 0) {
          if (upb_[c] == kInf) return false;
          t = (upb_[c] - v + relax) / rate;
          to = 1;
        } else {
          if (lob_[c] == -kInf) return false;
          t = (lob_[c] - v - relax) / rate;
          to = 0;
        }
        if (t < 0.0) t = 0.0;
        return true;
      };

      double theta_limit = std::isfinite(flip) ? flip : kInf;
      for (int i = 0; i < m_; ++i) {
        double t;
        int to;
        if (breakpoint(i, t, to, kFeasTol)) theta_limit = std::min(theta_limit, t);
      }

      double best_rate = 0.0;
      if (std::isfinite(theta_limit)) {
        for (int i = 0; i < m_; ++i) {
          double t;
          int to;
          if (!breakpoint(i, t, to, 0.0)) continue;
          if (t > theta_limit) continue;
          const double r0 = std::fabs(d[i]);
          bool take = false;
          if (leave < 0) {
            take = true;
          } else if (bland) {
            if (basic_[i] < basic_[leave]) take = true;
          } else if (r0 > best_rate + 1e-12 ||
                     (std::fabs(r0 - best_rate) <= 1e-12 &&
                      basic_[i] < basic_[leave])) {
            take = true;
          }
          if (take) {
            leave = i;
            leave_to = to;
            best_rate = r0;
            theta = t;
          }
        }
        if (leave < 0 || (std::isfinite(flip) && flip < theta)) {
          // the entering variable's own range is the binding limit
          leave = -1;
          theta = flip;
        }
      }
    }

    if (!std::isfinite(theta)) {
      if (phase == 1) {
        std::fprintf(stderr, "[lp] phase1-ray m=%d q=%d\n", m_, q);
        res.status = LpStatus::numeric_error;  // phase-1 rays cannot happen
        res.iterations = iter;
        return res;
      }
      std::fprintf(stderr, "[lp] unbounded m=%d q=%d\n", m_, q);
      res.status = LpStatus::unbounded;
      res.iterations = iter;
      return res;
    }

    // move the basics
    if (theta != 0.0)
      for (int i = 0; i < m_; ++i) xb_[i] += theta * (-dir * d[i]);

    if (leave < 0) {
      stat_[q] = stat_[q] == 0 ? 1 : 0;  // bound flip
      deg_count = 0;
      bland = false;
      continue;
    }

    const int lv = basic_[leave];
    stat_[lv] = static_cast<uint8_t>(leave_to);
    pos_[lv] = -1;
    basic_[leave] = q;
    pos_[q] = leave;
    const double enter_from = stat_[q] == 0 ? lob_[q] : upb_[q];
    stat_[q] = 2;
    xb_[leave] = enter_from + dir * theta;

    etas_.push_back({leave, d});
    ++etas_since;
    if (std::fabs(d[leave]) < 1e-7) etas_since = 64;  // force refactor next pass

    if (theta <= kRatioTie) {
      if (++deg_count > 200 + 2 * (m_ + n_)) bland = true;
    } else {
      deg_count = 0;
      bland = false;
    }
  }

  if (iter >= max_iter) {
    std::fprintf(stderr, "[lp] iteration_limit m=%d inf=%.3g phase=%d\n", m_, infeasibility(), phase);
    res.status = LpStatus::iteration_limit;
    res.iterations = iter;
    return res;
  }

  // final hygiene: fresh factorization already confirmed optimality above
  res.status = LpStatus::optimal;
  res.iterations = iter;
  res.x.assign(static_cast<size_t>(n_), 0.0);
  for (int j = 0; j < n_; ++j)
    res.x[j] = stat_[j] == 2 ? xb_[pos_[j]] : (stat_[j] == 0 ? lob_[j] : upb_[j]);
  res.objective = 0.0;
  for (int j = 0; j < n_; ++j) res.objective += lp.cost[j] * res.x[j];
  res.basis.basic = basic_;
  res.basis.stat = stat_;
  return res;
}

}  // namespace mgmpc::miblp
