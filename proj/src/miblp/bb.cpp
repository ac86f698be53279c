#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mgmpc/miblp/lp.hpp"
#include "mgmpc/miblp/mccormick.hpp"
#include "mgmpc/miblp/solve.hpp"

namespace mgmpc::miblp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kIntTol = 1e-9;
constexpr double kQuadTol = 1e-10;
constexpr double kCutViol = 1e-8;
constexpr double kDropSlack = 1e-6;
constexpr int kBatchWidth = 4;
constexpr int kLightCutRounds = 6;
constexpr int kFullKelleyRounds = 48;

struct CutKey {
  int atom;
  double e0;
};

struct BranchEdit {
  int var;
  double lo, hi;
};

struct Chain {
  BranchEdit edit;
  std::shared_ptr<const Chain> up;
};

struct Node {
  long id = 0;
  double bound = -kInf;
  int depth = 0;
  std::shared_ptr<const Chain> chain;
  std::shared_ptr<const std::vector<CutKey>> cuts;
  std::shared_ptr<const LpBasis> warm;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

struct EvalOut {
  enum class Kind { infeasible, pruned, fathom, branch, numeric };
  Kind kind = Kind::numeric;
  double bound = kInf;
  std::vector<BranchEdit> child_edits;
  std::shared_ptr<const std::vector<CutKey>> child_cuts;
  std::shared_ptr<const LpBasis> child_warm;
  std::vector<CutKey> pool_add;
  bool has_point = false;
  std::vector<double> point;
  double point_obj = kInf;
};

class Engine {
 public:
  Engine(const MiblpProblem& p, const SolveOptions& o) : prob_(p), opts_(o) {
    n_ = p.var_count();
    // canonical rows: merged duplicate terms keep single-row tightening sound
    rows_.reserve(p.rows.size());
    for (const LinearConstraint& r : p.rows) rows_.push_back(canonical(r));
    cost_.assign(n_, 0.0);
    for (const LinTerm& t : p.objective) cost_[t.var] += t.coef;
    root_lo_.resize(n_);
    root_hi_.resize(n_);
    for (int j = 0; j < n_; ++j) {
      root_lo_[j] = p.vars[j].lo;
      root_hi_[j] = p.vars[j].hi;
    }
    atom_lo_.resize(p.atoms.size());
    atom_hi_.resize(p.atoms.size());
    quantum_.resize(p.atoms.size());
    local_eps_.resize(p.atoms.size());
    pool_.resize(p.atoms.size());
    for (size_t a = 0; a < p.atoms.size(); ++a) {
      double lo = p.atoms[a].expr_const, hi = p.atoms[a].expr_const;
      for (const LinTerm& t : p.atoms[a].expr) {
        if (t.coef >= 0) {
          lo += t.coef * root_lo_[t.var];
          hi += t.coef * root_hi_[t.var];
        } else {
          lo += t.coef * root_hi_[t.var];
          hi += t.coef * root_lo_[t.var];
        }
      }
      atom_lo_[a] = lo;
      atom_hi_[a] = hi;
      // pool spacing is coarse (bound quality only); locally a node may
      // add tangents as close as it needs for convergence
      quantum_[a] = 1e-3 * (1.0 + std::fabs(lo) + std::fabs(hi));
      local_eps_[a] = 1e-9 * (1.0 + std::fabs(lo) + std::fabs(hi));
    }
  }

  MiblpSolution run();

 private:
  static LinearConstraint canonical(const LinearConstraint& r);
  double margin(double inc) const {
    return std::max(opts_.abs_gap, opts_.rel_gap * std::fabs(inc));
  }

  void node_bounds(const Node& nd, std::vector<double>& lo,
                   std::vector<double>& hi) const;
  bool propagate(std::vector<double>& lo, std::vector<double>& hi,
                 double cutoff) const;
  LinearConstraint tangent_row(const CutKey& c) const;
  Lp build_lp(const std::vector<double>& lo, const std::vector<double>& hi,
              const std::vector<CutKey>& cuts) const;
  double eval_expr(const QuadAtom& a, const std::vector<double>& x) const;
  bool pool_has(int atom, double e0) const;
  EvalOut evaluate(const Node& nd, bool has_inc, double inc, LpSolver& lps) const;
  std::optional<std::pair<std::vector<double>, double>> polish(
      const Lp& node_lp, const LpBasis& node_basis,
      const std::vector<double>& lo, const std::vector<double>& hi,
      const std::vector<double>& x, std::vector<CutKey>& pool_add,
      LpSolver& lps) const;

  void root_obbt(double inc);

  const MiblpProblem& prob_;
  SolveOptions opts_;
  int n_ = 0;
  std::vector<LinearConstraint> rows_;
  std::vector<double> cost_, root_lo_, root_hi_;
  std::vector<double> atom_lo_, atom_hi_, quantum_, local_eps_;
  std::vector<std::vector<double>> pool_;  // per atom, sorted tangent points
};

LinearConstraint Engine::canonical(const LinearConstraint& r) {
  LinearConstraint out;
  out.sense = r.sense;
  out.rhs = r.rhs;
  std::vector<LinTerm> ts = r.terms;
  std::sort(ts.begin(), ts.end(),
            [](const LinTerm& a, const LinTerm& b) { return a.var < b.var; });
  for (const LinTerm& t : ts) {
    if (!out.terms.empty() && out.terms.back().var == t.var)
      out.terms.back().coef += t.coef;
    else
      out.terms.push_back(t);
  }
  return out;
}

void Engine::node_bounds(const Node& nd, std::vector<double>& lo,
                         std::vector<double>& hi) const {
  lo = root_lo_;
  hi = root_hi_;
  for (const Chain* c = nd.chain.get(); c != nullptr; c = c->up.get()) {
    lo[c->edit.var] = std::max(lo[c->edit.var], c->edit.lo);
    hi[c->edit.var] = std::min(hi[c->edit.var], c->edit.hi);
  }
}

bool Engine::propagate(std::vector<double>& lo, std::vector<double>& hi,
                       double cutoff) const {
  auto infl = [](double v) { return 1e-12 + 1e-12 * std::fabs(v); };

  // single-row interval tightening on a term list; senses via flags
  auto tighten_terms = [&](const std::vector<LinTerm>& terms, double lo_rhs,
                           double hi_rhs) -> bool {
    if (std::isfinite(hi_rhs)) {
      double minact = 0.0;
      bool ok = true;
      for (const LinTerm& t : terms) {
        minact += t.coef >= 0 ? t.coef * lo[t.var] : t.coef * hi[t.var];
        if (!std::isfinite(minact)) ok = false;
      }
      if (ok) {
        if (minact > hi_rhs + 1e-7) return false;
        for (const LinTerm& t : terms) {
          if (t.coef == 0.0) continue;
          const double rest =
              minact - (t.coef >= 0 ? t.coef * lo[t.var] : t.coef * hi[t.var]);
          const double room = (hi_rhs - rest) / t.coef;
          if (t.coef > 0) {
            if (room + infl(room) < hi[t.var]) hi[t.var] = room + infl(room);
          } else {
            if (room - infl(room) > lo[t.var]) lo[t.var] = room - infl(room);
          }
          if (lo[t.var] > hi[t.var] + 1e-9) return false;
        }
      }
    }
    if (std::isfinite(lo_rhs)) {
      double maxact = 0.0;
      bool ok = true;
      for (const LinTerm& t : terms) {
        maxact += t.coef >= 0 ? t.coef * hi[t.var] : t.coef * lo[t.var];
        if (!std::isfinite(maxact)) ok = false;
      }
      if (ok) {
        if (maxact < lo_rhs - 1e-7) return false;
        for (const LinTerm& t : terms) {
          if (t.coef == 0.0) continue;
          const double rest =
              maxact - (t.coef >= 0 ? t.coef * hi[t.var] : t.coef * lo[t.var]);
          const double room = (lo_rhs - rest) / t.coef;
          if (t.coef > 0) {
            if (room - infl(room) > lo[t.var]) lo[t.var] = room - infl(room);
          } else {
            if (room + infl(room) < hi[t.var]) hi[t.var] = room + infl(room);
          }
          if (lo[t.var] > hi[t.var] + 1e-9) return false;
        }
      }
    }
    return true;
  };

  std::vector<LinTerm> obj_terms;
  for (int j = 0; j < n_; ++j)
    if (cost_[j] != 0.0) obj_terms.push_back({j, cost_[j]});

  for (int round = 0; round < 3; ++round) {
    // objective cutoff: solutions worth keeping satisfy c'x <= incumbent
    if (std::isfinite(cutoff) && !obj_terms.empty()) {
      if (!tighten_terms(obj_terms, -std::numeric_limits<double>::infinity(),
                         cutoff))
        return false;
    }
    // quadratic atoms: epi >= w e^2 squeezes both the epigraph variable
    // and the affine expression range
    for (const QuadAtom& a : prob_.atoms) {
      if (a.weight <= 0.0) continue;
      double elo = a.expr_const, ehi = a.expr_const;
      for (const LinTerm& t : a.expr) {
        if (t.coef >= 0) {
          elo += t.coef * lo[t.var];
          ehi += t.coef * hi[t.var];
        } else {
          elo += t.coef * hi[t.var];
          ehi += t.coef * lo[t.var];
        }
      }
      double e2min = 0.0;
      if (elo > 0.0) e2min = elo * elo;
      else if (ehi < 0.0) e2min = ehi * ehi;
      const double s_lo = a.weight * e2min;
      if (s_lo - infl(s_lo) > lo[a.epigraph_var])
        lo[a.epigraph_var] = s_lo - infl(s_lo);
      if (lo[a.epigraph_var] > hi[a.epigraph_var] + 1e-9) return false;
      if (hi[a.epigraph_var] < std::numeric_limits<double>::infinity()) {
        const double cap = std::max(0.0, hi[a.epigraph_var]) / a.weight;
        const double E = std::sqrt(cap);
        if (!tighten_terms(a.expr, -E - a.expr_const - infl(E),
                           E - a.expr_const + infl(E)))
          return false;
      }
    }
    for (const LinearConstraint& r : rows_) {
      // upper-side tightening for <= (and =), lower-side for >= (and =)
      if (r.sense != Sense::ge) {
        double minact = 0.0;
        bool ok = true;
        for (const LinTerm& t : r.terms) {
          minact += t.coef >= 0 ? t.coef * lo[t.var] : t.coef * hi[t.var];
          if (!std::isfinite(minact)) ok = false;
        }
        if (ok) {
          if (minact > r.rhs + 1e-7) return false;
          for (const LinTerm& t : r.terms) {
            if (t.coef == 0.0) continue;
            const double rest =
                minact - (t.coef >= 0 ? t.coef * lo[t.var] : t.coef * hi[t.var]);
            const double room = (r.rhs - rest) / t.coef;
            if (t.coef > 0) {
              if (room + infl(room) < hi[t.var]) hi[t.var] = room + infl(room);
            } else {
              if (room - infl(room) > lo[t.var]) lo[t.var] = room - infl(room);
            }
            if (lo[t.var] > hi[t.var] + 1e-9) return false;
          }
        }
      }
      if (r.sense != Sense::le) {
        double maxact = 0.0;
        bool ok = true;
        for (const LinTerm& t : r.terms) {
          maxact += t.coef >= 0 ? t.coef * hi[t.var] : t.coef * lo[t.var];
          if (!std::isfinite(maxact)) ok = false;
        }
        if (ok) {
          if (maxact < r.rhs - 1e-7) return false;
          for (const LinTerm& t : r.terms) {
            if (t.coef == 0.0) continue;
            const double rest =
                maxact - (t.coef >= 0 ? t.coef * hi[t.var] : t.coef * lo[t.var]);
            const double room = (r.rhs - rest) / t.coef;
            if (t.coef > 0) {
              if (room - infl(room) > lo[t.var]) lo[t.var] = room - infl(room);
            } else {
              if (room + infl(room) < hi[t.var]) hi[t.var] = room + infl(room);
            }
            if (lo[t.var] > hi[t.var] + 1e-9) return false;
          }
        }
      }
    }
    for (const BilinearLink& l : prob_.links) {
      const double alo = lo[l.factor_a], ahi = hi[l.factor_a];
      const double blo = lo[l.factor_b], bhi = hi[l.factor_b];
      const double c1 = alo * blo, c2 = alo * bhi, c3 = ahi * blo, c4 = ahi * bhi;
      double plo = std::min(std::min(c1, c2), std::min(c3, c4));
      double phi = std::max(std::max(c1, c2), std::max(c3, c4));
      plo -= infl(plo);
      phi += infl(phi);
      if (plo > lo[l.product]) lo[l.product] = plo;
      if (phi < hi[l.product]) hi[l.product] = phi;
      if (lo[l.product] > hi[l.product] + 1e-9) return false;
      auto div_tighten = [&](int target, double dlo, double dhi) {
        if (dlo > 1e-12 || dhi < -1e-12) {
          const double qlo = lo[l.product], qhi = hi[l.product];
          const double d1 = qlo / dlo, d2 = qlo / dhi, d3 = qhi / dlo, d4 = qhi / dhi;
          double tlo = std::min(std::min(d1, d2), std::min(d3, d4));
          double thi = std::max(std::max(d1, d2), std::max(d3, d4));
          tlo -= infl(tlo);
          thi += infl(thi);
          if (tlo > lo[target]) lo[target] = tlo;
          if (thi < hi[target]) hi[target] = thi;
        }
      };
      div_tighten(l.factor_a, blo, bhi);
      div_tighten(l.factor_b, alo, ahi);
      if (lo[l.factor_a] > hi[l.factor_a] + 1e-9) return false;
      if (lo[l.factor_b] > hi[l.factor_b] + 1e-9) return false;
    }
    for (int j = 0; j < n_; ++j) {
      if (prob_.vars[j].kind != VarKind::binary) continue;
      if (lo[j] > 1e-9) lo[j] = 1.0;
      if (hi[j] < 1.0 - 1e-9) hi[j] = 0.0;
      if (lo[j] > hi[j]) return false;
    }
  }
  return true;
}

LinearConstraint Engine::tangent_row(const CutKey& c) const {
  const QuadAtom& a = prob_.atoms[c.atom];
  LinearConstraint r;
  r.sense = Sense::le;
  const double w = a.weight;
  for (const LinTerm& t : a.expr) r.terms.push_back({t.var, 2.0 * w * c.e0 * t.coef});
  r.terms.push_back({a.epigraph_var, -1.0});
  r.rhs = w * c.e0 * c.e0 - 2.0 * w * c.e0 * a.expr_const;
  return r;
}

Lp Engine::build_lp(const std::vector<double>& lo, const std::vector<double>& hi,
                    const std::vector<CutKey>& cuts) const {
  Lp lp;
  lp.nvars = n_;
  lp.lo = lo;
  lp.hi = hi;
  lp.cost = cost_;
  lp.rows = rows_;
  for (const BilinearLink& l : prob_.links) {
    const FactorBox box{lo[l.factor_a], hi[l.factor_a], lo[l.factor_b],
                        hi[l.factor_b]};
    for (auto& row : mccormick_cuts(l, box)) lp.rows.push_back(std::move(row));
  }
  for (const CutKey& c : cuts) lp.rows.push_back(tangent_row(c));
  return lp;
}

double Engine::eval_expr(const QuadAtom& a, const std::vector<double>& x) const {
  double e = a.expr_const;
  for (const LinTerm& t : a.expr) e += t.coef * x[t.var];
  return e;
}

bool Engine::pool_has(int atom, double e0) const {
  const auto& v = pool_[atom];
  auto it = std::lower_bound(v.begin(), v.end(), e0);
  if (it != v.end() && std::fabs(*it - e0) <= quantum_[atom]) return true;
  if (it != v.begin() && std::fabs(*(it - 1) - e0) <= quantum_[atom]) return true;
  return false;
}

std::optional<std::pair<std::vector<double>, double>> Engine::polish(
    const Lp& node_lp, const LpBasis& node_basis,
    const std::vector<double>& lo, const std::vector<double>& hi,
    const std::vector<double>& x, std::vector<CutKey>& pool_add,
    LpSolver& lps) const {
  // restrict the node LP: fix binaries and every spatial factor, add the
  // now-linear link equations, and warm-start from the node basis
  Lp lp = node_lp;
  LpBasis warm0 = node_basis;
  for (int j = 0; j < n_; ++j) {
    if (prob_.vars[j].kind == VarKind::binary) {
      const double v = std::round(x[j]);
      lp.lo[j] = lp.hi[j] = v;
    }
  }
  for (const BilinearLink& l : prob_.links) {
    const double vb = std::clamp(x[l.factor_b], lo[l.factor_b], hi[l.factor_b]);
    lp.lo[l.factor_b] = lp.hi[l.factor_b] = vb;
    lp.rows.push_back({{{l.product, 1.0}, {l.factor_a, -vb}}, Sense::eq, 0.0});
    warm0.stat.push_back(2);
    warm0.basic.push_back(static_cast<int32_t>(n_ + lp.rows.size() - 1));
  }

  LpResult r = lps.solve(lp, &warm0);
  if (r.status != LpStatus::optimal) r = lps.solve(lp);
  if (r.status != LpStatus::optimal) return std::nullopt;
  std::vector<std::vector<double>> local(prob_.atoms.size());
  auto local_near = [&](int a, double e) {
    const auto& v = local[a];
    auto it = std::lower_bound(v.begin(), v.end(), e);
    if (it != v.end() && std::fabs(*it - e) <= local_eps_[a]) return true;
    if (it != v.begin() && std::fabs(*(it - 1) - e) <= local_eps_[a]) return true;
    return false;
  };
  for (int round = 0; round < kFullKelleyRounds; ++round) {
    std::vector<CutKey> fresh;
    for (size_t a = 0; a < prob_.atoms.size(); ++a) {
      const QuadAtom& atom = prob_.atoms[a];
      if (atom.weight == 0.0) continue;
      const double e = eval_expr(atom, r.x);
      const double viol = atom.weight * e * e - r.x[atom.epigraph_var];
      if (viol > kQuadTol && !local_near(static_cast<int>(a), e)) {
        fresh.push_back({static_cast<int>(a), e});
        auto& v = local[a];
        v.insert(std::lower_bound(v.begin(), v.end(), e), e);
      }
    }
    if (fresh.empty()) break;
    LpBasis warm = r.basis;
    for (const CutKey& c : fresh) {
      lp.rows.push_back(tangent_row(c));
      warm.stat.push_back(2);
      warm.basic.push_back(static_cast<int32_t>(n_ + lp.rows.size() - 1));
      if (!pool_has(c.atom, c.e0)) pool_add.push_back(c);
    }
    r = lps.solve(lp, &warm);
    if (r.status != LpStatus::optimal) r = lps.solve(lp);
    if (r.status != LpStatus::optimal) return std::nullopt;
  }
  // reject if the epigraph hull did not converge
  for (size_t a = 0; a < prob_.atoms.size(); ++a) {
    const QuadAtom& atom = prob_.atoms[a];
    const double e = eval_expr(atom, r.x);
    if (atom.weight * e * e - r.x[atom.epigraph_var] > 100 * kQuadTol)
      return std::nullopt;
  }
  return std::make_pair(std::move(r.x), r.objective);
}

EvalOut Engine::evaluate(const Node& nd, bool has_inc, double inc,
                         LpSolver& lps) const {
  EvalOut out;
  std::vector<double> lo, hi;
  node_bounds(nd, lo, hi);
  if (!propagate(lo, hi, has_inc ? inc : kInf)) {
    out.kind = EvalOut::Kind::infeasible;
    return out;
  }

  std::vector<CutKey> cuts = *nd.cuts;
  // per-atom sorted views of the active tangent points, for dedup
  std::vector<std::vector<double>> active(prob_.atoms.size());
  for (const CutKey& c : cuts) active[c.atom].push_back(c.e0);
  for (auto& v : active) std::sort(v.begin(), v.end());
  auto active_has = [&](int atom, double e0) {
    const auto& v = active[atom];
    auto it = std::lower_bound(v.begin(), v.end(), e0);
    if (it != v.end() && std::fabs(*it - e0) <= local_eps_[atom]) return true;
    if (it != v.begin() && std::fabs(*(it - 1) - e0) <= local_eps_[atom])
      return true;
    return false;
  };
  auto add_cut = [&](Lp& lp, LpBasis& warm, const CutKey& c, bool to_pool) {
    lp.rows.push_back(tangent_row(c));
    warm.stat.push_back(2);
    warm.basic.push_back(static_cast<int32_t>(n_ + lp.rows.size() - 1));
    cuts.push_back(c);
    auto& v = active[c.atom];
    v.insert(std::lower_bound(v.begin(), v.end(), c.e0), c.e0);
    if (to_pool && !pool_has(c.atom, c.e0)) out.pool_add.push_back(c);
  };

  Lp lp = build_lp(lo, hi, cuts);
  LpResult r;
  {
    const LpBasis* warm = nd.warm && !nd.warm->empty() ? nd.warm.get() : nullptr;
    r = lps.solve(lp, warm);
    if (r.status != LpStatus::optimal && warm)
      r = lps.solve(lp);  // cold retry; also re-checks infeasibility claims
  }
  if (r.status == LpStatus::infeasible) {
    out.kind = EvalOut::Kind::infeasible;
    return out;
  }
  if (r.status != LpStatus::optimal) {
    out.kind = EvalOut::Kind::numeric;
    out.bound = nd.bound;
    return out;
  }

  // cutting loop: violated pool cuts plus a few fresh tangents
  for (int round = 0; round < kLightCutRounds; ++round) {
    LpBasis warm = r.basis;
    int added = 0;
    for (size_t a = 0; a < prob_.atoms.size(); ++a) {
      const QuadAtom& atom = prob_.atoms[a];
      if (atom.weight == 0.0) continue;
      const double sval = r.x[atom.epigraph_var];
      const double e = eval_expr(atom, r.x);
      // most violated pool entry, then a fresh tangent at the point itself
      double best_viol = kCutViol;
      double best_e0 = 0.0;
      bool have = false;
      for (const double e0 : pool_[a]) {
        if (active_has(static_cast<int>(a), e0)) continue;
        const double viol = atom.weight * (2.0 * e0 * e - e0 * e0) - sval;
        if (viol > best_viol) {
          best_viol = viol;
          best_e0 = e0;
          have = true;
        }
      }
      if (have) {
        add_cut(lp, warm, {static_cast<int>(a), best_e0}, false);
        ++added;
      }
      const double viol = atom.weight * e * e - sval;
      if (viol > kCutViol && !active_has(static_cast<int>(a), e)) {
        add_cut(lp, warm, {static_cast<int>(a), e}, true);
        ++added;
      }
    }
    if (added == 0) break;
    r = lps.solve(lp, &warm);
    if (r.status != LpStatus::optimal) r = lps.solve(lp);  // cold retry
    if (r.status == LpStatus::infeasible) {
      out.kind = EvalOut::Kind::infeasible;
      return out;
    }
    if (r.status != LpStatus::optimal) {
      out.kind = EvalOut::Kind::numeric;
      out.bound = nd.bound;
      return out;
    }
  }

  double bound = std::max(r.objective, nd.bound);
  if (has_inc && bound >= inc - margin(inc)) {
    out.kind = EvalOut::Kind::pruned;
    out.bound = bound;
    return out;
  }

  auto most_fractional = [&]() {
    int best = -1;
    double bf = kIntTol;
    for (int j = 0; j < n_; ++j) {
      if (prob_.vars[j].kind != VarKind::binary) continue;
      const double f = std::fabs(r.x[j] - std::round(r.x[j]));
      if (f > bf) {
        bf = f;
        best = j;
      }
    }
    return best;
  };
  auto worst_link = [&]() {
    int best = -1;
    double br = 0.0;
    for (size_t l = 0; l < prob_.links.size(); ++l) {
      const auto& lk = prob_.links[l];
      const double res =
          std::fabs(r.x[lk.product] - r.x[lk.factor_a] * r.x[lk.factor_b]);
      if (res > br + 1e-15) {
        br = res;
        best = static_cast<int>(l);
      }
    }
    return std::make_pair(best, br);
  };

  int frac = most_fractional();
  auto [wl, wres] = worst_link();

  // incumbent points are accepted well below the user's bilinear_tol so a
  // returned solution validates cleanly; polished points carry exact links
  const double accept_res = std::min(opts_.bilinear_tol, 1e-9);

  bool converged = false;
  if (frac < 0 && wres <= accept_res) {
    // integral and bilinear-feasible: drive the epigraph hull to convergence
    converged = true;
    for (int round = 0; round < kFullKelleyRounds; ++round) {
      LpBasis warm = r.basis;
      int added = 0;
      for (size_t a = 0; a < prob_.atoms.size(); ++a) {
        const QuadAtom& atom = prob_.atoms[a];
        if (atom.weight == 0.0) continue;
        const double e = eval_expr(atom, r.x);
        const double viol = atom.weight * e * e - r.x[atom.epigraph_var];
        if (viol > kQuadTol && !active_has(static_cast<int>(a), e)) {
          add_cut(lp, warm, {static_cast<int>(a), e}, true);
          ++added;
        }
      }
      if (added == 0) break;
      r = lps.solve(lp, &warm);
      if (r.status != LpStatus::optimal) r = lps.solve(lp);  // cold retry
      if (r.status != LpStatus::optimal) {
        converged = false;
        break;
      }
      frac = most_fractional();
      std::tie(wl, wres) = worst_link();
      if (frac >= 0 || wres > accept_res) {
        converged = false;
        break;
      }
    }
    if (converged) {
      for (size_t a = 0; a < prob_.atoms.size(); ++a) {
        const QuadAtom& atom = prob_.atoms[a];
        const double e = eval_expr(atom, r.x);
        if (atom.weight * e * e - r.x[atom.epigraph_var] > 100 * kQuadTol)
          converged = false;
      }
    }
  }

  if (r.status == LpStatus::optimal) bound = std::max(bound, r.objective);

  // incumbent candidates: polished point, and the node point itself when
  // it converged
  if (r.status == LpStatus::optimal && most_fractional() < 0) {
    auto pol = polish(lp, r.basis, lo, hi, r.x, out.pool_add, lps);
    if (pol) {
      out.has_point = true;
      out.point = std::move(pol->first);
      out.point_obj = pol->second;
    }
  }
  if (converged) {
    if (!out.has_point || r.objective < out.point_obj) {
      out.has_point = true;
      out.point = r.x;
      out.point_obj = r.objective;
    }
    out.kind = EvalOut::Kind::fathom;
    out.bound = bound;
    return out;
  }

  if (r.status == LpStatus::infeasible) {
    out.kind = EvalOut::Kind::infeasible;
    return out;
  }
  if (r.status != LpStatus::optimal) {
    out.kind = EvalOut::Kind::numeric;
    out.bound = bound;
    return out;
  }

  // prepare children: shared cut list (dropping slack-basic nonbinding
  // tangents) and a warm basis remapped to the reduced row set
  const int base_rows = static_cast<int>(rows_.size()) +
                        4 * static_cast<int>(prob_.links.size());
  const int mparent = static_cast<int>(lp.rows.size());
  std::vector<bool> drop(cuts.size(), false);
  {
    // slack values of tangent rows at the final point
    for (size_t c = 0; c < cuts.size(); ++c) {
      const int rowpos = base_rows + static_cast<int>(c);
      const int slack = n_ + rowpos;
      if (r.basis.stat[slack] != 2) continue;
      const LinearConstraint& row = lp.rows[rowpos];
      double act = 0.0;
      for (const LinTerm& t : row.terms) act += t.coef * r.x[t.var];
      if (row.rhs - act > kDropSlack) drop[c] = true;
    }
  }
  auto child_cuts = std::make_shared<std::vector<CutKey>>();
  std::vector<int32_t> newpos(mparent, -1);
  for (int p = 0; p < base_rows; ++p) newpos[p] = p;
  {
    int next = base_rows;
    for (size_t c = 0; c < cuts.size(); ++c) {
      if (drop[c]) continue;
      child_cuts->push_back(cuts[c]);
      newpos[base_rows + static_cast<int>(c)] = next++;
    }
  }
  auto child_warm = std::make_shared<LpBasis>();
  {
    const int mchild = base_rows + static_cast<int>(child_cuts->size());
    child_warm->stat.assign(n_ + mchild, 0);
    for (int j = 0; j < n_; ++j) child_warm->stat[j] = r.basis.stat[j];
    for (int p = 0; p < mparent; ++p) {
      if (newpos[p] < 0) continue;
      child_warm->stat[n_ + newpos[p]] = r.basis.stat[n_ + p];
    }
    for (const int32_t b : r.basis.basic) {
      if (b < n_) {
        child_warm->basic.push_back(b);
      } else {
        const int p = b - n_;
        if (newpos[p] >= 0)
          child_warm->basic.push_back(static_cast<int32_t>(n_ + newpos[p]));
      }
    }
  }
  out.child_cuts = std::move(child_cuts);
  out.child_warm = std::move(child_warm);
  out.kind = EvalOut::Kind::branch;
  out.bound = bound;

  if (frac >= 0) {
    out.child_edits.push_back({frac, 0.0, 0.0});
    out.child_edits.push_back({frac, 1.0, 1.0});
    return out;
  }

  if (wl < 0 || wres <= accept_res) {
    // only the epigraph hull is unconverged: requeue the node so the next
    // visit continues from the richer tangent pool
    return out;
  }

  // spatial branch on the worst link, gain factor first
  const BilinearLink& lk = prob_.links[wl];
  int bvar = lk.factor_b;
  if (hi[bvar] - lo[bvar] < 1e-7) bvar = lk.factor_a;
  const double w = hi[bvar] - lo[bvar];
  double split = std::clamp(r.x[bvar], lo[bvar] + 0.1 * w, lo[bvar] + 0.9 * w);
  out.child_edits.push_back({bvar, lo[bvar], split});
  out.child_edits.push_back({bvar, split, hi[bvar]});
  return out;
}

// optimization-based bound tightening at the root: with an incumbent in
// hand, min/max every bilinear factor and product over the LP relaxation
// plus the objective cutoff, shrinking the boxes every node inherits
void Engine::root_obbt(double inc) {
  std::vector<double> lo = root_lo_, hi = root_hi_;
  if (!propagate(lo, hi, inc)) return;  // root infeasible under cutoff: let
                                        // the search wind down normally
  std::vector<CutKey> cuts;
  for (size_t a = 0; a < pool_.size(); ++a)
    for (const double e0 : pool_[a]) cuts.push_back({static_cast<int>(a), e0});
  Lp lp = build_lp(lo, hi, cuts);
  {
    LinearConstraint cut;
    cut.sense = Sense::le;
    cut.rhs = inc;
    for (int j = 0; j < n_; ++j)
      if (cost_[j] != 0.0) cut.terms.push_back({j, cost_[j]});
    lp.rows.push_back(std::move(cut));
  }
  std::vector<int> targets;
  for (const BilinearLink& l : prob_.links) {
    targets.push_back(l.factor_b);
    targets.push_back(l.factor_a);
    targets.push_back(l.product);
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  LpSolver lps;
  LpBasis warm;
  for (const int v : targets) {
    for (int dirn = 0; dirn < 2; ++dirn) {
      std::fill(lp.cost.begin(), lp.cost.end(), 0.0);
      lp.cost[v] = dirn == 0 ? 1.0 : -1.0;
      LpResult r = lps.solve(lp, warm.empty() ? nullptr : &warm);
      if (r.status != LpStatus::optimal) r = lps.solve(lp);
      if (r.status != LpStatus::optimal) continue;
      warm = r.basis;
      const double pad = 1e-9 * (1.0 + std::fabs(r.x[v]));
      if (dirn == 0) {
        const double b = r.x[v] - pad;
        if (b > root_lo_[v]) root_lo_[v] = b;
      } else {
        const double b = r.x[v] + pad;
        if (b < root_hi_[v]) root_hi_[v] = b;
      }
      lp.lo[v] = root_lo_[v];
      lp.hi[v] = root_hi_[v];
    }
  }
}

MiblpSolution Engine::run() {
  const auto t0 = std::chrono::steady_clock::now();
  MiblpSolution sol;

  std::priority_queue<Node, std::vector<Node>, NodeOrder> queue;
  long next_id = 0;
  long node_count = 0;
  bool found = false;
  double inc = kInf;
  std::vector<double> inc_values;
  double closed_floor = kInf;

  // seed tangents
  auto seeds = std::make_shared<std::vector<CutKey>>();
  for (size_t a = 0; a < prob_.atoms.size(); ++a) {
    if (prob_.atoms[a].weight == 0.0) continue;
    const int k = std::max(1, opts_.tangent_init);
    for (int i = 0; i < k; ++i) {
      const double f = k == 1 ? 0.5 : static_cast<double>(i) / (k - 1);
      const double e0 = atom_lo_[a] + f * (atom_hi_[a] - atom_lo_[a]);
      if (!pool_has(static_cast<int>(a), e0)) {
        auto& v = pool_[a];
        v.insert(std::lower_bound(v.begin(), v.end(), e0), e0);
        seeds->push_back({static_cast<int>(a), e0});
      }
    }
  }

  Node root;
  root.id = next_id++;
  root.cuts = seeds;
  queue.push(root);

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  SolveStatus limit_status = SolveStatus::optimal;
  bool limited = false;
  bool did_obbt = false;

  const int workers = std::max(1, opts_.worker_count);

  while (!queue.empty()) {
    if (found && !did_obbt && !prob_.links.empty()) {
      did_obbt = true;
      root_obbt(inc);
    }
    const double gap_margin = found ? margin(inc) : 0.0;

    // termination on proven gap
    if (found) {
      const double open_min = queue.top().bound;
      const double global = std::min(std::min(open_min, closed_floor), inc);
      if (inc - global <= gap_margin) break;
    }
    if (node_count >= opts_.max_nodes) {
      limited = true;
      limit_status = SolveStatus::node_limit;
      break;
    }
    if (opts_.max_time_s > 0.0 && elapsed() > opts_.max_time_s) {
      limited = true;
      limit_status = SolveStatus::time_limit;
      break;
    }

    // pop a deterministic batch (width independent of worker_count)
    std::vector<Node> batch;
    while (!queue.empty() && static_cast<int>(batch.size()) < kBatchWidth) {
      Node nd = queue.top();
      queue.pop();
      if (found && nd.bound >= inc - gap_margin) {
        closed_floor = std::min(closed_floor, nd.bound);
        continue;
      }
      batch.push_back(std::move(nd));
    }
    if (batch.empty()) continue;
    node_count += static_cast<long>(batch.size());

    std::vector<EvalOut> outs(batch.size());
    if (workers == 1 || batch.size() == 1) {
      LpSolver lps;
      for (size_t i = 0; i < batch.size(); ++i)
        outs[i] = evaluate(batch[i], found, inc, lps);
    } else {
      const int nt = std::min<int>(workers, static_cast<int>(batch.size()));
      std::vector<std::thread> threads;
      threads.reserve(nt);
      for (int t = 0; t < nt; ++t) {
        threads.emplace_back([&, t] {
          LpSolver lps;
          for (size_t i = t; i < batch.size(); i += nt)
            outs[i] = evaluate(batch[i], found, inc, lps);
        });
      }
      for (auto& th : threads) th.join();
    }

    // apply results in creation-id order
    std::vector<size_t> order(batch.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return batch[a].id < batch[b].id; });

    for (const size_t i : order) {
      const Node& nd = batch[i];
      EvalOut& out = outs[i];
      for (const CutKey& c : out.pool_add) {
        if (!pool_has(c.atom, c.e0)) {
          auto& v = pool_[c.atom];
          v.insert(std::lower_bound(v.begin(), v.end(), c.e0), c.e0);
        }
      }
      if (out.has_point && (!found || out.point_obj < inc - 1e-12)) {
        found = true;
        inc = out.point_obj;
        inc_values = std::move(out.point);
      }
      switch (out.kind) {
        case EvalOut::Kind::infeasible:
          break;
        case EvalOut::Kind::pruned:
        case EvalOut::Kind::fathom:
        case EvalOut::Kind::numeric:
          closed_floor = std::min(closed_floor, out.bound);
          break;
        case EvalOut::Kind::branch: {
          if (found && out.bound >= inc - margin(inc)) {
            closed_floor = std::min(closed_floor, out.bound);
            break;
          }
          auto push_child = [&](const BranchEdit* e) {
            Node child;
            child.id = next_id++;
            child.bound = out.bound;
            child.depth = nd.depth + 1;
            if (e != nullptr) {
              auto link = std::make_shared<Chain>();
              link->edit = *e;
              link->up = nd.chain;
              child.chain = std::move(link);
            } else {
              child.chain = nd.chain;  // requeue without a new edit
            }
            child.cuts = out.child_cuts;
            child.warm = out.child_warm;
            queue.push(std::move(child));
          };
          if (out.child_edits.empty()) {
            push_child(nullptr);
          } else {
            for (const BranchEdit& e : out.child_edits) push_child(&e);
          }
          break;
        }
      }
    }
  }

  // final bound accounting
  double open_min = kInf;
  if (!queue.empty()) open_min = queue.top().bound;
  double global = std::min(std::min(open_min, closed_floor), found ? inc : kInf);

  sol.node_count = node_count;
  sol.found = found;
  if (found) {
    sol.values = inc_values;
    sol.objective = inc;
    sol.bound = global;
    sol.gap_abs = std::max(0.0, inc - global);
    if (limited)
      sol.status = limit_status;
    else
      sol.status = sol.gap_abs <= margin(inc) ? SolveStatus::optimal
                                              : SolveStatus::feasible;
  } else {
    sol.status = limited ? limit_status : SolveStatus::infeasible;
    sol.bound = global;
  }
  sol.wall_time_s = elapsed();
  return sol;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::time_limit: return "time_limit";
  }
  return "unknown";
}

MiblpSolution solve(const MiblpProblem& problem, const SolveOptions& opts) {
  problem.check();
  if (opts.abs_gap <= 0.0 || opts.rel_gap <= 0.0 || opts.bilinear_tol <= 0.0)
    throw std::invalid_argument("solve: tolerances must be positive");
  if (opts.worker_count < 1)
    throw std::invalid_argument("solve: worker_count must be >= 1");
  Engine eng(problem, opts);
  MiblpSolution sol = eng.run();

  // final polish: re-optimize the continuous part at the incumbent's
  // binaries and spatial factors so the returned point carries exact
  // bilinear links and converged epigraph values
  if (sol.found) {
    Lp lp;
    lp.nvars = problem.var_count();
    lp.lo.resize(lp.nvars);
    lp.hi.resize(lp.nvars);
    lp.cost.assign(lp.nvars, 0.0);
    for (const LinTerm& t : problem.objective) lp.cost[t.var] += t.coef;
    for (int j = 0; j < lp.nvars; ++j) {
      lp.lo[j] = problem.vars[j].lo;
      lp.hi[j] = problem.vars[j].hi;
      if (problem.vars[j].kind == VarKind::binary)
        lp.lo[j] = lp.hi[j] = std::round(sol.values[j]);
    }
    lp.rows = problem.rows;
    for (const BilinearLink& l : problem.links) {
      const double vb = std::clamp(sol.values[l.factor_b],
                                   problem.vars[l.factor_b].lo,
                                   problem.vars[l.factor_b].hi);
      lp.lo[l.factor_b] = lp.hi[l.factor_b] = vb;
      lp.rows.push_back({{{l.product, 1.0}, {l.factor_a, -vb}}, Sense::eq, 0.0});
    }
    LpSolver lps;
    LpResult r = lps.solve(lp);
    for (int round = 0; round < 60 && r.status == LpStatus::optimal; ++round) {
      LpBasis warm = r.basis;
      int added = 0;
      for (const QuadAtom& a : problem.atoms) {
        if (a.weight == 0.0) continue;
        double e = a.expr_const;
        for (const LinTerm& t : a.expr) e += t.coef * r.x[t.var];
        if (a.weight * e * e - r.x[a.epigraph_var] > 1e-11) {
          LinearConstraint row;
          row.sense = Sense::le;
          for (const LinTerm& t : a.expr)
            row.terms.push_back({t.var, 2.0 * a.weight * e * t.coef});
          row.terms.push_back({a.epigraph_var, -1.0});
          row.rhs = a.weight * e * e - 2.0 * a.weight * e * a.expr_const;
          lp.rows.push_back(std::move(row));
          warm.stat.push_back(2);
          warm.basic.push_back(static_cast<int32_t>(lp.nvars + lp.rows.size() - 1));
          ++added;
        }
      }
      if (added == 0) break;
      r = lps.solve(lp, &warm);
    }
    if (r.status == LpStatus::optimal && r.objective <= sol.objective + 1e-12) {
      sol.values = r.x;
      sol.objective = r.objective;
      sol.gap_abs = std::max(0.0, sol.objective - sol.bound);
    }
  }
  return sol;
}

double ViolationReport::max_violation() const {
  return std::max(std::max(std::max(bound, linear), std::max(integrality, bilinear)),
                  quad);
}

ViolationReport validate_solution(const MiblpProblem& problem,
                                  const std::vector<double>& values) {
  if (values.size() != problem.vars.size())
    throw std::invalid_argument("validate_solution: dimension mismatch");
  ViolationReport rep;
  for (size_t j = 0; j < problem.vars.size(); ++j) {
    const Variable& v = problem.vars[j];
    const double viol = std::max(v.lo - values[j], values[j] - v.hi);
    if (viol > rep.bound) {
      rep.bound = viol;
      rep.worst_bound = v.name;
    }
    if (v.kind == VarKind::binary) {
      const double f = std::fabs(values[j] - std::round(values[j]));
      rep.integrality = std::max(rep.integrality, f);
    }
  }
  for (size_t i = 0; i < problem.rows.size(); ++i) {
    const LinearConstraint& r = problem.rows[i];
    double act = 0.0;
    for (const LinTerm& t : r.terms) act += t.coef * values[t.var];
    double viol = 0.0;
    if (r.sense == Sense::le) viol = act - r.rhs;
    else if (r.sense == Sense::ge) viol = r.rhs - act;
    else viol = std::fabs(act - r.rhs);
    if (viol > rep.linear) {
      rep.linear = viol;
      rep.worst_linear = "row" + std::to_string(i);
    }
  }
  for (const BilinearLink& l : problem.links) {
    const double res =
        std::fabs(values[l.product] - values[l.factor_a] * values[l.factor_b]);
    if (res > rep.bilinear) {
      rep.bilinear = res;
      rep.worst_bilinear = problem.vars[l.product].name;
    }
  }
  for (const QuadAtom& a : problem.atoms) {
    double e = a.expr_const;
    for (const LinTerm& t : a.expr) e += t.coef * values[t.var];
    rep.quad = std::max(rep.quad, a.weight * e * e - values[a.epigraph_var]);
  }
  return rep;
}

}  // namespace mgmpc::miblp
