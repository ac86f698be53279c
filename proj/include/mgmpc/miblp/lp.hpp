#pragma once

#include <cstdint>
#include <vector>

#include "mgmpc/miblp/problem.hpp"

namespace mgmpc::miblp {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, numeric_error };

/// Linear program over bounded structural variables. Row senses follow
/// LinearConstraint. Structural bounds must be finite; slacks added
/// internally carry the one-sided bounds implied by each row's sense.
struct Lp {
  int nvars = 0;
  std::vector<double> lo, hi, cost;
  std::vector<LinearConstraint> rows;

  int add_var(double l, double h, double c) {
    lo.push_back(l);
    hi.push_back(h);
    cost.push_back(c);
    return nvars++;
  }
};

/// Basis snapshot for warm starts. Column ids: [0, nvars) structural,
/// [nvars, nvars+m) row slacks in row order.
struct LpBasis {
  std::vector<int32_t> basic;
  std::vector<uint8_t> stat;  // per column: 0 = at lower, 1 = at upper, 2 = basic
  bool empty() const { return basic.empty(); }
};

struct LpResult {
  LpStatus status = LpStatus::numeric_error;
  double objective = 0.0;
  std::vector<double> x;
  LpBasis basis;
  int iterations = 0;
};

/// Deterministic bounded-variable primal simplex (dense LU basis with
/// product-form updates, Dantzig pricing with index tie-breaks, Bland
/// fallback under prolonged degeneracy). Identical inputs produce
/// identical pivot sequences; no randomization anywhere.
class LpSolver {
 public:
  LpResult solve(const Lp& lp, const LpBasis* warm = nullptr);

 private:
  struct Eta {
    int r;
    std::vector<double> d;
  };

  void load(const Lp& lp);
  bool init_basis(const LpBasis* warm);
  void cold_basis();
  bool refactor();
  void compute_basic_values();
  void ftran(std::vector<double>& v) const;
  void btran(std::vector<double>& v) const;
  double infeasibility() const;
  LpResult run(const Lp& lp);

  const Lp* lp_ = nullptr;
  int m_ = 0, n_ = 0, ncols_ = 0;
  std::vector<std::vector<LinTerm>> cols_;  // per column sparse entries
  std::vector<double> lob_, upb_, rhs_;
  std::vector<int32_t> basic_;
  std::vector<uint8_t> stat_;
  std::vector<int32_t> pos_;  // column -> basis row or -1
  std::vector<double> xb_;    // basic values by row
  std::vector<double> lu_;
  std::vector<int32_t> perm_;
  std::vector<Eta> etas_;
};

}  // namespace mgmpc::miblp
