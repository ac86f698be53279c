#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "doctest.h"
#include "mgmpc/miblp/lp.hpp"

using namespace mgmpc::miblp;

namespace {

// Independent oracle: enumerate every candidate vertex (each subset of
// constraint/bound hyperplanes of size n), keep feasible ones, take the
// best objective. Exponential, test-only.
struct Hyperplane {
  std::vector<double> a;
  double b;
};

bool solve_square(std::vector<std::vector<double>> A, std::vector<double> b,
                  std::vector<double>& x) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(A[i][k]) > std::fabs(A[p][k])) p = i;
    if (std::fabs(A[p][k]) < 1e-9) return false;
    std::swap(A[p], A[k]);
    std::swap(b[p], b[k]);
    for (int i = k + 1; i < n; ++i) {
      const double f = A[i][k] / A[k][k];
      for (int j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    double s = b[k];
    for (int j = k + 1; j < n; ++j) s -= A[k][j] * x[j];
    x[k] = s / A[k][k];
  }
  return true;
}

std::optional<double> enumerate_lp_optimum(const Lp& lp) {
  const int n = lp.nvars;
  std::vector<Hyperplane> hp;
  for (const auto& r : lp.rows) {
    Hyperplane h{std::vector<double>(n, 0.0), r.rhs};
    for (const auto& t : r.terms) h.a[t.var] += t.coef;
    hp.push_back(h);
  }
  for (int j = 0; j < n; ++j) {
    Hyperplane l{std::vector<double>(n, 0.0), lp.lo[j]};
    l.a[j] = 1.0;
    hp.push_back(l);
    Hyperplane u{std::vector<double>(n, 0.0), lp.hi[j]};
    u.a[j] = 1.0;
    hp.push_back(u);
  }
  const int H = static_cast<int>(hp.size());

  auto feasible = [&](const std::vector<double>& x) {
    for (int j = 0; j < n; ++j)
      if (x[j] < lp.lo[j] - 1e-7 || x[j] > lp.hi[j] + 1e-7) return false;
    for (const auto& r : lp.rows) {
      double act = 0.0;
      for (const auto& t : r.terms) act += t.coef * x[t.var];
      if (r.sense == Sense::le && act > r.rhs + 1e-7) return false;
      if (r.sense == Sense::ge && act < r.rhs - 1e-7) return false;
      if (r.sense == Sense::eq && std::fabs(act - r.rhs) > 1e-7) return false;
    }
    return true;
  };

  std::optional<double> best;
  std::vector<int> pick(n);
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == n) {
      std::vector<std::vector<double>> A(n);
      std::vector<double> b(n);
      for (int i = 0; i < n; ++i) {
        A[i] = hp[pick[i]].a;
        b[i] = hp[pick[i]].b;
      }
      std::vector<double> x;
      if (!solve_square(A, b, x)) return;
      if (!feasible(x)) return;
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += lp.cost[j] * x[j];
      if (!best || obj < *best) best = obj;
      return;
    }
    for (int h = start; h < H; ++h) {
      pick[depth] = h;
      self(self, h + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

bool lp_point_feasible(const Lp& lp, const std::vector<double>& x, double tol) {
  for (int j = 0; j < lp.nvars; ++j)
    if (x[j] < lp.lo[j] - tol || x[j] > lp.hi[j] + tol) return false;
  for (const auto& r : lp.rows) {
    double act = 0.0;
    for (const auto& t : r.terms) act += t.coef * x[t.var];
    if (r.sense == Sense::le && act > r.rhs + tol) return false;
    if (r.sense == Sense::ge && act < r.rhs - tol) return false;
    if (r.sense == Sense::eq && std::fabs(act - r.rhs) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("lp") {

TEST_CASE("min x subject to x >= 3") {
  Lp lp;
  const int x = lp.add_var(0.0, 10.0, 1.0);
  lp.rows.push_back({{{x, 1.0}}, Sense::ge, 3.0});
  LpSolver s;
  const auto r = s.solve(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.x[x] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("textbook: min -x-y on x+y <= 1, box [0,1]^2") {
  Lp lp;
  const int x = lp.add_var(0.0, 1.0, -1.0);
  const int y = lp.add_var(0.0, 1.0, -1.0);
  lp.rows.push_back({{{x, 1.0}, {y, 1.0}}, Sense::le, 1.0});
  LpSolver s;
  const auto r = s.solve(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.objective == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("equality row pins the solution") {
  Lp lp;
  const int x = lp.add_var(-2.0, 2.0, 1.0);
  const int y = lp.add_var(-2.0, 2.0, 2.0);
  lp.rows.push_back({{{x, 1.0}, {y, 1.0}}, Sense::eq, 1.0});
  LpSolver s;
  const auto r = s.solve(lp);
  REQUIRE(r.status == LpStatus::optimal);
  // minimize x + 2y with x + y = 1: push y down to -2, x = 3 > 2 infeasible,
  // so x = 2, y = -1, objective 0
  CHECK(r.objective == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.x[x] == doctest::Approx(2.0));
  CHECK(r.x[y] == doctest::Approx(-1.0));
}

TEST_CASE("infeasible rows are detected") {
  Lp lp;
  const int x = lp.add_var(0.0, 1.0, 1.0);
  lp.rows.push_back({{{x, 1.0}}, Sense::ge, 2.0});
  LpSolver s;
  CHECK(s.solve(lp).status == LpStatus::infeasible);
}

TEST_CASE("no rows: bounds-only optimum") {
  Lp lp;
  lp.add_var(-1.0, 4.0, -0.5);
  lp.add_var(-3.0, 2.0, 1.5);
  LpSolver s;
  const auto r = s.solve(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.objective == doctest::Approx(-0.5 * 4.0 + 1.5 * -3.0));
}

TEST_CASE("randomized LPs agree with vertex enumeration oracle") {
  std::mt19937_64 rng(20240901);
  auto coef = [&] {
    std::uniform_int_distribution<int> d(-8, 8);
    return d(rng) * 0.25;
  };
  int feasible_count = 0, infeasible_count = 0;
  for (int it = 0; it < 300; ++it) {
    std::uniform_int_distribution<int> nd(2, 3), md(1, 3), sd(0, 2);
    Lp lp;
    const int n = nd(rng);
    for (int j = 0; j < n; ++j) {
      const double l = -1.0 - 0.25 * (it % 3);
      lp.add_var(l, l + 2.0 + 0.25 * (it % 5), coef());
    }
    const int m = md(rng);
    for (int i = 0; i < m; ++i) {
      LinearConstraint r;
      for (int j = 0; j < n; ++j) {
        const double c = coef();
        if (c != 0.0) r.terms.push_back({j, c});
      }
      r.sense = static_cast<Sense>(sd(rng));
      r.rhs = coef();
      lp.rows.push_back(r);
    }
    const auto oracle = enumerate_lp_optimum(lp);
    LpSolver s;
    const auto r = s.solve(lp);
    if (oracle.has_value()) {
      ++feasible_count;
      REQUIRE_MESSAGE(r.status == LpStatus::optimal, "instance ", it);
      CHECK_MESSAGE(std::fabs(r.objective - *oracle) <= 1e-6, "instance ", it,
                    " solver ", r.objective, " oracle ", *oracle);
      CHECK(lp_point_feasible(lp, r.x, 1e-7));
    } else {
      ++infeasible_count;
      CHECK_MESSAGE(r.status == LpStatus::infeasible, "instance ", it);
    }
  }
  // make sure the generator exercises both outcomes
  CHECK(feasible_count > 50);
  CHECK(infeasible_count > 10);
}

TEST_CASE("deterministic: identical input gives identical output") {
  Lp lp;
  const int x = lp.add_var(0.0, 5.0, 1.0);
  const int y = lp.add_var(-1.0, 2.0, -2.0);
  const int z = lp.add_var(0.0, 3.0, 0.25);
  lp.rows.push_back({{{x, 1.0}, {y, 2.0}, {z, -1.0}}, Sense::le, 2.5});
  lp.rows.push_back({{{x, -1.0}, {y, 1.0}}, Sense::ge, -1.0});
  lp.rows.push_back({{{x, 1.0}, {z, 1.0}}, Sense::eq, 2.0});
  LpSolver s1, s2;
  const auto r1 = s1.solve(lp);
  const auto r2 = s2.solve(lp);
  REQUIRE(r1.status == LpStatus::optimal);
  REQUIRE(r2.status == LpStatus::optimal);
  CHECK(r1.objective == r2.objective);
  for (int j = 0; j < lp.nvars; ++j) CHECK(r1.x[j] == r2.x[j]);
  CHECK(r1.iterations == r2.iterations);
}

TEST_CASE("warm start reaches the same optimum after a bound change") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 50; ++it) {
    Lp lp;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int j = 0; j < 4; ++j) lp.add_var(-2.0, 2.0, u(rng));
    for (int i = 0; i < 3; ++i) {
      LinearConstraint r;
      for (int j = 0; j < 4; ++j) r.terms.push_back({j, std::round(u(rng) * 4) / 4});
      r.sense = i == 2 ? Sense::eq : Sense::le;
      r.rhs = std::round(u(rng) * 4) / 4;
      lp.rows.push_back(r);
    }
    LpSolver s;
    const auto base = s.solve(lp);
    if (base.status != LpStatus::optimal) continue;
    Lp tight = lp;
    tight.hi[it % 4] = 0.5;
    tight.lo[it % 4] = std::min(tight.lo[it % 4], 0.5);
    const auto cold = s.solve(tight);
    const auto warm = s.solve(tight, &base.basis);
    REQUIRE(cold.status == warm.status);
    if (cold.status == LpStatus::optimal)
      CHECK(std::fabs(cold.objective - warm.objective) <= 1e-8);
  }
}

}  // TEST_SUITE
