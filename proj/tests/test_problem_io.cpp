#include <random>
#include <stdexcept>

#include "doctest.h"
#include "mgmpc/miblp/problem.hpp"

using namespace mgmpc::miblp;

namespace {

MiblpProblem random_problem(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> nd(3, 8);
  MiblpProblem p;
  const int n = nd(rng);
  for (int j = 0; j < n; ++j) {
    if (j % 3 == 2) {
      p.add_binary("b" + std::to_string(j));
    } else {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      p.add_continuous("x" + std::to_string(j), a, b);
    }
  }
  std::uniform_int_distribution<int> rd(0, 4), sd(0, 2), vd(0, n - 1);
  const int nr = rd(rng);
  for (int i = 0; i < nr; ++i) {
    std::vector<LinTerm> ts;
    const int nnz = 1 + rd(rng);
    for (int k = 0; k < nnz; ++k) ts.push_back({vd(rng), u(rng) * 0.1234567890123});
    p.add_row(std::move(ts), static_cast<Sense>(sd(rng)), u(rng));
  }
  return p;
}

}  // namespace

TEST_SUITE("problem_io") {

TEST_CASE("text round trip is byte exact") {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 60; ++it) {
    MiblpProblem p = random_problem(rng);
    // throw in awkward values
    if (!p.vars.empty() && p.vars[0].kind == VarKind::continuous) {
      p.vars[0].lo = -1.0000000000000002;
      p.vars[0].hi = 12345678.901234567;
    }
    const std::string t1 = to_text(p);
    const MiblpProblem q = from_text(t1);
    const std::string t2 = to_text(q);
    REQUIRE(t1 == t2);
  }
}

TEST_CASE("check rejects malformed problems") {
  MiblpProblem p;
  p.add_continuous("x", 0.0, 1.0);
  SUBCASE("unknown variable in row") {
    p.add_row({{5, 1.0}}, Sense::le, 0.0);
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
  }
  SUBCASE("inverted bounds") {
    p.add_continuous("y", 2.0, 1.0);
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
  }
  SUBCASE("negative atom weight") {
    const int e = p.add_continuous("e", 0.0, 10.0);
    p.add_atom(-1.0, {{0, 1.0}}, 0.0, e);
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
  }
  SUBCASE("duplicate names") {
    p.add_continuous("x", 0.0, 1.0);
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
  }
  SUBCASE("disjoint product bounds") {
    const int a = p.add_continuous("a", 0.0, 1.0);
    const int b = p.add_continuous("b", 0.0, 1.0);
    const int q = p.add_continuous("q", 5.0, 6.0);
    p.add_link(q, a, b);
    CHECK_THROWS_AS(p.check(), std::invalid_argument);
  }
}

TEST_CASE("parse failures carry messages") {
  CHECK_THROWS_AS(from_text("garbage"), std::invalid_argument);
  CHECK_THROWS_AS(from_text("MIBLP 2\n"), std::invalid_argument);
  MiblpProblem p;
  p.add_continuous("x", 0.0, 1.0);
  std::string t = to_text(p);
  t.resize(t.size() / 2);  // truncated stream
  CHECK_THROWS_AS(from_text(t), std::invalid_argument);
}

}  // TEST_SUITE
