#pragma once

#include <string>
#include <vector>

namespace mgmpc::miblp {

enum class VarKind { continuous, binary };
enum class Sense { le, eq, ge };

struct LinTerm {
  int var = -1;
  double coef = 0.0;
};

struct Variable {
  std::string name;
  VarKind kind = VarKind::continuous;
  double lo = 0.0;
  double hi = 0.0;
};

struct LinearConstraint {
  std::vector<LinTerm> terms;
  Sense sense = Sense::le;
  double rhs = 0.0;
};

/// product = factor_a * factor_b. factor_b is the preferred spatial
/// branching factor when the link's residual drives a split.
struct BilinearLink {
  int product = -1;
  int factor_a = -1;
  int factor_b = -1;
};

/// epigraph_var >= weight * (expr + expr_const)^2, weight >= 0.
struct QuadAtom {
  double weight = 0.0;
  std::vector<LinTerm> expr;
  double expr_const = 0.0;
  int epigraph_var = -1;
};

/// Mixed-integer bilinear program with convex quadratic cost atoms.
/// Objective is a sparse linear form, minimized.
struct MiblpProblem {
  std::vector<Variable> vars;
  std::vector<LinearConstraint> rows;
  std::vector<BilinearLink> links;
  std::vector<QuadAtom> atoms;
  std::vector<LinTerm> objective;

  int add_continuous(std::string name, double lo, double hi);
  int add_binary(std::string name);
  int add_row(std::vector<LinTerm> terms, Sense sense, double rhs);
  void add_link(int product, int factor_a, int factor_b);
  void add_atom(double weight, std::vector<LinTerm> expr, double expr_const,
                int epigraph_var);

  int var_count() const { return static_cast<int>(vars.size()); }

  /// Throws std::invalid_argument if any structural invariant is broken:
  /// unknown variable references, non-finite or inverted bounds, binaries
  /// not in {0,1}, negative atom weights, or product bounds disjoint from
  /// the factor-bound product interval.
  void check() const;
};

/// Line-oriented text format (sections VARS / LIN / BILIN / QUAD / OBJ).
/// Numbers are written with 17 significant digits so that
/// from_text(to_text(p)) reproduces p bit-exactly.
std::string to_text(const MiblpProblem& p);
MiblpProblem from_text(const std::string& text);

}  // namespace mgmpc::miblp
