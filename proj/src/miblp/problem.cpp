#include "mgmpc/miblp/problem.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mgmpc::miblp {

namespace {

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("miblp: " + msg);
}

}  // namespace

int MiblpProblem::add_continuous(std::string name, double lo, double hi) {
  vars.push_back({std::move(name), VarKind::continuous, lo, hi});
  return static_cast<int>(vars.size()) - 1;
}

int MiblpProblem::add_binary(std::string name) {
  vars.push_back({std::move(name), VarKind::binary, 0.0, 1.0});
  return static_cast<int>(vars.size()) - 1;
}

int MiblpProblem::add_row(std::vector<LinTerm> terms, Sense sense, double rhs) {
  rows.push_back({std::move(terms), sense, rhs});
  return static_cast<int>(rows.size()) - 1;
}

void MiblpProblem::add_link(int product, int factor_a, int factor_b) {
  links.push_back({product, factor_a, factor_b});
}

void MiblpProblem::add_atom(double weight, std::vector<LinTerm> expr,
                            double expr_const, int epigraph_var) {
  atoms.push_back({weight, std::move(expr), expr_const, epigraph_var});
}

void MiblpProblem::check() const {
  const int n = var_count();
  std::unordered_set<std::string> names;
  for (int i = 0; i < n; ++i) {
    const Variable& v = vars[i];
    if (v.name.empty()) fail("variable " + std::to_string(i) + " has empty name");
    for (char c : v.name) {
      if (std::isspace(static_cast<unsigned char>(c)))
        fail("variable name contains whitespace: '" + v.name + "'");
    }
    if (!names.insert(v.name).second) fail("duplicate variable name '" + v.name + "'");
    if (!std::isfinite(v.lo) || !std::isfinite(v.hi))
      fail("variable '" + v.name + "' has non-finite bounds");
    if (v.lo > v.hi) fail("variable '" + v.name + "' has lo > hi");
    if (v.kind == VarKind::binary && (v.lo != 0.0 || v.hi != 1.0))
      fail("binary variable '" + v.name + "' must have bounds {0,1}");
  }
  auto check_ref = [&](int idx, const char* what) {
    if (idx < 0 || idx >= n) fail(std::string(what) + " references unknown variable");
  };
  auto check_terms = [&](const std::vector<LinTerm>& ts, const char* what) {
    for (const LinTerm& t : ts) {
      check_ref(t.var, what);
      if (!std::isfinite(t.coef)) fail(std::string(what) + " has non-finite coefficient");
    }
  };
  for (const LinearConstraint& r : rows) {
    check_terms(r.terms, "linear constraint");
    if (!std::isfinite(r.rhs)) fail("linear constraint has non-finite rhs");
  }
  for (const BilinearLink& l : links) {
    check_ref(l.product, "bilinear link");
    check_ref(l.factor_a, "bilinear link");
    check_ref(l.factor_b, "bilinear link");
    const Variable& a = vars[l.factor_a];
    const Variable& b = vars[l.factor_b];
    const Variable& q = vars[l.product];
    const double c1 = a.lo * b.lo, c2 = a.lo * b.hi, c3 = a.hi * b.lo, c4 = a.hi * b.hi;
    const double plo = std::min(std::min(c1, c2), std::min(c3, c4));
    const double phi = std::max(std::max(c1, c2), std::max(c3, c4));
    if (q.hi < plo - 1e-9 || q.lo > phi + 1e-9)
      fail("product variable '" + q.name + "' bounds disjoint from factor product range");
  }
  for (const QuadAtom& a : atoms) {
    if (!(a.weight >= 0.0)) fail("quad atom has negative weight");
    check_terms(a.expr, "quad atom");
    if (!std::isfinite(a.expr_const)) fail("quad atom has non-finite constant");
    check_ref(a.epigraph_var, "quad atom epigraph");
  }
  check_terms(objective, "objective");
}

std::string to_text(const MiblpProblem& p) {
  std::ostringstream os;
  os << "MIBLP 1\n";
  os << "VARS " << p.vars.size() << "\n";
  for (const Variable& v : p.vars) {
    os << v.name << ' ' << (v.kind == VarKind::binary ? 'b' : 'c') << ' '
       << fmt_num(v.lo) << ' ' << fmt_num(v.hi) << "\n";
  }
  os << "LIN " << p.rows.size() << "\n";
  for (const LinearConstraint& r : p.rows) {
    const char s = r.sense == Sense::le ? '<' : (r.sense == Sense::eq ? '=' : '>');
    os << s << ' ' << fmt_num(r.rhs) << ' ' << r.terms.size();
    for (const LinTerm& t : r.terms) os << ' ' << t.var << ' ' << fmt_num(t.coef);
    os << "\n";
  }
  os << "BILIN " << p.links.size() << "\n";
  for (const BilinearLink& l : p.links)
    os << l.product << ' ' << l.factor_a << ' ' << l.factor_b << "\n";
  os << "QUAD " << p.atoms.size() << "\n";
  for (const QuadAtom& a : p.atoms) {
    os << a.epigraph_var << ' ' << fmt_num(a.weight) << ' ' << fmt_num(a.expr_const)
       << ' ' << a.expr.size();
    for (const LinTerm& t : a.expr) os << ' ' << t.var << ' ' << fmt_num(t.coef);
    os << "\n";
  }
  os << "OBJ " << p.objective.size();
  for (const LinTerm& t : p.objective) os << ' ' << t.var << ' ' << fmt_num(t.coef);
  os << "\nEND\n";
  return os.str();
}

namespace {

class Tokens {
 public:
  explicit Tokens(const std::string& text) : is_(text) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) fail("unexpected end of problem text");
    return w;
  }
  long integer() {
    const std::string w = word();
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (end == nullptr || *end != '\0') fail("expected integer, got '" + w + "'");
    return v;
  }
  double number() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == nullptr || *end != '\0') fail("expected number, got '" + w + "'");
    return v;
  }
  void expect(const char* lit) {
    const std::string w = word();
    if (w != lit) fail(std::string("expected '") + lit + "', got '" + w + "'");
  }

 private:
  std::istringstream is_;
};

std::vector<LinTerm> parse_terms(Tokens& tk) {
  const long nnz = tk.integer();
  if (nnz < 0) fail("negative term count");
  std::vector<LinTerm> ts(static_cast<size_t>(nnz));
  for (LinTerm& t : ts) {
    t.var = static_cast<int>(tk.integer());
    t.coef = tk.number();
  }
  return ts;
}

}  // namespace

MiblpProblem from_text(const std::string& text) {
  Tokens tk(text);
  tk.expect("MIBLP");
  if (tk.integer() != 1) fail("unsupported format version");
  MiblpProblem p;

  tk.expect("VARS");
  const long nv = tk.integer();
  p.vars.resize(static_cast<size_t>(nv));
  for (Variable& v : p.vars) {
    v.name = tk.word();
    const std::string kind = tk.word();
    if (kind == "b") v.kind = VarKind::binary;
    else if (kind == "c") v.kind = VarKind::continuous;
    else fail("unknown variable kind '" + kind + "'");
    v.lo = tk.number();
    v.hi = tk.number();
  }

  tk.expect("LIN");
  const long nr = tk.integer();
  p.rows.resize(static_cast<size_t>(nr));
  for (LinearConstraint& r : p.rows) {
    const std::string s = tk.word();
    if (s == "<") r.sense = Sense::le;
    else if (s == "=") r.sense = Sense::eq;
    else if (s == ">") r.sense = Sense::ge;
    else fail("unknown row sense '" + s + "'");
    r.rhs = tk.number();
    r.terms = parse_terms(tk);
  }

  tk.expect("BILIN");
  const long nl = tk.integer();
  p.links.resize(static_cast<size_t>(nl));
  for (BilinearLink& l : p.links) {
    l.product = static_cast<int>(tk.integer());
    l.factor_a = static_cast<int>(tk.integer());
    l.factor_b = static_cast<int>(tk.integer());
  }

  tk.expect("QUAD");
  const long nq = tk.integer();
  p.atoms.resize(static_cast<size_t>(nq));
  for (QuadAtom& a : p.atoms) {
    a.epigraph_var = static_cast<int>(tk.integer());
    a.weight = tk.number();
    a.expr_const = tk.number();
    a.expr = parse_terms(tk);
  }

  tk.expect("OBJ");
  p.objective = parse_terms(tk);
  tk.expect("END");
  p.check();
  return p;
}

}  // namespace mgmpc::miblp
