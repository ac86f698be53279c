#include "mgmpc/miblp/mccormick.hpp"

#include <cmath>
#include <stdexcept>

namespace mgmpc::miblp {

std::array<LinearConstraint, 4> mccormick_cuts(const BilinearLink& link,
                                               const FactorBox& box) {
  if (!std::isfinite(box.a_lo) || !std::isfinite(box.a_hi) ||
      !std::isfinite(box.b_lo) || !std::isfinite(box.b_hi))
    throw std::invalid_argument("mccormick_cuts: unbounded factor");

  const int a = link.factor_a, b = link.factor_b, q = link.product;
  // q >= a_lo*b + b_lo*a - a_lo*b_lo
  // q >= a_hi*b + b_hi*a - a_hi*b_hi
  // q <= a_hi*b + b_lo*a - a_hi*b_lo
  // q <= a_lo*b + b_hi*a - a_lo*b_hi
  return {
      LinearConstraint{{{a, box.b_lo}, {b, box.a_lo}, {q, -1.0}}, Sense::le,
                       box.a_lo * box.b_lo},
      LinearConstraint{{{a, box.b_hi}, {b, box.a_hi}, {q, -1.0}}, Sense::le,
                       box.a_hi * box.b_hi},
      LinearConstraint{{{a, box.b_lo}, {b, box.a_hi}, {q, -1.0}}, Sense::ge,
                       box.a_hi * box.b_lo},
      LinearConstraint{{{a, box.b_hi}, {b, box.a_lo}, {q, -1.0}}, Sense::ge,
                       box.a_lo * box.b_hi},
  };
}

}  // namespace mgmpc::miblp
