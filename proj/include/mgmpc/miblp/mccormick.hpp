#pragma once

#include <array>

#include "mgmpc/miblp/problem.hpp"

namespace mgmpc::miblp {

struct FactorBox {
  double a_lo = 0.0, a_hi = 0.0;
  double b_lo = 0.0, b_hi = 0.0;
};

/// Convex-hull envelope of product = factor_a * factor_b over the box:
/// two under- and two over-estimating planes. Throws std::invalid_argument
/// on non-finite factor bounds. If either factor sits at an interval
/// endpoint the four planes force the product exactly.
std::array<LinearConstraint, 4> mccormick_cuts(const BilinearLink& link,
                                               const FactorBox& box);

}  // namespace mgmpc::miblp
