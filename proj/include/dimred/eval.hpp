#pragma once

#include <span>

#include "dimred/expr.hpp"
#include "dimred/types.hpp"

namespace dimred {

/// Row-wise evaluation. Domain violations (log of a non-positive value,
/// division by zero, sqrt of a negative value, overflow) show up as
/// non-finite entries; evaluation never throws for them.
Vector eval(const ExprDag& dag, const Matrix& X);

/// Same, with parameter nodes taking `params[index]` instead of their stored value.
Vector eval(const ExprDag& dag, const Matrix& X, std::span<const double> params);

/// Single point.
double eval_point(const ExprDag& dag, std::span<const double> point);

}  // namespace dimred
