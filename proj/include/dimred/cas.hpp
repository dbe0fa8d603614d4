#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>

#include "dimred/expr.hpp"

namespace dimred {

class NotSolvable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Symbolic and numeric checks disagree.
class Inconclusive : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SimplifyMode {
    /// Rewrites that hold wherever the input is defined on the reals.
    Safe,
    /// Additionally assumes every variable is positive: powers distribute over
    /// products and logarithms expand. Used for dependence and equivalence tests.
    Positive,
};

/// Canonical form: constants folded, like terms and powers collected, operands
/// sorted. simplify(simplify(e)) == simplify(e).
ExprDag simplify(const ExprDag& dag, SimplifyMode mode = SimplifyMode::Safe);

/// Node count of the simplified expression tree.
std::size_t complexity(const ExprDag& dag);

/// Canonical text of every simplified subtree of `dag`.
std::set<std::string> subexpressions(const ExprDag& dag);

struct CheckOptions {
    int trials = 100;
    double dependence_tol = 1e-9;
    double constancy_tol = 1e-6;
    std::uint64_t seed = 0x7e57ab1e;
    /// Sampling box for numeric checks; a symmetric box is tried when too few
    /// points are finite.
    double lo = 0.1;
    double hi = 3.0;
};

/// Whether `dag` depends on variable `var`. Throws Inconclusive when the
/// symbolic answer and the numeric perturbation test disagree.
bool depends_on(const ExprDag& dag, int var, const CheckOptions& opts = {});
bool depends_on_any(const ExprDag& dag, std::span<const int> vars, const CheckOptions& opts = {});

/// Whether f and g agree up to an additive or multiplicative constant.
bool equivalent(const ExprDag& f, const ExprDag& g, const CheckOptions& opts = {});

/// Whether f is identically equal to g, allowing small coefficient noise.
bool identical(const ExprDag& f, const ExprDag& g, const CheckOptions& opts = {});

struct SolveOptions {
    /// Invert sin and cos with asin and acos instead of failing.
    bool trig_branches = false;
    /// Take the other preimage: -sqrt for squares and, with trig_branches,
    /// pi - asin and -acos.
    bool alternate_branch = false;
};

/// Solve lhs == rhs for variable `target`, which must occur exactly once.
/// A product of a subexpression with itself counts as its square. Squares are
/// inverted on the non-negative branch unless alternate_branch is set. Throws NotSolvable.
ExprDag solve_for(const ExprDag& lhs, const ExprDag& rhs, int target, const SolveOptions& opts = {});

}  // namespace dimred
