#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "dimred/expr.hpp"

namespace dimred {

/// Size and vocabulary of the DAGs that get enumerated. An intermediary node is
/// an operator node other than the output node.
struct GrammarBudget {
    int max_intermediary_nodes = 1;
    std::vector<UnaryOp> unary_ops;
    std::vector<BinaryOp> binary_ops;
    bool allow_constants = false;

    /// {+, -, *, /, sqrt, log, exp, sin, cos} with one intermediary node.
    static GrammarBudget standard(int intermediary = 1);
    /// The four bivariate AIFeynman substitutions x_i op x_j.
    static GrammarBudget aifeynman();
    /// Every operator the expression type knows about.
    static GrammarBudget full(int intermediary);
};

/// Visit every structurally distinct DAG over `arity` variables with one output
/// node and at most `budget.max_intermediary_nodes` intermediary nodes. DAGs are
/// produced in order of increasing operator count. The visitor returns false to
/// stop. With constants allowed, each constant leaf is a separate parameter node
/// and operator nodes whose operands are all parameters are skipped.
void enumerate_dags(int arity, const GrammarBudget& budget, const std::function<bool(const ExprDag&)>& visit);

std::vector<ExprDag> enumerate_dags(int arity, const GrammarBudget& budget,
                                    std::size_t limit = std::numeric_limits<std::size_t>::max());

}  // namespace dimred
