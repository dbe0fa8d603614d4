#include <numbers>

#include "dimred/cas.hpp"

namespace dimred {

namespace {

// a * a on one shared node becomes square(a)
ExprDag fold_squares(const ExprDag& e)
{
    DagBuilder b;
    std::vector<NodeId> id(e.size());
    auto nodes = e.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        switch (n.kind) {
        case Node::Kind::Var: id[i] = b.var(n.index); break;
        case Node::Kind::Const: id[i] = b.constant(n.value); break;
        case Node::Kind::Param: id[i] = b.param(n.index, n.value); break;
        case Node::Kind::Unary: id[i] = b.unary(n.unary(), id[n.a]); break;
        case Node::Kind::Binary:
            id[i] = n.binary() == BinaryOp::Mul && n.a == n.b ? b.unary(UnaryOp::Square, id[n.a])
                                                              : b.binary(n.binary(), id[n.a], id[n.b]);
            break;
        }
    }
    return b.finish(id.back());
}

ExprDag isolate(ExprDag lhs, ExprDag rhs, int target, const SolveOptions& opts)
{
    while (!(lhs.is_var() && lhs.root_node().index == target)) {
        const Node& n = lhs.root_node();
        if (n.kind == Node::Kind::Unary) {
            ExprDag a = lhs.child(0);
            switch (n.unary()) {
            case UnaryOp::Sqrt: rhs = square(rhs); break;
            case UnaryOp::Log: rhs = exp(rhs); break;
            case UnaryOp::Exp: rhs = log(rhs); break;
            case UnaryOp::Neg: rhs = -rhs; break;
            case UnaryOp::Inv: rhs = inv(rhs); break;
            case UnaryOp::Square: rhs = opts.alternate_branch ? -sqrt(rhs) : sqrt(rhs); break;
            case UnaryOp::Sin:
            case UnaryOp::Cos:
                if (!opts.trig_branches)
                    throw NotSolvable(std::string(name(n.unary())) + " is not invertible on the path to the target");
                if (n.unary() == UnaryOp::Sin) rhs = opts.alternate_branch ? c(std::numbers::pi) - asin(rhs) : asin(rhs);
                else rhs = opts.alternate_branch ? -acos(rhs) : acos(rhs);
                break;
            case UnaryOp::Asin: rhs = sin(rhs); break;
            case UnaryOp::Acos: rhs = cos(rhs); break;
            }
            lhs = a;
            continue;
        }
        if (n.kind != Node::Kind::Binary) throw NotSolvable("target not found");
        ExprDag a = lhs.child(0);
        ExprDag b = lhs.child(1);
        bool in_a = a.uses_var(target);
        switch (n.binary()) {
        case BinaryOp::Add:
            if (in_a) rhs = rhs - b;
            else rhs = rhs - a;
            break;
        case BinaryOp::Sub:
            if (in_a) rhs = rhs + b;
            else rhs = a - rhs;
            break;
        case BinaryOp::Mul:
            if (in_a) rhs = rhs / b;
            else rhs = rhs / a;
            break;
        case BinaryOp::Div:
            if (in_a) rhs = rhs * b;
            else rhs = a / rhs;
            break;
        }
        lhs = in_a ? a : b;
    }
    return rhs;
}

}  // namespace

ExprDag solve_for(const ExprDag& lhs, const ExprDag& rhs, int target, const SolveOptions& opts)
{
    ExprDag l = fold_squares(lhs), r = fold_squares(rhs);
    auto occurrences = [&] { return l.tree_occurrences(target) + r.tree_occurrences(target); };
    if (occurrences() != 1) {
        l = fold_squares(simplify(lhs));
        r = fold_squares(simplify(rhs));
    }
    if (occurrences() != 1)
        throw NotSolvable("target x" + std::to_string(target + 1) + " must occur exactly once");
    if (r.uses_var(target)) std::swap(l, r);
    return isolate(l, r, target, opts);
}

}  // namespace dimred
