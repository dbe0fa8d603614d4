#include "dimred/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace dimred {

namespace {

double apply_unary(UnaryOp op, double a)
{
    switch (op) {
    case UnaryOp::Sqrt: return std::sqrt(a);
    case UnaryOp::Log: return std::log(a);
    case UnaryOp::Exp: return std::exp(a);
    case UnaryOp::Sin: return std::sin(a);
    case UnaryOp::Cos: return std::cos(a);
    case UnaryOp::Asin: return std::asin(a);
    case UnaryOp::Acos: return std::acos(a);
    case UnaryOp::Neg: return -a;
    case UnaryOp::Inv: return 1.0 / a;
    case UnaryOp::Square: return a * a;
    }
    return std::nan("");
}

double apply_binary(BinaryOp op, double a, double b)
{
    switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
    }
    return std::nan("");
}

}  // namespace

Vector eval(const ExprDag& dag, const Matrix& X) { return eval(dag, X, {}); }

Vector eval(const ExprDag& dag, const Matrix& X, std::span<const double> params)
{
    if (dag.arity() > X.cols()) throw std::invalid_argument("expression arity exceeds data columns");
    const Index n = X.rows();
    auto nodes = dag.nodes();
    std::vector<Eigen::ArrayXd> col(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& nd = nodes[i];
        switch (nd.kind) {
        case Node::Kind::Var: col[i] = X.col(nd.index).array(); break;
        case Node::Kind::Const: col[i] = Eigen::ArrayXd::Constant(n, nd.value); break;
        case Node::Kind::Param: {
            double v = static_cast<std::size_t>(nd.index) < params.size() ? params[nd.index] : nd.value;
            col[i] = Eigen::ArrayXd::Constant(n, v);
            break;
        }
        case Node::Kind::Unary: {
            const auto& a = col[nd.a];
            switch (nd.unary()) {
            case UnaryOp::Sqrt: col[i] = a.sqrt(); break;
            case UnaryOp::Log: col[i] = a.log(); break;
            case UnaryOp::Exp: col[i] = a.exp(); break;
            case UnaryOp::Sin: col[i] = a.sin(); break;
            case UnaryOp::Cos: col[i] = a.cos(); break;
            case UnaryOp::Asin: col[i] = a.asin(); break;
            case UnaryOp::Acos: col[i] = a.acos(); break;
            case UnaryOp::Neg: col[i] = -a; break;
            case UnaryOp::Inv: col[i] = a.inverse(); break;
            case UnaryOp::Square: col[i] = a.square(); break;
            }
            break;
        }
        case Node::Kind::Binary: {
            const auto& a = col[nd.a];
            const auto& b = col[nd.b];
            switch (nd.binary()) {
            case BinaryOp::Add: col[i] = a + b; break;
            case BinaryOp::Sub: col[i] = a - b; break;
            case BinaryOp::Mul: col[i] = a * b; break;
            case BinaryOp::Div: col[i] = a / b; break;
            }
            break;
        }
        }
    }
    return col.back().matrix();
}

double eval_point(const ExprDag& dag, std::span<const double> point)
{
    if (static_cast<std::size_t>(dag.arity()) > point.size())
        throw std::invalid_argument("expression arity exceeds point dimension");
    auto nodes = dag.nodes();
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& nd = nodes[i];
        switch (nd.kind) {
        case Node::Kind::Var: v[i] = point[nd.index]; break;
        case Node::Kind::Const:
        case Node::Kind::Param: v[i] = nd.value; break;
        case Node::Kind::Unary: v[i] = apply_unary(nd.unary(), v[nd.a]); break;
        case Node::Kind::Binary: v[i] = apply_binary(nd.binary(), v[nd.a], v[nd.b]); break;
        }
    }
    return v.back();
}

}  // namespace dimred
