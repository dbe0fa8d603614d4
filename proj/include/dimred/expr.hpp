#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dimred {

// Asin and Acos only come out of the solver (principal branches); no grammar enumerates them.
enum class UnaryOp : std::uint8_t { Sqrt, Log, Exp, Sin, Cos, Neg, Inv, Square, Asin, Acos };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div };

inline constexpr UnaryOp kAllUnaryOps[] = {UnaryOp::Sqrt, UnaryOp::Log, UnaryOp::Exp, UnaryOp::Sin,
                                           UnaryOp::Cos,  UnaryOp::Neg, UnaryOp::Inv, UnaryOp::Square};
inline constexpr BinaryOp kAllBinaryOps[] = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div};

std::string_view name(UnaryOp op);
std::string_view name(BinaryOp op);
inline bool is_commutative(BinaryOp op) { return op == BinaryOp::Add || op == BinaryOp::Mul; }

using NodeId = std::uint32_t;

struct Node {
    enum class Kind : std::uint8_t { Var, Const, Param, Unary, Binary };

    Kind kind{Kind::Const};
    std::uint8_t op{0};  // UnaryOp or BinaryOp, depending on kind
    int index{0};        // variable or parameter index
    double value{0.0};   // constant value, or current parameter value
    NodeId a{0};
    NodeId b{0};
    std::uint64_t hash{0};  // structural hash of the subtree rooted here

    UnaryOp unary() const { return static_cast<UnaryOp>(op); }
    BinaryOp binary() const { return static_cast<BinaryOp>(op); }
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable expression DAG. Nodes are stored in topological order (children
/// precede parents), every node is reachable from the root, and identical
/// subexpressions are interned once. Operands of + and * are ordered by
/// structural hash, so structurally equal expressions compare equal.
class ExprDag {
public:
    ExprDag() : ExprDag(constant(0.0)) {}

    static ExprDag var(int index);
    static ExprDag constant(double value);
    static ExprDag param(int index, double value = 1.0);
    static ExprDag unary(UnaryOp op, const ExprDag& child);
    static ExprDag binary(BinaryOp op, const ExprDag& lhs, const ExprDag& rhs);

    std::span<const Node> nodes() const { return nodes_; }
    NodeId root() const { return static_cast<NodeId>(nodes_.size() - 1); }
    const Node& root_node() const { return nodes_.back(); }
    std::size_t size() const { return nodes_.size(); }

    /// One past the largest variable index that occurs (0 for closed expressions).
    int arity() const { return arity_; }
    int param_count() const { return params_; }
    std::uint64_t hash() const { return nodes_.back().hash; }

    bool uses_var(int index) const;
    std::vector<int> variables() const;
    /// Occurrences of a variable in the expanded expression tree.
    std::size_t tree_occurrences(int index) const;
    /// Size of the expanded expression tree (shared nodes counted per use).
    std::size_t tree_size() const;

    bool is_constant() const { return root_node().kind == Node::Kind::Const; }
    bool is_var() const { return root_node().kind == Node::Kind::Var; }

    /// Subtree rooted at `id` as a standalone DAG.
    ExprDag subtree(NodeId id) const;
    ExprDag child(int which) const;

    /// Replace variable i by replacement[i]; variables beyond the span are kept.
    ExprDag substitute(std::span<const ExprDag> replacement) const;
    /// Rename variable i to mapping[i].
    ExprDag remap_vars(std::span<const int> mapping) const;
    /// Freeze parameters into constants.
    ExprDag bind_params(std::span<const double> values) const;
    std::vector<double> param_values() const;

    std::string str() const;
    /// Text form; `output_var` (if >= 0) is printed as `y`.
    std::string str(int output_var) const;

    friend bool operator==(const ExprDag& a, const ExprDag& b);

private:
    friend class DagBuilder;
    struct Raw {};
    explicit ExprDag(Raw) {}
    std::vector<Node> nodes_;
    int arity_{0};
    int params_{0};
};

ExprDag operator+(const ExprDag& a, const ExprDag& b);
ExprDag operator-(const ExprDag& a, const ExprDag& b);
ExprDag operator*(const ExprDag& a, const ExprDag& b);
ExprDag operator/(const ExprDag& a, const ExprDag& b);
ExprDag operator-(const ExprDag& a);
ExprDag sqrt(const ExprDag& a);
ExprDag log(const ExprDag& a);
ExprDag exp(const ExprDag& a);
ExprDag sin(const ExprDag& a);
ExprDag cos(const ExprDag& a);
ExprDag inv(const ExprDag& a);
ExprDag square(const ExprDag& a);
ExprDag asin(const ExprDag& a);
ExprDag acos(const ExprDag& a);

/// Shorthands for tests and examples, 1-based like the text format.
inline ExprDag x(int one_based) { return ExprDag::var(one_based - 1); }
inline ExprDag c(double v) { return ExprDag::constant(v); }

/// Interning builder. Nodes with equal content share one id.
class DagBuilder {
public:
    NodeId var(int index);
    NodeId constant(double value);
    NodeId param(int index, double value);
    NodeId unary(UnaryOp op, NodeId a);
    NodeId binary(BinaryOp op, NodeId a, NodeId b);
    /// Copy `dag` into this builder, returning the id of its root.
    NodeId import(const ExprDag& dag);

    const Node& node(NodeId id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    /// Extract the DAG rooted at `root`, dropping unreachable nodes.
    ExprDag finish(NodeId root) const;

private:
    NodeId intern(Node n);
    std::vector<Node> nodes_;
    // open addressing keyed by structural hash; collisions resolved by content compare
    std::vector<std::vector<NodeId>> buckets_;
};

struct ParseOptions {
    /// Variable index assigned to the symbol `y`; negative disables it.
    int y_index = -1;
};

ExprDag parse(std::string_view text, const ParseOptions& opts = {});

}  // namespace dimred
