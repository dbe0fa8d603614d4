#include "dimred/expr.hpp"

#include <algorithm>
#include <limits>
#include <bit>
#include <charconv>
#include <cmath>
#include <functional>

namespace dimred {

std::string_view name(UnaryOp op)
{
    switch (op) {
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Log: return "log";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Asin: return "asin";
    case UnaryOp::Acos: return "acos";
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Inv: return "inv";
    case UnaryOp::Square: return "square";
    }
    return "?";
}

std::string_view name(BinaryOp op)
{
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    }
    return "?";
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v)
{
    // splitmix64 finalizer over a running combination
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

std::uint64_t value_bits(double v)
{
    if (v == 0.0) v = 0.0;  // fold -0 into +0
    return std::bit_cast<std::uint64_t>(v);
}

bool same_content(const Node& x, const Node& y)
{
    if (x.kind != y.kind || x.op != y.op) return false;
    switch (x.kind) {
    case Node::Kind::Var:
    case Node::Kind::Param: return x.index == y.index;
    case Node::Kind::Const: return value_bits(x.value) == value_bits(y.value);
    case Node::Kind::Unary: return x.a == y.a;
    case Node::Kind::Binary: return x.a == y.a && x.b == y.b;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// DagBuilder

NodeId DagBuilder::intern(Node n)
{
    std::uint64_t h = mix(static_cast<std::uint64_t>(n.kind) * 131 + n.op, 0x51ed27);
    switch (n.kind) {
    case Node::Kind::Var: h = mix(h, static_cast<std::uint64_t>(n.index)); break;
    case Node::Kind::Param: break;  // index-free so operand order ignores parameter numbering
    case Node::Kind::Const: h = mix(h, value_bits(n.value)); break;
    case Node::Kind::Unary: h = mix(h, nodes_[n.a].hash); break;
    case Node::Kind::Binary:
        if (is_commutative(n.binary()) && nodes_[n.b].hash < nodes_[n.a].hash) std::swap(n.a, n.b);
        h = mix(mix(h, nodes_[n.a].hash), nodes_[n.b].hash);
        break;
    }
    n.hash = h;
    if (buckets_.empty()) buckets_.resize(64);
    if (nodes_.size() * 2 > buckets_.size()) {
        std::vector<std::vector<NodeId>> grown(buckets_.size() * 4);
        for (NodeId id = 0; id < nodes_.size(); ++id) grown[nodes_[id].hash % grown.size()].push_back(id);
        buckets_ = std::move(grown);
    }
    auto& bucket = buckets_[h % buckets_.size()];
    for (NodeId id : bucket)
        if (nodes_[id].hash == h && same_content(nodes_[id], n)) return id;
    nodes_.push_back(n);
    auto id = static_cast<NodeId>(nodes_.size() - 1);
    bucket.push_back(id);
    return id;
}

NodeId DagBuilder::var(int index)
{
    Node n;
    n.kind = Node::Kind::Var;
    n.index = index;
    return intern(n);
}

NodeId DagBuilder::constant(double value)
{
    Node n;
    n.kind = Node::Kind::Const;
    n.value = std::isnan(value) ? std::numeric_limits<double>::quiet_NaN() : (value == 0.0 ? 0.0 : value);
    return intern(n);
}

NodeId DagBuilder::param(int index, double value)
{
    Node n;
    n.kind = Node::Kind::Param;
    n.index = index;
    n.value = value;
    return intern(n);
}

NodeId DagBuilder::unary(UnaryOp op, NodeId a)
{
    Node n;
    n.kind = Node::Kind::Unary;
    n.op = static_cast<std::uint8_t>(op);
    n.a = a;
    return intern(n);
}

NodeId DagBuilder::binary(BinaryOp op, NodeId a, NodeId b)
{
    Node n;
    n.kind = Node::Kind::Binary;
    n.op = static_cast<std::uint8_t>(op);
    n.a = a;
    n.b = b;
    return intern(n);
}

NodeId DagBuilder::import(const ExprDag& dag)
{
    auto src = dag.nodes();
    std::vector<NodeId> map(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Node& n = src[i];
        switch (n.kind) {
        case Node::Kind::Var: map[i] = var(n.index); break;
        case Node::Kind::Const: map[i] = constant(n.value); break;
        case Node::Kind::Param: map[i] = param(n.index, n.value); break;
        case Node::Kind::Unary: map[i] = unary(n.unary(), map[n.a]); break;
        case Node::Kind::Binary: map[i] = binary(n.binary(), map[n.a], map[n.b]); break;
        }
    }
    return map.back();
}

ExprDag DagBuilder::finish(NodeId root) const
{
    // canonical post-order (left child first) so equal structures get equal layouts
    ExprDag out{ExprDag::Raw{}};
    std::vector<NodeId> remap(root + 1, 0);
    std::vector<char> done(root + 1, 0);
    std::vector<std::pair<NodeId, bool>> stack{{root, false}};
    while (!stack.empty()) {
        auto [id, expanded] = stack.back();
        stack.pop_back();
        if (done[id]) continue;
        const Node& src = nodes_[id];
        if (!expanded) {
            stack.push_back({id, true});
            if (src.kind == Node::Kind::Binary) stack.push_back({src.b, false});
            if (src.kind == Node::Kind::Unary || src.kind == Node::Kind::Binary) stack.push_back({src.a, false});
            continue;
        }
        Node n = src;
        if (n.kind == Node::Kind::Unary) n.a = remap[n.a];
        if (n.kind == Node::Kind::Binary) {
            n.a = remap[n.a];
            n.b = remap[n.b];
        }
        if (n.kind == Node::Kind::Var) out.arity_ = std::max(out.arity_, n.index + 1);
        if (n.kind == Node::Kind::Param) out.params_ = std::max(out.params_, n.index + 1);
        remap[id] = static_cast<NodeId>(out.nodes_.size());
        done[id] = 1;
        out.nodes_.push_back(n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ExprDag

ExprDag ExprDag::var(int index)
{
    if (index < 0) throw std::invalid_argument("negative variable index");
    DagBuilder b;
    return b.finish(b.var(index));
}

ExprDag ExprDag::constant(double value)
{
    DagBuilder b;
    return b.finish(b.constant(value));
}

ExprDag ExprDag::param(int index, double value)
{
    DagBuilder b;
    return b.finish(b.param(index, value));
}

ExprDag ExprDag::unary(UnaryOp op, const ExprDag& child)
{
    DagBuilder b;
    return b.finish(b.unary(op, b.import(child)));
}

ExprDag ExprDag::binary(BinaryOp op, const ExprDag& lhs, const ExprDag& rhs)
{
    DagBuilder b;
    NodeId l = b.import(lhs);
    NodeId r = b.import(rhs);
    return b.finish(b.binary(op, l, r));
}

bool ExprDag::uses_var(int index) const
{
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const Node& n) { return n.kind == Node::Kind::Var && n.index == index; });
}

std::vector<int> ExprDag::variables() const
{
    std::vector<int> out;
    for (const Node& n : nodes_)
        if (n.kind == Node::Kind::Var) out.push_back(n.index);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t ExprDag::tree_occurrences(int index) const
{
    std::vector<std::size_t> count(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.kind) {
        case Node::Kind::Var: count[i] = n.index == index ? 1 : 0; break;
        case Node::Kind::Unary: count[i] = count[n.a]; break;
        case Node::Kind::Binary: count[i] = count[n.a] + count[n.b]; break;
        default: break;
        }
    }
    return count.back();
}

std::size_t ExprDag::tree_size() const
{
    std::vector<std::size_t> count(nodes_.size(), 1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.kind == Node::Kind::Unary) count[i] = 1 + count[n.a];
        if (n.kind == Node::Kind::Binary) count[i] = 1 + count[n.a] + count[n.b];
    }
    return count.back();
}

ExprDag ExprDag::subtree(NodeId id) const
{
    DagBuilder b;
    std::vector<NodeId> map(id + 1);
    for (NodeId i = 0; i <= id; ++i) {
        const Node& n = nodes_[i];
        switch (n.kind) {
        case Node::Kind::Var: map[i] = b.var(n.index); break;
        case Node::Kind::Const: map[i] = b.constant(n.value); break;
        case Node::Kind::Param: map[i] = b.param(n.index, n.value); break;
        case Node::Kind::Unary: map[i] = b.unary(n.unary(), map[n.a]); break;
        case Node::Kind::Binary: map[i] = b.binary(n.binary(), map[n.a], map[n.b]); break;
        }
    }
    return b.finish(map[id]);
}

ExprDag ExprDag::child(int which) const
{
    const Node& r = root_node();
    if (r.kind == Node::Kind::Unary && which == 0) return subtree(r.a);
    if (r.kind == Node::Kind::Binary && (which == 0 || which == 1)) return subtree(which == 0 ? r.a : r.b);
    throw std::out_of_range("ExprDag::child");
}

ExprDag ExprDag::substitute(std::span<const ExprDag> replacement) const
{
    DagBuilder b;
    std::vector<NodeId> roots;
    roots.reserve(replacement.size());
    for (const auto& r : replacement) roots.push_back(b.import(r));
    std::vector<NodeId> map(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.kind) {
        case Node::Kind::Var:
            map[i] = static_cast<std::size_t>(n.index) < roots.size() ? roots[n.index] : b.var(n.index);
            break;
        case Node::Kind::Const: map[i] = b.constant(n.value); break;
        case Node::Kind::Param: map[i] = b.param(n.index, n.value); break;
        case Node::Kind::Unary: map[i] = b.unary(n.unary(), map[n.a]); break;
        case Node::Kind::Binary: map[i] = b.binary(n.binary(), map[n.a], map[n.b]); break;
        }
    }
    return b.finish(map.back());
}

ExprDag ExprDag::remap_vars(std::span<const int> mapping) const
{
    std::vector<ExprDag> repl;
    repl.reserve(mapping.size());
    for (int m : mapping) repl.push_back(var(m));
    return substitute(repl);
}

ExprDag ExprDag::bind_params(std::span<const double> values) const
{
    DagBuilder b;
    std::vector<NodeId> map(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.kind) {
        case Node::Kind::Var: map[i] = b.var(n.index); break;
        case Node::Kind::Const: map[i] = b.constant(n.value); break;
        case Node::Kind::Param:
            map[i] = static_cast<std::size_t>(n.index) < values.size() ? b.constant(values[n.index])
                                                                        : b.constant(n.value);
            break;
        case Node::Kind::Unary: map[i] = b.unary(n.unary(), map[n.a]); break;
        case Node::Kind::Binary: map[i] = b.binary(n.binary(), map[n.a], map[n.b]); break;
        }
    }
    return b.finish(map.back());
}

std::vector<double> ExprDag::param_values() const
{
    std::vector<double> out(params_, 1.0);
    for (const Node& n : nodes_)
        if (n.kind == Node::Kind::Param) out[n.index] = n.value;
    return out;
}

bool operator==(const ExprDag& a, const ExprDag& b)
{
    if (a.hash() != b.hash() || a.size() != b.size()) return false;
    auto na = a.nodes();
    auto nb = b.nodes();
    for (std::size_t i = 0; i < na.size(); ++i)
        if (!same_content(na[i], nb[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// printing

namespace {

enum Prec { kSum = 1, kProduct = 2, kPrefix = 3, kAtom = 4 };

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class Printer {
public:
    Printer(std::span<const Node> nodes, int output_var) : nodes_(nodes), output_var_(output_var) {}

    std::string print(NodeId id) const
    {
        const Node& n = nodes_[id];
        switch (n.kind) {
        case Node::Kind::Var:
            return n.index == output_var_ ? std::string("y") : "x" + std::to_string(n.index + 1);
        case Node::Kind::Const:
        case Node::Kind::Param: return format_number(n.value);
        case Node::Kind::Unary:
            if (n.unary() == UnaryOp::Neg) {
                const Node& c = nodes_[n.a];
                bool literal = (c.kind == Node::Kind::Const || c.kind == Node::Kind::Param);
                bool bare = prec(n.a) >= kAtom && !literal;
                return "-" + wrap(n.a, bare);
            }
            return std::string(name(n.unary())) + "(" + print(n.a) + ")";
        case Node::Kind::Binary: {
            auto [a, b] = display_order(n);
            switch (n.binary()) {
            case BinaryOp::Add:
            case BinaryOp::Sub:
                return wrap(a, true) + " " + std::string(name(n.binary())) + " " +
                       wrap(b, prec(b) == kProduct || prec(b) == kAtom);
            case BinaryOp::Mul: {
                bool left_bare = prec(a) >= kPrefix || is_div(a);
                return wrap(a, left_bare) + "*" + wrap(b, is_rchain(b));
            }
            case BinaryOp::Div: {
                bool left_bare = prec(n.a) >= kProduct;
                return wrap(n.a, left_bare) + "/" + wrap(n.b, prec(n.b) >= kAtom || is_prefix_safe(n.b));
            }
            }
        }
        }
        return "?";
    }

private:
    int prec(NodeId id) const
    {
        const Node& n = nodes_[id];
        switch (n.kind) {
        case Node::Kind::Var: return kAtom;
        case Node::Kind::Const:
        case Node::Kind::Param: return n.value < 0 || std::signbit(n.value) ? kPrefix : kAtom;
        case Node::Kind::Unary: return n.unary() == UnaryOp::Neg ? kPrefix : kAtom;
        case Node::Kind::Binary:
            return (n.binary() == BinaryOp::Add || n.binary() == BinaryOp::Sub) ? kSum : kProduct;
        }
        return kAtom;
    }

    bool is_op(NodeId id, BinaryOp op) const
    {
        const Node& n = nodes_[id];
        return n.kind == Node::Kind::Binary && n.binary() == op;
    }

    // leaf ordering for display: constants, then variables by index, then the rest
    int leaf_rank(NodeId id) const
    {
        const Node& n = nodes_[id];
        if (n.kind == Node::Kind::Const || n.kind == Node::Kind::Param) return -1;
        if (n.kind == Node::Kind::Var) return n.index;
        return std::numeric_limits<int>::max();
    }

    // Operands of + and * are stored in hash order; any order parses back to
    // the same DAG, so pick the one that reads best.
    std::pair<NodeId, NodeId> display_order(const Node& n) const
    {
        NodeId a = n.a, b = n.b;
        if (n.binary() == BinaryOp::Mul) {
            bool ma = is_op(a, BinaryOp::Mul), mb = is_op(b, BinaryOp::Mul);
            if ((ma && !mb) || (!ma && !mb && leaf_rank(b) < leaf_rank(a))) std::swap(a, b);
        } else if (n.binary() == BinaryOp::Add) {
            auto is_sum = [&](NodeId id) { return is_op(id, BinaryOp::Add) || is_op(id, BinaryOp::Sub); };
            auto rank = [&](NodeId id) {
                int r = leaf_rank(id);
                return r < 0 ? std::numeric_limits<int>::max() : (r == std::numeric_limits<int>::max() ? r - 1 : r);
            };
            bool sa = is_sum(a), sb = is_sum(b);
            if ((sb && !sa) || (!sa && !sb && prec(a) != kPrefix && (prec(b) == kPrefix || rank(b) < rank(a))))
                std::swap(a, b);
        }
        return {a, b};
    }

    bool is_div(NodeId id) const
    {
        const Node& n = nodes_[id];
        return n.kind == Node::Kind::Binary && n.binary() == BinaryOp::Div;
    }

    // prefix minus directly after '/' or '*' parses as a unary operand
    bool is_prefix_safe(NodeId id) const { return prec(id) == kPrefix; }

    // a right operand of '*' that the parser folds back into the same shape
    bool is_rchain(NodeId id) const
    {
        const Node& n = nodes_[id];
        if (prec(id) >= kPrefix) return true;
        if (n.kind == Node::Kind::Binary && n.binary() == BinaryOp::Mul) {
            auto [a, b] = display_order(n);
            return prec(a) >= kPrefix && is_rchain(b);
        }
        return false;
    }

    std::string wrap(NodeId id, bool bare) const
    {
        auto s = print(id);
        return bare ? s : "(" + s + ")";
    }

    std::span<const Node> nodes_;
    int output_var_;
};

}  // namespace

std::string ExprDag::str() const { return str(-1); }

std::string ExprDag::str(int output_var) const
{
    return Printer(nodes_, output_var).print(root());
}

// ---------------------------------------------------------------------------
// operators

ExprDag operator+(const ExprDag& a, const ExprDag& b) { return ExprDag::binary(BinaryOp::Add, a, b); }
ExprDag operator-(const ExprDag& a, const ExprDag& b) { return ExprDag::binary(BinaryOp::Sub, a, b); }
ExprDag operator*(const ExprDag& a, const ExprDag& b) { return ExprDag::binary(BinaryOp::Mul, a, b); }
ExprDag operator/(const ExprDag& a, const ExprDag& b) { return ExprDag::binary(BinaryOp::Div, a, b); }
ExprDag operator-(const ExprDag& a) { return ExprDag::unary(UnaryOp::Neg, a); }
ExprDag sqrt(const ExprDag& a) { return ExprDag::unary(UnaryOp::Sqrt, a); }
ExprDag log(const ExprDag& a) { return ExprDag::unary(UnaryOp::Log, a); }
ExprDag exp(const ExprDag& a) { return ExprDag::unary(UnaryOp::Exp, a); }
ExprDag sin(const ExprDag& a) { return ExprDag::unary(UnaryOp::Sin, a); }
ExprDag cos(const ExprDag& a) { return ExprDag::unary(UnaryOp::Cos, a); }
ExprDag asin(const ExprDag& a) { return ExprDag::unary(UnaryOp::Asin, a); }
ExprDag acos(const ExprDag& a) { return ExprDag::unary(UnaryOp::Acos, a); }
ExprDag inv(const ExprDag& a) { return ExprDag::unary(UnaryOp::Inv, a); }
ExprDag square(const ExprDag& a) { return ExprDag::unary(UnaryOp::Square, a); }

}  // namespace dimred
