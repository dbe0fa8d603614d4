#include "dimred/enumerate.hpp"

#include <stdexcept>
#include <unordered_map>

namespace dimred {

GrammarBudget GrammarBudget::standard(int intermediary)
{
    GrammarBudget b;
    b.max_intermediary_nodes = intermediary;
    b.binary_ops = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div};
    b.unary_ops = {UnaryOp::Sqrt, UnaryOp::Log, UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos};
    return b;
}

GrammarBudget GrammarBudget::aifeynman()
{
    GrammarBudget b;
    b.max_intermediary_nodes = 0;
    b.binary_ops = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div};
    return b;
}

GrammarBudget GrammarBudget::full(int intermediary)
{
    GrammarBudget b;
    b.max_intermediary_nodes = intermediary;
    b.binary_ops.assign(std::begin(kAllBinaryOps), std::end(kAllBinaryOps));
    b.unary_ops.assign(std::begin(kAllUnaryOps), std::end(kAllUnaryOps));
    return b;
}

namespace {

// Operand reference: leaf variable, a fresh parameter, or an earlier operator slot.
struct Ref {
    enum Kind { Var, Param, Slot } kind;
    int index;
};

struct Slot {
    bool is_unary;
    std::uint8_t op;
    Ref a;
    Ref b;
};

class Enumerator {
public:
    Enumerator(int arity, const GrammarBudget& budget, const std::function<bool(const ExprDag&)>& visit)
        : arity_(arity), budget_(budget), visit_(visit)
    {}

    void run()
    {
        for (int ops = 1; ops <= budget_.max_intermediary_nodes + 1 && !stopped_; ++ops) {
            slots_.assign(ops, {});
            fill(0);
        }
    }

private:
    std::vector<Ref> operands(int slot) const
    {
        std::vector<Ref> refs;
        for (int v = 0; v < arity_; ++v) refs.push_back({Ref::Var, v});
        if (budget_.allow_constants) refs.push_back({Ref::Param, 0});
        for (int s = 0; s < slot; ++s) refs.push_back({Ref::Slot, s});
        return refs;
    }

    void fill(int slot)
    {
        if (stopped_) return;
        if (slot == static_cast<int>(slots_.size())) {
            emit();
            return;
        }
        auto refs = operands(slot);
        for (UnaryOp op : budget_.unary_ops) {
            for (const Ref& a : refs) {
                if (a.kind == Ref::Param) continue;  // constant folding territory
                slots_[slot] = {true, static_cast<std::uint8_t>(op), a, {}};
                fill(slot + 1);
                if (stopped_) return;
            }
        }
        for (BinaryOp op : budget_.binary_ops) {
            for (std::size_t i = 0; i < refs.size(); ++i) {
                // commutative operands are unordered: visit each pair once
                std::size_t j0 = is_commutative(op) ? i : 0;
                for (std::size_t j = j0; j < refs.size(); ++j) {
                    if (refs[i].kind == Ref::Param && refs[j].kind == Ref::Param) continue;
                    slots_[slot] = {false, static_cast<std::uint8_t>(op), refs[i], refs[j]};
                    fill(slot + 1);
                    if (stopped_) return;
                }
            }
        }
    }

    void emit()
    {
        const int n = static_cast<int>(slots_.size());
        // every non-output slot must feed a later slot
        for (int s = 0; s + 1 < n; ++s) {
            bool used = false;
            for (int t = s + 1; t < n && !used; ++t) {
                const Slot& sl = slots_[t];
                used = (sl.a.kind == Ref::Slot && sl.a.index == s) ||
                       (!sl.is_unary && sl.b.kind == Ref::Slot && sl.b.index == s);
            }
            if (!used) return;
        }
        DagBuilder b;
        int next_param = 0;
        std::vector<NodeId> ids(n);
        auto resolve = [&](const Ref& r) -> NodeId {
            switch (r.kind) {
            case Ref::Var: return b.var(r.index);
            case Ref::Param: return b.param(next_param++, 1.0);
            case Ref::Slot: return ids[r.index];
            }
            return 0;
        };
        for (int s = 0; s < n; ++s) {
            const Slot& sl = slots_[s];
            if (sl.is_unary) {
                ids[s] = b.unary(static_cast<UnaryOp>(sl.op), resolve(sl.a));
            } else {
                NodeId l = resolve(sl.a);
                NodeId r = resolve(sl.b);
                ids[s] = b.binary(static_cast<BinaryOp>(sl.op), l, r);
            }
        }
        ExprDag dag = b.finish(ids.back());
        if (dag.param_count() > 0) dag = renumber_params(dag);
        if (dag.arity() == 0) return;  // closed expressions carry no variables
        // identical slots collapse during interning; such DAGs were already
        // produced with fewer operators
        if (count_ops(dag) != n) return;
        auto& bucket = seen_[dag.hash()];
        for (const auto& other : bucket)
            if (other == dag) return;
        bucket.push_back(dag);
        if (!visit_(dag)) stopped_ = true;
    }

    static int count_ops(const ExprDag& dag)
    {
        int k = 0;
        for (const Node& nd : dag.nodes())
            if (nd.kind == Node::Kind::Unary || nd.kind == Node::Kind::Binary) ++k;
        return k;
    }

    // parameters numbered in canonical node order so that c0*x + c1 and c1*x + c0 coincide
    static ExprDag renumber_params(const ExprDag& dag)
    {
        DagBuilder b;
        std::vector<NodeId> map(dag.size());
        int next = 0;
        auto nodes = dag.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& nd = nodes[i];
            switch (nd.kind) {
            case Node::Kind::Var: map[i] = b.var(nd.index); break;
            case Node::Kind::Const: map[i] = b.constant(nd.value); break;
            case Node::Kind::Param: map[i] = b.param(next++, nd.value); break;
            case Node::Kind::Unary: map[i] = b.unary(nd.unary(), map[nd.a]); break;
            case Node::Kind::Binary: map[i] = b.binary(nd.binary(), map[nd.a], map[nd.b]); break;
            }
        }
        return b.finish(map.back());
    }

    int arity_;
    const GrammarBudget& budget_;
    const std::function<bool(const ExprDag&)>& visit_;
    std::vector<Slot> slots_;
    std::unordered_map<std::uint64_t, std::vector<ExprDag>> seen_;
    bool stopped_{false};
};

}  // namespace

void enumerate_dags(int arity, const GrammarBudget& budget, const std::function<bool(const ExprDag&)>& visit)
{
    if (arity < 1) throw std::invalid_argument("enumerate_dags: arity must be >= 1");
    if (budget.max_intermediary_nodes < 0) throw std::invalid_argument("enumerate_dags: negative budget");
    Enumerator(arity, budget, visit).run();
}

std::vector<ExprDag> enumerate_dags(int arity, const GrammarBudget& budget, std::size_t limit)
{
    std::vector<ExprDag> out;
    if (limit == 0) return out;
    enumerate_dags(arity, budget, [&](const ExprDag& d) {
        out.push_back(d);
        return out.size() < limit;
    });
    return out;
}

}  // namespace dimred
