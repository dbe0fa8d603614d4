#include "dimred/cas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "dimred/eval.hpp"

namespace dimred {

namespace {

// ---------------------------------------------------------------------------
// Term: sum-of-products canonical form used internally by the simplifier.

enum class K : std::uint8_t { Num, Var, Fn, Pow, Mul, Add };
enum class Fn : std::uint8_t { Log, Exp, Sin, Cos, Asin, Acos };

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

// Num: value in `num`. Var: index in `var`. Fn: args[0].
// Pow: args[0] raised to `num`. Mul: coefficient `num` times args[i]^w[i].
// Add: constant `num` plus w[i]*args[i].
struct TermNode {
    K kind{K::Num};
    Fn fn{Fn::Log};
    int var{0};
    double num{0.0};
    std::vector<Term> args;
    std::vector<double> w;
};

using Weighted = std::vector<std::pair<Term, double>>;

// Division by zero and similar make the whole expression undefined.
constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

bool is_undefined(const Term& t) { return t->kind == K::Num && std::isnan(t->num); }

bool is_int(double e) { return std::abs(e) < 9.0e15 && e == std::floor(e); }
bool is_even_int(double e) { return is_int(e) && std::fmod(e, 2.0) == 0.0; }

int cmp_num(double a, double b) { return a < b ? -1 : (a > b ? 1 : 0); }

int compare(const Term& a, const Term& b)
{
    if (a == b) return 0;
    if (a->kind != b->kind) return a->kind < b->kind ? -1 : 1;
    switch (a->kind) {
    case K::Num: return cmp_num(a->num, b->num);
    case K::Var: return a->var < b->var ? -1 : (a->var > b->var ? 1 : 0);
    case K::Fn:
        if (a->fn != b->fn) return a->fn < b->fn ? -1 : 1;
        return compare(a->args[0], b->args[0]);
    case K::Pow:
        if (int c = compare(a->args[0], b->args[0])) return c;
        return cmp_num(a->num, b->num);
    case K::Mul:
    case K::Add: {
        std::size_t n = std::min(a->args.size(), b->args.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (int c = compare(a->args[i], b->args[i])) return c;
            if (int c = cmp_num(a->w[i], b->w[i])) return c;
        }
        if (a->args.size() != b->args.size()) return a->args.size() < b->args.size() ? -1 : 1;
        return cmp_num(a->num, b->num);
    }
    }
    return 0;
}

bool has_var(const Term& t)
{
    if (t->kind == K::Var) return true;
    for (const auto& a : t->args)
        if (has_var(a)) return true;
    return false;
}

Term make(TermNode n) { return std::make_shared<const TermNode>(std::move(n)); }

Term raw_pow(Term base, double e)
{
    TermNode n;
    n.kind = K::Pow;
    n.num = e;
    n.args = {std::move(base)};
    return make(std::move(n));
}

// Factors of a product as (base, exponent) with unit coefficient.
Weighted factors_of(const Term& t)
{
    Weighted out;
    if (t->kind == K::Mul) {
        for (std::size_t i = 0; i < t->args.size(); ++i) out.emplace_back(t->args[i], t->w[i]);
    } else if (t->kind == K::Pow) {
        out.emplace_back(t->args[0], t->num);
    } else {
        out.emplace_back(t, 1.0);
    }
    return out;
}

// Product with coefficient 1 from already-canonical factors.
Term unit_product(const Weighted& f)
{
    if (f.size() == 1) return f[0].second == 1.0 ? f[0].first : raw_pow(f[0].first, f[0].second);
    TermNode n;
    n.kind = K::Mul;
    n.num = 1.0;
    for (const auto& [b, e] : f) {
        n.args.push_back(b);
        n.w.push_back(e);
    }
    return make(std::move(n));
}

void sort_merge(Weighted& items)
{
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
    Weighted merged;
    for (auto& it : items) {
        if (!merged.empty() && compare(merged.back().first, it.first) == 0) merged.back().second += it.second;
        else merged.push_back(std::move(it));
    }
    items.clear();
    for (auto& it : merged)
        if (it.second != 0.0) items.push_back(std::move(it));
}

class Cas {
public:
    explicit Cas(bool positive) : pos_(positive) {}

    Term num(double v)
    {
        TermNode n;
        n.kind = K::Num;
        n.num = std::isnan(v) ? kUndefined : (v == 0.0 ? 0.0 : v);
        return make(std::move(n));
    }

    Term var(int i)
    {
        TermNode n;
        n.kind = K::Var;
        n.var = i;
        return make(std::move(n));
    }

    Term add(const Weighted& items, double constant)
    {
        Weighted terms;
        double c = constant;
        for (const auto& [t, w] : items) {
            if (is_undefined(t) || std::isnan(w)) return num(kUndefined);
            if (w == 0.0) continue;
            switch (t->kind) {
            case K::Num: c += w * t->num; break;
            case K::Add:
                c += w * t->num;
                for (std::size_t i = 0; i < t->args.size(); ++i) terms.emplace_back(t->args[i], w * t->w[i]);
                break;
            case K::Mul:
                if (t->num != 1.0) {
                    terms.emplace_back(unit_product(factors_of(t)), w * t->num);
                    break;
                }
                [[fallthrough]];
            default: terms.emplace_back(t, w);
            }
        }
        sort_merge(terms);
        if (terms.empty()) return num(c);
        if (terms.size() == 1 && c == 0.0) {
            if (terms[0].second == 1.0) return terms[0].first;
            return mul(terms[0].second, {terms[0].first});
        }
        TermNode n;
        n.kind = K::Add;
        n.num = c == 0.0 ? 0.0 : c;
        for (auto& [t, w] : terms) {
            n.args.push_back(t);
            n.w.push_back(w);
        }
        return make(std::move(n));
    }

    Term neg(const Term& t) { return mul(-1.0, {t}); }

    Term mul(double coef, const std::vector<Term>& items)
    {
        Weighted fac;
        for (const auto& t : items) {
            if (is_undefined(t)) return num(kUndefined);
            switch (t->kind) {
            case K::Num: coef *= t->num; break;
            case K::Mul:
                coef *= t->num;
                for (std::size_t i = 0; i < t->args.size(); ++i) fac.emplace_back(t->args[i], t->w[i]);
                break;
            case K::Pow: fac.emplace_back(t->args[0], t->num); break;
            default: fac.emplace_back(t, 1.0);
            }
        }
        if (std::isnan(coef)) return num(kUndefined);
        if (coef == 0.0) return num(0.0);

        // merge equal bases; a merged compound base may simplify further
        std::stable_sort(fac.begin(), fac.end(),
                         [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
        Weighted merged;
        bool rebuild = false;
        int exps = 0;
        for (auto& f : fac) {
            if (!merged.empty() && compare(merged.back().first, f.first) == 0) {
                merged.back().second += f.second;
                K k = f.first->kind;
                if (k == K::Mul || k == K::Pow || k == K::Num) rebuild = true;
            } else {
                merged.push_back(f);
            }
        }
        Weighted kept;
        Weighted exp_args;
        for (auto& [b, e] : merged) {
            if (e == 0.0) continue;
            if (b->kind == K::Fn && b->fn == Fn::Exp) {
                exp_args.emplace_back(b->args[0], e);
                ++exps;
                continue;
            }
            if (b->kind == K::Num) {
                Term p = pow(b, e);
                if (p->kind == K::Num) {
                    coef *= p->num;
                    continue;
                }
            }
            kept.emplace_back(b, e);
        }
        if (exps > 1 || rebuild) {
            std::vector<Term> again;
            for (auto& [b, e] : kept) again.push_back(pow(b, e));
            if (!exp_args.empty()) again.push_back(fn(Fn::Exp, add(exp_args, 0.0)));
            if (!rebuild) return finish_mul(coef, again);
            return mul(coef, again);
        }
        if (exps == 1) kept.emplace_back(fn(Fn::Exp, exp_args[0].first), exp_args[0].second);
        std::stable_sort(kept.begin(), kept.end(),
                         [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; });
        return product(coef, kept);
    }

    Term pow(const Term& b, double e)
    {
        if (is_undefined(b)) return b;
        if (e == 0.0) return num(1.0);
        if (e == 1.0) return b;
        switch (b->kind) {
        case K::Num: {
            if (b->num == 0.0 && e < 0) return num(kUndefined);
            double v = std::pow(b->num, e);
            if (std::isfinite(v) && (b->num > 0 || is_int(e))) return num(v);
            return raw_pow(b, e);
        }
        case K::Pow: {
            double a = b->num;
            bool valid = (pos_ && positive(b->args[0])) || is_int(e) || !is_even_int(a) || is_even_int(a * e);
            if (valid) return pow(b->args[0], a * e);
            return raw_pow(b, e);
        }
        case K::Mul: {
            if (is_int(e) || (pos_ && b->num > 0)) {
                std::vector<Term> parts{pow(num(b->num), e)};
                for (std::size_t i = 0; i < b->args.size(); ++i) parts.push_back(pow(raw_pow(b->args[i], b->w[i]), e));
                return mul(1.0, parts);
            }
            return raw_pow(b, e);
        }
        case K::Fn:
            if (b->fn == Fn::Exp) return fn(Fn::Exp, mul(e, {b->args[0]}));
            return raw_pow(b, e);
        case K::Add: return product(1.0, {{b, e}});
        default: return raw_pow(b, e);
        }
    }

    // constant term of a sum when it is a nonzero integer multiple of pi
    static std::optional<long> pi_multiple(const Term& a)
    {
        if (a->kind != K::Add || a->num == 0.0) return std::nullopt;
        double k = std::round(a->num / std::numbers::pi);
        if (k == 0.0 || std::abs(a->num - k * std::numbers::pi) > 1e-12 * std::abs(a->num)) return std::nullopt;
        return static_cast<long>(k);
    }

    Term drop_constant(const Term& a)
    {
        Weighted items;
        for (std::size_t i = 0; i < a->args.size(); ++i) items.emplace_back(a->args[i], a->w[i]);
        return add(items, 0.0);
    }

    Term fn(Fn f, const Term& a)
    {
        if (is_undefined(a)) return a;
        if (a->kind == K::Num) {
            double v = std::nan("");
            switch (f) {
            case Fn::Log: v = std::log(a->num); break;
            case Fn::Exp: v = std::exp(a->num); break;
            case Fn::Sin: v = std::sin(a->num); break;
            case Fn::Cos: v = std::cos(a->num); break;
            case Fn::Asin: v = std::asin(a->num); break;
            case Fn::Acos: v = std::acos(a->num); break;
            }
            if (std::isfinite(v)) return num(v);
        }
        switch (f) {
        case Fn::Log:
            if (a->kind == K::Fn && a->fn == Fn::Exp) return a->args[0];
            if (pos_ && a->kind == K::Pow && (positive(a->args[0]) || !is_even_int(a->num)))
                return mul(a->num, {fn(Fn::Log, a->args[0])});
            if (pos_ && a->kind == K::Mul && a->num > 0 && log_splits(a)) {
                Weighted parts;
                for (std::size_t i = 0; i < a->args.size(); ++i) parts.emplace_back(fn(Fn::Log, a->args[i]), a->w[i]);
                return add(parts, std::log(a->num));
            }
            break;
        case Fn::Exp:
            if (a->kind == K::Fn && a->fn == Fn::Log) return a->args[0];
            if (a->kind == K::Mul && a->args.size() == 1 && a->w[0] == 1.0 && a->args[0]->kind == K::Fn &&
                a->args[0]->fn == Fn::Log)
                return pow(a->args[0]->args[0], a->num);
            if (a->kind == K::Add) {
                std::vector<Term> powers;
                Weighted rest;
                for (std::size_t i = 0; i < a->args.size(); ++i) {
                    const Term& t = a->args[i];
                    if (t->kind == K::Fn && t->fn == Fn::Log) powers.push_back(pow(t->args[0], a->w[i]));
                    else rest.emplace_back(t, a->w[i]);
                }
                if (powers.empty()) break;
                powers.push_back(fn(Fn::Exp, add(rest, a->num)));
                return mul(1.0, powers);
            }
            break;
        case Fn::Sin:
            if (a->kind == K::Fn && a->fn == Fn::Asin) return a->args[0];
            if (auto k = pi_multiple(a)) return mul(*k % 2 ? -1.0 : 1.0, {fn(Fn::Sin, drop_constant(a))});
            if (negative_leading(a)) return neg(fn(Fn::Sin, neg(a)));
            break;
        case Fn::Cos:
            if (a->kind == K::Fn && a->fn == Fn::Acos) return a->args[0];
            if (auto k = pi_multiple(a)) return mul(*k % 2 ? -1.0 : 1.0, {fn(Fn::Cos, drop_constant(a))});
            if (negative_leading(a)) return fn(Fn::Cos, neg(a));
            break;
        case Fn::Asin:
            if (negative_leading(a)) return neg(fn(Fn::Asin, neg(a)));
            break;
        case Fn::Acos: break;
        }
        TermNode n;
        n.kind = K::Fn;
        n.fn = f;
        n.args = {a};
        return make(std::move(n));
    }

    Term from_dag(const ExprDag& dag)
    {
        auto nodes = dag.nodes();
        std::vector<Term> t(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& nd = nodes[i];
            switch (nd.kind) {
            case Node::Kind::Var: t[i] = var(nd.index); break;
            case Node::Kind::Const:
            case Node::Kind::Param: t[i] = num(nd.value); break;
            case Node::Kind::Unary: {
                const Term& a = t[nd.a];
                switch (nd.unary()) {
                case UnaryOp::Sqrt: t[i] = pow(a, 0.5); break;
                case UnaryOp::Log: t[i] = fn(Fn::Log, a); break;
                case UnaryOp::Exp: t[i] = fn(Fn::Exp, a); break;
                case UnaryOp::Sin: t[i] = fn(Fn::Sin, a); break;
                case UnaryOp::Cos: t[i] = fn(Fn::Cos, a); break;
                case UnaryOp::Asin: t[i] = fn(Fn::Asin, a); break;
                case UnaryOp::Acos: t[i] = fn(Fn::Acos, a); break;
                case UnaryOp::Neg: t[i] = neg(a); break;
                case UnaryOp::Inv: t[i] = pow(a, -1.0); break;
                case UnaryOp::Square: t[i] = pow(a, 2.0); break;
                }
                break;
            }
            case Node::Kind::Binary: {
                const Term& a = t[nd.a];
                const Term& b = t[nd.b];
                switch (nd.binary()) {
                case BinaryOp::Add: t[i] = add({{a, 1.0}, {b, 1.0}}, 0.0); break;
                case BinaryOp::Sub: t[i] = add({{a, 1.0}, {b, -1.0}}, 0.0); break;
                case BinaryOp::Mul: t[i] = mul(1.0, {a, b}); break;
                case BinaryOp::Div: t[i] = mul(1.0, {a, pow(b, -1.0)}); break;
                }
                break;
            }
            }
        }
        return t.back();
    }

private:
    Term finish_mul(double coef, const std::vector<Term>& items)
    {
        // items are already simplified and share no base; only exp merging is left
        Weighted fac;
        for (const auto& t : items) {
            if (t->kind == K::Num) {
                coef *= t->num;
                continue;
            }
            for (auto& f : factors_of(t)) fac.push_back(f);
            if (t->kind == K::Mul) coef *= t->num;
        }
        if (coef == 0.0) return num(0.0);
        sort_merge(fac);
        return product(coef, fac);
    }

    // Sum factors are scaled so their leading weight is 1 (or -1 under a
    // fractional power), which keeps like products comparable.
    Term product(double coef, Weighted kept)
    {
        bool rescaled = false;
        for (auto& [b, e] : kept) {
            if (b->kind != K::Add) continue;
            double w0 = b->w[0];
            double s = is_int(e) ? w0 : std::abs(w0);
            if (s == 1.0) continue;
            TermNode n = *b;
            n.num /= s;
            for (double& w : n.w) w /= s;
            b = make(std::move(n));
            coef *= std::pow(s, e);
            rescaled = true;
        }
        if (rescaled) sort_merge(kept);
        if (auto pulled = pull_common_factor(coef, kept)) return *pulled;
        if (kept.empty()) return num(coef);
        if (kept.size() == 1 && kept[0].second == 1.0 && kept[0].first->kind == K::Add) {
            if (coef == 1.0) return kept[0].first;
            const Term& s = kept[0].first;
            Weighted scaled;
            for (std::size_t i = 0; i < s->args.size(); ++i) scaled.emplace_back(s->args[i], coef * s->w[i]);
            return add(scaled, coef * s->num);
        }
        if (coef == 1.0) return unit_product(kept);
        TermNode n;
        n.kind = K::Mul;
        n.num = coef;
        for (const auto& [b, e] : kept) {
            n.args.push_back(b);
            n.w.push_back(e);
        }
        return make(std::move(n));
    }

    // A base common to every term of a sum factor moves out of the sum when it
    // then cancels (at least partly) against the rest of the product.
    std::optional<Term> pull_common_factor(double coef, const Weighted& kept)
    {
        if (kept.size() < 2) return std::nullopt;
        for (std::size_t s = 0; s < kept.size(); ++s) {
            const auto& [sum, e] = kept[s];
            if (sum->kind != K::Add || sum->num != 0.0 || !(pos_ || is_int(e))) continue;
            std::vector<Weighted> terms;
            for (const auto& t : sum->args) terms.push_back(factors_of(t));
            for (std::size_t o = 0; o < kept.size(); ++o) {
                const auto& [base, eo] = kept[o];
                if (o == s || base->kind == K::Num) continue;
                double k = 0.0;
                bool common = true;
                for (const auto& fs : terms) {
                    auto it = std::find_if(fs.begin(), fs.end(),
                                           [&](const auto& f) { return compare(f.first, base) == 0; });
                    if (it == fs.end() || (k != 0.0 && (it->second > 0) != (k > 0))) {
                        common = false;
                        break;
                    }
                    if (k == 0.0 || std::abs(it->second) < std::abs(k)) k = it->second;
                }
                if (!common || (k * e > 0) == (eo > 0)) continue;
                Weighted reduced;
                Term drop = raw_pow(base, -k);
                for (std::size_t i = 0; i < sum->args.size(); ++i)
                    reduced.emplace_back(mul(1.0, {sum->args[i], drop}), sum->w[i]);
                std::vector<Term> items;
                for (std::size_t j = 0; j < kept.size(); ++j)
                    if (j != s) items.push_back(kept[j].second == 1.0 ? kept[j].first : raw_pow(kept[j].first, kept[j].second));
                Term rest = add(reduced, 0.0);
                items.push_back(e == 1.0 ? rest : pow(rest, e));
                items.push_back(raw_pow(base, k * e));
                return mul(coef, items);
            }
        }
        return std::nullopt;
    }

    // Positive for positive variables.
    bool positive(const Term& t) const
    {
        switch (t->kind) {
        case K::Num: return t->num > 0;
        case K::Var: return pos_;
        case K::Fn: return t->fn == Fn::Exp;
        case K::Pow: return positive(t->args[0]);
        case K::Mul:
        case K::Add:
            if (t->num < 0 || (t->kind == K::Mul && t->num == 0)) return false;
            for (std::size_t i = 0; i < t->args.size(); ++i)
                if ((t->kind == K::Add && t->w[i] < 0) || !positive(t->args[i])) return false;
            return true;
        }
        return false;
    }

    bool log_splits(const Term& m) const
    {
        for (std::size_t i = 0; i < m->args.size(); ++i)
            if (is_even_int(m->w[i]) && !positive(m->args[i])) return false;
        return true;
    }

    static bool negative_leading(const Term& t)
    {
        if (t->kind == K::Mul) return t->num < 0;
        if (t->kind == K::Add) return !t->w.empty() && t->w[0] < 0;
        return false;
    }

    bool pos_;
};

// ---------------------------------------------------------------------------
// Term -> ExprDag

class Emitter {
public:
    NodeId emit(const Term& t)
    {
        switch (t->kind) {
        case K::Num: return b.constant(t->num);
        case K::Var: return b.var(t->var);
        case K::Fn: {
            static constexpr UnaryOp ops[] = {UnaryOp::Log, UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Asin, UnaryOp::Acos};
            return b.unary(ops[static_cast<int>(t->fn)], emit(t->args[0]));
        }
        case K::Pow: return product(1.0, factors_of(t));
        case K::Mul: return product(t->num, factors_of(t));
        case K::Add: return sum(t);
        }
        return 0;
    }

    DagBuilder b;

private:
    NodeId sum(const Term& t)
    {
        NodeId acc = 0;
        for (std::size_t i = 0; i < t->args.size(); ++i) {
            double w = t->w[i];
            auto f = factors_of(t->args[i]);
            if (i == 0) acc = product(w, f);
            else if (w < 0) acc = b.binary(BinaryOp::Sub, acc, product(-w, f));
            else acc = b.binary(BinaryOp::Add, acc, product(w, f));
        }
        if (t->num > 0) acc = b.binary(BinaryOp::Add, acc, b.constant(t->num));
        else if (t->num < 0) acc = b.binary(BinaryOp::Sub, acc, b.constant(-t->num));
        return acc;
    }

    void pieces(const Term& base, double q, std::vector<NodeId>& out)
    {
        NodeId node = emit(base);
        double whole = std::floor(q);
        for (int i = 0; i < static_cast<int>(whole); ++i) out.push_back(node);
        double frac = q - whole;
        NodeId root = node;
        for (int j = 0; frac > 0 && j < 60; ++j) {
            root = b.unary(UnaryOp::Sqrt, root);
            frac *= 2;
            if (frac >= 1) {
                out.push_back(root);
                frac -= 1;
            }
        }
    }

    NodeId chain(const std::vector<NodeId>& xs)
    {
        NodeId acc = xs.back();
        for (std::size_t i = xs.size() - 1; i-- > 0;) acc = b.binary(BinaryOp::Mul, xs[i], acc);
        return acc;
    }

    // The coefficient is applied last so that no intermediate node pairs a
    // bare number with a single sum (which would re-distribute on parsing).
    NodeId product(double coef, const Weighted& factors)
    {
        bool negate = coef < 0;
        double c = std::abs(coef);
        std::vector<NodeId> num, den;
        bool den_is_sum = false;
        for (const auto& [base, e] : factors) {
            if (e > 0) {
                pieces(base, e, num);
            } else {
                pieces(base, -e, den);
                den_is_sum = base->kind == K::Add && e == -1.0;
            }
        }
        den_is_sum = den_is_sum && den.size() == 1;
        double k = c != 1.0 ? 1.0 / c : 0.0;
        bool divide_by_k = k >= 2 && k < 1e15 && k == std::floor(k) && 1.0 / k == c;

        if (num.empty()) {
            if (c != 1.0 && divide_by_k && !den_is_sum)
                return b.binary(BinaryOp::Div, b.constant(negate ? -1.0 : 1.0),
                                b.binary(BinaryOp::Mul, b.constant(k), chain(den)));
            return b.binary(BinaryOp::Div, b.constant(negate ? -c : c), chain(den));
        }
        NodeId node = chain(num);
        if (!den.empty()) node = b.binary(BinaryOp::Div, node, chain(den));
        if (c != 1.0) {
            if (divide_by_k) {
                node = b.binary(BinaryOp::Div, node, b.constant(k));
            } else {
                node = b.binary(BinaryOp::Mul, b.constant(negate ? -c : c), node);
                negate = false;
            }
        }
        return negate ? b.unary(UnaryOp::Neg, node) : node;
    }
};

Term to_term(const ExprDag& dag, SimplifyMode mode) { return Cas(mode == SimplifyMode::Positive).from_dag(dag); }

ExprDag to_dag(const Term& t)
{
    Emitter e;
    NodeId root = e.emit(t);
    return e.b.finish(root);
}

// ---------------------------------------------------------------------------
// numeric helpers

struct Sampler {
    Sampler(int arity, const CheckOptions& opts, bool symmetric)
        : rng(opts.seed), dist(symmetric ? -opts.hi : opts.lo, opts.hi), point(std::max(arity, 1))
    {}
    std::vector<double>& draw()
    {
        for (auto& v : point) v = dist(rng);
        return point;
    }
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> dist;
    std::vector<double> point;
};

// max(1, |magnitude|) used to scale constancy tolerances
double magnitude(const Term& t)
{
    double m = 1.0;
    if (t->kind == K::Num) m = std::max(m, std::abs(t->num));
    if (t->kind == K::Mul) m = std::max(m, std::abs(t->num));
    if (t->kind == K::Add) {
        m = std::max(m, std::abs(t->num));
        for (double w : t->w) m = std::max(m, std::abs(w));
    }
    return m;
}

// Constant up to terms whose coefficients are negligible against `scale`.
bool near_constant(const Term& t, double scale, double tol)
{
    if (!has_var(t)) return true;
    if (t->kind == K::Mul) return std::abs(t->num) <= tol * scale;
    if (t->kind == K::Add) {
        for (std::size_t i = 0; i < t->args.size(); ++i)
            if (has_var(t->args[i]) && std::abs(t->w[i]) > tol * scale) return false;
        return true;
    }
    return false;
}

// Numeric constancy of `expr`, with tolerance scaled by |f| and |g|. nullopt
// when too few points evaluate to finite numbers.
std::optional<bool> numerically_constant(const ExprDag& expr, const ExprDag& f, const ExprDag& g,
                                         const CheckOptions& opts)
{
    int arity = std::max({expr.arity(), f.arity(), g.arity()});
    for (bool symmetric : {false, true}) {
        Sampler s(arity, opts, symmetric);
        std::vector<std::pair<double, double>> vals;
        for (int t = 0; t < opts.trials; ++t) {
            auto& p = s.draw();
            double v = eval_point(expr, p);
            double sc = std::max({1.0, std::abs(eval_point(f, p)), std::abs(eval_point(g, p))});
            if (std::isfinite(v) && std::isfinite(sc)) vals.emplace_back(v, sc);
        }
        if (vals.size() < 10) continue;
        for (const auto& [v, sc] : vals)
            if (std::abs(v - vals[0].first) > opts.constancy_tol * std::max(sc, vals[0].second)) return false;
        return true;
    }
    return std::nullopt;
}

bool constant_both_ways(const ExprDag& expr, const Term& simplified, double scale, const ExprDag& f,
                        const ExprDag& g, const CheckOptions& opts)
{
    if (!near_constant(simplified, scale, opts.constancy_tol)) return false;
    auto num = numerically_constant(expr, f, g, opts);
    return num.value_or(true);
}

}  // namespace

ExprDag simplify(const ExprDag& dag, SimplifyMode mode) { return to_dag(to_term(dag, mode)); }

std::size_t complexity(const ExprDag& dag) { return simplify(dag).tree_size(); }

std::set<std::string> subexpressions(const ExprDag& dag)
{
    std::set<std::string> out;
    for (NodeId id = 0; id < dag.size(); ++id) out.insert(simplify(dag.subtree(id)).str());
    return out;
}

bool depends_on(const ExprDag& dag, int var, const CheckOptions& opts)
{
    if (!dag.uses_var(var)) return false;
    bool symbolic = simplify(dag, SimplifyMode::Positive).uses_var(var);
    for (bool symmetric : {false, true}) {
        Sampler s(dag.arity(), opts, symmetric);
        int valid = 0;
        bool changed = false;
        for (int t = 0; t < opts.trials; ++t) {
            auto& p = s.draw();
            double a = eval_point(dag, p);
            double keep = p[var];
            p[var] = s.dist(s.rng);
            double b = eval_point(dag, p);
            p[var] = keep;
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            ++valid;
            if (std::abs(a - b) > opts.dependence_tol * std::max({1.0, std::abs(a), std::abs(b)})) changed = true;
        }
        if (valid < 10) continue;
        if (changed != symbolic)
            throw Inconclusive("dependence of " + dag.str() + " on x" + std::to_string(var + 1) +
                               ": symbolic and numeric checks disagree");
        return symbolic;
    }
    return symbolic;
}

bool depends_on_any(const ExprDag& dag, std::span<const int> vars, const CheckOptions& opts)
{
    for (int v : vars)
        if (depends_on(dag, v, opts)) return true;
    return false;
}

bool identical(const ExprDag& f, const ExprDag& g, const CheckOptions& opts)
{
    Cas cas(true);
    Term tf = cas.from_dag(f);
    Term tg = cas.from_dag(g);
    double scale = std::max(magnitude(tf), magnitude(tg));
    ExprDag diff = f - g;
    Term td = cas.add({{tf, 1.0}, {tg, -1.0}}, 0.0);
    if (!near_constant(td, scale, opts.constancy_tol)) return false;
    if (td->kind == K::Num && std::abs(td->num) > opts.constancy_tol * scale) return false;
    if (td->kind == K::Add && std::abs(td->num) > opts.constancy_tol * scale) return false;
    auto num = numerically_constant(diff, f, g, opts);
    return num.value_or(true);
}

bool equivalent(const ExprDag& f, const ExprDag& g, const CheckOptions& opts)
{
    if (simplify(f) == simplify(g)) return true;
    Cas cas(true);
    Term tf = cas.from_dag(f);
    Term tg = cas.from_dag(g);
    double scale = std::max(magnitude(tf), magnitude(tg));

    // additive constant
    Term td = cas.add({{tf, 1.0}, {tg, -1.0}}, 0.0);
    if (constant_both_ways(f - g, td, scale, f, g, opts)) return true;

    bool g_zero = tg->kind == K::Num && tg->num == 0.0;
    bool f_zero = tf->kind == K::Num && tf->num == 0.0;
    if (g_zero || f_zero) return false;

    // multiplicative constant
    Term tr = cas.mul(1.0, {tf, cas.pow(tg, -1.0)});
    ExprDag ratio = f / g;
    if (!has_var(tr)) return constant_both_ways(ratio, tr, 1.0, ratio, ratio, opts);

    // multiplicative constant with coefficient noise: f - k*g ~ const
    int arity = std::max(f.arity(), g.arity());
    for (bool symmetric : {false, true}) {
        Sampler s(arity, opts, symmetric);
        std::vector<double> ks;
        for (int t = 0; t < opts.trials; ++t) {
            auto& p = s.draw();
            double a = eval_point(f, p), b = eval_point(g, p);
            if (std::isfinite(a) && std::isfinite(b) && b != 0.0) ks.push_back(a / b);
        }
        if (ks.size() < 10) continue;
        std::nth_element(ks.begin(), ks.begin() + ks.size() / 2, ks.end());
        double k = ks[ks.size() / 2];
        if (!std::isfinite(k) || k == 0.0) return false;
        Term tk = cas.add({{tf, 1.0}, {tg, -k}}, 0.0);
        ExprDag scaled = f - ExprDag::constant(k) * g;
        return constant_both_ways(scaled, tk, scale, f, g, opts);
    }
    return false;
}

}  // namespace dimred
