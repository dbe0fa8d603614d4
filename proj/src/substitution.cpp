#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "dimred/cas.hpp"
#include "dimred/substitution.hpp"

namespace dimred {

namespace {

std::string fingerprint(const GrammarBudget& b, const CandidateLimits& lim, int arity, bool outinput)
{
    std::ostringstream os;
    os << (outinput ? 'o' : 'i') << arity << ':' << b.max_intermediary_nodes << ':' << b.allow_constants << ':'
       << lim.merge_sign_and_reciprocal << ':';
    for (auto op : b.unary_ops) os << name(op) << ',';
    os << ':';
    for (auto op : b.binary_ops) os << name(op) << ',';
    return os.str();
}

// Simplified text of e, -e and 1/e; the first is the canonical key.
struct Keys {
    std::string self, negated, reciprocal;
};

Keys keys_of(const ExprDag& e)
{
    return {simplify(e).str(), simplify(-e).str(), simplify(inv(e)).str()};
}

class TemplateFilter {
public:
    explicit TemplateFilter(bool merge) : merge_(merge) {}

    bool fresh(const ExprDag& e)
    {
        if (e.param_count() > 0) return structural_.insert(e.str()).second;
        Keys k = keys_of(e);
        if (seen_.count(k.self)) return false;
        if (merge_ && (seen_.count(k.negated) || seen_.count(k.reciprocal))) return false;
        seen_.insert(k.self);
        return true;
    }

private:
    bool merge_;
    std::set<std::string> seen_;
    std::set<std::string> structural_;
};

bool uses_all(const ExprDag& e, int count)
{
    ExprDag s = e.param_count() > 0 ? e : simplify(e);
    for (int v = 0; v < count; ++v)
        if (!s.uses_var(v)) return false;
    return true;
}

// phi(u) for an injective phi carries the same information as u, which is
// enumerated earlier with fewer operators.
bool injective_wrapper(const ExprDag& e, int count)
{
    const Node& r = e.root_node();
    if (r.kind != Node::Kind::Unary) return false;
    switch (r.unary()) {
    case UnaryOp::Sqrt:
    case UnaryOp::Log:
    case UnaryOp::Exp:
    case UnaryOp::Neg:
    case UnaryOp::Inv: return uses_all(e.child(0), count);
    default: return false;
    }
}

std::vector<ExprDag> input_templates(int arity, const GrammarBudget& b)
{
    std::vector<ExprDag> out;
    enumerate_dags(arity, b, [&](const ExprDag& g) {
        if (uses_all(g, arity) && !injective_wrapper(g, arity)) out.push_back(g);
        return true;
    });
    return out;
}

// y is variable `arity`; it must occur once and the template must be solvable for it.
std::vector<ExprDag> outinput_templates(int arity, const GrammarBudget& b)
{
    std::vector<ExprDag> out;
    enumerate_dags(arity + 1, b, [&](const ExprDag& h) {
        if (h.tree_occurrences(arity) != 1 || !uses_all(h, arity + 1) || injective_wrapper(h, arity + 1)) return true;
        try {
            solve_for(h, ExprDag::var(arity + 1), arity);
        } catch (const NotSolvable&) {
            return true;
        }
        out.push_back(h);
        return true;
    });
    return out;
}

const std::vector<ExprDag>& cached_templates(int arity, const GrammarBudget& b, const CandidateLimits& lim,
                                             bool outinput)
{
    static std::mutex mu;
    static std::map<std::string, std::vector<ExprDag>> cache;
    std::string key = fingerprint(b, lim, arity, outinput);
    std::lock_guard lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<ExprDag> raw = outinput ? outinput_templates(arity, b) : input_templates(arity, b);
    std::vector<ExprDag> kept;
    TemplateFilter filter(lim.merge_sign_and_reciprocal && !outinput);
    for (auto& t : raw)
        if (filter.fresh(t)) kept.push_back(t);
    return cache.emplace(key, std::move(kept)).first->second;
}

// Index sets of size k from {0..d-1} in lexicographic order.
std::vector<std::vector<int>> combinations(int d, int k)
{
    std::vector<std::vector<int>> out;
    std::vector<int> c(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = i;
    while (k <= d) {
        out.push_back(c);
        int i = k - 1;
        while (i >= 0 && c[static_cast<std::size_t>(i)] == d - k + i) --i;
        if (i < 0) break;
        ++c[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

std::vector<int> retained_columns(int d, const std::vector<int>& I)
{
    std::vector<int> keep;
    for (int j = 0; j < d; ++j)
        if (std::find(I.begin(), I.end(), j) == I.end()) keep.push_back(j);
    return keep;
}

enum class Dependence { No, Yes, Unsure };

Dependence dependence(const ExprDag& e, const std::vector<int>& vars)
{
    try {
        return depends_on_any(e, vars) ? Dependence::Yes : Dependence::No;
    } catch (const Inconclusive&) {
        return Dependence::Unsure;
    }
}

}  // namespace

std::string describe(const Substitution& s)
{
    if (std::holds_alternative<InputSub>(s)) return instantiate(s, 0).str();
    const auto& out = std::get<OutInputSub>(s);
    int y = *std::max_element(out.I.begin(), out.I.end()) + 1;
    return instantiate(s, y).str(y);
}

std::vector<InputSub> gen_input_candidates(int d, const GrammarBudget& budget, const CandidateLimits& lim)
{
    std::vector<InputSub> out;
    int largest = std::min(d, budget.max_intermediary_nodes + 2);
    for (int m = 2; m <= largest; ++m) {
        const auto& templates = cached_templates(m, budget, lim, false);
        for (auto& I : combinations(d, m)) {
            for (auto& g : templates) {
                if (out.size() >= lim.cap) return out;
                out.push_back({g, I});
            }
        }
    }
    return out;
}

std::vector<OutInputSub> gen_outinput_candidates(int d, const GrammarBudget& budget, const CandidateLimits& lim)
{
    std::vector<OutInputSub> out;
    int largest = std::min(d - 1, budget.max_intermediary_nodes >= 2 ? 2 : 1);
    for (int m = 1; m <= largest; ++m) {
        const auto& templates = cached_templates(m, budget, lim, true);
        for (auto& I : combinations(d, m)) {
            for (auto& h : templates) {
                if (out.size() >= lim.cap) return out;
                out.push_back({h, I});
            }
        }
    }
    return out;
}

std::optional<ExprDag> transfer_input(const ExprDag& f, int d, const InputSub& s)
{
    ExprDag g = instantiate(s, d);
    ExprDag gamma = ExprDag::var(d);
    bool solvable = false;
    auto reduce_with = [&](int i, const ExprDag& xi) {
        std::vector<ExprDag> rep;
        for (int k = 0; k <= d; ++k) rep.push_back(ExprDag::var(k));
        rep[static_cast<std::size_t>(i)] = xi;
        return simplify(f.substitute(rep), SimplifyMode::Positive);
    };
    for (int i : s.I) {
        ExprDag xi, xi_alt;
        try {
            xi = solve_for(g, gamma, i, {.trig_branches = true});
            xi_alt = solve_for(g, gamma, i, {.trig_branches = true, .alternate_branch = true});
        } catch (const NotSolvable&) {
            continue;
        }
        solvable = true;
        ExprDag reduced = reduce_with(i, xi);
        // solving for another variable may avoid a branch or a form the simplifier cannot reduce
        if (dependence(reduced, s.I) != Dependence::No) continue;
        // sin and cos are not injective: both preimage branches must give the same function
        if (!(xi_alt == xi) && !identical(reduce_with(i, xi_alt), reduced)) continue;
        std::vector<int> map(static_cast<std::size_t>(d) + 1, 0);
        auto kept = retained_columns(d, s.I);
        for (std::size_t k = 0; k < kept.size(); ++k) map[static_cast<std::size_t>(kept[k])] = static_cast<int>(k) + 1;
        return simplify(reduced.remap_vars(map), SimplifyMode::Positive);
    }
    if (!solvable) throw Unverifiable("no variable of " + describe(s) + " can be solved for");
    return std::nullopt;
}

std::optional<ExprDag> transfer_outinput(const ExprDag& f, int d, const OutInputSub& s)
{
    ExprDag h = instantiate(s, d);
    std::vector<ExprDag> rep;
    for (int k = 0; k < d; ++k) rep.push_back(ExprDag::var(k));
    rep.push_back(f);
    ExprDag reduced = simplify(h.substitute(rep), SimplifyMode::Positive);
    if (dependence(reduced, s.I) != Dependence::No) return std::nullopt;
    std::vector<int> map(static_cast<std::size_t>(d), 0);
    auto kept = retained_columns(d, s.I);
    for (std::size_t k = 0; k < kept.size(); ++k) map[static_cast<std::size_t>(kept[k])] = static_cast<int>(k);
    return simplify(reduced.remap_vars(map), SimplifyMode::Positive);
}

std::optional<ExprDag> transfer(const ExprDag& f, int d, const Substitution& s)
{
    if (auto* in = std::get_if<InputSub>(&s)) return transfer_input(f, d, *in);
    return transfer_outinput(f, d, std::get<OutInputSub>(s));
}

bool verify_input_sub(const ExprDag& f_true, int d, const InputSub& s)
{
    return transfer_input(f_true, d, s).has_value();
}

bool verify_outinput_sub(const ExprDag& f_true, int d, const OutInputSub& s)
{
    return transfer_outinput(f_true, d, s).has_value();
}

}  // namespace dimred
