#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dimred/eval.hpp"
#include "dimred/substitution.hpp"

namespace dimred {

namespace {

Matrix select_rows(const Matrix& X, const std::vector<Index>& keep)
{
    Matrix out(static_cast<Index>(keep.size()), X.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Index>(r)) = X.row(keep[r]);
    return out;
}

Vector select_rows(const Vector& v, const std::vector<Index>& keep)
{
    Vector out(static_cast<Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) out(static_cast<Index>(r)) = v(keep[r]);
    return out;
}

// Rows of `v` that are finite; throws when too many are lost.
std::vector<Index> finite_rows(const Vector& v, double max_drop, double& dropped)
{
    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i)
        if (std::isfinite(v(i))) keep.push_back(i);
    dropped = v.size() == 0 ? 0.0 : 1.0 - static_cast<double>(keep.size()) / static_cast<double>(v.size());
    if (dropped > max_drop || keep.size() < 2)
        throw TooFewRows("substitution leaves " + std::to_string(keep.size()) + " of " + std::to_string(v.size()) +
                         " rows");
    return keep;
}

bool near_constant(const Vector& v)
{
    double mean = v.mean();
    double sd = std::sqrt((v.array() - mean).square().mean());
    return !(sd > 1e-10 * std::abs(mean)) || sd == 0.0;
}

std::vector<int> retained_columns(Index d, const std::vector<int>& I)
{
    std::vector<int> keep;
    for (int j = 0; j < d; ++j)
        if (std::find(I.begin(), I.end(), j) == I.end()) keep.push_back(j);
    return keep;
}

void check_index_set(const Dataset& ds, const std::vector<int>& I)
{
    for (std::size_t a = 0; a < I.size(); ++a) {
        if (I[a] < 0 || I[a] >= ds.dim()) throw std::invalid_argument("substitution index out of range");
        for (std::size_t b = 0; b < a; ++b)
            if (I[a] == I[b]) throw std::invalid_argument("repeated substitution index");
    }
}

Matrix with_output(const Matrix& X, const Vector& y)
{
    Matrix M(X.rows(), X.cols() + 1);
    M.leftCols(X.cols()) = X;
    M.col(X.cols()) = y;
    return M;
}

double relative_gap(const Vector& a, const Vector& b)
{
    double worst = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        if (a(i) == b(i)) continue;
        double scale = std::max(std::abs(a(i)), std::abs(b(i)));
        double gap = std::abs(a(i) - b(i)) / scale;
        if (!(gap <= worst)) worst = std::isnan(gap) ? INFINITY : gap;
    }
    return worst;
}

}  // namespace

Dataset Dataset::from_samples(Matrix X, Vector y)
{
    if (X.rows() != y.size()) throw std::invalid_argument("X and y have different numbers of rows");
    if (X.cols() < 1) throw std::invalid_argument("dataset needs at least one input column");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
    Dataset ds;
    auto obs = std::make_shared<Observations>();
    obs->X = X;
    obs->y = y;
    ds.X = std::move(X);
    ds.y = std::move(y);
    ds.origin = std::move(obs);
    int d = static_cast<int>(ds.X.cols());
    for (int j = 0; j < d; ++j) ds.var_map.push_back(ExprDag::var(j));
    ds.y_map = ExprDag::var(d);
    ds.rows.resize(static_cast<std::size_t>(ds.X.rows()));
    for (std::size_t i = 0; i < ds.rows.size(); ++i) ds.rows[i] = static_cast<Index>(i);
    return ds;
}

double composition_error(const Dataset& ds)
{
    Matrix raw = select_rows(ds.origin->X, ds.rows);
    double worst = 0.0;
    for (Index j = 0; j < ds.dim(); ++j)
        worst = std::max(worst, relative_gap(eval(ds.var_map[static_cast<std::size_t>(j)], raw), ds.X.col(j)));
    Matrix raw_xy = with_output(raw, select_rows(ds.origin->y, ds.rows));
    worst = std::max(worst, relative_gap(eval(ds.y_map, raw_xy), ds.y));
    return worst;
}

ExprDag instantiate(const Substitution& s, int d)
{
    if (auto* in = std::get_if<InputSub>(&s)) return in->g.remap_vars(in->I);
    const auto& out = std::get<OutInputSub>(s);
    std::vector<int> map = out.I;
    map.push_back(d);
    return out.h.remap_vars(map);
}

Dataset apply_input(const Dataset& ds, const InputSub& s, double max_drop)
{
    check_index_set(ds, s.I);
    if (s.I.size() < 2) throw std::invalid_argument("input substitution needs at least two columns");
    ExprDag g = instantiate(s, static_cast<int>(ds.dim()));
    Vector gv = eval(g, ds.X);

    Dataset out;
    std::vector<Index> keep = finite_rows(gv, max_drop, out.dropped_fraction);
    Vector col = select_rows(gv, keep);
    if (near_constant(col)) throw RejectedCandidate("substituted column is constant");

    std::vector<int> retained = retained_columns(ds.dim(), s.I);
    out.X.resize(static_cast<Index>(keep.size()), static_cast<Index>(retained.size()) + 1);
    out.X.col(0) = col;
    out.var_map.push_back(g.substitute(ds.var_map));
    for (std::size_t k = 0; k < retained.size(); ++k) {
        int j = retained[k];
        for (std::size_t r = 0; r < keep.size(); ++r)
            out.X(static_cast<Index>(r), static_cast<Index>(k) + 1) = ds.X(keep[r], j);
        out.var_map.push_back(ds.var_map[static_cast<std::size_t>(j)]);
    }
    out.y = select_rows(ds.y, keep);
    out.y_map = ds.y_map;
    out.origin = ds.origin;
    for (Index r : keep) out.rows.push_back(ds.rows[static_cast<std::size_t>(r)]);
    return out;
}

Dataset apply_outinput(const Dataset& ds, const OutInputSub& s, double max_drop)
{
    check_index_set(ds, s.I);
    if (s.I.empty() || static_cast<Index>(s.I.size()) >= ds.dim())
        throw std::invalid_argument("out-input substitution must leave at least one column");
    int d = static_cast<int>(ds.dim());
    ExprDag h = instantiate(s, d);
    Matrix xy = with_output(ds.X, ds.y);
    Vector hv = eval(h, xy);

    Dataset out;
    std::vector<Index> keep = finite_rows(hv, max_drop, out.dropped_fraction);

    // Inverting a square picks the non-negative root, so the data must stay on it.
    auto nodes = h.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.kind != Node::Kind::Unary || n.unary() != UnaryOp::Square) continue;
        ExprDag arg = h.subtree(n.a);
        if (!arg.uses_var(d)) continue;
        Vector av = eval(arg, xy);
        for (Index r : keep)
            if (av(r) < 0) throw RejectedCandidate("squared output argument changes sign");
    }

    out.y = select_rows(hv, keep);
    if (near_constant(out.y)) throw DegenerateY();

    std::vector<int> retained = retained_columns(d, s.I);
    out.X.resize(static_cast<Index>(keep.size()), static_cast<Index>(retained.size()));
    for (std::size_t k = 0; k < retained.size(); ++k) {
        int j = retained[k];
        for (std::size_t r = 0; r < keep.size(); ++r)
            out.X(static_cast<Index>(r), static_cast<Index>(k)) = ds.X(keep[r], j);
        out.var_map.push_back(ds.var_map[static_cast<std::size_t>(j)]);
    }
    std::vector<ExprDag> rep = ds.var_map;
    rep.push_back(ds.y_map);
    out.y_map = h.substitute(rep);
    out.origin = ds.origin;
    for (Index r : keep) out.rows.push_back(ds.rows[static_cast<std::size_t>(r)]);
    return out;
}

Dataset apply_substitution(const Dataset& ds, const Substitution& s, double max_drop)
{
    if (auto* in = std::get_if<InputSub>(&s)) return apply_input(ds, *in, max_drop);
    return apply_outinput(ds, std::get<OutInputSub>(s), max_drop);
}

}  // namespace dimred
