#include "dimred/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "dimred/cas.hpp"
#include "dimred/eval.hpp"

namespace dimred {

namespace {

constexpr double kNelderMeadIterations = 200;
constexpr Index kScreenRows = 200;
constexpr std::size_t kRefineTop = 10;
constexpr std::size_t kRefineMax = 200;
constexpr double kTie = 1e-9;

double rms(const Vector& y) { return std::sqrt(y.squaredNorm() / static_cast<double>(y.size())); }

Matrix take_rows(const Matrix& X, const std::vector<Index>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = X.row(rows[k]);
    return out;
}

Vector take(const Vector& y, const std::vector<Index>& rows)
{
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Index>(k)) = y(rows[k]);
    return out;
}

ExprDag monomial_expr(const std::vector<int>& powers)
{
    std::optional<ExprDag> m;
    for (std::size_t v = 0; v < powers.size(); ++v)
        for (int k = 0; k < powers[v]; ++k) m = m ? *m * ExprDag::var(static_cast<int>(v)) : ExprDag::var(static_cast<int>(v));
    return m ? *m : c(1.0);
}

// Residuals of a parametrized skeleton; non-finite predictions get a fixed penalty.
struct Residual : Eigen::DenseFunctor<double> {
    const ExprDag* dag;
    const Matrix* X;
    const Vector* y;
    double penalty;

    Residual(const ExprDag& d, const Matrix& x, const Vector& t, double pen)
        : Eigen::DenseFunctor<double>(d.param_count(), static_cast<int>(t.size())), dag(&d), X(&x), y(&t), penalty(pen)
    {}

    int operator()(const InputType& p, ValueType& r) const
    {
        std::vector<double> params(p.data(), p.data() + p.size());
        Vector yhat = eval(*dag, *X, params);
        r = yhat - *y;
        for (Index i = 0; i < r.size(); ++i)
            if (!std::isfinite(r(i))) r(i) = penalty;
        return 0;
    }

    double sse(const Vector& p) const
    {
        ValueType r(values());
        (*this)(p, r);
        double s = r.squaredNorm();
        return std::isfinite(s) ? s : std::numeric_limits<double>::max();
    }
};

double nm_objective(const gsl_vector* v, void* data)
{
    const auto* f = static_cast<const Residual*>(data);
    Vector p(static_cast<Index>(v->size));
    for (std::size_t i = 0; i < v->size; ++i) p(static_cast<Index>(i)) = gsl_vector_get(v, i);
    return f->sse(p);
}

Vector nelder_mead(const Residual& f, Vector start)
{
    static const auto previous = gsl_set_error_handler_off();
    (void)previous;
    const auto p = static_cast<std::size_t>(start.size());
    gsl_multimin_function fn{&nm_objective, p, const_cast<Residual*>(&f)};
    gsl_vector* x = gsl_vector_alloc(p);
    gsl_vector* step = gsl_vector_alloc(p);
    for (std::size_t i = 0; i < p; ++i) {
        gsl_vector_set(x, i, start(static_cast<Index>(i)));
        gsl_vector_set(step, i, 0.5 * std::max(1.0, std::abs(start(static_cast<Index>(i)))));
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, p);
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    for (int it = 0; it < kNelderMeadIterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(s)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-12) == GSL_SUCCESS) break;
    }
    Vector best(start.size());
    for (std::size_t i = 0; i < p; ++i) best(static_cast<Index>(i)) = gsl_vector_get(s->x, i);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return best;
}

// Levenberg-Marquardt from `start`, then a simplex refinement; keeps whichever is best.
Vector fit_constants(const ExprDag& skeleton, const Matrix& X, const Vector& y, double penalty, Vector start)
{
    Residual f(skeleton, X, y, penalty);
    Vector best = start;
    double best_sse = f.sse(start);
    if (!std::isfinite(best_sse)) best_sse = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vector& p) {
        if (!p.allFinite()) return;
        double s = f.sse(p);
        if (std::isfinite(s) && s < best_sse) {
            best_sse = s;
            best = p;
        }
    };
    if (y.size() >= start.size()) {
        Eigen::NumericalDiff<Residual> diff(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Residual>> lm(diff);
        lm.setMaxfev(50 * (static_cast<Index>(start.size()) + 1));
        Vector p = start;
        lm.minimize(p);
        consider(p);
    }
    consider(nelder_mead(f, best));
    return best;
}

struct Fitted {
    std::size_t index = 0;
    Vector params;
    double nrmse = std::numeric_limits<double>::infinity();
};

double nrmse_of(const ExprDag& dag, const Matrix& X, const Vector& y, const Vector& params)
{
    std::vector<double> p(params.data(), params.data() + params.size());
    return nrmse(y, eval(dag, X, p));
}

std::vector<Index> screen_rows(Index n)
{
    std::vector<Index> rows;
    if (n <= kScreenRows) {
        rows.resize(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), Index{0});
        return rows;
    }
    // evenly spaced, so the subset is deterministic without a seed
    for (Index k = 0; k < kScreenRows; ++k) rows.push_back(k * n / kScreenRows);
    return rows;
}

Vector mean_column(Index n, double v) { return Vector::Constant(n, v); }

}  // namespace

GrammarBudget RegressorSpec::default_dag_budget()
{
    GrammarBudget b = GrammarBudget::standard(2);
    b.allow_constants = true;
    return b;
}

RegressorSpec RegressorSpec::parse(const std::string& text)
{
    RegressorSpec spec;
    if (text == "poly") {
        spec.kind = Kind::Poly;
    } else if (text == "dagsearch") {
        spec.kind = Kind::DagSearch;
    } else if (text.rfind("external:", 0) == 0 && text.size() > 9) {
        spec.kind = Kind::External;
        spec.command = text.substr(9);
    } else {
        throw std::invalid_argument("unknown regressor '" + text + "' (expected poly, dagsearch or external:<cmd>)");
    }
    return spec;
}

std::string RegressorSpec::name() const
{
    switch (kind) {
    case Kind::Poly: return "poly";
    case Kind::DagSearch: return "dagsearch";
    case Kind::External: return "external:" + command;
    }
    return "?";
}

std::vector<std::vector<int>> monomials(int d, int max_degree)
{
    std::vector<std::vector<int>> out;
    std::vector<int> powers(static_cast<std::size_t>(d), 0);
    // exponent vectors of total degree `left` over variables v.. in descending lexicographic order
    auto rec = [&](auto& self, int v, int left) -> void {
        if (v == d - 1) {
            powers[static_cast<std::size_t>(v)] = left;
            out.push_back(powers);
            return;
        }
        for (int k = left; k >= 0; --k) {
            powers[static_cast<std::size_t>(v)] = k;
            self(self, v + 1, left - k);
        }
        powers[static_cast<std::size_t>(v)] = 0;
    };
    out.push_back(powers);
    for (int deg = 1; deg <= max_degree && d > 0; ++deg) rec(rec, 0, deg);
    return out;
}

PolyFit fit_poly_detailed(const Matrix& X, const Vector& y, int max_degree)
{
    if (max_degree < 1) throw std::invalid_argument("polynomial degree must be at least 1");
    auto monos = monomials(static_cast<int>(X.cols()), max_degree);
    const auto m = static_cast<Index>(monos.size());
    if (X.rows() <= m) throw std::invalid_argument("polynomial fit needs more rows than monomials");

    Matrix A(X.rows(), m);
    for (Index j = 0; j < m; ++j) {
        Vector col = Vector::Ones(X.rows());
        const auto& pw = monos[static_cast<std::size_t>(j)];
        for (std::size_t v = 0; v < pw.size(); ++v)
            for (int k = 0; k < pw[v]; ++k) col.array() *= X.col(static_cast<Index>(v)).array();
        A.col(j) = col;
    }

    PolyFit fit;
    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Vector coef;
    if (s(0) == 0.0 || s(s.size() - 1) / s(0) < 1e-12) {
        fit.ill_conditioned = true;
        Matrix N = A.transpose() * A;
        N.diagonal().array() += 1e-10;
        coef = N.ldlt().solve(A.transpose() * y);
    } else {
        coef = svd.solve(y);
    }

    double largest = coef.cwiseAbs().maxCoeff();
    std::optional<ExprDag> expr;
    fit.coef.assign(coef.data(), coef.data() + coef.size());
    for (Index j = 0; j < m; ++j) {
        double cj = coef(j);
        if (std::abs(cj) < 1e-8 * largest || cj == 0.0) {
            fit.coef[static_cast<std::size_t>(j)] = 0.0;
            continue;
        }
        ExprDag term = j == 0 ? c(cj) : c(cj) * monomial_expr(monos[static_cast<std::size_t>(j)]);
        expr = expr ? *expr + term : term;
    }
    fit.expr = expr ? *expr : c(0.0);
    return fit;
}

ExprDag fit_poly(const Matrix& X, const Vector& y, int max_degree) { return fit_poly_detailed(X, y, max_degree).expr; }

ExprDag fit_dagsearch(const Matrix& X, const Vector& y, const GrammarBudget& budget, std::size_t max_skeletons,
                      DagSearchStats* stats, Exec exec)
{
    if (X.rows() < 20) throw std::invalid_argument("dagsearch needs at least 20 rows");
    if (max_skeletons < 1 || budget.max_intermediary_nodes < 0)
        throw std::invalid_argument("dagsearch budgets must be positive");

    std::vector<ExprDag> skeletons = enumerate_dags(static_cast<int>(X.cols()), budget, max_skeletons);
    const double penalty = kNonFinitePenalty * rms(y);

    auto rows = screen_rows(X.rows());
    Matrix Xs = take_rows(X, rows);
    Vector ys = take(y, rows);

    std::vector<Fitted> screened(skeletons.size());
    const auto count = static_cast<std::ptrdiff_t>(skeletons.size());
#pragma omp parallel for schedule(dynamic, 16) if (exec == Exec::Parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const ExprDag& sk = skeletons[static_cast<std::size_t>(i)];
        Fitted& f = screened[static_cast<std::size_t>(i)];
        f.index = static_cast<std::size_t>(i);
        f.params = Vector::Ones(sk.param_count());
        try {
            if (sk.param_count() > 0) f.params = fit_constants(sk, Xs, ys, penalty, f.params);
            f.nrmse = nrmse_of(sk, Xs, ys, f.params);
        } catch (const std::exception&) {
            f.nrmse = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(f.nrmse)) f.nrmse = std::numeric_limits<double>::infinity();
    }

    std::vector<Fitted> order = screened;
    std::stable_sort(order.begin(), order.end(), [](const Fitted& a, const Fitted& b) { return a.nrmse < b.nrmse; });
    // everything tied with the screening winner goes on, so the complexity tie-break sees it
    std::size_t top = std::min(kRefineTop, order.size());
    while (top < std::min(order.size(), kRefineMax) && order[top].nrmse <= order[0].nrmse + kTie) ++top;
    order.resize(top);

    double mean = y.mean();
    ExprDag best = c(mean);
    double best_err = nrmse(y, mean_column(y.size(), mean));
    std::size_t best_cx = 1;
    for (auto& f : order) {
        if (!std::isfinite(f.nrmse)) continue;
        const ExprDag& sk = skeletons[f.index];
        Vector p = f.params;
        if (sk.param_count() > 0) p = fit_constants(sk, X, y, penalty, p);
        double err = nrmse_of(sk, X, y, p);
        if (!std::isfinite(err) || err > best_err + kTie) continue;
        std::vector<double> pv(p.data(), p.data() + p.size());
        ExprDag bound = sk.bind_params(pv);
        std::size_t cx = complexity(bound);
        if (err < best_err - kTie || cx < best_cx) {
            best = bound;
            best_err = err;
            best_cx = cx;
        }
    }
    if (stats) {
        stats->skeletons = skeletons.size();
        stats->best_nrmse = best_err;
    }
    return best;
}

ExprDag fit(const Matrix& X, const Vector& y, const RegressorSpec& spec)
{
    switch (spec.kind) {
    case RegressorSpec::Kind::Poly: return fit_poly(X, y, spec.max_degree);
    case RegressorSpec::Kind::DagSearch: return fit_dagsearch(X, y, spec.dag_budget, spec.max_skeletons);
    case RegressorSpec::Kind::External: return fit_external(X, y, spec);
    }
    throw std::logic_error("unknown regressor kind");
}

double nrmse(const Vector& y, const Vector& yhat)
{
    if (y.size() != yhat.size()) throw std::invalid_argument("nrmse: size mismatch");
    double denom = y.squaredNorm();
    if (denom == 0.0) throw DegenerateY();
    double cap = kNonFinitePenalty * kNonFinitePenalty * denom / static_cast<double>(y.size());
    double num = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        double e = y(i) - yhat(i);
        num += std::isfinite(e) ? e * e : cap;
    }
    return std::sqrt(num / denom);
}

std::vector<bool> holdout_mask(Index n, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in (0, 1)");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(derive_seed(seed, 0x401d));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    test = std::clamp<std::size_t>(test, 1, static_cast<std::size_t>(std::max<Index>(n - 1, 1)));
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    for (std::size_t k = 0; k < test; ++k) mask[static_cast<std::size_t>(idx[k])] = true;
    return mask;
}

namespace {

struct Holdout {
    Matrix X;
    Vector y;
};

Holdout test_rows(const Observations& obs, const std::vector<bool>& mask)
{
    std::vector<Index> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(static_cast<Index>(i));
    return {take_rows(obs.X, rows), take(obs.y, rows)};
}

// Fit at one node on its training rows and map back; empty when not solvable.
std::optional<ExprDag> fit_node(const SearchNode& node, const RegressorSpec& spec, const std::vector<bool>& mask)
{
    const Dataset& ds = node.dataset;
    std::vector<Index> train;
    for (Index k = 0; k < ds.size(); ++k)
        if (!mask[static_cast<std::size_t>(ds.rows[static_cast<std::size_t>(k)])]) train.push_back(k);
    Matrix X = take_rows(ds.X, train);
    Vector y = take(ds.y, train);
    ExprDag solution = fit(X, y, spec);
    try {
        return simplify(reconstruct(node, solution));
    } catch (const NotSolvable&) {
        return std::nullopt;
    }
}

SolveResult solve_nodes(const std::vector<NodePtr>& path, const RegressorSpec& spec, double fraction,
                        std::uint64_t seed)
{
    const Observations& obs = *path.front()->dataset.origin;
    auto mask = holdout_mask(obs.X.rows(), fraction, seed);
    Holdout test = test_rows(obs, mask);

    SolveResult best;
    best.nrmse_test = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& node : path) {
        std::optional<ExprDag> expr;
        try {
            expr = fit_node(*node, spec, mask);
        } catch (const std::invalid_argument&) {
            // too few training rows for this regressor at this node
        }
        if (!expr) {
            best.node_nrmse.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        double err = nrmse(test.y, eval(*expr, test.X));
        best.node_nrmse.push_back(err);
        if (!found || err < best.nrmse_test) {
            found = true;
            best.expr = *expr;
            best.nrmse_test = err;
            best.source_node_depth = node->depth;
        }
    }
    if (!found) throw NotSolvable("no node on the path produced a usable fit");
    best.complexity = complexity(best.expr);
    return best;
}

}  // namespace

SolveResult solve_pipeline(const SearchResult& result, const RegressorSpec& spec, double holdout_fraction,
                           std::uint64_t seed)
{
    return solve_nodes(result.best_path, spec, holdout_fraction, seed);
}

SolveResult solve_root(const Dataset& root, const RegressorSpec& spec, double holdout_fraction, std::uint64_t seed)
{
    auto node = std::make_shared<SearchNode>();
    node->dataset = root;
    return solve_nodes({node}, spec, holdout_fraction, seed);
}

}  // namespace dimred
