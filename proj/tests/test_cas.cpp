#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dimred/cas.hpp"
#include "dimred/eval.hpp"
#include "random_expr.hpp"

using namespace dimred;
using dimred::testing::random_expr;

namespace {

ExprDag washburn() { return parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))"); }

std::vector<double> random_point(Rng& rng, int d, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(d);
    for (auto& v : p) v = u(rng);
    return p;
}

// IEEE infinities can turn an undefined subexpression into a finite result;
// semantic comparisons only use points where every subtree is finite.
bool finite_everywhere(const ExprDag& e, const std::vector<double>& p)
{
    for (NodeId id = 0; id < e.size(); ++id)
        if (!std::isfinite(eval_point(e.subtree(id), p))) return false;
    return true;
}

}  // namespace

TEST_CASE("simplify examples")
{
    CHECK(simplify(parse("(x1*1)+0")) == x(1));
    CHECK(simplify(parse("exp(log(x1))")) == x(1));
    CHECK(simplify(parse("log(exp(x1))")) == x(1));
    CHECK(simplify(parse("-(-x1)")) == x(1));
    CHECK(simplify(parse("inv(inv(x1))")) == x(1));
    CHECK(simplify(parse("x1/1")) == x(1));
    CHECK(simplify(parse("x1*x2 + x3")) == simplify(parse("x3 + x2*x1")));

    auto e = parse("x1*x2*inv(x2) + x3");
    auto s = simplify(e);
    CHECK(s == simplify(x(1) + x(3)));
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        auto p = random_point(rng, 3, -3, 3);
        CHECK(eval_point(e, p) == doctest::Approx(eval_point(s, p)).epsilon(1e-12));
    }
}

TEST_CASE("safe simplification keeps sign-sensitive forms")
{
    CHECK(simplify(parse("sqrt(x1*x1)")) == parse("sqrt(x1*x1)"));
    CHECK(simplify(parse("sqrt(x1*x1)"), SimplifyMode::Positive) == x(1));
    CHECK(simplify(parse("log(x1*x2)")) == parse("log(x1*x2)"));
    CHECK(simplify(parse("sqrt(x1)*sqrt(x1)")) == x(1));
}

TEST_CASE("simplify is idempotent and preserves semantics")
{
    Rng rng(2024);
    int compared = 0;
    for (int i = 0; i < 1000; ++i) {
        auto e = random_expr(rng, 3, 4);
        auto s = simplify(e);
        CAPTURE(e.str());
        CAPTURE(s.str());
        CHECK(simplify(s) == s);
        CHECK(parse(s.str()) == s);
        bool positive = i % 2 == 0;
        auto p = random_point(rng, 3, positive ? 0.1 : -3.0, positive ? 3.0 : -0.1);
        if (!finite_everywhere(e, p)) continue;
        double a = eval_point(e, p);
        double b = eval_point(s, p);
        ++compared;
        CHECK(std::abs(a - b) <= 1e-9 * (1 + std::abs(a)));
    }
    CHECK(compared > 300);
}

TEST_CASE("complexity")
{
    CHECK(complexity(washburn()) == 13);
    CHECK(complexity(x(1)) == 1);
    CHECK(complexity(x(1) * x(2) + x(3)) == 5);
    CHECK(complexity(parse("x1 + 0*x2")) == 1);
}

TEST_CASE("subexpressions")
{
    auto w = subexpressions(washburn());
    CHECK(w.count(simplify(x(3) * cos(x(4))).str()) == 1);
    CHECK(subexpressions(x(1)) == std::set<std::string>{"x1"});
    auto twice = subexpressions(x(1) + x(1));
    CHECK(twice.size() == 2);
    CHECK(twice.count("x1") == 1);
    CHECK(twice.count(simplify(x(1) + x(1)).str()) == 1);
}

TEST_CASE("solve_for examples")
{
    // y is variable index 1, x-hat-1 index 0, right-hand side c index 2
    auto y = x(2);
    auto solved = solve_for(y / sqrt(x(1)), x(3), 1);
    CHECK(equivalent(solved, x(3) * sqrt(x(1))));
    CHECK(simplify(solved) == simplify(x(3) * sqrt(x(1))));

    auto s2 = solve_for(y - x(3), x(4), 1);
    CHECK(simplify(s2) == simplify(x(4) + x(3)));

    CHECK_THROWS_AS(solve_for(sin(y) + y, x(3), 1), NotSolvable);
    CHECK_THROWS_AS(solve_for(sin(y), x(3), 1), NotSolvable);
    CHECK_THROWS_AS(solve_for(x(1), x(3), 1), NotSolvable);
}

TEST_CASE("solve_for round trip")
{
    // lhs built from invertible operators around a single occurrence of x1
    const char* lhs_cases[] = {"sqrt(x1)*x2",       "log(x1/x2) - x3", "exp(x2 - x1)",  "x2/(x1 + x3)",
                               "square(x1)*x2 + 1", "-inv(x1)",       "x3 - x2*x1",    "(x2 + x1)/x3"};
    Rng rng(5);
    for (const char* text : lhs_cases) {
        auto lhs = parse(text);
        auto rhs = x(4);
        auto sol = solve_for(lhs, rhs, 0);
        CAPTURE(text);
        CAPTURE(sol.str());
        CHECK_FALSE(sol.uses_var(0));
        for (int t = 0; t < 100; ++t) {
            auto p = random_point(rng, 4, 0.2, 2.0);
            // choose rhs so that the equation holds at p, then solve and re-check
            auto q = p;
            q[3] = eval_point(lhs, p);
            double x1 = eval_point(sol, q);
            auto r = q;
            r[0] = x1;
            double residual = eval_point(lhs, r) - q[3];
            CHECK(std::abs(residual) <= 1e-9 * (1 + std::abs(q[3])));
        }
    }
}

TEST_CASE("trig and square branches")
{
    const double pi = std::numbers::pi;
    CHECK(simplify(sin(asin(x(1)))) == x(1));
    CHECK(simplify(cos(acos(x(1)))) == x(1));
    CHECK(simplify(sin(c(pi) - x(1))) == simplify(sin(x(1))));
    CHECK(simplify(sin(x(1) + c(3 * pi))) == simplify(-sin(x(1))));
    CHECK(simplify(cos(x(1) - c(2 * pi))) == simplify(cos(x(1))));
    CHECK(simplify(cos(x(1) + c(pi))) == simplify(-cos(x(1))));
    CHECK(simplify(sin(x(1) + c(1.0))) == sin(x(1) + c(1.0)));

    const SolveOptions principal{.trig_branches = true};
    const SolveOptions other{.trig_branches = true, .alternate_branch = true};
    Rng rng(21);
    for (const char* text : {"sin(x1*x2)", "cos(x1 - x2)", "(x1 - x2)*(x1 - x2)", "square(x1 + x2)"}) {
        CAPTURE(text);
        ExprDag lhs = parse(text);
        ExprDag a = solve_for(lhs, x(3), 0, principal);
        ExprDag b = solve_for(lhs, x(3), 0, other);
        CHECK_FALSE(a == b);
        // both preimages satisfy the equation wherever they are defined
        for (int t = 0; t < 50; ++t) {
            auto p = random_point(rng, 3, 0.2, 1.2);
            p[2] = eval_point(lhs, p);
            for (const ExprDag& sol : {a, b}) {
                auto q = p;
                q[0] = eval_point(sol, p);
                CHECK(eval_point(lhs, q) == doctest::Approx(p[2]).epsilon(1e-9));
            }
        }
    }
    // a product of one shared node is a square, not two occurrences
    auto shared = parse("(x1 - x2)*(x1 - x2)");
    CHECK(shared.tree_occurrences(0) == 2);
    CHECK_NOTHROW(solve_for(shared, x(3), 0));
}

TEST_CASE("depends_on examples")
{
    // gamma occupies index 0
    auto f = (x(1) / x(2)) * x(2) + x(3);
    std::vector<int> drop{0 + 1};
    CHECK_FALSE(depends_on(f, 1));
    CHECK(depends_on(x(1) + x(3), 0));
    CHECK_FALSE(depends_on((x(1) * x(2) + x(3)) - x(3), 2));
    CHECK_FALSE(depends_on(x(1), 3));
    std::vector<int> set{0, 1};
    CHECK(depends_on_any(x(2) * x(3), set));
}

TEST_CASE("equivalent examples")
{
    CHECK(equivalent(x(1) * x(2) + x(3), x(3) + x(2) * x(1)));
    auto f = parse("sqrt(x1)*cos(x2) + x3");
    CHECK(equivalent(f, c(2) * f));
    CHECK_FALSE(equivalent(x(1) * x(2), x(1) + x(2)));
    CHECK(equivalent(f, f + c(7)));
    CHECK(equivalent(washburn(), parse("sqrt(0.5*x1*x2*x3*cos(x4)/x5)")));
    CHECK(equivalent(parse("3*x1*x2 + 2"), parse("2.9999999999*x1*x2 + 1.99999999")));
    CHECK_FALSE(equivalent(parse("3*x1*x2 + 2"), parse("3.1*x1*x2 + 2")));
}

TEST_CASE("equivalent is reflexive and symmetric")
{
    Rng rng(77);
    std::vector<ExprDag> corpus;
    while (corpus.size() < 50) {
        auto e = random_expr(rng, 2, 3);
        if (e.arity() > 0) corpus.push_back(e);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CAPTURE(corpus[i].str());
        CHECK(equivalent(corpus[i], corpus[i]));
        std::size_t j = (i * 7 + 3) % corpus.size();
        CHECK(equivalent(corpus[i], corpus[j]) == equivalent(corpus[j], corpus[i]));
    }
}
