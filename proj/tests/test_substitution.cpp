#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "dimred/cas.hpp"
#include "dimred/depmeasure.hpp"
#include "dimred/eval.hpp"
#include "dimred/substitution.hpp"

using namespace dimred;

namespace {

ExprDag yexpr(const char* text, int y_index) { return parse(text, {.y_index = y_index}); }

Matrix uniform(Rng& rng, Index n, Index d, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix X(n, d);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

ExprDag washburn() { return parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))"); }

Dataset washburn_data(Index n = 500)
{
    Rng rng(11);
    Matrix X = uniform(rng, n, 5, 1, 3);
    std::uniform_real_distribution<double> angle(0, 1.2);
    for (Index i = 0; i < n; ++i) X(i, 3) = angle(rng);
    return Dataset::from_samples(X, eval(washburn(), X));
}

std::set<std::string> texts(const std::vector<InputSub>& cands)
{
    std::set<std::string> out;
    for (auto& s : cands) out.insert(describe(Substitution{s}));
    return out;
}

long choose2(long d) { return d * (d - 1) / 2; }

}  // namespace

TEST_CASE("input candidates: AIFeynman grammar")
{
    auto two = gen_input_candidates(2, GrammarBudget::aifeynman());
    CHECK(texts(two) == std::set<std::string>{"x1 + x2", "x1 - x2", "x1*x2", "x1/x2"});
    for (int d = 2; d <= 7; ++d) {
        auto c = gen_input_candidates(d, GrammarBudget::aifeynman());
        CHECK(static_cast<long>(c.size()) == 4 * choose2(d));
        CHECK(texts(c).size() == c.size());
    }
}

TEST_CASE("input candidates: standard grammar")
{
    auto cands = gen_input_candidates(5, GrammarBudget::standard(1));
    bool triple = false;
    for (auto& s : cands) {
        CHECK(s.I.size() >= 2);
        CHECK(s.g.arity() == static_cast<int>(s.I.size()));
        ExprDag g = simplify(s.g);
        for (int v = 0; v < static_cast<int>(s.I.size()); ++v) CHECK(g.uses_var(v));
        if (s.I == std::vector<int>{0, 1, 2} && simplify(s.g) == simplify(parse("x1*x2*x3"))) triple = true;
    }
    CHECK(triple);
    for (auto& s : gen_input_candidates(2, GrammarBudget::standard(1))) CHECK(s.g != parse("x1 + x1"));
    CHECK(gen_input_candidates(2, GrammarBudget::standard(0)).size() < gen_input_candidates(2, GrammarBudget::standard(1)).size());
}

TEST_CASE("candidate cap truncates in enumeration order")
{
    auto all = gen_input_candidates(6, GrammarBudget::standard(1));
    REQUIRE(all.size() > 100);
    auto some = gen_input_candidates(6, GrammarBudget::standard(1), {.cap = 100});
    REQUIRE(some.size() == 100);
    for (std::size_t i = 0; i < some.size(); ++i) {
        CHECK(some[i].g == all[i].g);
        CHECK(some[i].I == all[i].I);
    }
}

TEST_CASE("out-input candidates")
{
    auto cands = gen_outinput_candidates(3, GrammarBudget::standard(1));
    bool ratio = false, root = false;
    for (auto& s : cands) {
        int m = static_cast<int>(s.I.size());
        CHECK(m == 1);
        CHECK(s.h.tree_occurrences(m) == 1);
        CHECK_NOTHROW(solve_for(s.h, ExprDag::var(m + 1), m));
        ExprDag h = simplify(s.h);
        for (int v = 0; v <= m; ++v) CHECK(h.uses_var(v));
        if (s.I[0] == 0 && s.h == yexpr("y/x1", 1)) ratio = true;
        if (s.I[0] == 0 && s.h == yexpr("y/sqrt(x1)", 1)) root = true;
    }
    CHECK(ratio);
    CHECK(root);
    for (auto& s : gen_outinput_candidates(4, GrammarBudget::standard(2), {.cap = 200000}))
        CHECK(s.I.size() <= 2);
    CHECK(gen_outinput_candidates(1, GrammarBudget::standard(1)).empty());
}

TEST_CASE("apply_input")
{
    Dataset ds = washburn_data();
    Dataset step = apply_input(ds, {parse("x1*x2*x3"), {0, 1, 2}});
    CHECK(step.dim() == 3);
    CHECK(step.var_map[0].str() == "x1*x2*x3");
    CHECK(step.var_map[1] == x(4));
    CHECK(step.var_map[2] == x(5));
    CHECK(step.dropped_fraction == 0.0);
    CHECK(composition_error(step) <= 1e-9);

    Matrix X(10, 2);
    Vector y(10);
    for (Index i = 0; i < 10; ++i) {
        X(i, 0) = 1.0 + static_cast<double>(i);
        X(i, 1) = i == 3 ? 0.0 : 0.5 * static_cast<double>(i) + 1;
        y(i) = static_cast<double>(i);
    }
    Dataset small = Dataset::from_samples(X, y);
    Dataset ratio = apply_input(small, {parse("x1/x2"), {0, 1}});
    CHECK(ratio.size() == 9);
    CHECK(ratio.dropped_fraction == doctest::Approx(0.1));
    CHECK(std::find(ratio.rows.begin(), ratio.rows.end(), 3) == ratio.rows.end());
    CHECK(composition_error(ratio) <= 1e-9);

    X(0, 1) = X(1, 1) = 0;
    Dataset lossy = Dataset::from_samples(X, y);
    CHECK_THROWS_AS(apply_input(lossy, {parse("x1/x2"), {0, 1}}), TooFewRows);

    Matrix C(20, 2);
    for (Index i = 0; i < 20; ++i) C(i, 0) = C(i, 1) = 1.0 + static_cast<double>(i);
    Dataset same = Dataset::from_samples(C, C.col(0));
    CHECK_THROWS_AS(apply_input(same, {parse("x1 - x2"), {0, 1}}), RejectedCandidate);
}

TEST_CASE("apply_outinput along the Washburn path")
{
    Dataset ds = washburn_data();
    Dataset s2 = apply_input(ds, {parse("x1*x2*x3"), {0, 1, 2}});
    Dataset s3 = apply_outinput(s2, {yexpr("y/sqrt(x1)", 1), {0}});
    CHECK(s3.dim() == 2);
    CHECK(s3.var_map[0] == x(4));
    CHECK(s3.var_map[1] == x(5));
    CHECK(composition_error(s3) <= 1e-9);
    Dataset s4 = apply_outinput(s3, {yexpr("y*sqrt(x1)", 1), {1}});
    CHECK(s4.dim() == 1);
    CHECK(s4.var_map[0] == x(4));
    CHECK(composition_error(s4) <= 1e-9);

    // y_map equals y*sqrt(x5/(x1*x2*x3)) over the originals
    Matrix raw(ds.size(), 6);
    raw.leftCols(5) = ds.X;
    raw.col(5) = ds.y;
    Vector want = eval(yexpr("y*sqrt(x5/(x1*x2*x3))", 5), raw);
    Vector got = eval(s4.y_map, raw);
    for (Index i = 0; i < raw.rows(); ++i) CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-12));
    // the output is now cos(x4)/2 under a square root
    Vector direct = eval(parse("sqrt(cos(x1)/2)"), s4.X);
    for (Index i = 0; i < s4.size(); ++i) CHECK(s4.y(i) == doctest::Approx(direct(i)).epsilon(1e-12));

    Rng rng(5);
    Matrix X = uniform(rng, 50, 2, 0, 1);
    Dataset shifted = Dataset::from_samples(X, X.col(0).array() + 2.0);
    CHECK_THROWS_AS(apply_outinput(shifted, {yexpr("y - x1", 1), {0}}), DegenerateY);
    CHECK_THROWS_AS(apply_outinput(shifted, {yexpr("y - x1", 1), {0, 1}}), std::invalid_argument);
}

TEST_CASE("squared output must stay on the non-negative branch")
{
    Rng rng(8);
    Matrix X = uniform(rng, 100, 2, 1, 2);
    Vector y = X.col(1).array() - 1.5;
    Dataset ds = Dataset::from_samples(X, y);
    CHECK_THROWS_AS(apply_outinput(ds, {yexpr("square(y)*x1", 1), {0}}), RejectedCandidate);
    Dataset pos = Dataset::from_samples(X, X.col(1));
    CHECK_NOTHROW(apply_outinput(pos, {yexpr("square(y)*x1", 1), {0}}));
}

TEST_CASE("composition invariant over random chains")
{
    Rng rng(21);
    Matrix X = uniform(rng, 300, 4, 0.5, 2.5);
    Dataset root = Dataset::from_samples(X, eval(parse("x1*x2 + x3/x4"), X));
    auto budget = GrammarBudget::standard(1);
    for (int chain = 0; chain < 20; ++chain) {
        Dataset ds = root;
        while (ds.dim() > 1) {
            int d = static_cast<int>(ds.dim());
            std::vector<Substitution> cands;
            for (auto& s : gen_input_candidates(d, budget)) cands.emplace_back(s);
            for (auto& s : gen_outinput_candidates(d, budget)) cands.emplace_back(s);
            bool moved = false;
            for (int attempt = 0; attempt < 50 && !moved; ++attempt) {
                const auto& s = cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
                try {
                    Dataset next = apply_substitution(ds, s);
                    CHECK(next.dim() < ds.dim());
                    CHECK(next.X.allFinite());
                    CHECK(next.y.allFinite());
                    CHECK(composition_error(next) <= 1e-9);
                    ds = std::move(next);
                    moved = true;
                } catch (const RejectedCandidate&) {
                } catch (const DegenerateY&) {
                }
            }
            if (!moved) break;
        }
    }
}

TEST_CASE("valid input substitutions preserve CODEC dependence")
{
    Rng rng(34);
    const int arity = 2;
    auto templates = gen_input_candidates(arity, GrammarBudget::standard(1));
    const char* outer[] = {"x1 + x2", "x1*x2", "exp(x1/3)*x2", "sqrt(x1*x1 + x2)"};
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto& s = templates[std::uniform_int_distribution<std::size_t>(0, templates.size() - 1)(rng)];
        ExprDag F = parse(outer[trial % 4]);
        std::vector<ExprDag> rep{s.g, x(3)};
        ExprDag f = F.substitute(rep);
        Matrix X = uniform(rng, 1000, 3, 0.2, 1.4);
        Vector y = eval(f, X);
        if (!y.allFinite() || (y.array() - y.mean()).abs().maxCoeff() == 0) continue;
        Dataset ds = Dataset::from_samples(X, y);
        CAPTURE(f.str());
        bool valid = false;
        try {
            valid = verify_input_sub(f, 3, s);
        } catch (const Unverifiable&) {
            continue;
        }
        REQUIRE(valid);
        try {
            Dataset next = apply_input(ds, s);
            // a pole of g inside the box makes the nearest-neighbour estimate unreliable
            Vector col = eval(instantiate(Substitution{s}, 3), X);
            if (col.cwiseAbs().maxCoeff() > 1e3) continue;
            double before = codec(ds.X, ds.y).value;
            double after = codec(next.X, next.y).value;
            CHECK(after >= before - 0.05);
            ++checked;
        } catch (const RejectedCandidate&) {
        }
    }
    CHECK(checked >= 20);
}

TEST_CASE("verify_input_sub examples")
{
    ExprDag f = parse("x1*x2 + x3");
    CHECK(verify_input_sub(f, 3, {parse("x1*x2"), {0, 1}}));
    CHECK(*transfer_input(f, 3, {parse("x1*x2"), {0, 1}}) == simplify(parse("x1 + x2")));
    CHECK_FALSE(verify_input_sub(f, 3, {parse("x1 + x2"), {0, 1}}));
    CHECK(verify_input_sub(washburn(), 5, {parse("x1*x2*x3"), {0, 1, 2}}));
    CHECK_FALSE(verify_input_sub(washburn(), 5, {parse("x1*x2"), {0, 3}}));
    CHECK(verify_input_sub(washburn(), 5, {parse("x1/x2"), {2, 4}}));
    CHECK_THROWS_AS(verify_input_sub(f, 3, {parse("x1*sin(x1) + x2*cos(x2)"), {0, 1}}), Unverifiable);
    // sin is inverted on both branches; the substitution holds on each
    CHECK(verify_input_sub(parse("x3*exp(sin(x1 - x2)/3)"), 3, {parse("sin(x1 - x2)"), {0, 1}}));
    CHECK(verify_input_sub(parse("cos(x1*x2) + x3"), 3, {parse("cos(x1*x2)"), {0, 1}}));
    // only the principal branch of sin reduces x1 + sin(x1*x2)
    CHECK_FALSE(verify_input_sub(parse("x1 + sin(x1*x2)"), 3, {parse("sin(x1*x2)"), {0, 1}}));
    // x2 can still be solved for when x1 cannot
    CHECK(verify_input_sub(parse("sin(x1) + x2 + x3"), 3, {parse("sin(x1) + x2"), {0, 1}}));
}

TEST_CASE("verify_outinput_sub examples")
{
    ExprDag f = parse("x1*x2 + x3");
    auto r = transfer_outinput(f, 3, {yexpr("y - x1", 1), {2}});
    REQUIRE(r.has_value());
    CHECK(*r == simplify(parse("x1*x2")));
    CHECK_FALSE(verify_outinput_sub(f, 3, {yexpr("y/x1", 1), {2}}));

    ExprDag g = parse("x1*x2*x3 + x1*(x2 + log(x2))/x3");
    auto residual = transfer_outinput(g, 3, {yexpr("y/x1", 1), {0}});
    REQUIRE(residual.has_value());
    CHECK(equivalent(*residual, parse("x1*x2 + (x1 + log(x1))/x2")));
    CHECK(identical(*residual, parse("x1*x2 + (x1 + log(x1))/x2")));
}

TEST_CASE("ground truth follows the Washburn path")
{
    ExprDag f = washburn();
    auto f2 = transfer_input(f, 5, {parse("x1*x2*x3"), {0, 1, 2}});
    REQUIRE(f2.has_value());
    auto f3 = transfer_outinput(*f2, 3, {yexpr("y/sqrt(x1)", 1), {0}});
    REQUIRE(f3.has_value());
    auto f4 = transfer_outinput(*f3, 2, {yexpr("y*sqrt(x1)", 1), {1}});
    REQUIRE(f4.has_value());
    CHECK(f4->arity() == 1);
    CHECK(identical(*f4, parse("sqrt(cos(x1)/2)")));
    CHECK_FALSE(transfer_outinput(*f3, 2, {yexpr("y*x1", 1), {1}}).has_value());
}
