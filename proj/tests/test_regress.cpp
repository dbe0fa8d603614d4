#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dimred/bench.hpp"
#include "dimred/cas.hpp"
#include "dimred/eval.hpp"
#include "dimred/regress.hpp"

using namespace dimred;

namespace {

Matrix uniform(Rng& rng, Index n, Index d, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix X(n, d);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

Problem problem(const std::string& text, int d) { return {text, d, parse(text), std::nullopt, {}}; }

const std::string kWashburn = "sqrt(x1*x2*x3*cos(x4)/(2*x5))";

RegressorSpec spec_of(const std::string& text) { return RegressorSpec::parse(text); }

}  // namespace

TEST_CASE("nrmse examples")
{
    Vector y(2), yhat(2);
    y << 3, 4;
    CHECK(nrmse(y, y) == 0.0);
    yhat << 0, 0;
    CHECK(nrmse(y, yhat) == doctest::Approx(1.0));
    yhat << 3, 5;
    CHECK(nrmse(y, yhat) == doctest::Approx(1.0 / 5.0));
    // a non-finite prediction costs 10 RMS(y): sqrt(100 * 12.5 / 25)
    yhat << 3, std::nan("");
    CHECK(nrmse(y, yhat) == doctest::Approx(std::sqrt(50.0)));
    CHECK_THROWS_AS(nrmse(Vector::Zero(3), Vector::Ones(3)), DegenerateY);
    CHECK_THROWS_AS(nrmse(Vector::Ones(3), Vector::Ones(2)), std::invalid_argument);
}

TEST_CASE("regressor spec parsing")
{
    CHECK(spec_of("poly").kind == RegressorSpec::Kind::Poly);
    CHECK(spec_of("dagsearch").kind == RegressorSpec::Kind::DagSearch);
    auto ext = spec_of("external:my-regressor --fast {csv}");
    CHECK(ext.kind == RegressorSpec::Kind::External);
    CHECK(ext.command == "my-regressor --fast {csv}");
    CHECK_THROWS_AS(spec_of("external:"), std::invalid_argument);
    CHECK_THROWS_AS(spec_of("operon"), std::invalid_argument);
    CHECK(spec_of("poly").name() == "poly");
}

TEST_CASE("monomial order")
{
    auto m = monomials(2, 2);
    std::vector<std::vector<int>> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    CHECK(m == expected);
    CHECK(monomials(3, 2).size() == 10);
    CHECK(monomials(1, 3).size() == 4);
}

TEST_CASE("fit_poly")
{
    Rng rng(3);
    Matrix X = uniform(rng, 200, 2, -2, 2);

    SUBCASE("exact model class")
    {
        Vector y = 3.0 * X.col(0).cwiseProduct(X.col(1)).array() + 2.0;
        auto fit = fit_poly_detailed(X, y, 2);
        CHECK_FALSE(fit.ill_conditioned);
        REQUIRE(fit.coef.size() == 6);
        CHECK(fit.coef[0] == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(fit.coef[4] == doctest::Approx(3.0).epsilon(1e-6));
        for (int k : {1, 2, 3, 5}) CHECK(fit.coef[static_cast<std::size_t>(k)] == 0.0);
        CHECK(nrmse(y, eval(fit.expr, X)) < 1e-8);
        CHECK(recovery(parse("3*x1*x2 + 2"), fit.expr));
    }

    SUBCASE("coefficients match a pseudo-inverse")
    {
        std::normal_distribution<double> noise(0, 1);
        Vector y(X.rows());
        for (Index i = 0; i < y.size(); ++i) y(i) = std::exp(X(i, 0)) - X(i, 1) + noise(rng);
        Matrix A(X.rows(), 6);
        A.col(0).setOnes();
        A.col(1) = X.col(0);
        A.col(2) = X.col(1);
        A.col(3) = X.col(0).cwiseAbs2();
        A.col(4) = X.col(0).cwiseProduct(X.col(1));
        A.col(5) = X.col(1).cwiseAbs2();
        Vector oracle = A.completeOrthogonalDecomposition().pseudoInverse() * y;
        auto fit = fit_poly_detailed(X, y, 2);
        REQUIRE(fit.coef.size() == 6);
        for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(fit.coef[k] - oracle(static_cast<Index>(k))) < 1e-8);
    }

    SUBCASE("degree-2 polynomials are fitted exactly")
    {
        Rng r(8);
        std::uniform_real_distribution<double> c(-3, 3);
        Matrix Z = uniform(r, 150, 3, -1, 1);
        for (int trial = 0; trial < 10; ++trial) {
            Vector y = Vector::Constant(Z.rows(), c(r));
            for (auto& m : monomials(3, 2)) {
                Vector term = Vector::Ones(Z.rows());
                for (Index j = 0; j < 3; ++j)
                    for (int p = 0; p < m[static_cast<std::size_t>(j)]; ++p) term = term.cwiseProduct(Z.col(j));
                y += c(r) * term;
            }
            CHECK(nrmse(y, eval(fit_poly(Z, y, 2), Z)) < 1e-8);
        }
    }

    SUBCASE("model-class limit")
    {
        Matrix Z = uniform(rng, 200, 1, -0.01, 0.01);
        Vector y = Z.col(0).array().sin();
        ExprDag f = fit_poly(Z, y, 2);
        // the cubic term x^3/6 is what a quadratic cannot represent
        CHECK(nrmse(y, eval(f, Z)) < 1e-4);
        CHECK_FALSE(recovery(parse("sin(x1)"), f));
    }

    SUBCASE("duplicated columns are flagged")
    {
        Matrix Z(X.rows(), 2);
        Z.col(0) = X.col(0);
        Z.col(1) = X.col(0);
        Vector y = Z.col(0).array() + 1.0;
        auto fit = fit_poly_detailed(Z, y, 2);
        CHECK(fit.ill_conditioned);
        CHECK(nrmse(y, eval(fit.expr, Z)) < 1e-6);
    }

    CHECK_THROWS_AS(fit_poly(X.topRows(5), Vector::Ones(5), 2), std::invalid_argument);
}

TEST_CASE("fit_dagsearch")
{
    Rng rng(4);
    GrammarBudget budget = RegressorSpec::default_dag_budget();

    SUBCASE("product of two inputs")
    {
        Matrix X = uniform(rng, 200, 2, 1, 3);
        Vector y = X.col(0).cwiseProduct(X.col(1));
        DagSearchStats stats;
        ExprDag f = fit_dagsearch(X, y, budget, 10000, &stats);
        CHECK(nrmse(y, eval(f, X)) < 1e-9);
        CHECK(recovery(parse("x1*x2"), f));
        CHECK(stats.best_nrmse < 1e-9);
    }

    SUBCASE("one-variable leaf of the Washburn path")
    {
        Matrix X = uniform(rng, 200, 1, -1.5, 1.5);
        Vector y = X.col(0).array().cos() / 2.0;
        ExprDag f = fit_dagsearch(X, y, budget, 10000);
        CHECK(recovery(parse("cos(x1)/2"), f));
    }

    SUBCASE("skeleton count matches the enumerator")
    {
        Matrix X = uniform(rng, 100, 2, 1, 2);
        Vector y = X.col(0) + X.col(1);
        for (std::size_t cap : {std::size_t{1}, std::size_t{50}, std::size_t{400}}) {
            DagSearchStats stats;
            fit_dagsearch(X, y, budget, cap, &stats);
            CHECK(stats.skeletons == enumerate_dags(2, budget, cap).size());
        }
        GrammarBudget tiny;
        tiny.max_intermediary_nodes = 0;
        tiny.binary_ops = {BinaryOp::Add, BinaryOp::Mul};
        tiny.allow_constants = true;
        DagSearchStats stats;
        fit_dagsearch(X, y, tiny, 10000, &stats);
        CHECK(stats.skeletons == enumerate_dags(2, tiny).size());
    }

    SUBCASE("serial and parallel agree")
    {
        Matrix X = uniform(rng, 120, 2, 1, 2);
        Vector y = X.col(0).array().log() + X.col(1).array();
        ExprDag a = fit_dagsearch(X, y, budget, 2000, nullptr, Exec::Serial);
        ExprDag b = fit_dagsearch(X, y, budget, 2000, nullptr, Exec::Parallel);
        CHECK(a == b);
    }

    SUBCASE("nothing fits better than the mean")
    {
        // without constants only x1 and x1*x1 exist, both far from x1 + 5
        Matrix X = uniform(rng, 100, 1, 0, 1);
        Vector y = X.col(0).array() + 5.0;
        GrammarBudget bare;
        bare.max_intermediary_nodes = 0;
        bare.binary_ops = {BinaryOp::Mul};
        ExprDag f = fit_dagsearch(X, y, bare, 100);
        CHECK(f.is_constant());
        CHECK(eval(f, X)(0) == doctest::Approx(y.mean()));
        CHECK_THROWS_AS(fit_dagsearch(X, y, bare, 0), std::invalid_argument);
    }
}

TEST_CASE("fit_external")
{
    Rng rng(5);
    Matrix X = uniform(rng, 60, 2, 1, 2);
    Vector y = X.col(0).cwiseProduct(X.col(1)) + 0.01 * Vector::Ones(X.rows());
    RegressorSpec spec = spec_of("external:echo x1+x2 #");
    CHECK(fit_external(X, y, spec) == parse("x1+x2"));

    SUBCASE("failures")
    {
        spec.command = "exit 3";
        CHECK_THROWS_AS(fit_external(X, y, spec), ExternalFailure);
        spec.command = "echo '(x1+' #";
        CHECK_THROWS_AS(fit_external(X, y, spec), ExternalFailure);
        spec.command = "echo x3 #";
        CHECK_THROWS_AS(fit_external(X, y, spec), ExternalFailure);
        spec.command = "true";
        CHECK_THROWS_AS(fit_external(X, y, spec), ExternalFailure);
        spec.command = "sleep 20 #";
        spec.timeout_seconds = 0.5;
        auto start = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(fit_external(X, y, spec), ExternalFailure);
        CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
    }

    SUBCASE("the stub sees the same data")
    {
        auto side = std::filesystem::temp_directory_path() / "dimred-test-nrmse.txt";
        spec.command = "awk -F, 'NR == 1 { h = $0 } NR > 1 { e += ($3 - $1 * $2)^2; s += $3^2 } "
                       "END { printf \"%.17g %s\\n\", sqrt(e / s), h > \"" +
                       side.string() + "\"; print \"x1*x2\" }' {csv}";
        ExprDag f = fit_external(X, y, spec);
        CHECK(f == parse("x1*x2"));
        std::ifstream in(side);
        double reported = 0;
        std::string header;
        in >> reported >> header;
        CHECK(header == "x1,x2,y");
        CHECK(reported == doctest::Approx(nrmse(y, eval(f, X))).epsilon(1e-12));
        std::filesystem::remove(side);
    }
}

TEST_CASE("holdout split")
{
    auto a = holdout_mask(1000, 0.2, 7);
    CHECK(a.size() == 1000);
    CHECK(std::count(a.begin(), a.end(), true) == 200);
    CHECK(holdout_mask(1000, 0.2, 7) == a);
    CHECK(holdout_mask(1000, 0.2, 8) != a);
    auto odd = holdout_mask(11, 0.5, 1);
    CHECK(std::count(odd.begin(), odd.end(), true) == 6);
    CHECK_THROWS_AS(holdout_mask(10, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(holdout_mask(10, 1.0, 1), std::invalid_argument);
}

TEST_CASE("solve_pipeline on Washburn")
{
    Dataset ds = sample_problem(problem(kWashburn, 5), 1000, 5);
    SearchResult r = search(ds, BeamConfig{});
    REQUIRE(r.best().dataset.dim() == 1);
    RegressorSpec dag = spec_of("dagsearch");
    ExprDag truth = parse(kWashburn);

    SolveResult beam = solve_pipeline(r, dag, 0.2, 9);
    CHECK(recovery(truth, beam.expr));
    CHECK(beam.source_node_depth > 0);
    CHECK(beam.nrmse_test < 1e-6);
    CHECK(beam.complexity == complexity(beam.expr));
    REQUIRE(beam.node_nrmse.size() == r.best_path.size());
    double best = std::numeric_limits<double>::infinity();
    for (double v : beam.node_nrmse)
        if (std::isfinite(v)) best = std::min(best, v);
    CHECK(best == beam.nrmse_test);

    SolveResult root = solve_root(ds, dag, 0.2, 9);
    CHECK_FALSE(recovery(truth, root.expr));
    CHECK(beam.nrmse_test <= root.nrmse_test);
}

TEST_CASE("solve_pipeline properties")
{
    RegressorSpec poly = spec_of("poly");
    BeamConfig cfg;
    cfg.beam_size = 2;

    SUBCASE("never worse than the root fit")
    {
        for (const char* text : {"x1*x2/x3", "x1/(x2 + x3)", "exp(x1*x2)*x3"}) {
            CAPTURE(text);
            Dataset ds = sample_problem(problem(text, 3), 400, 2);
            SearchResult r = search(ds, cfg);
            double pipeline = solve_pipeline(r, poly, 0.2, 4).nrmse_test;
            double root = solve_root(ds, poly, 0.2, 4).nrmse_test;
            CHECK(pipeline <= root);
        }
    }

    SUBCASE("deterministic per seed")
    {
        Dataset ds = sample_problem(problem("x1*x2 + x3", 3), 300, 1);
        SearchResult r = search(ds, cfg);
        auto a = solve_pipeline(r, poly, 0.2, 11);
        auto b = solve_pipeline(r, poly, 0.2, 11);
        CHECK(a.expr == b.expr);
        CHECK(a.nrmse_test == b.nrmse_test);
        CHECK(recovery(parse("x1*x2 + x3"), a.expr));
    }

    SUBCASE("constant output")
    {
        Rng rng(6);
        Matrix X = uniform(rng, 200, 2, -1, 1);
        Dataset ds = Dataset::from_samples(X, Vector::Constant(X.rows(), 5.0));
        SolveResult root = solve_root(ds, poly, 0.2, 3);
        CHECK(recovery(parse("5"), root.expr));
        CHECK(root.source_node_depth == 0);
        SolveResult piped = solve_pipeline(search(ds, cfg), poly, 0.2, 3);
        CHECK(recovery(parse("5"), piped.expr));
        CHECK(piped.source_node_depth == 0);
    }

    SUBCASE("bad holdout")
    {
        Dataset ds = sample_problem(problem("x1*x2", 2), 100, 1);
        CHECK_THROWS_AS(solve_root(ds, poly, 0.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(solve_root(ds, poly, 1.5, 1), std::invalid_argument);
    }
}
