#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimred/beamsearch.hpp"
#include "dimred/enumerate.hpp"
#include "dimred/expr.hpp"
#include "dimred/types.hpp"

namespace dimred {

class ExternalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegressorSpec {
    enum class Kind { Poly, DagSearch, External };
    Kind kind = Kind::Poly;
    int max_degree = 2;
    GrammarBudget dag_budget = default_dag_budget();
    std::size_t max_skeletons = 10000;
    /// Shell command; "{csv}" is replaced by the data file, otherwise the path is appended.
    std::string command;
    double timeout_seconds = 60.0;

    static GrammarBudget default_dag_budget();
    /// "poly", "dagsearch" or "external:<command>".
    static RegressorSpec parse(const std::string& text);
    std::string name() const;
};

struct PolyFit {
    ExprDag expr;
    /// Coefficients in monomial order (see monomials()).
    std::vector<double> coef;
    bool ill_conditioned = false;
};

/// Exponent vectors of all monomials of total degree <= max_degree, constant first,
/// then by degree, then lexicographically with higher powers of earlier variables first.
std::vector<std::vector<int>> monomials(int d, int max_degree);

PolyFit fit_poly_detailed(const Matrix& X, const Vector& y, int max_degree);
ExprDag fit_poly(const Matrix& X, const Vector& y, int max_degree = 2);

struct DagSearchStats {
    std::size_t skeletons = 0;
    double best_nrmse = 0.0;
};

/// Minimum-NRMSE expression among enumerated skeletons, constants fitted per
/// skeleton; ties go to the lower complexity. Falls back to the mean.
ExprDag fit_dagsearch(const Matrix& X, const Vector& y, const GrammarBudget& budget, std::size_t max_skeletons,
                      DagSearchStats* stats = nullptr, Exec exec = Exec::Parallel);

/// Writes `x1,...,xd,y` CSV, runs the command, parses the first non-empty
/// output line. Throws ExternalFailure.
ExprDag fit_external(const Matrix& X, const Vector& y, const RegressorSpec& spec);

ExprDag fit(const Matrix& X, const Vector& y, const RegressorSpec& spec);

/// Penalty per non-finite prediction, in units of RMS(y).
inline constexpr double kNonFinitePenalty = 10.0;

/// sqrt(sum (y - yhat)^2 / sum y^2). Non-finite predictions count as an error
/// of kNonFinitePenalty * RMS(y). Throws DegenerateY when sum y^2 = 0.
double nrmse(const Vector& y, const Vector& yhat);

struct SolveResult {
    ExprDag expr;
    double nrmse_test = 0.0;
    std::size_t complexity = 1;
    std::optional<bool> recovered;
    int source_node_depth = 0;
    /// Test NRMSE of every node on the path (NaN where reconstruction failed).
    std::vector<double> node_nrmse;
};

/// Seed-deterministic split of `n` rows: true marks a test row.
std::vector<bool> holdout_mask(Index n, double fraction, std::uint64_t seed);

/// Fits the regressor at every node of the best path, maps each fit back to
/// the original variables and keeps the one with the lowest NRMSE on the
/// held-out original rows. Throws std::invalid_argument for a fraction
/// outside (0, 1).
SolveResult solve_pipeline(const SearchResult& result, const RegressorSpec& spec, double holdout_fraction = 0.2,
                           std::uint64_t seed = 0);

/// Same split and scoring with the root node only.
SolveResult solve_root(const Dataset& root, const RegressorSpec& spec, double holdout_fraction = 0.2,
                       std::uint64_t seed = 0);

}  // namespace dimred
