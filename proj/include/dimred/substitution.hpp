#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dimred/enumerate.hpp"
#include "dimred/expr.hpp"
#include "dimred/types.hpp"

namespace dimred {

/// A candidate whose transformed data cannot be used (domain losses, a
/// constant new column, a sign branch violated by the data).
class RejectedCandidate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// More than the allowed fraction of rows became non-finite.
class TooFewRows : public RejectedCandidate {
public:
    using RejectedCandidate::RejectedCandidate;
};

/// No variable of the substitution could be solved for.
class Unverifiable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raw observations every dataset in a search refers back to.
struct Observations {
    Matrix X;
    Vector y;
};

/// A regression problem together with the expressions, over the original
/// variables, that its columns and output stand for.
struct Dataset {
    Matrix X;
    Vector y;
    /// var_map[j] describes column j in terms of the original variables.
    std::vector<ExprDag> var_map;
    /// Output in terms of the original variables and the original output,
    /// which is variable index original_dim().
    ExprDag y_map;
    std::shared_ptr<const Observations> origin;
    /// Row of `origin` behind each row of X.
    std::vector<Index> rows;
    /// Fraction of the parent's rows dropped when this dataset was derived.
    double dropped_fraction{0.0};

    Index dim() const { return X.cols(); }
    Index size() const { return X.rows(); }
    int original_dim() const { return static_cast<int>(origin->X.cols()); }

    /// Root dataset: identity maps. Throws std::invalid_argument on non-finite
    /// entries or mismatched sizes.
    static Dataset from_samples(Matrix X, Vector y);
};

/// Largest relative deviation between the dataset's columns and its maps
/// re-evaluated on the raw observations.
double composition_error(const Dataset& ds);

/// Input substitution x_I -> g(x_I). `g` is a template over variables
/// 0..|I|-1, variable t standing for column I[t].
struct InputSub {
    ExprDag g;
    std::vector<int> I;
};

/// Out-input substitution y -> h(x_I, y). `h` is a template over variables
/// 0..|I|-1 for the columns I and variable |I| for the output.
struct OutInputSub {
    ExprDag h;
    std::vector<int> I;
};

using Substitution = std::variant<InputSub, OutInputSub>;

/// g or h written over the parent's columns (x1..xd, and y for out-input).
std::string describe(const Substitution& s);
/// The template instantiated over parent columns; the output is variable `d`.
ExprDag instantiate(const Substitution& s, int d);

struct CandidateLimits {
    std::size_t cap = 50000;
    /// Keep one of g, -g, 1/g for input substitutions: they carry the same information.
    bool merge_sign_and_reciprocal = true;
};

std::vector<InputSub> gen_input_candidates(int d, const GrammarBudget& budget, const CandidateLimits& lim = {});
std::vector<OutInputSub> gen_outinput_candidates(int d, const GrammarBudget& budget,
                                                 const CandidateLimits& lim = {});

inline constexpr double kMaxDroppedRows = 0.2;

/// New columns: g(x_I) followed by the retained columns in their old order.
Dataset apply_input(const Dataset& ds, const InputSub& s, double max_drop = kMaxDroppedRows);
/// New output h(x_I, y); the columns in I are removed.
Dataset apply_outinput(const Dataset& ds, const OutInputSub& s, double max_drop = kMaxDroppedRows);
Dataset apply_substitution(const Dataset& ds, const Substitution& s, double max_drop = kMaxDroppedRows);

/// Ground truth carried into the coordinates of the substituted problem, or
/// nullopt when the substitution is not valid for it. Throws Unverifiable
/// when no variable of an input substitution can be solved for.
std::optional<ExprDag> transfer_input(const ExprDag& f, int d, const InputSub& s);
std::optional<ExprDag> transfer_outinput(const ExprDag& f, int d, const OutInputSub& s);
std::optional<ExprDag> transfer(const ExprDag& f, int d, const Substitution& s);

bool verify_input_sub(const ExprDag& f_true, int d, const InputSub& s);
bool verify_outinput_sub(const ExprDag& f_true, int d, const OutInputSub& s);

}  // namespace dimred
