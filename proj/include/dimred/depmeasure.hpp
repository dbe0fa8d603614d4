#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dimred/types.hpp"

namespace dimred {

/// r_i = #{j : Y_j <= Y_i}, l_i = #{j : Y_j >= Y_i}.
struct RankVectors {
    std::vector<std::int64_t> r;
    std::vector<std::int64_t> l;
};

RankVectors compute_ranks(const Vector& y);

enum class Measure { Xi, Codec, Kmac, Volume };

std::string_view name(Measure m);
std::optional<Measure> parse_measure(std::string_view text);

struct DependenceScore {
    double value{0.0};
    Measure measure{Measure::Codec};
};

/// Chatterjee's rank correlation of y on a scalar x (pairs sorted stably by x).
DependenceScore chatterjee_xi(const Vector& x, const Vector& y);

enum class CodecForm {
    MinForm,    // sum of n*min(r_i, r_nu(i)) - l_i^2
    Rewritten,  // (n/2)(R + S - sum|r_i - r_nu(i)|) - L
};

/// Unconditional CODEC statistic with nearest neighbours in standardized X.
DependenceScore codec(const Matrix& X, const Vector& y, CodecForm form = CodecForm::Rewritten,
                      Exec exec = Exec::Parallel);

/// Median of |y_i - y_j| over a seeded subsample of at most 500 points.
double default_bandwidth(const Vector& y);

/// Kernel measure of association on the 1-NN graph with a Gaussian RBF kernel.
/// For n above `kKmacFullPairs` the cross term is an unbiased U-statistic on a
/// seeded subsample.
inline constexpr Index kKmacFullPairs = 2000;
DependenceScore kmac(const Matrix& X, const Vector& y, double bandwidth, Exec exec = Exec::Parallel);
DependenceScore kmac(const Matrix& X, const Vector& y, Exec exec = Exec::Parallel);

/// |det| of the square matrix whose rows are difference vectors.
double parallelepiped_volume(const Matrix& diffs);

/// Mean parallelepiped volume spanned by each point's d+1 nearest neighbours
/// (found in X space) in the joint (x, y) space. Columns of X and y are
/// standardized first unless `standardize` is false.
double mean_volume(const Matrix& X, const Vector& y, bool standardize = true, Exec exec = Exec::Parallel);

/// 1 / (1 + mean volume): higher means more dependent.
DependenceScore volume_score(const Matrix& X, const Vector& y, Exec exec = Exec::Parallel);

/// Dispatch with default settings. Throws DegenerateY for a constant y.
DependenceScore score(Measure m, const Matrix& X, const Vector& y, Exec exec = Exec::Parallel);

/// Zero mean and unit variance per column; constant columns become zero.
Matrix standardize_columns(const Matrix& X);

}  // namespace dimred
