#include "dimred/depmeasure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dimred/kdtree.hpp"

namespace dimred {

std::string_view name(Measure m)
{
    switch (m) {
    case Measure::Xi: return "xi";
    case Measure::Codec: return "codec";
    case Measure::Kmac: return "kmac";
    case Measure::Volume: return "volume";
    }
    return "?";
}

std::optional<Measure> parse_measure(std::string_view text)
{
    for (Measure m : {Measure::Xi, Measure::Codec, Measure::Kmac, Measure::Volume})
        if (name(m) == text) return m;
    return std::nullopt;
}

RankVectors compute_ranks(const Vector& y)
{
    const Index n = y.size();
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return y(a) < y(b); });
    RankVectors rv{std::vector<std::int64_t>(n), std::vector<std::int64_t>(n)};
    for (Index start = 0; start < n;) {
        Index end = start + 1;
        while (end < n && y(idx[end]) == y(idx[start])) ++end;
        for (Index t = start; t < end; ++t) {
            rv.r[idx[t]] = end;
            rv.l[idx[t]] = n - start;
        }
        start = end;
    }
    return rv;
}

namespace {

std::int64_t spread_denominator(const RankVectors& rv, std::int64_t n)
{
    std::int64_t s = 0;
    for (auto l : rv.l) s += l * (n - l);
    return s;
}

}  // namespace

DependenceScore chatterjee_xi(const Vector& x, const Vector& y)
{
    const Index n = y.size();
    if (x.size() != n || n < 2) throw std::invalid_argument("chatterjee_xi: need n >= 2 paired samples");
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return x(a) < x(b); });
    Vector ys(n);
    for (Index i = 0; i < n; ++i) ys(i) = y(idx[i]);
    auto rv = compute_ranks(ys);
    std::int64_t den = spread_denominator(rv, n);
    if (den == 0) throw DegenerateY();
    std::int64_t jumps = 0;
    for (Index i = 0; i + 1 < n; ++i) jumps += std::llabs(rv.r[i + 1] - rv.r[i]);
    double value = 1.0 - static_cast<double>(n) * static_cast<double>(jumps) / (2.0 * static_cast<double>(den));
    return {value, Measure::Xi};
}

Matrix standardize_columns(const Matrix& X)
{
    Matrix Z = X;
    for (Index c = 0; c < X.cols(); ++c) {
        double mean = X.col(c).mean();
        Z.col(c).array() -= mean;
        double sd = std::sqrt(Z.col(c).squaredNorm() / static_cast<double>(std::max<Index>(1, X.rows())));
        if (sd > 0 && std::isfinite(sd)) Z.col(c) /= sd;
        else Z.col(c).setZero();
    }
    return Z;
}

DependenceScore codec(const Matrix& X, const Vector& y, CodecForm form, Exec exec)
{
    const Index n = y.size();
    if (X.rows() != n || n < 3 || X.cols() < 1) throw std::invalid_argument("codec: need n >= 3 rows and d >= 1");
    auto rv = compute_ranks(y);
    std::int64_t den = spread_denominator(rv, n);
    if (den == 0) throw DegenerateY();
    auto nu = nearest_neighbors(standardize_columns(X), exec);
    std::int64_t num = 0;
    if (form == CodecForm::MinForm) {
        for (Index i = 0; i < n; ++i) num += n * std::min(rv.r[i], rv.r[nu[i]]) - rv.l[i] * rv.l[i];
    } else {
        std::int64_t R = 0, S = 0, A = 0, L = 0;
        for (Index i = 0; i < n; ++i) {
            R += rv.r[i];
            S += rv.r[nu[i]];
            A += std::llabs(rv.r[i] - rv.r[nu[i]]);
            L += rv.l[i] * rv.l[i];
        }
        // R + S - A is twice a sum of minima, hence even
        num = n * ((R + S - A) / 2) - L;
    }
    return {static_cast<double>(num) / static_cast<double>(den), Measure::Codec};
}

namespace {

std::vector<Index> seeded_subset(Index n, Index m, std::uint64_t seed)
{
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    if (m >= n) return idx;
    Rng rng(seed);
    // partial Fisher-Yates
    for (Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

double default_bandwidth(const Vector& y)
{
    auto sub = seeded_subset(y.size(), 500, 0xba4d);
    std::vector<double> diffs;
    diffs.reserve(sub.size() * (sub.size() - 1) / 2);
    for (std::size_t i = 0; i < sub.size(); ++i)
        for (std::size_t j = i + 1; j < sub.size(); ++j) diffs.push_back(std::abs(y(sub[i]) - y(sub[j])));
    if (diffs.empty()) return 1.0;
    auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    double h = *mid;
    if (h > 0) return h;
    // heavy ties: fall back to the mean absolute difference
    double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
    return mean > 0 ? mean : 1.0;
}

DependenceScore kmac(const Matrix& X, const Vector& y, double bandwidth, Exec exec)
{
    const Index n = y.size();
    if (X.rows() != n || n < 3) throw std::invalid_argument("kmac: need n >= 3 rows");
    if (!(bandwidth > 0)) throw std::invalid_argument("kmac: bandwidth must be positive");
    if ((y.array() == y(0)).all()) throw DegenerateY();
    const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    auto kernel = [inv2h2](double a, double b) { return std::exp(-(a - b) * (a - b) * inv2h2); };

    auto nu = nearest_neighbors(standardize_columns(X), exec);
    double graph = 0;
    for (Index i = 0; i < n; ++i) graph += kernel(y(i), y(nu[i]));
    graph /= static_cast<double>(n);

    auto sub = seeded_subset(n, kKmacFullPairs, 0xc4055 + static_cast<std::uint64_t>(n));
    const Index m = static_cast<Index>(sub.size());
    Vector ys(m);
    for (Index i = 0; i < m; ++i) ys(i) = y(sub[i]);
    double pairs = 0;
#pragma omp parallel for reduction(+ : pairs) schedule(dynamic, 16) if (exec == Exec::Parallel)
    for (Index i = 0; i < m; ++i) {
        double row = 0;
        for (Index j = i + 1; j < m; ++j) row += kernel(ys(i), ys(j));
        pairs += row;
    }
    double cross = 2.0 * pairs / (static_cast<double>(m) * static_cast<double>(m - 1));
    double den = 1.0 - cross;
    if (!(den > 0)) throw DegenerateY();
    return {(graph - cross) / den, Measure::Kmac};
}

DependenceScore kmac(const Matrix& X, const Vector& y, Exec exec) { return kmac(X, y, default_bandwidth(y), exec); }

double parallelepiped_volume(const Matrix& diffs)
{
    if (diffs.rows() != diffs.cols()) throw std::invalid_argument("parallelepiped_volume: matrix must be square");
    return std::abs(diffs.fullPivLu().determinant());
}

double mean_volume(const Matrix& X, const Vector& y, bool standardize, Exec exec)
{
    const Index n = X.rows(), d = X.cols();
    if (y.size() != n || n < d + 2) throw std::invalid_argument("volume: need n >= d + 2 rows");
    Matrix Z(n, d + 1);
    Z.leftCols(d) = X;
    Z.col(d) = y;
    if (standardize) Z = standardize_columns(Z);
    auto knn = k_nearest_neighbors(Z.leftCols(d), static_cast<int>(d + 1), exec);
    double total = 0;
#pragma omp parallel for reduction(+ : total) schedule(static) if (exec == Exec::Parallel)
    for (Index i = 0; i < n; ++i) {
        Matrix diffs(d + 1, d + 1);
        for (Index t = 0; t <= d; ++t) diffs.row(t) = Z.row(knn[i][t]) - Z.row(i);
        total += parallelepiped_volume(diffs);
    }
    return total / static_cast<double>(n);
}

DependenceScore volume_score(const Matrix& X, const Vector& y, Exec exec)
{
    return {1.0 / (1.0 + mean_volume(X, y, true, exec)), Measure::Volume};
}

DependenceScore score(Measure m, const Matrix& X, const Vector& y, Exec exec)
{
    switch (m) {
    case Measure::Xi:
        if (X.cols() != 1) throw std::invalid_argument("xi needs a single input column");
        return chatterjee_xi(X.col(0), y);
    case Measure::Codec: return codec(X, y, CodecForm::Rewritten, exec);
    case Measure::Kmac: return kmac(X, y, exec);
    case Measure::Volume:
        if ((y.array() == y(0)).all()) throw DegenerateY();
        return volume_score(X, y, exec);
    }
    throw std::invalid_argument("unknown measure");
}

}  // namespace dimred
