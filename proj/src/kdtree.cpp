#include "dimred/kdtree.hpp"

#include <algorithm>
#include <queue>

namespace dimred {

namespace {

constexpr Index kLeafSize = 8;
constexpr Index kBruteForceDims = 16;

using Candidate = std::pair<double, Index>;  // (squared distance, row); ordering breaks ties by row
using MaxHeap = std::priority_queue<Candidate>;

}  // namespace

KdTree::KdTree(const Matrix& points) : pts_(points), order_(points.rows())
{
    for (Index i = 0; i < points.rows(); ++i) order_[i] = i;
    if (points.rows() > 0) build(0, points.rows());
}

int KdTree::build(Index lo, Index hi)
{
    int id = static_cast<int>(cells_.size());
    cells_.push_back({lo, hi, -1, 0.0});
    if (hi - lo <= kLeafSize) return id;
    int axis = 0;
    double widest = -1;
    for (Index c = 0; c < pts_.cols(); ++c) {
        double mn = pts_(order_[lo], c), mx = mn;
        for (Index t = lo + 1; t < hi; ++t) {
            double v = pts_(order_[t], c);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mx - mn > widest) {
            widest = mx - mn;
            axis = static_cast<int>(c);
        }
    }
    if (widest <= 0) return id;  // all points coincide
    Index mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](Index a, Index b) { return pts_(a, axis) < pts_(b, axis); });
    double split = pts_(order_[mid], axis);
    int left = build(lo, mid);
    int right = build(mid, hi);
    cells_[id].axis = axis;
    cells_[id].split = split;
    cells_[id].left = left;
    cells_[id].right = right;
    return id;
}

template <class Heap>
void KdTree::search(int cell, Index query, int k, Heap& heap) const
{
    const Cell& c = cells_[cell];
    if (c.axis < 0) {
        for (Index t = c.lo; t < c.hi; ++t) {
            Index j = order_[t];
            if (j == query) continue;
            double d = (pts_.row(j) - pts_.row(query)).squaredNorm();
            Candidate cand{d, j};
            if (static_cast<int>(heap.size()) < k) heap.push(cand);
            else if (cand < heap.top()) {
                heap.pop();
                heap.push(cand);
            }
        }
        return;
    }
    double diff = pts_(query, c.axis) - c.split;
    int near = diff < 0 ? c.left : c.right;
    int far = diff < 0 ? c.right : c.left;
    search(near, query, k, heap);
    if (static_cast<int>(heap.size()) < k || diff * diff <= heap.top().first) search(far, query, k, heap);
}

std::vector<Index> KdTree::k_nearest(Index i, int k) const
{
    MaxHeap heap;
    if (!cells_.empty()) search(0, i, k, heap);
    std::vector<Index> out(heap.size());
    for (std::size_t t = out.size(); t-- > 0;) {
        out[t] = heap.top().second;
        heap.pop();
    }
    return out;
}

Index KdTree::nearest(Index i) const
{
    auto nn = k_nearest(i, 1);
    return nn.empty() ? i : nn[0];
}

std::vector<Index> nearest_neighbors_brute(const Matrix& points, Exec exec)
{
    const Index n = points.rows();
    std::vector<Index> nu(n, 0);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = points;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        Index arg = i;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = (p.row(j) - p.row(i)).squaredNorm();
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        nu[i] = arg;
    }
    return nu;
}

std::vector<std::vector<Index>> k_nearest_neighbors(const Matrix& points, int k, Exec exec)
{
    const Index n = points.rows();
    std::vector<std::vector<Index>> out(n);
    if (points.cols() > kBruteForceDims) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = points;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
        for (Index i = 0; i < n; ++i) {
            MaxHeap heap;
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                Candidate cand{(p.row(j) - p.row(i)).squaredNorm(), j};
                if (static_cast<int>(heap.size()) < k) heap.push(cand);
                else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            std::vector<Index> v(heap.size());
            for (std::size_t t = v.size(); t-- > 0;) {
                v[t] = heap.top().second;
                heap.pop();
            }
            out[i] = std::move(v);
        }
        return out;
    }
    KdTree tree(points);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (Index i = 0; i < n; ++i) out[i] = tree.k_nearest(i, k);
    return out;
}

std::vector<Index> nearest_neighbors(const Matrix& points, Exec exec)
{
    const Index n = points.rows();
    if (points.cols() > kBruteForceDims) return nearest_neighbors_brute(points, exec);
    KdTree tree(points);
    std::vector<Index> nu(n);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (Index i = 0; i < n; ++i) nu[i] = tree.nearest(i);
    return nu;
}

}  // namespace dimred
