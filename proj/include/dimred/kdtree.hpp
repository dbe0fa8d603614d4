#pragma once

#include <vector>

#include "dimred/types.hpp"

namespace dimred {

/// Exact nearest-neighbour queries over the rows of a point matrix. Ties in
/// distance go to the lower row index.
class KdTree {
public:
    explicit KdTree(const Matrix& points);

    /// Nearest row to row `i`, excluding `i` itself.
    Index nearest(Index i) const;
    /// The k nearest rows to row `i` (excluding `i`), closest first.
    std::vector<Index> k_nearest(Index i, int k) const;

private:
    struct Cell {
        Index lo, hi;  // range in order_
        int axis;
        double split;
        int left{-1}, right{-1};
    };
    int build(Index lo, Index hi);
    template <class Heap>
    void search(int cell, Index query, int k, Heap& heap) const;

    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> pts_;
    std::vector<Index> order_;
    std::vector<Cell> cells_;
};

/// Nearest neighbour of every row (ν(i) ≠ i). Uses a k-d tree for up to 16
/// columns and brute force beyond.
std::vector<Index> nearest_neighbors(const Matrix& points, Exec exec = Exec::Parallel);
/// Quadratic reference implementation.
std::vector<Index> nearest_neighbors_brute(const Matrix& points, Exec exec = Exec::Serial);

std::vector<std::vector<Index>> k_nearest_neighbors(const Matrix& points, int k, Exec exec = Exec::Parallel);

}  // namespace dimred
