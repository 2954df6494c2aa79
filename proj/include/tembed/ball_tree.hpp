#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tembed/matrix.hpp"

namespace tembed {

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Ascending by distance; equal distances ordered by lower point index.
using NeighborList = std::vector<Neighbor>;

/// Exact k-nearest-neighbor search over a fixed point set.
///
/// Nodes split at the median of the dimension with the largest spread;
/// each node's ball is centered on the mean of its points with radius equal
/// to the farthest point. Queries descend the closer child first and skip a
/// node only when its ball lies strictly beyond the current k-th neighbor.
class BallTree {
public:
    struct Node {
        std::vector<double> center;
        double radius = 0.0;
        std::size_t begin = 0; // range into point_order()
        std::size_t end = 0;
        std::size_t left = 0; // child node indices; both 0 for leaves
        std::size_t right = 0;

        bool is_leaf() const { return left == 0 && right == 0; }
    };

    struct QueryStats {
        std::size_t nodes_visited = 0;
        std::size_t leaves_visited = 0;
        std::size_t distance_evaluations = 0;
    };

    static constexpr std::size_t kDefaultLeafSize = 30;

    /// Throws StructuralError for an empty point set and std::invalid_argument
    /// for leaf_size 0.
    explicit BallTree(Matrix points, std::size_t leaf_size = kDefaultLeafSize);

    /// Throws std::invalid_argument unless 1 <= k <= size() and q has the
    /// tree's dimension.
    NeighborList query(std::span<const double> q, std::size_t k, QueryStats* stats = nullptr) const;

    std::size_t size() const { return points_.rows; }
    std::size_t dimension() const { return points_.cols; }
    std::size_t leaf_size() const { return leaf_size_; }
    const Matrix& points() const { return points_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::size_t>& point_order() const { return order_; }

private:
    std::size_t build_node(std::size_t begin, std::size_t end);
    void search(std::size_t node, std::span<const double> q, double center_distance, std::size_t k,
                NeighborList& heap, QueryStats& stats) const;

    Matrix points_;
    std::size_t leaf_size_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

/// Full scan reference with the same distance computation and tie rule.
NeighborList brute_force(const Matrix& points, std::span<const double> q, std::size_t k);

} // namespace tembed
