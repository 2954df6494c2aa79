#include "tembed/ball_tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tembed/error.hpp"

namespace tembed {

namespace {

// Lexicographic (distance, index): the heap keeps the worst neighbor on top.
bool closer(const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.index < b.index;
}

// Absorbs rounding in |q - c| - r so that the pruning bound never excludes a
// point that ties or beats the current k-th distance.
constexpr double kPruneSlack = 1e-9;

void check_query(std::size_t n, std::size_t dim, std::span<const double> q, std::size_t k) {
    if (q.size() != dim) {
        throw std::invalid_argument("query has dimension " + std::to_string(q.size()) + ", index has " +
                                    std::to_string(dim));
    }
    if (k < 1 || k > n) {
        throw std::invalid_argument("k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
}

void offer(NeighborList& heap, std::size_t k, Neighbor candidate) {
    if (heap.size() < k) {
        heap.push_back(candidate);
        std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(candidate, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = candidate;
        std::push_heap(heap.begin(), heap.end(), closer);
    }
}

} // namespace

BallTree::BallTree(Matrix points, std::size_t leaf_size) : points_(std::move(points)), leaf_size_(leaf_size) {
    if (points_.rows == 0) throw StructuralError("ball tree: empty point set");
    if (leaf_size_ == 0) throw std::invalid_argument("ball tree: leaf_size must be positive");
    order_.resize(points_.rows);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * (points_.rows / leaf_size_ + 1));
    build_node(0, points_.rows);
}

std::size_t BallTree::build_node(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({});
    const std::size_t dim = points_.cols;
    const double count = static_cast<double>(end - begin);

    std::vector<double> center(dim, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
        const auto p = points_.row(order_[i]);
        for (std::size_t d = 0; d < dim; ++d) center[d] += p[d];
    }
    for (double& c : center) c /= count;
    double radius = 0.0;
    for (std::size_t i = begin; i < end; ++i) radius = std::max(radius, euclidean_distance(points_.row(order_[i]), center));

    Node node;
    node.center = std::move(center);
    node.radius = radius;
    node.begin = begin;
    node.end = end;

    if (end - begin > leaf_size_) {
        std::size_t split_dim = 0;
        double best_spread = -1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t i = begin; i < end; ++i) {
                const double v = points_(order_[i], d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                split_dim = d;
            }
        }
        const std::size_t mid = begin + (end - begin) / 2;
        const auto first = order_.begin();
        std::nth_element(first + static_cast<std::ptrdiff_t>(begin), first + static_cast<std::ptrdiff_t>(mid),
                         first + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                             const double va = points_(a, split_dim);
                             const double vb = points_(b, split_dim);
                             return va != vb ? va < vb : a < b;
                         });
        node.left = build_node(begin, mid);
        node.right = build_node(mid, end);
    }
    nodes_[id] = std::move(node);
    return id;
}

NeighborList BallTree::query(std::span<const double> q, std::size_t k, QueryStats* stats) const {
    check_query(size(), dimension(), q, k);
    NeighborList heap;
    heap.reserve(k);
    QueryStats local;
    search(0, q, euclidean_distance(q, nodes_[0].center), k, heap, local);
    std::sort_heap(heap.begin(), heap.end(), closer);
    if (stats) *stats = local;
    return heap;
}

void BallTree::search(std::size_t id, std::span<const double> q, double center_distance, std::size_t k,
                      NeighborList& heap, QueryStats& stats) const {
    const Node& node = nodes_[id];
    if (heap.size() == k && center_distance - node.radius - kPruneSlack > heap.front().distance) return;
    ++stats.nodes_visited;

    if (node.is_leaf()) {
        ++stats.leaves_visited;
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = order_[i];
            ++stats.distance_evaluations;
            offer(heap, k, {idx, euclidean_distance(q, points_.row(idx))});
        }
        return;
    }

    const double dl = euclidean_distance(q, nodes_[node.left].center);
    const double dr = euclidean_distance(q, nodes_[node.right].center);
    if (dl <= dr) {
        search(node.left, q, dl, k, heap, stats);
        search(node.right, q, dr, k, heap, stats);
    } else {
        search(node.right, q, dr, k, heap, stats);
        search(node.left, q, dl, k, heap, stats);
    }
}

NeighborList brute_force(const Matrix& points, std::span<const double> q, std::size_t k) {
    check_query(points.rows, points.cols, q, k);
    NeighborList all(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) all[i] = {i, euclidean_distance(q, points.row(i))};
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
    all.resize(k);
    return all;
}

} // namespace tembed
