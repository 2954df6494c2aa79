#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tembed/ball_tree.hpp"
#include "tembed/matrix.hpp"
#include "tembed/metrics.hpp"

namespace tembed {

/// Per-class arithmetic means of reference embeddings. Centroids are left in
/// the ambient space and are generally not unit-norm.
struct CentroidModel {
    std::vector<std::string> class_names;
    Matrix centroids;
};

/// Class ids are 0..n_classes-1; every class must have a member. Names are
/// optional and default to the decimal class id.
CentroidModel fit_centroids(const Matrix& embeddings, std::span<const std::size_t> labels, std::size_t n_classes,
                            std::vector<std::string> class_names = {});

/// Nearest centroid by Euclidean distance; ties go to the lowest class id.
std::size_t predict_centroid(const CentroidModel& model, std::span<const double> e);

struct KnnModel {
    std::shared_ptr<const BallTree> index;
    std::vector<std::size_t> labels;
    std::size_t k = 10;
};

inline constexpr std::size_t kDefaultK = 10;

KnnModel fit_knn(const Matrix& embeddings, std::span<const std::size_t> labels, std::size_t k,
                 std::size_t leaf_size = BallTree::kDefaultLeafSize);

/// Majority label among the k nearest references. Among classes tied for the
/// most votes, the one owning the nearest neighbor wins.
std::size_t predict_knn(const KnnModel& model, std::span<const double> e);

/// The vote itself, over neighbor labels sorted nearest first.
std::size_t majority_vote(std::span<const std::size_t> neighbor_labels);

enum class ClassifierMode { centroid, knn };

std::string_view to_string(ClassifierMode mode);
ClassifierMode parse_classifier_mode(std::string_view s);

struct HalfSplitResult {
    std::vector<std::size_t> reference; // row indices into the embeddings
    std::vector<std::size_t> evaluation;
    EvalReport report;
};

/// Per class, a seeded shuffle sends floor(n/2) samples to the reference
/// half and the rest to evaluation; the chosen classifier is fit on the
/// reference half and scored on the evaluation half. Throws ProtocolError
/// naming any class with fewer than 2 samples.
HalfSplitResult half_split_evaluate(const Matrix& embeddings, std::span<const std::size_t> labels,
                                    const std::vector<std::string>& class_names, ClassifierMode mode,
                                    std::size_t k, std::uint64_t seed);

} // namespace tembed
