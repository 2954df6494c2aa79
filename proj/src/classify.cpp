#include "tembed/classify.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/parallel.hpp"
#include "tembed/rng.hpp"

namespace tembed {

CentroidModel fit_centroids(const Matrix& embeddings, std::span<const std::size_t> labels, std::size_t n_classes,
                            std::vector<std::string> class_names) {
    if (n_classes == 0) throw StructuralError("fit_centroids: empty class list");
    if (labels.size() != embeddings.rows) throw StructuralError("fit_centroids: label count does not match rows");
    if (class_names.empty()) {
        for (std::size_t c = 0; c < n_classes; ++c) class_names.push_back(std::to_string(c));
    }
    if (class_names.size() != n_classes) throw StructuralError("fit_centroids: class name count mismatch");

    CentroidModel model{std::move(class_names), Matrix(n_classes, embeddings.cols)};
    std::vector<std::size_t> count(n_classes, 0);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        if (labels[i] >= n_classes) throw StructuralError("fit_centroids: label outside class range");
        auto c = model.centroids.row(labels[i]);
        const auto e = embeddings.row(i);
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += e[d];
        ++count[labels[i]];
    }
    for (std::size_t k = 0; k < n_classes; ++k) {
        if (count[k] == 0) throw StructuralError("fit_centroids: class '" + model.class_names[k] + "' has no members");
        for (double& v : model.centroids.row(k)) v /= static_cast<double>(count[k]);
    }
    return model;
}

std::size_t predict_centroid(const CentroidModel& model, std::span<const double> e) {
    if (e.size() != model.centroids.cols) throw StructuralError("predict_centroid: dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.centroids.rows; ++c) {
        const double d = squared_distance(e, model.centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

KnnModel fit_knn(const Matrix& embeddings, std::span<const std::size_t> labels, std::size_t k, std::size_t leaf_size) {
    if (labels.size() != embeddings.rows) throw StructuralError("fit_knn: label count does not match rows");
    if (k < 1) throw std::invalid_argument("fit_knn: k must be at least 1");
    if (k > embeddings.rows) throw std::invalid_argument("fit_knn: k exceeds the reference count");
    return {std::make_shared<const BallTree>(embeddings, leaf_size), {labels.begin(), labels.end()}, k};
}

std::size_t majority_vote(std::span<const std::size_t> neighbor_labels) {
    if (neighbor_labels.empty()) throw std::invalid_argument("majority_vote: no neighbors");
    // Few distinct labels among k neighbors: linear scans are enough.
    std::vector<std::pair<std::size_t, std::size_t>> tally; // (label, votes) in order of first appearance
    for (std::size_t label : neighbor_labels) {
        auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return t.first == label; });
        if (it == tally.end()) {
            tally.emplace_back(label, 1);
        } else {
            ++it->second;
        }
    }
    // First appearance order is nearest-neighbor order, so the first maximum wins ties.
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

std::size_t predict_knn(const KnnModel& model, std::span<const double> e) {
    const auto neighbors = model.index->query(e, model.k);
    std::vector<std::size_t> labels;
    labels.reserve(neighbors.size());
    for (const auto& n : neighbors) labels.push_back(model.labels[n.index]);
    return majority_vote(labels);
}

std::string_view to_string(ClassifierMode mode) { return mode == ClassifierMode::centroid ? "centroid" : "knn"; }

ClassifierMode parse_classifier_mode(std::string_view s) {
    if (s == "centroid") return ClassifierMode::centroid;
    if (s == "knn") return ClassifierMode::knn;
    throw std::invalid_argument("unknown classifier mode '" + std::string(s) + "'");
}

HalfSplitResult half_split_evaluate(const Matrix& embeddings, std::span<const std::size_t> labels,
                                    const std::vector<std::string>& class_names, ClassifierMode mode,
                                    std::size_t k, std::uint64_t seed) {
    const std::size_t C = class_names.size();
    if (labels.size() != embeddings.rows) throw StructuralError("half_split_evaluate: label count does not match rows");
    std::vector<std::vector<std::size_t>> members(C);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= C) throw StructuralError("half_split_evaluate: label outside class table");
        members[labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < C; ++c) {
        if (members[c].size() < 2) {
            throw ProtocolError("half-split evaluation: class '" + class_names[c] + "' has " +
                                std::to_string(members[c].size()) + " sample(s), needs at least 2");
        }
    }

    HalfSplitResult result;
    Rng rng(seed, /*stream=*/0x4a1f);
    for (std::size_t c = 0; c < C; ++c) {
        auto m = members[c];
        rng.shuffle(std::span(m));
        const std::size_t half = m.size() / 2;
        result.reference.insert(result.reference.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(half));
        result.evaluation.insert(result.evaluation.end(), m.begin() + static_cast<std::ptrdiff_t>(half), m.end());
    }

    Matrix ref(result.reference.size(), embeddings.cols);
    std::vector<std::size_t> ref_labels(result.reference.size());
    for (std::size_t i = 0; i < result.reference.size(); ++i) {
        const auto src = embeddings.row(result.reference[i]);
        std::copy(src.begin(), src.end(), ref.row(i).begin());
        ref_labels[i] = labels[result.reference[i]];
    }

    std::vector<std::size_t> predicted(result.evaluation.size());
    if (mode == ClassifierMode::centroid) {
        const auto model = fit_centroids(ref, ref_labels, C, class_names);
        parallel_for(predicted.size(), [&](std::size_t i) {
            predicted[i] = predict_centroid(model, embeddings.row(result.evaluation[i]));
        });
    } else {
        const auto model = fit_knn(ref, ref_labels, k);
        parallel_for(predicted.size(), [&](std::size_t i) {
            predicted[i] = predict_knn(model, embeddings.row(result.evaluation[i]));
        });
    }

    ConfusionMatrix cm(class_names);
    for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(labels[result.evaluation[i]], predicted[i]);
    result.report = scores(cm);
    return result;
}

} // namespace tembed
