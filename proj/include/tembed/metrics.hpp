#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tembed/matrix.hpp"

namespace tembed {

struct CentroidModel;

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names);

    std::size_t classes() const { return names_.size(); }
    const std::vector<std::string>& class_names() const { return names_; }

    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes() + predicted]; }
    void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);

    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t column_sum(std::size_t predicted) const;
    std::uint64_t total() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;
};

struct Confounding {
    std::size_t true_class = 0;
    std::size_t predicted_class = 0;
    double rate = 0.0;

    bool operator==(const Confounding&) const = default;
};

struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<Confounding> confoundings;
};

/// Mean Euclidean distance of each class's members to their centroid.
std::vector<double> cluster_radius(const Matrix& embeddings, std::span<const std::size_t> labels,
                                   std::size_t n_classes);

/// Per-class distance between matching centroids.
std::vector<double> centroid_drift(const CentroidModel& prev, const CentroidModel& curr);

inline constexpr std::size_t kDefaultConfoundings = 10;

/// Precision, recall and F1 per class (0/0 taken as 0), accuracy, macro-F1,
/// and the top confoundings.
EvalReport scores(const ConfusionMatrix& cm, std::size_t n_confoundings = kDefaultConfoundings);

/// Off-diagonal cells with nonzero count, rate = count / row sum, the n
/// largest rates descending; ties ordered by (true, predicted) index.
std::vector<Confounding> top_confoundings(const ConfusionMatrix& cm, std::size_t n);

/// Sections #confusion, #per_class, #summary, #confoundings. Rates in the
/// confoundings section have 3 decimals; every other real is written in
/// shortest round-trip form.
std::string format_report_tsv(const EvalReport& report);

/// Rows of each `#name` section, split on tabs (header rows included).
std::map<std::string, std::vector<std::vector<std::string>>> parse_tsv_sections(std::string_view text);

} // namespace tembed
