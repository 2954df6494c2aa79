#include "tembed/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "tembed/classify.hpp"
#include "tembed/error.hpp"
#include "tembed/tsv.hpp"

namespace tembed {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
    if (truth >= classes() || predicted >= classes()) throw StructuralError("confusion: class index out of range");
    counts_[truth * classes() + predicted] += n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes(); ++p) s += at(truth, p);
    return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < classes(); ++t) s += at(t, predicted);
    return s;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::vector<double> cluster_radius(const Matrix& embeddings, std::span<const std::size_t> labels,
                                   std::size_t n_classes) {
    const CentroidModel model = fit_centroids(embeddings, labels, n_classes);
    std::vector<double> sum(n_classes, 0.0);
    std::vector<std::size_t> count(n_classes, 0);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        sum[labels[i]] += euclidean_distance(embeddings.row(i), model.centroids.row(labels[i]));
        ++count[labels[i]];
    }
    for (std::size_t c = 0; c < n_classes; ++c) sum[c] /= static_cast<double>(count[c]);
    return sum;
}

std::vector<double> centroid_drift(const CentroidModel& prev, const CentroidModel& curr) {
    if (prev.class_names != curr.class_names || prev.centroids.rows != curr.centroids.rows ||
        prev.centroids.cols != curr.centroids.cols) {
        throw StructuralError("centroid_drift: class tables or dimensions differ");
    }
    std::vector<double> drift(prev.centroids.rows);
    for (std::size_t c = 0; c < drift.size(); ++c) {
        drift[c] = euclidean_distance(prev.centroids.row(c), curr.centroids.row(c));
    }
    return drift;
}

EvalReport scores(const ConfusionMatrix& cm, std::size_t n_confoundings) {
    const std::size_t C = cm.classes();
    EvalReport r;
    r.confusion = cm;
    r.precision.assign(C, 0.0);
    r.recall.assign(C, 0.0);
    r.f1.assign(C, 0.0);
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const auto tp = cm.at(c, c);
        trace += tp;
        const auto col = cm.column_sum(c);
        const auto row = cm.row_sum(c);
        r.precision[c] = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        r.recall[c] = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
    }
    const auto total = cm.total();
    r.accuracy = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    r.macro_f1 = C ? std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / static_cast<double>(C) : 0.0;
    r.confoundings = top_confoundings(cm, n_confoundings);
    return r;
}

std::vector<Confounding> top_confoundings(const ConfusionMatrix& cm, std::size_t n) {
    std::vector<Confounding> all;
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        const auto row = cm.row_sum(t);
        if (row == 0) continue;
        for (std::size_t p = 0; p < cm.classes(); ++p) {
            if (p == t || cm.at(t, p) == 0) continue;
            all.push_back({t, p, static_cast<double>(cm.at(t, p)) / static_cast<double>(row)});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Confounding& a, const Confounding& b) {
        if (a.rate != b.rate) return a.rate > b.rate;
        if (a.true_class != b.true_class) return a.true_class < b.true_class;
        return a.predicted_class < b.predicted_class;
    });
    if (all.size() > n) all.resize(n);
    return all;
}

std::string format_report_tsv(const EvalReport& report) {
    const auto& cm = report.confusion;
    const auto& names = cm.class_names();
    std::string out = "#confusion\ntrue\\predicted";
    for (const auto& n : names) out += "\t" + n;
    out += "\n";
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        out += names[t];
        for (std::size_t p = 0; p < cm.classes(); ++p) out += "\t" + std::to_string(cm.at(t, p));
        out += "\n";
    }
    out += "#per_class\nclass\tprecision\trecall\tf1\n";
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        out += names[c] + "\t" + format_double(report.precision[c]) + "\t" + format_double(report.recall[c]) + "\t" +
               format_double(report.f1[c]) + "\n";
    }
    out += "#summary\naccuracy\t" + format_double(report.accuracy) + "\nmacro_f1\t" + format_double(report.macro_f1) +
           "\n";
    out += "#confoundings\ntrue\tpredicted\trate\n";
    for (const auto& c : report.confoundings) {
        out += names[c.true_class] + "\t" + names[c.predicted_class] + "\t" + format_fixed(c.rate, 3) + "\n";
    }
    return out;
}

std::map<std::string, std::vector<std::vector<std::string>>> parse_tsv_sections(std::string_view text) {
    std::map<std::string, std::vector<std::vector<std::string>>> sections;
    std::vector<std::vector<std::string>>* current = nullptr;
    for (auto line : split_lines(text)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            current = &sections[std::string(line.substr(1))];
            continue;
        }
        if (!current) throw std::invalid_argument("TSV row before the first #section header");
        std::vector<std::string> row;
        for (auto f : split_tabs(line)) row.emplace_back(f);
        current->push_back(std::move(row));
    }
    return sections;
}

} // namespace tembed
