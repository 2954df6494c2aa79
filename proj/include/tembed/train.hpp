#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tembed/classify.hpp"
#include "tembed/dataset.hpp"
#include "tembed/matrix.hpp"
#include "tembed/network.hpp"
#include "tembed/triplet.hpp"

namespace tembed {

struct TrainConfig {
    std::size_t batch_size = 20;
    /// Batches making up one "iteration"; margin and learning rate are indexed by iteration.
    std::size_t batches_per_iteration = 100;
    std::size_t iterations = 40;
    MarginSchedule margin = MarginSchedule::standard();
    double learning_rate = 0.01;
    double decay = 0.9;
    double momentum = 0.0;
    std::uint64_t seed = 1;
    /// Validation samples per class used for the per-iteration diagnostics.
    std::size_t val_cap = 50;
    NegativeSampling negatives = NegativeSampling::sample_uniform;

    void validate() const;
};

struct IterationRecord {
    std::size_t iteration = 0; // 1-based
    double mean_loss = 0.0;
    double val_centroid_accuracy = 0.0;
    std::vector<double> radius;
    std::vector<double> drift;

    bool operator==(const IterationRecord&) const = default;
};

struct TrainHistory {
    std::vector<std::string> class_names;
    std::vector<IterationRecord> records;

    bool operator==(const TrainHistory&) const = default;
};

/// Columns: iteration, mean_loss, val_centroid_accuracy, radius_<class>...,
/// drift_<class>...
std::string format_history_tsv(const TrainHistory& history);

struct TrainResult {
    NetworkParams params;
    TrainHistory history;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Standardizes every sample to side x side, one row per sample. Rows hold
/// ink (1 - intensity) so the bright background maps to zero.
Matrix prepare_inputs(const Dataset& data, std::size_t side, double pad_value = kDefaultPadValue);

/// Embeds the given input rows (all rows when `rows` is empty).
Matrix embed_rows(const NetworkParams& params, const Matrix& inputs, std::span<const std::size_t> rows = {});

/// Mean triplet-loss gradient of a batch, accumulated over the three shared
/// branches of every triplet. Returns the mean loss.
double batch_gradient(const NetworkParams& params, const Matrix& inputs, std::span<const Triplet> batch,
                      double alpha, std::span<double> grad);

/// Random-triplet SGD on the seen classes' training lists. After each
/// iteration, records the mean loss plus per-class cluster radius, centroid
/// drift, and closest-centroid accuracy on (up to val_cap per class)
/// validation samples.
TrainResult train(const TrainConfig& config, const NetworkSpec& spec, const Matrix& inputs, const Splits& splits,
                  const IterationCallback& on_iteration = {});

} // namespace tembed
