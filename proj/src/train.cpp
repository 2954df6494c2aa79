#include "tembed/train.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/metrics.hpp"
#include "tembed/parallel.hpp"
#include "tembed/tsv.hpp"

namespace tembed {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
    if (batches_per_iteration < 1) throw std::invalid_argument("batches per iteration must be at least 1");
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must be in (0, 1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (val_cap < 1) throw std::invalid_argument("validation cap must be at least 1");
}

std::string format_history_tsv(const TrainHistory& history) {
    std::string out = "iteration\tmean_loss\tval_centroid_accuracy";
    for (const auto& n : history.class_names) out += "\tradius_" + n;
    for (const auto& n : history.class_names) out += "\tdrift_" + n;
    out += "\n";
    for (const auto& r : history.records) {
        out += std::to_string(r.iteration) + "\t" + format_double(r.mean_loss) + "\t" +
               format_double(r.val_centroid_accuracy);
        for (double v : r.radius) out += "\t" + format_double(v);
        for (double v : r.drift) out += "\t" + format_double(v);
        out += "\n";
    }
    return out;
}

Matrix prepare_inputs(const Dataset& data, std::size_t side, double pad_value) {
    Matrix inputs(data.samples.size(), side * side);
    parallel_for(data.samples.size(), [&](std::size_t i) {
        const Image img = standardize(data.samples[i].image, side, pad_value);
        std::transform(img.pixels.begin(), img.pixels.end(), inputs.row(i).begin(),
                       [](double v) { return 1.0 - v; });
    });
    return inputs;
}

Matrix embed_rows(const NetworkParams& params, const Matrix& inputs, std::span<const std::size_t> rows) {
    std::vector<std::size_t> all;
    if (rows.empty()) {
        all.resize(inputs.rows);
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        rows = all;
    }
    Matrix out(rows.size(), params.embedding_dim());
    parallel_for(rows.size(), [&](std::size_t i) {
        const auto e = embed(params, inputs.row(rows[i]));
        std::copy(e.begin(), e.end(), out.row(i).begin());
    });
    return out;
}

namespace {

struct BatchWorkspace {
    std::vector<std::array<ForwardCache, 3>> caches;
    std::vector<std::vector<double>> grads;
    std::vector<double> losses;

    void reserve(std::size_t batch, std::size_t n_params) {
        if (caches.size() < batch) caches.resize(batch);
        if (grads.size() < batch) grads.resize(batch);
        for (auto& g : grads) g.resize(n_params);
        losses.resize(batch);
    }
};

double batch_gradient_into(const NetworkParams& params, const Matrix& inputs, std::span<const Triplet> batch,
                           double alpha, std::span<double> grad, BatchWorkspace& ws) {
    if (grad.size() != params.size()) throw StructuralError("batch_gradient: gradient buffer has wrong size");
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    ws.reserve(batch.size(), params.size());

    parallel_for(batch.size(), [&](std::size_t t) {
        auto& caches = ws.caches[t];
        const Triplet& tr = batch[t];
        const auto a = forward(params, inputs.row(tr.anchor), caches[0]);
        const auto p = forward(params, inputs.row(tr.positive), caches[1]);
        const auto n = forward(params, inputs.row(tr.negative), caches[2]);
        ws.losses[t] = triplet_loss(a, p, n, alpha);
        if (ws.losses[t] <= 0.0) return;
        const TripletGrads g = triplet_grads(a, p, n, alpha);
        auto& buf = ws.grads[t];
        std::fill(buf.begin(), buf.end(), 0.0);
        backward(params, caches[0], g.anchor, buf);
        backward(params, caches[1], g.positive, buf);
        backward(params, caches[2], g.negative, buf);
    });

    // Reduce in triplet order so the result does not depend on scheduling.
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        loss += ws.losses[t];
        if (ws.losses[t] <= 0.0) continue;
        const auto& buf = ws.grads[t];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += buf[i];
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= scale;
    return loss * scale;
}

struct Diagnostics {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> labels;
};

Diagnostics diagnostic_rows(const Splits& splits, std::size_t cap) {
    Diagnostics d;
    for (std::size_t c = 0; c < splits.val.size(); ++c) {
        if (splits.val[c].empty()) {
            throw DatasetError("training diagnostics: class '" + splits.seen_names[c] + "' has no validation samples");
        }
        const std::size_t n = std::min(cap, splits.val[c].size());
        for (std::size_t i = 0; i < n; ++i) {
            d.rows.push_back(splits.val[c][i]);
            d.labels.push_back(c);
        }
    }
    return d;
}

} // namespace

double batch_gradient(const NetworkParams& params, const Matrix& inputs, std::span<const Triplet> batch,
                      double alpha, std::span<double> grad) {
    BatchWorkspace ws;
    return batch_gradient_into(params, inputs, batch, alpha, grad, ws);
}

TrainResult train(const TrainConfig& config, const NetworkSpec& spec, const Matrix& inputs, const Splits& splits,
                  const IterationCallback& on_iteration) {
    config.validate();
    if (splits.seen_classes.size() < 2) throw DatasetError("training needs at least 2 seen classes");
    if (inputs.cols != spec.input_side * spec.input_side) {
        throw StructuralError("training inputs do not match the network input size");
    }

    const TripletSampler sampler(splits, config.negatives);
    const Diagnostics diag = diagnostic_rows(splits, config.val_cap);
    const std::size_t n_classes = splits.seen_classes.size();

    TrainResult result{init_params(spec, config.seed), {splits.seen_names, {}}};
    NetworkParams& params = result.params;
    OptimizerState state{config.learning_rate, config.decay, config.momentum, {}};
    Rng rng(config.seed, /*stream=*/0x7219);
    BatchWorkspace ws;
    std::vector<Triplet> batch(config.batch_size);
    std::vector<double> grad(params.size());

    CentroidModel previous =
        fit_centroids(embed_rows(params, inputs, diag.rows), diag.labels, n_classes, splits.seen_names);

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const double alpha = margin_at(config.margin, it);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < config.batches_per_iteration; ++b) {
            for (auto& t : batch) t = sampler.sample(rng);
            try {
                loss_sum += batch_gradient_into(params, inputs, batch, alpha, grad, ws);
                sgd_step(params.values(), grad, state, it);
            } catch (const NumericFault& e) {
                throw NumericFault("iteration " + std::to_string(it + 1) + ", batch " + std::to_string(b + 1) + ": " +
                                   e.what());
            }
        }

        const Matrix val = embed_rows(params, inputs, diag.rows);
        CentroidModel current = fit_centroids(val, diag.labels, n_classes, splits.seen_names);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < val.rows; ++i) correct += predict_centroid(current, val.row(i)) == diag.labels[i];

        IterationRecord rec;
        rec.iteration = it + 1;
        rec.mean_loss = loss_sum / static_cast<double>(config.batches_per_iteration);
        rec.val_centroid_accuracy = static_cast<double>(correct) / static_cast<double>(val.rows);
        rec.radius = cluster_radius(val, diag.labels, n_classes);
        rec.drift = centroid_drift(previous, current);
        previous = std::move(current);
        result.history.records.push_back(rec);
        if (on_iteration) on_iteration(result.history.records.back());
    }
    return result;
}

} // namespace tembed
