#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tembed/layers.hpp"

namespace tembed {

enum class LayerKind : std::uint8_t {
    conv = 1,
    relu = 2,
    maxpool = 3,
    global_avg_pool = 4,
    dense = 5,
    l2_normalize = 6,
};

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t units = 0;  // conv output channels or dense output width
    std::size_t kernel = 0; // conv kernel side
    std::size_t stride = 1; // conv stride
    std::size_t window = 0; // maxpool window (also its stride)

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
    static LayerSpec relu();
    static LayerSpec maxpool(std::size_t window);
    static LayerSpec global_avg_pool();
    static LayerSpec dense(std::size_t out_dim);
    static LayerSpec l2_normalize();

    std::string describe() const;
    bool has_params() const { return kind == LayerKind::conv || kind == LayerKind::dense; }
    bool operator==(const LayerSpec&) const = default;
};

/// Layer chain applied to a 1-channel input_side x input_side image.
struct NetworkSpec {
    std::size_t input_side = 32;
    std::vector<LayerSpec> layers;

    /// Activation shapes: [0] is the input, [i + 1] the output of layer i.
    /// Throws StructuralError unless the chain is consistent and ends with
    /// dense(D) followed by l2_normalize.
    std::vector<Shape> shapes() const;
    std::size_t embedding_dim() const;
    std::string describe() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// conv(8,3)-relu-maxpool(2)-conv(16,3)-relu-maxpool(2)-conv(32,3)-relu-gap-dense(D)-l2.
NetworkSpec default_network(std::size_t input_side, std::size_t embedding_dim = 128);

/// All trainable values in one flat array, laid out layer by layer as
/// weights then bias. Conv weights are (out, in, ky, kx); dense weights are
/// (out, in) row-major.
class NetworkParams {
public:
    NetworkParams() = default;
    explicit NetworkParams(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<Shape>& shapes() const { return shapes_; }
    std::size_t embedding_dim() const { return shapes_.back().size(); }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    /// Empty spans for layers without parameters.
    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> bias(std::size_t layer);
    std::span<const double> bias(std::size_t layer) const;

    /// FNV-1a over the raw bytes of every value.
    std::uint64_t checksum() const;

    bool operator==(const NetworkParams& other) const { return spec_ == other.spec_ && values_ == other.values_; }

private:
    struct Block {
        std::size_t weight_offset = 0;
        std::size_t weight_count = 0;
        std::size_t bias_offset = 0;
        std::size_t bias_count = 0;
    };

    NetworkSpec spec_;
    std::vector<Shape> shapes_;
    std::vector<Block> blocks_;
    std::vector<double> values_;
};

/// He-style uniform weights, bound sqrt(6 / fan_in); zero biases.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Per-call activation storage; reuse across calls to avoid reallocation.
struct ForwardCache {
    std::vector<std::vector<double>> activations;   // [0] input, [i + 1] output of layer i
    std::vector<std::vector<std::uint32_t>> argmax; // maxpool layers only
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

/// Runs the network and returns a view of the unit-norm embedding held in
/// `cache`. Throws NumericFault naming the layer on non-finite activations
/// or a vanishing pre-normalization vector.
std::span<const double> forward(const NetworkParams& params, std::span<const double> input, ForwardCache& cache);

std::vector<double> embed(const NetworkParams& params, std::span<const double> input);

/// Accumulates (+=) into `grads` the gradient of <upstream, embedding> with
/// respect to every parameter, using the activations left in `cache` by the
/// matching forward call.
void backward(const NetworkParams& params, ForwardCache& cache, std::span<const double> upstream,
              std::span<double> grads);

struct OptimizerState {
    double learning_rate_initial = 0.01;
    double decay = 0.9;
    double momentum = 0.0;
    std::vector<double> velocity;

    double learning_rate(std::size_t iteration) const;
};

/// v <- momentum * v - lr_t * g; p <- p + v, with lr_t = lr0 * decay^iteration.
void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              std::size_t iteration);

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares `analytic` with central differences (L(p + eps) - L(p - eps)) / 2eps
/// for every coordinate. Relative error uses max(|analytic|, |numeric|, 1e-8)
/// as denominator.
GradientCheckResult gradient_check(std::span<const double> params,
                                   const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> analytic, double epsilon);

} // namespace tembed
