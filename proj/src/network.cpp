#include "tembed/network.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/rng.hpp"

namespace tembed {

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
    return {LayerKind::conv, out_channels, kernel, stride, 0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 1, 0}; }
LayerSpec LayerSpec::maxpool(std::size_t window) { return {LayerKind::maxpool, 0, 0, 1, window}; }
LayerSpec LayerSpec::global_avg_pool() { return {LayerKind::global_avg_pool, 0, 0, 1, 0}; }
LayerSpec LayerSpec::dense(std::size_t out_dim) { return {LayerKind::dense, out_dim, 0, 1, 0}; }
LayerSpec LayerSpec::l2_normalize() { return {LayerKind::l2_normalize, 0, 0, 1, 0}; }

std::string LayerSpec::describe() const {
    switch (kind) {
    case LayerKind::conv:
        return "conv(" + std::to_string(units) + "," + std::to_string(kernel) + "," + std::to_string(stride) + ")";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool(" + std::to_string(window) + ")";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense(" + std::to_string(units) + ")";
    case LayerKind::l2_normalize: return "l2_normalize";
    }
    return "unknown";
}

std::vector<Shape> NetworkSpec::shapes() const {
    if (input_side < 1) throw StructuralError("network input side must be positive");
    const std::size_t n = layers.size();
    if (n < 2 || layers[n - 2].kind != LayerKind::dense || layers[n - 1].kind != LayerKind::l2_normalize) {
        throw StructuralError("network must end with dense(D) followed by l2_normalize");
    }

    std::vector<Shape> out{{1, input_side, input_side}};
    for (std::size_t i = 0; i < n; ++i) {
        const Shape in = out.back();
        const LayerSpec& l = layers[i];
        const std::string where = "layer " + std::to_string(i) + " (" + l.describe() + ")";
        Shape next = in;
        switch (l.kind) {
        case LayerKind::conv: {
            if (l.units < 1 || l.kernel < 1 || l.stride < 1) throw StructuralError(where + ": bad parameters");
            const std::size_t h = layers::conv_output_side(in.height, l.kernel, l.stride);
            const std::size_t w = layers::conv_output_side(in.width, l.kernel, l.stride);
            if (h < 1 || w < 1) throw StructuralError(where + ": input too small");
            next = {l.units, h, w};
            break;
        }
        case LayerKind::relu: break;
        case LayerKind::maxpool:
            if (l.window < 1) throw StructuralError(where + ": bad window");
            if (in.height < l.window || in.width < l.window) throw StructuralError(where + ": input too small");
            next = {in.channels, in.height / l.window, in.width / l.window};
            break;
        case LayerKind::global_avg_pool: next = {in.channels, 1, 1}; break;
        case LayerKind::dense:
            if (l.units < 1) throw StructuralError(where + ": bad output width");
            next = {l.units, 1, 1};
            break;
        case LayerKind::l2_normalize:
            if (i != n - 1) throw StructuralError(where + ": l2_normalize must be the last layer");
            break;
        default: throw StructuralError(where + ": unknown layer kind");
        }
        out.push_back(next);
    }
    return out;
}

std::size_t NetworkSpec::embedding_dim() const { return shapes().back().size(); }

std::string NetworkSpec::describe() const {
    std::string s = "input(" + std::to_string(input_side) + ")";
    for (const auto& l : layers) s += "-" + l.describe();
    return s;
}

NetworkSpec default_network(std::size_t input_side, std::size_t embedding_dim) {
    return {input_side,
            {LayerSpec::conv(8, 3), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::conv(16, 3),
             LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::conv(32, 3), LayerSpec::relu(),
             LayerSpec::global_avg_pool(), LayerSpec::dense(embedding_dim), LayerSpec::l2_normalize()}};
}

NetworkParams::NetworkParams(NetworkSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes()) {
    std::size_t offset = 0;
    blocks_.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const Shape in = shapes_[i];
        Block& b = blocks_[i];
        if (l.kind == LayerKind::conv) {
            b.weight_count = l.units * in.channels * l.kernel * l.kernel;
            b.bias_count = l.units;
        } else if (l.kind == LayerKind::dense) {
            b.weight_count = l.units * in.size();
            b.bias_count = l.units;
        }
        b.weight_offset = offset;
        b.bias_offset = offset + b.weight_count;
        offset += b.weight_count + b.bias_count;
    }
    values_.assign(offset, 0.0);
}

std::span<double> NetworkParams::weights(std::size_t layer) {
    const Block& b = blocks_.at(layer);
    return std::span(values_).subspan(b.weight_offset, b.weight_count);
}
std::span<const double> NetworkParams::weights(std::size_t layer) const {
    const Block& b = blocks_.at(layer);
    return std::span(values_).subspan(b.weight_offset, b.weight_count);
}
std::span<double> NetworkParams::bias(std::size_t layer) {
    const Block& b = blocks_.at(layer);
    return std::span(values_).subspan(b.bias_offset, b.bias_count);
}
std::span<const double> NetworkParams::bias(std::size_t layer) const {
    const Block& b = blocks_.at(layer);
    return std::span(values_).subspan(b.bias_offset, b.bias_count);
}

std::uint64_t NetworkParams::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values_) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    NetworkParams params(spec);
    Rng rng(seed, /*stream=*/0x1417);
    const auto& shapes = params.shapes();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (!l.has_params()) continue;
        const std::size_t fan_in =
            l.kind == LayerKind::conv ? shapes[i].channels * l.kernel * l.kernel : shapes[i].size();
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : params.weights(i)) w = rng.uniform(-bound, bound);
    }
    return params;
}

namespace {

void check_finite(std::span<const double> values, std::size_t layer, const LayerSpec& spec) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericFault("non-finite activation in layer " + std::to_string(layer) + " (" + spec.describe() +
                               ")");
        }
    }
}

} // namespace

std::span<const double> forward(const NetworkParams& params, std::span<const double> input, ForwardCache& cache) {
    const auto& spec = params.spec();
    const auto& shapes = params.shapes();
    if (input.size() != shapes[0].size()) {
        throw StructuralError("forward: input has " + std::to_string(input.size()) + " values, network expects " +
                              std::to_string(shapes[0].size()));
    }

    const std::size_t n = spec.layers.size();
    cache.activations.resize(n + 1);
    cache.argmax.resize(n);
    cache.activations[0].assign(input.begin(), input.end());
    check_finite(cache.activations[0], 0, spec.layers[0]);

    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& l = spec.layers[i];
        const auto& in = cache.activations[i];
        auto& out = cache.activations[i + 1];
        out.resize(shapes[i + 1].size());
        switch (l.kind) {
        case LayerKind::conv:
            layers::conv2d_forward(in, shapes[i], params.weights(i), params.bias(i), l.kernel, l.stride, out,
                                   shapes[i + 1]);
            break;
        case LayerKind::relu: layers::relu_forward(in, out); break;
        case LayerKind::maxpool:
            cache.argmax[i].resize(out.size());
            layers::maxpool_forward(in, shapes[i], l.window, out, shapes[i + 1], cache.argmax[i]);
            break;
        case LayerKind::global_avg_pool: layers::global_avg_pool_forward(in, shapes[i], out); break;
        case LayerKind::dense: layers::dense_forward(in, params.weights(i), params.bias(i), out); break;
        case LayerKind::l2_normalize:
            check_finite(in, i, l);
            try {
                layers::l2_normalize_forward(in, out);
            } catch (const NumericFault& e) {
                throw NumericFault("layer " + std::to_string(i) + " (l2_normalize): " + e.what());
            }
            break;
        }
        check_finite(out, i, l);
    }
    return cache.activations[n];
}

std::vector<double> embed(const NetworkParams& params, std::span<const double> input) {
    ForwardCache cache;
    const auto e = forward(params, input, cache);
    return {e.begin(), e.end()};
}

void backward(const NetworkParams& params, ForwardCache& cache, std::span<const double> upstream,
              std::span<double> grads) {
    const auto& spec = params.spec();
    const auto& shapes = params.shapes();
    const std::size_t n = spec.layers.size();
    if (cache.activations.size() != n + 1 || cache.activations[n].size() != shapes[n].size()) {
        throw StructuralError("backward: cache does not come from a forward pass of this network");
    }
    if (upstream.size() != shapes[n].size()) throw StructuralError("backward: upstream gradient has wrong size");
    if (grads.size() != params.size()) throw StructuralError("backward: gradient buffer has wrong size");

    auto& g_out = cache.grad_a;
    auto& g_in = cache.grad_b;
    g_out.assign(upstream.begin(), upstream.end());

    for (std::size_t i = n; i-- > 0;) {
        const LayerSpec& l = spec.layers[i];
        const auto& in = cache.activations[i];
        // The input image needs no gradient.
        const bool need_input_grad = i > 0;
        g_in.resize(need_input_grad ? shapes[i].size() : 0);
        switch (l.kind) {
        case LayerKind::l2_normalize: l2_normalize_backward(in, g_out, g_in); break;
        case LayerKind::dense: {
            auto gw = grads.subspan(params.weights(i).data() - params.values().data(), params.weights(i).size());
            auto gb = grads.subspan(params.bias(i).data() - params.values().data(), params.bias(i).size());
            layers::dense_backward(in, params.weights(i), g_out, gw, gb, g_in);
            break;
        }
        case LayerKind::global_avg_pool:
            if (need_input_grad) layers::global_avg_pool_backward(g_out, shapes[i], g_in);
            break;
        case LayerKind::relu:
            if (need_input_grad) layers::relu_backward(cache.activations[i + 1], g_out, g_in);
            break;
        case LayerKind::maxpool:
            if (need_input_grad) layers::maxpool_backward(g_out, cache.argmax[i], g_in);
            break;
        case LayerKind::conv: {
            auto gw = grads.subspan(params.weights(i).data() - params.values().data(), params.weights(i).size());
            auto gb = grads.subspan(params.bias(i).data() - params.values().data(), params.bias(i).size());
            layers::conv2d_backward(in, shapes[i], params.weights(i), l.kernel, l.stride, g_out, shapes[i + 1], gw,
                                    gb, g_in);
            break;
        }
        }
        std::swap(g_out, g_in);
    }
}

double OptimizerState::learning_rate(std::size_t iteration) const {
    return learning_rate_initial * std::pow(decay, static_cast<double>(iteration));
}

void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              std::size_t iteration) {
    if (grads.size() != params.size()) throw StructuralError("sgd_step: gradient size does not match parameters");
    if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
    if (state.velocity.size() != params.size()) throw StructuralError("sgd_step: velocity size does not match");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericFault("sgd_step: non-finite gradient at parameter " + std::to_string(i));
        }
    }
    const double lr = state.learning_rate(iteration);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.velocity[i] = state.momentum * state.velocity[i] - lr * grads[i];
        params[i] += state.velocity[i];
    }
}

GradientCheckResult gradient_check(std::span<const double> params,
                                   const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> analytic, double epsilon) {
    if (analytic.size() != params.size()) throw StructuralError("gradient_check: gradient size mismatch");
    if (!(epsilon >= 1e-8 && epsilon <= 1e-3)) throw std::invalid_argument("gradient_check: epsilon outside [1e-8, 1e-3]");

    std::vector<double> probe(params.begin(), params.end());
    auto eval = [&] {
        const double v = loss(probe);
        if (!std::isfinite(v)) throw NumericFault("gradient_check: non-finite loss");
        return v;
    };

    GradientCheckResult result;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + epsilon;
        const double up = eval();
        probe[i] = saved - epsilon;
        const double down = eval();
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > result.max_relative_error || i == 0) {
            result = {std::max(rel, result.max_relative_error), i, analytic[i], numeric};
        }
    }
    return result;
}

} // namespace tembed
