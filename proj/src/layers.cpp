#include "tembed/layers.hpp"

#include <algorithm>
#include <cmath>

#include "tembed/error.hpp"

namespace tembed {
namespace layers {

namespace {

// Output positions o with 0 <= o * stride + offset < extent, as [lo, hi).
struct Range {
    std::size_t lo;
    std::size_t hi;
};

Range valid_range(std::ptrdiff_t offset, std::size_t extent, std::size_t stride, std::size_t out_extent) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    std::ptrdiff_t lo = 0;
    if (offset < 0) lo = (-offset + s - 1) / s;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(extent) - 1 - offset;
    std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
    if (hi < lo) hi = lo;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

} // namespace

std::size_t conv_output_side(std::size_t in_side, std::size_t kernel, std::size_t stride) {
    const std::size_t pad = (kernel - 1) / 2;
    if (in_side + 2 * pad < kernel) return 0;
    return (in_side + 2 * pad - kernel) / stride + 1;
}

void conv2d_forward(std::span<const double> in, Shape in_shape, std::span<const double> weights,
                    std::span<const double> bias, std::size_t kernel, std::size_t stride, std::span<double> out,
                    Shape out_shape) {
    const auto pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
    const std::size_t in_plane = in_shape.height * in_shape.width;
    const std::size_t out_plane = out_shape.height * out_shape.width;

    for (std::size_t oc = 0; oc < out_shape.channels; ++oc) {
        double* dst_plane = out.data() + oc * out_plane;
        std::fill_n(dst_plane, out_plane, bias[oc]);
        for (std::size_t ic = 0; ic < in_shape.channels; ++ic) {
            const double* src_plane = in.data() + ic * in_plane;
            const double* w = weights.data() + (oc * in_shape.channels + ic) * kernel * kernel;
            for (std::size_t ky = 0; ky < kernel; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const Range ry = valid_range(dy, in_shape.height, stride, out_shape.height);
                for (std::size_t kx = 0; kx < kernel; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const Range rx = valid_range(dx, in_shape.width, stride, out_shape.width);
                    const double wv = w[ky * kernel + kx];
                    const std::size_t n = rx.hi - rx.lo;
                    const auto col0 = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(rx.lo * stride) + dx);
                    for (std::size_t y = ry.lo; y < ry.hi; ++y) {
                        const auto row = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y * stride) + dy);
                        const double* src = src_plane + row * in_shape.width + col0;
                        double* dst = dst_plane + y * out_shape.width + rx.lo;
                        if (stride == 1) {
                            for (std::size_t i = 0; i < n; ++i) dst[i] += wv * src[i];
                        } else {
                            for (std::size_t i = 0; i < n; ++i) dst[i] += wv * src[i * stride];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward(std::span<const double> in, Shape in_shape, std::span<const double> weights,
                     std::size_t kernel, std::size_t stride, std::span<const double> grad_out, Shape out_shape,
                     std::span<double> grad_weights, std::span<double> grad_bias, std::span<double> grad_in) {
    const auto pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
    const std::size_t in_plane = in_shape.height * in_shape.width;
    const std::size_t out_plane = out_shape.height * out_shape.width;
    const bool want_input_grad = !grad_in.empty();
    if (want_input_grad) std::fill(grad_in.begin(), grad_in.end(), 0.0);

    for (std::size_t oc = 0; oc < out_shape.channels; ++oc) {
        const double* g_plane = grad_out.data() + oc * out_plane;
        double gb = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) gb += g_plane[i];
        grad_bias[oc] += gb;

        for (std::size_t ic = 0; ic < in_shape.channels; ++ic) {
            const double* src_plane = in.data() + ic * in_plane;
            double* gin_plane = want_input_grad ? grad_in.data() + ic * in_plane : nullptr;
            const std::size_t wbase = (oc * in_shape.channels + ic) * kernel * kernel;
            for (std::size_t ky = 0; ky < kernel; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                const Range ry = valid_range(dy, in_shape.height, stride, out_shape.height);
                for (std::size_t kx = 0; kx < kernel; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const Range rx = valid_range(dx, in_shape.width, stride, out_shape.width);
                    const double wv = weights[wbase + ky * kernel + kx];
                    const std::size_t n = rx.hi - rx.lo;
                    const auto col0 = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(rx.lo * stride) + dx);
                    double gw = 0.0;
                    for (std::size_t y = ry.lo; y < ry.hi; ++y) {
                        const auto row = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y * stride) + dy);
                        const std::size_t in_at = row * in_shape.width + col0;
                        const double* src = src_plane + in_at;
                        const double* g = g_plane + y * out_shape.width + rx.lo;
                        if (stride == 1) {
                            for (std::size_t i = 0; i < n; ++i) gw += g[i] * src[i];
                            if (gin_plane) {
                                double* gin = gin_plane + in_at;
                                for (std::size_t i = 0; i < n; ++i) gin[i] += wv * g[i];
                            }
                        } else {
                            for (std::size_t i = 0; i < n; ++i) gw += g[i] * src[i * stride];
                            if (gin_plane) {
                                double* gin = gin_plane + in_at;
                                for (std::size_t i = 0; i < n; ++i) gin[i * stride] += wv * g[i];
                            }
                        }
                    }
                    grad_weights[wbase + ky * kernel + kx] += gw;
                }
            }
        }
    }
}

void relu_forward(std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::span<const double> out, std::span<const double> grad_out, std::span<double> grad_in) {
    for (std::size_t i = 0; i < out.size(); ++i) grad_in[i] = out[i] > 0.0 ? grad_out[i] : 0.0;
}

void maxpool_forward(std::span<const double> in, Shape in_shape, std::size_t window, std::span<double> out,
                     Shape out_shape, std::span<std::uint32_t> argmax) {
    for (std::size_t c = 0; c < out_shape.channels; ++c) {
        for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
            for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
                std::size_t best = (c * in_shape.height + oy * window) * in_shape.width + ox * window;
                for (std::size_t wy = 0; wy < window; ++wy) {
                    const std::size_t row = (c * in_shape.height + oy * window + wy) * in_shape.width + ox * window;
                    for (std::size_t wx = 0; wx < window; ++wx) {
                        if (in[row + wx] > in[best]) best = row + wx;
                    }
                }
                const std::size_t o = (c * out_shape.height + oy) * out_shape.width + ox;
                out[o] = in[best];
                argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
}

void maxpool_backward(std::span<const double> grad_out, std::span<const std::uint32_t> argmax,
                      std::span<double> grad_in) {
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[argmax[o]] += grad_out[o];
}

void global_avg_pool_forward(std::span<const double> in, Shape in_shape, std::span<double> out) {
    const std::size_t plane = in_shape.height * in_shape.width;
    for (std::size_t c = 0; c < in_shape.channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += in[c * plane + i];
        out[c] = s / static_cast<double>(plane);
    }
}

void global_avg_pool_backward(std::span<const double> grad_out, Shape in_shape, std::span<double> grad_in) {
    const std::size_t plane = in_shape.height * in_shape.width;
    for (std::size_t c = 0; c < in_shape.channels; ++c) {
        const double g = grad_out[c] / static_cast<double>(plane);
        std::fill_n(grad_in.data() + c * plane, plane, g);
    }
}

void dense_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out) {
    const std::size_t n = in.size();
    for (std::size_t o = 0; o < out.size(); ++o) {
        const double* w = weights.data() + o * n;
        double s = bias[o];
        for (std::size_t i = 0; i < n; ++i) s += w[i] * in[i];
        out[o] = s;
    }
}

void dense_backward(std::span<const double> in, std::span<const double> weights, std::span<const double> grad_out,
                    std::span<double> grad_weights, std::span<double> grad_bias, std::span<double> grad_in) {
    const std::size_t n = in.size();
    if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < grad_out.size(); ++o) {
        const double g = grad_out[o];
        grad_bias[o] += g;
        double* gw = grad_weights.data() + o * n;
        for (std::size_t i = 0; i < n; ++i) gw[i] += g * in[i];
        if (!grad_in.empty()) {
            const double* w = weights.data() + o * n;
            for (std::size_t i = 0; i < n; ++i) grad_in[i] += g * w[i];
        }
    }
}

double l2_normalize_forward(std::span<const double> x, std::span<double> out) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double norm = std::sqrt(ss);
    if (!(norm > kMinNormalizableNorm)) {
        throw NumericFault("l2_normalize: vector norm " + std::to_string(norm) + " is too small to normalize");
    }
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / norm;
    return norm;
}

} // namespace layers

void l2_normalize_backward(std::span<const double> x, std::span<const double> upstream, std::span<double> grad_x) {
    if (x.size() != upstream.size() || x.size() != grad_x.size()) {
        throw StructuralError("l2_normalize_backward: dimension mismatch");
    }
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double norm = std::sqrt(ss);
    if (!(norm > kMinNormalizableNorm)) {
        throw NumericFault("l2_normalize_backward: vector norm " + std::to_string(norm) + " is too small");
    }
    double radial = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) radial += (x[i] / norm) * upstream[i];
    for (std::size_t i = 0; i < x.size(); ++i) grad_x[i] = (upstream[i] - (x[i] / norm) * radial) / norm;
}

} // namespace tembed
