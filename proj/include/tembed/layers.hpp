#pragma once

// Forward and backward kernels for the individual layer kinds. All tensors
// are channel-major (c, y, x) contiguous spans. Backward kernels accumulate
// (+=) into parameter gradients and overwrite input gradients.

#include <cstddef>
#include <cstdint>
#include <span>

namespace tembed {

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }
    bool operator==(const Shape&) const = default;
};

namespace layers {

/// Zero padding of (kernel - 1) / 2 on every side.
std::size_t conv_output_side(std::size_t in_side, std::size_t kernel, std::size_t stride);

void conv2d_forward(std::span<const double> in, Shape in_shape, std::span<const double> weights,
                    std::span<const double> bias, std::size_t kernel, std::size_t stride, std::span<double> out,
                    Shape out_shape);

/// grad_in may be empty when the input gradient is not needed.
void conv2d_backward(std::span<const double> in, Shape in_shape, std::span<const double> weights,
                     std::size_t kernel, std::size_t stride, std::span<const double> grad_out, Shape out_shape,
                     std::span<double> grad_weights, std::span<double> grad_bias, std::span<double> grad_in);

void relu_forward(std::span<const double> in, std::span<double> out);
void relu_backward(std::span<const double> out, std::span<const double> grad_out, std::span<double> grad_in);

/// Non-overlapping window x window pooling; ties resolve to the first maximum.
void maxpool_forward(std::span<const double> in, Shape in_shape, std::size_t window, std::span<double> out,
                     Shape out_shape, std::span<std::uint32_t> argmax);
void maxpool_backward(std::span<const double> grad_out, std::span<const std::uint32_t> argmax,
                      std::span<double> grad_in);

void global_avg_pool_forward(std::span<const double> in, Shape in_shape, std::span<double> out);
void global_avg_pool_backward(std::span<const double> grad_out, Shape in_shape, std::span<double> grad_in);

/// out = W in + b with W stored row-major (out_dim x in_dim).
void dense_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                   std::span<double> out);
void dense_backward(std::span<const double> in, std::span<const double> weights, std::span<const double> grad_out,
                    std::span<double> grad_weights, std::span<double> grad_bias, std::span<double> grad_in);

/// Writes x / |x| to out and returns |x|. Throws NumericFault when |x| <= 1e-12.
double l2_normalize_forward(std::span<const double> x, std::span<double> out);

} // namespace layers

inline constexpr double kMinNormalizableNorm = 1e-12;

/// Gradient of y = x / |x| pulled back to x: (I - y y^T) upstream / |x|.
void l2_normalize_backward(std::span<const double> x, std::span<const double> upstream, std::span<double> grad_x);

} // namespace tembed
