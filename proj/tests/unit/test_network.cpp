#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "tembed/checkpoint.hpp"
#include "tembed/error.hpp"
#include "tembed/layers.hpp"
#include "tembed/network.hpp"
#include "tembed/triplet.hpp"

using namespace tembed;

namespace {

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// Scalar probe <c, f(x)> for checking a vector-valued kernel's input gradient.
template <class F>
std::vector<double> numeric_input_grad(std::vector<double> x, std::span<const double> c, F f, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const auto up = f(x);
        x[i] = orig - eps;
        const auto down = f(x);
        x[i] = orig;
        double d = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) d += c[j] * (up[j] - down[j]);
        g[i] = d / (2 * eps);
    }
    return g;
}

double max_rel_error(std::span<const double> a, std::span<const double> n) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(n[i]), 1e-8});
        worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
    }
    return worst;
}

NetworkSpec dense_only(std::size_t side, std::size_t dim) {
    return {side, {LayerSpec::global_avg_pool(), LayerSpec::dense(dim), LayerSpec::l2_normalize()}};
}

} // namespace

TEST_CASE("l2_normalize_backward passes tangential and removes radial gradients") {
    std::vector<double> g(2);
    const std::vector<double> x{1, 0};
    l2_normalize_backward(x, std::vector<double>{0, 1}, g);
    CHECK(g == std::vector<double>{0, 1});
    l2_normalize_backward(x, std::vector<double>{1, 0}, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
}

TEST_CASE("l2_normalize_backward matches finite differences") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = testing::random_vector(rng, 7);
        const auto up = testing::random_vector(rng, 7);
        std::vector<double> analytic(7);
        l2_normalize_backward(x, up, analytic);
        const auto numeric = numeric_input_grad(x, up, [](const std::vector<double>& v) {
            std::vector<double> y(v.size());
            layers::l2_normalize_forward(v, y);
            return y;
        });
        CHECK(max_rel_error(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("l2_normalize_backward of the output direction vanishes") {
    Rng rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = testing::random_vector(rng, 9, -3, 3);
        std::vector<double> y(9);
        std::vector<double> g(9);
        layers::l2_normalize_forward(x, y);
        l2_normalize_backward(x, y, g);
        for (double v : g) CHECK(std::abs(v) < 1e-9);
    }
}

TEST_CASE("l2 normalization faults on vanishing vectors") {
    std::vector<double> out(3);
    std::vector<double> zero(3, 0.0);
    CHECK_THROWS_AS(layers::l2_normalize_forward(zero, out), NumericFault);
    CHECK_THROWS_AS(l2_normalize_backward(zero, zero, out), NumericFault);
}

TEST_CASE("forward of a dense head divides by the norm") {
    // 2x2 input -> gap -> dense(2) -> l2; gap of all ones is 1.
    NetworkParams params(dense_only(2, 2));
    auto w = params.weights(1);
    w[0] = 3;
    w[1] = 4;
    const std::vector<double> input(4, 1.0);
    const auto e = embed(params, input);
    CHECK(e[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(0.8).epsilon(1e-15));

    NetworkParams zero(dense_only(2, 2));
    CHECK_THROWS_AS(embed(zero, input), NumericFault);
}

TEST_CASE("forward outputs are unit norm and deterministic") {
    const NetworkParams params = init_params(default_network(16, 16), 3);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto input = testing::random_vector(rng, 256, 0, 1);
        const auto a = embed(params, input);
        CHECK(std::abs(norm(a) - 1.0) < 1e-6);
        CHECK(embed(params, input) == a);
    }
}

TEST_CASE("forward rejects non-finite activations and wrong input sizes") {
    NetworkParams params = init_params(testing::tiny_network(), 1);
    std::vector<double> input(64, 0.5);
    input[5] = std::nan("");
    CHECK_THROWS_AS(embed(params, input), NumericFault);
    CHECK_THROWS_AS(embed(params, std::vector<double>(10, 0.5)), StructuralError);
}

TEST_CASE("network spec validation") {
    CHECK_NOTHROW(default_network(32).shapes());
    CHECK(default_network(32, 16).embedding_dim() == 16);
    CHECK_THROWS_AS((NetworkSpec{8, {LayerSpec::global_avg_pool(), LayerSpec::dense(3)}}.shapes()), StructuralError);
    CHECK_THROWS_AS((NetworkSpec{8, {LayerSpec::dense(3), LayerSpec::l2_normalize(), LayerSpec::relu()}}.shapes()),
                    StructuralError);
    CHECK_THROWS_AS((NetworkSpec{3, {LayerSpec::maxpool(4), LayerSpec::dense(3), LayerSpec::l2_normalize()}}.shapes()),
                    StructuralError);
}

TEST_CASE("init_params uses fan-in bounds and zero biases") {
    const NetworkParams p = init_params(default_network(32, 16), 9);
    for (std::size_t l = 0; l < p.spec().layers.size(); ++l) {
        if (!p.spec().layers[l].has_params()) continue;
        const auto in = p.shapes()[l];
        const auto& spec = p.spec().layers[l];
        const double fan_in = spec.kind == LayerKind::conv ? static_cast<double>(in.channels * spec.kernel * spec.kernel)
                                                           : static_cast<double>(in.size());
        const double bound = std::sqrt(6.0 / fan_in);
        for (double w : p.weights(l)) CHECK(std::abs(w) <= bound);
        for (double b : p.bias(l)) CHECK(b == 0.0);
    }
    CHECK(init_params(default_network(32, 16), 9) == p);
    CHECK_FALSE(init_params(default_network(32, 16), 10) == p);
}

TEST_CASE("backward of a zero upstream gradient is zero") {
    const NetworkParams params = init_params(testing::tiny_network(), 2);
    Rng rng(3);
    const auto input = testing::random_vector(rng, 64, 0, 1);
    ForwardCache cache;
    forward(params, input, cache);
    std::vector<double> grads(params.size(), 0.0);
    backward(params, cache, std::vector<double>(4, 0.0), grads);
    for (double g : grads) CHECK(g == 0.0);
}

TEST_CASE("dense weight row gradient equals its input") {
    Rng rng(8);
    const auto in = testing::random_vector(rng, 5);
    const auto w = testing::random_vector(rng, 15);
    std::vector<double> gw(15, 0.0);
    std::vector<double> gb(3, 0.0);
    std::vector<double> gi(5, 0.0);
    layers::dense_backward(in, w, std::vector<double>{1, 0, 0}, gw, gb, gi);
    for (std::size_t j = 0; j < 5; ++j) {
        CHECK(gw[j] == in[j]);
        CHECK(gi[j] == w[j]);
    }
    CHECK(gb == std::vector<double>{1, 0, 0});
}

TEST_CASE("conv2d input and weight gradients match finite differences") {
    Rng rng(12);
    for (std::size_t stride : {1u, 2u}) {
        for (std::size_t kernel : {1u, 3u, 5u}) {
            const Shape in_shape{2, 7, 6};
            const std::size_t oh = layers::conv_output_side(7, kernel, stride);
            const std::size_t ow = layers::conv_output_side(6, kernel, stride);
            const Shape out_shape{3, oh, ow};
            const auto x = testing::random_vector(rng, in_shape.size());
            auto w = testing::random_vector(rng, 3 * 2 * kernel * kernel);
            const auto b = testing::random_vector(rng, 3);
            const auto probe = testing::random_vector(rng, out_shape.size());

            auto run = [&](const std::vector<double>& xx, const std::vector<double>& ww) {
                std::vector<double> out(out_shape.size());
                layers::conv2d_forward(xx, in_shape, ww, b, kernel, stride, out, out_shape);
                return out;
            };
            std::vector<double> gw(w.size(), 0.0);
            std::vector<double> gb(3, 0.0);
            std::vector<double> gx(x.size(), 0.0);
            layers::conv2d_backward(x, in_shape, w, kernel, stride, probe, out_shape, gw, gb, gx);

            const auto nx = numeric_input_grad(x, probe, [&](const std::vector<double>& v) { return run(v, w); });
            const auto nw = numeric_input_grad(w, probe, [&](const std::vector<double>& v) { return run(x, v); });
            CHECK(max_rel_error(gx, nx) < 1e-6);
            CHECK(max_rel_error(gw, nw) < 1e-6);
            double bias_sum = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) bias_sum += probe[i];
            CHECK(gb[0] == doctest::Approx(bias_sum));
        }
    }
}

TEST_CASE("pooling gradients match finite differences") {
    Rng rng(13);
    const Shape in_shape{2, 6, 4};
    const Shape out_shape{2, 3, 2};
    const auto x = testing::random_vector(rng, in_shape.size());
    const auto probe = testing::random_vector(rng, out_shape.size());

    std::vector<double> out(out_shape.size());
    std::vector<std::uint32_t> argmax(out_shape.size());
    layers::maxpool_forward(x, in_shape, 2, out, out_shape, argmax);
    std::vector<double> g(x.size(), 0.0);
    layers::maxpool_backward(probe, argmax, g);
    const auto n = numeric_input_grad(x, probe, [&](const std::vector<double>& v) {
        std::vector<double> o(out_shape.size());
        std::vector<std::uint32_t> a(out_shape.size());
        layers::maxpool_forward(v, in_shape, 2, o, out_shape, a);
        return o;
    });
    CHECK(max_rel_error(g, n) < 1e-6);

    const auto gprobe = testing::random_vector(rng, 2);
    std::vector<double> gg(x.size(), 0.0);
    layers::global_avg_pool_backward(gprobe, in_shape, gg);
    const auto ng = numeric_input_grad(x, gprobe, [&](const std::vector<double>& v) {
        std::vector<double> o(2);
        layers::global_avg_pool_forward(v, in_shape, o);
        return o;
    });
    CHECK(max_rel_error(gg, ng) < 1e-6);
}

TEST_CASE("maxpool ties resolve to the first maximum") {
    const std::vector<double> x{1, 1, 1, 1};
    std::vector<double> out(1);
    std::vector<std::uint32_t> argmax(1);
    layers::maxpool_forward(x, {1, 2, 2}, 2, out, {1, 1, 1}, argmax);
    CHECK(argmax[0] == 0);
}

TEST_CASE("end-to-end backward matches finite differences under the triplet loss") {
    const NetworkSpec spec = testing::tiny_network(8, 4);
    Rng rng(31);
    for (int trial = 0; trial < 3; ++trial) {
        // Zero biases put exact zeros on ReLU kinks; check at a generic point instead.
        NetworkParams params = init_params(spec, 100 + trial);
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            for (double& b : params.bias(l)) b = rng.uniform(-0.1, 0.1);
        }
        const auto a = testing::random_vector(rng, 64, 0, 1);
        const auto p = testing::random_vector(rng, 64, 0, 1);
        const auto n = testing::random_vector(rng, 64, 0, 1);
        const double alpha = 3.0; // keeps the hinge active

        auto loss = [&](std::span<const double> values) {
            NetworkParams q = params;
            std::copy(values.begin(), values.end(), q.values().begin());
            return triplet_loss(embed(q, a), embed(q, p), embed(q, n), alpha);
        };
        std::array<ForwardCache, 3> caches;
        const auto ea = forward(params, a, caches[0]);
        const auto ep = forward(params, p, caches[1]);
        const auto en = forward(params, n, caches[2]);
        REQUIRE(triplet_loss(ea, ep, en, alpha) > 0.0);
        const TripletGrads g = triplet_grads(ea, ep, en, alpha);
        std::vector<double> grads(params.size(), 0.0);
        backward(params, caches[0], g.anchor, grads);
        backward(params, caches[1], g.positive, grads);
        backward(params, caches[2], g.negative, grads);

        const auto result = gradient_check(params.values(), loss, grads, 1e-5);
        CHECK(result.max_relative_error < 1e-3);
    }
}

TEST_CASE("gradient_check on an exact linear model") {
    const std::vector<double> theta{0.7};
    const std::vector<double> analytic{3.0};
    const auto r = gradient_check(theta, [](std::span<const double> t) { return 3.0 * t[0]; }, analytic, 1e-5);
    CHECK(r.max_relative_error <= 1e-9);
    CHECK_THROWS_AS(gradient_check(theta, [](std::span<const double>) { return 0.0; }, analytic, 1e-2),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        gradient_check(theta, [](std::span<const double>) { return std::nan(""); }, analytic, 1e-5), NumericFault);
}

TEST_CASE("gradient_check of an inactive triplet sees zero on both sides") {
    const NetworkSpec spec = testing::tiny_network(8, 4);
    const NetworkParams params = init_params(spec, 5);
    Rng rng(6);
    const auto a = testing::random_vector(rng, 64, 0, 1);
    // Anchor doubles as positive; a tiny margin leaves the hinge clamped.
    const auto n = testing::random_vector(rng, 64, 0, 1);
    auto loss = [&](std::span<const double> values) {
        NetworkParams q = params;
        std::copy(values.begin(), values.end(), q.values().begin());
        const auto ea = embed(q, a);
        return triplet_loss(ea, ea, embed(q, n), 1e-12);
    };
    REQUIRE(loss(params.values()) == 0.0);
    const std::vector<double> zeros(params.size(), 0.0);
    const auto r = gradient_check(params.values(), loss, zeros, 1e-6);
    CHECK(r.max_relative_error == 0.0);
}

TEST_CASE("sgd_step arithmetic") {
    OptimizerState plain{0.01, 1.0, 0.0, {}};
    std::vector<double> p{1.0};
    sgd_step(p, std::vector<double>{2.0}, plain, 0);
    CHECK(p[0] == doctest::Approx(0.98).epsilon(1e-15));

    OptimizerState decayed{0.01, 0.9, 0.0, {}};
    CHECK(decayed.learning_rate(2) == doctest::Approx(0.0081).epsilon(1e-14));

    std::vector<double> q{0.3, -0.4};
    const auto before = q;
    sgd_step(q, std::vector<double>{0.0, 0.0}, decayed, 7);
    CHECK(q == before);

    Rng rng(2);
    auto r = testing::random_vector(rng, 20);
    const auto g = testing::random_vector(rng, 20);
    const auto r0 = r;
    OptimizerState s{0.05, 1.0, 0.0, {}};
    sgd_step(r, g, s, 3);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == r0[i] - 0.05 * g[i]);

    OptimizerState bad{0.01, 0.9, 0.0, {}};
    CHECK_THROWS_AS(sgd_step(r, std::vector<double>(20, std::nan("")), bad, 0), NumericFault);
}

TEST_CASE("sgd_step momentum accumulates velocity") {
    OptimizerState s{0.1, 1.0, 0.5, {}};
    std::vector<double> p{0.0};
    sgd_step(p, std::vector<double>{1.0}, s, 0);
    CHECK(p[0] == doctest::Approx(-0.1));
    sgd_step(p, std::vector<double>{1.0}, s, 1);
    CHECK(p[0] == doctest::Approx(-0.1 - 0.15));
}

TEST_CASE("checkpoints round-trip and reject corruption") {
    const NetworkParams params = init_params(default_network(16, 8), 4);
    const auto bytes = encode_checkpoint(params);
    CHECK(decode_checkpoint(bytes) == params);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "TEMBCKPT");

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(truncated), ParseError);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(extra), ParseError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad_magic), ParseError);
    auto bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS_AS(decode_checkpoint(bad_version), ParseError);
}
