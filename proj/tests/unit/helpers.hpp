#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tembed/matrix.hpp"
#include "tembed/network.hpp"
#include "tembed/rng.hpp"

namespace testing {

inline std::vector<double> random_unit(tembed::Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

inline tembed::Matrix random_unit_rows(tembed::Rng& rng, std::size_t n, std::size_t dim) {
    tembed::Matrix m(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = random_unit(rng, dim);
        std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
}

inline std::vector<double> random_vector(tembed::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Small network touching every layer kind.
inline tembed::NetworkSpec tiny_network(std::size_t side = 8, std::size_t dim = 4) {
    using tembed::LayerSpec;
    return {side,
            {LayerSpec::conv(2, 3), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::conv(3, 3), LayerSpec::relu(),
             LayerSpec::global_avg_pool(), LayerSpec::dense(dim), LayerSpec::l2_normalize()}};
}

inline std::string bytes_to_string(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }

} // namespace testing
