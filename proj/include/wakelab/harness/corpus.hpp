// Test landscapes for the DIRECT optimiser, all defined on the unit box.
#pragma once

#include "../direct_optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace wakelab::harness {

struct CorpusFunction {
    std::string name;
    std::size_t dim;
    int budget;
    double reference; ///< known global minimum
    direct::Objective f;
};

/// Branin on [-5, 10] x [0, 15], reached through the unit square.
inline double branin_unit(std::span<const double> u) {
    const double pi = std::numbers::pi;
    const double x1 = -5.0 + 15.0 * u[0], x2 = 15.0 * u[1];
    const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, t = 1.0 / (8.0 * pi);
    const double a = x2 - b * x1 * x1 + c * x1 - 6.0;
    return a * a + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

inline double sphere_unit(std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += (x - 0.5) * (x - 0.5);
    return s;
}

/// Six-hump camel on [-3, 3] x [-2, 2].
inline double camel_unit(std::span<const double> u) {
    const double x = -3.0 + 6.0 * u[0], y = -2.0 + 4.0 * u[1];
    return (4.0 - 2.1 * x * x + x * x * x * x / 3.0) * x * x + x * y + (-4.0 + 4.0 * y * y) * y * y;
}

inline std::vector<CorpusFunction> optimizer_corpus() {
    return {
        {"sphere", 2, 150, 0.0, sphere_unit},
        {"branin", 2, 500, 0.39788735772973816, branin_unit},
        {"six_hump_camel", 2, 500, -1.0316284534898774, camel_unit},
        {"constant", 2, 150, 3.0, [](std::span<const double>) { return 3.0; }},
        {"neg_linear", 1, 150, -1.0, [](std::span<const double> u) { return -u[0]; }},
        {"sphere_4d", 4, 500, 0.0, sphere_unit},
    };
}

} // namespace wakelab::harness
