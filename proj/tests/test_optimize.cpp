#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/optimize.hpp"

using namespace skl;

TEST_CASE("stationary interior point is returned unchanged") {
    // f(x) = ||x||^2 has zero gradient at the origin.
    Objective f = [](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v += x[i] * x[i];
            if (!g.empty()) g[i] = 2.0 * x[i];
        }
        return v;
    };
    Box box{{-1.0, -1.0}, {1.0, 1.0}};
    std::vector<double> init = {0.0, 0.0};
    MinimizeResult res = local_minimize(f, init, box);
    CHECK(res.converged);
    CHECK(res.x == init);
    CHECK(res.iterations == 0);
}

TEST_CASE("convex quadratic reaches its minimizer") {
    const std::vector<double> target = {0.3, -0.6, 0.9};
    Objective f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - target[i];
            v += diff * diff;
            if (!g.empty()) g[i] = 2.0 * diff;
        }
        return v;
    };
    Box box{{-2.0, -2.0, -2.0}, {2.0, 2.0, 2.0}};
    std::vector<double> init = {-1.5, 1.5, -1.5};
    MinimizeResult res = local_minimize(f, init, box, 1000);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(res.x[i] - target[i]) <= 1e-6);
}

TEST_CASE("constrained minimizer lands on the active bound") {
    // Minimum of (x - 3)^2 inside [-1, 1] is at x = 1.
    Objective f = [](std::span<const double> x, std::span<double> g) {
        const double diff = x[0] - 3.0;
        if (!g.empty()) g[0] = 2.0 * diff;
        return diff * diff;
    };
    Box box{{-1.0}, {1.0}};
    std::vector<double> init = {-0.5};
    MinimizeResult res = local_minimize(f, init, box, 500);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.converged);
}

TEST_CASE("objective values never increase along the run") {
    // Rosenbrock restricted to a box; record every accepted value via the
    // gradient-bearing evaluations.
    std::vector<double> accepted;
    Objective f = [&](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        const double v = a * a + 100.0 * b * b;
        if (!g.empty()) {
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            accepted.push_back(v);
        }
        return v;
    };
    Box box{{-2.0, -2.0}, {2.0, 2.0}};
    std::vector<double> init = {-1.2, 1.0};
    local_minimize(f, init, box, 200);
    REQUIRE(accepted.size() > 2);
    for (std::size_t i = 1; i < accepted.size(); ++i)
        CHECK(accepted[i] <= accepted[i - 1] + 1e-12);
}

TEST_CASE("iterates stay inside the box") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        // Push hard toward -infinity.
        if (!g.empty()) g[0] = 1.0;
        return x[0];
    };
    Box box{{-0.25}, {4.0}};
    std::vector<double> init = {3.0};
    MinimizeResult res = local_minimize(f, init, box, 50);
    CHECK(res.x[0] == doctest::Approx(-0.25));
}

TEST_CASE("init is clamped into the box") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) g[0] = 0.0;
        return x[0] * 0.0;
    };
    Box box{{0.0}, {1.0}};
    std::vector<double> init = {5.0};
    MinimizeResult res = local_minimize(f, init, box, 10);
    CHECK(res.x[0] == doctest::Approx(1.0));
}

TEST_CASE("box validation rejects inverted bounds") {
    Box bad{{1.0}, {0.0}};
    Objective f = [](std::span<const double>, std::span<double>) { return 0.0; };
    std::vector<double> init = {0.5};
    CHECK_THROWS_AS(local_minimize(f, init, bad, 10), Error);
}
