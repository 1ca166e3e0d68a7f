#pragma once

#include <functional>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace skl {

// Elementwise box; entries may be +-infinity for one-sided or free bounds.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t size() const { return lo.size(); }
    void validate() const;
    void clamp(std::span<double> x) const;
};

// Objective contract: return f(x) and, when `grad` is non-empty, fill it with
// the gradient at x. Line-search probes pass an empty grad span.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

// Projected gradient descent with Armijo backtracking (constant 1e-4, halving
// step, first trial step 1.0). Terminates when the projected-gradient norm is
// <= 1e-8 * (1 + |f|) or after max_iterations. The objective value never
// increases along the iterates.
MinimizeResult local_minimize(const Objective& objective,
                              std::span<const double> init, const Box& box,
                              std::size_t max_iterations = 300);

}  // namespace skl
