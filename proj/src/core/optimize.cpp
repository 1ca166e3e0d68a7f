#include "core/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace skl {

void Box::validate() const {
    require(lo.size() == hi.size(), ErrorCode::invalid_argument,
            "box bound vectors differ in length");
    for (std::size_t i = 0; i < lo.size(); ++i)
        require(lo[i] < hi[i], ErrorCode::invalid_argument,
                "box lower bound must be strictly below upper bound");
}

void Box::clamp(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

MinimizeResult local_minimize(const Objective& objective,
                              std::span<const double> init, const Box& box,
                              std::size_t max_iterations) {
    box.validate();
    require(init.size() == box.size(), ErrorCode::invalid_argument,
            "initial point length does not match box");

    constexpr double kArmijo = 1e-4;

    const std::size_t n = init.size();
    MinimizeResult res;
    res.x.assign(init.begin(), init.end());
    box.clamp(res.x);

    std::vector<double> grad(n);
    std::vector<double> trial(n);
    std::vector<double> new_grad(n);
    res.value = objective(res.x, grad);

    // Trial step for the next line search: 1.0 on the first iteration, then
    // the Barzilai-Borwein spectral estimate s's/s'y, which adapts the step
    // to the local curvature across very differently scaled coordinates.
    double trial_step = 1.0;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        res.iterations = iter;

        // Projected-gradient norm at unit step.
        double pg_norm_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double moved =
                std::min(std::max(res.x[i] - grad[i], box.lo[i]), box.hi[i]);
            const double diff = res.x[i] - moved;
            pg_norm_sq += diff * diff;
        }
        if (std::sqrt(pg_norm_sq) <= 1e-8 * (1.0 + std::abs(res.value))) {
            res.converged = true;
            return res;
        }

        double step = trial_step;
        bool accepted = false;
        double trial_value = 0.0;
        while (step > 1e-20) {
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] =
                    std::min(std::max(res.x[i] - step * grad[i], box.lo[i]), box.hi[i]);
                decrease += grad[i] * (res.x[i] - trial[i]);
            }
            trial_value = objective(trial, {});
            if (std::isfinite(trial_value) &&
                trial_value <= res.value - kArmijo * decrease) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return res;  // numerically stuck; best iterate so far

        const double new_value = objective(trial, new_grad);
        double s_dot_s = 0.0, s_dot_y = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = trial[i] - res.x[i];
            s_dot_s += s * s;
            s_dot_y += s * (new_grad[i] - grad[i]);
        }
        trial_step = s_dot_y > 1e-300 * s_dot_s
                         ? std::min(std::max(s_dot_s / s_dot_y, 1e-12), 1e8)
                         : std::min(2.0 * step, 1e8);

        res.x.swap(trial);
        res.value = new_value;
        grad.swap(new_grad);
        (void)trial_value;
    }
    res.iterations = max_iterations;
    return res;
}

}  // namespace skl
