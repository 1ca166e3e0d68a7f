#include "core/nnls.hpp"

#include <algorithm>
#include <cmath>

namespace skl {

namespace {

// Solve G x = h for the rows/cols listed in `active` via Gaussian elimination
// with partial pivoting. G is the full cols x cols Gram matrix. Returns false
// on a (numerically) singular system.
bool solve_subsystem(const std::vector<double>& gram, std::size_t cols,
                     const std::vector<double>& rhs,
                     const std::vector<std::size_t>& active,
                     std::vector<double>& solution) {
    const std::size_t p = active.size();
    std::vector<double> a(p * p);
    std::vector<double> b(p);
    for (std::size_t i = 0; i < p; ++i) {
        b[i] = rhs[active[i]];
        for (std::size_t j = 0; j < p; ++j)
            a[i * p + j] = gram[active[i] * cols + active[j]];
    }

    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a[col * p + col]);
        for (std::size_t r = col + 1; r < p; ++r) {
            const double cand = std::abs(a[r * p + col]);
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (!(best > 1e-300)) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < p; ++c)
                std::swap(a[col * p + c], a[pivot * p + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * p + col];
        for (std::size_t r = col + 1; r < p; ++r) {
            const double f = a[r * p + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
            b[r] -= f * b[col];
        }
    }
    solution.assign(p, 0.0);
    for (std::size_t i = p; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < p; ++j) s -= a[i * p + j] * solution[j];
        solution[i] = s / a[i * p + i];
    }
    return true;
}

}  // namespace

std::vector<double> nnls(std::span<const double> columns, std::size_t rows,
                         std::size_t cols, std::span<const double> b) {
    require(cols >= 1 && rows >= 1, ErrorCode::invalid_argument,
            "nnls needs at least one row and one column");
    require(columns.size() == rows * cols && b.size() == rows,
            ErrorCode::dimension_mismatch, "nnls buffer sizes are inconsistent");

    // Normal-equation data: gram = A^T A, corr = A^T b.
    std::vector<double> gram(cols * cols);
    std::vector<double> corr(cols);
    for (std::size_t i = 0; i < cols; ++i) {
        const double* ci = columns.data() + i * rows;
        double dot_b = 0.0;
        for (std::size_t r = 0; r < rows; ++r) dot_b += ci[r] * b[r];
        corr[i] = dot_b;
        for (std::size_t j = i; j < cols; ++j) {
            const double* cj = columns.data() + j * rows;
            double dot = 0.0;
            for (std::size_t r = 0; r < rows; ++r) dot += ci[r] * cj[r];
            gram[i * cols + j] = dot;
            gram[j * cols + i] = dot;
        }
    }

    double corr_scale = 1.0;
    for (double v : corr) corr_scale = std::max(corr_scale, std::abs(v));
    const double tol = 1e-9 * corr_scale;

    std::vector<double> w(cols, 0.0);
    std::vector<bool> passive(cols, false);
    std::vector<bool> dead(cols, false);  // blocked after a zero-progress entry
    std::vector<std::size_t> passive_idx;
    std::vector<double> trial;

    constexpr std::size_t kMaxIterations = 10000;
    std::size_t iterations = 0;

    while (true) {
        require(++iterations <= kMaxIterations, ErrorCode::decode_failure,
                "nnls exceeded its iteration cap");

        // Gradient of 1/2||Aw - b||^2 is G w - corr; the most negative
        // gradient coordinate (largest corr - Gw) enters the passive set.
        double best_gain = tol;
        std::size_t enter = cols;
        for (std::size_t i = 0; i < cols; ++i) {
            if (passive[i] || dead[i]) continue;
            double g = corr[i];
            for (std::size_t j = 0; j < cols; ++j) g -= gram[i * cols + j] * w[j];
            if (g > best_gain) {
                best_gain = g;
                enter = i;
            }
        }
        if (enter == cols) break;  // KKT satisfied (up to dead columns)

        passive[enter] = true;
        passive_idx.push_back(enter);
        bool progressed = false;

        // Inner loop: restrict to the passive set, clip at the boundary until
        // the passive solution is strictly feasible.
        while (!passive_idx.empty()) {
            require(++iterations <= kMaxIterations, ErrorCode::decode_failure,
                    "nnls exceeded its iteration cap");
            if (!solve_subsystem(gram, cols, corr, passive_idx, trial)) {
                // Singular subsystem: drop the just-entered variable.
                passive[passive_idx.back()] = false;
                passive_idx.pop_back();
                break;
            }
            double alpha = 1.0;
            for (std::size_t i = 0; i < passive_idx.size(); ++i) {
                if (trial[i] > 0.0) continue;
                const double cur = w[passive_idx[i]];
                const double denom = cur - trial[i];
                alpha = std::min(alpha, denom > 0.0 ? cur / denom : 0.0);
            }
            if (alpha >= 1.0) {
                for (std::size_t i = 0; i < passive_idx.size(); ++i)
                    w[passive_idx[i]] = trial[i];
                progressed = true;
                break;
            }
            if (alpha > 0.0) {
                for (std::size_t i = 0; i < passive_idx.size(); ++i) {
                    const std::size_t idx = passive_idx[i];
                    w[idx] += alpha * (trial[i] - w[idx]);
                }
                progressed = true;
            }
            // Drop passive variables pinned at (numerically) zero.
            double w_max = 0.0;
            for (std::size_t idx : passive_idx) w_max = std::max(w_max, w[idx]);
            const double zero_tol = 1e-12 * std::max(1.0, w_max);
            std::vector<std::size_t> kept;
            for (std::size_t i = 0; i < passive_idx.size(); ++i) {
                const std::size_t idx = passive_idx[i];
                if (trial[i] <= 0.0 && w[idx] <= zero_tol) {
                    w[idx] = 0.0;
                    passive[idx] = false;
                } else {
                    kept.push_back(idx);
                }
            }
            if (kept.size() == passive_idx.size()) break;  // nothing left to clip
            passive_idx = std::move(kept);
        }

        if (progressed) {
            std::fill(dead.begin(), dead.end(), false);
        } else {
            // The entering variable produced no movement (degenerate geometry);
            // block it so the outer loop cannot cycle on it.
            dead[enter] = true;
        }
    }
    return w;
}

std::vector<double> nnls_weights(std::span<const Sketch> atom_sketches,
                                 const Sketch& z) {
    require(!atom_sketches.empty(), ErrorCode::invalid_argument,
            "nnls_weights needs at least one atom sketch");
    const std::size_t rows = z.values.size();
    std::vector<double> columns(rows * atom_sketches.size());
    for (std::size_t a = 0; a < atom_sketches.size(); ++a) {
        require(atom_sketches[a].values.size() == rows, ErrorCode::dimension_mismatch,
                "atom sketch size does not match target sketch");
        std::copy(atom_sketches[a].values.begin(), atom_sketches[a].values.end(),
                  columns.begin() + static_cast<std::ptrdiff_t>(a * rows));
    }
    return nnls(columns, rows, atom_sketches.size(), z.values);
}

}  // namespace skl
