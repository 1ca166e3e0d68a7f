#include "core/selfcheck.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "core/decoders.hpp"
#include "core/nnls.hpp"
#include "core/rng.hpp"
#include "core/sketch.hpp"
#include "core/types.hpp"

namespace skl {

namespace {

struct Check {
    std::string name;
    bool ok;
    std::string detail;
};

MixtureModel random_model(Rng& rng, ModelKind kind, std::size_t k, std::size_t d) {
    MixtureModel model =
        kind == ModelKind::Dirac ? MixtureModel::dirac(k, d) : MixtureModel::gaussian(k, d);
    for (std::size_t a = 0; a < k; ++a) {
        model.weights[a] = 0.1 + rng.next_unit();
        for (std::size_t t = 0; t < d; ++t) {
            model.centers[a * d + t] = rng.next_uniform(-2.0, 2.0);
            if (kind == ModelKind::Gaussian)
                model.variances[a * d + t] = std::exp(rng.next_uniform(-2.0, 0.5));
        }
    }
    return model;
}

// Central finite differences of cost() over the flat parameter layout.
std::vector<double> fd_cost_gradient(const MixtureModel& theta, const Sketch& z,
                                     const FrequencyMatrix& freqs) {
    const bool gaussian = theta.kind == ModelKind::Gaussian;
    const std::size_t kd = theta.k * theta.d;
    const std::size_t n_params = theta.k + kd + (gaussian ? kd : 0);
    std::vector<double> grad(n_params);

    auto param_ref = [&](MixtureModel& m, std::size_t i) -> double& {
        if (i < m.k) return m.weights[i];
        if (i < m.k + kd) return m.centers[i - m.k];
        return m.variances[i - m.k - kd];
    };

    MixtureModel probe = theta;
    for (std::size_t i = 0; i < n_params; ++i) {
        const double original = param_ref(probe, i);
        const double h = 1e-5 * (1.0 + std::abs(original));
        param_ref(probe, i) = original + h;
        const double hi = cost(probe, z, freqs);
        param_ref(probe, i) = original - h;
        const double lo = cost(probe, z, freqs);
        param_ref(probe, i) = original;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

double max_rel_gradient_error(std::span<const double> analytic,
                              std::span<const double> fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom =
            std::max({1.0, std::abs(analytic[i]), std::abs(fd[i])});
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
    }
    return worst;
}

// Brute-force NNLS: try every active-set pattern, keep the best feasible one.
std::vector<double> nnls_enumerate(const std::vector<std::vector<double>>& cols,
                                   const std::vector<double>& b) {
    const std::size_t k = cols.size();
    const std::size_t rows = b.size();
    std::vector<double> best(k, 0.0);
    double best_obj = 0.0;
    for (double v : b) best_obj += v * v;  // all-zero solution

    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < k; ++i)
            if (mask & (1u << i)) active.push_back(i);
        const std::size_t p = active.size();

        // Normal equations on the active set, solved by Gaussian elimination.
        std::vector<double> gram(p * p), rhs(p);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                double dot = 0.0;
                for (std::size_t r = 0; r < rows; ++r)
                    dot += cols[active[i]][r] * cols[active[j]][r];
                gram[i * p + j] = dot;
            }
            double dot = 0.0;
            for (std::size_t r = 0; r < rows; ++r) dot += cols[active[i]][r] * b[r];
            rhs[i] = dot;
        }
        std::vector<double> sol = rhs;
        std::vector<double> a = gram;
        bool singular = false;
        for (std::size_t c = 0; c < p && !singular; ++c) {
            std::size_t pivot = c;
            for (std::size_t r = c + 1; r < p; ++r)
                if (std::abs(a[r * p + c]) > std::abs(a[pivot * p + c])) pivot = r;
            if (std::abs(a[pivot * p + c]) < 1e-300) {
                singular = true;
                break;
            }
            for (std::size_t c2 = 0; c2 < p; ++c2) std::swap(a[c * p + c2], a[pivot * p + c2]);
            std::swap(sol[c], sol[pivot]);
            for (std::size_t r = c + 1; r < p; ++r) {
                const double f = a[r * p + c] / a[c * p + c];
                for (std::size_t c2 = c; c2 < p; ++c2) a[r * p + c2] -= f * a[c * p + c2];
                sol[r] -= f * sol[c];
            }
        }
        if (singular) continue;
        for (std::size_t i = p; i-- > 0;) {
            for (std::size_t j = i + 1; j < p; ++j) sol[i] -= a[i * p + j] * sol[j];
            sol[i] /= a[i * p + i];
        }
        bool feasible = true;
        for (double v : sol) feasible = feasible && v >= -1e-12;
        if (!feasible) continue;

        std::vector<double> w(k, 0.0);
        for (std::size_t i = 0; i < p; ++i) w[active[i]] = std::max(0.0, sol[i]);
        double obj = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            double fit = 0.0;
            for (std::size_t i = 0; i < k; ++i) fit += w[i] * cols[i][r];
            const double diff = b[r] - fit;
            obj += diff * diff;
        }
        if (obj < best_obj) {
            best_obj = obj;
            best = std::move(w);
        }
    }
    return best;
}

}  // namespace

SelfcheckResult run_selfcheck(std::uint64_t seed, bool quick) {
    std::vector<Check> checks;
    const Rng root(seed);

    // Folded-Gaussian radius: mean |w| = 1/(sigma sqrt(pi)) in d = 1.
    {
        const std::size_t m = quick ? 20000 : 100000;
        const double sigma = 2.0;
        FrequencyMatrix freqs =
            draw_frequencies(m, 1, FreqLaw::FoldedGaussian, sigma, root.derive(1).key());
        double mean = 0.0;
        for (double w : freqs.omega) mean += std::abs(w);
        mean /= static_cast<double>(m);
        const double expected = 1.0 / (sigma * std::sqrt(std::numbers::pi));
        const double scale = 1.0 / (sigma * std::numbers::sqrt2);
        const double stderr3 = 3.0 * scale * std::sqrt(1.0 - 2.0 / std::numbers::pi) /
                               std::sqrt(static_cast<double>(m));
        std::ostringstream detail;
        detail << "mean " << mean << " expected " << expected;
        checks.push_back({"fg-radius-mean", std::abs(mean - expected) < stderr3,
                          detail.str()});
    }

    // Gradient of the cost versus central finite differences, both kinds.
    {
        Rng rng = root.derive(2);
        double worst = 0.0;
        const int cases = quick ? 10 : 30;
        for (int c = 0; c < cases; ++c) {
            const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(4));
            const std::size_t k = 1 + static_cast<std::size_t>(rng.next_below(3));
            const std::size_t m = 8 + static_cast<std::size_t>(rng.next_below(32));
            const ModelKind kind =
                rng.next_unit() < 0.5 ? ModelKind::Dirac : ModelKind::Gaussian;
            FrequencyMatrix freqs = draw_frequencies(
                m, d, FreqLaw::FoldedGaussian, 1.0, rng.next_u64());
            MixtureModel target = random_model(rng, kind, k, d);
            Sketch z = model_sketch(target, freqs);
            MixtureModel probe = random_model(rng, kind, k, d);
            const auto analytic = cost_gradient(probe, z, freqs);
            const auto fd = fd_cost_gradient(probe, z, freqs);
            worst = std::max(worst, max_rel_gradient_error(analytic, fd));
        }
        std::ostringstream detail;
        detail << "worst rel err " << worst;
        checks.push_back({"cost-gradient-fd", worst <= 1e-5, detail.str()});
    }

    // Merge associativity and boundedness on random datasets.
    {
        Rng rng = root.derive(3);
        bool ok = true;
        double worst = 0.0;
        const int cases = quick ? 5 : 20;
        for (int c = 0; c < cases && ok; ++c) {
            const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(4));
            const std::size_t n = 50 + static_cast<std::size_t>(rng.next_below(200));
            Dataset x;
            x.n = n;
            x.d = d;
            x.points.resize(n * d);
            for (double& v : x.points) v = rng.next_uniform(-3.0, 3.0);
            FrequencyMatrix freqs =
                draw_frequencies(16, d, FreqLaw::AdaptedRadius, 1.0, rng.next_u64());
            Sketch whole = empirical_sketch(x, freqs);
            ok = ok && whole.max_modulus() <= 1.0 + 1e-12;

            const std::size_t cut = 1 + static_cast<std::size_t>(rng.next_below(n - 1));
            Dataset a{cut, d, {x.points.begin(), x.points.begin() + static_cast<std::ptrdiff_t>(cut * d)}};
            Dataset b{n - cut, d, {x.points.begin() + static_cast<std::ptrdiff_t>(cut * d), x.points.end()}};
            Sketch merged = merge_sketches(empirical_sketch(a, freqs),
                                           empirical_sketch(b, freqs));
            for (std::size_t i = 0; i < whole.values.size(); ++i)
                worst = std::max(worst, std::abs(whole.values[i] - merged.values[i]));
            ok = ok && worst <= 1e-12;
        }
        std::ostringstream detail;
        detail << "worst entry diff " << worst;
        checks.push_back({"merge-and-boundedness", ok, detail.str()});
    }

    // CLT consistency: empirical vs model sketch of a Gaussian mixture.
    {
        Rng rng = root.derive(4);
        const std::size_t n = quick ? 20000 : 100000;
        const std::size_t reps = quick ? 5 : 20;
        std::size_t good = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t d = 2;
            MixtureModel target = random_model(rng, ModelKind::Gaussian, 2, d);
            const double wsum = target.weight_sum();
            for (double& w : target.weights) w /= wsum;
            FrequencyMatrix freqs = draw_frequencies(
                32, d, FreqLaw::FoldedGaussian, 1.0, rng.next_u64());

            Dataset x;
            x.n = n;
            x.d = d;
            x.points.resize(n * d);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = rng.next_unit();
                const std::size_t comp = u < target.weights[0] ? 0 : 1;
                for (std::size_t t = 0; t < d; ++t)
                    x.points[i * d + t] =
                        target.centers[comp * d + t] +
                        std::sqrt(target.variances[comp * d + t]) * rng.next_normal();
            }
            Sketch emp = empirical_sketch(x, freqs);
            Sketch mod = model_sketch(target, freqs);
            double worst = 0.0;
            for (std::size_t j = 0; j < emp.size(); ++j)
                worst = std::max(worst, std::hypot(emp.re(j) - mod.re(j),
                                                   emp.im(j) - mod.im(j)));
            if (worst <= 5.0 / std::sqrt(static_cast<double>(n))) ++good;
        }
        std::ostringstream detail;
        detail << good << "/" << reps << " reps within 5/sqrt(n)";
        checks.push_back({"clt-consistency", good == reps, detail.str()});
    }

    // NNLS against brute-force active-set enumeration.
    {
        Rng rng = root.derive(5);
        double worst = 0.0;
        const int cases = quick ? 20 : 50;
        for (int c = 0; c < cases; ++c) {
            const std::size_t k = 1 + static_cast<std::size_t>(rng.next_below(3));
            const std::size_t rows = 6 + static_cast<std::size_t>(rng.next_below(10));
            std::vector<std::vector<double>> cols(k, std::vector<double>(rows));
            for (auto& col : cols)
                for (double& v : col) v = rng.next_normal();
            std::vector<double> b(rows);
            for (double& v : b) v = rng.next_normal();

            // Column-major flat buffer for the solver.
            std::vector<double> columns(rows * k);
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t r = 0; r < rows; ++r) columns[i * rows + r] = cols[i][r];

            const auto fast = nnls(columns, rows, k, b);
            const auto slow = nnls_enumerate(cols, b);
            for (std::size_t i = 0; i < k; ++i)
                worst = std::max(worst, std::abs(fast[i] - slow[i]));
        }
        std::ostringstream detail;
        detail << "worst weight diff " << worst;
        checks.push_back({"nnls-enumeration", worst <= 1e-7, detail.str()});
    }

    // Decode determinism: identical seeds, identical results.
    {
        Rng rng = root.derive(6);
        MixtureModel target = MixtureModel::dirac(2, 2);
        target.weights = {0.5, 0.5};
        target.centers = {-1.5, 0.5, 1.5, -0.5};
        FrequencyMatrix freqs =
            draw_frequencies(24, 2, FreqLaw::FoldedGaussian, 0.7, rng.next_u64());
        Sketch z = model_sketch(target, freqs);
        DecodeOptions opts;
        opts.k = 2;
        opts.kind = ModelKind::Dirac;
        opts.center_box.lo = {-3.0, -3.0};
        opts.center_box.hi = {3.0, 3.0};
        opts.trials = 2;
        opts.seed = rng.next_u64();
        DecodeResult a = clompr_multi(z, freqs, opts);
        DecodeResult b = clompr_multi(z, freqs, opts);
        const bool same = a.final_cost == b.final_cost &&
                          a.model.centers == b.model.centers &&
                          a.model.weights == b.model.weights;
        std::ostringstream detail;
        detail << "final cost " << a.final_cost;
        checks.push_back({"decode-determinism", same, detail.str()});
    }

    SelfcheckResult result;
    result.ok = true;
    std::ostringstream report;
    for (const auto& check : checks) {
        result.ok = result.ok && check.ok;
        report << (check.ok ? "[pass] " : "[FAIL] ") << check.name << ": "
               << check.detail << '\n';
    }
    result.report = report.str();
    return result;
}

}  // namespace skl
