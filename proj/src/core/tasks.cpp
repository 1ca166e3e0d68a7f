#include "core/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "core/rng.hpp"

namespace skl {

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
        const double diff = a[t] - b[t];
        s += diff * diff;
    }
    return s;
}

struct LloydRun {
    std::vector<double> centroids;
    double sse = 0.0;
    std::vector<double> sse_trace;  // SSE of the centroids each assignment pass saw
};

LloydRun lloyd_single(const Dataset& x, std::size_t k, Rng rng) {
    const std::size_t n = x.n;
    const std::size_t d = x.d;

    // k-means++ seeding with incremental nearest distances.
    std::vector<double> centroids(k * d);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
        std::copy_n(x.points.data() + first * d, d, centroids.data());
        for (std::size_t i = 0; i < n; ++i)
            nearest[i] = squared_distance(x.points.data() + i * d, centroids.data(), d);
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (double v : nearest) total += v;
            std::size_t chosen;
            if (total > 0.0) {
                double u = rng.next_unit() * total;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    u -= nearest[i];
                    if (u <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = static_cast<std::size_t>(rng.next_below(n));
            }
            double* dst = centroids.data() + c * d;
            std::copy_n(x.points.data() + chosen * d, d, dst);
            for (std::size_t i = 0; i < n; ++i)
                nearest[i] = std::min(nearest[i],
                                      squared_distance(x.points.data() + i * d, dst, d));
        }
    }

    std::vector<std::size_t> assignment(n, k);
    std::vector<std::size_t> counts(k);
    std::vector<double> sums(k * d);

    LloydRun run;

    constexpr std::size_t kMaxLloydIterations = 300;
    for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        double pass_sse = 0.0;
        std::fill(counts.begin(), counts.end(), 0);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.points.data() + i * d;
            std::size_t best = 0;
            double best_dist = squared_distance(xi, centroids.data(), d);
            for (std::size_t c = 1; c < k; ++c) {
                const double dist = squared_distance(xi, centroids.data() + c * d, d);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
            pass_sse += best_dist;
            ++counts[best];
            double* sum = sums.data() + best * d;
            for (std::size_t t = 0; t < d; ++t) sum[t] += xi[t];
        }
        run.sse_trace.push_back(pass_sse);
        if (!changed && iter > 0) break;

        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Reseed at the point farthest from its assigned centroid.
                std::size_t far = 0;
                double far_dist = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist =
                        squared_distance(x.points.data() + i * d,
                                         centroids.data() + assignment[i] * d, d);
                    if (dist > far_dist) {
                        far_dist = dist;
                        far = i;
                    }
                }
                std::copy_n(x.points.data() + far * d, d, centroids.data() + c * d);
            } else {
                double* dst = centroids.data() + c * d;
                const double* sum = sums.data() + c * d;
                for (std::size_t t = 0; t < d; ++t)
                    dst[t] = sum[t] / static_cast<double>(counts[c]);
            }
        }
    }

    run.centroids = std::move(centroids);
    run.sse = sse(x, run.centroids, k);
    return run;
}

}  // namespace

KMeansResult lloyd_kmeans(const Dataset& x, std::size_t k, std::size_t restarts,
                          std::uint64_t seed) {
    x.validate();
    require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
    require(k <= x.n, ErrorCode::invalid_argument,
            "k-means needs at least as many points as clusters");
    require(restarts >= 1, ErrorCode::invalid_argument, "restarts must be >= 1");

    const Rng root(seed);
    KMeansResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        LloydRun run = lloyd_single(x, k, root.derive(r));
        if (run.sse < best.sse) {
            best.sse = run.sse;
            best.centroids = std::move(run.centroids);
            best.sse_trace = std::move(run.sse_trace);
        }
    }
    best.k = k;
    best.d = x.d;
    return best;
}

double sse(const Dataset& x, std::span<const double> centroids, std::size_t k) {
    x.validate();
    require(k >= 1, ErrorCode::invalid_argument, "sse needs at least one centroid");
    require(centroids.size() == k * x.d, ErrorCode::dimension_mismatch,
            "centroid buffer does not match k*d");

    double total = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) {
        const double* xi = x.points.data() + i * x.d;
        double best = squared_distance(xi, centroids.data(), x.d);
        for (std::size_t c = 1; c < k; ++c)
            best = std::min(best,
                            squared_distance(xi, centroids.data() + c * x.d, x.d));
        total += best;
    }
    return total;
}

double relative_sse(const Dataset& x, std::span<const double> centroids,
                    std::size_t k, double baseline_sse) {
    const double value = sse(x, centroids, k);
    const double floor = std::numeric_limits<double>::epsilon();
    return value / std::max(baseline_sse, floor);
}

double gmm_loglik(const Dataset& x, const MixtureModel& theta) {
    x.validate();
    theta.validate();
    require(theta.kind == ModelKind::Gaussian, ErrorCode::invalid_argument,
            "log-likelihood needs a Gaussian mixture");
    require(theta.d == x.d, ErrorCode::dimension_mismatch,
            "mixture dimension does not match dataset");
    const double weight_sum = theta.weight_sum();
    require(weight_sum > 0.0, ErrorCode::invalid_argument,
            "mixture weights must not all be zero");

    const std::size_t k = theta.k;
    const std::size_t d = theta.d;

    // Per-component constants: log w_k - (1/2) sum_t log(2 pi s_kt^2).
    std::vector<double> log_const(k);
    for (std::size_t c = 0; c < k; ++c) {
        double lc = std::log(theta.weights[c] / weight_sum);
        for (std::size_t t = 0; t < d; ++t)
            lc -= 0.5 * std::log(2.0 * std::numbers::pi * theta.variances[c * d + t]);
        log_const[c] = lc;
    }

    double total = 0.0;
    std::vector<double> log_terms(k);
    for (std::size_t i = 0; i < x.n; ++i) {
        const double* xi = x.points.data() + i * d;
        double max_term = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            double quad = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = xi[t] - theta.centers[c * d + t];
                quad += diff * diff / theta.variances[c * d + t];
            }
            log_terms[c] = log_const[c] - 0.5 * quad;
            max_term = std::max(max_term, log_terms[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += std::exp(log_terms[c] - max_term);
        total += max_term + std::log(sum);
    }
    return total;
}

bool detect_failure(double cost_decoded, double cost_truth) {
    return cost_decoded > cost_truth;
}

EvaluationReport make_report_kmeans(double rsse_value) {
    EvaluationReport report;
    report.rsse = rsse_value;
    report.kmeans_success = rsse_value <= kSuccessThreshold;
    report.has_rsse = true;
    return report;
}

EvaluationReport make_report_gmm(double loglik_delta) {
    EvaluationReport report;
    const double clamped = std::min(std::max(loglik_delta, -700.0), 700.0);
    report.loglik_ratio = std::exp(clamped);
    report.gmm_success = loglik_delta >= -std::log(kSuccessThreshold);
    report.has_loglik = true;
    return report;
}

void attach_costs(EvaluationReport& report, double cost_decoded, double cost_truth) {
    report.cost_decoded = cost_decoded;
    report.cost_ground_truth = cost_truth;
    report.failure_detected = detect_failure(cost_decoded, cost_truth);
    report.has_costs = true;
}

}  // namespace skl
