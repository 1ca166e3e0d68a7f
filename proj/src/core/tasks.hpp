#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/types.hpp"

namespace skl {

struct KMeansResult {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> centroids;  // k x d
    double sse = 0.0;
    std::vector<double> sse_trace;  // per-iteration SSE of the winning restart
};

// Lloyd's algorithm with k-means++ seeding, run to the assignment fixpoint or
// 300 iterations, best of `restarts` runs by SSE. Empty clusters are reseeded
// at the point farthest from its assigned centroid.
KMeansResult lloyd_kmeans(const Dataset& x, std::size_t k, std::size_t restarts,
                          std::uint64_t seed);

// Sum over points of the squared distance to the nearest centroid.
double sse(const Dataset& x, std::span<const double> centroids, std::size_t k);

// sse(x, centroids) / baseline_sse; a nonpositive baseline (degenerate
// perfectly-clustered data) is floored at machine epsilon.
double relative_sse(const Dataset& x, std::span<const double> centroids,
                    std::size_t k, double baseline_sse);

// Log-likelihood of a diagonal-covariance Gaussian mixture, log-sum-exp
// stabilized. Weights are normalized internally (density semantics).
double gmm_loglik(const Dataset& x, const MixtureModel& theta);

// True iff the decoded cost is strictly above the ground-truth cost on the
// same sketch: certifies the decoder missed a better-scoring point.
bool detect_failure(double cost_decoded, double cost_truth);

struct EvaluationReport {
    double rsse = 0.0;
    double loglik_ratio = 0.0;
    bool kmeans_success = false;   // rsse <= 1.3
    bool gmm_success = false;      // loglik_ratio >= 1/1.3
    bool failure_detected = false; // cost_decoded > cost_ground_truth
    double cost_decoded = 0.0;
    double cost_ground_truth = 0.0;

    bool has_rsse = false;
    bool has_loglik = false;
    bool has_costs = false;
};

constexpr double kSuccessThreshold = 1.3;

// Success booleans derived from the raw fields; `loglik_delta` is
// loglik_decoded - loglik_truth (kept in log domain until the ratio is
// exported, so huge differences cannot overflow the decision).
EvaluationReport make_report_kmeans(double rsse_value);
EvaluationReport make_report_gmm(double loglik_delta);
void attach_costs(EvaluationReport& report, double cost_decoded, double cost_truth);

}  // namespace skl
