#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "core/rng.hpp"
#include "core/tasks.hpp"

using namespace skl;

namespace {

Dataset make_dataset(std::size_t d, std::vector<double> points) {
    Dataset x;
    x.d = d;
    x.n = points.size() / d;
    x.points = std::move(points);
    return x;
}

}  // namespace

TEST_CASE("lloyd recovers exactly separable clusters") {
    Dataset x = make_dataset(1, {0.0, 0.0, 10.0, 10.0});
    KMeansResult res = lloyd_kmeans(x, 2, 5, 1);
    CHECK(res.sse == doctest::Approx(0.0));
    std::vector<double> centroids = res.centroids;
    std::sort(centroids.begin(), centroids.end());
    CHECK(centroids[0] == doctest::Approx(0.0));
    CHECK(centroids[1] == doctest::Approx(10.0));
}

TEST_CASE("k equal to n gives zero SSE") {
    Dataset x = make_dataset(2, {0.0, 0.0, 1.0, 1.0, 2.0, 2.0});
    KMeansResult res = lloyd_kmeans(x, 3, 3, 7);
    CHECK(res.sse == doctest::Approx(0.0));
}

TEST_CASE("single centroid is the mean") {
    Dataset x = make_dataset(1, {0.0, 2.0});
    KMeansResult res = lloyd_kmeans(x, 1, 1, 0);
    CHECK(res.centroids[0] == doctest::Approx(1.0));
    CHECK(res.sse == doctest::Approx(2.0));
}

TEST_CASE("k larger than n is rejected") {
    Dataset x = make_dataset(1, {0.0, 1.0});
    CHECK_THROWS_AS(lloyd_kmeans(x, 3, 1, 0), Error);
}

TEST_CASE("duplicate-heavy data exercises the empty-cluster reseed") {
    // Only two distinct locations but K = 3: some restart will seed two
    // centroids on the same spot and leave one cluster empty.
    Dataset x = make_dataset(1, {0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 11.0});
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        KMeansResult res = lloyd_kmeans(x, 3, 2, seed);
        CHECK(res.centroids.size() == 3);
        CHECK(res.sse <= 2.0 + 1e-12);  // {0}, {10,11} split or better
        CHECK(std::isfinite(res.sse));
    }
}

TEST_CASE("lloyd SSE trace is nonincreasing") {
    Rng rng(19);
    Dataset x;
    x.n = 500;
    x.d = 2;
    x.points.resize(x.n * x.d);
    for (double& v : x.points) v = rng.next_normal() * 2.0;
    KMeansResult res = lloyd_kmeans(x, 5, 3, 11);
    REQUIRE(res.sse_trace.size() > 1);
    for (std::size_t i = 1; i < res.sse_trace.size(); ++i)
        CHECK(res.sse_trace[i] <= res.sse_trace[i - 1] + 1e-9);
}

TEST_CASE("sse examples and invariances") {
    Dataset x = make_dataset(1, {0.0, 2.0});
    std::vector<double> centroid = {1.0};
    CHECK(sse(x, centroid, 1) == doctest::Approx(2.0));

    // Centroids equal to the data give zero.
    std::vector<double> exact = {0.0, 2.0};
    CHECK(sse(x, exact, 2) == doctest::Approx(0.0));

    // Duplicating a centroid changes nothing.
    std::vector<double> dup = {1.0, 1.0};
    CHECK(sse(x, dup, 2) == doctest::Approx(sse(x, centroid, 1)));

    // Permutation invariance over centroids and points.
    Dataset y = make_dataset(2, {0.0, 1.0, 3.0, -1.0, 2.0, 2.0});
    std::vector<double> cents = {0.5, 0.5, 2.5, 1.0};
    Dataset y_perm = make_dataset(2, {2.0, 2.0, 0.0, 1.0, 3.0, -1.0});
    std::vector<double> cents_perm = {2.5, 1.0, 0.5, 0.5};
    CHECK(sse(y, cents, 2) == doctest::Approx(sse(y_perm, cents_perm, 2)));

    CHECK_THROWS_AS(sse(x, std::vector<double>{}, 0), Error);
}

TEST_CASE("relative sse") {
    Dataset x = make_dataset(1, {0.0, 1.0, 2.0, 3.0});
    KMeansResult lloyd = lloyd_kmeans(x, 2, 5, 3);
    CHECK(relative_sse(x, lloyd.centroids, 2, lloyd.sse) == doctest::Approx(1.0));

    std::vector<double> worse = {-5.0, 9.0};
    CHECK(relative_sse(x, worse, 2, lloyd.sse) > 1.0);

    // Zero baseline falls back to the epsilon floor instead of dividing by 0.
    std::vector<double> exact = {0.5, 2.5};
    const double r = relative_sse(x, exact, 2, 0.0);
    CHECK(std::isfinite(r));
}

TEST_CASE("success threshold is inclusive at 1.3") {
    EvaluationReport at = make_report_kmeans(1.3);
    CHECK(at.kmeans_success);
    EvaluationReport above = make_report_kmeans(1.3 + 1e-9);
    CHECK_FALSE(above.kmeans_success);
}

TEST_CASE("gmm log-likelihood closed form") {
    MixtureModel theta = MixtureModel::gaussian(1, 1);
    theta.weights = {1.0};
    theta.centers = {0.0};
    theta.variances = {1.0};
    Dataset x = make_dataset(1, {0.0});
    CHECK(gmm_loglik(x, theta) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("gmm log-likelihood structural properties") {
    Rng rng(23);
    MixtureModel theta = MixtureModel::gaussian(2, 2);
    theta.weights = {0.3, 0.7};
    theta.centers = {0.0, 0.0, 2.0, -1.0};
    theta.variances = {1.0, 0.5, 0.8, 1.2};

    Dataset x;
    x.n = 50;
    x.d = 2;
    x.points.resize(100);
    for (double& v : x.points) v = rng.next_normal();

    const double base = gmm_loglik(x, theta);

    // Duplicating every point doubles the sum.
    Dataset doubled = x;
    doubled.n = 2 * x.n;
    doubled.points.insert(doubled.points.end(), x.points.begin(), x.points.end());
    CHECK(gmm_loglik(doubled, theta) == doctest::Approx(2.0 * base).epsilon(1e-12));

    // Permuting components changes nothing.
    MixtureModel swapped = theta;
    std::swap(swapped.weights[0], swapped.weights[1]);
    for (std::size_t t = 0; t < 2; ++t) {
        std::swap(swapped.centers[t], swapped.centers[2 + t]);
        std::swap(swapped.variances[t], swapped.variances[2 + t]);
    }
    CHECK(gmm_loglik(x, swapped) == doctest::Approx(base).epsilon(1e-12));

    // Extreme variances hurt the fit in both directions.
    MixtureModel wide = theta;
    for (double& v : wide.variances) v *= 1e6;
    CHECK(gmm_loglik(x, wide) < base);
    MixtureModel narrow = theta;
    for (double& v : narrow.variances) v *= 1e-6;
    CHECK(gmm_loglik(x, narrow) < base);
}

TEST_CASE("gmm log-likelihood rejects bad models") {
    Dataset x = make_dataset(1, {0.0});
    MixtureModel dirac = MixtureModel::dirac(1, 1);
    dirac.weights = {1.0};
    CHECK_THROWS_AS(gmm_loglik(x, dirac), Error);

    MixtureModel bad = MixtureModel::gaussian(1, 1);
    bad.weights = {1.0};
    bad.variances = {-1.0};
    CHECK_THROWS_AS(gmm_loglik(x, bad), Error);
}

TEST_CASE("failure detection is a strict comparison") {
    CHECK(detect_failure(0.5, 0.4));
    CHECK_FALSE(detect_failure(0.4, 0.4));
    CHECK_FALSE(detect_failure(0.3, 0.4));
}

TEST_CASE("report booleans satisfy their biconditionals") {
    Rng rng(29);
    for (int rep = 0; rep < 200; ++rep) {
        const double rsse = std::exp(rng.next_uniform(-1.0, 2.0));
        EvaluationReport report = make_report_kmeans(rsse);
        CHECK(report.kmeans_success == (report.rsse <= 1.3));

        const double delta = rng.next_uniform(-2.0, 2.0);
        EvaluationReport gmm = make_report_gmm(delta);
        CHECK(gmm.gmm_success == (gmm.loglik_ratio >= 1.0 / 1.3));

        const double cd = rng.next_unit(), ct = rng.next_unit();
        attach_costs(report, cd, ct);
        CHECK(report.failure_detected == (report.cost_decoded > report.cost_ground_truth));
    }
}

TEST_CASE("gmm success boundary uses the log domain safely") {
    // Huge likelihood gaps must not overflow the decision.
    EvaluationReport lost = make_report_gmm(-5000.0);
    CHECK_FALSE(lost.gmm_success);
    CHECK(lost.loglik_ratio >= 0.0);
    EvaluationReport won = make_report_gmm(5000.0);
    CHECK(won.gmm_success);
    CHECK(std::isfinite(won.loglik_ratio));
}
