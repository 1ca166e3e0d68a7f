#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "core/rng.hpp"
#include "core/sketch.hpp"

using namespace skl;

namespace {

FrequencyMatrix manual_freqs(std::size_t d, std::vector<double> omega) {
    FrequencyMatrix f;
    f.m = omega.size() / d;
    f.d = d;
    f.law = FreqLaw::FoldedGaussian;
    f.sigma = 1.0;
    f.seed = 0;
    f.omega = std::move(omega);
    return f;
}

Dataset make_dataset(std::size_t d, std::vector<double> points) {
    Dataset x;
    x.d = d;
    x.n = points.size() / d;
    x.points = std::move(points);
    return x;
}

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

// Independent central-difference gradient of cost().
std::vector<double> fd_cost_gradient(const MixtureModel& theta, const Sketch& z,
                                     const FrequencyMatrix& freqs) {
    const bool gaussian = theta.kind == ModelKind::Gaussian;
    const std::size_t kd = theta.k * theta.d;
    const std::size_t n_params = theta.k + kd + (gaussian ? kd : 0);
    std::vector<double> grad(n_params);
    MixtureModel probe = theta;
    auto ref = [&](std::size_t i) -> double& {
        if (i < probe.k) return probe.weights[i];
        if (i < probe.k + kd) return probe.centers[i - probe.k];
        return probe.variances[i - probe.k - kd];
    };
    for (std::size_t i = 0; i < n_params; ++i) {
        const double orig = ref(i);
        const double h = 1e-5 * (1.0 + std::abs(orig));
        ref(i) = orig + h;
        const double hi = cost(probe, z, freqs);
        ref(i) = orig - h;
        const double lo = cost(probe, z, freqs);
        ref(i) = orig;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

double worst_rel_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("draw_frequencies is deterministic and prefix-stable") {
    FrequencyMatrix a = draw_frequencies(40, 3, FreqLaw::FoldedGaussian, 1.5, 99);
    FrequencyMatrix b = draw_frequencies(40, 3, FreqLaw::FoldedGaussian, 1.5, 99);
    CHECK(a.omega == b.omega);
    CHECK(a.fingerprint() == b.fingerprint());

    // The first rows of a longer draw equal a fresh shorter draw.
    FrequencyMatrix small = draw_frequencies(10, 3, FreqLaw::FoldedGaussian, 1.5, 99);
    FrequencyMatrix prefix = frequency_prefix(a, 10);
    CHECK(small.omega == prefix.omega);
    CHECK(small.fingerprint() == prefix.fingerprint());

    FrequencyMatrix other = draw_frequencies(40, 3, FreqLaw::FoldedGaussian, 1.5, 100);
    CHECK(a.omega != other.omega);
}

TEST_CASE("draw_frequencies rejects bad parameters") {
    CHECK_THROWS_AS(draw_frequencies(0, 3, FreqLaw::FoldedGaussian, 1.0, 0), Error);
    CHECK_THROWS_AS(draw_frequencies(3, 0, FreqLaw::FoldedGaussian, 1.0, 0), Error);
    CHECK_THROWS_AS(draw_frequencies(3, 3, FreqLaw::FoldedGaussian, 0.0, 0), Error);
    CHECK_THROWS_AS(draw_frequencies(3, 3, FreqLaw::FoldedGaussian, -2.0, 0), Error);
}

TEST_CASE("folded-Gaussian radius mean matches the half-normal closed form") {
    // In d=1 the radius is |w|; p_R ~ exp(-(sigma R)^2) is half-normal with
    // scale 1/(sigma sqrt 2), whose mean is 1/(sigma sqrt pi).
    const std::size_t m = 100000;
    const double sigma = 2.0;
    FrequencyMatrix f = draw_frequencies(m, 1, FreqLaw::FoldedGaussian, sigma, 12345);
    double mean = 0.0;
    for (double w : f.omega) mean += std::abs(w);
    mean /= static_cast<double>(m);
    const double expected = 1.0 / (sigma * std::sqrt(std::numbers::pi));
    const double scale = 1.0 / (sigma * std::numbers::sqrt2);
    const double se = scale * std::sqrt(1.0 - 2.0 / std::numbers::pi) /
                      std::sqrt(static_cast<double>(m));
    CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("adapted-radius mean matches independent quadrature") {
    // Simpson integration of t p(t) / integral p(t) with
    // p(t) = sqrt(t^2 + t^4/4) exp(-t^2) over [0, 8]; the sampler's table is
    // not used here.
    auto density = [](double t) {
        return std::sqrt(t * t + 0.25 * t * t * t * t) * std::exp(-t * t);
    };
    const int intervals = 1 << 20;
    const double h = 8.0 / intervals;
    double mass = 0.0, moment = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double t = h * i;
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        mass += w * density(t);
        moment += w * t * density(t);
    }
    const double expected_mean = moment / mass;  // sigma = 1

    const std::size_t m = 100000;
    FrequencyMatrix f = draw_frequencies(m, 1, FreqLaw::AdaptedRadius, 1.0, 777);
    double mean = 0.0;
    for (double w : f.omega) mean += std::abs(w);
    mean /= static_cast<double>(m);
    CHECK(std::abs(mean - expected_mean) / expected_mean < 0.01);

    // Scale equivariance: radii at sigma = 2 are half as large on average.
    FrequencyMatrix g = draw_frequencies(m, 1, FreqLaw::AdaptedRadius, 2.0, 777);
    double mean2 = 0.0;
    for (double w : g.omega) mean2 += std::abs(w);
    mean2 /= static_cast<double>(m);
    CHECK(std::abs(mean2 - expected_mean / 2.0) / expected_mean < 0.01);
}

TEST_CASE("empirical sketch of the origin is all ones") {
    Dataset x = make_dataset(3, {0.0, 0.0, 0.0});
    FrequencyMatrix f = draw_frequencies(16, 3, FreqLaw::FoldedGaussian, 1.0, 4);
    Sketch z = empirical_sketch(x, f);
    CHECK(z.n == 1);
    for (std::size_t j = 0; j < z.size(); ++j) {
        CHECK(z.re(j) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(z.im(j) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("empirical sketch matches direct complex arithmetic") {
    // X = {1, 2} in d=1 with a single frequency pi/2:
    // (exp(i pi/2) + exp(i pi)) / 2 = (-1 + i) / 2.
    Dataset x = make_dataset(1, {1.0, 2.0});
    FrequencyMatrix f = manual_freqs(1, {std::numbers::pi / 2.0});
    Sketch z = empirical_sketch(x, f);
    CHECK(z.re(0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(z.im(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empirical sketch entries have modulus at most one") {
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(4));
        const std::size_t n = 10 + static_cast<std::size_t>(rng.next_below(500));
        Dataset x;
        x.n = n;
        x.d = d;
        x.points.resize(n * d);
        for (double& v : x.points) v = rng.next_uniform(-10.0, 10.0);
        FrequencyMatrix f =
            draw_frequencies(24, d, FreqLaw::AdaptedRadius, 0.5, rng.next_u64());
        CHECK(empirical_sketch(x, f).max_modulus() <= 1.0 + 1e-12);
    }
}

TEST_CASE("empirical sketch rejects dimension mismatch") {
    Dataset x = make_dataset(2, {0.0, 0.0});
    FrequencyMatrix f = draw_frequencies(4, 3, FreqLaw::FoldedGaussian, 1.0, 0);
    CHECK_THROWS_AS(empirical_sketch(x, f), Error);
}

TEST_CASE("merging chunk sketches equals the whole-dataset sketch") {
    Rng rng(31);
    const std::size_t n = 257, d = 3;
    Dataset x;
    x.n = n;
    x.d = d;
    x.points.resize(n * d);
    for (double& v : x.points) v = rng.next_normal();
    FrequencyMatrix f = draw_frequencies(20, d, FreqLaw::FoldedGaussian, 1.0, 8);
    Sketch whole = empirical_sketch(x, f);

    // Three chunks of uneven size, merged in both association orders.
    auto slice = [&](std::size_t lo, std::size_t hi) {
        return make_dataset(
            d, {x.points.begin() + static_cast<std::ptrdiff_t>(lo * d),
                x.points.begin() + static_cast<std::ptrdiff_t>(hi * d)});
    };
    Sketch s1 = empirical_sketch(slice(0, 40), f);
    Sketch s2 = empirical_sketch(slice(40, 200), f);
    Sketch s3 = empirical_sketch(slice(200, n), f);

    Sketch left = merge_sketches(merge_sketches(s1, s2), s3);
    Sketch right = merge_sketches(s1, merge_sketches(s2, s3));
    CHECK(left.n == n);
    for (std::size_t i = 0; i < whole.values.size(); ++i) {
        CHECK(std::abs(left.values[i] - whole.values[i]) <= 1e-12);
        CHECK(std::abs(left.values[i] - right.values[i]) <= 1e-12);
    }

    // Idempotent average.
    Sketch same = merge_sketches(s1, s1);
    for (std::size_t i = 0; i < s1.values.size(); ++i)
        CHECK(same.values[i] == doctest::Approx(s1.values[i]).epsilon(1e-15));
}

TEST_CASE("parallel partition sketch agrees with the serial pass") {
    Rng rng(77);
    Dataset x;
    x.n = 1003;
    x.d = 2;
    x.points.resize(x.n * x.d);
    for (double& v : x.points) v = rng.next_normal();
    FrequencyMatrix f = draw_frequencies(12, 2, FreqLaw::FoldedGaussian, 1.0, 3);
    Sketch serial = empirical_sketch(x, f);
    Sketch parallel = empirical_sketch_parallel(x, f, 4);
    CHECK(parallel.n == serial.n);
    for (std::size_t i = 0; i < serial.values.size(); ++i)
        CHECK(std::abs(serial.values[i] - parallel.values[i]) <= 1e-12);
}

TEST_CASE("merge rejects incompatible sketches") {
    Dataset x = make_dataset(1, {0.5, 1.5});
    FrequencyMatrix f1 = draw_frequencies(8, 1, FreqLaw::FoldedGaussian, 1.0, 1);
    FrequencyMatrix f2 = draw_frequencies(8, 1, FreqLaw::FoldedGaussian, 1.0, 2);
    Sketch a = empirical_sketch(x, f1);
    Sketch b = empirical_sketch(x, f2);
    CHECK_THROWS_AS(merge_sketches(a, b), Error);

    // Model sketches (n = 0) are not mergeable.
    MixtureModel dirac = MixtureModel::dirac(1, 1);
    dirac.weights = {1.0};
    Sketch ms = model_sketch(dirac, f1);
    CHECK_THROWS_AS(merge_sketches(a, ms), Error);
}

TEST_CASE("model sketch of a Dirac at the origin is all ones") {
    MixtureModel model = MixtureModel::dirac(1, 4);
    model.weights = {1.0};
    FrequencyMatrix f = draw_frequencies(10, 4, FreqLaw::FoldedGaussian, 1.0, 5);
    Sketch z = model_sketch(model, f);
    CHECK(z.n == 0);
    for (std::size_t j = 0; j < z.size(); ++j) {
        CHECK(z.re(j) == doctest::Approx(1.0));
        CHECK(z.im(j) == doctest::Approx(0.0));
    }
}

TEST_CASE("zero-mean Gaussian model sketch is the real characteristic function") {
    const double s2 = 0.7;
    MixtureModel model = MixtureModel::gaussian(1, 3);
    model.weights = {1.0};
    for (double& v : model.variances) v = s2;
    FrequencyMatrix f = draw_frequencies(12, 3, FreqLaw::FoldedGaussian, 1.0, 6);
    Sketch z = model_sketch(model, f);
    for (std::size_t j = 0; j < z.size(); ++j) {
        double norm_sq = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
            const double w = f.omega[j * 3 + t];
            norm_sq += w * w;
        }
        CHECK(z.re(j) == doctest::Approx(std::exp(-s2 * norm_sq / 2.0)).epsilon(1e-12));
        CHECK(z.im(j) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("Gaussian model sketch matches a Monte Carlo sampling oracle") {
    MixtureModel model = MixtureModel::gaussian(1, 2);
    model.weights = {1.0};
    model.centers = {0.4, -1.2};
    model.variances = {0.5, 1.5};
    FrequencyMatrix f = draw_frequencies(8, 2, FreqLaw::FoldedGaussian, 1.0, 9);
    Sketch analytic = model_sketch(model, f);

    Rng rng(555);
    const std::size_t n = 1000000;
    Dataset x;
    x.n = n;
    x.d = 2;
    x.points.resize(n * 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < 2; ++t)
            x.points[i * 2 + t] =
                model.centers[t] + std::sqrt(model.variances[t]) * rng.next_normal();
    Sketch sampled = empirical_sketch(x, f);
    for (std::size_t j = 0; j < analytic.size(); ++j) {
        CHECK(std::abs(analytic.re(j) - sampled.re(j)) < 5e-3);
        CHECK(std::abs(analytic.im(j) - sampled.im(j)) < 5e-3);
    }
}

TEST_CASE("model sketch with weights summing to at most one stays bounded") {
    Rng rng(91);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(3));
        const std::size_t k = 1 + static_cast<std::size_t>(rng.next_below(4));
        MixtureModel model = random_model(rng, ModelKind::Gaussian, k, d);
        const double sum = model.weight_sum();
        for (double& w : model.weights) w /= sum;  // sum exactly 1
        FrequencyMatrix f =
            draw_frequencies(16, d, FreqLaw::FoldedGaussian, 1.0, rng.next_u64());
        CHECK(model_sketch(model, f).max_modulus() <= 1.0 + 1e-12);
    }
}

TEST_CASE("cost examples") {
    FrequencyMatrix f = draw_frequencies(15, 2, FreqLaw::FoldedGaussian, 1.0, 10);
    Rng rng(17);
    MixtureModel model = random_model(rng, ModelKind::Dirac, 2, 2);

    // Zero residual at the generating model.
    Sketch z = model_sketch(model, f);
    CHECK(cost(model, z, f) == doctest::Approx(0.0).epsilon(1e-14));

    // All-ones sketch against a unit Dirac at the origin.
    MixtureModel origin = MixtureModel::dirac(1, 2);
    origin.weights = {1.0};
    Sketch ones;
    ones.values.assign(2 * f.m, 0.0);
    for (std::size_t j = 0; j < f.m; ++j) ones.values[2 * j] = 1.0;
    ones.fingerprint = f.fingerprint();
    CHECK(cost(origin, ones, f) == doctest::Approx(0.0).epsilon(1e-14));

    // All-zeros sketch: each entry contributes |weight * unit modulus|^2.
    MixtureModel far = MixtureModel::dirac(1, 2);
    far.weights = {1.0};
    far.centers = {1.3, -0.4};
    Sketch zeros;
    zeros.values.assign(2 * f.m, 0.0);
    zeros.fingerprint = f.fingerprint();
    CHECK(cost(far, zeros, f) == doctest::Approx(static_cast<double>(f.m)).epsilon(1e-12));
}

TEST_CASE("cost gradient matches finite differences on random configurations") {
    Rng rng(23);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(5));
        const std::size_t k = 1 + static_cast<std::size_t>(rng.next_below(4));
        const std::size_t m = 8 + static_cast<std::size_t>(rng.next_below(57));
        const ModelKind kind =
            rep % 2 == 0 ? ModelKind::Dirac : ModelKind::Gaussian;
        FrequencyMatrix f =
            draw_frequencies(m, d, FreqLaw::FoldedGaussian, 1.0, rng.next_u64());
        MixtureModel target = random_model(rng, kind, k, d);
        Sketch z = model_sketch(target, f);
        MixtureModel probe = random_model(rng, kind, k, d);

        const auto analytic = cost_gradient(probe, z, f);
        const auto fd = fd_cost_gradient(probe, z, f);
        CHECK(worst_rel_error(analytic, fd) <= 1e-5);
    }
}

TEST_CASE("gradient vanishes at a zero-cost model") {
    Rng rng(29);
    MixtureModel model = random_model(rng, ModelKind::Gaussian, 2, 2);
    FrequencyMatrix f = draw_frequencies(12, 2, FreqLaw::FoldedGaussian, 1.0, 30);
    Sketch z = model_sketch(model, f);
    for (double g : cost_gradient(model, z, f))
        CHECK(std::abs(g) <= 1e-10);
}

TEST_CASE("Dirac cost is flat along frequency-null directions") {
    // With m < d the frequencies span a proper subspace; translating all
    // centers along a null direction cannot change any omega . c.
    FrequencyMatrix f = draw_frequencies(2, 3, FreqLaw::FoldedGaussian, 1.0, 31);
    const double* w0 = f.omega.data();
    const double* w1 = f.omega.data() + 3;
    const std::vector<double> null_dir = {
        w0[1] * w1[2] - w0[2] * w1[1],
        w0[2] * w1[0] - w0[0] * w1[2],
        w0[0] * w1[1] - w0[1] * w1[0],
    };
    Rng rng(37);
    MixtureModel target = random_model(rng, ModelKind::Dirac, 2, 3);
    MixtureModel probe = random_model(rng, ModelKind::Dirac, 2, 3);
    Sketch z = model_sketch(target, f);
    const auto grad = cost_gradient(probe, z, f);
    for (std::size_t a = 0; a < probe.k; ++a) {
        double directional = 0.0;
        for (std::size_t t = 0; t < 3; ++t)
            directional += grad[probe.k + a * 3 + t] * null_dir[t];
        CHECK(std::abs(directional) <= 1e-9);
    }
}

TEST_CASE("atom correlation equality case and zero residual") {
    FrequencyMatrix f = draw_frequencies(20, 2, FreqLaw::FoldedGaussian, 1.0, 41);
    MixtureModel atom = MixtureModel::gaussian(1, 2);
    atom.weights = {1.0};
    atom.centers = {0.3, -0.7};
    atom.variances = {0.4, 0.9};

    Sketch own = model_sketch(atom, f);
    double norm = 0.0;
    for (double v : own.values) norm += v * v;
    norm = std::sqrt(norm);

    AtomCorrelation corr = atom_correlation(atom, own, f);
    CHECK(corr.value == doctest::Approx(norm).epsilon(1e-10));

    Sketch zero;
    zero.values.assign(2 * f.m, 0.0);
    zero.fingerprint = f.fingerprint();
    CHECK(atom_correlation(atom, zero, f).value == doctest::Approx(0.0));
}

TEST_CASE("atom correlation gradient matches finite differences") {
    Rng rng(43);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.next_below(4));
        const ModelKind kind = rep % 2 == 0 ? ModelKind::Dirac : ModelKind::Gaussian;
        FrequencyMatrix f =
            draw_frequencies(16, d, FreqLaw::FoldedGaussian, 1.0, rng.next_u64());
        MixtureModel target = random_model(rng, kind, 2, d);
        Sketch residual = model_sketch(target, f);

        MixtureModel atom = random_model(rng, kind, 1, d);
        atom.weights = {1.0};
        AtomCorrelation corr = atom_correlation(atom, residual, f);

        const std::size_t n_params = corr.gradient.size();
        std::vector<double> fd(n_params);
        MixtureModel probe = atom;
        auto ref = [&](std::size_t i) -> double& {
            return i < d ? probe.centers[i] : probe.variances[i - d];
        };
        for (std::size_t i = 0; i < n_params; ++i) {
            const double orig = ref(i);
            const double h = 1e-5 * (1.0 + std::abs(orig));
            ref(i) = orig + h;
            const double hi = atom_correlation(probe, residual, f).value;
            ref(i) = orig - h;
            const double lo = atom_correlation(probe, residual, f).value;
            ref(i) = orig;
            fd[i] = (hi - lo) / (2.0 * h);
        }
        CHECK(worst_rel_error(corr.gradient, fd) <= 1e-5);
    }
}

TEST_CASE("degenerate atoms are rejected") {
    FrequencyMatrix f = draw_frequencies(8, 2, FreqLaw::FoldedGaussian, 1e-3, 47);
    MixtureModel atom = MixtureModel::gaussian(1, 2);
    atom.weights = {1.0};
    atom.variances = {1e9, 1e9};  // damping underflows at these frequencies
    Sketch residual;
    residual.values.assign(2 * f.m, 0.1);
    residual.fingerprint = f.fingerprint();
    CHECK_THROWS_AS(atom_correlation(atom, residual, f), Error);

    // Unit weight is required.
    MixtureModel heavy = MixtureModel::dirac(1, 2);
    heavy.weights = {2.0};
    CHECK_THROWS_AS(atom_correlation(heavy, residual, f), Error);
}

TEST_CASE("scale heuristic tracks the per-coordinate spread") {
    Rng rng(53);
    Dataset x;
    x.n = 10000;
    x.d = 5;
    x.points.resize(x.n * x.d);
    for (double& v : x.points) v = rng.next_normal();

    // E||x - x'||^2 = 2d for standard normal pairs, so sigma_hat ~ 1.
    const double sigma = scale_heuristic(x, 2000, 7);
    CHECK(sigma == doctest::Approx(1.0).epsilon(0.1));

    // Homogeneity: scaling the data scales the estimate.
    Dataset scaled = x;
    for (double& v : scaled.points) v *= 3.0;
    const double sigma3 = scale_heuristic(scaled, 2000, 7);
    CHECK(sigma3 == doctest::Approx(3.0 * sigma).epsilon(1e-12));
}

TEST_CASE("scale heuristic rejects degenerate inputs") {
    Dataset same = make_dataset(2, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0});
    CHECK_THROWS_AS(scale_heuristic(same, 3, 0), Error);

    Dataset single = make_dataset(1, {4.0});
    CHECK_THROWS_AS(scale_heuristic(single, 2, 0), Error);
    Dataset two = make_dataset(1, {0.0, 1.0});
    CHECK_THROWS_AS(scale_heuristic(two, 1, 0), Error);
}

TEST_CASE("sketch determinism across repeated draws") {
    Dataset x = make_dataset(2, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6});
    FrequencyMatrix f = draw_frequencies(6, 2, FreqLaw::AdaptedRadius, 1.3, 61);
    Sketch a = empirical_sketch(x, f);
    Sketch b = empirical_sketch(x, f);
    CHECK(a.values == b.values);
    CHECK(a.fingerprint == b.fingerprint);
}
