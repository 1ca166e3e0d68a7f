#include "core/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "core/rng.hpp"

namespace skl {

namespace {

// Inverse-CDF table for the adapted-radius law at sigma = 1, built once by
// trapezoidal integration of p(t) ~ sqrt(t^2 + t^4/4) exp(-t^2) on a grid of
// 2^14 points over [0, 8]. The table is scale-free: a draw at scale sigma is
// t / sigma. [0, 8] covers all but < 1e-10 of the mass.
class AdaptedRadiusTable {
public:
    static const AdaptedRadiusTable& instance() {
        static const AdaptedRadiusTable table;
        return table;
    }

    double sample(double u) const {
        // Binary search for the CDF segment, then linear interpolation.
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return 0.0;
        if (it == cdf_.end()) return t_max;
        const std::size_t hi = static_cast<std::size_t>(it - cdf_.begin());
        const std::size_t lo = hi - 1;
        const double span = cdf_[hi] - cdf_[lo];
        const double frac = span > 0.0 ? (u - cdf_[lo]) / span : 0.0;
        return step_ * (static_cast<double>(lo) + frac);
    }

private:
    static constexpr std::size_t kPoints = 1 << 14;
    static constexpr double t_max = 8.0;

    AdaptedRadiusTable() : cdf_(kPoints), step_(t_max / (kPoints - 1)) {
        double prev = density(0.0);
        cdf_[0] = 0.0;
        for (std::size_t i = 1; i < kPoints; ++i) {
            const double cur = density(step_ * static_cast<double>(i));
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * step_;
            prev = cur;
        }
        const double total = cdf_.back();
        for (double& c : cdf_) c /= total;
    }

    static double density(double t) {
        const double t2 = t * t;
        return std::sqrt(t2 + 0.25 * t2 * t2) * std::exp(-t2);
    }

    std::vector<double> cdf_;
    double step_;
};

double draw_radius(FreqLaw law, double sigma, Rng& rng) {
    if (law == FreqLaw::FoldedGaussian) {
        // p_R ~ exp(-(sigma R)^2) is half-normal with scale 1/(sigma sqrt 2).
        return std::abs(rng.next_normal()) / (sigma * std::numbers::sqrt2);
    }
    return AdaptedRadiusTable::instance().sample(rng.next_unit()) / sigma;
}

}  // namespace

FrequencyMatrix draw_frequencies(std::size_t m, std::size_t d, FreqLaw law,
                                 double sigma, std::uint64_t seed) {
    require(m >= 1 && d >= 1, ErrorCode::invalid_argument,
            "draw_frequencies needs m >= 1 and d >= 1");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_argument,
            "draw_frequencies needs sigma > 0");

    FrequencyMatrix freqs;
    freqs.m = m;
    freqs.d = d;
    freqs.law = law;
    freqs.sigma = sigma;
    freqs.seed = seed;
    freqs.omega.resize(m * d);

    Rng rng(seed);
    std::vector<double> dir(d);
    for (std::size_t j = 0; j < m; ++j) {
        double norm_sq = 0.0;
        do {
            norm_sq = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                dir[t] = rng.next_normal();
                norm_sq += dir[t] * dir[t];
            }
        } while (norm_sq < 1e-280);
        const double radius = draw_radius(law, sigma, rng);
        const double scale = radius / std::sqrt(norm_sq);
        double* row = freqs.omega.data() + j * d;
        for (std::size_t t = 0; t < d; ++t) row[t] = scale * dir[t];
    }
    return freqs;
}

FrequencyMatrix frequency_prefix(const FrequencyMatrix& freqs, std::size_t m) {
    require(m >= 1 && m <= freqs.m, ErrorCode::invalid_argument,
            "frequency prefix length out of range");
    FrequencyMatrix out = freqs;
    out.m = m;
    out.omega.assign(freqs.omega.begin(),
                     freqs.omega.begin() + static_cast<std::ptrdiff_t>(m * freqs.d));
    return out;
}

double scale_heuristic(const Dataset& x, std::size_t subsample_size,
                       std::uint64_t seed) {
    x.validate();
    require(subsample_size >= 2, ErrorCode::invalid_argument,
            "scale heuristic needs a subsample of at least 2 points");
    require(x.n >= 2, ErrorCode::invalid_argument,
            "scale heuristic needs at least 2 data points");

    Rng rng = Rng(seed).derive(0x5CA1E);
    const std::size_t s = std::min(subsample_size, x.n);

    // Partial Fisher-Yates: the first s entries become the subsample.
    std::vector<std::size_t> idx(x.n);
    for (std::size_t i = 0; i < x.n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(x.n - i));
        std::swap(idx[i], idx[j]);
    }

    constexpr std::size_t kPairs = 1000;
    double sum = 0.0;
    for (std::size_t p = 0; p < kPairs; ++p) {
        const std::size_t a = static_cast<std::size_t>(rng.next_below(s));
        std::size_t b = static_cast<std::size_t>(rng.next_below(s - 1));
        if (b >= a) ++b;
        const double* xa = x.points.data() + idx[a] * x.d;
        const double* xb = x.points.data() + idx[b] * x.d;
        double dist_sq = 0.0;
        for (std::size_t t = 0; t < x.d; ++t) {
            const double diff = xa[t] - xb[t];
            dist_sq += diff * diff;
        }
        sum += dist_sq;
    }
    const double sigma_sq = sum / (kPairs * 2.0 * static_cast<double>(x.d));
    require(sigma_sq > 0.0, ErrorCode::degenerate_scale,
            "scale heuristic degenerate: all sampled pairs coincide");
    return std::sqrt(sigma_sq);
}

namespace {

void sketch_rows(const Dataset& x, const FrequencyMatrix& freqs,
                 std::size_t row_begin, std::size_t row_end,
                 std::span<long double> acc) {
    const std::size_t m = freqs.m;
    const std::size_t d = freqs.d;
    for (std::size_t i = row_begin; i < row_end; ++i) {
        const double* xi = x.points.data() + i * d;
        const double* w = freqs.omega.data();
        for (std::size_t j = 0; j < m; ++j, w += d) {
            double phase = 0.0;
            for (std::size_t t = 0; t < d; ++t) phase += w[t] * xi[t];
            acc[2 * j] += std::cos(phase);
            acc[2 * j + 1] += std::sin(phase);
        }
    }
}

}  // namespace

Sketch empirical_sketch(const Dataset& x, const FrequencyMatrix& freqs) {
    x.validate();
    freqs.validate();
    require(x.d == freqs.d, ErrorCode::dimension_mismatch,
            "dataset dimension does not match frequency dimension");

    std::vector<long double> acc(2 * freqs.m, 0.0L);
    sketch_rows(x, freqs, 0, x.n, acc);

    Sketch z;
    z.values.resize(2 * freqs.m);
    const long double inv_n = 1.0L / static_cast<long double>(x.n);
    for (std::size_t j = 0; j < acc.size(); ++j)
        z.values[j] = static_cast<double>(acc[j] * inv_n);
    z.n = x.n;
    z.fingerprint = freqs.fingerprint();
    return z;
}

Sketch empirical_sketch_parallel(const Dataset& x, const FrequencyMatrix& freqs,
                                 unsigned workers) {
    if (workers <= 1 || x.n < 2 * workers) return empirical_sketch(x, freqs);

    // Partition rows, sketch each chunk, merge. Matches the serial result to
    // within reassociation tolerance.
    const std::size_t chunk = (x.n + workers - 1) / workers;
    Sketch merged;
    bool first = true;
    for (std::size_t begin = 0; begin < x.n; begin += chunk) {
        const std::size_t end = std::min(begin + chunk, x.n);
        Dataset part;
        part.n = end - begin;
        part.d = x.d;
        part.points.assign(x.points.begin() + static_cast<std::ptrdiff_t>(begin * x.d),
                           x.points.begin() + static_cast<std::ptrdiff_t>(end * x.d));
        Sketch piece = empirical_sketch(part, freqs);
        merged = first ? piece : merge_sketches(merged, piece);
        first = false;
    }
    return merged;
}

Sketch merge_sketches(const Sketch& a, const Sketch& b) {
    require(a.fingerprint == b.fingerprint, ErrorCode::incompatible_sketch,
            "cannot merge sketches of different frequency draws");
    require(a.values.size() == b.values.size(), ErrorCode::incompatible_sketch,
            "cannot merge sketches of different sizes");
    require(a.n >= 1 && b.n >= 1, ErrorCode::invalid_argument,
            "only empirical sketches (n >= 1) can be merged");

    Sketch out;
    out.values.resize(a.values.size());
    const double na = static_cast<double>(a.n);
    const double nb = static_cast<double>(b.n);
    const double inv = 1.0 / (na + nb);
    for (std::size_t j = 0; j < a.values.size(); ++j)
        out.values[j] = (na * a.values[j] + nb * b.values[j]) * inv;
    out.n = a.n + b.n;
    out.fingerprint = a.fingerprint;
    return out;
}

namespace detail {

void unit_atom_sketch(ModelKind kind, std::size_t d, std::span<const double> center,
                      std::span<const double> variance, const FrequencyMatrix& freqs,
                      std::span<double> out) {
    const std::size_t m = freqs.m;
    const double* w = freqs.omega.data();
    if (kind == ModelKind::Dirac) {
        for (std::size_t j = 0; j < m; ++j, w += d) {
            double phase = 0.0;
            for (std::size_t t = 0; t < d; ++t) phase += w[t] * center[t];
            out[2 * j] = std::cos(phase);
            out[2 * j + 1] = std::sin(phase);
        }
    } else {
        for (std::size_t j = 0; j < m; ++j, w += d) {
            double phase = 0.0;
            double g = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                phase += w[t] * center[t];
                g += w[t] * w[t] * variance[t];
            }
            const double damp = std::exp(-0.5 * g);
            out[2 * j] = damp * std::cos(phase);
            out[2 * j + 1] = damp * std::sin(phase);
        }
    }
}

void model_sketch_raw(ModelKind kind, std::size_t k, std::size_t d,
                      std::span<const double> weights,
                      std::span<const double> centers,
                      std::span<const double> variances,
                      const FrequencyMatrix& freqs, std::span<double> out) {
    const std::size_t m = freqs.m;
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> atom(2 * m);
    for (std::size_t a = 0; a < k; ++a) {
        unit_atom_sketch(kind, d, centers.subspan(a * d, d),
                         kind == ModelKind::Gaussian ? variances.subspan(a * d, d)
                                                     : std::span<const double>{},
                         freqs, atom);
        const double wa = weights[a];
        for (std::size_t j = 0; j < 2 * m; ++j) out[j] += wa * atom[j];
    }
}

double cost_grad_raw(ModelKind kind, std::size_t k, std::size_t d,
                     std::span<const double> weights,
                     std::span<const double> centers,
                     std::span<const double> variances,
                     const FrequencyMatrix& freqs, std::span<const double> z,
                     std::span<double> grad_w, std::span<double> grad_c,
                     std::span<double> grad_v, SketchScratch& scratch) {
    const std::size_t m = freqs.m;
    const bool gaussian = kind == ModelKind::Gaussian;
    const bool want_grad = !grad_w.empty() || !grad_c.empty() || !grad_v.empty();

    scratch.atoms.resize(k * 2 * m);

    // Residual e = A(P_theta) - z, accumulated while the atom sketches are
    // computed so each atom entry is evaluated exactly once.
    std::vector<double>& atoms = scratch.atoms;
    std::vector<double> residual(2 * m);
    for (std::size_t j = 0; j < 2 * m; ++j) residual[j] = -z[j];
    for (std::size_t a = 0; a < k; ++a) {
        double* atom = atoms.data() + a * 2 * m;
        unit_atom_sketch(kind, d, centers.subspan(a * d, d),
                         gaussian ? variances.subspan(a * d, d)
                                  : std::span<const double>{},
                         freqs, {atom, 2 * m});
        const double wa = weights[a];
        for (std::size_t j = 0; j < 2 * m; ++j) residual[j] += wa * atom[j];
    }

    double value = 0.0;
    for (std::size_t j = 0; j < 2 * m; ++j) value += residual[j] * residual[j];
    if (!want_grad) return value;

    for (std::size_t a = 0; a < k; ++a) {
        const double* atom = atoms.data() + a * 2 * m;
        const double* w = freqs.omega.data();
        const double wa = weights[a];
        double dw = 0.0;
        double* gc = grad_c.empty() ? nullptr : grad_c.data() + a * d;
        double* gv = grad_v.empty() ? nullptr : grad_v.data() + a * d;
        if (gc) std::fill(gc, gc + d, 0.0);
        if (gv) std::fill(gv, gv + d, 0.0);
        for (std::size_t j = 0; j < m; ++j, w += d) {
            const double ar = atom[2 * j], ai = atom[2 * j + 1];
            const double er = residual[2 * j], ei = residual[2 * j + 1];
            // conj(a) * e
            const double re = ar * er + ai * ei;
            const double im = ar * ei - ai * er;
            dw += re;
            if (gc)
                for (std::size_t t = 0; t < d; ++t) gc[t] += 2.0 * wa * w[t] * im;
            if (gv)
                for (std::size_t t = 0; t < d; ++t) gv[t] -= wa * w[t] * w[t] * re;
        }
        if (!grad_w.empty()) grad_w[a] = 2.0 * dw;
    }
    return value;
}

double atom_correlation_raw(ModelKind kind, std::size_t d,
                            std::span<const double> center,
                            std::span<const double> variance,
                            const FrequencyMatrix& freqs,
                            std::span<const double> residual,
                            std::span<double> grad_c, std::span<double> grad_v) {
    const std::size_t m = freqs.m;

    std::vector<double> atom(2 * m);
    unit_atom_sketch(kind, d, center, variance, freqs, atom);

    double norm_sq = 0.0;
    double inner = 0.0;  // Re<a, r>
    for (std::size_t j = 0; j < 2 * m; ++j) {
        norm_sq += atom[j] * atom[j];
        inner += atom[j] * residual[j];
    }
    require(norm_sq > 1e-280, ErrorCode::degenerate_atom,
            "atom sketch has (numerically) zero norm");
    const double norm = std::sqrt(norm_sq);
    const double value = inner / norm;

    if (grad_c.empty() && grad_v.empty()) return value;

    if (!grad_c.empty()) std::fill(grad_c.begin(), grad_c.end(), 0.0);
    if (!grad_v.empty()) std::fill(grad_v.begin(), grad_v.end(), 0.0);

    // dS[t] = d Re<a,r> / d center_t, dSv[t] = d Re<a,r> / d variance_t,
    // dNv[t] = d ||a||^2 / d variance_t (centers do not move the norm).
    std::vector<double> dS(grad_c.empty() ? 0 : d, 0.0);
    std::vector<double> dSv(grad_v.empty() ? 0 : d, 0.0);
    std::vector<double> dNv(grad_v.empty() ? 0 : d, 0.0);

    const double* w = freqs.omega.data();
    for (std::size_t j = 0; j < m; ++j, w += d) {
        const double ar = atom[2 * j], ai = atom[2 * j + 1];
        const double rr = residual[2 * j], ri = residual[2 * j + 1];
        const double re = ar * rr + ai * ri;   // Re(conj(a) r)
        const double im = ar * ri - ai * rr;   // Im(conj(a) r)
        if (!grad_c.empty())
            for (std::size_t t = 0; t < d; ++t) dS[t] += w[t] * im;
        if (!grad_v.empty()) {
            const double mod_sq = ar * ar + ai * ai;
            for (std::size_t t = 0; t < d; ++t) {
                const double w2 = w[t] * w[t];
                dSv[t] -= 0.5 * w2 * re;
                dNv[t] -= w2 * mod_sq;
            }
        }
    }

    if (!grad_c.empty())
        for (std::size_t t = 0; t < d; ++t) grad_c[t] = dS[t] / norm;
    if (!grad_v.empty()) {
        for (std::size_t t = 0; t < d; ++t) {
            const double dnorm = dNv[t] / (2.0 * norm);
            grad_v[t] = (dSv[t] * norm - inner * dnorm) / norm_sq;
        }
    }
    return value;
}

}  // namespace detail

Sketch model_sketch(const MixtureModel& theta, const FrequencyMatrix& freqs) {
    theta.validate();
    freqs.validate();
    require(theta.d == freqs.d, ErrorCode::dimension_mismatch,
            "model dimension does not match frequency dimension");

    Sketch z;
    z.values.resize(2 * freqs.m);
    detail::model_sketch_raw(theta.kind, theta.k, theta.d, theta.weights,
                             theta.centers, theta.variances, freqs, z.values);
    z.n = 0;
    z.fingerprint = freqs.fingerprint();
    return z;
}

double cost(const MixtureModel& theta, const Sketch& z,
            const FrequencyMatrix& freqs) {
    theta.validate();
    require(theta.d == freqs.d, ErrorCode::dimension_mismatch,
            "model dimension does not match frequency dimension");
    require(z.size() == freqs.m, ErrorCode::dimension_mismatch,
            "sketch length does not match frequency count");

    detail::SketchScratch scratch;
    return detail::cost_grad_raw(theta.kind, theta.k, theta.d, theta.weights,
                                 theta.centers, theta.variances, freqs, z.values,
                                 {}, {}, {}, scratch);
}

std::vector<double> cost_gradient(const MixtureModel& theta, const Sketch& z,
                                  const FrequencyMatrix& freqs) {
    theta.validate();
    require(theta.d == freqs.d, ErrorCode::dimension_mismatch,
            "model dimension does not match frequency dimension");
    require(z.size() == freqs.m, ErrorCode::dimension_mismatch,
            "sketch length does not match frequency count");

    const bool gaussian = theta.kind == ModelKind::Gaussian;
    const std::size_t kd = theta.k * theta.d;
    std::vector<double> grad(theta.k + kd + (gaussian ? kd : 0));
    std::span<double> gw(grad.data(), theta.k);
    std::span<double> gc(grad.data() + theta.k, kd);
    std::span<double> gv = gaussian ? std::span<double>(grad.data() + theta.k + kd, kd)
                                    : std::span<double>{};
    detail::SketchScratch scratch;
    detail::cost_grad_raw(theta.kind, theta.k, theta.d, theta.weights,
                          theta.centers, theta.variances, freqs, z.values,
                          gw, gc, gv, scratch);
    return grad;
}

AtomCorrelation atom_correlation(const MixtureModel& atom, const Sketch& residual,
                                 const FrequencyMatrix& freqs) {
    atom.validate();
    require(atom.k == 1, ErrorCode::invalid_argument,
            "atom correlation needs a single-component model");
    require(std::abs(atom.weights[0] - 1.0) <= 1e-12, ErrorCode::invalid_argument,
            "atom correlation needs a unit-weight atom");
    require(atom.d == freqs.d, ErrorCode::dimension_mismatch,
            "atom dimension does not match frequency dimension");
    require(residual.size() == freqs.m, ErrorCode::dimension_mismatch,
            "residual length does not match frequency count");

    const bool gaussian = atom.kind == ModelKind::Gaussian;
    AtomCorrelation out;
    out.gradient.resize(gaussian ? 2 * atom.d : atom.d);
    std::span<double> gc(out.gradient.data(), atom.d);
    std::span<double> gv = gaussian
        ? std::span<double>(out.gradient.data() + atom.d, atom.d)
        : std::span<double>{};
    out.value = detail::atom_correlation_raw(atom.kind, atom.d, atom.centers,
                                             atom.variances, freqs,
                                             residual.values, gc, gv);
    return out;
}

}  // namespace skl
