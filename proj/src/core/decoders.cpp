#include "core/decoders.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include "core/nnls.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace skl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr double kDegenerateSentinel = 1e300;

// Parameter vector layout shared by the joint optimizations:
// weights[K] | centers[K*d] | log-variances[K*d] (Gaussian kind only).
struct ParamLayout {
    ModelKind kind;
    std::size_t k, d;

    bool gaussian() const { return kind == ModelKind::Gaussian; }
    std::size_t w_off() const { return 0; }
    std::size_t c_off() const { return k; }
    std::size_t v_off() const { return k + k * d; }
    std::size_t size() const { return k + k * d + (gaussian() ? k * d : 0); }
};

// Joint sketch-matching cost over the packed parameter vector. Variances are
// optimized directly; the box projection keeps them positive (a log
// parameterization freezes the gradient when an atom collapses to a tiny
// variance, which trapped decodes at near-Dirac atoms).
class JointObjective {
public:
    JointObjective(ParamLayout layout, const FrequencyMatrix& freqs,
                   std::span<const double> z)
        : layout_(layout), freqs_(freqs), z_(z) {}

    double operator()(std::span<const double> p, std::span<double> grad) {
        const std::size_t k = layout_.k;
        const std::size_t kd = layout_.k * layout_.d;
        std::span<const double> weights = p.subspan(layout_.w_off(), k);
        std::span<const double> centers = p.subspan(layout_.c_off(), kd);
        std::span<const double> variances =
            layout_.gaussian() ? p.subspan(layout_.v_off(), kd)
                               : std::span<const double>{};
        if (grad.empty()) {
            return detail::cost_grad_raw(layout_.kind, k, layout_.d, weights,
                                         centers, variances, freqs_, z_, {}, {},
                                         {}, scratch_);
        }
        std::span<double> gw = grad.subspan(layout_.w_off(), k);
        std::span<double> gc = grad.subspan(layout_.c_off(), kd);
        std::span<double> gv = layout_.gaussian() ? grad.subspan(layout_.v_off(), kd)
                                                  : std::span<double>{};
        return detail::cost_grad_raw(layout_.kind, k, layout_.d, weights, centers,
                                     variances, freqs_, z_, gw, gc, gv, scratch_);
    }

private:
    ParamLayout layout_;
    const FrequencyMatrix& freqs_;
    std::span<const double> z_;
    detail::SketchScratch scratch_;
};

// Negated atom correlation over center[d] | variance[d]. Degenerate atoms
// (vanishing sketch norm) yield a large sentinel value instead of throwing so
// line searches simply reject them.
class AtomObjective {
public:
    AtomObjective(ModelKind kind, std::size_t d, const FrequencyMatrix& freqs,
                  std::span<const double> residual)
        : kind_(kind), d_(d), freqs_(freqs), residual_(residual) {}

    double operator()(std::span<const double> p, std::span<double> grad) {
        const bool gaussian = kind_ == ModelKind::Gaussian;
        std::span<const double> center = p.subspan(0, d_);
        std::span<const double> variance =
            gaussian ? p.subspan(d_, d_) : std::span<const double>{};
        try {
            double value;
            if (grad.empty()) {
                value = detail::atom_correlation_raw(kind_, d_, center, variance,
                                                     freqs_, residual_, {}, {});
            } else {
                std::span<double> gc = grad.subspan(0, d_);
                std::span<double> gv =
                    gaussian ? grad.subspan(d_, d_) : std::span<double>{};
                value = detail::atom_correlation_raw(kind_, d_, center, variance,
                                                     freqs_, residual_, gc, gv);
                for (double& g : grad) g = -g;
            }
            return -value;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::degenerate_atom) throw;
            if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
            return kDegenerateSentinel;
        }
    }

private:
    ModelKind kind_;
    std::size_t d_;
    const FrequencyMatrix& freqs_;
    std::span<const double> residual_;
};

struct Support {
    std::vector<double> centers;    // count x d
    std::vector<double> variances;  // count x d (Gaussian kind)
    std::vector<double> weights;    // count
    std::size_t count = 0;

    void append(std::span<const double> center, std::span<const double> variance) {
        centers.insert(centers.end(), center.begin(), center.end());
        variances.insert(variances.end(), variance.begin(), variance.end());
        weights.push_back(0.0);
        ++count;
    }

    void remove(std::size_t idx, std::size_t d, bool gaussian) {
        centers.erase(centers.begin() + static_cast<std::ptrdiff_t>(idx * d),
                      centers.begin() + static_cast<std::ptrdiff_t>((idx + 1) * d));
        if (gaussian)
            variances.erase(variances.begin() + static_cast<std::ptrdiff_t>(idx * d),
                            variances.begin() + static_cast<std::ptrdiff_t>((idx + 1) * d));
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(idx));
        --count;
    }
};

struct DecodeContext {
    ModelKind kind;
    std::size_t k, d;
    const FrequencyMatrix& freqs;
    const Sketch& z;
    Box atom_box;    // center | variance bounds for one atom
    Box center_box;  // centers only
    double var_lo = 0.0;
    std::vector<double> var_hi;
    // Fresh atoms draw their variance log-uniformly from this moderate
    // sub-range; both extremes of the full range are bad starting points (a
    // near-zero variance has a tiny cost gradient, a huge one kills the atom
    // sketch outright).
    std::vector<double> logvar_init_lo;
    std::vector<double> logvar_init_hi;

    bool gaussian() const { return kind == ModelKind::Gaussian; }
};

DecodeContext make_context(const Sketch& z, const FrequencyMatrix& freqs,
                           const DecodeOptions& opts) {
    freqs.validate();
    require(z.size() == freqs.m, ErrorCode::dimension_mismatch,
            "sketch length does not match frequency count");
    require(z.fingerprint == freqs.fingerprint(), ErrorCode::incompatible_sketch,
            "sketch was not produced by this frequency draw");
    opts.validate(freqs.d);

    DecodeContext ctx{opts.kind, opts.k, freqs.d, freqs, z, {}, {}, 0.0, {}, {}, {}};
    ctx.center_box = opts.center_box;
    ctx.atom_box = opts.center_box;
    if (ctx.gaussian()) {
        ctx.var_lo = opts.variance_lo;
        ctx.var_hi = opts.resolved_variance_hi(freqs.d);
        ctx.logvar_init_lo.resize(freqs.d);
        ctx.logvar_init_hi.resize(freqs.d);
        for (std::size_t t = 0; t < freqs.d; ++t) {
            ctx.atom_box.lo.push_back(ctx.var_lo);
            ctx.atom_box.hi.push_back(ctx.var_hi[t]);

            const double width = ctx.center_box.hi[t] - ctx.center_box.lo[t];
            double init_lo = std::max(ctx.var_lo, 0.02 * width * 0.02 * width);
            double init_hi = std::min(ctx.var_hi[t], 0.5 * width * 0.5 * width);
            if (!(init_lo < init_hi)) {
                init_lo = ctx.var_lo;
                init_hi = ctx.var_hi[t];
            }
            ctx.logvar_init_lo[t] = std::log(init_lo);
            ctx.logvar_init_hi[t] = std::log(init_hi);
        }
    }
    return ctx;
}

Box joint_box(const DecodeContext& ctx, std::size_t count) {
    Box box;
    const double inf = std::numeric_limits<double>::infinity();
    box.lo.assign(count, 0.0);
    box.hi.assign(count, inf);
    for (std::size_t a = 0; a < count; ++a) {
        box.lo.insert(box.lo.end(), ctx.center_box.lo.begin(), ctx.center_box.lo.end());
        box.hi.insert(box.hi.end(), ctx.center_box.hi.begin(), ctx.center_box.hi.end());
    }
    if (ctx.gaussian()) {
        for (std::size_t a = 0; a < count; ++a)
            for (std::size_t t = 0; t < ctx.d; ++t) {
                box.lo.push_back(ctx.var_lo);
                box.hi.push_back(ctx.var_hi[t]);
            }
    }
    return box;
}

std::vector<double> pack_params(const DecodeContext& ctx, const Support& s) {
    std::vector<double> p;
    p.reserve(s.count * (1 + ctx.d + (ctx.gaussian() ? ctx.d : 0)));
    p.insert(p.end(), s.weights.begin(), s.weights.end());
    p.insert(p.end(), s.centers.begin(), s.centers.end());
    if (ctx.gaussian()) p.insert(p.end(), s.variances.begin(), s.variances.end());
    return p;
}

void unpack_params(const DecodeContext& ctx, std::span<const double> p, Support& s) {
    const std::size_t count = s.count;
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(count),
              s.weights.begin());
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(count),
              p.begin() + static_cast<std::ptrdiff_t>(count + count * ctx.d),
              s.centers.begin());
    if (ctx.gaussian())
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(count + count * ctx.d),
                  p.end(), s.variances.begin());
}

Sketch support_atom_sketch(const DecodeContext& ctx, const Support& s,
                           std::size_t idx) {
    Sketch sk;
    sk.values.resize(2 * ctx.freqs.m);
    detail::unit_atom_sketch(
        ctx.kind, ctx.d, {s.centers.data() + idx * ctx.d, ctx.d},
        ctx.gaussian()
            ? std::span<const double>{s.variances.data() + idx * ctx.d, ctx.d}
            : std::span<const double>{},
        ctx.freqs, sk.values);
    sk.n = 0;
    sk.fingerprint = ctx.z.fingerprint;
    return sk;
}

std::vector<double> solve_support_weights(const DecodeContext& ctx, const Support& s) {
    std::vector<Sketch> atoms;
    atoms.reserve(s.count);
    for (std::size_t a = 0; a < s.count; ++a)
        atoms.push_back(support_atom_sketch(ctx, s, a));
    return nnls_weights(atoms, ctx.z);
}

void record_visited(const DecodeContext& ctx, const Support& s, DecodeResult& out) {
    out.visited_centers.insert(out.visited_centers.end(), s.centers.begin(),
                               s.centers.end());
    if (ctx.gaussian())
        out.visited_variances.insert(out.visited_variances.end(),
                                     s.variances.begin(), s.variances.end());
}

// Draw a random atom inside the search box and locally maximize its
// correlation against the residual. Returns center|variance parameters, or
// nothing when every attempt hit a degenerate atom sketch.
std::optional<std::vector<double>> search_atom(const DecodeContext& ctx,
                                               std::span<const double> residual,
                                               Rng& rng,
                                               std::size_t max_inner) {
    AtomObjective objective(ctx.kind, ctx.d, ctx.freqs, residual);
    Objective fn = [&objective](std::span<const double> p, std::span<double> g) {
        return objective(p, g);
    };
    const std::size_t dim = ctx.atom_box.size();
    std::vector<double> init(dim);
    for (int attempt = 0; attempt < 10; ++attempt) {
        for (std::size_t t = 0; t < ctx.d; ++t)
            init[t] = rng.next_uniform(ctx.center_box.lo[t], ctx.center_box.hi[t]);
        if (ctx.gaussian())
            for (std::size_t t = 0; t < ctx.d; ++t)
                init[ctx.d + t] = std::exp(
                    rng.next_uniform(ctx.logvar_init_lo[t], ctx.logvar_init_hi[t]));
        MinimizeResult res = local_minimize(fn, init, ctx.atom_box, max_inner);
        if (res.value < kDegenerateSentinel && std::isfinite(res.value))
            return std::move(res.x);
    }
    return std::nullopt;
}

DecodeResult finish_result(const DecodeContext& ctx, Support& s,
                           DecodeResult&& out, std::size_t trace_index) {
    MixtureModel model;
    model.kind = ctx.kind;
    model.k = s.count;
    model.d = ctx.d;
    model.weights = s.weights;
    model.centers = s.centers;
    if (ctx.gaussian()) model.variances = s.variances;
    out.raw_weights = s.weights;
    out.model = model.normalized();
    out.final_cost = cost(out.model, ctx.z, ctx.freqs);
    out.cost_trace.emplace_back(trace_index, out.final_cost);
    return std::move(out);
}

}  // namespace

Box DecodeOptions::data_box(const Dataset& x) {
    x.validate();
    Box box;
    box.lo.assign(x.d, std::numeric_limits<double>::infinity());
    box.hi.assign(x.d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < x.n; ++i) {
        const double* row = x.points.data() + i * x.d;
        for (std::size_t t = 0; t < x.d; ++t) {
            box.lo[t] = std::min(box.lo[t], row[t]);
            box.hi[t] = std::max(box.hi[t], row[t]);
        }
    }
    // Degenerate (constant) coordinates still need an open interval.
    for (std::size_t t = 0; t < x.d; ++t) {
        if (box.lo[t] >= box.hi[t]) {
            const double pad = std::max(1e-6, std::abs(box.lo[t]) * 1e-6);
            box.lo[t] -= pad;
            box.hi[t] += pad;
        }
    }
    return box;
}

void DecodeOptions::validate(std::size_t d) const {
    require(k >= 1, ErrorCode::invalid_argument, "decode target K must be >= 1");
    require(trials >= 1, ErrorCode::invalid_argument, "trial count must be >= 1");
    require(max_inner_iterations >= 1, ErrorCode::invalid_argument,
            "max_inner_iterations must be >= 1");
    require(center_box.size() == d, ErrorCode::invalid_argument,
            "search box dimension does not match the frequency dimension");
    center_box.validate();
    if (kind == ModelKind::Gaussian) {
        require(variance_lo > 0.0, ErrorCode::invalid_argument,
                "variance lower bound must be positive");
        for (double hi : resolved_variance_hi(d))
            require(hi > variance_lo, ErrorCode::invalid_argument,
                    "variance upper bound must exceed the lower bound");
    }
}

std::vector<double> DecodeOptions::resolved_variance_hi(std::size_t d) const {
    if (!variance_hi.empty()) {
        require(variance_hi.size() == d, ErrorCode::invalid_argument,
                "variance_hi length does not match dimension");
        return variance_hi;
    }
    std::vector<double> out(d);
    for (std::size_t t = 0; t < d; ++t) {
        const double width = center_box.hi[t] - center_box.lo[t];
        out[t] = width * width;
    }
    return out;
}

void GeneticOptions::validate() const {
    require(population >= 2, ErrorCode::invalid_argument,
            "population must be >= 2");
    require(generations >= 1, ErrorCode::invalid_argument,
            "generations must be >= 1");
    require(gamma > 0.0, ErrorCode::invalid_argument, "gamma must be positive");
    require(mutation_scale >= 0.0, ErrorCode::invalid_argument,
            "mutation_scale must be nonnegative");
    require(crossover_rate >= 0.0 && crossover_rate <= 1.0,
            ErrorCode::invalid_argument, "crossover_rate must be in [0,1]");
    require(elitism <= population, ErrorCode::invalid_argument,
            "elitism cannot exceed the population size");
}

DecodeResult clompr(const Sketch& z, const FrequencyMatrix& freqs,
                    const DecodeOptions& opts) {
    const auto start = Clock::now();
    DecodeContext ctx = make_context(z, freqs, opts);

    DecodeResult out;
    out.seed = opts.seed;

    Rng rng = Rng(opts.seed).derive(0xA70);
    Support support;
    std::vector<double> residual(2 * ctx.freqs.m);

    const std::size_t iterations = 2 * ctx.k;
    for (std::size_t iter = 0; iter < iterations; ++iter) {
        // (1) residual and a locally optimized new atom
        for (std::size_t j = 0; j < residual.size(); ++j) residual[j] = z.values[j];
        if (support.count > 0) {
            std::vector<double> model(2 * ctx.freqs.m);
            detail::model_sketch_raw(ctx.kind, support.count, ctx.d, support.weights,
                                     support.centers, support.variances, ctx.freqs,
                                     model);
            for (std::size_t j = 0; j < residual.size(); ++j) residual[j] -= model[j];
        }
        auto atom = search_atom(ctx, residual, rng, opts.max_inner_iterations);
        if (atom) {
            // (2) append to the support
            std::span<const double> p(*atom);
            support.append(p.subspan(0, ctx.d),
                           ctx.gaussian() ? p.subspan(ctx.d, ctx.d)
                                          : std::span<const double>{});
            record_visited(ctx, support, out);
        }
        if (support.count == 0) continue;

        // (3) prune back to K by smallest NNLS weight
        if (support.count > ctx.k) {
            support.weights = solve_support_weights(ctx, support);
            std::size_t drop = 0;
            for (std::size_t a = 1; a < support.count; ++a)
                if (support.weights[a] <= support.weights[drop]) drop = a;
            support.remove(drop, ctx.d, ctx.gaussian());
        }

        // (4) re-solve the weights on the kept support
        support.weights = solve_support_weights(ctx, support);

        // (5) joint local minimization of the full cost
        ParamLayout layout{ctx.kind, support.count, ctx.d};
        JointObjective objective(layout, ctx.freqs, z.values);
        Objective fn = [&objective](std::span<const double> p, std::span<double> g) {
            return objective(p, g);
        };
        MinimizeResult res = local_minimize(fn, pack_params(ctx, support),
                                            joint_box(ctx, support.count),
                                            opts.max_inner_iterations);
        unpack_params(ctx, res.x, support);
        record_visited(ctx, support, out);
        out.cost_trace.emplace_back(iter, res.value);
    }

    require(support.count > 0, ErrorCode::decode_failure,
            "no usable atom was found in any greedy iteration");

    // Closing joint polish with a larger budget.
    {
        ParamLayout layout{ctx.kind, support.count, ctx.d};
        JointObjective objective(layout, ctx.freqs, z.values);
        Objective fn = [&objective](std::span<const double> p, std::span<double> g) {
            return objective(p, g);
        };
        MinimizeResult res = local_minimize(fn, pack_params(ctx, support),
                                            joint_box(ctx, support.count),
                                            opts.final_polish_iterations);
        unpack_params(ctx, res.x, support);
        record_visited(ctx, support, out);
    }

    out = finish_result(ctx, support, std::move(out), iterations);
    out.elapsed_ms = elapsed_ms_since(start);
    return out;
}

DecodeResult clompr_multi(const Sketch& z, const FrequencyMatrix& freqs,
                          const DecodeOptions& opts, unsigned workers) {
    const auto start = Clock::now();
    require(opts.trials >= 1, ErrorCode::invalid_argument, "trials must be >= 1");

    const Rng root(opts.seed);
    std::vector<std::optional<DecodeResult>> results(opts.trials);
    std::vector<std::exception_ptr> errors(opts.trials);

    parallel_for(opts.trials, workers, [&](std::size_t i) {
        DecodeOptions trial_opts = opts;
        trial_opts.trials = 1;
        trial_opts.seed = root.derive(0x7714 + i).key();
        try {
            results[i] = clompr(z, freqs, trial_opts);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });

    std::size_t best = opts.trials;
    for (std::size_t i = 0; i < opts.trials; ++i) {
        if (!results[i]) continue;
        if (best == opts.trials || results[i]->final_cost < results[best]->final_cost)
            best = i;
    }
    if (best == opts.trials) {
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
        raise(ErrorCode::decode_failure, "all decode trials failed");
    }

    DecodeResult out = std::move(*results[best]);
    out.seed = opts.seed;
    out.elapsed_ms = elapsed_ms_since(start);
    return out;
}

namespace {

struct Chromosome {
    // log-weights[K] | centers[K*d] | log-variances[K*d] (Gaussian kind)
    std::vector<double> logw;
    std::vector<double> centers;
    std::vector<double> logvars;
};

void chromosome_weights(const Chromosome& c, std::vector<double>& w) {
    const std::size_t k = c.logw.size();
    w.resize(k);
    double max_lw = c.logw[0];
    for (double lw : c.logw) max_lw = std::max(max_lw, lw);
    double sum = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        w[a] = std::exp(c.logw[a] - max_lw);
        sum += w[a];
    }
    for (double& v : w) v /= sum;
}

// Residual norm ||z - A(P_theta)|| with weights renormalized to sum 1.
double chromosome_residual_norm(const DecodeContext& ctx, const Chromosome& c,
                                std::vector<double>& w_scratch,
                                std::vector<double>& var_scratch,
                                std::vector<double>& sketch_scratch) {
    const std::size_t k = c.logw.size();
    chromosome_weights(c, w_scratch);
    var_scratch.resize(c.logvars.size());
    for (std::size_t i = 0; i < c.logvars.size(); ++i)
        var_scratch[i] = std::exp(c.logvars[i]);
    sketch_scratch.resize(2 * ctx.freqs.m);
    detail::model_sketch_raw(ctx.kind, k, ctx.d, w_scratch, c.centers, var_scratch,
                             ctx.freqs, sketch_scratch);
    double sq = 0.0;
    for (std::size_t j = 0; j < sketch_scratch.size(); ++j) {
        const double diff = sketch_scratch[j] - ctx.z.values[j];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

}  // namespace

DecodeResult geneticl(const Sketch& z, const FrequencyMatrix& freqs,
                      const DecodeOptions& opts, const GeneticOptions& gopts) {
    const auto start = Clock::now();
    DecodeContext ctx = make_context(z, freqs, opts);
    gopts.validate();

    const std::uint64_t master = gopts.seed != 0 ? gopts.seed : opts.seed;
    const Rng root(master);
    const std::size_t pop_size = gopts.population;
    const std::size_t k = ctx.k;
    const std::size_t d = ctx.d;

    DecodeResult out;
    out.seed = master;

    // Spread of the log-weight mutation; roughly two decades of weight ratio.
    constexpr double kLogWeightRange = 4.0;

    std::vector<Chromosome> population(pop_size);
    for (std::size_t i = 0; i < pop_size; ++i) {
        Rng rng = root.derive(100 + i);
        Chromosome& c = population[i];
        c.logw.assign(k, 0.0);
        c.centers.resize(k * d);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t t = 0; t < d; ++t)
                c.centers[a * d + t] =
                    rng.next_uniform(ctx.center_box.lo[t], ctx.center_box.hi[t]);
        if (ctx.gaussian()) {
            c.logvars.resize(k * d);
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t t = 0; t < d; ++t)
                    c.logvars[a * d + t] = rng.next_uniform(ctx.logvar_init_lo[t],
                                                            ctx.logvar_init_hi[t]);
        }
    }

    std::vector<double> w_scratch, var_scratch, sketch_scratch;
    std::vector<double> residual_norm(pop_size);
    auto evaluate_all = [&] {
        for (std::size_t i = 0; i < pop_size; ++i)
            residual_norm[i] = chromosome_residual_norm(ctx, population[i], w_scratch,
                                                        var_scratch, sketch_scratch);
    };
    evaluate_all();

    Chromosome best_genome;
    double best_norm = std::numeric_limits<double>::infinity();
    auto track_best = [&] {
        for (std::size_t i = 0; i < pop_size; ++i) {
            if (residual_norm[i] < best_norm) {
                best_norm = residual_norm[i];
                best_genome = population[i];
            }
        }
    };
    track_best();

    std::vector<std::size_t> order(pop_size);
    std::vector<double> select_cdf(pop_size);
    bool early_exit = false;

    for (std::size_t gen = 0; gen < gopts.generations && !early_exit; ++gen) {
        out.cost_trace.emplace_back(gen, best_norm * best_norm);

        // Fitness f = r^-gamma; a candidate whose fitness overflows (zero or
        // vanishing residual) is selected outright and the evolution stops.
        for (std::size_t i = 0; i < pop_size; ++i) {
            if (!std::isfinite(std::pow(residual_norm[i], -gopts.gamma))) {
                if (residual_norm[i] < best_norm) {
                    best_norm = residual_norm[i];
                    best_genome = population[i];
                }
                early_exit = true;
            }
        }
        if (early_exit) break;

        // Selection probabilities via softmax of -gamma*log r (numerically
        // safe version of normalizing r^-gamma).
        double max_logf = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pop_size; ++i)
            max_logf = std::max(max_logf, -gopts.gamma * std::log(residual_norm[i]));
        double total = 0.0;
        for (std::size_t i = 0; i < pop_size; ++i) {
            total += std::exp(-gopts.gamma * std::log(residual_norm[i]) - max_logf);
            select_cdf[i] = total;
        }

        Rng gen_rng = root.derive(1000 + gen);
        auto select_parent = [&]() -> std::size_t {
            const double u = gen_rng.next_unit() * total;
            const auto it = std::lower_bound(select_cdf.begin(), select_cdf.end(), u);
            return std::min<std::size_t>(
                static_cast<std::size_t>(it - select_cdf.begin()), pop_size - 1);
        };

        for (std::size_t i = 0; i < pop_size; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (residual_norm[a] != residual_norm[b])
                return residual_norm[a] < residual_norm[b];
            return a < b;
        });

        const double anneal =
            1.0 - 0.99 * (gopts.generations > 1
                              ? static_cast<double>(gen) /
                                    static_cast<double>(gopts.generations - 1)
                              : 0.0);
        const double mut = gopts.mutation_scale * anneal;

        auto mutate = [&](Chromosome& c) {
            if (mut <= 0.0) return;
            for (std::size_t a = 0; a < k; ++a) {
                c.logw[a] += gen_rng.next_normal() * mut * kLogWeightRange;
                for (std::size_t t = 0; t < d; ++t) {
                    const double width = ctx.center_box.hi[t] - ctx.center_box.lo[t];
                    double& x = c.centers[a * d + t];
                    x += gen_rng.next_normal() * mut * width;
                    x = std::min(std::max(x, ctx.center_box.lo[t]), ctx.center_box.hi[t]);
                }
                if (ctx.gaussian()) {
                    for (std::size_t t = 0; t < d; ++t) {
                        const double log_lo = std::log(ctx.var_lo);
                        const double log_hi = std::log(ctx.var_hi[t]);
                        double& v = c.logvars[a * d + t];
                        v += gen_rng.next_normal() * mut * (log_hi - log_lo);
                        v = std::min(std::max(v, log_lo), log_hi);
                    }
                }
            }
        };

        std::vector<Chromosome> next;
        next.reserve(pop_size);
        for (std::size_t e = 0; e < gopts.elitism && e < pop_size; ++e)
            next.push_back(population[order[e]]);
        while (next.size() < pop_size) {
            Chromosome child_a = population[select_parent()];
            Chromosome child_b = population[select_parent()];
            if (gen_rng.next_unit() < gopts.crossover_rate) {
                for (std::size_t a = 0; a < k; ++a) {
                    if (gen_rng.next_unit() < 0.5) continue;
                    std::swap_ranges(child_a.centers.begin() + static_cast<std::ptrdiff_t>(a * d),
                                     child_a.centers.begin() + static_cast<std::ptrdiff_t>((a + 1) * d),
                                     child_b.centers.begin() + static_cast<std::ptrdiff_t>(a * d));
                    std::swap(child_a.logw[a], child_b.logw[a]);
                    if (ctx.gaussian())
                        std::swap_ranges(child_a.logvars.begin() + static_cast<std::ptrdiff_t>(a * d),
                                         child_a.logvars.begin() + static_cast<std::ptrdiff_t>((a + 1) * d),
                                         child_b.logvars.begin() + static_cast<std::ptrdiff_t>(a * d));
                }
            }
            mutate(child_a);
            next.push_back(std::move(child_a));
            if (next.size() < pop_size) {
                mutate(child_b);
                next.push_back(std::move(child_b));
            }
        }
        population = std::move(next);
        evaluate_all();
        track_best();
    }

    // Final NNLS weight re-solve and joint polish on the best genome ever.
    Support support;
    support.count = k;
    support.centers = best_genome.centers;
    if (ctx.gaussian()) {
        support.variances.resize(k * d);
        for (std::size_t i = 0; i < k * d; ++i)
            support.variances[i] = std::exp(best_genome.logvars[i]);
    }
    support.weights.assign(k, 0.0);
    support.weights = solve_support_weights(ctx, support);

    ParamLayout layout{ctx.kind, k, d};
    JointObjective objective(layout, ctx.freqs, z.values);
    Objective fn = [&objective](std::span<const double> p, std::span<double> g) {
        return objective(p, g);
    };
    MinimizeResult res = local_minimize(fn, pack_params(ctx, support),
                                        joint_box(ctx, k),
                                        opts.final_polish_iterations);
    unpack_params(ctx, res.x, support);
    record_visited(ctx, support, out);

    out = finish_result(ctx, support, std::move(out), gopts.generations);
    out.elapsed_ms = elapsed_ms_since(start);
    return out;
}

}  // namespace skl
