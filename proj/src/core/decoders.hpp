#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/optimize.hpp"
#include "core/sketch.hpp"
#include "core/types.hpp"

namespace skl {

struct DecodeOptions {
    std::size_t k = 1;
    ModelKind kind = ModelKind::Dirac;

    // Per-coordinate bounds for atom centers (size d). When decoding with a
    // dataset at hand, data_box() is the usual choice; decoding from a sketch
    // alone requires explicit bounds.
    Box center_box;

    // Gaussian kind: variance search range. Optimization runs in log-variance
    // space inside [variance_lo, variance_hi_t]; an empty variance_hi defaults
    // to the squared center-box width per coordinate.
    double variance_lo = 1e-6;
    std::vector<double> variance_hi;

    std::size_t max_inner_iterations = 300;     // per local optimization
    std::size_t final_polish_iterations = 3000; // closing joint minimization
    std::size_t trials = 1;                     // CLOMPRxT
    std::uint64_t seed = 0;

    static Box data_box(const Dataset& x);
    void validate(std::size_t d) const;
    std::vector<double> resolved_variance_hi(std::size_t d) const;
};

struct GeneticOptions {
    std::size_t population = 100;
    std::size_t generations = 500;
    double gamma = 4.0;           // fitness ||z - A(P_theta)||^(-gamma)
    double mutation_scale = 0.05; // initial noise, fraction of box width
    double crossover_rate = 0.5;  // probability of an atom-swap crossover
    std::size_t elitism = 2;
    std::uint64_t seed = 0;       // 0: reuse DecodeOptions::seed

    void validate() const;
};

struct DecodeResult {
    // Final model; weights renormalized to sum 1 (raw_weights keeps the
    // pre-normalization values).
    MixtureModel model;
    double final_cost = 0.0;
    std::vector<std::pair<std::size_t, double>> cost_trace;
    std::vector<double> raw_weights;

    // Every atom position that was ever part of the support (flat rows of
    // length d); used by diagnostics and the replacement-property checks.
    std::vector<double> visited_centers;
    std::vector<double> visited_variances;

    std::uint64_t seed = 0;
    double elapsed_ms = 0.0;
};

// CL-OMP with replacement: 2K greedy iterations, each drawing a random atom,
// locally maximizing its correlation against the residual, pruning back to K
// atoms by nonnegative least squares, and jointly polishing all parameters.
DecodeResult clompr(const Sketch& z, const FrequencyMatrix& freqs,
                    const DecodeOptions& opts);

// T independent clompr runs on derived seeds; lowest final cost wins (ties go
// to the lower trial index). Errors propagate only if every trial fails.
DecodeResult clompr_multi(const Sketch& z, const FrequencyMatrix& freqs,
                          const DecodeOptions& opts, unsigned workers = 1);

// Population decoder: fitness-proportional selection, whole-atom crossover,
// annealed Gaussian mutation, elitism; the best individual ever seen gets the
// same NNLS + joint-polish finish as clompr.
DecodeResult geneticl(const Sketch& z, const FrequencyMatrix& freqs,
                      const DecodeOptions& opts, const GeneticOptions& gopts);

}  // namespace skl
