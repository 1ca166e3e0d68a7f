#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/types.hpp"

namespace skl {

// Draw m i.i.d. frequencies w = R * phi with phi uniform on the unit sphere
// and R from the requested radius law at scale sigma. Deterministic in seed;
// row j depends only on rows 0..j-1, which makes prefixes of a master draw
// reusable as smaller matrices.
FrequencyMatrix draw_frequencies(std::size_t m, std::size_t d, FreqLaw law,
                                 double sigma, std::uint64_t seed);

// First m rows of an existing draw, as a standalone matrix.
FrequencyMatrix frequency_prefix(const FrequencyMatrix& freqs, std::size_t m);

// sigma_hat = sqrt(mean ||x - x'||^2 / (2d)) over 1000 random pairs taken
// from a random subsample of the requested size. For a standard normal cloud
// this is ~1 in any dimension, so it tracks the per-coordinate spread.
double scale_heuristic(const Dataset& x, std::size_t subsample_size,
                       std::uint64_t seed);

// z_j = (1/n) sum_i exp(i w_j . x_i); single pass over the rows.
Sketch empirical_sketch(const Dataset& x, const FrequencyMatrix& freqs);

// Same result to within merge-reassociation tolerance, computed over row
// partitions (used when a worker count > 1 is requested).
Sketch empirical_sketch_parallel(const Dataset& x, const FrequencyMatrix& freqs,
                                 unsigned workers);

// Sample-count-weighted average of two empirical sketches of the same
// frequency draw. Errors if the fingerprints differ or either side is a
// model sketch.
Sketch merge_sketches(const Sketch& a, const Sketch& b);

// Closed-form sketch A(P_theta): sum_k alpha_k exp(i w_j . c_k) for Dirac
// atoms, with the extra exp(-sum_t w_jt^2 s_kt^2 / 2) damping for diagonal
// Gaussian atoms.
Sketch model_sketch(const MixtureModel& theta, const FrequencyMatrix& freqs);

// Sketch-matching cost ||z - A(P_theta)||_2^2 over the m complex entries.
double cost(const MixtureModel& theta, const Sketch& z,
            const FrequencyMatrix& freqs);

// Analytic gradient of cost() with respect to every free parameter of theta,
// flat layout: weights[K] | centers[K*d] | variances[K*d] (Gaussian only).
std::vector<double> cost_gradient(const MixtureModel& theta, const Sketch& z,
                                  const FrequencyMatrix& freqs);

struct AtomCorrelation {
    double value = 0.0;
    // center[d] | variances[d] (Gaussian kind); gradient of `value` in the
    // atom's own parameters.
    std::vector<double> gradient;
};

// Normalized correlation Re< A(P_atom)/||A(P_atom)||, residual > of a
// single-atom, unit-weight model against a residual sketch, plus gradient.
// A zero-norm atom sketch raises degenerate_atom.
AtomCorrelation atom_correlation(const MixtureModel& atom, const Sketch& residual,
                                 const FrequencyMatrix& freqs);

namespace detail {

// Reusable buffers for the hot evaluation paths; contents are overwritten by
// every call that takes one.
struct SketchScratch {
    std::vector<double> atoms;     // K x 2m interleaved atom sketches
    std::vector<double> damping;   // K x m Gaussian damping factors
};

// Fills `out` (length 2m) with the model sketch of raw parameter blocks;
// variances may be empty for Dirac atoms.
void model_sketch_raw(ModelKind kind, std::size_t k, std::size_t d,
                      std::span<const double> weights,
                      std::span<const double> centers,
                      std::span<const double> variances,
                      const FrequencyMatrix& freqs, std::span<double> out);

// Cost and (optionally) gradient over raw parameter blocks. Any gradient span
// may be empty to skip that block. Returns the cost.
double cost_grad_raw(ModelKind kind, std::size_t k, std::size_t d,
                     std::span<const double> weights,
                     std::span<const double> centers,
                     std::span<const double> variances,
                     const FrequencyMatrix& freqs, std::span<const double> z,
                     std::span<double> grad_w, std::span<double> grad_c,
                     std::span<double> grad_v, SketchScratch& scratch);

// Correlation value and gradient over raw single-atom blocks; grad spans may
// be empty. Returns the correlation.
double atom_correlation_raw(ModelKind kind, std::size_t d,
                            std::span<const double> center,
                            std::span<const double> variance,
                            const FrequencyMatrix& freqs,
                            std::span<const double> residual,
                            std::span<double> grad_c, std::span<double> grad_v);

// Unit-weight atom sketch written into out (length 2m).
void unit_atom_sketch(ModelKind kind, std::size_t d, std::span<const double> center,
                      std::span<const double> variance, const FrequencyMatrix& freqs,
                      std::span<double> out);

}  // namespace detail

}  // namespace skl
