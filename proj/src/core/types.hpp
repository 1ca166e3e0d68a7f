#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace skl {

struct Dataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> points;  // n x d, row-major

    std::span<const double> row(std::size_t i) const {
        return {points.data() + i * d, d};
    }

    // n >= 1, d >= 1, all entries finite.
    void validate() const;
};

enum class FreqLaw {
    FoldedGaussian,  // p_R(R) proportional to exp(-(sigma R)^2)
    AdaptedRadius,   // p_R(R) proportional to sqrt((sR)^2 + (sR)^4/4) exp(-(sR)^2)
};

const char* law_name(FreqLaw law);           // "fg" / "ar"
FreqLaw law_from_name(const std::string& s);  // parse error on anything else

// The m x d frequency matrix Omega together with the recipe that produced it.
// Regenerating with the same (m, d, law, sigma, seed) reproduces the rows
// bit-exactly, and the first m' rows of a draw equal a fresh draw of m' rows,
// so prefixes of one master draw are themselves valid frequency matrices.
struct FrequencyMatrix {
    std::size_t m = 0;
    std::size_t d = 0;
    FreqLaw law = FreqLaw::FoldedGaussian;
    double sigma = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> omega;  // m x d, row-major; row j is frequency w_j

    std::span<const double> row(std::size_t j) const {
        return {omega.data() + j * d, d};
    }

    // FNV-1a over the little-endian byte serialization of omega; used as the
    // merge-compatibility check between sketches.
    std::uint64_t fingerprint() const;

    void validate() const;
};

// m averaged complex moments stored as interleaved (re, im) pairs. n is the
// number of samples averaged; n == 0 marks a closed-form model sketch.
struct Sketch {
    std::vector<double> values;  // length 2m
    std::uint64_t n = 0;
    std::uint64_t fingerprint = 0;

    std::size_t size() const { return values.size() / 2; }
    double re(std::size_t j) const { return values[2 * j]; }
    double im(std::size_t j) const { return values[2 * j + 1]; }

    double max_modulus() const;
};

enum class ModelKind { Dirac, Gaussian };

const char* kind_name(ModelKind kind);            // "dirac" / "gaussian"
ModelKind kind_from_name(const std::string& s);

// A weighted mixture of K atoms: Dirac centroids for k-means, diagonal
// Gaussians for GMM. Weights are kept as stored for sketch matching and only
// normalized where a probability density is required.
struct MixtureModel {
    ModelKind kind = ModelKind::Dirac;
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> weights;    // K
    std::vector<double> centers;    // K x d (c_k or mu_k)
    std::vector<double> variances;  // K x d, Gaussian kind only

    static MixtureModel dirac(std::size_t k, std::size_t d);
    static MixtureModel gaussian(std::size_t k, std::size_t d);

    std::span<const double> center(std::size_t i) const {
        return {centers.data() + i * d, d};
    }
    std::span<const double> variance(std::size_t i) const {
        return {variances.data() + i * d, d};
    }

    double weight_sum() const;

    // Copy with weights scaled to sum 1 (unchanged if the sum is not positive).
    MixtureModel normalized() const;

    // K >= 1, weights nonnegative and finite, Gaussian variances positive,
    // Dirac kind carries no variances.
    void validate() const;
};

}  // namespace skl
