#include "core/types.hpp"

#include <cmath>
#include <cstring>

namespace skl {

void Dataset::validate() const {
    require(n >= 1 && d >= 1, ErrorCode::invalid_argument,
            "dataset must have n >= 1 and d >= 1");
    require(points.size() == n * d, ErrorCode::invalid_argument,
            "dataset buffer size does not match n*d");
    for (double v : points)
        require(std::isfinite(v), ErrorCode::invalid_argument,
                "dataset contains a non-finite entry");
}

const char* law_name(FreqLaw law) {
    return law == FreqLaw::FoldedGaussian ? "fg" : "ar";
}

FreqLaw law_from_name(const std::string& s) {
    if (s == "fg") return FreqLaw::FoldedGaussian;
    if (s == "ar") return FreqLaw::AdaptedRadius;
    raise(ErrorCode::parse_error, "unknown frequency law '" + s + "' (expected \"fg\" or \"ar\")");
}

std::uint64_t FrequencyMatrix::fingerprint() const {
    std::uint64_t h = 14695981039346656037ULL;  // FNV offset basis
    for (double v : omega) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (bits >> (8 * byte)) & 0xFFULL;  // little-endian byte order
            h *= 1099511628211ULL;                // FNV prime
        }
    }
    return h;
}

void FrequencyMatrix::validate() const {
    require(m >= 1 && d >= 1, ErrorCode::invalid_argument,
            "frequency matrix must have m >= 1 and d >= 1");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_argument,
            "frequency scale sigma must be positive and finite");
    require(omega.size() == m * d, ErrorCode::invalid_argument,
            "frequency buffer size does not match m*d");
    for (double v : omega)
        require(std::isfinite(v), ErrorCode::invalid_argument,
                "frequency matrix contains a non-finite entry");
}

double Sketch::max_modulus() const {
    double best = 0.0;
    for (std::size_t j = 0; j < size(); ++j)
        best = std::max(best, std::hypot(re(j), im(j)));
    return best;
}

const char* kind_name(ModelKind kind) {
    return kind == ModelKind::Dirac ? "dirac" : "gaussian";
}

ModelKind kind_from_name(const std::string& s) {
    if (s == "dirac") return ModelKind::Dirac;
    if (s == "gaussian") return ModelKind::Gaussian;
    raise(ErrorCode::parse_error, "unknown model kind '" + s + "' (expected \"dirac\" or \"gaussian\")");
}

MixtureModel MixtureModel::dirac(std::size_t k, std::size_t d) {
    MixtureModel m;
    m.kind = ModelKind::Dirac;
    m.k = k;
    m.d = d;
    m.weights.assign(k, 0.0);
    m.centers.assign(k * d, 0.0);
    return m;
}

MixtureModel MixtureModel::gaussian(std::size_t k, std::size_t d) {
    MixtureModel m;
    m.kind = ModelKind::Gaussian;
    m.k = k;
    m.d = d;
    m.weights.assign(k, 0.0);
    m.centers.assign(k * d, 0.0);
    m.variances.assign(k * d, 1.0);
    return m;
}

double MixtureModel::weight_sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

MixtureModel MixtureModel::normalized() const {
    MixtureModel out = *this;
    const double s = weight_sum();
    if (s > 0.0)
        for (double& w : out.weights) w /= s;
    return out;
}

void MixtureModel::validate() const {
    require(k >= 1 && d >= 1, ErrorCode::invalid_argument,
            "mixture model must have K >= 1 and d >= 1");
    require(weights.size() == k && centers.size() == k * d,
            ErrorCode::invalid_argument, "mixture model buffer sizes do not match K, d");
    for (double w : weights)
        require(std::isfinite(w) && w >= 0.0, ErrorCode::invalid_argument,
                "mixture weights must be finite and nonnegative");
    for (double c : centers)
        require(std::isfinite(c), ErrorCode::invalid_argument,
                "mixture centers must be finite");
    if (kind == ModelKind::Dirac) {
        require(variances.empty(), ErrorCode::invalid_argument,
                "Dirac mixture must not carry variances");
    } else {
        require(variances.size() == k * d, ErrorCode::invalid_argument,
                "Gaussian mixture variance buffer size does not match K*d");
        for (double v : variances)
            require(std::isfinite(v) && v > 0.0, ErrorCode::invalid_argument,
                    "Gaussian variances must be positive and finite");
    }
}

}  // namespace skl
