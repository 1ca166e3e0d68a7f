#pragma once

#include <cstdint>
#include <string>

#include "core/types.hpp"

namespace skl {

enum class WeightMode { Uniform, Dirichlet5 };

const char* weight_mode_name(WeightMode mode);  // "uniform" / "dirichlet5"
WeightMode weight_mode_from_name(const std::string& s);

struct GeneratorConfig {
    std::size_t k = 5;
    std::size_t d = 5;
    std::size_t n = 10000;
    double separation = 3.0;   // inter-center spacing, in within-cluster stds
    double within_std = 1.0;
    WeightMode weight_mode = WeightMode::Uniform;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GeneratedData {
    Dataset data;
    MixtureModel ground_truth;  // Gaussian, isotropic within_std^2 covariance
    bool separation_warning = false;
};

// K centers uniform in [-L, L]^d with L = separation * within_std * K^(1/d),
// resampled (up to 100 times each) while closer than
// separation * within_std * sqrt(d) to an accepted center; isotropic
// within-cluster noise. Deterministic in seed.
GeneratedData generate_gmm_data(const GeneratorConfig& cfg);

// Binary dataset format: magic "CLDS", u32 version=1, u64 n, u32 d, then
// n*d little-endian f64 row-major.
Dataset read_dataset(const std::string& path);
void write_dataset(const Dataset& x, const std::string& path);

// CSV interchange: d numeric columns, comma separated, no header; tolerant of
// a trailing newline and CR-LF endings. Errors cite the offending line.
Dataset import_csv(const std::string& path);

}  // namespace skl
