#pragma once

#include <span>
#include <vector>

#include "core/types.hpp"

namespace skl {

// Lawson-Hanson active-set solver for min ||b - A w||_2 s.t. w >= 0, where A
// has `cols` columns stored contiguously (each of length `rows`). Runs until
// the KKT residual is <= 1e-9 * max(1, ||A^T b||_inf); raises decode_failure
// if the active-set loop exceeds 10^4 iterations.
std::vector<double> nnls(std::span<const double> columns, std::size_t rows,
                         std::size_t cols, std::span<const double> b);

// Nonnegative weights for min ||z - sum_k w_k a_k||_2 over atom sketches,
// complex entries treated as stacked reals.
std::vector<double> nnls_weights(std::span<const Sketch> atom_sketches,
                                 const Sketch& z);

}  // namespace skl
