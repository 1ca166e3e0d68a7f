#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace skl {

struct SelfcheckResult {
    bool ok = false;
    std::string report;  // one line per check
};

// Runs the library's invariant suite: sampling-law moments, gradient versus
// central finite differences, merge associativity, sketch boundedness, the
// CLT consistency check, NNLS versus brute-force active-set enumeration, and
// decode determinism. `quick` trims repetition counts.
SelfcheckResult run_selfcheck(std::uint64_t seed, bool quick);

}  // namespace skl
