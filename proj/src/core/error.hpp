#pragma once

#include <stdexcept>
#include <string>

namespace skl {

enum class ErrorCode {
    invalid_argument = 1,
    dimension_mismatch = 2,
    incompatible_sketch = 3,
    degenerate_atom = 4,
    degenerate_scale = 5,
    decode_failure = 6,
    io_error = 7,
    parse_error = 8,
};

// All recoverable failures are reported through this type; the C API maps
// ErrorCode onto its numeric error codes one-to-one.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string msg)
        : std::runtime_error(std::move(msg)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) raise(code, msg);
}

}  // namespace skl
