#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semidec {

enum class ErrorCode {
    invalid_argument,
    shape_mismatch,
    non_finite,
    malformed_header,
    truncated_payload,
    io,
    config,
    timer_resolution,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `code()` is stable and is what the CLI prints.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        fail(code, message);
    }
}

}  // namespace semidec
