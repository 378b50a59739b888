#include "semidec/error.h"

namespace semidec {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::malformed_header: return "malformed_header";
        case ErrorCode::truncated_payload: return "truncated_payload";
        case ErrorCode::io: return "io";
        case ErrorCode::config: return "config";
        case ErrorCode::timer_resolution: return "timer_resolution";
    }
    return "unknown";
}

}  // namespace semidec
